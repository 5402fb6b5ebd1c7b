use nalgebra::{DMatrix, SMatrix};

use crate::error::{Error, Result};

use super::cache::GeometryCache;
use super::manifold::{FieldMatrix, Frame, Manifold, Point, TangentVector, TOL_CONSTRAINT};

/// `L[i][j]` holds `L_ij X_k` in column `k`, where
/// `L_ij = nabla_{X_i} nabla_{X_j} - nabla_{nabla_{X_i} X_j}`.
pub type SecondCovariant<const D: usize, const N: usize> = [[Frame<D, N>; N]; N];

/// Smallest admissible `d`-th singular value of the frame matrix.
pub const ELLIPTICITY_TOL: f64 = 1e-8;

/// The four inner-product terms making up `B^{jk}`:
/// `B = (l_trace - l_cross - connection_trace + connection_product) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BTerms {
    /// `sum_i <L_ji X_i, X_k>`
    pub l_trace: f64,
    /// `sum_i <L_ij X_k, X_i>`
    pub l_cross: f64,
    /// `<nabla_{X_j} X_k, sum_i nabla_{X_i} X_i>`
    pub connection_trace: f64,
    /// `sum_{i,p} <nabla_{X_p} X_i, X_k> <nabla_{X_j} X_p, X_i>`
    pub connection_product: f64,
}

impl BTerms {
    pub fn total(&self) -> f64 {
        0.5 * (self.l_trace - self.l_cross - self.connection_trace + self.connection_product)
    }
}

/// Differential geometry of a frame-carrying manifold, computed in ambient
/// coordinates. The covariant derivative is the tangential projection of the
/// ambient directional derivative; analytic shortcuts on the manifold are used
/// when present and finite differences otherwise.
#[derive(Debug)]
pub struct Geometry<M, const D: usize, const N: usize> {
    manifold: M,
    cache: GeometryCache<D, N>,
}

impl<M, const D: usize, const N: usize> Geometry<M, D, N>
where
    M: Manifold<D, N>,
{
    pub fn new(manifold: M) -> Self {
        Self {
            manifold,
            cache: GeometryCache::default(),
        }
    }

    pub fn with_cache(manifold: M, cache: GeometryCache<D, N>) -> Self {
        Self { manifold, cache }
    }

    pub fn manifold(&self) -> &M {
        &self.manifold
    }

    pub fn cache(&self) -> &GeometryCache<D, N> {
        &self.cache
    }

    pub fn n_fields(&self) -> usize {
        N
    }

    pub fn ensure_on_manifold(&self, x: &Point<D>) -> Result<()> {
        let violation = self.manifold.constraint_violation(x);
        if violation.is_finite() && violation <= TOL_CONSTRAINT {
            Ok(())
        } else {
            Err(Error::ConstraintViolation {
                violation,
                tolerance: TOL_CONSTRAINT,
            })
        }
    }

    pub fn retract(&self, p: &Point<D>, hint: &'static str) -> Result<Point<D>> {
        self.manifold.retract(p).ok_or_else(|| Error::Retraction {
            distance: self.manifold.constraint_violation(p),
            hint,
        })
    }

    pub fn frame(&self, x: &Point<D>) -> Frame<D, N> {
        self.manifold.frame(x)
    }

    /// Projection without the on-manifold check, for inner loops.
    pub fn project(&self, x: &Point<D>, v: &Point<D>) -> Point<D> {
        self.manifold.project(x, v)
    }

    pub fn tangent_project(&self, x: &Point<D>, v: &Point<D>) -> Result<TangentVector<D>> {
        self.ensure_on_manifold(x)?;
        Ok(TangentVector {
            base: *x,
            vec: self.manifold.project(x, v),
        })
    }

    /// Frame metric `g^{..} = F F^T` in ambient coordinates.
    pub fn metric_inverse(&self, x: &Point<D>) -> Result<SMatrix<f64, D, D>> {
        let f = self.manifold.frame(x);
        let d = self.manifold.intrinsic_dim();
        let sv = DMatrix::from_column_slice(D, N, f.as_slice()).singular_values();
        let mut sorted: Vec<f64> = sv.iter().copied().collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let singular_value = sorted.get(d.saturating_sub(1)).copied().unwrap_or(0.0);
        if d > sorted.len() || singular_value <= ELLIPTICITY_TOL {
            return Err(Error::Ellipticity {
                singular_value,
                tolerance: ELLIPTICITY_TOL,
            });
        }
        Ok(f * f.transpose())
    }

    /// Central difference of `f` along the curve `t -> retract(x + t v)`.
    ///
    /// The perturbation has length `h` whatever `|v|`; when the retraction
    /// refuses a point the ambient point is used directly.
    pub fn directional<const R: usize, const C: usize>(
        &self,
        x: &Point<D>,
        v: &Point<D>,
        h: f64,
        f: impl Fn(&Point<D>) -> SMatrix<f64, R, C>,
    ) -> SMatrix<f64, R, C> {
        let len = v.norm();
        if len == 0.0 {
            return SMatrix::zeros();
        }
        let dv = v * (h / len);
        let fwd = x + dv;
        let bwd = x - dv;
        let fwd = self.manifold.retract(&fwd).unwrap_or(fwd);
        let bwd = self.manifold.retract(&bwd).unwrap_or(bwd);
        (f(&fwd) - f(&bwd)) * (len / (2.0 * h))
    }

    /// `nabla_v W` for a vector field `W` evaluable near `x`.
    pub fn covariant_derivative(
        &self,
        x: &Point<D>,
        v: &Point<D>,
        field: impl Fn(&Point<D>) -> Point<D>,
    ) -> TangentVector<D> {
        let ambient = self.directional(x, v, self.cache.first_step(), field);
        TangentVector {
            base: *x,
            vec: self.manifold.project(x, &ambient),
        }
    }

    /// Columns `nabla_v X_j`.
    pub fn frame_covariant(&self, x: &Point<D>, v: &Point<D>) -> Frame<D, N> {
        let ambient = self.manifold.frame_derivative(x, v).unwrap_or_else(|| {
            self.directional(x, v, self.cache.first_step(), |p| self.manifold.frame(p))
        });
        let p = self.manifold.projector(x);
        p * ambient
    }

    /// `nabla_v Y` for the drift field.
    pub fn drift_covariant(&self, x: &Point<D>, v: &Point<D>) -> Point<D> {
        let ambient = self.manifold.drift_derivative(x, v).unwrap_or_else(|| {
            self.directional(x, v, self.cache.first_step(), |p| self.manifold.drift(p))
        });
        self.manifold.project(x, &ambient)
    }

    /// Connection table: entry `j` holds `nabla_{X_j} X_k` in column `k`.
    pub fn connection(&self, x: &Point<D>) -> [Frame<D, N>; N] {
        self.cache.connection_or_insert(x, || {
            let f = self.manifold.frame(x);
            std::array::from_fn(|j| self.frame_covariant(x, &f.column(j).into_owned()))
        })
    }

    /// `sum_i nabla_{X_i} X_i`, the Itô correction of the frame.
    pub fn connection_trace(&self, x: &Point<D>) -> Point<D> {
        let f = self.manifold.frame(x);
        let mut sum = Point::<D>::zeros();
        for i in 0..N {
            let xi = f.column(i).into_owned();
            match self.manifold.frame_derivative(x, &xi) {
                Some(d) => sum += d.column(i),
                None => {
                    return self
                        .connection(x)
                        .iter()
                        .enumerate()
                        .map(|(j, t)| t.column(j).into_owned())
                        .sum()
                }
            }
        }
        self.manifold.project(x, &sum)
    }

    /// `omega^{jk}(v) = <nabla_{X_j} X_k, v> - <nabla_v X_j, X_k>` at row `j`,
    /// column `k`.
    pub fn omega_matrix(&self, x: &Point<D>, v: &Point<D>) -> FieldMatrix<N> {
        if let Some(omega) = self.manifold.omega(x, v) {
            return omega;
        }
        self.omega_numeric(x, v)
    }

    /// `omega^{jk}(v)` from the connection table, ignoring any closed form.
    pub fn omega_numeric(&self, x: &Point<D>, v: &Point<D>) -> FieldMatrix<N> {
        let conn = self.connection(x);
        self.omega_with(x, v, &conn, &self.manifold.frame(x))
    }

    pub(crate) fn omega_with(
        &self,
        x: &Point<D>,
        v: &Point<D>,
        conn: &[Frame<D, N>; N],
        frame: &Frame<D, N>,
    ) -> FieldMatrix<N> {
        let along_v = self.frame_covariant(x, v);
        // <nabla_v X_j, X_k> for all j, k at once.
        let mixed = along_v.transpose() * frame;
        FieldMatrix::from_fn(|j, k| conn[j].column(k).dot(v) - mixed[(j, k)])
    }

    pub fn omega_form(
        &self,
        x: &Point<D>,
        j: usize,
        k: usize,
        v: &TangentVector<D>,
    ) -> Result<f64> {
        check_index(j, N)?;
        check_index(k, N)?;
        Ok(self.omega_matrix(x, &v.vec)[(j, k)])
    }

    /// `L_ij X_k` for every `i, j, k`, by one central difference of the
    /// connection table along each frame field.
    pub fn second_covariant(&self, x: &Point<D>) -> SecondCovariant<D, N> {
        let f = self.manifold.frame(x);
        let p = self.manifold.projector(x);
        let conn = self.connection(x);
        let h = self.cache.second_step();
        let mut out = [[Frame::<D, N>::zeros(); N]; N];
        for (i, row) in out.iter_mut().enumerate() {
            let xi = f.column(i).into_owned();
            for (j, entry) in row.iter_mut().enumerate() {
                // d/dt of (nabla_{X_j} X_k) along X_i, all k at once.
                let outer = self.directional(x, &xi, h, |q| {
                    let q_frame = self.manifold.frame(q);
                    self.frame_covariant(q, &q_frame.column(j).into_owned())
                });
                let inner = self.frame_covariant(x, &conn[i].column(j).into_owned());
                *entry = p * outer - inner;
            }
        }
        out
    }

    pub fn b_terms_with(
        &self,
        x: &Point<D>,
        second: &SecondCovariant<D, N>,
        j: usize,
        k: usize,
    ) -> BTerms {
        let f = self.manifold.frame(x);
        let conn = self.connection(x);
        let trace_conn: Point<D> = (0..N).map(|i| conn[i].column(i).into_owned()).sum();
        let l_trace = (0..N)
            .map(|i| second[j][i].column(i).dot(&f.column(k)))
            .sum();
        let l_cross = (0..N)
            .map(|i| second[i][j].column(k).dot(&f.column(i)))
            .sum();
        let connection_trace = conn[j].column(k).dot(&trace_conn);
        let mut connection_product = 0.0;
        for i in 0..N {
            for p in 0..N {
                connection_product +=
                    conn[p].column(i).dot(&f.column(k)) * conn[j].column(p).dot(&f.column(i));
            }
        }
        BTerms {
            l_trace,
            l_cross,
            connection_trace,
            connection_product,
        }
    }

    pub fn b_terms(&self, x: &Point<D>, j: usize, k: usize) -> Result<BTerms> {
        check_index(j, N)?;
        check_index(k, N)?;
        Ok(self.b_terms_with(x, &self.second_covariant(x), j, k))
    }

    pub fn b_coeff(&self, x: &Point<D>, j: usize, k: usize) -> Result<f64> {
        check_index(j, N)?;
        check_index(k, N)?;
        Ok(self.b_matrix(x)[(j, k)])
    }

    /// `B^{jk}(x)` from the manifold's closed form when it has one.
    pub fn b_matrix(&self, x: &Point<D>) -> FieldMatrix<N> {
        self.manifold
            .b_matrix(x)
            .unwrap_or_else(|| self.b_matrix_numeric(x))
    }

    pub fn b_matrix_numeric(&self, x: &Point<D>) -> FieldMatrix<N> {
        let second = self.second_covariant(x);
        FieldMatrix::from_fn(|j, k| self.b_terms_with(x, &second, j, k).total())
    }

    pub fn ricci(&self, x: &Point<D>, v: &TangentVector<D>) -> TangentVector<D> {
        let vec = self
            .manifold
            .ricci(x, &v.vec)
            .unwrap_or_else(|| self.ricci_numeric(x, &v.vec));
        TangentVector { base: *x, vec }
    }

    /// `Ric(v) = sum_j c_j sum_i R(X_j, X_i) X_i` with `c = F^T v` and
    /// `R(X_j, X_i) = L_ji - L_ij`; exact for frames with `F F^T = P`.
    #[allow(clippy::needless_range_loop)]
    pub fn ricci_numeric(&self, x: &Point<D>, v: &Point<D>) -> Point<D> {
        let f = self.manifold.frame(x);
        let second = self.second_covariant(x);
        let coeffs = f.transpose() * v;
        let mut out = Point::<D>::zeros();
        for j in 0..N {
            for i in 0..N {
                out += (second[j][i].column(i) - second[i][j].column(i)) * coeffs[j];
            }
        }
        self.manifold.project(x, &out)
    }
}

fn check_index(index: usize, n: usize) -> Result<()> {
    if index < n {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, n })
    }
}
