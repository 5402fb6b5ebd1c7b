use crate::error::Result;
use crate::geometry::{Coeffs, FieldMatrix, Geometry, Manifold, Point, TangentVector};

use super::diffusion::DiffusionPath;
use super::noise::{BrownianPath, CameronMartinPath};

type OneForms<'a, const D: usize, const N: usize> =
    dyn Fn(&Point<D>, &Point<D>) -> FieldMatrix<N> + Send + Sync + 'a;
type ZeroOrder<'a, const D: usize, const N: usize> =
    dyn Fn(&Point<D>) -> FieldMatrix<N> + Send + Sync + 'a;

/// Data `(T^{ij}, f^{ij}, g^i)` of the linear system
///
/// ```text
/// d eta^i = T^{ij}(o dx) eta^j + [f^{ij}(x) eta^j + g^i(t)] dt,   eta_0 = 0.
/// ```
///
/// `one_forms(x, v)` returns the matrix `T^{ij}(v)` for a tangent vector `v`
/// at `x`; `forcing` holds `g` on each grid cell.
pub struct LinearSystemSpec<'a, const D: usize, const N: usize> {
    one_forms: Box<OneForms<'a, D, N>>,
    zero_order: Box<ZeroOrder<'a, D, N>>,
    pub forcing: Vec<Coeffs<N>>,
}

impl<const D: usize, const N: usize> std::fmt::Debug for LinearSystemSpec<'_, D, N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSystemSpec")
            .field("cells", &self.forcing.len())
            .finish_non_exhaustive()
    }
}

impl<'a, const D: usize, const N: usize> LinearSystemSpec<'a, D, N> {
    pub fn new(
        one_forms: impl Fn(&Point<D>, &Point<D>) -> FieldMatrix<N> + Send + Sync + 'a,
        zero_order: impl Fn(&Point<D>) -> FieldMatrix<N> + Send + Sync + 'a,
        forcing: Vec<Coeffs<N>>,
    ) -> Self {
        Self {
            one_forms: Box::new(one_forms),
            zero_order: Box::new(zero_order),
            forcing,
        }
    }

    /// `T = 0`, `f = 0`: `eta` is the running integral of `g`.
    pub fn forcing_only(forcing: Vec<Coeffs<N>>) -> Self {
        Self::new(
            |_, _| FieldMatrix::zeros(),
            |_| FieldMatrix::zeros(),
            forcing,
        )
    }

    pub fn one_forms(&self, x: &Point<D>, v: &Point<D>) -> FieldMatrix<N> {
        (self.one_forms)(x, v)
    }

    pub fn zero_order(&self, x: &Point<D>) -> FieldMatrix<N> {
        (self.zero_order)(x)
    }

    /// Same `T` and `f`, different forcing.
    pub fn with_forcing(self, forcing: Vec<Coeffs<N>>) -> Self {
        Self { forcing, ..self }
    }
}

/// `eta_{t_k}` (or `h_{t_k}`), with `values[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPath<const N: usize> {
    pub values: Vec<Coeffs<N>>,
}

impl<const N: usize> CoefficientPath<N> {
    pub fn zero(steps: usize) -> Self {
        Self {
            values: vec![Coeffs::zeros(); steps + 1],
        }
    }
}

const MIDPOINT_HINT: &str = "consecutive path points are too far apart; increase N_t";

/// Solves the linear system along `xpath`.
///
/// On each cell the Stratonovich term uses the midpoint rule: `T` is
/// evaluated at the retracted midpoint of the cell and applied to the chord
/// projected onto the tangent space there. A Heun corrector in `eta`
/// averages the `f` terms at both ends.
pub fn integrate_linear_system<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
) -> Result<CoefficientPath<N>>
where
    M: Manifold<D, N>,
{
    xpath.ensure_grid(&w.grid)?;
    w.grid.ensure_steps(spec.forcing.len())?;
    let dt = w.grid.dt();
    let mut eta = Coeffs::<N>::zeros();
    let mut values = Vec::with_capacity(xpath.points.len());
    values.push(eta);
    let mut f_left = spec.zero_order(&xpath.points[0]);
    for (k, pair) in xpath.points.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let g = spec.forcing[k];
        let f_right = spec.zero_order(b);
        let chord = b - a;
        let stochastic = if chord.iter().all(|c| *c == 0.0) {
            FieldMatrix::zeros()
        } else {
            let mid = geo.retract(&((a + b) * 0.5), MIDPOINT_HINT)?;
            spec.one_forms(&mid, &geo.project(&mid, &chord))
        };
        let predictor = eta + stochastic * eta + (f_left * eta + g) * dt;
        eta += stochastic * (eta + predictor) * 0.5
            + ((f_left * eta + f_right * predictor) * 0.5 + g) * dt;
        values.push(eta);
        f_left = f_right;
    }
    Ok(CoefficientPath { values })
}

/// The `h`-system of the admissible fields `Z_t = X_i(x_t) h^i_t`:
/// `T^{ij} = omega^{ji}`, `f^{ij} = B^{ji} + <nabla_{X_j} Y, X_i>` and `g = rdot`.
pub fn make_admissible_system<'a, M, const D: usize, const N: usize>(
    geo: &'a Geometry<M, D, N>,
    r: &CameronMartinPath<N>,
) -> LinearSystemSpec<'a, D, N>
where
    M: Manifold<D, N>,
{
    LinearSystemSpec::new(
        move |x, v| geo.omega_matrix(x, v).transpose(),
        move |x| admissible_zero_order(geo, x),
        r.rdot.clone(),
    )
}

fn admissible_zero_order<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    x: &Point<D>,
) -> FieldMatrix<N>
where
    M: Manifold<D, N>,
{
    if geo.manifold().drift_vanishes() {
        return geo.b_matrix(x).transpose();
    }
    let f = geo.frame(x);
    let mut drift_grad = f;
    for j in 0..N {
        let xj = f.column(j).into_owned();
        // the frame is tangent, so F^T P = F^T and the ambient derivative suffices
        let d = geo
            .manifold()
            .drift_derivative(x, &xj)
            .unwrap_or_else(|| geo.drift_covariant(x, &xj));
        drift_grad.set_column(j, &d);
    }
    // entry (i, j): B^{ji} + <nabla_{X_j} Y, X_i>
    geo.b_matrix(x).transpose() + f.transpose() * drift_grad
}

/// `V_t = X_i(x_t) eta^i_t` as ambient vectors.
pub fn field_along_path<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
    eta: &CoefficientPath<N>,
) -> Vec<Point<D>>
where
    M: Manifold<D, N>,
{
    xpath
        .points
        .iter()
        .zip(&eta.values)
        .map(|(x, e)| geo.frame(x) * e)
        .collect()
}

pub fn eval_field_along_path<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
    eta: &CoefficientPath<N>,
) -> Result<Vec<TangentVector<D>>>
where
    M: Manifold<D, N>,
{
    xpath.ensure_grid(&xpath.grid)?;
    super::noise::TimeGrid::ensure_steps(&xpath.grid, eta.values.len().saturating_sub(1))?;
    Ok(xpath
        .points
        .iter()
        .zip(field_along_path(geo, xpath, eta))
        .map(|(x, vec)| TangentVector { base: *x, vec })
        .collect())
}
