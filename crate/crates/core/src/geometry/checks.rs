//! Sampled numerical checks of the frame metric and the connection axioms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::calculus::Geometry;
use super::manifold::{Frame, Manifold, Point, TangentVector};

/// Pass threshold for `|F F^T - P|`.
pub const FRAME_METRIC_TOL: f64 = 1e-8;
/// Pass threshold for torsion, metric compatibility and Ricci symmetry.
pub const AXIOM_TOL: f64 = 1e-6;
/// Pass threshold for linearity of `omega^{jk}`.
pub const LINEARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetricReport {
    pub samples: usize,
    pub max_discrepancy: f64,
    pub pass: bool,
}

impl FrameMetricReport {
    /// Turns a failed check into an error carrying the discrepancy.
    pub fn ensure(&self) -> Result<()> {
        if self.pass {
            Ok(())
        } else {
            Err(Error::FrameMetric {
                discrepancy: self.max_discrepancy,
                tolerance: FRAME_METRIC_TOL,
            })
        }
    }
}

/// Largest entry of `F F^T - P` over the base point and `sample_count` random
/// points. A pass means the frame metric is the induced one, so the projected
/// ambient derivative is its Levi-Civita connection.
pub fn check_frame_metric<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    sample_count: usize,
    seed: u64,
) -> FrameMetricReport
where
    M: Manifold<D, N>,
{
    let m = geo.manifold();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_discrepancy: f64 = 0.0;
    let points =
        std::iter::once(m.base_point()).chain((0..sample_count).map(|_| m.sample_point(&mut rng)));
    for x in points {
        let f = m.frame(&x);
        let gap = (f * f.transpose() - m.projector(&x)).amax();
        max_discrepancy = max_discrepancy.max(if gap.is_nan() { f64::INFINITY } else { gap });
    }
    FrameMetricReport {
        samples: sample_count + 1,
        max_discrepancy,
        pass: max_discrepancy < FRAME_METRIC_TOL,
    }
}

/// Worst-case residuals of the connection and curvature identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomReport {
    pub samples: usize,
    pub torsion: f64,
    pub metric_compatibility: f64,
    pub ricci_symmetry: f64,
    pub omega_linearity: f64,
}

impl AxiomReport {
    pub fn pass(&self) -> bool {
        self.torsion <= AXIOM_TOL
            && self.metric_compatibility <= AXIOM_TOL
            && self.ricci_symmetry <= AXIOM_TOL
            && self.omega_linearity <= LINEARITY_TOL
    }
}

/// Tangent field `W(x) = sum_j (<a_j, x> + b_j) X_j(x)`, evaluable anywhere in
/// the ambient space.
#[derive(Debug, Clone)]
struct LinearCombination<const D: usize, const N: usize> {
    slopes: Frame<D, N>,
    offsets: [f64; N],
}

impl<const D: usize, const N: usize> LinearCombination<D, N> {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            slopes: Frame::from_fn(|_, _| rng.sample(StandardNormal)),
            offsets: std::array::from_fn(|_| rng.sample(StandardNormal)),
        }
    }

    fn eval<M: Manifold<D, N>>(&self, m: &M, x: &Point<D>) -> Point<D> {
        let f = m.frame(x);
        (0..N)
            .map(|j| f.column(j) * (self.slopes.column(j).dot(x) + self.offsets[j]))
            .sum()
    }
}

/// Checks torsion-freeness, metric compatibility, Ricci self-adjointness and
/// linearity of `omega^{jk}` at `sample_count` random points.
///
/// The Lie bracket in the torsion check is a plain ambient central difference,
/// independent of the projected derivative it is compared with.
pub fn check_axioms<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    sample_count: usize,
    seed: u64,
) -> AxiomReport
where
    M: Manifold<D, N>,
{
    let m = geo.manifold();
    let h = geo.cache().first_step();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AxiomReport {
        samples: sample_count,
        torsion: 0.0,
        metric_compatibility: 0.0,
        ricci_symmetry: 0.0,
        omega_linearity: 0.0,
    };
    let worst = |acc: &mut f64, e: f64| *acc = acc.max(if e.is_nan() { f64::INFINITY } else { e });

    for _ in 0..sample_count {
        let x = m.sample_point(&mut rng);
        let w_field = LinearCombination::<D, N>::random(&mut rng);
        let u_field = LinearCombination::<D, N>::random(&mut rng);
        let w = |p: &Point<D>| w_field.eval(m, p);
        let u = |p: &Point<D>| u_field.eval(m, p);
        let random_tangent = |rng: &mut ChaCha8Rng| {
            let a = Point::<D>::from_fn(|_, _| rng.sample(StandardNormal));
            m.project(&x, &a)
        };
        let probe = random_tangent(&mut rng);
        let v = random_tangent(&mut rng);

        let (wx, ux) = (w(&x), u(&x));
        let nabla_w_u = geo.covariant_derivative(&x, &wx, u).vec;
        let nabla_u_w = geo.covariant_derivative(&x, &ux, w).vec;
        let ambient = |field: &dyn Fn(&Point<D>) -> Point<D>, dir: &Point<D>| {
            (field(&(x + dir * h)) - field(&(x - dir * h))) / (2.0 * h)
        };
        let bracket = ambient(&u, &wx) - ambient(&w, &ux);
        worst(
            &mut report.torsion,
            (nabla_w_u - nabla_u_w - bracket).dot(&probe).abs(),
        );

        let lhs = geo.directional(&x, &v, h, |p| {
            nalgebra::SMatrix::<f64, 1, 1>::new(w(p).dot(&u(p)))
        })[(0, 0)];
        let rhs = geo.covariant_derivative(&x, &v, w).vec.dot(&ux)
            + wx.dot(&geo.covariant_derivative(&x, &v, u).vec);
        worst(&mut report.metric_compatibility, (lhs - rhs).abs());

        let tv = |vec: Point<D>| TangentVector { base: x, vec };
        let ric_probe = geo.ricci(&x, &tv(probe)).vec;
        let ric_v = geo.ricci(&x, &tv(v)).vec;
        worst(
            &mut report.ricci_symmetry,
            (ric_probe.dot(&v) - probe.dot(&ric_v)).abs(),
        );

        let (alpha, beta): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let combined = geo.omega_matrix(&x, &(probe * alpha + v * beta));
        let separate = geo.omega_matrix(&x, &probe) * alpha + geo.omega_matrix(&x, &v) * beta;
        worst(&mut report.omega_linearity, (combined - separate).amax());
    }
    report
}

/// Largest gaps between the numerically computed Ricci operator, `B^{jk}` and
/// `omega^{jk}` and the manifold's closed forms, for those it provides. Ricci
/// is applied to unit tangent vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormReport {
    pub samples: usize,
    pub ricci: Option<f64>,
    pub b_matrix: Option<f64>,
    pub omega: Option<f64>,
}

pub fn check_closed_forms<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    sample_count: usize,
    seed: u64,
) -> ClosedFormReport
where
    M: Manifold<D, N>,
{
    let m = geo.manifold();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ClosedFormReport {
        samples: sample_count,
        ricci: None,
        b_matrix: None,
        omega: None,
    };
    let worst = |acc: &mut Option<f64>, e: f64| {
        let e = if e.is_nan() { f64::INFINITY } else { e };
        *acc = Some(acc.map_or(e, |a| a.max(e)));
    };
    for _ in 0..sample_count {
        let x = m.sample_point(&mut rng);
        let a = Point::<D>::from_fn(|_, _| rng.sample(StandardNormal));
        let v = m.project(&x, &a).normalize();
        if let Some(exact) = m.ricci(&x, &v) {
            worst(
                &mut report.ricci,
                (geo.ricci_numeric(&x, &v) - exact).norm(),
            );
        }
        if let Some(exact) = m.b_matrix(&x) {
            worst(
                &mut report.b_matrix,
                (geo.b_matrix_numeric(&x) - exact).amax(),
            );
        }
        if let Some(exact) = m.omega(&x, &v) {
            worst(
                &mut report.omega,
                (geo.omega_numeric(&x, &v) - exact).amax(),
            );
        }
    }
    report
}
