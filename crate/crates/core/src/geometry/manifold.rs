use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::RngCore;

/// Point (or ambient vector) in the ambient space `R^D`.
pub type Point<const D: usize> = SVector<f64, D>;

/// Frame matrix whose columns are the fields `X_1(x), ..., X_N(x)`.
pub type Frame<const D: usize, const N: usize> = SMatrix<f64, D, N>;

/// Square matrix indexed by frame fields.
pub type FieldMatrix<const N: usize> = SMatrix<f64, N, N>;

/// Coefficients against the frame, or one Brownian increment.
pub type Coeffs<const N: usize> = SVector<f64, N>;

/// Tolerance on `constraint(x)` for a point to count as lying on the manifold.
pub const TOL_CONSTRAINT: f64 = 1e-10;

/// Compact manifold embedded in `R^D`, carrying `N` frame fields that span every
/// tangent space, and a drift field.
///
/// Only the evaluators without a default are required. The `Option`-returning
/// methods are analytic shortcuts; when they return `None` the geometry layer
/// falls back to finite differences.
pub trait Manifold<const D: usize, const N: usize>: Send + Sync {
    fn name(&self) -> &str;

    fn intrinsic_dim(&self) -> usize;

    fn base_point(&self) -> Point<D>;

    /// Map `R^D -> R^{D-d}` vanishing exactly on the manifold.
    fn constraint(&self, x: &Point<D>) -> DVector<f64>;

    /// Projection of a nearby ambient point onto the manifold. `None` when `p`
    /// is outside the neighbourhood where the projection is well defined.
    fn retract(&self, p: &Point<D>) -> Option<Point<D>>;

    fn frame(&self, x: &Point<D>) -> Frame<D, N>;

    fn drift(&self, x: &Point<D>) -> Point<D>;

    /// Uniformly spread random point, used by the sampled geometry checks.
    fn sample_point(&self, rng: &mut dyn RngCore) -> Point<D>;

    /// Orthogonal projector onto `T_x M`, i.e. onto the kernel of the
    /// constraint Jacobian.
    fn projector(&self, x: &Point<D>) -> SMatrix<f64, D, D> {
        constraint_projector(self, x)
    }

    fn project(&self, x: &Point<D>, v: &Point<D>) -> Point<D> {
        self.projector(x) * v
    }

    /// Ambient directional derivative of every frame field, `DX_i(x)[v]`.
    fn frame_derivative(&self, _x: &Point<D>, _v: &Point<D>) -> Option<Frame<D, N>> {
        None
    }

    /// True when `Y` is identically zero.
    fn drift_vanishes(&self) -> bool {
        false
    }

    /// Ambient directional derivative of the drift, `DY(x)[v]`.
    fn drift_derivative(&self, _x: &Point<D>, _v: &Point<D>) -> Option<Point<D>> {
        None
    }

    /// Closed form of the connection one-forms `omega^{jk}(v)` for tangent `v`.
    fn omega(&self, _x: &Point<D>, _v: &Point<D>) -> Option<FieldMatrix<N>> {
        None
    }

    /// Ricci curvature as an endomorphism of `T_x M`.
    fn ricci(&self, _x: &Point<D>, _v: &Point<D>) -> Option<Point<D>> {
        None
    }

    /// Closed form of the zero-order coefficients `B^{jk}(x)`.
    fn b_matrix(&self, _x: &Point<D>) -> Option<FieldMatrix<N>> {
        None
    }

    /// Largest absolute constraint component at `x`.
    fn constraint_violation(&self, x: &Point<D>) -> f64 {
        self.constraint(x).amax()
    }
}

/// Tangent vector `vec` at `base`, both in ambient coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector<const D: usize> {
    pub base: Point<D>,
    pub vec: Point<D>,
}

impl<const D: usize> TangentVector<D> {
    pub fn zero(base: Point<D>) -> Self {
        Self {
            base,
            vec: Point::zeros(),
        }
    }
}

const JACOBIAN_STEP: f64 = 1e-6;

/// `I - J^T (J J^T)^{-1} J` with `J` the central-difference Jacobian of the
/// constraint at `x`.
pub fn constraint_projector<M, const D: usize, const N: usize>(
    m: &M,
    x: &Point<D>,
) -> SMatrix<f64, D, D>
where
    M: Manifold<D, N> + ?Sized,
{
    let codim = m.constraint(x).len();
    if codim == 0 {
        return SMatrix::identity();
    }
    let mut jac = DMatrix::<f64>::zeros(codim, D);
    for c in 0..D {
        let mut e = Point::<D>::zeros();
        e[c] = JACOBIAN_STEP;
        let col = (m.constraint(&(x + e)) - m.constraint(&(x - e))) / (2.0 * JACOBIAN_STEP);
        jac.set_column(c, &col);
    }
    let gram = &jac * jac.transpose();
    let Some(gram_inv) = gram.try_inverse() else {
        return SMatrix::identity();
    };
    let normal = jac.transpose() * gram_inv * &jac;
    let mut p = SMatrix::<f64, D, D>::identity();
    for r in 0..D {
        for c in 0..D {
            p[(r, c)] -= normal[(r, c)];
        }
    }
    p
}

/// Hides every analytic shortcut of the wrapped manifold so that the geometry
/// layer computes connection, `B^{jk}` and Ricci curvature numerically.
#[derive(Debug, Clone)]
pub struct NumericOnly<M>(pub M);

impl<M, const D: usize, const N: usize> Manifold<D, N> for NumericOnly<M>
where
    M: Manifold<D, N>,
{
    fn name(&self) -> &str {
        self.0.name()
    }
    fn intrinsic_dim(&self) -> usize {
        self.0.intrinsic_dim()
    }
    fn base_point(&self) -> Point<D> {
        self.0.base_point()
    }
    fn constraint(&self, x: &Point<D>) -> DVector<f64> {
        self.0.constraint(x)
    }
    fn retract(&self, p: &Point<D>) -> Option<Point<D>> {
        self.0.retract(p)
    }
    fn frame(&self, x: &Point<D>) -> Frame<D, N> {
        self.0.frame(x)
    }
    fn drift(&self, x: &Point<D>) -> Point<D> {
        self.0.drift(x)
    }
    fn drift_vanishes(&self) -> bool {
        self.0.drift_vanishes()
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Point<D> {
        self.0.sample_point(rng)
    }
    fn projector(&self, x: &Point<D>) -> SMatrix<f64, D, D> {
        self.0.projector(x)
    }
    fn project(&self, x: &Point<D>, v: &Point<D>) -> Point<D> {
        self.0.project(x, v)
    }
}

/// Multiplies every frame field by a constant. A factor other than one breaks
/// the agreement between the frame metric and the induced metric.
#[derive(Debug, Clone)]
pub struct ScaledFrame<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M, const D: usize, const N: usize> Manifold<D, N> for ScaledFrame<M>
where
    M: Manifold<D, N>,
{
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn intrinsic_dim(&self) -> usize {
        self.inner.intrinsic_dim()
    }
    fn base_point(&self) -> Point<D> {
        self.inner.base_point()
    }
    fn constraint(&self, x: &Point<D>) -> DVector<f64> {
        self.inner.constraint(x)
    }
    fn retract(&self, p: &Point<D>) -> Option<Point<D>> {
        self.inner.retract(p)
    }
    fn frame(&self, x: &Point<D>) -> Frame<D, N> {
        self.inner.frame(x) * self.factor
    }
    fn drift(&self, x: &Point<D>) -> Point<D> {
        self.inner.drift(x)
    }
    fn drift_vanishes(&self) -> bool {
        self.inner.drift_vanishes()
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Point<D> {
        self.inner.sample_point(rng)
    }
    fn projector(&self, x: &Point<D>) -> SMatrix<f64, D, D> {
        self.inner.projector(x)
    }
    fn project(&self, x: &Point<D>, v: &Point<D>) -> Point<D> {
        self.inner.project(x, v)
    }
    fn frame_derivative(&self, x: &Point<D>, v: &Point<D>) -> Option<Frame<D, N>> {
        self.inner.frame_derivative(x, v).map(|d| d * self.factor)
    }
}
