//! Built-in manifolds: the circle, flat tori, the round 2-sphere and `SO(3)`.
//!
//! Every built-in frame satisfies `sum_i X_i X_i^T = P(x)` (the tangent
//! projector), so the frame metric is the induced Euclidean metric and the
//! tangential projection of ambient derivatives is its Levi-Civita connection.
//! Each drift is `Y(x) = kappa * P(x) e_1`, the gradient of the first ambient
//! coordinate scaled by `kappa`; `kappa = 0` gives Brownian motion.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::{DVector, Matrix3, SMatrix, SVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::manifold::{FieldMatrix, Frame, Manifold, Point};

/// Retractions refuse points further than this from the manifold.
const MAX_RETRACT_DISTANCE: f64 = 0.5;

fn normalize_near_unit<const D: usize>(p: &Point<D>) -> Option<Point<D>> {
    let n = p.norm();
    if !n.is_finite() || (n - 1.0).abs() > MAX_RETRACT_DISTANCE {
        return None;
    }
    Some(p / n)
}

fn sphere_projector<const D: usize>(x: &Point<D>) -> SMatrix<f64, D, D> {
    SMatrix::<f64, D, D>::identity() - x * x.transpose() / x.norm_squared()
}

/// `kappa * (e_1 - x_1 x)` and its directional derivative; this is
/// `kappa * P(x) e_1` on any round sphere.
fn sphere_tilt<const D: usize>(kappa: f64, x: &Point<D>) -> Point<D> {
    let mut y = -x * x[0];
    y[0] += 1.0;
    y * kappa
}

fn sphere_tilt_derivative<const D: usize>(kappa: f64, x: &Point<D>, v: &Point<D>) -> Point<D> {
    -(x * v[0] + v * x[0]) * kappa
}

/// Unit circle in `R^2` with the rotation field `X(x) = (-x_2, x_1)`.
#[derive(Debug, Clone, Default)]
pub struct Circle {
    pub drift: f64,
}

impl Manifold<2, 1> for Circle {
    fn name(&self) -> &str {
        "circle"
    }
    fn intrinsic_dim(&self) -> usize {
        1
    }
    fn base_point(&self) -> Point<2> {
        Point::<2>::new(1.0, 0.0)
    }
    fn constraint(&self, x: &Point<2>) -> DVector<f64> {
        DVector::from_element(1, x.norm_squared() - 1.0)
    }
    fn retract(&self, p: &Point<2>) -> Option<Point<2>> {
        normalize_near_unit(p)
    }
    fn frame(&self, x: &Point<2>) -> Frame<2, 1> {
        Frame::<2, 1>::new(-x[1], x[0])
    }
    fn drift(&self, x: &Point<2>) -> Point<2> {
        sphere_tilt(self.drift, x)
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Point<2> {
        let theta = rng.random::<f64>() * TAU;
        Point::<2>::new(theta.cos(), theta.sin())
    }
    fn projector(&self, x: &Point<2>) -> SMatrix<f64, 2, 2> {
        sphere_projector(x)
    }
    fn project(&self, x: &Point<2>, v: &Point<2>) -> Point<2> {
        v - x * (x.dot(v) / x.norm_squared())
    }
    fn frame_derivative(&self, _x: &Point<2>, v: &Point<2>) -> Option<Frame<2, 1>> {
        Some(Frame::<2, 1>::new(-v[1], v[0]))
    }
    fn drift_vanishes(&self) -> bool {
        self.drift == 0.0
    }
    fn drift_derivative(&self, x: &Point<2>, v: &Point<2>) -> Option<Point<2>> {
        Some(sphere_tilt_derivative(self.drift, x, v))
    }
    fn ricci(&self, _x: &Point<2>, _v: &Point<2>) -> Option<Point<2>> {
        Some(Point::zeros())
    }
    fn b_matrix(&self, _x: &Point<2>) -> Option<FieldMatrix<1>> {
        Some(FieldMatrix::zeros())
    }
    fn omega(&self, _x: &Point<2>, _v: &Point<2>) -> Option<FieldMatrix<1>> {
        Some(FieldMatrix::zeros())
    }
}

/// Flat torus `R^D / (2 pi Z)^D` with the coordinate frame.
///
/// Points are kept as lifts in `R^D` (the retraction is the identity), so
/// paths never jump by `2 pi`; every test function on the torus is periodic.
#[derive(Debug, Clone, Default)]
pub struct FlatTorus<const D: usize> {
    pub drift: f64,
}

impl<const D: usize> Manifold<D, D> for FlatTorus<D> {
    fn name(&self) -> &str {
        match D {
            1 => "torus1",
            2 => "torus2",
            _ => "torus",
        }
    }
    fn intrinsic_dim(&self) -> usize {
        D
    }
    fn base_point(&self) -> Point<D> {
        Point::zeros()
    }
    fn constraint(&self, _x: &Point<D>) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn retract(&self, p: &Point<D>) -> Option<Point<D>> {
        p.iter().all(|c| c.is_finite()).then_some(*p)
    }
    fn frame(&self, _x: &Point<D>) -> Frame<D, D> {
        Frame::identity()
    }
    fn drift(&self, _x: &Point<D>) -> Point<D> {
        let mut y = Point::zeros();
        y[0] = self.drift;
        y
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Point<D> {
        Point::from_fn(|_, _| rng.random::<f64>() * TAU)
    }
    fn projector(&self, _x: &Point<D>) -> SMatrix<f64, D, D> {
        SMatrix::identity()
    }
    fn project(&self, _x: &Point<D>, v: &Point<D>) -> Point<D> {
        *v
    }
    fn frame_derivative(&self, _x: &Point<D>, _v: &Point<D>) -> Option<Frame<D, D>> {
        Some(Frame::zeros())
    }
    fn drift_vanishes(&self) -> bool {
        self.drift == 0.0
    }
    fn drift_derivative(&self, _x: &Point<D>, _v: &Point<D>) -> Option<Point<D>> {
        Some(Point::zeros())
    }
    fn ricci(&self, _x: &Point<D>, _v: &Point<D>) -> Option<Point<D>> {
        Some(Point::zeros())
    }
    fn b_matrix(&self, _x: &Point<D>) -> Option<FieldMatrix<D>> {
        Some(FieldMatrix::zeros())
    }
    fn omega(&self, _x: &Point<D>, _v: &Point<D>) -> Option<FieldMatrix<D>> {
        Some(FieldMatrix::zeros())
    }
}

/// Unit sphere in `R^3` with the projection frame `X_i = e_i - <e_i, x> x`.
///
/// `X_i` is the gradient of the coordinate function `x_i`, so
/// `nabla_v X_i = -x_i v`, the coefficients `B^{jk}` vanish and `Ric = g`.
#[derive(Debug, Clone, Default)]
pub struct Sphere2 {
    pub drift: f64,
}

impl Manifold<3, 3> for Sphere2 {
    fn name(&self) -> &str {
        "sphere2"
    }
    fn intrinsic_dim(&self) -> usize {
        2
    }
    fn base_point(&self) -> Point<3> {
        Point::<3>::new(0.0, 0.0, 1.0)
    }
    fn constraint(&self, x: &Point<3>) -> DVector<f64> {
        DVector::from_element(1, x.norm_squared() - 1.0)
    }
    fn retract(&self, p: &Point<3>) -> Option<Point<3>> {
        normalize_near_unit(p)
    }
    fn frame(&self, x: &Point<3>) -> Frame<3, 3> {
        Matrix3::identity() - x * x.transpose()
    }
    fn drift(&self, x: &Point<3>) -> Point<3> {
        sphere_tilt(self.drift, x)
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Point<3> {
        loop {
            let g = Point::<3>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let n = g.norm();
            if n > 1e-6 {
                return g / n;
            }
        }
    }
    fn projector(&self, x: &Point<3>) -> SMatrix<f64, 3, 3> {
        sphere_projector(x)
    }
    fn project(&self, x: &Point<3>, v: &Point<3>) -> Point<3> {
        v - x * (x.dot(v) / x.norm_squared())
    }
    fn frame_derivative(&self, x: &Point<3>, v: &Point<3>) -> Option<Frame<3, 3>> {
        Some(-(x * v.transpose() + v * x.transpose()))
    }
    fn drift_vanishes(&self) -> bool {
        self.drift == 0.0
    }
    fn drift_derivative(&self, x: &Point<3>, v: &Point<3>) -> Option<Point<3>> {
        Some(sphere_tilt_derivative(self.drift, x, v))
    }
    fn ricci(&self, x: &Point<3>, v: &Point<3>) -> Option<Point<3>> {
        Some(self.project(x, v))
    }
    fn b_matrix(&self, _x: &Point<3>) -> Option<FieldMatrix<3>> {
        Some(FieldMatrix::zeros())
    }
    fn omega(&self, x: &Point<3>, v: &Point<3>) -> Option<FieldMatrix<3>> {
        let pv = v - x * x.dot(v);
        Some(x * pv.transpose() - pv * x.transpose())
    }
}

/// Rotation group `SO(3)` inside `R^9` (row-major matrices, Frobenius inner
/// product) with the orthonormal left-invariant frame `X_i(R) = R A_i / sqrt 2`.
///
/// The metric is bi-invariant, so `nabla_{X_i} X_j = [X_i, X_j] / 2`,
/// `Ric = g / 4` and `B^{jk} = delta_{jk} / 8`.
#[derive(Debug, Clone, Default)]
pub struct So3 {
    pub drift: f64,
}

/// Row-major flattening of a 3x3 matrix.
pub fn so3_flatten(m: &Matrix3<f64>) -> Point<9> {
    SVector::<f64, 9>::from_fn(|k, _| m[(k / 3, k % 3)])
}

pub fn so3_unflatten(x: &Point<9>) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| x[3 * r + c])
}

/// Orthonormal basis `A_i / sqrt 2` of `so(3)` under the Frobenius product,
/// with `[A_1, A_2] = A_3` and cyclic.
pub fn so3_algebra_basis() -> [Matrix3<f64>; 3] {
    let s = FRAC_1_SQRT_2;
    [
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -s, 0.0, s, 0.0),
        Matrix3::new(0.0, 0.0, s, 0.0, 0.0, 0.0, -s, 0.0, 0.0),
        Matrix3::new(0.0, -s, 0.0, s, 0.0, 0.0, 0.0, 0.0, 0.0),
    ]
}

fn skew(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m - m.transpose()) * 0.5
}

impl So3 {
    fn tilt_direction() -> Matrix3<f64> {
        let mut e = Matrix3::zeros();
        e[(0, 0)] = 1.0;
        e
    }
}

impl Manifold<9, 3> for So3 {
    fn name(&self) -> &str {
        "so3"
    }
    fn intrinsic_dim(&self) -> usize {
        3
    }
    fn base_point(&self) -> Point<9> {
        so3_flatten(&Matrix3::identity())
    }
    fn constraint(&self, x: &Point<9>) -> DVector<f64> {
        let r = so3_unflatten(x);
        let g = r.transpose() * r - Matrix3::identity();
        DVector::from_vec(vec![
            g[(0, 0)],
            g[(0, 1)],
            g[(0, 2)],
            g[(1, 1)],
            g[(1, 2)],
            g[(2, 2)],
        ])
    }
    fn retract(&self, p: &Point<9>) -> Option<Point<9>> {
        if !p.iter().all(|c| c.is_finite()) {
            return None;
        }
        let m = so3_unflatten(p);
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u?, svd.v_t?);
        let r = u * vt;
        if r.determinant() <= 0.0 || (m - r).norm() > MAX_RETRACT_DISTANCE {
            return None;
        }
        Some(so3_flatten(&r))
    }
    fn frame(&self, x: &Point<9>) -> Frame<9, 3> {
        let r = so3_unflatten(x);
        let basis = so3_algebra_basis();
        Frame::<9, 3>::from_columns(&[
            so3_flatten(&(r * basis[0])),
            so3_flatten(&(r * basis[1])),
            so3_flatten(&(r * basis[2])),
        ])
    }
    fn drift(&self, x: &Point<9>) -> Point<9> {
        self.project(x, &so3_flatten(&Self::tilt_direction())) * self.drift
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Point<9> {
        let q = loop {
            let g = nalgebra::Vector4::<f64>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let n = g.norm();
            if n > 1e-6 {
                break g / n;
            }
        };
        let (w, a, b, c) = (q[0], q[1], q[2], q[3]);
        let r = Matrix3::new(
            1.0 - 2.0 * (b * b + c * c),
            2.0 * (a * b - c * w),
            2.0 * (a * c + b * w),
            2.0 * (a * b + c * w),
            1.0 - 2.0 * (a * a + c * c),
            2.0 * (b * c - a * w),
            2.0 * (a * c - b * w),
            2.0 * (b * c + a * w),
            1.0 - 2.0 * (a * a + b * b),
        );
        so3_flatten(&r)
    }
    fn projector(&self, x: &Point<9>) -> SMatrix<f64, 9, 9> {
        let mut p = SMatrix::<f64, 9, 9>::zeros();
        for k in 0..9 {
            let mut e = Point::<9>::zeros();
            e[k] = 1.0;
            p.set_column(k, &self.project(x, &e));
        }
        p
    }
    fn project(&self, x: &Point<9>, v: &Point<9>) -> Point<9> {
        let r = so3_unflatten(x);
        let w = so3_unflatten(v);
        so3_flatten(&(r * skew(&(r.transpose() * w))))
    }
    fn frame_derivative(&self, _x: &Point<9>, v: &Point<9>) -> Option<Frame<9, 3>> {
        let w = so3_unflatten(v);
        let basis = so3_algebra_basis();
        Some(Frame::<9, 3>::from_columns(&[
            so3_flatten(&(w * basis[0])),
            so3_flatten(&(w * basis[1])),
            so3_flatten(&(w * basis[2])),
        ]))
    }
    fn drift_vanishes(&self) -> bool {
        self.drift == 0.0
    }
    fn drift_derivative(&self, x: &Point<9>, v: &Point<9>) -> Option<Point<9>> {
        let r = so3_unflatten(x);
        let w = so3_unflatten(v);
        let e = Self::tilt_direction();
        let d = w * skew(&(r.transpose() * e)) + r * skew(&(w.transpose() * e));
        Some(so3_flatten(&d) * self.drift)
    }
    fn ricci(&self, x: &Point<9>, v: &Point<9>) -> Option<Point<9>> {
        Some(self.project(x, v) * 0.25)
    }
    fn b_matrix(&self, _x: &Point<9>) -> Option<FieldMatrix<3>> {
        Some(FieldMatrix::identity() * 0.125)
    }
    fn omega(&self, _x: &Point<9>, _v: &Point<9>) -> Option<FieldMatrix<3>> {
        // bi-invariant metric: <[A_j, A_k], xi> - <[xi, A_j], A_k> = 0
        Some(FieldMatrix::zeros())
    }
}
