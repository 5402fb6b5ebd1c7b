use std::fmt;

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Manifold, Point};
use crate::sde::{DiffusionPath, TimeGrid};

type ValueFn<const D: usize> = dyn Fn(&[Point<D>]) -> f64 + Send + Sync;
type GradientFn<const D: usize> = dyn Fn(&[Point<D>]) -> Vec<Point<D>> + Send + Sync;

pub const GRADIENT_STEP: f64 = 1e-6;

/// `Phi(x) = f(x_{t_1}, ..., x_{t_m})` for grid nodes `t_1 < ... < t_m`, with
/// the ambient gradient of `f` in every slot.
pub struct CylinderFunction<const D: usize> {
    name: String,
    times: Vec<usize>,
    value: Box<ValueFn<D>>,
    gradient: Option<Box<GradientFn<D>>>,
}

impl<const D: usize> fmt::Debug for CylinderFunction<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunction")
            .field("name", &self.name)
            .field("times", &self.times)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl<const D: usize> CylinderFunction<D> {
    /// Function without a closed-form gradient; gradients fall back to
    /// central differences.
    pub fn new(
        name: impl Into<String>,
        times: Vec<usize>,
        value: impl Fn(&[Point<D>]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "cylinder times must be strictly increasing and non-empty, got {times:?}"
            )));
        }
        Ok(Self {
            name: name.into(),
            times,
            value: Box::new(value),
            gradient: None,
        })
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[Point<D>]) -> Vec<Point<D>> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        match self.times.last() {
            Some(&last) if last > grid.steps() => Err(Error::IndexOutOfRange {
                index: last,
                n: grid.steps() + 1,
            }),
            _ => Ok(()),
        }
    }

    fn slots(&self, path: &DiffusionPath<D>) -> Vec<Point<D>> {
        self.times.iter().map(|&k| path.points[k]).collect()
    }

    pub fn value_at(&self, points: &[Point<D>]) -> f64 {
        (self.value)(points)
    }

    pub fn evaluate(&self, path: &DiffusionPath<D>) -> f64 {
        self.value_at(&self.slots(path))
    }

    pub fn gradient_at(&self, points: &[Point<D>]) -> Vec<Point<D>> {
        match &self.gradient {
            Some(g) => g(points),
            None => self.fd_gradient_at(points),
        }
    }

    /// Central differences in every ambient coordinate of every slot.
    pub fn fd_gradient_at(&self, points: &[Point<D>]) -> Vec<Point<D>> {
        let mut shifted = points.to_vec();
        (0..points.len())
            .map(|j| {
                Point::<D>::from_fn(|c, _| {
                    let orig = shifted[j][c];
                    shifted[j][c] = orig + GRADIENT_STEP;
                    let up = self.value_at(&shifted);
                    shifted[j][c] = orig - GRADIENT_STEP;
                    let down = self.value_at(&shifted);
                    shifted[j][c] = orig;
                    (up - down) / (2.0 * GRADIENT_STEP)
                })
            })
            .collect()
    }

    /// `<a, x_t>`.
    pub fn ambient_linear(time: usize, a: Point<D>) -> Self {
        Self::linear_combination(vec![time], vec![a]).expect("a single time is valid")
    }

    /// `sum_j <a_j, x_{t_j}>`.
    pub fn linear_combination(times: Vec<usize>, coeffs: Vec<Point<D>>) -> Result<Self> {
        if coeffs.len() != times.len() {
            return Err(Error::InvalidGrid(format!(
                "{} coefficient vectors for {} times",
                coeffs.len(),
                times.len()
            )));
        }
        let grad = coeffs.clone();
        Ok(Self::new("linear", times, move |xs| {
            xs.iter().zip(&coeffs).map(|(x, a)| a.dot(x)).sum()
        })?
        .with_gradient(move |_| grad.clone()))
    }

    /// `<x_t, A x_t>`.
    pub fn quadratic(time: usize, a: SMatrix<f64, D, D>) -> Self {
        let sym = a + a.transpose();
        Self::new("quadratic", vec![time], move |xs| xs[0].dot(&(a * xs[0])))
            .expect("a single time is valid")
            .with_gradient(move |xs| vec![sym * xs[0]])
    }

    /// `prod_c (x_t)_c^{e_c}`.
    pub fn monomial(time: usize, exponents: [u32; D]) -> Self {
        Self::new("monomial", vec![time], move |xs| {
            xs[0]
                .iter()
                .zip(exponents)
                .map(|(x, e)| x.powi(e as i32))
                .product()
        })
        .expect("a single time is valid")
        .with_gradient(move |xs| {
            let x = xs[0];
            vec![Point::<D>::from_fn(|c, _| {
                if exponents[c] == 0 {
                    return 0.0;
                }
                (0..D)
                    .map(|d| {
                        let e = exponents[d] as i32;
                        if d == c {
                            f64::from(e) * x[d].powi(e - 1)
                        } else {
                            x[d].powi(e)
                        }
                    })
                    .product()
            })]
        })
    }

    /// `cos(<k, x_t> + phase)`, periodic on the torus for integer `k`.
    pub fn cosine(time: usize, k: Point<D>, phase: f64) -> Self {
        Self::new("cosine", vec![time], move |xs| {
            (k.dot(&xs[0]) + phase).cos()
        })
        .expect("a single time is valid")
        .with_gradient(move |xs| vec![k * -(k.dot(&xs[0]) + phase).sin()])
    }
}

/// `Z(Phi)(x) = sum_j <P_{x_{t_j}} grad_j f, Z_{t_j}>`.
pub fn directional_derivative<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    phi: &CylinderFunction<D>,
    xpath: &DiffusionPath<D>,
    z: &[Point<D>],
) -> f64
where
    M: Manifold<D, N>,
{
    let slots = phi.slots(xpath);
    phi.gradient_at(&slots)
        .iter()
        .zip(phi.times())
        .zip(&slots)
        .map(|((g, &k), x)| geo.project(x, g).dot(&z[k]))
        .sum()
}
