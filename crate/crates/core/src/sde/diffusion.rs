use crate::error::{Error, Result};
use crate::geometry::{Geometry, Manifold, Point};

use super::noise::{BrownianPath, TimeGrid};

/// Discrete solution of the diffusion: `points[k]` approximates `x_{t_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPath<const D: usize> {
    pub grid: TimeGrid,
    pub points: Vec<Point<D>>,
}

impl<const D: usize> DiffusionPath<D> {
    pub fn endpoint(&self) -> &Point<D> {
        self.points.last().expect("paths have at least two nodes")
    }

    pub fn max_constraint_violation<const N: usize>(&self, m: &impl Manifold<D, N>) -> f64 {
        self.points
            .iter()
            .map(|x| m.constraint_violation(x))
            .fold(0.0, f64::max)
    }

    pub(crate) fn ensure_grid(&self, grid: &TimeGrid) -> Result<()> {
        if self.points.len() == grid.steps() + 1 {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: grid.steps(),
                found: self.points.len().saturating_sub(1),
            })
        }
    }
}

const DIFFUSION_HINT: &str = "the time step is too large for this path; increase N_t";

/// Stratonovich Heun scheme with a retraction after predictor and corrector:
///
/// ```text
/// x~      = retract(x + X(x) dW + Y(x) dt)
/// x_{k+1} = retract(x + (X(x) + X(x~)) dW / 2 + (Y(x) + Y(x~)) dt / 2)
/// ```
pub fn integrate_diffusion<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    w: &BrownianPath<N>,
) -> Result<DiffusionPath<D>>
where
    M: Manifold<D, N>,
{
    let m = geo.manifold();
    let dt = w.grid.dt();
    let mut x = m.base_point();
    let mut points = Vec::with_capacity(w.grid.steps() + 1);
    points.push(x);
    for dw in &w.increments {
        let (f0, y0) = (m.frame(&x), m.drift(&x));
        let predictor = geo.retract(&(x + f0 * dw + y0 * dt), DIFFUSION_HINT)?;
        let (f1, y1) = (m.frame(&predictor), m.drift(&predictor));
        let step = (f0 + f1) * dw * 0.5 + (y0 + y1) * (0.5 * dt);
        // A zero step keeps the point bit-for-bit.
        if step.iter().any(|c| *c != 0.0) {
            x = geo.retract(&(x + step), DIFFUSION_HINT)?;
        }
        points.push(x);
    }
    Ok(DiffusionPath {
        grid: w.grid,
        points,
    })
}
