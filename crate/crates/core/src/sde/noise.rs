use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::Coeffs;

/// Uniform partition `t_k = k T / N_t` of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            steps: 256,
        }
    }
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 steps, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    pub fn refine(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.steps * factor)
    }

    pub(crate) fn ensure_steps(&self, found: usize) -> Result<()> {
        if found == self.steps {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.steps,
                found,
            })
        }
    }
}

/// Increments of an `N`-dimensional standard Wiener process on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath<const N: usize> {
    pub grid: TimeGrid,
    pub increments: Vec<Coeffs<N>>,
    pub seed: u64,
    pub sample_index: u64,
}

/// Draws the Brownian increments of sample `sample_index`.
///
/// Every sample owns the ChaCha stream numbered by its index, so the path
/// depends only on `(seed, sample_index)` and never on how samples are
/// distributed over workers.
pub fn sample_brownian<const N: usize>(
    grid: &TimeGrid,
    seed: u64,
    sample_index: u64,
) -> BrownianPath<N> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    let scale = grid.dt().sqrt();
    let increments = (0..grid.steps())
        .map(|_| Coeffs::<N>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal) * scale))
        .collect();
    BrownianPath {
        grid: *grid,
        increments,
        seed,
        sample_index,
    }
}

impl<const N: usize> BrownianPath<N> {
    pub fn zero(grid: &TimeGrid) -> Self {
        Self {
            grid: *grid,
            increments: vec![Coeffs::zeros(); grid.steps()],
            seed: 0,
            sample_index: 0,
        }
    }

    /// `w_{t_k}` for `k = 0..=N_t`.
    pub fn values(&self) -> Vec<Coeffs<N>> {
        cumulative(&self.increments, 1.0)
    }

    /// Same path on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.grid.steps().is_multiple_of(factor) {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {} steps by {factor}",
                self.grid.steps()
            )));
        }
        let grid = TimeGrid::new(self.grid.horizon(), self.grid.steps() / factor)?;
        let increments = self
            .increments
            .chunks(factor)
            .map(|c| c.iter().sum())
            .collect();
        Ok(Self {
            grid,
            increments,
            seed: self.seed,
            sample_index: self.sample_index,
        })
    }
}

/// Cameron–Martin path with piecewise-constant derivative `rdot` on grid cells
/// and `r_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartinPath<const N: usize> {
    pub grid: TimeGrid,
    pub rdot: Vec<Coeffs<N>>,
}

impl<const N: usize> CameronMartinPath<N> {
    pub fn from_cells(grid: &TimeGrid, rdot: Vec<Coeffs<N>>) -> Result<Self> {
        grid.ensure_steps(rdot.len())?;
        if rdot.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidGrid(
                "non-finite Cameron-Martin derivative".into(),
            ));
        }
        Ok(Self { grid: *grid, rdot })
    }

    pub fn zero(grid: &TimeGrid) -> Self {
        Self::constant(grid, Coeffs::zeros())
    }

    pub fn constant(grid: &TimeGrid, rdot: Coeffs<N>) -> Self {
        Self {
            grid: *grid,
            rdot: vec![rdot; grid.steps()],
        }
    }

    /// Samples `rdot` at the left node of every cell.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> Coeffs<N>) -> Self {
        Self {
            grid: *grid,
            rdot: (0..grid.steps()).map(|k| f(grid.node(k))).collect(),
        }
    }

    /// `r_{t_k}` for `k = 0..=N_t`.
    pub fn values(&self) -> Vec<Coeffs<N>> {
        cumulative(&self.rdot, self.grid.dt())
    }

    /// `|rdot|^2_{L^2[0,T]}`.
    pub fn norm_sq(&self) -> f64 {
        self.rdot.iter().map(|c| c.norm_squared()).sum::<f64>() * self.grid.dt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            rdot: self.rdot.iter().map(|c| c * factor).collect(),
        }
    }
}

fn cumulative<const N: usize>(cells: &[Coeffs<N>], dt: f64) -> Vec<Coeffs<N>> {
    let mut acc = Coeffs::<N>::zeros();
    let mut out = Vec::with_capacity(cells.len() + 1);
    out.push(acc);
    for c in cells {
        acc += c * dt;
        out.push(acc);
    }
    out
}
