//! Empirical self-convergence orders of the integrators against a finer
//! reference computed from the same driving noise.

use crate::error::{Error, Result};
use crate::flow::{flow_integrate, path_l2_distance, FlowMode};
use crate::geometry::{Coeffs, Geometry, Manifold};
use crate::sde::{
    integrate_diffusion, integrate_linear_system, make_admissible_system, sample_brownian,
    CameronMartinPath, TimeGrid,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub label: String,
    /// Step sizes, coarsest first.
    pub steps: Vec<f64>,
    /// Root-mean-square error over the sampled paths at each step size.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log step`.
    pub order: f64,
}

/// Slope of the least-squares line through `(log step, log error)`.
/// Vanishing errors mean the scheme is exact and give an infinite order.
pub fn fit_order(steps: &[f64], errors: &[f64]) -> f64 {
    if errors.iter().all(|e| *e == 0.0) {
        return f64::INFINITY;
    }
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn reference_factor(levels: &[usize], refine: usize) -> Result<usize> {
    let finest = *levels
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidGrid("no grid levels given".into()))?;
    let reference = finest * refine;
    if levels.len() < 2
        || levels
            .iter()
            .any(|&n| n == 0 || !reference.is_multiple_of(n))
    {
        return Err(Error::InvalidGrid(format!(
            "levels {levels:?} must be at least two divisors of the reference {reference}"
        )));
    }
    Ok(reference)
}

fn rms(sum_sq: f64, n: usize) -> f64 {
    (sum_sq / n as f64).sqrt()
}

/// Endpoint error of the diffusion at `N_t = levels[i]` against a reference
/// `refine` times finer than the finest level.
pub fn diffusion_convergence<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    horizon: f64,
    levels: &[usize],
    refine: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ConvergenceReport>
where
    M: Manifold<D, N>,
{
    let reference = reference_factor(levels, refine)?;
    let fine = TimeGrid::new(horizon, reference)?;
    let mut sum_sq = vec![0.0; levels.len()];
    for i in 0..n_paths as u64 {
        let w = sample_brownian::<N>(&fine, seed, i);
        let exact = *integrate_diffusion(geo, &w)?.endpoint();
        for (acc, &n) in sum_sq.iter_mut().zip(levels) {
            let coarse = integrate_diffusion(geo, &w.coarsen(reference / n)?)?;
            *acc += (coarse.endpoint() - exact).norm_squared();
        }
    }
    Ok(report("diffusion", horizon, levels, &sum_sq, n_paths))
}

/// Endpoint error of the `h`-system along the diffusion path, both solved at
/// `N_t = levels[i]`, against the reference resolution.
#[allow(clippy::too_many_arguments)]
pub fn h_convergence<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    rdot: &(dyn Fn(f64) -> Coeffs<N> + Sync),
    horizon: f64,
    levels: &[usize],
    refine: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ConvergenceReport>
where
    M: Manifold<D, N>,
{
    let reference = reference_factor(levels, refine)?;
    let fine = TimeGrid::new(horizon, reference)?;
    let solve = |w: &crate::sde::BrownianPath<N>| -> Result<Coeffs<N>> {
        let r = CameronMartinPath::from_fn(&w.grid, rdot);
        let x = integrate_diffusion(geo, w)?;
        let h = integrate_linear_system(geo, &x, w, &make_admissible_system(geo, &r))?;
        Ok(h.values[w.grid.steps()])
    };
    let mut sum_sq = vec![0.0; levels.len()];
    for i in 0..n_paths as u64 {
        let w = sample_brownian::<N>(&fine, seed, i);
        let exact = solve(&w)?;
        for (acc, &n) in sum_sq.iter_mut().zip(levels) {
            *acc += (solve(&w.coarsen(reference / n)?)? - exact).norm_squared();
        }
    }
    Ok(report("h-system", horizon, levels, &sum_sq, n_paths))
}

fn report(
    label: &str,
    horizon: f64,
    levels: &[usize],
    sum_sq: &[f64],
    n_paths: usize,
) -> ConvergenceReport {
    let steps: Vec<f64> = levels.iter().map(|&n| horizon / n as f64).collect();
    let errors: Vec<f64> = sum_sq.iter().map(|s| rms(*s, n_paths)).collect();
    let order = fit_order(&steps, &errors);
    ConvergenceReport {
        label: label.to_string(),
        steps,
        errors,
        order,
    }
}

/// `L^2[0,T]` error of `x^{s_max}` at flow steps `ds_levels` against the flow
/// with step `ds_reference`, on fixed diffusion paths.
#[allow(clippy::too_many_arguments)]
pub fn flow_convergence<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    r: &CameronMartinPath<N>,
    s_max: f64,
    ds_levels: &[f64],
    ds_reference: f64,
    mode: FlowMode,
    n_paths: usize,
    seed: u64,
) -> Result<ConvergenceReport>
where
    M: Manifold<D, N>,
{
    if ds_levels.len() < 2 {
        return Err(Error::InvalidFlow("need at least two flow steps".into()));
    }
    let spec = make_admissible_system(geo, r);
    let mut sum_sq = vec![0.0; ds_levels.len()];
    for i in 0..n_paths as u64 {
        let w = sample_brownian::<N>(&r.grid, seed, i);
        let x = integrate_diffusion(geo, &w)?;
        let exact = flow_integrate(geo, &x, &w, &spec, s_max, ds_reference, mode)?;
        for (acc, &ds) in sum_sq.iter_mut().zip(ds_levels) {
            let coarse = flow_integrate(geo, &x, &w, &spec, s_max, ds, mode)?;
            *acc += path_l2_distance(&coarse.last().path, &exact.last().path).powi(2);
        }
    }
    let errors: Vec<f64> = sum_sq.iter().map(|s| rms(*s, n_paths)).collect();
    Ok(ConvergenceReport {
        label: format!("flow-{mode}"),
        steps: ds_levels.to_vec(),
        order: fit_order(ds_levels, &errors),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_laws() {
        let steps = [0.1, 0.05, 0.025];
        let errors: Vec<f64> = steps.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        assert!((fit_order(&steps, &errors) - 1.5).abs() < 1e-12);
        assert_eq!(fit_order(&steps, &[0.0; 3]), f64::INFINITY);
    }

    #[test]
    fn levels_must_divide_the_reference() {
        assert_eq!(reference_factor(&[64, 128], 16).unwrap(), 2048);
        assert!(reference_factor(&[64], 16).is_err());
        assert!(reference_factor(&[], 16).is_err());
        assert!(reference_factor(&[3, 4], 1).is_err());
    }
}
