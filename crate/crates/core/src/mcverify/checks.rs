use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{flow_derivative, flow_endpoint, flow_integrate, flow_integrate_from, FlowMode};
use crate::geometry::{Geometry, Manifold, Point};
use crate::girsanov::{divergence, log_density_from_flow, u_stride};
use crate::sde::{
    field_along_path, integrate_diffusion, integrate_linear_system, make_admissible_system,
    sample_brownian, BrownianPath, CameronMartinPath, CoefficientPath, DiffusionPath,
    LinearSystemSpec,
};

use super::cylinder::{directional_derivative, CylinderFunction};
use super::stats::{mc_stats, BiasEstimate, MCReport};

pub const MIN_SAMPLES: usize = 100;

/// Threshold for the martingale and normalization checks.
pub const MEAN_CHECK_THRESHOLD: f64 = 4.0;

fn ensure_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            got: n,
        });
    }
    Ok(())
}

/// Runs `sample` for every index in parallel and keeps the results in index
/// order.
fn collect_samples<T, F>(n: usize, sample: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(sample).collect()
}

fn driven_path<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    r: &CameronMartinPath<N>,
    seed: u64,
    index: u64,
) -> Result<(BrownianPath<N>, DiffusionPath<D>)>
where
    M: Manifold<D, N>,
{
    let w = sample_brownian(&r.grid, seed, index);
    let x = integrate_diffusion(geo, &w)?;
    Ok((w, x))
}

/// Integration by parts `E[Z(Phi)] = E[Phi Div(Z)]` for the admissible field
/// generated by `r`, both sides on the same paths.
pub fn ibp_check<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    r: &CameronMartinPath<N>,
    phi: &CylinderFunction<D>,
    n_samples: usize,
    seed: u64,
) -> Result<MCReport>
where
    M: Manifold<D, N>,
{
    ensure_samples(n_samples)?;
    phi.check_grid(&r.grid)?;
    let start = Instant::now();
    let spec = make_admissible_system(geo, r);
    let pairs = collect_samples(n_samples, |i| {
        let (w, x) = driven_path(geo, r, seed, i)?;
        let h = integrate_linear_system(geo, &x, &w, &spec)?;
        let z = field_along_path(geo, &x, &h);
        let lhs = directional_derivative(geo, phi, &x, &z);
        let div = divergence(geo, &x, &w, &h, r)?;
        Ok((lhs, phi.evaluate(&x) * div.total))
    })?;
    let mut report = mc_stats(&pairs)?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Flow parameters of a quasi-invariance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiOptions {
    pub s: f64,
    pub ds: f64,
    pub du: f64,
    pub mode: FlowMode,
    /// Repeat every sample at `ds / 2` and widen the pass band by the
    /// measured first-order bias.
    pub bias_halving: bool,
}

impl QiOptions {
    pub fn new(s: f64, ds: f64) -> Self {
        Self {
            s,
            ds,
            du: ds,
            mode: FlowMode::Euler,
            bias_halving: false,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn qi_pair<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    spec: &LinearSystemSpec<'_, D, N>,
    r: &CameronMartinPath<N>,
    phi: &CylinderFunction<D>,
    x: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    start: &(Vec<Point<D>>, CoefficientPath<N>),
    opts: &QiOptions,
    refine: f64,
) -> Result<(f64, f64)>
where
    M: Manifold<D, N>,
{
    let (ds, du) = (opts.ds / refine, opts.du / refine);
    let stride = u_stride(ds, du)?;
    let forward = flow_endpoint(geo, x, w, spec, &start.0, opts.s, ds, opts.mode)?;
    let backward = flow_integrate_from(geo, x, w, spec, start.clone(), -opts.s, ds, opts.mode)?;
    let rho = log_density_from_flow(geo, &backward, r, stride)?;
    Ok((phi.evaluate(&forward), phi.evaluate(x) * rho.density))
}

/// Quasi-invariance `E[Phi(x^s)] = E[Phi(x) d nu_s / d nu]`.
pub fn qi_check<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    r: &CameronMartinPath<N>,
    phi: &CylinderFunction<D>,
    opts: &QiOptions,
    n_samples: usize,
    seed: u64,
) -> Result<MCReport>
where
    M: Manifold<D, N>,
{
    ensure_samples(n_samples)?;
    phi.check_grid(&r.grid)?;
    if opts.s.is_nan() || opts.s.abs() > 1.0 {
        return Err(Error::InvalidFlow(format!(
            "|s| must be at most 1, got {}",
            opts.s
        )));
    }
    u_stride(opts.ds, opts.du)?;
    let start = Instant::now();
    let spec = make_admissible_system(geo, r);
    let samples = collect_samples(n_samples, |i| {
        let (w, x) = driven_path(geo, r, seed, i)?;
        let start = flow_derivative(geo, &x, &w, &spec)?;
        let main = qi_pair(geo, &spec, r, phi, &x, &w, &start, opts, 1.0)?;
        let half = if opts.bias_halving {
            Some(qi_pair(geo, &spec, r, phi, &x, &w, &start, opts, 2.0)?)
        } else {
            None
        };
        Ok((main, half))
    })?;
    let main: Vec<(f64, f64)> = samples.iter().map(|s| s.0).collect();
    let mut report = mc_stats(&main)?;
    if opts.bias_halving {
        let half: Vec<(f64, f64)> = samples.iter().filter_map(|s| s.1).collect();
        let half = mc_stats(&half)?;
        let bias = BiasEstimate::new(opts.ds, report.diff_mean, half.diff_mean, half.diff_se);
        report = report.with_bias(bias);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// `E[Div(Z)] = 0`: pairs `(Div(Z), 0)` with a 4 SE threshold.
pub fn divergence_check<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    r: &CameronMartinPath<N>,
    n_samples: usize,
    seed: u64,
) -> Result<MCReport>
where
    M: Manifold<D, N>,
{
    ensure_samples(n_samples)?;
    let start = Instant::now();
    let spec = make_admissible_system(geo, r);
    let pairs = collect_samples(n_samples, |i| {
        let (w, x) = driven_path(geo, r, seed, i)?;
        let h = integrate_linear_system(geo, &x, &w, &spec)?;
        Ok((divergence(geo, &x, &w, &h, r)?.total, 0.0))
    })?;
    let mut report = mc_stats(&pairs)?.with_threshold(MEAN_CHECK_THRESHOLD);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report.with_analytic(0.0))
}

/// `E[d nu_s / d nu] = 1`: pairs `(rho, 1)` with a 4 SE threshold.
pub fn density_check<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    r: &CameronMartinPath<N>,
    opts: &QiOptions,
    n_samples: usize,
    seed: u64,
) -> Result<MCReport>
where
    M: Manifold<D, N>,
{
    ensure_samples(n_samples)?;
    let stride = u_stride(opts.ds, opts.du)?;
    let start = Instant::now();
    let spec = make_admissible_system(geo, r);
    let pairs = collect_samples(n_samples, |i| {
        let (w, x) = driven_path(geo, r, seed, i)?;
        let backward = flow_integrate(geo, &x, &w, &spec, -opts.s, opts.ds, opts.mode)?;
        Ok((
            log_density_from_flow(geo, &backward, r, stride)?.density,
            1.0,
        ))
    })?;
    let mut report = mc_stats(&pairs)?.with_threshold(MEAN_CHECK_THRESHOLD);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report.with_analytic(1.0))
}
