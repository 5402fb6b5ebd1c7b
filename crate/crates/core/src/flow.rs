//! Flow `dx^s/ds = V(x^s)` on path space generated by a vector field
//! `V_t = X_i(x_t) eta^i_t` whose coefficients solve a linear system along the
//! path itself.
//!
//! The flow is integrated by stepping in `s`: every step re-solves `eta` along
//! the current path with the stored driving noise and moves each node along
//! `V_t`, followed by a retraction. The Picard form of the flow equation is
//! kept as a residual diagnostic.

use std::fmt;
use std::str::FromStr;

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Manifold, Point};
use crate::sde::{
    field_along_path, integrate_linear_system, BrownianPath, CoefficientPath, DiffusionPath,
    LinearSystemSpec, TimeGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowMode {
    #[default]
    Euler,
    Heun,
}

impl FromStr for FlowMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "euler" => Ok(Self::Euler),
            "heun" => Ok(Self::Heun),
            other => Err(format!(
                "unknown flow mode `{other}` (expected euler or heun)"
            )),
        }
    }
}

impl fmt::Display for FlowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Euler => "euler",
            Self::Heun => "heun",
        })
    }
}

/// Path `x^s` and the coefficients `eta` solved along it.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<const D: usize, const N: usize> {
    pub s: f64,
    pub path: DiffusionPath<D>,
    pub eta: CoefficientPath<N>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDiagnostics {
    pub constraint_violation: f64,
    /// `L^2[0,T]` distance to the previous snapshot (zero for the first).
    pub step_distance: f64,
}

/// Snapshots at `s_k = k * step`, `k = 0..=K`, where `step` carries the sign
/// of the flow direction.
#[derive(Debug, Clone)]
pub struct FlowResult<const D: usize, const N: usize> {
    pub step: f64,
    pub mode: FlowMode,
    pub snapshots: Vec<FlowState<D, N>>,
    pub diagnostics: Vec<FlowDiagnostics>,
}

impl<const D: usize, const N: usize> FlowResult<D, N> {
    pub fn last(&self) -> &FlowState<D, N> {
        self.snapshots
            .last()
            .expect("a flow has at least one snapshot")
    }

    pub fn max_constraint_violation(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.constraint_violation)
            .fold(0.0, f64::max)
    }
}

/// `sqrt(sum_k w_k |v_k|^2 dt)` with trapezoid weights over the grid nodes.
pub fn l2_norm<const K: usize>(grid: &TimeGrid, values: &[SVector<f64, K>]) -> f64 {
    let last = values.len().saturating_sub(1);
    let sum: f64 = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            w * v.norm_squared()
        })
        .sum();
    (sum * grid.dt()).sqrt()
}

pub fn path_l2_distance<const D: usize>(a: &DiffusionPath<D>, b: &DiffusionPath<D>) -> f64 {
    let diff: Vec<Point<D>> = a.points.iter().zip(&b.points).map(|(p, q)| p - q).collect();
    l2_norm(&a.grid, &diff)
}

/// `V(x^s)`: re-solves the linear system along `path` and returns the field
/// together with the coefficients.
pub fn flow_derivative<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    path: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
) -> Result<(Vec<Point<D>>, CoefficientPath<N>)>
where
    M: Manifold<D, N>,
{
    let eta = integrate_linear_system(geo, path, w, spec)?;
    Ok((field_along_path(geo, path, &eta), eta))
}

const FLOW_HINT: &str = "the flow step is too large; decrease ds";

fn displace<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    path: &DiffusionPath<D>,
    field: &[Point<D>],
    h: f64,
) -> Result<DiffusionPath<D>>
where
    M: Manifold<D, N>,
{
    let points = path
        .points
        .iter()
        .zip(field)
        .map(|(x, v)| {
            if v.iter().all(|c| *c == 0.0) {
                Ok(*x)
            } else {
                geo.retract(&(x + v * h), FLOW_HINT)
            }
        })
        .collect::<Result<_>>()?;
    Ok(DiffusionPath {
        grid: path.grid,
        points,
    })
}

/// Integrates the flow from `x0` up to `s_max` (negative values flow
/// backwards) with step `ds`.
pub fn flow_integrate<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    x0: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
    s_max: f64,
    ds: f64,
    mode: FlowMode,
) -> Result<FlowResult<D, N>>
where
    M: Manifold<D, N>,
{
    flow_steps(s_max, ds)?;
    let start = flow_derivative(geo, x0, w, spec)?;
    flow_integrate_from(geo, x0, w, spec, start, s_max, ds, mode)
}

/// [`flow_integrate`] with `V(x0)` and its coefficients already solved.
#[allow(clippy::too_many_arguments)]
pub fn flow_integrate_from<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    x0: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
    start: (Vec<Point<D>>, CoefficientPath<N>),
    s_max: f64,
    ds: f64,
    mode: FlowMode,
) -> Result<FlowResult<D, N>>
where
    M: Manifold<D, N>,
{
    let n_steps = flow_steps(s_max, ds)?;
    let step = if s_max < 0.0 { -ds } else { ds };
    let m = geo.manifold();

    let (mut field, eta) = start;
    let mut snapshots = Vec::with_capacity(n_steps + 1);
    let mut diagnostics = Vec::with_capacity(n_steps + 1);
    diagnostics.push(FlowDiagnostics {
        constraint_violation: x0.max_constraint_violation(m),
        step_distance: 0.0,
    });
    snapshots.push(FlowState {
        s: 0.0,
        path: x0.clone(),
        eta,
    });

    for k in 1..=n_steps {
        let current = &snapshots[k - 1].path;
        let next = flow_step(geo, current, &field, w, spec, step, mode)?;
        let (next_field, eta) = flow_derivative(geo, &next, w, spec)?;
        diagnostics.push(FlowDiagnostics {
            constraint_violation: next.max_constraint_violation(m),
            step_distance: path_l2_distance(&next, current),
        });
        snapshots.push(FlowState {
            s: step * k as f64,
            path: next,
            eta,
        });
        field = next_field;
    }
    Ok(FlowResult {
        step,
        mode,
        snapshots,
        diagnostics,
    })
}

/// Only the end point `x^{s_max}` of the flow started with the field `field`
/// at `x0`. Skips the snapshots and the solve at the final path.
#[allow(clippy::too_many_arguments)]
pub fn flow_endpoint<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    x0: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
    field: &[Point<D>],
    s_max: f64,
    ds: f64,
    mode: FlowMode,
) -> Result<DiffusionPath<D>>
where
    M: Manifold<D, N>,
{
    let n_steps = flow_steps(s_max, ds)?;
    let step = if s_max < 0.0 { -ds } else { ds };
    let mut path = x0.clone();
    let mut field = field.to_vec();
    for k in 1..=n_steps {
        path = flow_step(geo, &path, &field, w, spec, step, mode)?;
        if k < n_steps {
            field = flow_derivative(geo, &path, w, spec)?.0;
        }
    }
    Ok(path)
}

fn flow_step<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    current: &DiffusionPath<D>,
    field: &[Point<D>],
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
    step: f64,
    mode: FlowMode,
) -> Result<DiffusionPath<D>>
where
    M: Manifold<D, N>,
{
    match mode {
        FlowMode::Euler => displace(geo, current, field, step),
        FlowMode::Heun => {
            let predictor = displace(geo, current, field, step)?;
            let (field_pred, _) = flow_derivative(geo, &predictor, w, spec)?;
            let averaged: Vec<Point<D>> = field
                .iter()
                .zip(&field_pred)
                .map(|(a, b)| (a + b) * 0.5)
                .collect();
            displace(geo, current, &averaged, step)
        }
    }
}

fn flow_steps(s_max: f64, ds: f64) -> Result<usize> {
    if !(ds.is_finite() && ds > 0.0) {
        return Err(Error::InvalidFlow(format!("ds must be positive, got {ds}")));
    }
    if !s_max.is_finite() {
        return Err(Error::InvalidFlow(format!(
            "s_max must be finite, got {s_max}"
        )));
    }
    let ratio = s_max.abs() / ds;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidFlow(format!(
            "s_max = {s_max} is not a multiple of ds = {ds}"
        )));
    }
    Ok(n as usize)
}

/// `| x^{s_k} - x^0 - int_0^{s_k} V(x^u) du |_{L^2[0,T]}` for every snapshot,
/// with the `u`-integral by the trapezoid rule over the snapshots.
pub fn picard_residual<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    result: &FlowResult<D, N>,
) -> Vec<f64>
where
    M: Manifold<D, N>,
{
    let base = &result.snapshots[0].path;
    let fields: Vec<Vec<Point<D>>> = result
        .snapshots
        .iter()
        .map(|s| field_along_path(geo, &s.path, &s.eta))
        .collect();
    let mut integral = vec![Point::<D>::zeros(); base.points.len()];
    let mut out = Vec::with_capacity(result.snapshots.len());
    out.push(0.0);
    for k in 1..result.snapshots.len() {
        for (acc, (a, b)) in integral
            .iter_mut()
            .zip(fields[k - 1].iter().zip(&fields[k]))
        {
            *acc += (a + b) * (0.5 * result.step);
        }
        let residual: Vec<Point<D>> = result.snapshots[k]
            .path
            .points
            .iter()
            .zip(&base.points)
            .zip(&integral)
            .map(|((x, x0), i)| x - x0 - i)
            .collect();
        out.push(l2_norm(&base.grid, &residual));
    }
    out
}

/// `delta(s) = |x^{s + ds} - x^s|_{L^2[0,T]}` along the snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityTable {
    pub step: f64,
    /// `(s, delta(s))` for every consecutive pair of snapshots.
    pub increments: Vec<(f64, f64)>,
    /// `max_s delta(s) / |ds|`.
    pub max_ratio: f64,
}

pub fn flow_regularity<const D: usize, const N: usize>(
    result: &FlowResult<D, N>,
) -> RegularityTable {
    let increments: Vec<(f64, f64)> = result
        .snapshots
        .windows(2)
        .map(|w| (w[0].s, path_l2_distance(&w[1].path, &w[0].path)))
        .collect();
    let max_ratio = increments
        .iter()
        .map(|(_, d)| d / result.step.abs())
        .fold(0.0, f64::max);
    RegularityTable {
        step: result.step,
        increments,
        max_ratio,
    }
}

/// `| x^{s+u} - (x^s)^u |_{L^2[0,T]}`: the flow to `s + u` against the flow to
/// `s` continued by `u`.
#[allow(clippy::too_many_arguments)]
pub fn flow_group_check<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    x0: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
    s: f64,
    u: f64,
    ds: f64,
    mode: FlowMode,
) -> Result<f64>
where
    M: Manifold<D, N>,
{
    let direct = flow_integrate(geo, x0, w, spec, s + u, ds, mode)?;
    let first = flow_integrate(geo, x0, w, spec, s, ds, mode)?;
    let composed = flow_integrate(geo, &first.last().path, w, spec, u, ds, mode)?;
    Ok(path_l2_distance(&direct.last().path, &composed.last().path))
}

/// `| (x^s)^{-s} - x |_{L^2[0,T]}`.
pub fn flow_roundtrip<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    x0: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    spec: &LinearSystemSpec<'_, D, N>,
    s: f64,
    ds: f64,
    mode: FlowMode,
) -> Result<f64>
where
    M: Manifold<D, N>,
{
    let forward = flow_integrate(geo, x0, w, spec, s, ds, mode)?;
    let back = flow_integrate(geo, &forward.last().path, w, spec, -s, ds, mode)?;
    Ok(path_l2_distance(&back.last().path, x0))
}
