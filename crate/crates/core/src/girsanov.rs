//! Divergence of the admissible fields and the Radon–Nikodym density of the
//! flowed diffusion law.

use crate::error::{Error, Result};
use crate::flow::{flow_integrate, FlowMode, FlowResult};
use crate::geometry::{Coeffs, Geometry, Manifold, TangentVector};
use crate::sde::{
    integrate_diffusion, make_admissible_system, BrownianPath, CameronMartinPath, CoefficientPath,
    DiffusionPath,
};

/// `Div(Z) = sum_i int (rdot^i + <Ric(Z_t), X_i(x_t)> / 2) dw_i`, split into its
/// two stochastic integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceValue {
    pub total: f64,
    pub forcing_part: f64,
    pub curvature_part: f64,
}

/// Itô (left-point) sums of the divergence integrand against `increments`.
pub fn divergence_with_increments<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
    increments: &[Coeffs<N>],
    h: &CoefficientPath<N>,
    r: &CameronMartinPath<N>,
) -> Result<DivergenceValue>
where
    M: Manifold<D, N>,
{
    let grid = &xpath.grid;
    xpath.ensure_grid(&r.grid)?;
    grid.ensure_steps(increments.len())?;
    grid.ensure_steps(h.values.len().saturating_sub(1))?;
    let mut forcing = 0.0;
    let mut curvature = 0.0;
    for (k, dw) in increments.iter().enumerate() {
        let x = &xpath.points[k];
        forcing += r.rdot[k].dot(dw);
        if h.values[k].iter().any(|c| *c != 0.0) {
            let f = geo.frame(x);
            let z = TangentVector {
                base: *x,
                vec: f * h.values[k],
            };
            let ric = geo.ricci(x, &z).vec;
            curvature += 0.5 * (f.transpose() * ric).dot(dw);
        }
    }
    Ok(DivergenceValue {
        total: forcing + curvature,
        forcing_part: forcing,
        curvature_part: curvature,
    })
}

/// Divergence against the driving increments `w`.
pub fn divergence<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    h: &CoefficientPath<N>,
    r: &CameronMartinPath<N>,
) -> Result<DivergenceValue>
where
    M: Manifold<D, N>,
{
    xpath.ensure_grid(&w.grid)?;
    divergence_with_increments(geo, xpath, &w.increments, h, r)
}

/// Noise increments read off a path:
///
/// ```text
/// dW_k = X(x_k)^T (x_{k+1} - x_k - (Y + sum_i nabla_{X_i} X_i / 2)(x_k) dt)
/// ```
///
/// On the diffusion path itself this returns the tangential part of the
/// driving increments up to discretization error.
pub fn path_increments<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
) -> Vec<Coeffs<N>>
where
    M: Manifold<D, N>,
{
    let dt = xpath.grid.dt();
    let m = geo.manifold();
    xpath
        .points
        .windows(2)
        .map(|pair| {
            let x = &pair[0];
            let drift = m.drift(x) + geo.connection_trace(x) * 0.5;
            m.frame(x).transpose() * (pair[1] - x - drift * dt)
        })
        .collect()
}

/// Divergence at a path, integrated against the increments recovered from
/// the path itself. This is the form used along flowed paths `x^{-u}`.
pub fn path_divergence<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
    h: &CoefficientPath<N>,
    r: &CameronMartinPath<N>,
) -> Result<DivergenceValue>
where
    M: Manifold<D, N>,
{
    divergence_with_increments(geo, xpath, &path_increments(geo, xpath), h, r)
}

/// `log rho = int_0^s Div(Z)(x^{-u}) du` by the trapezoid rule and
/// `rho = exp(log rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue {
    pub log_density: f64,
    pub density: f64,
    pub du: f64,
}

/// Density from a flow run towards `-s`, using every `stride`-th snapshot as
/// a `u`-node. The coefficients stored with each snapshot are the `h` of the
/// flowed path, so nothing is re-solved.
pub fn log_density_from_flow<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    flow: &FlowResult<D, N>,
    r: &CameronMartinPath<N>,
    stride: usize,
) -> Result<DensityValue>
where
    M: Manifold<D, N>,
{
    let steps = flow.snapshots.len() - 1;
    if stride == 0 || !steps.is_multiple_of(stride) {
        return Err(Error::InvalidFlow(format!(
            "u-grid stride {stride} does not divide {steps} flow steps"
        )));
    }
    // the flow runs towards -s, so u = -s_flow
    let du = -flow.step * stride as f64;
    let nodes = flow
        .snapshots
        .iter()
        .step_by(stride)
        .map(|snap| Ok(path_divergence(geo, &snap.path, &snap.eta, r)?.total))
        .collect::<Result<Vec<f64>>>()?;
    let log_density = trapezoid(&nodes) * du;
    Ok(DensityValue {
        log_density,
        density: log_density.exp(),
        du: du.abs(),
    })
}

fn trapezoid(values: &[f64]) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => 0.5 * (first + last) + inner.iter().sum::<f64>(),
    }
}

/// Number of flow steps per `u`-node.
pub fn u_stride(ds: f64, du: f64) -> Result<usize> {
    let stride = (du / ds).round();
    if stride >= 1.0 && (stride * ds - du).abs() <= 1e-9 * du.abs() {
        Ok(stride as usize)
    } else {
        Err(Error::InvalidFlow(format!(
            "du = {du} is not a positive multiple of ds = {ds}"
        )))
    }
}

/// `d nu_s / d nu` at the path `xpath`: flows it to `-s` with step `ds` and
/// integrates the divergence in `u` with step `du` (a multiple of `ds`).
#[allow(clippy::too_many_arguments)]
pub fn rn_log_density_at<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    xpath: &DiffusionPath<D>,
    w: &BrownianPath<N>,
    r: &CameronMartinPath<N>,
    s: f64,
    ds: f64,
    du: f64,
    mode: FlowMode,
) -> Result<DensityValue>
where
    M: Manifold<D, N>,
{
    let stride = u_stride(ds, du)?;
    let spec = make_admissible_system(geo, r);
    let flow = flow_integrate(geo, xpath, w, &spec, -s, ds, mode)?;
    log_density_from_flow(geo, &flow, r, stride)
}

/// `d nu_s / d nu` at the diffusion path driven by `w`.
#[allow(clippy::too_many_arguments)]
pub fn rn_log_density<M, const D: usize, const N: usize>(
    geo: &Geometry<M, D, N>,
    w: &BrownianPath<N>,
    r: &CameronMartinPath<N>,
    s: f64,
    ds: f64,
    du: f64,
    mode: FlowMode,
) -> Result<DensityValue>
where
    M: Manifold<D, N>,
{
    let xpath = integrate_diffusion(geo, w)?;
    rn_log_density_at(geo, &xpath, w, r, s, ds, du, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights() {
        assert_eq!(trapezoid(&[]), 0.0);
        assert_eq!(trapezoid(&[4.0]), 0.0);
        assert_eq!(trapezoid(&[1.0, 3.0]), 2.0);
        assert_eq!(trapezoid(&[1.0, 2.0, 2.0, 3.0]), 6.0);
    }
}
