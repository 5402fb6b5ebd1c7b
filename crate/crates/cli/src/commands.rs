//! The experiments behind each subcommand.

use std::time::Instant;

use clap::Subcommand;
use pathflow::convergence::{
    diffusion_convergence, flow_convergence, h_convergence, ConvergenceReport,
};
use pathflow::flow::{
    flow_derivative, flow_group_check, flow_integrate, flow_regularity, flow_roundtrip,
    picard_residual, FlowMode,
};
use pathflow::geometry::{
    check_axioms, check_closed_forms, check_frame_metric, Circle, FlatTorus, Geometry, Manifold,
    So3, Sphere2, AXIOM_TOL, FRAME_METRIC_TOL, LINEARITY_TOL, TOL_CONSTRAINT,
};
use pathflow::girsanov::rn_log_density;
use pathflow::mcverify::{
    density_check, divergence_check, ibp_check, mc_stats, mean_and_se, qi_check, CylinderFunction,
    QiOptions,
};
use pathflow::sde::{
    integrate_diffusion, make_admissible_system, sample_brownian, CameronMartinPath, TimeGrid,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::results::ResultRow;
use crate::CliError;

/// Numerically computed closed forms must match to this.
pub const CLOSED_FORM_TOL: f64 = 1e-6;
/// Closed-form `omega` is algebraically identical to the connection table.
pub const OMEGA_CLOSED_FORM_TOL: f64 = 1e-8;
/// Flat-torus flow against `x + s r`.
pub const SHIFT_TOL: f64 = 1e-10;
/// Flat-torus `h` against `r`.
pub const H_EQUALS_R_TOL: f64 = 1e-12;
/// Flat-torus density against the Girsanov exponent.
pub const GIRSANOV_TOL: f64 = 1e-8;
/// Convergence errors below this count as an exact scheme.
pub const EXACT_TOL: f64 = 1e-12;
/// Group and roundtrip defects must stay below this multiple of the flow
/// step error.
pub const FLOW_DEFECT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Frame metric, connection axioms and closed-form curvature.
    GeometryCheck,
    /// Diffusion paths: constraint drift and the mean of the test function.
    Simulate,
    /// Martingale property of the divergence and normalization of the density.
    Divergence,
    /// Flow diagnostics: Picard residual, regularity, group law, roundtrip.
    Flow,
    /// Integration by parts.
    Ibp,
    /// Quasi-invariance of the diffusion law under the flow.
    Qi,
    /// Self-convergence orders of the integrators.
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::GeometryCheck => "geometry-check",
            Self::Simulate => "simulate",
            Self::Divergence => "divergence",
            Self::Flow => "flow",
            Self::Ibp => "ibp",
            Self::Qi => "qi",
            Self::Convergence => "convergence",
        }
    }
}

/// Rows of a run and its overall verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub pass: bool,
}

impl Outcome {
    fn all(rows: Vec<ResultRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        Self { rows, pass }
    }
}

pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let drift = cfg.drift;
    match cfg.manifold.as_str() {
        "circle" => Runner::new(Circle { drift }, cfg)?.run(command),
        "torus1" => Runner::new(FlatTorus::<1> { drift }, cfg)?.run(command),
        "torus2" => Runner::new(FlatTorus::<2> { drift }, cfg)?.run(command),
        "sphere2" => Runner::new(Sphere2 { drift }, cfg)?.run(command),
        "so3" => Runner::new(So3 { drift }, cfg)?.run(command),
        other => Err(CliError::Config(format!("unknown manifold {other:?}"))),
    }
}

fn seconds(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

fn nan_max(acc: f64, e: f64) -> f64 {
    if e.is_nan() {
        f64::INFINITY
    } else {
        acc.max(e)
    }
}

struct Runner<'a, M, const D: usize, const N: usize> {
    geo: Geometry<M, D, N>,
    cfg: &'a ExperimentConfig,
    grid: TimeGrid,
    r: CameronMartinPath<N>,
    name: String,
}

impl<'a, M, const D: usize, const N: usize> Runner<'a, M, D, N>
where
    M: Manifold<D, N>,
{
    fn new(manifold: M, cfg: &'a ExperimentConfig) -> Result<Self, CliError> {
        let grid = cfg.grid()?;
        let r = cfg.r.build(&grid)?;
        let name = manifold.name().to_string();
        Ok(Self {
            geo: Geometry::new(manifold),
            cfg,
            grid,
            r,
            name,
        })
    }

    fn run(&self, command: Command) -> Result<Outcome, CliError> {
        match command {
            Command::GeometryCheck => Ok(self.geometry_check()),
            Command::Simulate => self.simulate(),
            Command::Divergence => self.divergence(),
            Command::Flow => self.flow(),
            Command::Ibp => self.ibp(),
            Command::Qi => self.qi(),
            Command::Convergence => self.convergence(),
        }
    }

    fn is_flat(&self) -> bool {
        self.name.starts_with("torus")
    }

    fn phi(&self) -> Result<CylinderFunction<D>, CliError> {
        self.cfg
            .phi
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [phi] table".into()))?
            .build(self.grid.steps())
    }

    fn qi_options(&self) -> Result<QiOptions, CliError> {
        Ok(QiOptions {
            du: self.cfg.du(),
            mode: self.cfg.mode()?,
            bias_halving: self.cfg.flow.bias_halving,
            ..QiOptions::new(self.cfg.flow.s, self.cfg.flow.ds)
        })
    }

    fn bound(&self, label: &str, n: usize, value: f64, bound: f64) -> ResultRow {
        ResultRow::bound(label, &self.name, n, self.cfg.seed, value, bound)
    }

    fn geometry_check(&self) -> Outcome {
        let (n, seed) = (self.cfg.geometry.points, self.cfg.seed);
        let row = |label: &str, value: f64, bound: f64, start: Instant| {
            self.bound(label, n, value, bound)
                .with_wall_time(seconds(start))
        };
        let mut rows = Vec::new();

        let start = Instant::now();
        let frame = check_frame_metric(&self.geo, n, seed);
        rows.push(
            ResultRow::compare(
                "geometry-check/frame-metric",
                &self.name,
                n,
                seed,
                frame.max_discrepancy,
                FRAME_METRIC_TOL,
                frame.pass,
            )
            .with_wall_time(seconds(start)),
        );

        let start = Instant::now();
        let ax = check_axioms(&self.geo, n, seed);
        rows.push(row("geometry-check/torsion", ax.torsion, AXIOM_TOL, start));
        rows.push(row(
            "geometry-check/metric-compatibility",
            ax.metric_compatibility,
            AXIOM_TOL,
            start,
        ));
        rows.push(row(
            "geometry-check/ricci-symmetry",
            ax.ricci_symmetry,
            AXIOM_TOL,
            start,
        ));
        rows.push(row(
            "geometry-check/omega-linearity",
            ax.omega_linearity,
            LINEARITY_TOL,
            start,
        ));

        let start = Instant::now();
        let closed = check_closed_forms(&self.geo, n, seed);
        let forms = [
            (
                "geometry-check/ricci-closed-form",
                closed.ricci,
                CLOSED_FORM_TOL,
            ),
            (
                "geometry-check/b-closed-form",
                closed.b_matrix,
                CLOSED_FORM_TOL,
            ),
            (
                "geometry-check/omega-closed-form",
                closed.omega,
                OMEGA_CLOSED_FORM_TOL,
            ),
        ];
        for (label, value, tol) in forms {
            if let Some(v) = value {
                rows.push(row(label, v, tol, start));
            }
        }
        Outcome::all(rows)
    }

    fn simulate(&self) -> Result<Outcome, CliError> {
        let n = self.cfg.samples;
        let seed = self.cfg.seed;
        let phi = self.cfg.phi.as_ref().map(|_| self.phi()).transpose()?;
        let start = Instant::now();
        let samples = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let x = integrate_diffusion(&self.geo, &sample_brownian::<N>(&self.grid, seed, i))?;
                let value = phi.as_ref().map_or(0.0, |p| p.evaluate(&x));
                Ok((x.max_constraint_violation(self.geo.manifold()), value))
            })
            .collect::<Result<Vec<(f64, f64)>, pathflow::Error>>()?;
        let elapsed = seconds(start);
        let violation = samples.iter().map(|s| s.0).fold(0.0, nan_max);
        let mut rows = vec![self
            .bound("simulate/constraint", n, violation, TOL_CONSTRAINT)
            .with_wall_time(elapsed)];
        if phi.is_some() {
            let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let row = match self.cfg.analytic {
                Some(a) => {
                    let pairs: Vec<(f64, f64)> = values.iter().map(|v| (*v, a)).collect();
                    ResultRow::from_report("simulate/phi", &self.name, seed, &mc_stats(&pairs)?)
                }
                None if n >= 2 => {
                    let (mean, se) = mean_and_se(&values);
                    ResultRow {
                        lhs_se: se,
                        ..ResultRow::compare("simulate/phi", &self.name, n, seed, mean, 0.0, true)
                    }
                }
                None => {
                    ResultRow::compare("simulate/phi", &self.name, n, seed, values[0], 0.0, true)
                }
            };
            rows.push(row.with_wall_time(elapsed));
        }
        Ok(Outcome::all(rows))
    }

    fn divergence(&self) -> Result<Outcome, CliError> {
        let (n, seed) = (self.cfg.samples, self.cfg.seed);
        let opts = self.qi_options()?;
        let mut rows = Vec::new();
        let report = divergence_check(&self.geo, &self.r, n, seed)?;
        rows.push(ResultRow::from_report(
            "divergence",
            &self.name,
            seed,
            &report,
        ));
        if self.cfg.divergence.density {
            let report = density_check(&self.geo, &self.r, &opts, n, seed)?;
            rows.push(ResultRow::from_report("density", &self.name, seed, &report));
        }
        if self.is_flat() {
            rows.push(self.girsanov_exactness(&opts)?);
        }
        Ok(Outcome::all(rows))
    }

    /// Pathwise `log rho = s int rdot dw - s^2 |rdot|^2 / 2` on seeds
    /// `seed, seed + 1, ...`.
    fn girsanov_exactness(&self, opts: &QiOptions) -> Result<ResultRow, CliError> {
        let paths = self.cfg.divergence.exact_paths;
        let s = opts.s;
        let start = Instant::now();
        let errors = (0..paths as u64)
            .into_par_iter()
            .map(|k| {
                let w = sample_brownian::<N>(&self.grid, self.cfg.seed.wrapping_add(k), 0);
                let forcing: f64 = self
                    .r
                    .rdot
                    .iter()
                    .zip(&w.increments)
                    .map(|(a, b)| a.dot(b))
                    .sum();
                let exact = s * forcing - 0.5 * s * s * self.r.norm_sq();
                let rho = rn_log_density(&self.geo, &w, &self.r, s, opts.ds, opts.du, opts.mode)?;
                Ok((rho.log_density - exact).abs())
            })
            .collect::<Result<Vec<f64>, pathflow::Error>>()?;
        let worst = errors.into_iter().fold(0.0, nan_max);
        Ok(self
            .bound("density/girsanov-exactness", paths, worst, GIRSANOV_TOL)
            .with_wall_time(seconds(start)))
    }

    fn flow(&self) -> Result<Outcome, CliError> {
        let (n, seed) = (self.cfg.samples, self.cfg.seed);
        let mode = self.cfg.mode()?;
        let (s, ds) = (self.cfg.flow.s, self.cfg.flow.ds);
        let spec = make_admissible_system(&self.geo, &self.r);
        let r_values = self.r.values();
        let flat = self.is_flat();
        let start = Instant::now();
        let per_path = (0..n as u64)
            .into_par_iter()
            .map(|i| -> Result<[f64; 7], pathflow::Error> {
                let w = sample_brownian::<N>(&self.grid, seed, i);
                let x = integrate_diffusion(&self.geo, &w)?;
                let result = flow_integrate(&self.geo, &x, &w, &spec, s, ds, mode)?;
                let picard = *picard_residual(&self.geo, &result).last().unwrap_or(&0.0);
                let regularity = flow_regularity(&result).max_ratio;
                let half = 0.5 * s;
                let group = flow_group_check(&self.geo, &x, &w, &spec, half, half, ds, mode)?;
                let roundtrip = flow_roundtrip(&self.geo, &x, &w, &spec, s, ds, mode)?;
                let (mut shift, mut h_gap) = (0.0, 0.0);
                if flat {
                    for snap in &result.snapshots {
                        for ((xs, x0), rk) in snap.path.points.iter().zip(&x.points).zip(&r_values)
                        {
                            // flat tori have D = N
                            for k in 0..D.min(N) {
                                shift = nan_max(shift, (xs[k] - x0[k] - rk[k] * snap.s).abs());
                            }
                        }
                    }
                    let (_, eta) = flow_derivative(&self.geo, &x, &w, &spec)?;
                    for (h, rk) in eta.values.iter().zip(&r_values) {
                        h_gap = nan_max(h_gap, (h - rk).amax());
                    }
                }
                Ok([
                    result.max_constraint_violation(),
                    picard,
                    regularity,
                    group,
                    roundtrip,
                    shift,
                    h_gap,
                ])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let elapsed = seconds(start);
        let worst = |k: usize| per_path.iter().map(|p| p[k]).fold(0.0, nan_max);

        let step_error = match mode {
            FlowMode::Euler => ds,
            FlowMode::Heun => ds * ds,
        };
        let defect = FLOW_DEFECT_FACTOR * step_error;
        // delta(s) / ds is bounded by the speed of the flow, which scales with
        // |r|_{L^2} <= T |rdot|_{L^2}
        let speed_bound = 10.0 * (1.0 + self.grid.horizon() * self.r.norm_sq().sqrt());
        let mut rows = vec![
            self.bound("flow/constraint", n, worst(0), TOL_CONSTRAINT),
            self.bound("flow/picard", n, worst(1), defect),
            self.bound("flow/regularity", n, worst(2), speed_bound),
            self.bound("flow/group", n, worst(3), defect),
            self.bound("flow/roundtrip", n, worst(4), defect),
        ];
        if flat {
            rows.push(self.bound("flow/shift-exactness", n, worst(5), SHIFT_TOL));
            rows.push(self.bound("flow/h-equals-r", n, worst(6), H_EQUALS_R_TOL));
        }
        let rows = rows
            .into_iter()
            .map(|r| r.with_wall_time(elapsed))
            .collect();
        Ok(Outcome::all(rows))
    }

    fn ibp(&self) -> Result<Outcome, CliError> {
        let phi = self.phi()?;
        let repeats = self.cfg.ibp.repeats;
        let mut rows = Vec::new();
        let mut passes = 0;
        for k in 0..repeats {
            let seed = self.cfg.seed.wrapping_add(k as u64);
            let mut report = ibp_check(&self.geo, &self.r, &phi, self.cfg.samples, seed)?;
            rows.push(ResultRow::from_report("ibp", &self.name, seed, &report));
            let mut pass = report.pass;
            if let Some(a) = self.cfg.analytic {
                report = report.with_analytic(a);
                let row = ResultRow::analytic("ibp/analytic", &self.name, seed, &report)
                    .expect("analytic value set");
                pass &= row.pass;
                rows.push(row);
            }
            passes += usize::from(pass);
        }
        if repeats == 1 {
            return Ok(Outcome::all(rows));
        }
        let required = self.cfg.ibp.min_passes.unwrap_or(repeats);
        let summary = ResultRow::compare(
            "ibp/repeats",
            &self.name,
            self.cfg.samples,
            self.cfg.seed,
            passes as f64,
            required as f64,
            passes >= required,
        );
        let pass = summary.pass;
        rows.push(summary);
        Ok(Outcome { rows, pass })
    }

    fn qi(&self) -> Result<Outcome, CliError> {
        let phi = self.phi()?;
        let opts = self.qi_options()?;
        let seed = self.cfg.seed;
        let mut report = qi_check(&self.geo, &self.r, &phi, &opts, self.cfg.samples, seed)?;
        let mut rows = vec![ResultRow::from_report("qi", &self.name, seed, &report)];
        if report.bias.is_some() {
            rows.push(
                ResultRow::compare(
                    "qi/bias-allowance",
                    &self.name,
                    report.n_samples,
                    seed,
                    report.diff_mean.abs(),
                    report.threshold * report.diff_se + report.bias_allowance(),
                    report.pass,
                )
                .with_wall_time(report.wall_time),
            );
        }
        if let Some(a) = self.cfg.analytic {
            report = report.with_analytic(a);
            rows.extend(ResultRow::analytic(
                "qi/analytic",
                &self.name,
                seed,
                &report,
            ));
        }
        Ok(Outcome::all(rows))
    }

    fn convergence(&self) -> Result<Outcome, CliError> {
        let c = &self.cfg.convergence;
        let seed = self.cfg.seed;
        let horizon = self.grid.horizon();
        let mut rows = Vec::new();
        let at_least = |min: f64| move |order: f64| order >= min;

        let start = Instant::now();
        let report = diffusion_convergence(&self.geo, horizon, &c.levels, c.refine, c.paths, seed)?;
        rows.push(self.order_row(&report, c.paths, c.min_order, at_least(c.min_order), start));

        if c.h_system {
            let start = Instant::now();
            let rate = self.cfg.r.rate::<N>(horizon)?;
            let report = h_convergence(
                &self.geo, &*rate, horizon, &c.levels, c.refine, c.paths, seed,
            )?;
            rows.push(self.order_row(&report, c.paths, c.min_order, at_least(c.min_order), start));
        }

        if c.flow {
            for mode in [FlowMode::Euler, FlowMode::Heun] {
                let start = Instant::now();
                let report = flow_convergence(
                    &self.geo,
                    &self.r,
                    c.flow_s,
                    &c.flow_ds,
                    c.flow_reference,
                    mode,
                    c.flow_paths,
                    seed,
                )?;
                let row = match mode {
                    FlowMode::Euler => self.order_row(
                        &report,
                        c.flow_paths,
                        c.min_order,
                        at_least(c.min_order),
                        start,
                    ),
                    FlowMode::Heun => {
                        let tol = c.heun_tolerance;
                        self.order_row(
                            &report,
                            c.flow_paths,
                            2.0,
                            move |o| (o - 2.0).abs() <= tol,
                            start,
                        )
                    }
                };
                rows.push(row);
            }
        }
        Ok(Outcome::all(rows))
    }

    fn order_row(
        &self,
        report: &ConvergenceReport,
        paths: usize,
        target: f64,
        accept: impl Fn(f64) -> bool,
        start: Instant,
    ) -> ResultRow {
        let exact = report.errors.iter().all(|e| *e < EXACT_TOL);
        ResultRow::compare(
            &format!("convergence/{}", report.label),
            &self.name,
            paths,
            self.cfg.seed,
            report.order,
            target,
            exact || accept(report.order),
        )
        .with_wall_time(seconds(start))
    }
}
