//! Results tables: one CSV row per check.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use pathflow::mcverify::MCReport;

use crate::CliError;

pub const HEADER: [&str; 13] = [
    "command",
    "manifold",
    "n_samples",
    "seed",
    "lhs_mean",
    "lhs_se",
    "rhs_mean",
    "rhs_se",
    "diff_mean",
    "diff_se",
    "z",
    "pass",
    "wall_time_s",
];

/// One results row.
///
/// Monte Carlo rows carry the paired estimate. Deterministic checks put the
/// measured value in `lhs_mean`, the bound in `rhs_mean` and leave the
/// standard errors at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub command: String,
    pub manifold: String,
    pub n_samples: usize,
    pub seed: u64,
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    pub diff_mean: f64,
    pub diff_se: f64,
    pub z: f64,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn from_report(command: &str, manifold: &str, seed: u64, report: &MCReport) -> Self {
        Self {
            command: command.into(),
            manifold: manifold.into(),
            n_samples: report.n_samples,
            seed,
            lhs_mean: report.lhs_mean,
            lhs_se: report.lhs_se,
            rhs_mean: report.rhs_mean,
            rhs_se: report.rhs_se,
            diff_mean: report.diff_mean,
            diff_se: report.diff_se,
            z: report.z,
            pass: report.pass,
            wall_time_s: report.wall_time,
        }
    }

    /// Agreement of both marginal means with the exact value: `diff_mean`
    /// holds the exact value and `z` the larger of the two marginal z-scores.
    pub fn analytic(command: &str, manifold: &str, seed: u64, report: &MCReport) -> Option<Self> {
        let value = report.analytic?;
        let (lz, rz) = report.analytic_z()?;
        let worst = if lz.abs() >= rz.abs() { lz } else { rz };
        Some(Self {
            diff_mean: value,
            diff_se: 0.0,
            z: worst,
            pass: worst.abs() <= report.threshold,
            ..Self::from_report(command, manifold, seed, report)
        })
    }

    /// Deterministic check `value <= bound`.
    pub fn bound(
        command: &str,
        manifold: &str,
        n_samples: usize,
        seed: u64,
        value: f64,
        bound: f64,
    ) -> Self {
        Self::compare(
            command,
            manifold,
            n_samples,
            seed,
            value,
            bound,
            value <= bound,
        )
    }

    /// Deterministic comparison with an explicit verdict.
    pub fn compare(
        command: &str,
        manifold: &str,
        n_samples: usize,
        seed: u64,
        value: f64,
        reference: f64,
        pass: bool,
    ) -> Self {
        Self {
            command: command.into(),
            manifold: manifold.into(),
            n_samples,
            seed,
            lhs_mean: value,
            lhs_se: 0.0,
            rhs_mean: reference,
            rhs_se: 0.0,
            diff_mean: value - reference,
            diff_se: 0.0,
            z: 0.0,
            pass,
            wall_time_s: 0.0,
        }
    }

    pub fn with_wall_time(mut self, seconds: f64) -> Self {
        self.wall_time_s = seconds;
        self
    }

    fn fields(&self) -> [String; 13] {
        [
            self.command.clone(),
            self.manifold.clone(),
            self.n_samples.to_string(),
            self.seed.to_string(),
            number(self.lhs_mean),
            number(self.lhs_se),
            number(self.rhs_mean),
            number(self.rhs_se),
            number(self.diff_mean),
            number(self.diff_se),
            number(self.z),
            self.pass.to_string(),
            number(self.wall_time_s),
        ]
    }
}

/// 17 significant digits, which round-trips every `f64`.
fn number(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_number(field: &str) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Results(format!("not a number: {field:?}")))
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(HEADER)?;
    for row in rows {
        writer.write_record(row.fields())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| CliError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    write_results(rows, io::BufWriter::new(file))
}

pub fn parse_results<R: io::Read>(input: R) -> Result<Vec<ResultRow>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().ne(HEADER) {
        return Err(CliError::Results("unexpected header".into()));
    }
    reader
        .records()
        .map(|record| {
            let r = record?;
            let int = |i: usize| {
                r[i].parse::<u64>()
                    .map_err(|_| CliError::Results(format!("not an integer: {:?}", &r[i])))
            };
            Ok(ResultRow {
                command: r[0].to_string(),
                manifold: r[1].to_string(),
                n_samples: int(2)? as usize,
                seed: int(3)?,
                lhs_mean: parse_number(&r[4])?,
                lhs_se: parse_number(&r[5])?,
                rhs_mean: parse_number(&r[6])?,
                rhs_se: parse_number(&r[7])?,
                diff_mean: parse_number(&r[8])?,
                diff_se: parse_number(&r[9])?,
                z: parse_number(&r[10])?,
                pass: r[11]
                    .parse()
                    .map_err(|_| CliError::Results(format!("not a bool: {:?}", &r[11])))?,
                wall_time_s: parse_number(&r[12])?,
            })
        })
        .collect()
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    parse_results(File::open(path)?)
}
