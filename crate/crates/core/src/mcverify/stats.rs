use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 3.0;

const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the result is independent of how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

/// Sample mean and standard error of the mean (`n - 1` denominator).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&squares) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Diff mean of the run at half the flow step and the bias allowance derived
/// from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    pub ds: f64,
    pub diff_mean_half: f64,
    pub diff_se_half: f64,
    /// `C = 2 |d(ds) - d(ds/2)| / ds` for a first-order bias `d = C ds`.
    pub constant: f64,
}

impl BiasEstimate {
    pub fn new(ds: f64, diff_mean: f64, diff_mean_half: f64, diff_se_half: f64) -> Self {
        Self {
            ds,
            diff_mean_half,
            diff_se_half,
            constant: 2.0 * (diff_mean - diff_mean_half).abs() / ds,
        }
    }

    pub fn allowance(&self) -> f64 {
        self.constant * self.ds
    }
}

/// Paired Monte Carlo estimate of `E[lhs] = E[rhs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MCReport {
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    pub diff_mean: f64,
    pub diff_se: f64,
    pub n_samples: usize,
    pub z: f64,
    pub threshold: f64,
    pub bias: Option<BiasEstimate>,
    pub pass: bool,
    /// Seconds spent producing the samples.
    pub wall_time: f64,
    /// Exact common expectation of both sides, when known.
    pub analytic: Option<f64>,
}

/// `num / se`, with `0 / 0 = 0` and `x / 0 = +-inf`.
fn ratio_or_zero(num: f64, se: f64) -> f64 {
    if se > 0.0 {
        num / se
    } else if num == 0.0 {
        0.0
    } else {
        num.signum() * f64::INFINITY
    }
}

/// Statistics of `(lhs, rhs)` pairs; the difference SE comes from the
/// per-sample differences.
pub fn mc_stats(pairs: &[(f64, f64)]) -> Result<MCReport> {
    if pairs.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: pairs.len(),
        });
    }
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (lhs_mean, lhs_se) = mean_and_se(&lhs);
    let (rhs_mean, rhs_se) = mean_and_se(&rhs);
    let (diff_mean, diff_se) = mean_and_se(&diff);
    let z = ratio_or_zero(diff_mean, diff_se);
    let mut report = MCReport {
        lhs_mean,
        lhs_se,
        rhs_mean,
        rhs_se,
        diff_mean,
        diff_se,
        n_samples: pairs.len(),
        z,
        threshold: DEFAULT_THRESHOLD,
        bias: None,
        pass: false,
        wall_time: 0.0,
        analytic: None,
    };
    report.update_pass();
    Ok(report)
}

impl MCReport {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.update_pass();
        self
    }

    pub fn with_bias(mut self, bias: BiasEstimate) -> Self {
        self.bias = Some(bias);
        self.update_pass();
        self
    }

    pub fn with_analytic(mut self, value: f64) -> Self {
        self.analytic = Some(value);
        self
    }

    pub fn bias_allowance(&self) -> f64 {
        self.bias.map_or(0.0, |b| b.allowance())
    }

    /// `|diff_mean| <= threshold * diff_se + bias allowance`.
    fn update_pass(&mut self) {
        self.pass = self.diff_mean.abs() <= self.threshold * self.diff_se + self.bias_allowance();
    }

    /// Distances of both marginal means from the analytic value, in units of
    /// their standard errors.
    pub fn analytic_z(&self) -> Option<(f64, f64)> {
        self.analytic.map(|a| {
            (
                ratio_or_zero(self.lhs_mean - a, self.lhs_se),
                ratio_or_zero(self.rhs_mean - a, self.rhs_se),
            )
        })
    }
}
