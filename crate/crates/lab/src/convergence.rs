//! Distance between the empirical momentum density and the Boltzmann
//! prediction, debiased for Monte Carlo noise.
//!
//! With per-realisation differences `D_i = F_i − F_T` and the weighted inner
//! product `⟨a, b⟩ = L^{-d} Σ_p a(p) b(p)`,
//!
//! ```text
//! err² = (|Σ D_i|² − Σ |D_i|²) / (n (n − 1))
//! ```
//!
//! is an unbiased estimator of `|E F − F_T|²` (a U-statistic). Its standard
//! error comes from the leave-one-out jackknife.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub n: usize,
    /// Debiased squared distance; may be slightly negative when the true
    /// distance is below the noise.
    pub err_sq: f64,
    pub err_sq_stderr: f64,
    /// `|mean D|²`, biased upwards by the Monte Carlo variance.
    pub raw_sq: f64,
}

impl ErrorEstimate {
    pub fn err(&self) -> f64 {
        self.err_sq.max(0.0).sqrt()
    }

    /// Delta-method error of `err`, capped by `sqrt(err_sq_stderr)`, which is
    /// the right scale once `err` is within the noise.
    pub fn err_stderr(&self) -> f64 {
        let cap = self.err_sq_stderr.sqrt();
        let e = self.err();
        if e > 0.0 {
            (self.err_sq_stderr / (2.0 * e)).min(cap)
        } else {
            cap
        }
    }
}

fn dot(a: &[f64], b: &[f64], weight: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * weight
}

/// Needs at least three samples for the jackknife.
pub fn debiased_l2(samples: &[Vec<f64>], target: &[f64], weight: f64) -> ErrorEstimate {
    let n = samples.len();
    assert!(n >= 3, "need at least 3 samples, got {n}");
    let diffs: Vec<Vec<f64>> = samples
        .iter()
        .map(|f| {
            assert_eq!(f.len(), target.len(), "sample length");
            f.iter().zip(target).map(|(a, b)| a - b).collect()
        })
        .collect();
    let mut sum = vec![0.0; target.len()];
    for d in &diffs {
        for (s, x) in sum.iter_mut().zip(d) {
            *s += x;
        }
    }
    let s2 = dot(&sum, &sum, weight);
    let diag: Vec<f64> = diffs.iter().map(|d| dot(d, d, weight)).collect();
    let sd: f64 = diag.iter().sum();
    let nf = n as f64;
    let err_sq = (s2 - sd) / (nf * (nf - 1.0));

    let m = nf - 1.0;
    let jk: Vec<f64> = diffs
        .iter()
        .zip(&diag)
        .map(|(d, &dd)| {
            let s2_i = s2 - 2.0 * dot(d, &sum, weight) + dd;
            let sd_i = sd - dd;
            (s2_i - sd_i) / (m * (m - 1.0))
        })
        .collect();
    let jk_mean = jk.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * jk.iter().map(|x| (x - jk_mean).powi(2)).sum::<f64>();

    ErrorEstimate {
        n,
        err_sq,
        err_sq_stderr: var.sqrt(),
        raw_sq: s2 / (nf * nf),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    /// Every consecutive step decreases by more than the threshold.
    Decreasing,
    /// Some step increases by more than the threshold.
    NotDecreasing,
    Inconclusive,
}

/// Number of combined standard errors a step must exceed.
pub const TREND_SIGMAS: f64 = 2.0;

/// Verdict on `(value, stderr)` pairs listed in the order of decreasing η.
pub fn trend(values: &[(f64, f64)], sigmas: f64) -> Trend {
    let mut all_down = true;
    for w in values.windows(2) {
        let (a, sa) = w[0];
        let (b, sb) = w[1];
        let combined = sigmas * (sa * sa + sb * sb).sqrt();
        if b - a > combined {
            return Trend::NotDecreasing;
        }
        if a - b <= combined {
            all_down = false;
        }
    }
    if all_down {
        Trend::Decreasing
    } else {
        Trend::Inconclusive
    }
}
