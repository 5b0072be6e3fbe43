//! Parameter schedules: truncation order `N = ln(1/ε) / (10 r ln ln(1/ε))`
//! and time-partition count `κ = ln(1/ε)^{15 r}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative margin applied to strict log-space comparisons. `N ln κ` equals
/// `1.5 ln(1/ε)` identically, so the `κ^N > ε^{-3/2}` flag sits exactly on
/// the boundary and must not be decided by rounding noise.
pub const FLAG_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFlags {
    /// `ε^{-1/11} < N!`
    pub factorial_lower: bool,
    /// `N! < ε^{-1/10}`
    pub factorial_upper: bool,
    /// `κ^N > ε^{-3/2}`
    pub kappa_power: bool,
}

impl ScheduleFlags {
    pub fn all(&self) -> bool {
        self.factorial_lower && self.factorial_upper && self.kappa_power
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub epsilon: f64,
    pub r: u32,
    /// `ln(1/ε)`
    pub log_inv_eps: f64,
    pub n: f64,
    pub kappa: f64,
    /// `ln N! = lnΓ(N + 1)`
    pub ln_n_factorial: f64,
    /// `N ln κ`
    pub n_ln_kappa: f64,
    pub flags: ScheduleFlags,
    pub n_r: f64,
    pub kappa_r: f64,
    pub ln_n_r_factorial: f64,
    pub n_r_ln_kappa_r: f64,
    pub flags_r: ScheduleFlags,
}

fn strictly_less(a: f64, b: f64) -> bool {
    a < b - FLAG_MARGIN * a.abs().max(b.abs())
}

fn flags(lg: f64, ln_fact: f64, n_ln_kappa: f64) -> ScheduleFlags {
    ScheduleFlags {
        factorial_lower: strictly_less(lg / 11.0, ln_fact),
        factorial_upper: strictly_less(ln_fact, lg / 10.0),
        kappa_power: strictly_less(1.5 * lg, n_ln_kappa),
    }
}

pub fn schedule(epsilon: f64, r: u32) -> Result<ScheduleParams> {
    let bound = (-std::f64::consts::E).exp();
    if !(epsilon > 0.0 && epsilon < bound) {
        return Err(invalid(
            "epsilon",
            format!("must lie in (0, e^-e ≈ {bound:.6}), got {epsilon}"),
        ));
    }
    if r == 0 {
        return Err(invalid("r", "must be ≥ 1"));
    }
    let lg = -epsilon.ln();
    let lnlg = lg.ln();
    let n = lg / (10.0 * lnlg);
    let n_r = n / r as f64;
    let ln_kappa = 15.0 * lnlg;
    let ln_kappa_r = ln_kappa * r as f64;
    let ln_fact = libm::lgamma(n + 1.0);
    let ln_fact_r = libm::lgamma(n_r + 1.0);
    Ok(ScheduleParams {
        epsilon,
        r,
        log_inv_eps: lg,
        n,
        kappa: ln_kappa.exp(),
        ln_n_factorial: ln_fact,
        n_ln_kappa: n * ln_kappa,
        flags: flags(lg, ln_fact, n * ln_kappa),
        n_r,
        kappa_r: ln_kappa_r.exp(),
        ln_n_r_factorial: ln_fact_r,
        n_r_ln_kappa_r: n_r * ln_kappa_r,
        flags_r: flags(lg, ln_fact_r, n_r * ln_kappa_r),
    })
}
