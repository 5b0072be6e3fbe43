//! Monte Carlo check of the Wick expansion: the disorder average of
//! `⟨f_t^{(n)}, J g_t^{(ñ)}⟩` against the sum of pairing amplitudes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::amplitude::{pairing_sum, AmplitudeParams};
use crate::disorder::sample_disorder;
use crate::ensemble::{ordered_map_fold, EnsemblePlan};
use crate::error::{invalid, Result};
use crate::lattice::ComplexField;
use crate::micro::{Direction, EvolutionParams, Evolver, InitialProfile};
use crate::stats::ComplexAccumulator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WickReport {
    pub n: usize,
    pub n_tilde: usize,
    pub n_realizations: usize,
    pub mc_mean: Complex64,
    pub mc_stderr_re: f64,
    pub mc_stderr_im: f64,
    pub pairing_sum: Complex64,
    pub z_re: f64,
    pub z_im: f64,
}

impl WickReport {
    /// `max(|z_re|, |z_im|)`.
    pub fn z(&self) -> f64 {
        self.z_re.abs().max(self.z_im.abs())
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// `L^{-d} Σ_p J(p) conj(a(p)) b(p)` for momentum fields.
pub fn weighted_overlap(a: &ComplexField, j: &[f64], b: &ComplexField) -> Complex64 {
    let s: Complex64 = a
        .values()
        .iter()
        .zip(b.values())
        .zip(j)
        .map(|((x, y), w)| x.conj() * y * *w)
        .sum();
    s / a.spec().sites() as f64
}

/// Compares `E[⟨f_t^{(n)}, J g_t^{(ñ)}⟩]`, estimated from the split-step
/// Duhamel terms over the disorder ensemble, with the pairing sum at time
/// quadrature step `h`. `f` and `g` are momentum-space fields; the evolution
/// uses `params` (its time and coupling define `t` and `η`).
pub fn wick_oracle(
    n: usize,
    n_tilde: usize,
    f: &ComplexField,
    g: &ComplexField,
    j: &InitialProfile,
    params: &EvolutionParams,
    h: f64,
    plan: &EnsemblePlan,
) -> Result<WickReport> {
    plan.check()?;
    if n + n_tilde > super::amplitude::MAX_AMPLITUDE_VERTICES {
        return Err(crate::Error::SizeGuard(format!(
            "n + ñ = {}, at most {}",
            n + n_tilde,
            super::amplitude::MAX_AMPLITUDE_VERTICES
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("h", format!("must be finite and > 0, got {h}")));
    }
    let amp_params = AmplitudeParams {
        eta: params.eta(),
        t: params.t(),
        h,
    };
    let exact = pairing_sum(
        &[(n, n_tilde)],
        std::slice::from_ref(f),
        std::slice::from_ref(g),
        j,
        amp_params,
    )?;

    let evolver = Evolver::new(params, Direction::Forward);
    let sample = |i: usize| -> Result<Complex64> {
        let w = sample_disorder(params.spec(), plan.seed(i));
        let fn_ = evolver.duhamel_terms(f, &w, n)?.swap_remove(n);
        let gn = evolver.duhamel_terms(g, &w, n_tilde)?.swap_remove(n_tilde);
        Ok(weighted_overlap(&fn_, j.values(), &gn))
    };
    let acc = ordered_map_fold(
        plan.n_realizations,
        sample,
        Ok(ComplexAccumulator::default()),
        |acc: Result<ComplexAccumulator>, z| {
            let mut acc = acc?;
            acc.push(z?);
            Ok(acc)
        },
    )?;
    let mean = acc.mean();
    let (se_re, se_im) = (acc.re.stderr(), acc.im.stderr());
    Ok(WickReport {
        n,
        n_tilde,
        n_realizations: plan.n_realizations,
        mc_mean: mean,
        mc_stderr_re: se_re,
        mc_stderr_im: se_im,
        pairing_sum: exact,
        z_re: z_score(mean.re - exact.re, se_re),
        z_im: z_score(mean.im - exact.im, se_im),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeSpec, Representation};

    fn bump(spec: LatticeSpec, centre: f64) -> ComplexField {
        let values = (0..spec.sites())
            .map(|i| {
                let mut dp = spec.momentum(i)[0] - centre;
                dp -= dp.round();
                Complex64::new((-(dp * dp) / 0.05).exp(), 0.0)
            })
            .collect();
        ComplexField::from_values(spec, Representation::Momentum, values).unwrap()
    }

    #[test]
    fn odd_order_vanishes() {
        let spec = LatticeSpec::new(1, 8).unwrap();
        let j = InitialProfile::fermi_dirac(spec.dual_grid(), 2.0, 0.5).unwrap();
        let params = EvolutionParams::new(spec, 0.5, 1.0, 0.05).unwrap();
        let plan = EnsemblePlan::new(3, 400).unwrap();
        let r = wick_oracle(
            1,
            0,
            &bump(spec, 0.1),
            &bump(spec, -0.1),
            &j,
            &params,
            1e-2,
            &plan,
        )
        .unwrap();
        assert_eq!(r.pairing_sum, Complex64::new(0.0, 0.0));
        assert!(r.z() < 4.0, "{r:?}");
    }

    #[test]
    fn free_term_is_deterministic() {
        let spec = LatticeSpec::new(1, 8).unwrap();
        let j = InitialProfile::fermi_dirac(spec.dual_grid(), 2.0, 0.5).unwrap();
        let params = EvolutionParams::new(spec, 0.5, 1.0, 0.05).unwrap();
        let plan = EnsemblePlan::new(3, 5).unwrap();
        let r = wick_oracle(
            0,
            0,
            &bump(spec, 0.1),
            &bump(spec, -0.1),
            &j,
            &params,
            1e-2,
            &plan,
        )
        .unwrap();
        assert!((r.mc_mean - r.pairing_sum).norm() < 1e-13);
        assert!(r.mc_stderr_re < 1e-13);
    }
}
