//! One-particle dynamics `i ∂_t f = E(p) f + η ω f` on the lattice.
//!
//! The propagator `e^{-itH}` is approximated by Strang splitting: half a
//! kinetic phase in momentum space, a full potential phase in position space,
//! another half kinetic phase. Consecutive kinetic half steps are merged, so
//! each step costs one forward and one inverse FFT.
//!
//! The adjoint `e^{+itH}` is the same scheme with a negated step; `H` is real
//! symmetric in position space, so this is exact at the level of the scheme.
//!
//! Time direction: the many-body state `ρ_t(a^+(f) a(g)) = ⟨f_t, J g_t⟩` uses
//! `f_t = e^{-itH} f`. The averaged momentum density is
//! `F_t(p) = E[(U_t^† J U_t)(p, p)]` with `U_t = e^{-itH}`; the opposite
//! convention would only exchange `U_t` and `U_t^†`, which have the same
//! distribution over the disorder ensemble.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::boltzmann::MomentumDistribution;
use crate::disorder::{open_uniform, sample_disorder, stream_rng, DisorderField};
use crate::ensemble::{ordered_map_fold, EnsemblePlan};
use crate::error::{invalid, Error, Result};
use crate::lattice::{
    ComplexField, DispersionTable, FftWorkspace, FourierPlan, LatticeSpec, MomentumGrid,
    Representation,
};
use crate::stats::{ComplexAccumulator, VecAccumulator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coupling, step size and number of steps on a given lattice. The stored
/// time is always `steps · dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    spec: LatticeSpec,
    eta: f64,
    dt: f64,
    steps: usize,
}

impl EvolutionParams {
    /// `steps = round(t / dt)`.
    pub fn new(spec: LatticeSpec, eta: f64, t: f64, dt: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(invalid(
                "eta",
                format!("must be finite and >= 0, got {eta}"),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        let steps = (t / dt).round();
        if steps > 1e9 {
            return Err(invalid("t", format!("{steps} steps is too many")));
        }
        Ok(Self {
            spec,
            eta,
            dt,
            steps: steps as usize,
        })
    }

    /// Microscopic time `t = T/η²` of a kinetic schedule.
    pub fn from_schedule(spec: LatticeSpec, sched: &KineticSchedule, dt: f64) -> Result<Self> {
        Self::new(spec, sched.eta(), sched.t(), dt)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(invalid(
                "eta",
                format!("must be finite and >= 0, got {eta}"),
            ));
        }
        self.eta = eta;
        Ok(self)
    }
}

/// Kinetic scaling `t = T/η²`, `ε = 1/t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticSchedule {
    macro_time: f64,
    eta: f64,
    t: f64,
    epsilon: f64,
}

impl KineticSchedule {
    pub fn new(macro_time: f64, eta: f64) -> Result<Self> {
        if !(macro_time.is_finite() && macro_time > 0.0) {
            return Err(invalid(
                "T",
                format!("must be finite and > 0, got {macro_time}"),
            ));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid("eta", format!("must be finite and > 0, got {eta}")));
        }
        let t = macro_time / (eta * eta);
        Ok(Self {
            macro_time,
            eta,
            t,
            epsilon: 1.0 / t,
        })
    }

    pub fn macro_time(&self) -> f64 {
        self.macro_time
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `1/(1 + e^{β(E-μ)})`; `β = ∞` gives the indicator `χ[E < μ]`.
pub fn fermi_dirac(energy: f64, beta: f64, mu: f64) -> f64 {
    if beta == f64::INFINITY {
        return if energy < mu { 1.0 } else { 0.0 };
    }
    let x = beta * (energy - mu);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProfileKind {
    FermiDirac { beta: f64, mu: f64 },
    Constant { c: f64 },
    Custom,
}

/// The initial two-point function `J(p)` on a momentum grid, `0 ≤ J ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile {
    grid: MomentumGrid,
    kind: ProfileKind,
    values: Vec<f64>,
}

impl InitialProfile {
    pub fn fermi_dirac(grid: MomentumGrid, beta: f64, mu: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(invalid(
                "beta",
                format!("must be >= 0 (or +inf), got {beta}"),
            ));
        }
        if !mu.is_finite() {
            return Err(invalid("mu", format!("must be finite, got {mu}")));
        }
        let table = DispersionTable::new(grid);
        let values = table
            .energies()
            .iter()
            .map(|&e| fermi_dirac(e, beta, mu))
            .collect();
        Ok(Self {
            grid,
            kind: ProfileKind::FermiDirac { beta, mu },
            values,
        })
    }

    pub fn constant(grid: MomentumGrid, c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(invalid("c", format!("must lie in [0, 1], got {c}")));
        }
        Ok(Self {
            grid,
            kind: ProfileKind::Constant { c },
            values: vec![c; grid.len()],
        })
    }

    pub fn from_values(grid: MomentumGrid, values: Vec<f64>) -> Result<Self> {
        crate::lattice::check_len("J", values.len(), &grid)?;
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid("J", format!("value {v} outside [0, 1]")));
        }
        Ok(Self {
            grid,
            kind: ProfileKind::Custom,
            values,
        })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_distribution(&self) -> MomentumDistribution {
        MomentumDistribution::from_parts(self.grid, self.values.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `e^{-itH}`
    Forward,
    /// `e^{+itH}`
    Backward,
}

/// Precomputed split-step propagator for one lattice and time step.
#[derive(Debug)]
pub struct Evolver {
    plan: FourierPlan,
    params: EvolutionParams,
    signed_dt: f64,
    kin_half: Vec<Complex64>,
    kin_full: Vec<Complex64>,
}

impl Evolver {
    pub fn new(params: &EvolutionParams, direction: Direction) -> Self {
        let spec = params.spec;
        let signed_dt = match direction {
            Direction::Forward => params.dt,
            Direction::Backward => -params.dt,
        };
        let table = DispersionTable::new(spec.dual_grid());
        let phase = |tau: f64| -> Vec<Complex64> {
            table
                .energies()
                .iter()
                .map(|&e| Complex64::from_polar(1.0, -tau * e))
                .collect()
        };
        Self {
            plan: FourierPlan::new(spec),
            params: *params,
            signed_dt,
            kin_half: phase(0.5 * signed_dt),
            kin_full: phase(signed_dt),
        }
    }

    pub fn params(&self) -> &EvolutionParams {
        &self.params
    }

    pub fn plan(&self) -> &FourierPlan {
        &self.plan
    }

    /// `e^{-i dt η ω_x}` with the inverse-FFT normalisation folded in.
    pub fn potential_phases(&self, w: &DisorderField) -> Vec<Complex64> {
        let norm = 1.0 / self.params.spec.sites() as f64;
        let a = self.signed_dt * self.params.eta;
        w.values()
            .iter()
            .map(|&om| Complex64::from_polar(norm, -a * om))
            .collect()
    }

    /// Propagates raw momentum values in place.
    pub(crate) fn run_raw(&self, z: &mut [Complex64], pot: &[Complex64], ws: &mut FftWorkspace) {
        let steps = self.params.steps;
        if steps == 0 {
            return;
        }
        mul_assign(z, &self.kin_half);
        for s in 0..steps {
            self.plan.raw_inverse_unscaled(z, ws);
            mul_assign(z, pot);
            self.plan.raw_forward(z, ws);
            mul_assign(
                z,
                if s + 1 == steps {
                    &self.kin_half
                } else {
                    &self.kin_full
                },
            );
        }
    }

    /// Propagates centred momentum values in place.
    pub fn run_momentum(&self, values: &mut [Complex64], pot: &[Complex64], ws: &mut FftWorkspace) {
        self.plan.to_raw_momentum(values);
        self.run_raw(values, pot, ws);
        self.plan.from_raw_momentum(values);
    }

    pub fn evolve(&self, f0: &ComplexField, w: &DisorderField) -> Result<ComplexField> {
        self.check(f0, w)?;
        let pot = self.potential_phases(w);
        let mut ws = self.plan.workspace();
        let mut z = f0.values().to_vec();
        self.enter(&mut z, f0.representation(), &mut ws);
        self.run_raw(&mut z, &pot, &mut ws);
        self.leave(&mut z, f0.representation(), &mut ws);
        ComplexField::from_values(*f0.spec(), f0.representation(), z)
    }

    /// Truncated Duhamel hierarchy of the split-step scheme, see
    /// [`duhamel_terms`].
    pub fn duhamel_terms(
        &self,
        f0: &ComplexField,
        w: &DisorderField,
        order: usize,
    ) -> Result<Vec<ComplexField>> {
        self.check(f0, w)?;
        let n_sites = self.params.spec.sites();
        let norm = 1.0 / n_sites as f64;
        let mut ws = self.plan.workspace();
        let mut terms = vec![vec![ZERO; n_sites]; order + 1];
        terms[0].copy_from_slice(f0.values());
        self.enter(&mut terms[0], f0.representation(), &mut ws);

        // per-site Taylor coefficients (-i dt η ω)^m / m!
        let a = -self.signed_dt * self.params.eta;
        let coeffs: Vec<Vec<Complex64>> = w
            .values()
            .iter()
            .map(|&om| {
                let x = Complex64::new(0.0, a * om);
                let mut c = Vec::with_capacity(order + 1);
                let mut pw = Complex64::new(norm, 0.0);
                for m in 0..=order {
                    c.push(pw);
                    pw = pw * x / (m + 1) as f64;
                }
                c
            })
            .collect();

        let steps = self.params.steps;
        if steps > 0 {
            for z in terms.iter_mut() {
                mul_assign(z, &self.kin_half);
            }
            let mut mixed = vec![ZERO; order + 1];
            for s in 0..steps {
                for z in terms.iter_mut() {
                    self.plan.raw_inverse_unscaled(z, &mut ws);
                }
                for (x, c) in coeffs.iter().enumerate() {
                    for (n, slot) in mixed.iter_mut().enumerate() {
                        *slot = (0..=n).map(|m| c[m] * terms[n - m][x]).sum();
                    }
                    for (n, v) in mixed.iter().enumerate() {
                        terms[n][x] = *v;
                    }
                }
                let kin = if s + 1 == steps {
                    &self.kin_half
                } else {
                    &self.kin_full
                };
                for z in terms.iter_mut() {
                    self.plan.raw_forward(z, &mut ws);
                    mul_assign(z, kin);
                }
            }
        }
        terms
            .into_iter()
            .map(|mut z| {
                self.leave(&mut z, f0.representation(), &mut ws);
                ComplexField::from_values(*f0.spec(), f0.representation(), z)
            })
            .collect()
    }

    fn check(&self, f0: &ComplexField, w: &DisorderField) -> Result<()> {
        let spec = &self.params.spec;
        if f0.spec() != spec || w.spec() != spec {
            return Err(Error::SpecMismatch(format!(
                "field {} / disorder {} / evolution {}",
                f0.spec(),
                w.spec(),
                spec
            )));
        }
        Ok(())
    }

    fn enter(&self, z: &mut [Complex64], repr: Representation, ws: &mut FftWorkspace) {
        match repr {
            Representation::Momentum => self.plan.to_raw_momentum(z),
            Representation::Position => {
                self.plan.to_raw_position(z);
                self.plan.raw_forward(z, ws);
            }
        }
    }

    fn leave(&self, z: &mut [Complex64], repr: Representation, ws: &mut FftWorkspace) {
        match repr {
            Representation::Momentum => self.plan.from_raw_momentum(z),
            Representation::Position => {
                self.plan.raw_inverse(z, ws);
                self.plan.from_raw_position(z);
            }
        }
    }
}

fn mul_assign(z: &mut [Complex64], phase: &[Complex64]) {
    z.iter_mut().zip(phase).for_each(|(a, b)| *a *= b);
}

/// `f_t = e^{-itH} f0` by split-step integration. The result is in the same
/// representation as `f0`.
pub fn evolve(
    f0: &ComplexField,
    w: &DisorderField,
    params: &EvolutionParams,
) -> Result<ComplexField> {
    Evolver::new(params, Direction::Forward).evolve(f0, w)
}

/// `e^{+itH} f0`.
pub fn evolve_adjoint(
    f0: &ComplexField,
    w: &DisorderField,
    params: &EvolutionParams,
) -> Result<ComplexField> {
    Evolver::new(params, Direction::Backward).evolve(f0, w)
}

/// `f^{(0)}_t, …, f^{(N)}_t`: the exact expansion of the split-step
/// propagator in powers of `η`, truncated after order `N`. Term `n` carries
/// `η^n`; the sum over all orders reproduces [`evolve`], and each term agrees
/// with the continuous-time Duhamel term up to `O(dt²)`.
pub fn duhamel_terms(
    f0: &ComplexField,
    w: &DisorderField,
    params: &EvolutionParams,
    order: usize,
) -> Result<Vec<ComplexField>> {
    Evolver::new(params, Direction::Forward).duhamel_terms(f0, w, order)
}

/// Disorder-averaged momentum density with per-point standard errors.
///
/// `stderr` is computed across disorder realisations (the phase draws of one
/// realisation are averaged first).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: MomentumGrid,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_realizations: usize,
    pub phases_per_realization: usize,
}

impl DensityEstimate {
    pub fn n_samples(&self) -> usize {
        self.n_realizations * self.phases_per_realization
    }

    pub fn distribution(&self) -> MomentumDistribution {
        MomentumDistribution::from_parts(self.grid, self.mean.clone())
    }

    /// `∫ F dp` with its standard error is not available from per-point
    /// errors alone; this is the plain quadrature of the mean.
    pub fn mass(&self) -> f64 {
        self.mean.iter().sum::<f64>() * self.grid.weight()
    }

    /// Columns: integer index components, momentum components, `E`,
    /// `F_estimate`, `std_error`, `n_samples`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.grid.dim();
        let mut header: Vec<String> = (1..=d).map(|a| format!("k{a}")).collect();
        header.extend((1..=d).map(|a| format!("p{a}")));
        header.extend(["E", "F_estimate", "std_error", "n_samples"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        let table = DispersionTable::new(self.grid);
        for i in 0..self.grid.len() {
            let mut row: Vec<String> = self
                .grid
                .integer_coords(i)
                .iter()
                .map(|k| k.to_string())
                .collect();
            row.extend(self.grid.point(i).iter().map(|p| p.to_string()));
            row.push(table.energy(i).to_string());
            row.push(self.mean[i].to_string());
            row.push(self.stderr[i].to_string());
            row.push(self.n_samples().to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Random-phase vector `√J(k) e^{iθ_k}` of realisation `seed`, draw `phase`.
fn random_phase_vector(sqrt_j: &[f64], seed: u64, phase: usize) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, 1 + phase as u64);
    sqrt_j
        .iter()
        .map(|&a| Complex64::from_polar(a, 2.0 * PI * open_uniform(rng.next_u64())))
        .collect()
}

fn check_density_inputs(
    j: &InitialProfile,
    plan: &EnsemblePlan,
    params: &EvolutionParams,
    phases: usize,
) -> Result<()> {
    plan.check()?;
    if phases == 0 {
        return Err(invalid("phases_per_realization", "must be at least 1"));
    }
    if *j.grid() != params.spec.dual_grid() {
        return Err(Error::GridMismatch(format!(
            "profile on {}^{} grid, lattice {}",
            j.grid().side(),
            j.grid().dim(),
            params.spec
        )));
    }
    Ok(())
}

/// Per-realisation hook: evolves the random-phase vectors of one disorder
/// sample backwards and hands each final momentum vector to `observe`.
fn for_each_final_vector(
    evolver: &Evolver,
    sqrt_j: &[f64],
    seed: u64,
    phases: usize,
    mut observe: impl FnMut(&[Complex64]),
) {
    let spec = evolver.params.spec;
    let w = sample_disorder(&spec, seed);
    let pot = evolver.potential_phases(&w);
    let mut ws = evolver.plan.workspace();
    for ph in 0..phases {
        let mut psi = random_phase_vector(sqrt_j, seed, ph);
        evolver.run_momentum(&mut psi, &pot, &mut ws);
        observe(&psi);
    }
}

/// `|ψ|²` averaged over the phase draws of one realisation.
fn realization_density(evolver: &Evolver, sqrt_j: &[f64], seed: u64, phases: usize) -> Vec<f64> {
    let mut f = vec![0.0; sqrt_j.len()];
    for_each_final_vector(evolver, sqrt_j, seed, phases, |psi| {
        for (acc, z) in f.iter_mut().zip(psi) {
            *acc += z.norm_sqr();
        }
    });
    let inv = 1.0 / phases as f64;
    f.iter_mut().for_each(|v| *v *= inv);
    f
}

/// The per-realisation densities themselves, in realisation order, together
/// with the estimate they define. Memory grows as realisations × sites.
pub fn momentum_density_samples(
    j: &InitialProfile,
    plan: &EnsemblePlan,
    params: &EvolutionParams,
    phases: usize,
) -> Result<(DensityEstimate, Vec<Vec<f64>>)> {
    check_density_inputs(j, plan, params, phases)?;
    let evolver = Evolver::new(params, Direction::Backward);
    let sqrt_j: Vec<f64> = j.values().iter().map(|v| v.sqrt()).collect();
    let n = params.spec.sites();
    let (acc, samples) = ordered_map_fold(
        plan.n_realizations,
        |i| realization_density(&evolver, &sqrt_j, plan.seed(i), phases),
        (
            VecAccumulator::new(n),
            Vec::with_capacity(plan.n_realizations),
        ),
        |(mut acc, mut all), f| {
            acc.push(&f);
            all.push(f);
            (acc, all)
        },
    );
    let estimate = DensityEstimate {
        grid: params.spec.dual_grid(),
        mean: acc.mean(),
        stderr: acc.stderr(),
        n_realizations: plan.n_realizations,
        phases_per_realization: phases,
    };
    Ok((estimate, samples))
}

/// Estimates `F_t(p) = E_ω[(U_t^† J U_t)(p, p)]` and additionally accumulates
/// `project(F_sample)` for every realisation (e.g. shell averages), so that
/// derived quantities get correct standard errors.
pub fn momentum_density_projected<P>(
    j: &InitialProfile,
    plan: &EnsemblePlan,
    params: &EvolutionParams,
    phases: usize,
    project: P,
) -> Result<(DensityEstimate, VecAccumulator)>
where
    P: Fn(&[f64]) -> Vec<f64> + Sync,
{
    check_density_inputs(j, plan, params, phases)?;
    let evolver = Evolver::new(params, Direction::Backward);
    let sqrt_j: Vec<f64> = j.values().iter().map(|v| v.sqrt()).collect();
    let n = params.spec.sites();
    let per_realization = |i: usize| {
        let f = realization_density(&evolver, &sqrt_j, plan.seed(i), phases);
        let projected = project(&f);
        (f, projected)
    };
    let (acc, proj) = ordered_map_fold(
        plan.n_realizations,
        per_realization,
        (VecAccumulator::new(n), None::<VecAccumulator>),
        |(mut acc, mut proj), (f, p)| {
            acc.push(&f);
            proj.get_or_insert_with(|| VecAccumulator::new(p.len()))
                .push(&p);
            (acc, proj)
        },
    );
    let estimate = DensityEstimate {
        grid: params.spec.dual_grid(),
        mean: acc.mean(),
        stderr: acc.stderr(),
        n_realizations: plan.n_realizations,
        phases_per_realization: phases,
    };
    Ok((estimate, proj.unwrap_or_else(|| VecAccumulator::new(0))))
}

/// Unbiased random-phase estimate of the disorder-averaged momentum density.
pub fn momentum_density(
    j: &InitialProfile,
    plan: &EnsemblePlan,
    params: &EvolutionParams,
    phases: usize,
) -> Result<DensityEstimate> {
    momentum_density_projected(j, plan, params, phases, |_| Vec::new()).map(|r| r.0)
}

/// Off-diagonal entries `E_ω[(U_t^† J U_t)(p, q)]` for the given index pairs,
/// as `(mean, stderr)`.
pub fn momentum_covariance(
    j: &InitialProfile,
    plan: &EnsemblePlan,
    params: &EvolutionParams,
    phases: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<(Complex64, f64)>> {
    check_density_inputs(j, plan, params, phases)?;
    let n = params.spec.sites();
    if let Some(&(p, q)) = pairs.iter().find(|(p, q)| *p >= n || *q >= n) {
        return Err(invalid(
            "pairs",
            format!("index pair ({p}, {q}) out of range"),
        ));
    }
    let evolver = Evolver::new(params, Direction::Backward);
    let sqrt_j: Vec<f64> = j.values().iter().map(|v| v.sqrt()).collect();
    let per_realization = |i: usize| {
        let mut out = vec![ZERO; pairs.len()];
        for_each_final_vector(&evolver, &sqrt_j, plan.seed(i), phases, |psi| {
            for (slot, &(p, q)) in out.iter_mut().zip(pairs) {
                *slot += psi[p].conj() * psi[q];
            }
        });
        out.iter_mut().for_each(|z| *z /= phases as f64);
        out
    };
    let accs = ordered_map_fold(
        plan.n_realizations,
        per_realization,
        vec![ComplexAccumulator::default(); pairs.len()],
        |mut accs, sample| {
            for (a, z) in accs.iter_mut().zip(sample) {
                a.push(z);
            }
            accs
        },
    );
    Ok(accs.iter().map(|a| (a.mean(), a.stderr())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::forward_transform;
    use proptest::prelude::*;

    fn spec(d: usize, l: usize) -> LatticeSpec {
        LatticeSpec::new(d, l).unwrap()
    }

    fn smooth_field(spec: LatticeSpec) -> ComplexField {
        let values = (0..spec.sites())
            .map(|i| {
                let x = spec.coords(i);
                let r2: f64 = x.iter().map(|&k| (k * k) as f64).sum();
                Complex64::from_polar((-r2 / 6.0).exp(), 0.3 * x[0] as f64)
            })
            .collect();
        ComplexField::from_values(spec, Representation::Position, values).unwrap()
    }

    #[test]
    fn params_round_time_to_steps() {
        let p = EvolutionParams::new(spec(1, 4), 0.5, 1.04, 0.1).unwrap();
        assert_eq!(p.steps(), 10);
        assert!((p.t() - 1.0).abs() < 1e-15);
        assert!(EvolutionParams::new(spec(1, 4), 0.5, 1.0, 0.0).is_err());
        assert!(EvolutionParams::new(spec(1, 4), 0.5, 1.0, -0.1).is_err());
        assert!(EvolutionParams::new(spec(1, 4), -0.5, 1.0, 0.1).is_err());
    }

    #[test]
    fn schedule_epsilon_times_t_is_one() {
        for (tt, eta) in [(1.0, 0.8), (1.0, 0.2), (0.5, 0.125), (3.7, 0.31)] {
            let s = KineticSchedule::new(tt, eta).unwrap();
            assert!((s.epsilon() * s.t() - 1.0).abs() <= f64::EPSILON);
        }
        assert!(KineticSchedule::new(1.0, 0.0).is_err());
    }

    #[test]
    fn fermi_dirac_limits() {
        assert_eq!(fermi_dirac(0.2, f64::INFINITY, 0.3), 1.0);
        assert_eq!(fermi_dirac(0.3, f64::INFINITY, 0.3), 0.0);
        assert_eq!(fermi_dirac(0.0, 0.0, 1.0), 0.5);
        assert_eq!(fermi_dirac(1e6, 2.0, 0.0), 0.0);
        assert_eq!(fermi_dirac(-1e6, 2.0, 0.0), 1.0);
        let v = fermi_dirac(0.7, 2.0, 0.5);
        assert!((v - 1.0 / (1.0 + (0.4f64).exp())).abs() < 1e-16);
    }

    #[test]
    fn profile_bounds_validated() {
        let g = spec(1, 8).dual_grid();
        assert!(InitialProfile::from_values(g, vec![0.5; 8]).is_ok());
        assert!(InitialProfile::from_values(g, vec![1.5; 8]).is_err());
        assert!(InitialProfile::from_values(g, vec![0.5; 7]).is_err());
        assert!(InitialProfile::constant(g, -0.1).is_err());
        assert!(InitialProfile::fermi_dirac(g, -1.0, 0.0).is_err());
        let zt = InitialProfile::fermi_dirac(g, f64::INFINITY, 0.3).unwrap();
        assert!(zt.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn free_evolution_is_a_phase() {
        let s = spec(2, 8);
        let params = EvolutionParams::new(s, 0.0, 3.7, 0.05).unwrap();
        let w = sample_disorder(&s, 5);
        for k in [[0i64, 0], [1, -3], [-4, 2]] {
            let mut f = ComplexField::zeros(s, Representation::Momentum);
            let idx = s.index(&k);
            f.values_mut()[idx] = Complex64::new(1.0, 0.0);
            let out = evolve(&f, &w, &params).unwrap();
            let e = crate::lattice::dispersion(&s.momentum(idx));
            let expect = Complex64::from_polar(1.0, -params.t() * e);
            for (i, z) in out.values().iter().enumerate() {
                let target = if i == idx { expect } else { ZERO };
                assert!((z - target).norm() < 1e-12, "{k:?} slot {i}: {z}");
            }
        }
    }

    #[test]
    fn representation_is_preserved() {
        let s = spec(1, 8);
        let params = EvolutionParams::new(s, 0.7, 1.0, 0.1).unwrap();
        let w = sample_disorder(&s, 2);
        let f = smooth_field(s);
        let a = evolve(&f, &w, &params).unwrap();
        assert_eq!(a.representation(), Representation::Position);
        let b = evolve(&forward_transform(&f).unwrap(), &w, &params).unwrap();
        let a_hat = forward_transform(&a).unwrap();
        for (x, y) in a_hat.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_inverts_evolution() {
        let s = spec(2, 6);
        let params = EvolutionParams::new(s, 0.9, 2.0, 0.1).unwrap();
        let w = sample_disorder(&s, 11);
        let f = smooth_field(s);
        let back = evolve_adjoint(&evolve(&f, &w, &params).unwrap(), &w, &params).unwrap();
        // Strang splitting is symmetric, so the reversed scheme is its exact inverse
        for (x, y) in back.values().iter().zip(f.values()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let s = spec(1, 8);
        let params = EvolutionParams::new(s, 0.6, 1.5, 0.1).unwrap();
        let w = sample_disorder(&s, 3);
        let f = smooth_field(s);
        let mut g = smooth_field(s);
        g.values_mut().reverse();
        let lhs = evolve(&f, &w, &params).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&evolve_adjoint(&g, &w, &params).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn mismatched_specs_rejected() {
        let params = EvolutionParams::new(spec(1, 8), 0.6, 1.0, 0.1).unwrap();
        let w = sample_disorder(&spec(1, 4), 3);
        let f = ComplexField::zeros(spec(1, 8), Representation::Position);
        assert!(matches!(
            evolve(&f, &w, &params),
            Err(Error::SpecMismatch(_))
        ));
    }

    #[test]
    fn duhamel_eta_zero_has_no_higher_terms() {
        let s = spec(1, 8);
        let params = EvolutionParams::new(s, 0.0, 1.0, 0.1).unwrap();
        let w = sample_disorder(&s, 4);
        let terms = duhamel_terms(&smooth_field(s), &w, &params, 3).unwrap();
        assert_eq!(terms.len(), 4);
        for t in &terms[1..] {
            assert!(t.values().iter().all(|z| *z == ZERO));
        }
        let free = evolve(&smooth_field(s), &w, &params).unwrap();
        for (a, b) in terms[0].values().iter().zip(free.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn duhamel_sum_converges_to_evolution() {
        let s = spec(1, 8);
        let params = EvolutionParams::new(s, 0.5, 1.0, 0.05).unwrap();
        let w = sample_disorder(&s, 8);
        let f = smooth_field(s);
        let exact = evolve(&f, &w, &params).unwrap();
        let terms = duhamel_terms(&f, &w, &params, 10).unwrap();
        let mut partial = vec![ZERO; s.sites()];
        let mut last = f64::INFINITY;
        for t in &terms {
            for (p, v) in partial.iter_mut().zip(t.values()) {
                *p += v;
            }
            let err: f64 = partial
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-9);
    }

    #[test]
    fn density_of_constant_profile_is_constant() {
        let s = spec(1, 8);
        let j = InitialProfile::constant(s.dual_grid(), 0.4).unwrap();
        let plan = EnsemblePlan::new(1, 5).unwrap();
        let params = EvolutionParams::new(s, 0.7, 2.0, 0.1).unwrap();
        let est = momentum_density(&j, &plan, &params, 2).unwrap();
        // single samples fluctuate pointwise, their mass does not
        assert!((est.mass() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn free_density_reproduces_profile() {
        let s = spec(1, 8);
        let j = InitialProfile::fermi_dirac(s.dual_grid(), 2.0, 0.5).unwrap();
        let plan = EnsemblePlan::new(1, 3).unwrap();
        let params = EvolutionParams::new(s, 0.0, 2.0, 0.1).unwrap();
        let est = momentum_density(&j, &plan, &params, 1).unwrap();
        // with η = 0 the momentum modes decouple and the phases drop out
        for (a, b) in est.mean.iter().zip(j.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(est.stderr.iter().all(|&e| e < 1e-13));
    }

    #[test]
    fn density_rejects_bad_inputs() {
        let s = spec(1, 8);
        let j = InitialProfile::constant(s.dual_grid(), 0.4).unwrap();
        let params = EvolutionParams::new(s, 0.7, 2.0, 0.1).unwrap();
        let plan = EnsemblePlan {
            base_seed: 0,
            n_realizations: 0,
        };
        assert_eq!(
            momentum_density(&j, &plan, &params, 1),
            Err(Error::EmptyEnsemble)
        );
        let plan = EnsemblePlan::new(0, 1).unwrap();
        assert!(momentum_density(&j, &plan, &params, 0).is_err());
        let j16 = InitialProfile::constant(spec(1, 16).dual_grid(), 0.4).unwrap();
        assert!(matches!(
            momentum_density(&j16, &plan, &params, 1),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn density_csv_layout() {
        let s = spec(2, 4);
        let j = InitialProfile::constant(s.dual_grid(), 0.5).unwrap();
        let plan = EnsemblePlan::new(1, 2).unwrap();
        let params = EvolutionParams::new(s, 0.3, 0.5, 0.1).unwrap();
        let est = momentum_density(&j, &plan, &params, 1).unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k1,k2,p1,p2,E,F_estimate,std_error,n_samples"
        );
        assert_eq!(lines.count(), 16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn evolution_is_unitary(seed in any::<u64>(), eta in 0.0f64..2.0, t in 0.0f64..5.0) {
            let s = spec(2, 8);
            let params = EvolutionParams::new(s, eta, t, 0.05).unwrap();
            let w = sample_disorder(&s, seed);
            let f = smooth_field(s);
            let out = evolve(&f, &w, &params).unwrap();
            prop_assert!((out.norm() / f.norm() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn density_mass_is_conserved_per_sample(seed in any::<u64>(), eta in 0.0f64..1.5) {
            let s = spec(1, 8);
            let j = InitialProfile::fermi_dirac(s.dual_grid(), 1.0, 0.2).unwrap();
            let plan = EnsemblePlan::new(seed, 2).unwrap();
            let params = EvolutionParams::new(s, eta, 1.0, 0.1).unwrap();
            let est = momentum_density(&j, &plan, &params, 2).unwrap();
            let mass_j = j.values().iter().sum::<f64>() / 8.0;
            prop_assert!((est.mass() - mass_j).abs() < 1e-12);
        }
    }

    #[test]
    fn stored_samples_reproduce_the_estimate() {
        let s = spec(2, 8);
        let j = InitialProfile::fermi_dirac(s.dual_grid(), 2.0, 0.5).unwrap();
        let params = EvolutionParams::new(s, 0.6, 1.0, 0.1).unwrap();
        let plan = EnsemblePlan::new(9, 70).unwrap();
        let est = momentum_density(&j, &plan, &params, 2).unwrap();
        let (again, samples) = momentum_density_samples(&j, &plan, &params, 2).unwrap();
        assert_eq!(est, again);
        assert_eq!(samples.len(), 70);
        let mut acc = VecAccumulator::new(s.sites());
        samples.iter().for_each(|f| acc.push(f));
        assert_eq!(acc.mean(), est.mean);
    }
}
