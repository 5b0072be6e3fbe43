//! Feynman amplitudes at finite `(L, η, t)` in the time representation.
//!
//! For one particle line with `n` vertices left and `ñ` right of the
//! ρ₀-vertex, the propagator momenta are `u_0, …, u_{n+ñ+1}` with
//! `u_n = u_{n+1}` (the ρ₀-vertex). Vertex `ℓ ≤ n` sits between `u_{ℓ-1}` and
//! `u_ℓ`, vertex `ℓ > n` between `u_ℓ` and `u_{ℓ+1}`; its momentum transfer is
//! `q_ℓ = (left momentum) − (right momentum)`. A contraction `ℓ ∼ ℓ'`
//! contributes `E[ω̂(q_ℓ) ω̂(q_ℓ')] = L^d δ(q_ℓ + q_ℓ')`. Writing
//! `f_t^{(n)} = (−iη)^n ∫_{Σs=t} e^{−is_0 T} V ⋯ V e^{−is_n T} f`, the
//! contribution of a graph to `E[⟨f_t^{(n)}, J g_t^{(ñ)}⟩]` is
//!
//! ```text
//! η^{n+ñ} i^n (−i)^ñ L^{−d(#vars − #pairs)} Σ_{solutions}
//!     conj f(u_0) g(u_last) J(u_n) S_+(u_0..u_n) S_−(u_{n+1}..u_last)
//! S_±(a) = ∫_{s_0+…+s_k = t} Π_j e^{±i s_j E(a_j)} ds.
//! ```
//!
//! The delta constraints are resolved exactly by integer elimination (the
//! constraint matrix is an incidence matrix, so ±1 pivots always exist) and
//! only the remaining free momenta are summed. Multi-line graphs multiply the
//! per-line factors and share one global constraint system.

use std::collections::HashMap;

use num_complex::Complex64;

use super::graph::{FeynmanGraph, VertexAddress};
use crate::error::{invalid, Error, Result};
use crate::lattice::{ComplexField, DispersionTable, LatticeSpec, Representation};
use crate::micro::InitialProfile;

/// Largest vertex count for amplitude evaluation.
pub const MAX_AMPLITUDE_VERTICES: usize = 4;
/// Largest number of free momentum configurations summed.
pub const MAX_CONFIGURATIONS: u64 = 1 << 22;

/// Variable layout of the propagator momenta of all lines.
#[derive(Debug, Clone)]
struct Layout {
    degrees: Vec<(usize, usize)>,
    base: Vec<usize>,
    n_vars: usize,
}

impl Layout {
    fn new(degrees: &[(usize, usize)]) -> Self {
        let mut base = Vec::with_capacity(degrees.len());
        let mut next = 0;
        for (n, nt) in degrees {
            base.push(next);
            next += n + nt + 1;
        }
        Self {
            degrees: degrees.to_vec(),
            base,
            n_vars: next,
        }
    }

    /// Variable of propagator `k` (`0..=n+ñ+1`) on `line`.
    fn var(&self, line: usize, k: usize) -> usize {
        let n = self.degrees[line].0;
        self.base[line] + if k <= n { k } else { k - 1 }
    }

    fn last(&self, line: usize) -> usize {
        let (n, nt) = self.degrees[line];
        n + nt + 1
    }

    /// `q_v` as a coefficient vector.
    fn transfer(&self, v: VertexAddress) -> Vec<i64> {
        let n = self.degrees[v.line].0;
        let (left, right) = if v.position <= n {
            (v.position - 1, v.position)
        } else {
            (v.position, v.position + 1)
        };
        let mut row = vec![0i64; self.n_vars];
        row[self.var(v.line, left)] += 1;
        row[self.var(v.line, right)] -= 1;
        row
    }
}

/// Reduced row-echelon form of the contraction constraints.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    layout: Layout,
    /// `(pivot variable, row)` with `row[pivot] = 1` and zeros at every other
    /// pivot.
    pivots: Vec<(usize, Vec<i64>)>,
    n_constraints: usize,
}

impl ConstraintSystem {
    pub fn new(g: &FeynmanGraph) -> Result<Self> {
        let layout = Layout::new(g.degrees());
        let mut pivots: Vec<(usize, Vec<i64>)> = Vec::new();
        for &(a, b) in g.pairing() {
            let mut row: Vec<i64> = layout
                .transfer(a)
                .iter()
                .zip(layout.transfer(b))
                .map(|(x, y)| x + y)
                .collect();
            reduce(&mut row, &pivots);
            if row.iter().all(|&c| c == 0) {
                continue;
            }
            let pv = row
                .iter()
                .position(|c| c.abs() == 1)
                .ok_or_else(|| Error::InconsistentGraph("constraint without unit pivot".into()))?;
            if row[pv] == -1 {
                row.iter_mut().for_each(|c| *c = -*c);
            }
            for (_, other) in pivots.iter_mut() {
                let c = other[pv];
                if c != 0 {
                    for (o, r) in other.iter_mut().zip(&row) {
                        *o -= c * r;
                    }
                }
            }
            pivots.push((pv, row));
        }
        Ok(Self {
            layout,
            pivots,
            n_constraints: g.pairing().len(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.layout.n_vars
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    pub fn free_vars(&self) -> Vec<usize> {
        (0..self.layout.n_vars)
            .filter(|v| self.pivots.iter().all(|(p, _)| p != v))
            .collect()
    }

    /// Whether the linear form `Σ c_v u_v = 0` follows from the constraints.
    pub fn implies(&self, form: &[i64]) -> bool {
        let mut row = form.to_vec();
        reduce(&mut row, &self.pivots);
        row.iter().all(|&c| c == 0)
    }

    /// `Σ_lines (u_0 − u_last)`, which must vanish on the support.
    pub fn momentum_balance_form(&self) -> Vec<i64> {
        let mut form = vec![0i64; self.layout.n_vars];
        for line in 0..self.layout.degrees.len() {
            form[self.layout.var(line, 0)] += 1;
            form[self.layout.var(line, self.layout.last(line))] -= 1;
        }
        form
    }

    /// `u_0 − u_last` of a single line.
    pub fn line_balance_form(&self, line: usize) -> Vec<i64> {
        let mut form = vec![0i64; self.layout.n_vars];
        form[self.layout.var(line, 0)] += 1;
        form[self.layout.var(line, self.layout.last(line))] -= 1;
        form
    }
}

fn reduce(row: &mut [i64], pivots: &[(usize, Vec<i64>)]) {
    for (pv, prow) in pivots {
        let c = row[*pv];
        if c != 0 {
            for (r, p) in row.iter_mut().zip(prow) {
                *r -= c * p;
            }
        }
    }
}

/// `∫_{s_0+…+s_k=t, s_j ≥ 0} Π_j e^{iσ a_j s_j} ds` by nested cumulative
/// trapezoid quadrature with step at most `h`:
/// `G_0(τ) = e^{iσa_0τ}`, `G_j(τ) = e^{iσa_jτ} ∫_0^τ G_{j−1}(s) e^{−iσa_j s} ds`.
pub fn simplex_integral(energies: &[f64], sigma: f64, t: f64, h: f64) -> Complex64 {
    assert!(!energies.is_empty());
    if energies.len() == 1 {
        return Complex64::from_polar(1.0, sigma * energies[0] * t);
    }
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let k = (t / h).ceil().max(1.0) as usize;
    let step = t / k as f64;
    let tau: Vec<f64> = (0..=k).map(|m| m as f64 * step).collect();
    let mut g: Vec<Complex64> = tau
        .iter()
        .map(|&x| Complex64::from_polar(1.0, sigma * energies[0] * x))
        .collect();
    let mut integrand = vec![Complex64::new(0.0, 0.0); k + 1];
    for &a in &energies[1..] {
        for (m, slot) in integrand.iter_mut().enumerate() {
            *slot = g[m] * Complex64::from_polar(1.0, -sigma * a * tau[m]);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        g[0] = acc;
        for m in 1..=k {
            acc += 0.5 * step * (integrand[m - 1] + integrand[m]);
            g[m] = acc * Complex64::from_polar(1.0, sigma * a * tau[m]);
        }
    }
    g[k]
}

/// Inputs shared by all amplitudes of one expansion.
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeParams {
    pub eta: f64,
    pub t: f64,
    /// Time quadrature step.
    pub h: f64,
}

impl AmplitudeParams {
    fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(invalid(
                "eta",
                format!("must be finite and >= 0, got {}", self.eta),
            ));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(invalid(
                "t",
                format!("must be finite and >= 0, got {}", self.t),
            ));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(invalid(
                "h",
                format!("must be finite and > 0, got {}", self.h),
            ));
        }
        Ok(())
    }
}

fn check_inputs(
    g: &FeynmanGraph,
    fs: &[ComplexField],
    gs: &[ComplexField],
    j: &InitialProfile,
) -> Result<LatticeSpec> {
    if fs.len() != g.lines() || gs.len() != g.lines() {
        return Err(Error::InconsistentGraph(format!(
            "{} lines but {} / {} test functions",
            g.lines(),
            fs.len(),
            gs.len()
        )));
    }
    let spec = *fs[0].spec();
    for f in fs.iter().chain(gs) {
        f.expect(Representation::Momentum)?;
        if *f.spec() != spec {
            return Err(Error::SpecMismatch(format!("{} vs {}", f.spec(), spec)));
        }
    }
    if *j.grid() != spec.dual_grid() {
        return Err(Error::GridMismatch(
            "profile is not on the lattice dual grid".into(),
        ));
    }
    if g.vertex_count() > MAX_AMPLITUDE_VERTICES {
        return Err(Error::SizeGuard(format!(
            "{} vertices, at most {MAX_AMPLITUDE_VERTICES} for amplitudes",
            g.vertex_count()
        )));
    }
    if spec.dim() > 2 || spec.side() > 16 {
        return Err(Error::SizeGuard(format!(
            "amplitudes need d <= 2 and L <= 16, got {spec}"
        )));
    }
    Ok(spec)
}

/// Amplitude of a (possibly multi-line) graph; line `k` uses test functions
/// `fs[k]`, `gs[k]` in momentum representation.
pub fn amplitude_multi(
    g: &FeynmanGraph,
    fs: &[ComplexField],
    gs: &[ComplexField],
    j: &InitialProfile,
    params: AmplitudeParams,
) -> Result<Complex64> {
    params.validate()?;
    let spec = check_inputs(g, fs, gs, j)?;
    let system = ConstraintSystem::new(g)?;
    debug_assert!(system.implies(&system.momentum_balance_form()));
    let free = system.free_vars();
    let sites = spec.sites() as u64;
    let configs = sites
        .checked_pow(free.len() as u32)
        .filter(|&c| c <= MAX_CONFIGURATIONS)
        .ok_or_else(|| {
            Error::SizeGuard(format!("{sites}^{} momentum configurations", free.len()))
        })?;

    let d = spec.dim();
    let table = DispersionTable::new(spec.dual_grid());
    let coords: Vec<Vec<i64>> = (0..spec.sites()).map(|i| spec.coords(i)).collect();
    let layout = &system.layout;
    let mut cache: HashMap<(bool, Vec<u64>), Complex64> = HashMap::new();
    let mut simplex = |energies: Vec<f64>, plus: bool| -> Complex64 {
        let key = (plus, energies.iter().map(|e| e.to_bits()).collect());
        *cache.entry(key).or_insert_with(|| {
            simplex_integral(&energies, if plus { 1.0 } else { -1.0 }, params.t, params.h)
        })
    };

    let mut var_index = vec![0usize; layout.n_vars];
    let mut digits = vec![0usize; free.len()];
    let mut total = Complex64::new(0.0, 0.0);
    let mut acc_coord = vec![0i64; d];
    for _ in 0..configs {
        for (slot, &v) in digits.iter().zip(&free) {
            var_index[v] = *slot;
        }
        for (pv, row) in &system.pivots {
            acc_coord.iter_mut().for_each(|c| *c = 0);
            for &fv in &free {
                let c = row[fv];
                if c != 0 {
                    for (a, x) in acc_coord.iter_mut().zip(&coords[var_index[fv]]) {
                        *a -= c * x;
                    }
                }
            }
            var_index[*pv] = spec.index(&acc_coord);
        }
        let mut term = Complex64::new(1.0, 0.0);
        for (line, &(n, nt)) in layout.degrees.iter().enumerate() {
            let idx = |k: usize| var_index[layout.var(line, k)];
            let last = n + nt + 1;
            let left: Vec<f64> = (0..=n).map(|k| table.energy(idx(k))).collect();
            let right: Vec<f64> = (n + 1..=last).map(|k| table.energy(idx(k))).collect();
            term *= fs[line].values()[idx(0)].conj()
                * gs[line].values()[idx(last)]
                * j.values()[idx(n)];
            if term == Complex64::new(0.0, 0.0) {
                break;
            }
            term *= simplex(left, true) * simplex(right, false);
        }
        total += term;
        // advance mixed-radix counter
        for slot in digits.iter_mut() {
            *slot += 1;
            if *slot < spec.sites() {
                break;
            }
            *slot = 0;
        }
    }

    let mut prefactor = Complex64::new(1.0, 0.0);
    for &(n, nt) in &layout.degrees {
        prefactor *= Complex64::new(0.0, 1.0).powu(n as u32)
            * Complex64::new(0.0, -1.0).powu(nt as u32)
            * params.eta.powi((n + nt) as i32);
    }
    let scale_exp = layout.n_vars as i32 - system.n_constraints as i32;
    let scale = (spec.sites() as f64).powi(-scale_exp);
    Ok(prefactor * scale * total)
}

/// Amplitude of a single-line graph.
pub fn amplitude(
    g: &FeynmanGraph,
    f: &ComplexField,
    g_test: &ComplexField,
    j: &InitialProfile,
    params: AmplitudeParams,
) -> Result<Complex64> {
    if g.lines() != 1 {
        return Err(Error::InconsistentGraph(
            "use amplitude_multi for several lines".into(),
        ));
    }
    amplitude_multi(
        g,
        std::slice::from_ref(f),
        std::slice::from_ref(g_test),
        j,
        params,
    )
}

/// `Σ_π Amp_π` over all pairings with the given degrees. Odd vertex counts
/// give zero (the Gaussian odd moments vanish).
pub fn pairing_sum(
    degrees: &[(usize, usize)],
    fs: &[ComplexField],
    gs: &[ComplexField],
    j: &InitialProfile,
    params: AmplitudeParams,
) -> Result<Complex64> {
    let total: usize = degrees.iter().map(|(a, b)| a + b).sum();
    if total % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let graphs = super::graph::enumerate_pairings(degrees)?;
    graphs
        .iter()
        .map(|g| amplitude_multi(g, fs, gs, j, params))
        .sum()
}
