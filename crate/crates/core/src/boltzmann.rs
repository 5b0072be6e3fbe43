//! Linear Boltzmann equation on a discretised torus.
//!
//! ```text
//! ∂_T F(V) = 2π ∫ dU δ(E(U) − E(V)) (F(U) − F(V))
//! ```
//!
//! The energy delta is replaced by sharp histogram shells of width `ΔE` over
//! `[-d, d]`: on shell `b` the collision operator is
//! `(QF)(p) = σ_b (⟨F⟩_b − F(p))` with rate `σ_b = 2π ν_b`, where `ν_b` is the
//! fraction of grid points in the shell divided by `ΔE`. Any `F` that is
//! constant on shells is stationary to the last bit.
//!
//! Shell assignment is mirror symmetric under `E ↦ −E`:
//!
//! * even `n_bins`: half-open bins `[kΔE, (k+1)ΔE)` counted outward from 0;
//!   only points with `E` exactly on an edge (most notably `E = 0`) break the
//!   mirror symmetry.
//! * odd `n_bins`: the centre bin straddles 0 and `E/ΔE` is rounded half away
//!   from zero, which is exactly symmetric.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::RngCore;
use rayon::prelude::*;

use crate::disorder::{open_uniform, stream_rng};
use crate::error::{invalid, Error, Result};
use crate::lattice::{check_len, DispersionTable, MomentumGrid};
use crate::micro::fermi_dirac;
use crate::stats::Accumulator;

/// A real function on a momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    grid: MomentumGrid,
    values: Vec<f64>,
}

impl MomentumDistribution {
    pub fn new(grid: MomentumGrid, values: Vec<f64>) -> Result<Self> {
        check_len("F", values.len(), &grid)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid("F", format!("non-finite value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: MomentumGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: MomentumGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    /// `F(p) = g(E(p))` using the tabulated dispersion.
    pub fn from_energy_fn(grid: MomentumGrid, g: impl Fn(f64) -> f64) -> Self {
        let values = DispersionTable::new(grid)
            .energies()
            .iter()
            .map(|&e| g(e))
            .collect();
        Self { grid, values }
    }

    pub fn zeros(grid: MomentumGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ F dp`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.weight()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &MomentumDistribution) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Columns: momentum components, `E`, `F`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.grid.dim();
        let mut header: Vec<String> = (1..=d).map(|a| format!("p{a}")).collect();
        header.extend(["E", "F"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        let table = DispersionTable::new(self.grid);
        for (i, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.grid.point(i).iter().map(|p| p.to_string()).collect();
            row.push(table.energy(i).to_string());
            row.push(v.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Shell index of energy `e` for `n_bins` bins over `[-d, d]`.
pub fn shell_index(e: f64, d: usize, n_bins: usize) -> usize {
    let width = 2.0 * d as f64 / n_bins as f64;
    let x = e.abs() / width;
    let b = if n_bins % 2 == 0 {
        let half = (n_bins / 2) as i64;
        if e >= 0.0 {
            half + x.floor() as i64
        } else {
            half - x.ceil() as i64
        }
    } else {
        let centre = ((n_bins - 1) / 2) as i64;
        let k = (x + 0.5).floor() as i64;
        if e >= 0.0 {
            centre + k
        } else {
            centre - k
        }
    };
    b.clamp(0, n_bins as i64 - 1) as usize
}

/// Histogram decomposition of a grid into energy shells.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyShells {
    grid: MomentumGrid,
    n_bins: usize,
    width: f64,
    energies: Vec<f64>,
    shell_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    dos: Vec<f64>,
    rate: Vec<f64>,
}

pub fn build_shells(grid: MomentumGrid, n_bins: usize) -> Result<EnergyShells> {
    if n_bins < 2 {
        return Err(invalid(
            "n_bins",
            format!("must be at least 2, got {n_bins}"),
        ));
    }
    let d = grid.dim();
    let table = DispersionTable::new(grid);
    let energies = table.energies().to_vec();
    let shell_of: Vec<usize> = energies
        .iter()
        .map(|&e| shell_index(e, d, n_bins))
        .collect();
    let mut members = vec![Vec::new(); n_bins];
    for (i, &b) in shell_of.iter().enumerate() {
        members[b].push(i);
    }
    let width = 2.0 * d as f64 / n_bins as f64;
    let total = grid.len() as f64;
    let dos: Vec<f64> = members
        .iter()
        .map(|m| m.len() as f64 / total / width)
        .collect();
    let rate = dos.iter().map(|nu| 2.0 * PI * nu).collect();
    Ok(EnergyShells {
        grid,
        n_bins,
        width,
        energies,
        shell_of,
        members,
        dos,
        rate,
    })
}

impl EnergyShells {
    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn energy(&self, point: usize) -> f64 {
        self.energies[point]
    }

    pub fn shell_of(&self, point: usize) -> usize {
        self.shell_of[point]
    }

    pub fn members(&self, shell: usize) -> &[usize] {
        &self.members[shell]
    }

    pub fn population(&self, shell: usize) -> usize {
        self.members[shell].len()
    }

    /// `ν_b`, one value per shell.
    pub fn dos(&self) -> &[f64] {
        &self.dos
    }

    /// `σ_b = 2π ν_b`; zero for empty shells.
    pub fn rates(&self) -> &[f64] {
        &self.rate
    }

    pub fn max_rate(&self) -> f64 {
        self.rate.iter().copied().fold(0.0, f64::max)
    }

    pub fn empty_shells(&self) -> Vec<usize> {
        (0..self.n_bins)
            .filter(|&b| self.members[b].is_empty())
            .collect()
    }

    /// Representative energy of a shell (midpoint of its energy interval).
    pub fn center(&self, shell: usize) -> f64 {
        let d = self.grid.dim() as f64;
        let b = shell as f64;
        if self.n_bins % 2 == 0 {
            -d + (b + 0.5) * self.width
        } else {
            (b - ((self.n_bins - 1) / 2) as f64) * self.width
        }
    }

    /// Lower and upper energy of a shell.
    pub fn edges(&self, shell: usize) -> (f64, f64) {
        let c = self.center(shell);
        (c - 0.5 * self.width, c + 0.5 * self.width)
    }

    /// Density of states at `e`, linearly interpolated between shell centres.
    pub fn dos_at(&self, e: f64) -> f64 {
        let first = self.center(0);
        let x = (e - first) / self.width;
        if x <= 0.0 {
            return self.dos[0];
        }
        let k = x.floor() as usize;
        if k + 1 >= self.n_bins {
            return self.dos[self.n_bins - 1];
        }
        let frac = x - k as f64;
        self.dos[k] * (1.0 - frac) + self.dos[k + 1] * frac
    }

    /// Population average of `F` on every shell (0 for empty shells). The sum
    /// is taken relative to the first member, so shell-constant input gives
    /// that constant exactly.
    pub fn shell_averages(&self, f: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| match m.split_first() {
                None => 0.0,
                Some((&first, rest)) => {
                    let base = f[first];
                    let dev: f64 = rest.iter().map(|&q| f[q] - base).sum();
                    base + dev / m.len() as f64
                }
            })
            .collect()
    }

    /// Shell-constant distribution `F(p) = g(b(p))`.
    pub fn shell_function(&self, g: impl Fn(usize) -> f64) -> MomentumDistribution {
        let per_shell: Vec<f64> = (0..self.n_bins).map(g).collect();
        let values = self.shell_of.iter().map(|&b| per_shell[b]).collect();
        MomentumDistribution::from_parts(self.grid, values)
    }

    fn check(&self, f: &MomentumDistribution) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "distribution on {}^{} grid, shells on {}^{}",
                f.grid.side(),
                f.grid.dim(),
                self.grid.side(),
                self.grid.dim()
            )));
        }
        Ok(())
    }

    /// Columns: `E_center`, `nu`, `population`.
    pub fn write_dos_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "E_center,nu,population")?;
        for b in 0..self.n_bins {
            writeln!(
                w,
                "{},{},{}",
                self.center(b),
                self.dos[b],
                self.population(b)
            )?;
        }
        Ok(())
    }
}

fn apply_into(f: &[f64], shells: &EnergyShells, out: &mut [f64]) {
    let avg = shells.shell_averages(f);
    for (i, o) in out.iter_mut().enumerate() {
        let b = shells.shell_of[i];
        *o = shells.rate[b] * (avg[b] - f[i]);
    }
}

/// `(QF)(p) = σ_b (⟨F⟩_b − F(p))`.
pub fn collision_apply(
    f: &MomentumDistribution,
    shells: &EnergyShells,
) -> Result<MomentumDistribution> {
    shells.check(f)?;
    let mut out = vec![0.0; f.values.len()];
    apply_into(&f.values, shells, &mut out);
    Ok(MomentumDistribution::from_parts(f.grid, out))
}

/// `‖QF‖_∞`.
pub fn stationarity_residual(f: &MomentumDistribution, shells: &EnergyShells) -> Result<f64> {
    let q = collision_apply(f, shells)?;
    Ok(q.values.iter().fold(0.0, |m, v| m.max(v.abs())))
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("T", format!("must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Closed-form solution `F_T = A_b + e^{−σ_b T}(F_0 − A_b)`, `A_b = ⟨F_0⟩_b`.
pub fn solve_exact(
    f0: &MomentumDistribution,
    shells: &EnergyShells,
    t: f64,
) -> Result<MomentumDistribution> {
    shells.check(f0)?;
    check_time(t)?;
    let avg = shells.shell_averages(&f0.values);
    let decay: Vec<f64> = shells.rate.iter().map(|s| (-s * t).exp()).collect();
    let values = f0
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let b = shells.shell_of[i];
            avg[b] + decay[b] * (v - avg[b])
        })
        .collect();
    Ok(MomentumDistribution::from_parts(f0.grid, values))
}

/// Classical RK4 for `dF/dT = QF` with `round(T/h)` equal steps.
pub fn solve_ode(
    f0: &MomentumDistribution,
    shells: &EnergyShells,
    t: f64,
    h: f64,
) -> Result<MomentumDistribution> {
    shells.check(f0)?;
    check_time(t)?;
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("h", format!("must be finite and > 0, got {h}")));
    }
    let steps = (t / h).round().max(if t > 0.0 { 1.0 } else { 0.0 }) as usize;
    let n = f0.values.len();
    let mut y = f0.values.clone();
    if steps == 0 {
        return Ok(MomentumDistribution::from_parts(f0.grid, y));
    }
    let h = t / steps as f64;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        apply_into(&y, shells, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        apply_into(&tmp, shells, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        apply_into(&tmp, shells, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        apply_into(&tmp, shells, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(MomentumDistribution::from_parts(f0.grid, y))
}

/// Monte Carlo estimate with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McDistribution {
    pub mean: MomentumDistribution,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
}

/// Uniform index in `0..n` from 64 random bits (multiply-shift).
fn uniform_index(bits: u64, n: usize) -> usize {
    ((bits as u128 * n as u128) >> 64) as usize
}

/// Collision-history (jump process) solution: from each target point, run
/// `n_paths` histories with exponential waiting times of rate `σ_b` and
/// uniform resampling inside the shell at every jump, and average `F_0` at
/// the final momentum. Point `i` uses stream `i` of `seed`.
pub fn solve_collision_history(
    f0: &MomentumDistribution,
    shells: &EnergyShells,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McDistribution> {
    shells.check(f0)?;
    check_time(t)?;
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be at least 1"));
    }
    let results: Vec<(f64, f64)> = (0..f0.values.len())
        .into_par_iter()
        .map(|p| {
            let b = shells.shell_of[p];
            let rate = shells.rate[b];
            let members = &shells.members[b];
            if rate == 0.0 {
                return (f0.values[p], 0.0);
            }
            let mut rng = stream_rng(seed, p as u64);
            let mut acc = Accumulator::default();
            for _ in 0..n_paths {
                let mut pos = p;
                let mut clock = 0.0;
                loop {
                    clock += -open_uniform(rng.next_u64()).ln() / rate;
                    if clock > t {
                        break;
                    }
                    pos = members[uniform_index(rng.next_u64(), members.len())];
                }
                acc.push(f0.values[pos]);
            }
            (acc.mean(), acc.stderr())
        })
        .collect();
    let (mean, stderr): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    Ok(McDistribution {
        mean: MomentumDistribution::from_parts(f0.grid, mean),
        stderr,
        n_paths,
    })
}

/// Gain-minus-loss integrand of the quantum (Uehling-Uhlenbeck) collision
/// term for a Fermi-Dirac distribution `F` and `F̃ = 1 − F`:
///
/// ```text
/// B = F(p1) F(p2) F̃(q1) F̃(q2) − F(q1) F(q2) F̃(p1) F̃(p2).
/// ```
///
/// `B` vanishes when `E(p1) + E(p2) = E(q1) + E(q2)`.
pub fn buu_detailed_balance(beta: f64, mu: f64, quad: [&[f64]; 4]) -> Result<f64> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(invalid(
            "beta",
            format!("must be finite and >= 0, got {beta}"),
        ));
    }
    let e = quad.map(crate::lattice::dispersion);
    Ok(buu_from_energies(beta, mu, e))
}

pub fn buu_from_energies(beta: f64, mu: f64, e: [f64; 4]) -> f64 {
    let occ = e.map(|x| fermi_dirac(x, beta, mu));
    // 1 − F(E) = F(2μ − E)
    let hole = e.map(|x| fermi_dirac(2.0 * mu - x, beta, mu));
    occ[0] * occ[1] * hole[2] * hole[3] - occ[2] * occ[3] * hole[0] * hole[1]
}

/// `E(p1) + E(p2) − E(q1) − E(q2)`.
pub fn energy_violation(quad: [&[f64]; 4]) -> f64 {
    let e = quad.map(crate::lattice::dispersion);
    e[0] + e[1] - e[2] - e[3]
}

/// Lipschitz constant of `B` in the energy violation.
///
/// With `x_i = β(E_i − μ)`, `B = F_1F_2F_3F_4 (e^{x_3+x_4} − e^{x_1+x_2})`,
/// and `F_1F_2F_3F_4 e^{max(x_1+x_2, x_3+x_4)} ≤ 1`, so
/// `|B| ≤ 1 − e^{−β|ΔE|} ≤ β |ΔE|`.
pub fn buu_lipschitz_constant(beta: f64) -> f64 {
    beta
}
