//! One function per experiment kind. Each returns its CSV files in memory,
//! a JSON summary for the manifest and the checks that decide the exit code.

use kinetic_core::boltzmann::{
    build_shells, solve_collision_history, solve_exact, solve_ode, EnergyShells,
};
use kinetic_core::diagrams::{
    classify, enumerate_pairings, schedule, verify_dichotomy, wick_oracle, FeynmanGraph,
};
use kinetic_core::disorder::{normal_quantile, sample_disorder};
use kinetic_core::ensemble::EnsemblePlan;
use kinetic_core::lattice::{
    nearest_momentum, ComplexField, DispersionTable, LatticeSpec, MomentumGrid,
};
use kinetic_core::micro::{
    evolve, evolve_adjoint, momentum_density, momentum_density_samples, DensityEstimate,
    EvolutionParams, KineticSchedule,
};
use kinetic_core::quasifree::{gaussian_bump, quasifreeness_gap, GapReport, TestFunctionSet};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::convergence::{debiased_l2, trend, TREND_SIGMAS};
use crate::output::{num, Table};
use crate::LabError;

/// Centre of the `evolve` packet along the first momentum axis.
pub const PACKET_CENTRE: f64 = 0.25;

/// Tolerances of the built-in checks.
pub const UNITARITY_TOL: f64 = 1e-10;
pub const MASS_TOL: f64 = 1e-10;
pub const EXACT_VS_ODE_TOL: f64 = 1e-8;
pub const EXACT_MASS_TOL: f64 = 1e-12;
pub const ODE_MASS_TOL: f64 = 1e-8;
pub const BOUNDS_SIGMAS: f64 = 4.0;
/// Two-sided family-wise level of the collision-history check (3σ).
pub const MC_FAMILY_LEVEL: f64 = 0.0027;
pub const WICK_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `value < tol`.
    fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self::new(name, value < tol, format!("{value:e} < {tol:e}"))
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
    pub checks: Vec<Check>,
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    cfg.validate(kind)?;
    match kind {
        ExperimentKind::Evolve => run_evolve(cfg),
        ExperimentKind::Density => run_density(cfg),
        ExperimentKind::Boltzmann => run_boltzmann(cfg),
        ExperimentKind::Dos => run_dos(cfg),
        ExperimentKind::Diagrams => run_diagrams(cfg),
        ExperimentKind::Wick => run_wick(cfg),
        ExperimentKind::Quasifree => run_quasifree(cfg),
        ExperimentKind::Converge => run_convergence(cfg),
        ExperimentKind::Schedule => run_schedule(cfg),
    }
}

/// Rough wall time in seconds on one core, used by the budget guard.
pub fn estimate_seconds(kind: ExperimentKind, cfg: &ExperimentConfig) -> f64 {
    const PER_SITE_LOG: f64 = 3e-9;
    let sites = cfg.side.checked_pow(cfg.d as u32).unwrap_or(usize::MAX) as f64;
    let step = PER_SITE_LOG * sites * sites.log2().max(1.0);
    let steps = |t: f64| (t / cfg.dt).ceil().max(1.0);
    let kinetic = |eta: f64| {
        if eta > 0.0 {
            steps(cfg.macro_time / (eta * eta))
        } else {
            1.0
        }
    };
    let r = cfg.realizations as f64;
    match kind {
        ExperimentKind::Evolve => cfg.etas.len() as f64 * 2.0 * steps(cfg.t) * step,
        ExperimentKind::Density | ExperimentKind::Converge => cfg
            .etas
            .iter()
            .map(|&e| r * cfg.phases as f64 * kinetic(e) * step)
            .sum(),
        ExperimentKind::Quasifree => {
            let vectors = 2.0 * cfg.quasifree.f_centres.len() as f64;
            cfg.etas
                .iter()
                .map(|&e| r * vectors * kinetic(e) * step)
                .sum::<f64>()
                * 1.1
        }
        ExperimentKind::Wick => {
            let per_eta: f64 = cfg
                .wick
                .orders
                .iter()
                .map(|&(n, nt)| r * (n + nt + 2) as f64 * steps(cfg.t) * step)
                .sum();
            per_eta * cfg.etas.len() as f64
        }
        ExperimentKind::Boltzmann => {
            let points = (cfg.m as f64).powi(cfg.d as i32);
            let mc = 4e-8 * points * cfg.paths as f64 * (1.0 + 6.0 * cfg.macro_time);
            let ode = 2e-8 * points * cfg.macro_time / cfg.ode_step;
            mc + ode
        }
        ExperimentKind::Dos | ExperimentKind::Diagrams | ExperimentKind::Schedule => 0.1,
    }
}

fn axis(c: f64, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = c;
    v
}

fn plan(cfg: &ExperimentConfig, n: usize) -> Result<EnsemblePlan, LabError> {
    Ok(EnsemblePlan::new(cfg.seed, n)?)
}

fn kinetic_params(
    cfg: &ExperimentConfig,
    spec: LatticeSpec,
    eta: f64,
) -> Result<EvolutionParams, LabError> {
    let sched = KineticSchedule::new(cfg.macro_time, eta)?;
    Ok(EvolutionParams::from_schedule(spec, &sched, cfg.dt)?)
}

fn coord_headers(d: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=d).map(|a| format!("k{a}")).collect();
    h.extend((1..=d).map(|a| format!("p{a}")));
    h
}

fn coord_cells(grid: &MomentumGrid, i: usize) -> Vec<String> {
    let mut row: Vec<String> = grid
        .integer_coords(i)
        .iter()
        .map(|k| k.to_string())
        .collect();
    row.extend(grid.point(i).iter().map(|&p| num(p)));
    row
}

fn header(lead: &[&str], d: usize, tail: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    h.extend(coord_headers(d));
    h.extend(tail.iter().map(|s| s.to_string()));
    h
}

fn weighted_mass(values: &[f64], weight: f64) -> f64 {
    values.iter().sum::<f64>() * weight
}

/// Points whose estimate leaves `[−kσ, 1 + kσ]`; points with zero error
/// must lie in `[0, 1]` up to roundoff.
fn bounds_violations(est: &DensityEstimate, sigmas: f64) -> usize {
    est.mean
        .iter()
        .zip(&est.stderr)
        .filter(|(&m, &s)| {
            let slack = (sigmas * s).max(1e-12);
            m < -slack || m > 1.0 + slack
        })
        .count()
}

fn density_checks(eta: f64, est: &DensityEstimate, mass0: f64) -> (Vec<Check>, Value) {
    let mass = est.mass();
    let drift = (mass - mass0).abs() / mass0.abs().max(1.0);
    let bad = bounds_violations(est, BOUNDS_SIGMAS);
    let checks = vec![
        Check::below(format!("mass[eta={eta}]"), drift, MASS_TOL),
        Check::new(
            format!("bounds[eta={eta}]"),
            bad == 0,
            format!(
                "{bad} of {} points outside [0,1] ± {BOUNDS_SIGMAS}σ",
                est.mean.len()
            ),
        ),
    ];
    let summary =
        json!({ "eta": eta, "mass": mass, "mass_initial": mass0, "bounds_violations": bad });
    (checks, summary)
}

fn run_evolve(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let spec = cfg.lattice()?;
    let grid = spec.dual_grid();
    let f0 = gaussian_bump(spec, &axis(PACKET_CENTRE, cfg.d), cfg.packet_width)?;
    let w = sample_disorder(&spec, plan(cfg, 1)?.seed(0));
    let mut table = Table::new(&header(&["eta", "t"], cfg.d, &["E", "re", "im", "abs2"]));
    let energies = DispersionTable::new(grid);
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &eta in &cfg.etas {
        let params = EvolutionParams::new(spec, eta, cfg.t, cfg.dt)?;
        let ft = evolve(&f0, &w, &params)?;
        let back = evolve_adjoint(&ft, &w, &params)?;
        let norm_drift = (ft.norm() / f0.norm() - 1.0).abs();
        let revert = distance(&back, &f0) / f0.norm();
        checks.push(Check::below(
            format!("unitarity[eta={eta}]"),
            norm_drift,
            UNITARITY_TOL,
        ));
        checks.push(Check::below(
            format!("reversibility[eta={eta}]"),
            revert,
            UNITARITY_TOL,
        ));
        rows.push(json!({ "eta": eta, "steps": params.steps(), "norm_drift": norm_drift, "reversal_error": revert }));
        for (i, z) in ft.values().iter().enumerate() {
            let mut row = vec![num(eta), num(params.t())];
            row.extend(coord_cells(&grid, i));
            row.extend([
                num(energies.energy(i)),
                num(z.re),
                num(z.im),
                num(z.norm_sqr()),
            ]);
            table.row(&row);
        }
    }
    Ok(Outcome {
        files: vec![("evolve.csv".into(), table.into_bytes())],
        summary: json!({ "packet_centre": PACKET_CENTRE, "runs": rows }),
        checks,
    })
}

fn distance(a: &ComplexField, b: &ComplexField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn run_density(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let spec = cfg.lattice()?;
    let grid = spec.dual_grid();
    let j = cfg.initial_profile(grid)?;
    let mass0 = weighted_mass(j.values(), grid.weight());
    let energies = DispersionTable::new(grid);
    let ensemble = plan(cfg, cfg.realizations)?;
    let mut table = Table::new(&header(
        &["eta", "t"],
        cfg.d,
        &["E", "F_initial", "F_estimate", "std_error", "n_samples"],
    ));
    let mut checks = Vec::new();
    let mut runs = Vec::new();
    for &eta in &cfg.etas {
        let params = kinetic_params(cfg, spec, eta)?;
        let est = momentum_density(&j, &ensemble, &params, cfg.phases)?;
        let (c, s) = density_checks(eta, &est, mass0);
        checks.extend(c);
        runs.push(s);
        for i in 0..grid.len() {
            let mut row = vec![num(eta), num(params.t())];
            row.extend(coord_cells(&grid, i));
            row.extend([
                num(energies.energy(i)),
                num(j.values()[i]),
                num(est.mean[i]),
                num(est.stderr[i]),
                est.n_samples().to_string(),
            ]);
            table.row(&row);
        }
    }
    Ok(Outcome {
        files: vec![("density.csv".into(), table.into_bytes())],
        summary: json!({ "runs": runs }),
        checks,
    })
}

fn shell_conservation(shells: &EnergyShells, a: &[f64], b: &[f64]) -> f64 {
    shells
        .shell_averages(a)
        .iter()
        .zip(shells.shell_averages(b))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn run_boltzmann(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let grid = cfg.continuum()?;
    let shells = build_shells(grid, cfg.n_bins)?;
    let f0 = cfg.initial_profile(grid)?.as_distribution();
    let t = cfg.macro_time;
    let exact = solve_exact(&f0, &shells, t)?;
    let ode = solve_ode(&f0, &shells, t, cfg.ode_step)?;
    let mc = solve_collision_history(&f0, &shells, t, cfg.paths, cfg.seed)?;

    let k = grid.len() as f64;
    let threshold = normal_quantile(1.0 - MC_FAMILY_LEVEL / (2.0 * k));
    let mut worst_z: f64 = 0.0;
    let mut table = Table::new(&header(
        &[],
        cfg.d,
        &["E", "shell", "F0", "F_exact", "F_ode", "F_mc", "mc_stderr"],
    ));
    for i in 0..grid.len() {
        let diff = (mc.mean.values()[i] - exact.values()[i]).abs();
        let se = mc.stderr[i];
        let z = if se > 0.0 {
            diff / se
        } else if diff < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
        let mut row = coord_cells(&grid, i);
        row.extend([
            num(shells.energy(i)),
            shells.shell_of(i).to_string(),
            num(f0.values()[i]),
            num(exact.values()[i]),
            num(ode.values()[i]),
            num(mc.mean.values()[i]),
            num(se),
        ]);
        table.row(&row);
    }
    let sup = exact.sup_distance(&ode);
    let m0 = f0.mass();
    let checks = vec![
        Check::below("exact_vs_ode", sup, EXACT_VS_ODE_TOL),
        Check::below("mass_exact", (exact.mass() - m0).abs(), EXACT_MASS_TOL),
        Check::below("mass_ode", (ode.mass() - m0).abs(), ODE_MASS_TOL),
        Check::below(
            "shells_exact",
            shell_conservation(&shells, exact.values(), f0.values()),
            EXACT_MASS_TOL,
        ),
        Check::below(
            "shells_ode",
            shell_conservation(&shells, ode.values(), f0.values()),
            ODE_MASS_TOL,
        ),
        Check::new(
            "collision_history",
            worst_z < threshold,
            format!(
                "max |z| = {worst_z:.3} < {threshold:.3} (family-wise 3σ over {} points)",
                grid.len()
            ),
        ),
    ];
    Ok(Outcome {
        files: vec![("boltzmann.csv".into(), table.into_bytes())],
        summary: json!({
            "T": t,
            "sup_exact_ode": sup,
            "mass_initial": m0,
            "mass_exact": exact.mass(),
            "mass_ode": ode.mass(),
            "mc_paths": cfg.paths,
            "mc_max_z": worst_z,
            "mc_threshold": threshold,
        }),
        checks,
    })
}

fn run_dos(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let grid = cfg.continuum()?;
    let shells = build_shells(grid, cfg.n_bins)?;
    let mut table = Table::new(&["E_center", "E_lo", "E_hi", "nu", "population", "rate"]);
    for b in 0..shells.n_bins() {
        let (lo, hi) = shells.edges(b);
        table.row(&[
            num(shells.center(b)),
            num(lo),
            num(hi),
            num(shells.dos()[b]),
            shells.population(b).to_string(),
            num(shells.rates()[b]),
        ]);
    }
    let total: f64 = shells.dos().iter().sum::<f64>() * shells.width();
    Ok(Outcome {
        files: vec![("dos.csv".into(), table.into_bytes())],
        summary: json!({
            "n_bins": shells.n_bins(),
            "width": shells.width(),
            "integral": total,
            "empty_shells": shells.empty_shells(),
        }),
        checks: vec![Check::below("normalisation", (total - 1.0).abs(), 1e-12)],
    })
}

fn pairing_string(g: &FeynmanGraph) -> String {
    g.canonical_pairs()
        .iter()
        .map(|(a, b)| format!("{}-{}", a.position, b.position))
        .collect::<Vec<_>>()
        .join(";")
}

fn double_factorial_odd(k: usize) -> usize {
    (1..=k).step_by(2).product()
}

fn run_diagrams(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let flag = |b: bool| if b { "1" } else { "0" };
    let mut graphs = Table::new(&[
        "nbar",
        "n",
        "n_tilde",
        "pairing",
        "label",
        "basic_ladder",
        "decorated_ladder",
        "immediate_recollision",
        "crossing",
        "nesting",
    ]);
    let mut checks = Vec::new();
    let mut counts = Vec::new();
    for nbar in 1..=cfg.max_nbar {
        let expected = double_factorial_odd(2 * nbar - 1);
        for n in 0..=2 * nbar {
            let list = enumerate_pairings(&[(n, 2 * nbar - n)])?;
            checks.push(Check::new(
                format!("count[n={n},n_tilde={}]", 2 * nbar - n),
                list.len() == expected,
                format!("{} graphs, expected {expected}", list.len()),
            ));
            for g in &list {
                let c = classify(g)?;
                graphs.row(&[
                    nbar.to_string(),
                    n.to_string(),
                    (2 * nbar - n).to_string(),
                    pairing_string(g),
                    c.label.name().to_string(),
                    flag(c.basic_ladder).into(),
                    flag(c.decorated_ladder).into(),
                    flag(c.has_immediate_recollision).into(),
                    flag(c.has_crossing).into(),
                    flag(c.has_nesting).into(),
                ]);
            }
        }
        counts.push(json!({ "nbar": nbar, "graphs_per_split": expected }));
    }
    let report = verify_dichotomy(cfg.max_nbar)?;
    let mut dichotomy = Table::new(&["n", "n_tilde", "graphs", "decorated_ladders"]);
    for &(n, nt, total, ladders) in &report.splits {
        dichotomy.row(&[
            n.to_string(),
            nt.to_string(),
            total.to_string(),
            ladders.to_string(),
        ]);
    }
    checks.push(Check::new(
        "dichotomy",
        report.holds(),
        format!(
            "{} graphs checked, {} counterexamples",
            report.graphs_checked,
            report.counterexamples.len()
        ),
    ));
    Ok(Outcome {
        files: vec![
            ("graphs.csv".into(), graphs.into_bytes()),
            ("dichotomy.csv".into(), dichotomy.into_bytes()),
        ],
        summary: json!({
            "max_nbar": cfg.max_nbar,
            "counts": counts,
            "graphs_checked": report.graphs_checked,
        }),
        checks,
    })
}

fn run_wick(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let spec = cfg.lattice()?;
    let j = cfg.initial_profile(spec.dual_grid())?;
    let w = &cfg.wick;
    let f = gaussian_bump(spec, &axis(w.f_centre, cfg.d), w.width)?;
    let g = gaussian_bump(spec, &axis(w.g_centre, cfg.d), w.width)?;
    let ensemble = plan(cfg, cfg.realizations)?;
    let mut table = Table::new(&[
        "eta",
        "t",
        "n",
        "n_tilde",
        "n_realizations",
        "mc_re",
        "mc_im",
        "mc_stderr_re",
        "mc_stderr_im",
        "pairing_re",
        "pairing_im",
        "z_re",
        "z_im",
    ]);
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for &eta in &cfg.etas {
        let params = EvolutionParams::new(spec, eta, cfg.t, cfg.dt)?;
        for &(n, nt) in &w.orders {
            let r = wick_oracle(n, nt, &f, &g, &j, &params, w.h, &ensemble)?;
            table.row(&[
                num(eta),
                num(params.t()),
                n.to_string(),
                nt.to_string(),
                r.n_realizations.to_string(),
                num(r.mc_mean.re),
                num(r.mc_mean.im),
                num(r.mc_stderr_re),
                num(r.mc_stderr_im),
                num(r.pairing_sum.re),
                num(r.pairing_sum.im),
                num(r.z_re),
                num(r.z_im),
            ]);
            checks.push(Check::new(
                format!("wick[eta={eta},n={n},n_tilde={nt}]"),
                r.z() < WICK_Z,
                format!("|z| = {:.3} < {WICK_Z}", r.z()),
            ));
            reports
                .push(json!({ "eta": eta, "n": n, "n_tilde": nt, "z_re": r.z_re, "z_im": r.z_im }));
        }
    }
    Ok(Outcome {
        files: vec![("wick.csv".into(), table.into_bytes())],
        summary: json!({ "reports": reports }),
        checks,
    })
}

fn run_quasifree(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let spec = cfg.lattice()?;
    let j = cfg.initial_profile(spec.dual_grid())?;
    let q = &cfg.quasifree;
    let centres = |cs: &[f64]| cs.iter().map(|&c| axis(c, cfg.d)).collect::<Vec<_>>();
    let tset = TestFunctionSet::bumps(
        spec,
        &centres(&q.f_centres),
        &centres(&q.g_centres),
        q.width,
    )?;
    let ensemble = plan(cfg, cfg.realizations)?;

    let mut csv = Vec::new();
    csv.extend_from_slice(GapReport::CSV_HEADER.as_bytes());
    csv.extend_from_slice(b"\r\n");
    let mut gaps = Vec::new();
    for &eta in &cfg.etas {
        let params = kinetic_params(cfg, spec, eta)?;
        let report = quasifreeness_gap(&tset, &j, &ensemble, &params)?;
        push_gap_row(&mut csv, &report, cfg.macro_time);
        gaps.push(report);
    }
    let verdict = trend(
        &gaps.iter().map(|r| (r.gap, r.stderr)).collect::<Vec<_>>(),
        TREND_SIGMAS,
    );

    // exact nulls, on a small ensemble
    let small = plan(cfg, cfg.realizations.min(16))?;
    let eta0 = cfg.etas[0];
    let free = EvolutionParams::new(spec, 0.0, kinetic_params(cfg, spec, eta0)?.t(), cfg.dt)?;
    let start = EvolutionParams::new(spec, eta0, 0.0, cfg.dt)?;
    let single = TestFunctionSet::bumps(
        spec,
        &centres(&q.f_centres[..1]),
        &centres(&q.g_centres[..1]),
        q.width,
    )?;
    let nulls = [
        (
            "null_eta_zero",
            quasifreeness_gap(&tset, &j, &small, &free)?,
        ),
        ("null_t_zero", quasifreeness_gap(&tset, &j, &small, &start)?),
        (
            "null_r_one",
            quasifreeness_gap(&single, &j, &small, &kinetic_params(cfg, spec, eta0)?)?,
        ),
    ];
    let checks = nulls
        .iter()
        .map(|(name, r)| Check::new(*name, r.gap == 0.0, format!("gap = {:e}", r.gap)))
        .collect();
    Ok(Outcome {
        files: vec![("gap.csv".into(), csv)],
        summary: json!({
            "r": tset.r(),
            "trend": verdict,
            "trend_sigmas": TREND_SIGMAS,
            "gaps": gaps.iter().map(|r| json!({ "eta": r.eta, "gap": r.gap, "stderr": r.stderr })).collect::<Vec<_>>(),
            "nulls": nulls.iter().map(|(n, r)| json!({ "name": n, "gap": r.gap })).collect::<Vec<_>>(),
        }),
        checks,
    })
}

fn push_gap_row(csv: &mut Vec<u8>, report: &GapReport, macro_time: f64) {
    let mut line = Vec::new();
    report
        .write_csv_row(&mut line, macro_time)
        .expect("write to memory");
    if line.last() == Some(&b'\n') {
        line.pop();
    }
    csv.extend_from_slice(&line);
    csv.extend_from_slice(b"\r\n");
}

/// Microscopic density at `t = T/η²` against the Boltzmann solution `F_T`
/// on the lattice's own momentum grid and energy shells.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let spec = cfg.lattice()?;
    let grid = spec.dual_grid();
    let j = cfg.initial_profile(grid)?;
    let shells = build_shells(grid, cfg.n_bins)?;
    let f_t = solve_exact(&j.as_distribution(), &shells, cfg.macro_time)?;
    let shell_spec = shells.grid().as_spec();
    let target: Vec<f64> = (0..grid.len())
        .map(|i| f_t.values()[nearest_momentum(&grid.point(i), &shell_spec).0])
        .collect();
    let mass0 = weighted_mass(j.values(), grid.weight());
    let ensemble = plan(cfg, cfg.realizations)?;

    let mut dist = Table::new(&header(
        &["eta", "t"],
        cfg.d,
        &["E", "shell", "F_empirical", "std_error", "F_boltzmann"],
    ));
    let mut err = Table::new(&[
        "eta",
        "t",
        "n_samples",
        "err",
        "err_stderr",
        "err_sq",
        "err_sq_stderr",
        "raw_sq",
        "mass",
        "mass_initial",
    ]);
    let mut checks = Vec::new();
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &eta in &cfg.etas {
        let params = kinetic_params(cfg, spec, eta)?;
        let (est, samples) = momentum_density_samples(&j, &ensemble, &params, cfg.phases)?;
        let e = debiased_l2(&samples, &target, grid.weight());
        drop(samples);
        let (c, _) = density_checks(eta, &est, mass0);
        checks.extend(c);
        for i in 0..grid.len() {
            let mut row = vec![num(eta), num(params.t())];
            row.extend(coord_cells(&grid, i));
            row.extend([
                num(shells.energy(i)),
                shells.shell_of(i).to_string(),
                num(est.mean[i]),
                num(est.stderr[i]),
                num(target[i]),
            ]);
            dist.row(&row);
        }
        err.row(&[
            num(eta),
            num(params.t()),
            est.n_samples().to_string(),
            num(e.err()),
            num(e.err_stderr()),
            num(e.err_sq),
            num(e.err_sq_stderr),
            num(e.raw_sq),
            num(est.mass()),
            num(mass0),
        ]);
        points.push((e.err_sq, e.err_sq_stderr));
        rows.push(json!({
            "eta": eta,
            "t": params.t(),
            "steps": params.steps(),
            "n_samples": est.n_samples(),
            "err": e.err(),
            "err_sq": e.err_sq,
            "err_sq_stderr": e.err_sq_stderr,
        }));
    }
    let verdict = trend(&points, TREND_SIGMAS);
    Ok(Outcome {
        files: vec![
            ("distributions.csv".into(), dist.into_bytes()),
            ("err.csv".into(), err.into_bytes()),
        ],
        summary: json!({
            "T": cfg.macro_time,
            "n_bins": cfg.n_bins,
            "trend": verdict,
            "trend_sigmas": TREND_SIGMAS,
            "errors": rows,
        }),
        checks,
    })
}

fn run_schedule(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    let flag = |b: bool| if b { "1" } else { "0" };
    let mut table = Table::new(&[
        "epsilon",
        "r",
        "log_inv_eps",
        "N",
        "kappa",
        "ln_N_factorial",
        "N_ln_kappa",
        "factorial_lower",
        "factorial_upper",
        "kappa_power",
        "N_r",
        "kappa_r",
        "ln_N_r_factorial",
        "N_r_ln_kappa_r",
        "factorial_lower_r",
        "factorial_upper_r",
        "kappa_power_r",
    ]);
    let mut all = Vec::new();
    for &eps in &cfg.schedule.epsilons {
        let s = schedule(eps, cfg.schedule.r)?;
        table.row(&[
            num(s.epsilon),
            s.r.to_string(),
            num(s.log_inv_eps),
            num(s.n),
            num(s.kappa),
            num(s.ln_n_factorial),
            num(s.n_ln_kappa),
            flag(s.flags.factorial_lower).into(),
            flag(s.flags.factorial_upper).into(),
            flag(s.flags.kappa_power).into(),
            num(s.n_r),
            num(s.kappa_r),
            num(s.ln_n_r_factorial),
            num(s.n_r_ln_kappa_r),
            flag(s.flags_r.factorial_lower).into(),
            flag(s.flags_r.factorial_upper).into(),
            flag(s.flags_r.kappa_power).into(),
        ]);
        all.push(s);
    }
    Ok(Outcome {
        files: vec![("schedule.csv".into(), table.into_bytes())],
        summary: json!({ "schedules": all }),
        checks: Vec::new(),
    })
}
