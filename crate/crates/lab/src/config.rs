//! Experiment configuration. One JSON document; every field has a default
//! (see [`ExperimentConfig::default`]) and unknown fields are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kinetic_core::lattice::{LatticeSpec, MomentumGrid};
use kinetic_core::micro::InitialProfile;
use kinetic_core::quasifree::gaussian_bump;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Evolve,
    Density,
    Boltzmann,
    Dos,
    Diagrams,
    Wick,
    Quasifree,
    Converge,
    Schedule,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        Self::Evolve,
        Self::Density,
        Self::Boltzmann,
        Self::Dos,
        Self::Diagrams,
        Self::Wick,
        Self::Quasifree,
        Self::Converge,
        Self::Schedule,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Evolve => "evolve",
            Self::Density => "density",
            Self::Boltzmann => "boltzmann",
            Self::Dos => "dos",
            Self::Diagrams => "diagrams",
            Self::Wick => "wick",
            Self::Quasifree => "quasifree",
            Self::Converge => "converge",
            Self::Schedule => "schedule",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    FermiDirac {
        beta: f64,
        mu: f64,
    },
    Constant {
        c: f64,
    },
    /// `J(p) = height · exp(-|p - centre|² / (2 width²))`
    Bump {
        centre: Vec<f64>,
        width: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WickConfig {
    /// `(n, ñ)` pairs.
    pub orders: Vec<(usize, usize)>,
    /// Time quadrature step of the amplitudes.
    pub h: f64,
    pub f_centre: f64,
    pub g_centre: f64,
    pub width: f64,
}

impl Default for WickConfig {
    fn default() -> Self {
        Self {
            orders: vec![(1, 1), (2, 0), (0, 2)],
            h: 1e-3,
            f_centre: 0.1,
            g_centre: -0.05,
            width: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasifreeConfig {
    /// Bump centres along the first momentum axis; `r` is their count.
    pub f_centres: Vec<f64>,
    pub g_centres: Vec<f64>,
    pub width: f64,
}

impl Default for QuasifreeConfig {
    fn default() -> Self {
        Self {
            f_centres: vec![0.1, -0.2],
            g_centres: vec![0.15, -0.1],
            width: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epsilons: Vec<f64>,
    pub r: u32,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-6, 1e-9, 1e-12],
            r: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiments run by `suite`.
    pub experiments: Vec<ExperimentKind>,
    pub d: usize,
    /// Lattice side `L`.
    pub side: usize,
    /// Continuum grid resolution `M` per axis for the Boltzmann solvers.
    pub m: usize,
    pub n_bins: usize,
    /// Couplings; kinetic experiments run at `t = T/η²` for each.
    pub etas: Vec<f64>,
    /// Kinetic time `T`.
    pub macro_time: f64,
    /// Microscopic time of `evolve` and `wick`.
    pub t: f64,
    pub dt: f64,
    pub realizations: usize,
    pub phases: usize,
    /// Collision-history paths per grid point.
    pub paths: usize,
    /// RK4 step of the Boltzmann ODE solver.
    pub ode_step: f64,
    pub profile: ProfileConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    /// Refuse runs whose estimated wall time exceeds this, unless forced.
    pub budget_seconds: f64,
    pub max_nbar: usize,
    /// Width of the Gaussian packet used by `evolve`.
    pub packet_width: f64,
    pub wick: WickConfig,
    pub quasifree: QuasifreeConfig,
    pub schedule: ScheduleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiments: Vec::new(),
            d: 3,
            side: 16,
            m: 16,
            n_bins: 64,
            etas: vec![0.8, 0.4, 0.2],
            macro_time: 1.0,
            t: 2.0,
            dt: 0.05,
            realizations: 50,
            phases: 1,
            paths: 10_000,
            ode_step: 1e-3,
            profile: ProfileConfig::FermiDirac { beta: 2.0, mu: 0.5 },
            seed: 1,
            out: PathBuf::from("runs"),
            workers: None,
            budget_seconds: 3600.0,
            max_nbar: 4,
            packet_width: 0.1,
            wick: WickConfig::default(),
            quasifree: QuasifreeConfig::default(),
            schedule: ScheduleConfig::default(),
        }
    }
}

fn field(name: &str, reason: impl Into<String>) -> LabError {
    LabError::Config {
        field: name.to_string(),
        reason: reason.into(),
    }
}

fn positive(name: &str, x: f64) -> Result<(), LabError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(field(name, format!("must be finite and > 0, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| field("--config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| field("config", e.to_string()))
    }

    pub fn lattice(&self) -> Result<LatticeSpec, LabError> {
        LatticeSpec::new(self.d, self.side).map_err(|e| field("side", e.to_string()))
    }

    pub fn continuum(&self) -> Result<MomentumGrid, LabError> {
        MomentumGrid::continuum(self.d, self.m).map_err(|e| field("m", e.to_string()))
    }

    pub fn initial_profile(&self, grid: MomentumGrid) -> Result<InitialProfile, LabError> {
        let built = match &self.profile {
            ProfileConfig::FermiDirac { beta, mu } => InitialProfile::fermi_dirac(grid, *beta, *mu),
            ProfileConfig::Constant { c } => InitialProfile::constant(grid, *c),
            ProfileConfig::Bump {
                centre,
                width,
                height,
            } => {
                if !(0.0..=1.0).contains(height) {
                    return Err(field(
                        "profile.height",
                        format!("must lie in [0, 1], got {height}"),
                    ));
                }
                let bump = gaussian_bump(grid.as_spec(), centre, *width)
                    .map_err(|e| field("profile", e.to_string()))?;
                let peak = bump.values().iter().map(|z| z.re).fold(0.0, f64::max);
                let values = bump.values().iter().map(|z| height * z.re / peak).collect();
                InitialProfile::from_values(grid, values)
            }
        };
        built.map_err(|e| field("profile", e.to_string()))
    }

    /// SHA-256 of the canonical JSON of everything that affects results
    /// (`out` and `workers` excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.workers = None;
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Checks every field used by `kind` before any computation starts.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), LabError> {
        use ExperimentKind::*;
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(field("workers", "must be at least 1"));
            }
        }
        positive("budget_seconds", self.budget_seconds)?;
        let needs_lattice = matches!(kind, Evolve | Density | Wick | Quasifree | Converge);
        let needs_grid = matches!(kind, Boltzmann | Dos | Converge);
        if needs_lattice {
            let spec = self.lattice()?;
            self.initial_profile(spec.dual_grid())?;
            positive("dt", self.dt)?;
            if self.etas.is_empty() {
                return Err(field("etas", "must not be empty"));
            }
            for (i, &eta) in self.etas.iter().enumerate() {
                if !(eta.is_finite() && eta >= 0.0) {
                    return Err(field(
                        &format!("etas[{i}]"),
                        format!("must be finite and >= 0, got {eta}"),
                    ));
                }
            }
            if self.realizations == 0 {
                return Err(field("realizations", "must be at least 1"));
            }
            if self.phases == 0 {
                return Err(field("phases", "must be at least 1"));
            }
        }
        if needs_grid {
            let grid = self.continuum()?;
            self.initial_profile(grid)?;
            if self.n_bins < 2 {
                return Err(field(
                    "n_bins",
                    format!("must be at least 2, got {}", self.n_bins),
                ));
            }
        }
        match kind {
            Evolve | Wick => {
                if !(self.t.is_finite() && self.t >= 0.0) {
                    return Err(field(
                        "t",
                        format!("must be finite and >= 0, got {}", self.t),
                    ));
                }
                positive("packet_width", self.packet_width)?;
            }
            Density | Quasifree | Converge | Boltzmann => {
                if !(self.macro_time.is_finite() && self.macro_time >= 0.0) {
                    return Err(field(
                        "macro_time",
                        format!("must be finite and >= 0, got {}", self.macro_time),
                    ));
                }
            }
            _ => {}
        }
        if matches!(kind, Density | Quasifree | Converge) && self.etas.iter().any(|&e| e == 0.0) {
            return Err(field("etas", "t = T/η² needs η > 0"));
        }
        match kind {
            Boltzmann => {
                positive("ode_step", self.ode_step)?;
                if self.paths == 0 {
                    return Err(field("paths", "must be at least 1"));
                }
            }
            Diagrams => {
                if self.max_nbar > 5 {
                    return Err(field(
                        "max_nbar",
                        format!("at most 5, got {}", self.max_nbar),
                    ));
                }
            }
            Wick => {
                if self.d > 2 || self.side > 16 {
                    return Err(field("side", "wick amplitudes need d <= 2 and L <= 16"));
                }
                if self.wick.orders.is_empty() {
                    return Err(field("wick.orders", "must not be empty"));
                }
                for &(n, nt) in &self.wick.orders {
                    if n + nt > 4 {
                        return Err(field(
                            "wick.orders",
                            format!("n + ñ = {} exceeds 4", n + nt),
                        ));
                    }
                }
                positive("wick.h", self.wick.h)?;
                positive("wick.width", self.wick.width)?;
            }
            Quasifree => {
                let q = &self.quasifree;
                let r = q.f_centres.len();
                if r == 0 || r != q.g_centres.len() {
                    return Err(field(
                        "quasifree.g_centres",
                        format!(
                            "need r >= 1 centres for f and g, got {} and {}",
                            r,
                            q.g_centres.len()
                        ),
                    ));
                }
                if r > kinetic_core::quasifree::DEFAULT_MAX_R {
                    return Err(field("quasifree.f_centres", format!("r = {r} exceeds 4")));
                }
                positive("quasifree.width", q.width)?;
            }
            Converge => {
                if self.etas.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(field("etas", "must be sorted strictly decreasing"));
                }
                positive("macro_time", self.macro_time)?;
                if self.realizations < 3 {
                    return Err(field("realizations", "converge needs at least 3"));
                }
            }
            Schedule => {
                if self.schedule.epsilons.is_empty() {
                    return Err(field("schedule.epsilons", "must not be empty"));
                }
                let bound = (-std::f64::consts::E).exp();
                for (i, &e) in self.schedule.epsilons.iter().enumerate() {
                    if !(e > 0.0 && e < bound) {
                        return Err(field(
                            &format!("schedule.epsilons[{i}]"),
                            format!("must lie in (0, e^-e), got {e}"),
                        ));
                    }
                }
                if self.schedule.r == 0 {
                    return Err(field("schedule.r", "must be at least 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
