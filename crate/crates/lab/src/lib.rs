//! Experiment runner on top of `kinetic-core`: validated JSON configs, one
//! function per experiment kind, staged output directories with a manifest,
//! and gnuplot scripts.

pub mod config;
pub mod convergence;
pub mod experiments;
pub mod output;
pub mod plots;

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{Check, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Core(#[from] kinetic_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing input: {0}")]
    Missing(String),
}

impl LabError {
    /// 2 for anything the user can fix in the config or arguments, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } | LabError::Missing(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Overwrite a completed run directory and ignore the time budget.
    pub force: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Runs `kinds` under `cfg` and writes one run directory named
/// `<label>-<config hash prefix>`. A single kind writes its files at the top
/// level, several kinds (the suite) write one subdirectory each.
pub fn run(
    label: &str,
    kinds: &[ExperimentKind],
    cfg: &ExperimentConfig,
    opts: RunOptions,
) -> Result<RunSummary, LabError> {
    for &kind in kinds {
        cfg.validate(kind)?;
    }
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(LabError::Config {
                field: "workers".into(),
                reason: "must be at least 1".into(),
            });
        }
    }
    let estimate: f64 = kinds
        .iter()
        .map(|&k| experiments::estimate_seconds(k, cfg))
        .sum();
    if estimate > cfg.budget_seconds && !opts.force {
        return Err(LabError::Config {
            field: "budget_seconds".into(),
            reason: format!(
                "estimated {estimate:.0} s exceeds the budget of {} s; raise it or pass --force",
                cfg.budget_seconds
            ),
        });
    }

    let hash = cfg.hash();
    let name = format!("{label}-{}", &hash[..16]);
    let mut writer = output::RunWriter::create(&cfg.out, &name, opts.force)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| LabError::Config {
        field: "workers".into(),
        reason: e.to_string(),
    })?;

    let nested = kinds.len() > 1 || label == "suite";
    let mut records = Vec::new();
    let mut all_checks = Vec::new();
    for &kind in kinds {
        let start = Instant::now();
        let outcome = pool.install(|| experiments::run(kind, cfg))?;
        let wall = start.elapsed().as_secs_f64();
        let mut files = Vec::new();
        for (file, bytes) in &outcome.files {
            let rel = if nested {
                format!("{kind}/{file}")
            } else {
                file.clone()
            };
            files.push(writer.write(&rel, bytes)?);
        }
        records.push(json!({
            "kind": kind,
            "wall_seconds": wall,
            "summary": outcome.summary,
            "checks": outcome.checks,
            "files": files,
        }));
        all_checks.extend(outcome.checks.iter().map(|c| Check {
            name: format!("{kind}.{}", c.name),
            ..c.clone()
        }));
    }
    let passed = all_checks.iter().all(|c| c.passed);
    let manifest = json!({
        "tool": "kinlab",
        "version": env!("CARGO_PKG_VERSION"),
        "label": label,
        "config_hash": hash,
        "config": cfg,
        "seed": cfg.seed,
        "workers": pool.current_num_threads(),
        "estimated_seconds": estimate,
        "experiments": records,
        "passed": passed,
    });
    let dir = writer.finish(manifest)?;
    Ok(RunSummary {
        dir,
        passed,
        checks: all_checks,
    })
}
