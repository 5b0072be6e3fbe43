use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinetic_lab::config::{ExperimentConfig, ExperimentKind, ProfileConfig};
use kinetic_lab::experiments;
use serde_json::Value;

fn kinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Writes `json` as a config file in `dir` and returns its path.
fn config(dir: &Path, json: &str) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_dir(o: &Output) -> PathBuf {
    let stdout = String::from_utf8_lossy(&o.stdout);
    PathBuf::from(stdout.lines().last().expect("run dir printed"))
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL: &str = r#"{"d":1,"side":8,"m":8,"n_bins":8,"etas":[0.5,0.25],"macro_time":0.5,
  "t":1.0,"dt":0.05,"realizations":40,"paths":300,"max_nbar":3}"#;

#[test]
fn empty_suite_exits_zero_with_empty_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = kinlab(&["suite", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    let m = manifest(&dir);
    assert_eq!(m["experiments"].as_array().unwrap().len(), 0);
    assert_eq!(m["files"].as_array().unwrap().len(), 0);
    assert_eq!(m["passed"], true);
    assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
}

#[test]
fn schedule_manifest_has_n_kappa_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#"{"schedule":{"epsilons":[1e-12],"r":1}}"#);
    let out = tmp.path().join("runs");
    let o = kinlab(&["schedule", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let m = manifest(&run_dir(&o));
    let s = &m["experiments"][0]["summary"]["schedules"][0];
    assert_eq!(s["epsilon"], 1e-12);
    assert!(s["n"].as_f64().unwrap() > 0.0);
    assert!(s["kappa"].as_f64().unwrap() > 1.0);
    for f in ["factorial_lower", "factorial_upper", "kappa_power"] {
        assert!(s["flags"][f].is_boolean(), "{f}");
    }
    assert_eq!(m["config"]["schedule"]["epsilons"][0], 1e-12);
    assert!(m["version"].is_string() && m["seed"].is_u64());
}

#[test]
fn converge_writes_three_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), SMALL);
    let out = tmp.path().join("runs");
    let o = kinlab(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["distributions.csv", "err.csv", "manifest.json"]);
    let m = manifest(&dir);
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(dir.join(f["path"].as_str().unwrap())).unwrap();
        use sha2::Digest;
        assert_eq!(f["sha256"], hex::encode(sha2::Sha256::digest(&bytes)));
    }
    assert!(dir
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .starts_with("converge-"));
    assert!(m["config_hash"]
        .as_str()
        .unwrap()
        .starts_with(&dir.file_name().unwrap().to_str().unwrap()[9..]));
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut all = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                all.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    all.sort();
    all
}

const ALL_KINDS: &str = r#""experiments":["evolve","density","boltzmann","dos","diagrams","wick","quasifree","converge","schedule"]"#;

#[test]
fn csv_output_is_identical_for_one_and_eight_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        &SMALL.replacen('{', &format!("{{{ALL_KINDS},"), 1),
    );
    let mut outputs = Vec::new();
    for w in ["1", "8"] {
        let out = tmp.path().join(format!("w{w}"));
        let o = kinlab(&[
            "suite",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            w,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let dir = run_dir(&o);
        assert_eq!(manifest(&dir)["workers"], w.parse::<u64>().unwrap());
        outputs.push(read_csvs(&dir));
    }
    assert_eq!(outputs[0].len(), 11);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn every_csv_parses_as_rfc4180() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        &SMALL.replacen('{', &format!("{{{ALL_KINDS},"), 1),
    );
    let out = tmp.path().join("runs");
    let o = kinlab(&["suite", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text_columns = ["pairing", "label"];
    for (name, bytes) in read_csvs(&run_dir(&o)) {
        assert!(std::str::from_utf8(&bytes).is_ok(), "{name} is not UTF-8");
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(&bytes[..]);
        let header = r.headers().unwrap().clone();
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec.unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(rec.len(), header.len(), "{name}");
            for (h, cell) in header.iter().zip(rec.iter()) {
                if !text_columns.contains(&h) {
                    let x: f64 = cell
                        .parse()
                        .unwrap_or_else(|_| panic!("{name}: {h} = {cell:?}"));
                    assert!(x.is_finite(), "{name}: {h} = {cell}");
                }
            }
            rows += 1;
        }
        assert!(rows > 0, "{name} has no rows");
    }
}

#[test]
fn config_errors_exit_two_with_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let out = out.to_str().unwrap();
    for (json, kind, field) in [
        (r#"{"d":0}"#, "evolve", "side"),
        (r#"{"dt":-1}"#, "density", "dt"),
        (r#"{"etas":[0.2,0.4]}"#, "converge", "etas"),
        (r#"{"bogus":1}"#, "dos", "bogus"),
        (
            r#"{"schedule":{"epsilons":[0.5]}}"#,
            "schedule",
            "schedule.epsilons[0]",
        ),
        (
            r#"{"profile":{"type":"bump","centre":[0,0,0],"width":0.1,"height":2}}"#,
            "dos",
            "profile.height",
        ),
        (
            r#"{"wick":{"orders":[[3,3]]},"d":1,"side":8}"#,
            "wick",
            "wick.orders",
        ),
    ] {
        let cfg = config(tmp.path(), json);
        let o = kinlab(&[kind, "--config", &cfg, "--out", out]);
        assert_eq!(code(&o), 2, "{json}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{json}: {err}");
    }
    assert_eq!(
        code(&kinlab(&["evolve", "--workers", "0", "--out", out])),
        2
    );
    assert_eq!(code(&kinlab(&["nonsense"])), 2);
    assert_eq!(
        code(&kinlab(&["dos", "--config", "/does/not/exist.json"])),
        2
    );
    // nothing was computed or written
    assert!(!Path::new(out).exists());
}

#[test]
fn failed_assertion_exits_one_and_still_records_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    // an RK4 step this coarse misses the 1e-8 agreement
    let cfg = config(
        tmp.path(),
        r#"{"m":8,"n_bins":16,"ode_step":0.5,"paths":100}"#,
    );
    let out = tmp.path().join("runs");
    let o = kinlab(&[
        "boltzmann",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL boltzmann.exact_vs_ode"), "{stdout}");
    assert_eq!(manifest(&run_dir(&o))["passed"], false);
}

#[test]
fn budget_guard_and_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        r#"{"d":1,"side":8,"etas":[0.5],"budget_seconds":1e-9}"#,
    );
    let out = tmp.path().join("runs");
    let out = out.to_str().unwrap();
    let o = kinlab(&["density", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget_seconds"));
    assert_eq!(
        code(&kinlab(&[
            "density", "--config", &cfg, "--out", out, "--force"
        ])),
        0
    );
}

#[test]
fn completed_runs_are_never_overwritten_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let out = out.to_str().unwrap();
    let first = kinlab(&["dos", "--out", out, "--seed", "5"]);
    assert_eq!(code(&first), 0);
    let dir = run_dir(&first);
    let before = fs::read(dir.join("manifest.json")).unwrap();

    let again = kinlab(&["dos", "--out", out, "--seed", "5"]);
    assert_eq!(code(&again), 2);
    assert_eq!(fs::read(dir.join("manifest.json")).unwrap(), before);

    // a stale staging directory from an interrupted run does not block
    let name = dir.file_name().unwrap().to_str().unwrap();
    let partial = dir.with_file_name(format!("{name}.partial"));
    fs::create_dir_all(&partial).unwrap();
    fs::write(partial.join("junk.csv"), "x").unwrap();
    let forced = kinlab(&["dos", "--out", out, "--seed", "5", "--force"]);
    assert_eq!(code(&forced), 0);
    assert!(!partial.exists());
    assert!(!dir.join("junk.csv").exists());

    // a different seed is a different run
    let other = kinlab(&["dos", "--out", out, "--seed", "6"]);
    assert_eq!(code(&other), 0);
    assert_ne!(run_dir(&other), dir);
}

#[test]
fn plot_script_from_run_and_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let json = SMALL.replacen('{', r#"{"experiments":["dos","quasifree","converge"],"#, 1);
    let cfg = config(tmp.path(), &json);
    let out = tmp.path().join("runs");
    let o = kinlab(&["suite", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let dir = run_dir(&o);
    let p = kinlab(&["plot", dir.to_str().unwrap()]);
    assert_eq!(code(&p), 0);
    let script = fs::read_to_string(dir.join("plot.gp")).unwrap();
    for needle in [
        "$converge_err",
        "$converge_distributions",
        "$dos_dos",
        "$quasifree_gap",
        "EOD",
        "plot $",
    ] {
        assert!(script.contains(needle), "missing {needle}");
    }
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert_eq!(code(&kinlab(&["plot", empty.to_str().unwrap()])), 2);
    assert_eq!(code(&kinlab(&["plot", "/does/not/exist"])), 2);
}

#[test]
fn cli_flags_override_config_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), r#"{"seed":1,"out":"ignored"}"#);
    let out = tmp.path().join("runs");
    let o = kinlab(&[
        "dos",
        "--config",
        &cfg,
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let m = manifest(&run_dir(&o));
    assert_eq!(m["seed"], 42);
    assert!(run_dir(&o).starts_with(&out));
}

/// Constant J: both the microscopic density and the Boltzmann solution stay
/// equal to the constant, so the debiased error vanishes within its error.
#[test]
fn constant_profile_has_zero_error() {
    let cfg = ExperimentConfig {
        d: 2,
        side: 8,
        etas: vec![0.6, 0.3],
        macro_time: 0.5,
        realizations: 60,
        profile: ProfileConfig::Constant { c: 0.4 },
        ..ExperimentConfig::default()
    };
    let outcome = experiments::run(ExperimentKind::Converge, &cfg).unwrap();
    assert!(outcome.checks.iter().all(|c| c.passed));
    for row in outcome.summary["errors"].as_array().unwrap() {
        let e = row["err_sq"].as_f64().unwrap();
        let se = row["err_sq_stderr"].as_f64().unwrap();
        assert!(e.abs() < 3.0 * se, "err² = {e} ± {se}");
    }
}
