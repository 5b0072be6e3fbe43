//! Gnuplot script with inline data blocks, built from the CSV files of a run
//! directory (top level or one level of experiment subdirectories).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::LabError;

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Result<Self, LabError> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| LabError::Missing(format!("{} is empty", path.display())))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str, path: &Path) -> Result<usize, LabError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::Missing(format!("column {name} in {}", path.display())))
    }

    /// Space-separated columns, rows grouped by the value of `group` (if
    /// any) with two blank lines between groups, as gnuplot's `index` expects.
    fn block(
        &self,
        path: &Path,
        cols: &[&str],
        group: Option<&str>,
    ) -> Result<(String, Vec<String>), LabError> {
        let idx: Vec<usize> = cols
            .iter()
            .map(|c| self.col(c, path))
            .collect::<Result<_, _>>()?;
        let g = group.map(|c| self.col(c, path)).transpose()?;
        let mut groups: Vec<(String, String)> = Vec::new();
        for row in &self.rows {
            let key = g.map(|k| row[k].clone()).unwrap_or_default();
            if groups.last().map(|(k, _)| k != &key).unwrap_or(true) {
                groups.push((key.clone(), String::new()));
            }
            let line: Vec<&str> = idx.iter().map(|&i| row[i].as_str()).collect();
            let body = &mut groups.last_mut().expect("group pushed").1;
            body.push_str(&line.join(" "));
            body.push('\n');
        }
        let keys = groups.iter().map(|(k, _)| k.clone()).collect();
        let text = groups
            .into_iter()
            .map(|(_, b)| b)
            .collect::<Vec<_>>()
            .join("\n\n");
        Ok((text, keys))
    }
}

fn find_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, LabError> {
    let mut found = BTreeMap::new();
    let mut scan = |d: &Path, prefix: &str| -> Result<Vec<PathBuf>, LabError> {
        let mut subdirs = Vec::new();
        let mut entries: Vec<_> = fs::read_dir(d)
            .map_err(|e| LabError::io(d, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                subdirs.push(p);
            } else if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
                if name.ends_with(".csv") {
                    found.insert(format!("{prefix}{name}"), p.clone());
                }
            }
        }
        Ok(subdirs)
    };
    for sub in scan(dir, "")? {
        let prefix = format!(
            "{}/",
            sub.file_name().and_then(|n| n.to_str()).unwrap_or_default()
        );
        scan(&sub, &prefix)?;
    }
    Ok(found)
}

fn data_block(script: &mut String, name: &str, comment: &str, body: &str) {
    let _ = writeln!(script, "# {comment}");
    let _ = writeln!(script, "${name} << EOD");
    script.push_str(body);
    if !body.ends_with('\n') {
        script.push('\n');
    }
    let _ = writeln!(script, "EOD\n");
}

/// Writes `plot.gp` into `dir` and returns its path. Plots err(η) curves,
/// distributions against energy, densities of states and gap-vs-η tables for
/// whichever of these the run produced.
pub fn emit_plots(dir: &Path) -> Result<PathBuf, LabError> {
    if !dir.is_dir() {
        return Err(LabError::Missing(format!(
            "run directory {}",
            dir.display()
        )));
    }
    let files = find_files(dir)?;
    let mut script = String::from("# gnuplot script written by kinlab plot\nset datafile separator whitespace\nset terminal pngcairo size 900,600\n\n");
    let mut plots = Vec::new();
    let mut n = 0;
    for (rel, path) in &files {
        let file = rel.rsplit('/').next().unwrap_or(rel);
        let stem = rel.trim_end_matches(".csv").replace('/', "_");
        let csv = Csv::read(path)?;
        let block = format!("{stem}_{n}");
        n += 1;
        match file {
            "err.csv" => {
                let (body, _) = csv.block(path, &["eta", "err", "err_stderr"], None)?;
                data_block(&mut script, &block, "eta err err_stderr", &body);
                plots.push(format!(
                    "set output '{stem}.png'\nset logscale xy\nset xlabel 'eta'\nset ylabel 'weighted L2 error'\nplot ${block} using 1:2:3 with yerrorlines title 'err(eta)'\nunset logscale\n"
                ));
            }
            "distributions.csv" => {
                let (body, keys) = csv.block(
                    path,
                    &["E", "F_empirical", "std_error", "F_boltzmann"],
                    Some("eta"),
                )?;
                data_block(
                    &mut script,
                    &block,
                    "E F_empirical std_error F_boltzmann, one index per eta",
                    &body,
                );
                let mut cmd =
                    format!("set output '{stem}.png'\nset xlabel 'E(p)'\nset ylabel 'F'\nplot ");
                let parts: Vec<String> = keys
                    .iter()
                    .enumerate()
                    .map(|(i, eta)| format!("${block} index {i} using 1:2 with points pt 7 ps 0.3 title 'empirical eta={eta}'"))
                    .chain(std::iter::once(format!(
                        "${block} index 0 using 1:4 with points pt 6 ps 0.5 title 'Boltzmann F_T'"
                    )))
                    .collect();
                cmd.push_str(&parts.join(", \\\n     "));
                cmd.push('\n');
                plots.push(cmd);
            }
            "dos.csv" => {
                let (body, _) = csv.block(path, &["E_center", "nu"], None)?;
                data_block(&mut script, &block, "E_center nu", &body);
                plots.push(format!(
                    "set output '{stem}.png'\nset xlabel 'E'\nset ylabel 'density of states'\nplot ${block} using 1:2 with steps title 'nu(E)'\n"
                ));
            }
            "gap.csv" => {
                let (body, _) = csv.block(path, &["eta", "gap", "stderr"], None)?;
                data_block(&mut script, &block, "eta gap stderr", &body);
                plots.push(format!(
                    "set output '{stem}.png'\nset logscale xy\nset xlabel 'eta'\nset ylabel '|E det M - det E M|'\nplot ${block} using 1:2:3 with yerrorlines title 'gap(eta)'\nunset logscale\n"
                ));
            }
            _ => {}
        }
    }
    if plots.is_empty() {
        return Err(LabError::Missing(format!(
            "no err.csv, distributions.csv, dos.csv or gap.csv under {}",
            dir.display()
        )));
    }
    for p in plots {
        script.push_str(&p);
        script.push('\n');
    }
    let out = dir.join("plot.gp");
    fs::write(&out, script).map_err(|e| LabError::io(&out, e))?;
    Ok(out)
}
