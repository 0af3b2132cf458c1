//! Cross-run summary tables.
//!
//! `model-comparison` lines up one finished run per model family;
//! `mitigation` lines up quantum-graph runs by their robustness knobs
//! (gate injection, measurement skip connection, sparse-angle penalty).
//! Rows are identified from each run's embedded config echo, so directory
//! names carry no meaning. Accuracies are percentages, mean over the
//! unflagged seeds with the (n-1) deviation when there is more than one.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{ModelKind, ALL_MODEL_KINDS};

use super::results::{self, mean_std, parse_result, ParsedRun};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    /// One row per model family, in fixed order.
    ModelComparison,
    /// Quantum-graph robustness rows: baseline, inject, skip, sparse,
    /// skip+sparse.
    Mitigation,
}

impl TableKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "models" | "model-comparison" => Ok(TableKind::ModelComparison),
            "mitigation" => Ok(TableKind::Mitigation),
            other => Err(Error::config(format!(
                "unknown table {other:?}; expected models or mitigation"
            ))),
        }
    }

    fn csv_name(&self) -> &'static str {
        match self {
            TableKind::ModelComparison => "models.csv",
            TableKind::Mitigation => "mitigation.csv",
        }
    }

    fn row_label_header(&self) -> &'static str {
        match self {
            TableKind::ModelComparison => "model",
            TableKind::Mitigation => "variant",
        }
    }
}

/// Accuracy statistics for one run, in percent.
#[derive(Clone, Debug)]
struct RunStats {
    label: String,
    dir: PathBuf,
    n: usize,
    test_mean: f64,
    test_std: Option<f64>,
    noisy_mean: Option<f64>,
    noisy_std: Option<f64>,
}

fn stats_from(parsed: &ParsedRun, label: String, dir: &Path) -> Result<RunStats> {
    let used: Vec<_> = parsed.rows.iter().filter(|r| !r.flagged).collect();
    if used.is_empty() {
        return Err(Error::MissingRuns(format!(
            "{}: every seed is flagged, no usable scores",
            dir.display()
        )));
    }
    let (tm, ts) = mean_std(&used.iter().map(|r| r.test_acc * 100.0).collect::<Vec<_>>());
    let noisy: Vec<f64> = used
        .iter()
        .filter_map(|r| r.noisy_test_acc)
        .map(|v| v * 100.0)
        .collect();
    let (nm, ns) = if noisy.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&noisy);
        (Some(m), s)
    };
    Ok(RunStats {
        label,
        dir: dir.to_path_buf(),
        n: used.len(),
        test_mean: tm,
        test_std: ts,
        noisy_mean: nm,
        noisy_std: ns,
    })
}

/// Mitigation-table row identity from the run's robustness knobs, or None
/// when the run belongs to no row (wrong model family, or a knob
/// combination the table does not chart).
fn mitigation_label_opt(parsed: &ParsedRun) -> Result<Option<&'static str>> {
    let cfg = parsed.config()?;
    if cfg.model != ModelKind::QuanGcn {
        return Ok(None);
    }
    let sparse = cfg.sparse_lambda > 0.0;
    Ok(match (cfg.inject, cfg.skip, sparse) {
        (false, false, false) => Some("baseline"),
        (true, false, false) => Some("inject"),
        (false, true, false) => Some("skip"),
        (false, false, true) => Some("sparse"),
        (false, true, true) => Some("skip+sparse"),
        _ => None,
    })
}

/// Strict form for explicitly listed run directories: every run must map to
/// a row.
fn mitigation_label(parsed: &ParsedRun, dir: &Path) -> Result<String> {
    match mitigation_label_opt(parsed)? {
        Some(label) => Ok(label.to_string()),
        None => {
            let cfg = parsed.config()?;
            if cfg.model != ModelKind::QuanGcn {
                Err(Error::config(format!(
                    "{}: mitigation table expects quangcn runs, found {}",
                    dir.display(),
                    cfg.model.name()
                )))
            } else {
                Err(Error::config(format!(
                    "{}: knob combination (inject={}, skip={}, sparse_lambda={}) matches no table row",
                    dir.display(),
                    cfg.inject,
                    cfg.skip,
                    cfg.sparse_lambda
                )))
            }
        }
    }
}

const MITIGATION_ROWS: [&str; 5] = ["baseline", "inject", "skip", "sparse", "skip+sparse"];

fn fmt_cell(mean: Option<f64>, std: Option<f64>) -> String {
    match mean {
        None => "-".to_string(),
        Some(m) => match std {
            Some(s) => format!("{m:.2} ± {s:.2}"),
            None => format!("{m:.2}"),
        },
    }
}

fn render_text(kind: TableKind, rows: &[RunStats]) -> String {
    let headers = [kind.row_label_header(), "test acc (%)", "noisy test acc (%)", "seeds"];
    let mut cells: Vec<[String; 4]> = Vec::new();
    for r in rows {
        cells.push([
            r.label.clone(),
            fmt_cell(Some(r.test_mean), r.test_std),
            fmt_cell(r.noisy_mean, r.noisy_std),
            r.n.to_string(),
        ]);
    }
    let mut widths = [0usize; 4];
    for (i, h) in headers.iter().enumerate() {
        widths[i] = h.chars().count();
    }
    for row in &cells {
        for (i, c) in row.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cols: [&str; 4], out: &mut String| {
        for (i, c) in cols.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            out.push_str(c);
            out.push_str(&" ".repeat(pad));
            out.push_str(if i + 1 < cols.len() { "  " } else { "" });
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    line([headers[0], headers[1], headers[2], headers[3]], &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(
        [rule[0].as_str(), rule[1].as_str(), rule[2].as_str(), rule[3].as_str()],
        &mut out,
    );
    for row in &cells {
        line(
            [row[0].as_str(), row[1].as_str(), row[2].as_str(), row[3].as_str()],
            &mut out,
        );
    }
    out
}

fn render_csv(kind: TableKind, rows: &[RunStats]) -> String {
    let mut out = format!(
        "{},test_mean,test_std,noisy_mean,noisy_std,seeds\n",
        kind.row_label_header()
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.label,
            r.test_mean,
            opt(r.test_std),
            opt(r.noisy_mean),
            opt(r.noisy_std),
            r.n
        );
    }
    out
}

fn order_rows(
    kind: TableKind,
    mut found: Vec<RunStats>,
    expected: &[&str],
) -> Result<Vec<RunStats>> {
    let mut ordered = Vec::with_capacity(expected.len());
    let mut missing = Vec::new();
    for want in expected {
        match found.iter().position(|r| r.label == *want) {
            Some(at) => ordered.push(found.remove(at)),
            None => missing.push(*want),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingRuns(format!(
            "{} table needs runs for: {}",
            match kind {
                TableKind::ModelComparison => "model-comparison",
                TableKind::Mitigation => "mitigation",
            },
            missing.join(", ")
        )));
    }
    Ok(ordered)
}

/// Scans a results root for run directories (immediate subdirectories
/// holding a result.txt, taken in name order) and builds the requested
/// table from them. A scanned root may hold runs for several tables, so
/// runs that belong to no row of the requested one are passed over; only
/// absent rows are an error.
pub fn cmd_table(kind: TableKind, results_root: &Path, csv_dir: Option<&Path>) -> Result<String> {
    let entries = std::fs::read_dir(results_root)
        .map_err(|e| Error::io(results_root.display().to_string(), e))?;
    let mut run_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(results::RESULT_FILE).is_file())
        .collect();
    run_dirs.sort();
    if kind == TableKind::Mitigation {
        let mut kept = Vec::new();
        for dir in run_dirs {
            let parsed = parse_result(&dir.join(results::RESULT_FILE))?;
            if mitigation_label_opt(&parsed)?.is_some() {
                kept.push(dir);
            }
        }
        run_dirs = kept;
    }
    table_from_runs(kind, &run_dirs, csv_dir)
}

/// Builds the requested table from explicit finished run directories.
/// Returns the rendered text table and writes a machine-readable CSV when
/// `csv_dir` is given.
pub fn table_from_runs(
    kind: TableKind,
    run_dirs: &[PathBuf],
    csv_dir: Option<&Path>,
) -> Result<String> {
    if run_dirs.is_empty() {
        let expected: Vec<&str> = match kind {
            TableKind::ModelComparison => ALL_MODEL_KINDS.iter().map(|k| k.name()).collect(),
            TableKind::Mitigation => MITIGATION_ROWS.to_vec(),
        };
        return Err(Error::MissingRuns(format!(
            "no run directories found; need runs for: {}",
            expected.join(", ")
        )));
    }
    let mut found: Vec<RunStats> = Vec::new();
    for dir in run_dirs {
        let parsed = parse_result(&dir.join(results::RESULT_FILE))?;
        let label = match kind {
            TableKind::ModelComparison => {
                let cfg = parsed.config()?;
                cfg.model.name().to_string()
            }
            TableKind::Mitigation => mitigation_label(&parsed, dir)?,
        };
        if let Some(prior) = found.iter().find(|r| r.label == label) {
            return Err(Error::config(format!(
                "both {} and {} provide the {label:?} row",
                prior.dir.display(),
                dir.display()
            )));
        }
        found.push(stats_from(&parsed, label, dir)?);
    }
    let expected: Vec<&str> = match kind {
        TableKind::ModelComparison => ALL_MODEL_KINDS.iter().map(|k| k.name()).collect(),
        TableKind::Mitigation => MITIGATION_ROWS.to_vec(),
    };
    let rows = order_rows(kind, found, &expected)?;
    let text = render_text(kind, &rows);
    if let Some(dir) = csv_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join(kind.csv_name());
        std::fs::write(&path, render_csv(kind, &rows))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(text)
}
