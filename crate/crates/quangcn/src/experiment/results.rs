//! Run artifacts on disk.
//!
//! A finished run directory holds:
//!   result.txt            deterministic summary (config echo, per-seed rows,
//!                         aggregates); byte-identical across repeat runs
//!   seeds.csv             the per-seed table alone, for spreadsheets
//!   meta.txt              timing and environment notes, excluded from any
//!                         byte comparison
//!   checkpoint_seed{K}.bin  trained parameters per seed
//!
//! result.txt is both human-readable and the machine interface for the
//! eval and table commands, so the writer and parser live side by side.

use std::path::Path;

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::run::SeedOutcome;

pub const RESULT_FILE: &str = "result.txt";
pub const CSV_FILE: &str = "seeds.csv";
pub const META_FILE: &str = "meta.txt";
pub const RESULT_FORMAT: u32 = 1;

pub fn checkpoint_file(seed: u64) -> String {
    format!("checkpoint_seed{seed}.bin")
}

const CSV_HEADER: &str =
    "seed,train_acc,val_acc,test_acc,noisy_test_acc,best_epoch,final_loss,flagged";

/// Sample mean and (n-1)-normalized standard deviation; the deviation is
/// absent for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    if values.is_empty() {
        return (f64::NAN, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

fn row_line(o: &SeedOutcome) -> String {
    let noisy = match o.noisy_test_acc {
        Some(v) => format!("{v}"),
        None => String::new(),
    };
    format!(
        "{},{},{},{},{},{},{},{}",
        o.seed, o.train_acc, o.val_acc, o.test_acc, noisy, o.best_epoch, o.final_loss, o.flagged
    )
}

pub fn render_csv(outcomes: &[SeedOutcome]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for o in outcomes {
        out.push_str(&row_line(o));
        out.push('\n');
    }
    out
}

pub fn render_result(cfg: &RunConfig, outcomes: &[SeedOutcome]) -> String {
    let mut out = String::new();
    out.push_str(&format!("format = {RESULT_FORMAT}\n"));
    out.push_str(&format!("code_version = {}\n\n", env!("CARGO_PKG_VERSION")));

    out.push_str("[config]\n");
    for (k, v) in cfg.echo() {
        out.push_str(&format!("{k} = {v}\n"));
    }

    out.push_str("\n[seeds]\n");
    out.push_str(&render_csv(outcomes));

    out.push_str("\n[aggregate]\n");
    let used: Vec<&SeedOutcome> = outcomes.iter().filter(|o| !o.flagged).collect();
    out.push_str(&format!("seeds_total = {}\n", outcomes.len()));
    out.push_str(&format!("seeds_used = {}\n", used.len()));
    let mut push_stat = |name: &str, values: Vec<f64>| {
        if values.is_empty() {
            return;
        }
        let (mean, std) = mean_std(&values);
        out.push_str(&format!("{name}_mean = {mean}\n"));
        if let Some(std) = std {
            out.push_str(&format!("{name}_std = {std}\n"));
        }
    };
    push_stat("train_acc", used.iter().map(|o| o.train_acc).collect());
    push_stat("val_acc", used.iter().map(|o| o.val_acc).collect());
    push_stat("test_acc", used.iter().map(|o| o.test_acc).collect());
    push_stat(
        "noisy_test_acc",
        used.iter().filter_map(|o| o.noisy_test_acc).collect(),
    );
    out
}

/// Everything the other commands need back out of a result.txt.
#[derive(Debug, Clone)]
pub struct ParsedRun {
    pub code_version: String,
    pub config_pairs: Vec<(String, String)>,
    pub rows: Vec<SeedOutcome>,
}

impl ParsedRun {
    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config_pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_pairs(&self.config_pairs)
    }
}

fn parse_row(path: &str, lineno: usize, line: &str) -> Result<SeedOutcome> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected 8 comma-separated fields, got {}", fields.len()),
        ));
    }
    let bad = |what: &str| Error::parse(path, lineno, format!("bad {what} field"));
    let num = |i: usize, what: &str| -> Result<f64> {
        fields[i].parse::<f64>().map_err(|_| bad(what))
    };
    Ok(SeedOutcome {
        seed: fields[0].parse().map_err(|_| bad("seed"))?,
        train_acc: num(1, "train_acc")?,
        val_acc: num(2, "val_acc")?,
        test_acc: num(3, "test_acc")?,
        noisy_test_acc: if fields[4].is_empty() {
            None
        } else {
            Some(num(4, "noisy_test_acc")?)
        },
        best_epoch: fields[5].parse().map_err(|_| bad("best_epoch"))?,
        final_loss: num(6, "final_loss")?,
        flagged: match fields[7] {
            "true" => true,
            "false" => false,
            _ => return Err(bad("flagged")),
        },
    })
}

pub fn parse_result(path: &Path) -> Result<ParsedRun> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let name = path.display().to_string();
    let mut section = String::new();
    let mut code_version = String::new();
    let mut config_pairs = Vec::new();
    let mut rows = Vec::new();
    let mut saw_format = false;
    let mut saw_seed_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(sec) = rest.strip_suffix(']') else {
                return Err(Error::parse(&name, lineno, "unterminated section header"));
            };
            section = sec.to_string();
            continue;
        }
        match section.as_str() {
            "" => {
                let Some((k, v)) = line.split_once('=') else {
                    return Err(Error::parse(&name, lineno, "expected key = value"));
                };
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "format" => {
                        let got: u32 = v
                            .parse()
                            .map_err(|_| Error::parse(&name, lineno, "bad format number"))?;
                        if got != RESULT_FORMAT {
                            return Err(Error::Version(format!(
                                "{name}: result format {got} is not supported (expected {RESULT_FORMAT})"
                            )));
                        }
                        saw_format = true;
                    }
                    "code_version" => code_version = v.to_string(),
                    other => {
                        return Err(Error::parse(
                            &name,
                            lineno,
                            format!("unexpected preamble key {other:?}"),
                        ));
                    }
                }
            }
            "config" => {
                let Some((k, v)) = line.split_once('=') else {
                    return Err(Error::parse(&name, lineno, "expected key = value"));
                };
                config_pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
            "seeds" => {
                if !saw_seed_header {
                    if line != CSV_HEADER {
                        return Err(Error::parse(&name, lineno, "unexpected seeds header"));
                    }
                    saw_seed_header = true;
                } else {
                    rows.push(parse_row(&name, lineno, line)?);
                }
            }
            "aggregate" => {} // derived from the rows; ignored on the way in
            other => {
                return Err(Error::parse(
                    &name,
                    lineno,
                    format!("unknown section [{other}]"),
                ));
            }
        }
    }
    if !saw_format {
        return Err(Error::parse(&name, 1, "missing format line"));
    }
    if config_pairs.is_empty() {
        return Err(Error::parse(&name, 1, "missing [config] section"));
    }
    if rows.is_empty() {
        return Err(Error::parse(&name, 1, "no seed rows"));
    }
    Ok(ParsedRun {
        code_version,
        config_pairs,
        rows,
    })
}

pub fn write_run(
    out_dir: &Path,
    cfg: &RunConfig,
    outcomes: &[SeedOutcome],
    wall_secs: f64,
) -> Result<()> {
    let write = |file: &str, text: &str| -> Result<()> {
        let path = out_dir.join(file);
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    };
    write(RESULT_FILE, &render_result(cfg, outcomes))?;
    write(CSV_FILE, &render_csv(outcomes))?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write(
        META_FILE,
        &format!("timestamp_unix = {stamp}\nwall_clock_secs = {wall_secs:.3}\n"),
    )
}
