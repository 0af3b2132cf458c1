//! Experiment orchestration: run configuration, the per-seed training
//! driver, result/checkpoint files, re-evaluation under noise presets, and
//! cross-run summary tables.

pub mod checkpoint;
pub mod config;
pub mod results;
pub mod run;
pub mod table;

use std::path::Path;

use crate::data::synthetic;
use crate::data::tu::load_tu_dataset;
use crate::data::GraphDataset;
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{parse_seeds, NoiseSpec, RunConfig, DATA_ROOT_ENV, DEFAULT_DATA_ROOT};
pub use results::{parse_result, ParsedRun, CSV_FILE, META_FILE, RESULT_FILE};
pub use run::{cmd_eval, cmd_train, prepared_view, train_seed, SeedOutcome};
pub use table::{cmd_table, table_from_runs, TableKind};

/// Finds a dataset by name: a directory `<data_root>/<name>` holding TU
/// text files wins; otherwise the built-in synthetic corpus answers to its
/// own name. The second value describes where the data came from.
pub fn resolve_dataset(data_root: &Path, name: &str) -> Result<(GraphDataset, String)> {
    let dir = data_root.join(name);
    if dir.is_dir() {
        let ds = load_tu_dataset(&dir, name)?;
        return Ok((ds, format!("TU files at {}", dir.display())));
    }
    if name == synthetic::BUILTIN_NAME {
        return Ok((synthetic::standard_corpus(), "built-in corpus".to_string()));
    }
    Err(Error::config(format!(
        "dataset {name:?} not found: no directory {} and no built-in corpus by that name",
        dir.display()
    )))
}

/// Human-readable dataset summary for the inspect command.
pub fn describe_dataset(ds: &GraphDataset, source: &str) -> String {
    let mut nodes: Vec<usize> = ds.graphs.iter().map(|g| g.n()).collect();
    nodes.sort_unstable();
    let edges: usize = ds.graphs.iter().map(|g| g.num_edges()).sum();
    let mean_nodes = nodes.iter().sum::<usize>() as f64 / ds.len().max(1) as f64;
    let mut out = format!(
        "dataset {} ({source})\n  graphs: {}\n  classes: {}\n  features: {}\n",
        ds.name,
        ds.len(),
        ds.num_classes,
        ds.feature_kind.describe()
    );
    out.push_str(&format!(
        "  nodes per graph: min {}, mean {:.1}, max {}\n  undirected edges total: {}\n",
        nodes.first().copied().unwrap_or(0),
        mean_nodes,
        nodes.last().copied().unwrap_or(0),
        edges
    ));
    out.push_str("  class histogram:\n");
    for (class, count) in ds.class_counts().iter().enumerate() {
        out.push_str(&format!(
            "    class {class} (label {}): {count} graphs\n",
            ds.label_values[class]
        ));
    }
    out.push_str(&format!("  majority rate: {:.4}\n", ds.majority_rate()));
    out
}
