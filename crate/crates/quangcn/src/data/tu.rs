//! TUDataset text-format ingestion and canonical serialization.
//!
//! Layout, all indices 1-based: `NAME_A.txt` holds directed edge pairs
//! "i, j" which are symmetrized and deduplicated on load;
//! `NAME_graph_indicator.txt` line k names the graph of node k;
//! `NAME_graph_labels.txt` line g labels graph g. Optional
//! `NAME_node_labels.txt` (one integer per node, one-hot encoded) and
//! `NAME_node_attributes.txt` (comma-separated floats). If neither node file
//! exists, the single feature is the node degree normalized by the maximum
//! degree in the dataset. Whitespace around commas and a blank trailing line
//! are tolerated.

use ndarray::Array2;
use std::fs;
use std::path::Path;

use super::{FeatureKind, Graph, GraphDataset};
use crate::error::{Error, Result};

struct NumberedLines {
    path: String,
    lines: Vec<(usize, String)>,
}

fn read_lines(path: &Path) -> Result<NumberedLines> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    Ok(NumberedLines {
        path: path.display().to_string(),
        lines,
    })
}

fn parse_int(token: &str, path: &str, line: usize) -> Result<i64> {
    token
        .trim()
        .parse::<i64>()
        .map_err(|_| Error::parse(path, line, format!("expected an integer, got {token:?}")))
}

fn parse_float(token: &str, path: &str, line: usize) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("expected a number, got {token:?}")))
}

pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator = read_lines(&file("graph_indicator"))?;
    let mut node_graph = Vec::with_capacity(indicator.lines.len());
    for (line, text) in &indicator.lines {
        let g = parse_int(text, &indicator.path, *line)?;
        if g < 1 {
            return Err(Error::parse(
                &indicator.path,
                *line,
                format!("graph ids are 1-based, got {g}"),
            ));
        }
        node_graph.push(g as usize);
    }
    let num_nodes = node_graph.len();
    if num_nodes == 0 {
        return Err(Error::config(format!("{}: no nodes", indicator.path)));
    }
    let num_graphs = *node_graph.iter().max().expect("non-empty");

    // Global 1-based node id -> (graph index, local node index).
    let mut local_of = Vec::with_capacity(num_nodes);
    let mut graph_sizes = vec![0usize; num_graphs];
    for &g in &node_graph {
        let gi = g - 1;
        local_of.push((gi, graph_sizes[gi]));
        graph_sizes[gi] += 1;
    }
    for (gi, &size) in graph_sizes.iter().enumerate() {
        if size == 0 {
            return Err(Error::config(format!(
                "{}: graph {} has no nodes",
                indicator.path,
                gi + 1
            )));
        }
    }

    let labels_file = read_lines(&file("graph_labels"))?;
    if labels_file.lines.len() != num_graphs {
        return Err(Error::config(format!(
            "{}: {} labels for {num_graphs} graphs",
            labels_file.path,
            labels_file.lines.len()
        )));
    }
    let mut original_labels = Vec::with_capacity(num_graphs);
    for (line, text) in &labels_file.lines {
        original_labels.push(parse_int(text, &labels_file.path, *line)?);
    }
    let mut label_values: Vec<i64> = original_labels.clone();
    label_values.sort_unstable();
    label_values.dedup();
    let class_of = |v: i64| label_values.binary_search(&v).expect("present");

    let mut adjacency: Vec<Array2<f64>> = graph_sizes
        .iter()
        .map(|&n| Array2::zeros((n, n)))
        .collect();
    let edges_file = read_lines(&file("A"))?;
    for (line, text) in &edges_file.lines {
        let Some((a, b)) = text.split_once(',') else {
            return Err(Error::parse(
                &edges_file.path,
                *line,
                format!("expected \"i, j\", got {text:?}"),
            ));
        };
        let endpoint = |tok: &str| -> Result<usize> {
            let v = parse_int(tok, &edges_file.path, *line)?;
            if v < 1 || v as usize > num_nodes {
                return Err(Error::parse(
                    &edges_file.path,
                    *line,
                    format!("edge references node {v}, but only {num_nodes} exist"),
                ));
            }
            Ok(v as usize - 1)
        };
        let u = endpoint(a)?;
        let v = endpoint(b)?;
        let (gu, lu) = local_of[u];
        let (gv, lv) = local_of[v];
        if gu != gv {
            return Err(Error::parse(
                &edges_file.path,
                *line,
                format!("edge joins graphs {} and {}", gu + 1, gv + 1),
            ));
        }
        if lu == lv {
            continue; // self-loops are dropped; the diagonal stays zero
        }
        adjacency[gu][(lu, lv)] = 1.0;
        adjacency[gu][(lv, lu)] = 1.0;
    }

    let node_labels_path = file("node_labels");
    let node_attrs_path = file("node_attributes");
    let node_labels = if node_labels_path.exists() {
        let f = read_lines(&node_labels_path)?;
        if f.lines.len() != num_nodes {
            return Err(Error::config(format!(
                "{}: {} labels for {num_nodes} nodes",
                f.path,
                f.lines.len()
            )));
        }
        let mut vals = Vec::with_capacity(num_nodes);
        for (line, text) in &f.lines {
            vals.push(parse_int(text, &f.path, *line)?);
        }
        Some(vals)
    } else {
        None
    };
    let node_attrs = if node_attrs_path.exists() {
        let f = read_lines(&node_attrs_path)?;
        if f.lines.len() != num_nodes {
            return Err(Error::config(format!(
                "{}: {} attribute rows for {num_nodes} nodes",
                f.path,
                f.lines.len()
            )));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(num_nodes);
        for (line, text) in &f.lines {
            let row: Result<Vec<f64>> = text
                .split(',')
                .map(|t| parse_float(t, &f.path, *line))
                .collect();
            let row = row?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::parse(
                        &f.path,
                        *line,
                        format!("attribute row has {} values, expected {}", row.len(), first.len()),
                    ));
                }
            }
            rows.push(row);
        }
        Some(rows)
    } else {
        None
    };

    let (feature_kind, features) = build_features(
        &node_labels,
        &node_attrs,
        &node_graph,
        &graph_sizes,
        &adjacency,
    );

    let graphs = adjacency
        .into_iter()
        .zip(features)
        .zip(&original_labels)
        .map(|((adjacency, features), &orig)| Graph {
            adjacency,
            features,
            label: class_of(orig),
            original_label: orig,
        })
        .collect();

    Ok(GraphDataset {
        name: name.to_string(),
        graphs,
        num_classes: label_values.len(),
        label_values,
        feature_kind,
        split: None,
    })
}

fn build_features(
    node_labels: &Option<Vec<i64>>,
    node_attrs: &Option<Vec<Vec<f64>>>,
    node_graph: &[usize],
    graph_sizes: &[usize],
    adjacency: &[Array2<f64>],
) -> (FeatureKind, Vec<Array2<f64>>) {
    let label_values: Option<Vec<i64>> = node_labels.as_ref().map(|vals| {
        let mut distinct = vals.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct
    });
    let attr_dim = node_attrs
        .as_ref()
        .map(|rows| rows.first().map_or(0, Vec::len))
        .unwrap_or(0);

    let kind = match (&label_values, node_attrs) {
        (Some(values), Some(_)) => FeatureKind::LabelsAndAttributes {
            values: values.clone(),
            attr_dim,
        },
        (Some(values), None) => FeatureKind::NodeLabels {
            values: values.clone(),
        },
        (None, Some(_)) => FeatureKind::Attributes { dim: attr_dim },
        (None, None) => FeatureKind::Degree,
    };
    let dim = kind.dim();

    let max_degree = adjacency
        .iter()
        .flat_map(|a| (0..a.nrows()).map(|i| a.row(i).sum()))
        .fold(1.0f64, f64::max);

    let mut features: Vec<Array2<f64>> = graph_sizes
        .iter()
        .map(|&n| Array2::zeros((n, dim)))
        .collect();
    let mut cursor = vec![0usize; graph_sizes.len()];
    for (node, &g) in node_graph.iter().enumerate() {
        let gi = g - 1;
        let li = cursor[gi];
        cursor[gi] += 1;
        match &kind {
            FeatureKind::Degree => {
                features[gi][(li, 0)] = adjacency[gi].row(li).sum() / max_degree;
            }
            FeatureKind::NodeLabels { values } => {
                let v = node_labels.as_ref().expect("labels present")[node];
                let col = values.binary_search(&v).expect("value present");
                features[gi][(li, col)] = 1.0;
            }
            FeatureKind::Attributes { .. } => {
                let row = &node_attrs.as_ref().expect("attrs present")[node];
                for (c, &v) in row.iter().enumerate() {
                    features[gi][(li, c)] = v;
                }
            }
            FeatureKind::LabelsAndAttributes { values, .. } => {
                let v = node_labels.as_ref().expect("labels present")[node];
                let col = values.binary_search(&v).expect("value present");
                features[gi][(li, col)] = 1.0;
                let row = &node_attrs.as_ref().expect("attrs present")[node];
                for (c, &v) in row.iter().enumerate() {
                    features[gi][(li, values.len() + c)] = v;
                }
            }
        }
    }
    (kind, features)
}

/// Writes the dataset back out in canonical TU form: nodes numbered 1..N in
/// graph order, every undirected edge emitted in both directions, floats in
/// shortest round-trip notation. Parsing the output reproduces the dataset.
pub fn serialize_tu_dataset(dataset: &GraphDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let write = |suffix: &str, content: String| -> Result<()> {
        let path = dir.join(format!("{}_{suffix}.txt", dataset.name));
        fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))
    };

    let mut indicator = String::new();
    let mut labels = String::new();
    let mut edges = String::new();
    let mut node_labels = String::new();
    let mut node_attrs = String::new();
    let mut base = 0usize;

    for (gi, g) in dataset.graphs.iter().enumerate() {
        labels.push_str(&format!("{}\n", g.original_label));
        for li in 0..g.n() {
            indicator.push_str(&format!("{}\n", gi + 1));
            for lj in 0..g.n() {
                if li != lj && g.adjacency[(li, lj)] != 0.0 {
                    edges.push_str(&format!("{}, {}\n", base + li + 1, base + lj + 1));
                }
            }
            match &dataset.feature_kind {
                FeatureKind::Degree => {}
                FeatureKind::NodeLabels { values } => {
                    let col = argmax_onehot(&g.features, li, values.len());
                    node_labels.push_str(&format!("{}\n", values[col]));
                }
                FeatureKind::Attributes { dim } => {
                    let row: Vec<String> =
                        (0..*dim).map(|c| format!("{}", g.features[(li, c)])).collect();
                    node_attrs.push_str(&format!("{}\n", row.join(", ")));
                }
                FeatureKind::LabelsAndAttributes { values, attr_dim } => {
                    let col = argmax_onehot(&g.features, li, values.len());
                    node_labels.push_str(&format!("{}\n", values[col]));
                    let row: Vec<String> = (0..*attr_dim)
                        .map(|c| format!("{}", g.features[(li, values.len() + c)]))
                        .collect();
                    node_attrs.push_str(&format!("{}\n", row.join(", ")));
                }
            }
        }
        base += g.n();
    }

    write("graph_indicator", indicator)?;
    write("graph_labels", labels)?;
    write("A", edges)?;
    match &dataset.feature_kind {
        FeatureKind::Degree => {}
        FeatureKind::NodeLabels { .. } => write("node_labels", node_labels)?,
        FeatureKind::Attributes { .. } => write("node_attributes", node_attrs)?,
        FeatureKind::LabelsAndAttributes { .. } => {
            write("node_labels", node_labels)?;
            write("node_attributes", node_attrs)?;
        }
    }
    Ok(())
}

fn argmax_onehot(features: &Array2<f64>, row: usize, width: usize) -> usize {
    let mut best = 0;
    for c in 1..width {
        if features[(row, c)] > features[(row, best)] {
            best = c;
        }
    }
    best
}
