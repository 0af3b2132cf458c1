//! Graph corpora: TU-format ingestion, deterministic stratified splits, and
//! feature standardization.

pub mod synthetic;
pub mod tu;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeding;

/// One undirected graph: symmetric {0,1} adjacency with a zero diagonal
/// (self-loops are a model concern, not a data concern), node features, and
/// a class label remapped to 0..num_classes.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub adjacency: Array2<f64>,
    pub features: Array2<f64>,
    pub label: usize,
    /// Label value as it appeared in the source files; kept so datasets
    /// serialize back to their original form.
    pub original_label: i64,
}

impl Graph {
    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                if self.adjacency[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn degree(&self, node: usize) -> f64 {
        self.adjacency.row(node).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.adjacency.ncols() != n {
            return Err(Error::shape("adjacency must be square"));
        }
        if self.features.nrows() != n {
            return Err(Error::shape(format!(
                "{} feature rows for {n} nodes",
                self.features.nrows()
            )));
        }
        for i in 0..n {
            if self.adjacency[(i, i)] != 0.0 {
                return Err(Error::config(format!("self-loop on node {i}")));
            }
            for j in 0..n {
                if self.adjacency[(i, j)] != self.adjacency[(j, i)] {
                    return Err(Error::config(format!("asymmetric edge ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

/// Where node features came from; remembered so serialization can write the
/// original files back.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureKind {
    /// One-hot columns, ordered by the sorted distinct original label values.
    NodeLabels { values: Vec<i64> },
    Attributes { dim: usize },
    /// One-hot label columns first, then the raw attribute columns.
    LabelsAndAttributes { values: Vec<i64>, attr_dim: usize },
    /// Single column: node degree divided by the maximum degree in the
    /// dataset. Synthesized when a corpus ships no node information.
    Degree,
}

impl FeatureKind {
    pub fn dim(&self) -> usize {
        match self {
            FeatureKind::NodeLabels { values } => values.len(),
            FeatureKind::Attributes { dim } => *dim,
            FeatureKind::LabelsAndAttributes { values, attr_dim } => values.len() + attr_dim,
            FeatureKind::Degree => 1,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FeatureKind::NodeLabels { values } => {
                format!("one-hot node labels, dim {}", values.len())
            }
            FeatureKind::Attributes { dim } => format!("node attributes, dim {dim}"),
            FeatureKind::LabelsAndAttributes { values, attr_dim } => format!(
                "one-hot node labels ({}) plus attributes ({attr_dim})",
                values.len()
            ),
            FeatureKind::Degree => "normalized node degree, dim 1".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    /// Sorted distinct original graph labels; position = class index.
    pub label_values: Vec<i64>,
    pub feature_kind: FeatureKind,
    pub split: Option<Split>,
}

impl GraphDataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_kind.dim()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for g in &self.graphs {
            counts[g.label] += 1;
        }
        counts
    }

    /// Share of the most common class; the floor any classifier must beat.
    pub fn majority_rate(&self) -> f64 {
        let counts = self.class_counts();
        *counts.iter().max().unwrap_or(&0) as f64 / self.len() as f64
    }
}

/// Target split sizes: train takes the floor of its share and the leftover
/// graphs go to val, then test.
fn target_sizes(n: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let mut sizes = [
        (ratios.0 * n as f64).floor() as usize,
        (ratios.1 * n as f64).floor() as usize,
        (ratios.2 * n as f64).floor() as usize,
    ];
    let mut leftover = n - sizes.iter().sum::<usize>();
    let order = [1, 2, 0]; // val, then test, then train
    let mut i = 0;
    while leftover > 0 {
        sizes[order[i % order.len()]] += 1;
        leftover -= 1;
        i += 1;
    }
    sizes
}

fn validate_ratios(ratios: (f64, f64, f64)) -> Result<()> {
    for (name, r) in [
        ("train", ratios.0),
        ("val", ratios.1),
        ("test", ratios.2),
    ] {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::config(format!(
                "{name} ratio must be positive, got {r}"
            )));
        }
    }
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios sum to {sum}, not 1")));
    }
    Ok(())
}

/// Stratified split, deterministic under the seed. Each class is allocated
/// with the same floor-then-val-then-test rule; a repair pass then moves
/// single graphs between splits, always taking from the class most
/// over-represented in the oversized split, until the global totals match
/// the targets. Per-class proportions stay within one graph of the global
/// ratio.
pub fn make_split(dataset: &GraphDataset, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    validate_ratios(ratios)?;
    let n = dataset.len();
    if n == 0 {
        return Err(Error::config("cannot split an empty dataset"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (idx, g) in dataset.graphs.iter().enumerate() {
        by_class[g.label].push(idx);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < 3 {
            return Err(Error::config(format!(
                "class {c} has {} graphs, need at least 3 to fill every split",
                members.len()
            )));
        }
    }

    const SPLIT_STREAM: u64 = 0x53504c4954; // "SPLIT"
    let mut rng = seeding::rng(seed, SPLIT_STREAM);
    // buckets[s][c] = indices of class c currently assigned to split s.
    let mut buckets: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); dataset.num_classes]; 3];
    for (c, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let sizes = target_sizes(shuffled.len(), ratios);
        let mut cursor = 0;
        for (s, &size) in sizes.iter().enumerate() {
            buckets[s][c].extend_from_slice(&shuffled[cursor..cursor + size]);
            cursor += size;
        }
    }

    let targets = target_sizes(n, ratios);
    let class_sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let ratio_of = [ratios.0, ratios.1, ratios.2];
    loop {
        let totals: Vec<usize> = (0..3)
            .map(|s| buckets[s].iter().map(Vec::len).sum())
            .collect();
        let Some(over) = (0..3).find(|&s| totals[s] > targets[s]) else {
            break;
        };
        let under = (0..3)
            .find(|&s| totals[s] < targets[s])
            .expect("totals sum to n, so an oversized split implies an undersized one");
        // Most over-represented class in the oversized split donates one.
        let donor = (0..dataset.num_classes)
            .filter(|&c| !buckets[over][c].is_empty())
            .max_by(|&a, &b| {
                let ea = buckets[over][a].len() as f64 / class_sizes[a] as f64 - ratio_of[over];
                let eb = buckets[over][b].len() as f64 / class_sizes[b] as f64 - ratio_of[over];
                ea.partial_cmp(&eb)
                    .expect("finite excess")
                    .then(b.cmp(&a)) // tie: lower class index wins
            })
            .expect("oversized split is non-empty");
        let moved = buckets[over][donor].pop().expect("donor bucket non-empty");
        buckets[under][donor].push(moved);
    }

    let collect = |s: usize| -> Vec<usize> {
        let mut out: Vec<usize> = buckets[s].iter().flatten().copied().collect();
        out.sort_unstable();
        out
    };
    Ok(Split {
        train: collect(0),
        val: collect(1),
        test: collect(2),
    })
}

/// Per-dimension affine map computed on the training split: zero mean, unit
/// variance. Dimensions that are constant on the training data pass through
/// unscaled.
#[derive(Clone, Debug)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(graphs: &[Graph], train: &[usize]) -> Result<Self> {
        let d = graphs
            .first()
            .map(Graph::feature_dim)
            .ok_or_else(|| Error::config("no graphs to standardize"))?;
        let mut mean = Array1::<f64>::zeros(d);
        let mut count = 0usize;
        for &gi in train {
            let f = &graphs[gi].features;
            for row in f.rows() {
                mean += &row;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::config("empty training split"));
        }
        mean /= count as f64;
        let mut var = Array1::<f64>::zeros(d);
        for &gi in train {
            for row in graphs[gi].features.rows() {
                let diff = &row - &mean;
                var += &diff.mapv(|v| v * v);
            }
        }
        var /= count as f64;
        let std = var.mapv(|v| if v.sqrt() < 1e-12 { 1.0 } else { v.sqrt() });
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.clone();
        for mut row in out.rows_mut() {
            row -= &self.mean;
            row /= &self.std;
        }
        out
    }
}
