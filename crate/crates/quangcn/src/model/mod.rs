//! Model family: the pooled quantum graph convolution network, its two
//! pooling-free quantum variants, and three classical baselines.
//!
//! Shared structure of the quantum models: classical features are reduced to
//! q angles, encoded as Ry rotations, processed by L circuit layers, and read
//! out as q Pauli-Z expectations that feed a dense classifier. The full model
//! additionally learns a soft assignment of nodes to q clusters; the pooled
//! adjacency drives a diagonal message-passing layer (U1 self-loops, CU1
//! crossing-qubit phases) inside each circuit layer.
//!
//! Angle maps: every classical value enters the circuit through `π·σ(v)`
//! (logistic squashed into (0, π)), keeping rotation angles bounded and
//! gradients informative. Pooled edge weights get an implicit +1 self-loop on
//! the diagonal before the map. Entries whose logistic value falls below
//! `mask_threshold` are dropped from the circuit entirely (gate elision); the
//! entropy regularizer is computed on the smooth pre-mask values.

pub mod classical;
pub mod quantum;

use ndarray::{Array1, Array2, Axis};

use crate::data::{Graph, GraphDataset, Standardizer};
use crate::error::{Error, Result};
use crate::nn::{self, sgc_precompute, DenseLayer, Init, ModelParams, ParamsBuilder, Segment};
use crate::noise::{InjectionPolicy, NoiseModel};
use crate::seeding;
use crate::statevector::MAX_QUBITS;

pub use classical::{GcnCache, MlpCache, SgcCache};
pub use quantum::{
    build_plain_circuit, build_pooled_circuit, encode_state, inject_and_remap,
    quangcn_forward_from_s, quantum_graph_conv, trainable_layer, AngleRoute, BuiltCircuit,
    Occurrence, QuanGcnCache, QuanPlainCache,
};

/// Stream id for deriving the parameter-initialization generator from a run
/// seed.
const INIT_STREAM: u64 = 0x494e4954; // "INIT"

/// Half-width of the uniform initializer for trainable circuit angles.
pub const ANGLE_INIT_HALF_WIDTH: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Sgc,
    Gcn,
    QuanMlp,
    QuanSgc,
    QuanGcn,
}

pub const ALL_MODEL_KINDS: [ModelKind; 6] = [
    ModelKind::Mlp,
    ModelKind::Sgc,
    ModelKind::Gcn,
    ModelKind::QuanMlp,
    ModelKind::QuanSgc,
    ModelKind::QuanGcn,
];

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Sgc => "sgc",
            ModelKind::Gcn => "gcn",
            ModelKind::QuanMlp => "quanmlp",
            ModelKind::QuanSgc => "quansgc",
            ModelKind::QuanGcn => "quangcn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL_MODEL_KINDS
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown model {s:?}; expected one of mlp, sgc, gcn, quanmlp, quansgc, quangcn"
                ))
            })
    }

    pub fn is_quantum(self) -> bool {
        matches!(
            self,
            ModelKind::QuanMlp | ModelKind::QuanSgc | ModelKind::QuanGcn
        )
    }

    /// Kinds whose node features are pre-propagated with Â^K before training.
    pub fn uses_sgc_features(self) -> bool {
        matches!(self, ModelKind::Sgc | ModelKind::QuanSgc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub qubits: usize,
    pub layers: usize,
    pub hidden: usize,
    pub skip: bool,
    pub sparse_lambda: f64,
    /// Gate-elision threshold on the logistic scale: pooled-edge entries with
    /// σ below this value emit no circuit gate. Pooled weights are
    /// non-negative, so σ ≥ 0.5 structurally; thresholds at or below 0.5
    /// disable elision.
    pub mask_threshold: f64,
    pub sgc_hops: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden width must be positive"));
        }
        if self.kind.is_quantum() {
            if self.qubits < 2 || self.qubits > MAX_QUBITS {
                return Err(Error::config(format!(
                    "qubits must lie in 2..={MAX_QUBITS}, got {}",
                    self.qubits
                )));
            }
            if self.layers == 0 {
                return Err(Error::config("layers must be at least 1"));
            }
        }
        if self.skip && !self.kind.is_quantum() {
            return Err(Error::config(
                "skip connection applies to quantum models only",
            ));
        }
        if !self.sparse_lambda.is_finite() || self.sparse_lambda < 0.0 {
            return Err(Error::config(format!(
                "sparse_lambda must be finite and non-negative, got {}",
                self.sparse_lambda
            )));
        }
        if self.sparse_lambda > 0.0 && self.kind != ModelKind::QuanGcn {
            return Err(Error::config(
                "sparse_lambda applies to the pooled model (quangcn) only",
            ));
        }
        if !(0.0..1.0).contains(&self.mask_threshold) {
            return Err(Error::config(format!(
                "mask_threshold must lie in [0,1), got {}",
                self.mask_threshold
            )));
        }
        if self.kind.uses_sgc_features() && self.sgc_hops == 0 {
            return Err(Error::config("sgc_hops must be at least 1"));
        }
        Ok(())
    }

    /// Length of the classifier input: q measurements, plus q skip values for
    /// quantum models with the skip connection.
    pub fn readout_dim(&self) -> usize {
        if self.skip {
            2 * self.qubits
        } else {
            self.qubits
        }
    }

    /// Trainable circuit angles: per layer, 3 per U3 on each wire plus 3 per
    /// CU3 on each ring pair.
    pub fn quantum_angle_count(&self) -> usize {
        self.layers * 6 * self.qubits
    }
}

pub struct Model {
    pub config: ModelConfig,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Model { config })
    }

    /// Builds the parameter registry with all values zero.
    pub fn build_params(&self) -> Result<ModelParams> {
        let c = &self.config;
        let d = c.feature_dim;
        let h = c.hidden;
        let q = c.qubits;
        let classes = c.num_classes;
        let mut b = ParamsBuilder::new();
        let xavier = |fan_in: usize, fan_out: usize| Init::XavierUniform { fan_in, fan_out };
        match c.kind {
            ModelKind::Mlp | ModelKind::Sgc => {
                b.add("dense.w", d * h, Segment::Classical, xavier(d, h))?;
                b.add("dense.b", h, Segment::Classical, Init::Zero)?;
                b.add("clf.w", h * classes, Segment::Classical, xavier(h, classes))?;
                b.add("clf.b", classes, Segment::Classical, Init::Zero)?;
            }
            ModelKind::Gcn => {
                b.add("gcn1.w", d * h, Segment::Classical, xavier(d, h))?;
                b.add("gcn1.b", h, Segment::Classical, Init::Zero)?;
                b.add("gcn2.w", h * h, Segment::Classical, xavier(h, h))?;
                b.add("gcn2.b", h, Segment::Classical, Init::Zero)?;
                b.add("clf.w", h * classes, Segment::Classical, xavier(h, classes))?;
                b.add("clf.b", classes, Segment::Classical, Init::Zero)?;
            }
            ModelKind::QuanMlp | ModelKind::QuanSgc => {
                b.add("head.w", d * q, Segment::Classical, xavier(d, q))?;
                b.add("head.b", q, Segment::Classical, Init::Zero)?;
                if c.skip {
                    b.add("skip.w", d * q, Segment::Classical, xavier(d, q))?;
                }
                let r = c.readout_dim();
                b.add("clf.w", r * classes, Segment::Classical, xavier(r, classes))?;
                b.add("clf.b", classes, Segment::Classical, Init::Zero)?;
                b.add(
                    "quantum.angles",
                    c.quantum_angle_count(),
                    Segment::Quantum,
                    Init::UniformAngle {
                        half_width: ANGLE_INIT_HALF_WIDTH,
                    },
                )?;
            }
            ModelKind::QuanGcn => {
                b.add("pool1.w", 2 * d * h, Segment::Classical, xavier(2 * d, h))?;
                b.add("pool1.b", h, Segment::Classical, Init::Zero)?;
                b.add("pool2.w", h * q, Segment::Classical, xavier(h, q))?;
                b.add("pool2.b", q, Segment::Classical, Init::Zero)?;
                b.add("feat.w", d, Segment::Classical, xavier(d, 1))?;
                b.add("feat.b", 1, Segment::Classical, Init::Zero)?;
                if c.skip {
                    b.add("skip.w", d, Segment::Classical, xavier(d, 1))?;
                }
                let r = c.readout_dim();
                b.add("clf.w", r * classes, Segment::Classical, xavier(r, classes))?;
                b.add("clf.b", classes, Segment::Classical, Init::Zero)?;
                b.add(
                    "quantum.angles",
                    c.quantum_angle_count(),
                    Segment::Quantum,
                    Init::UniformAngle {
                        half_width: ANGLE_INIT_HALF_WIDTH,
                    },
                )?;
            }
        }
        let params = b.build();
        params.check_registry()?;
        Ok(params)
    }

    /// Builds and fills parameters from a run seed.
    pub fn init_params(&self, seed: u64) -> Result<ModelParams> {
        let mut params = self.build_params()?;
        let mut rng = seeding::rng(seed, INIT_STREAM);
        params.init_params(&mut rng);
        Ok(params)
    }

    /// Clean forward pass retaining everything the backward pass needs.
    pub fn forward(&self, graph: &PreparedGraph, params: &ModelParams) -> Result<Forward> {
        self.forward_with(graph, params, ForwardMode::default())
    }

    pub fn forward_with(
        &self,
        graph: &PreparedGraph,
        params: &ModelParams,
        mode: ForwardMode,
    ) -> Result<Forward> {
        match self.config.kind {
            ModelKind::Mlp => Ok(Forward::Mlp(classical::mlp_forward(
                graph,
                params,
                &self.config,
            )?)),
            ModelKind::Sgc => Ok(Forward::Sgc(classical::sgc_forward(
                graph,
                params,
                &self.config,
            )?)),
            ModelKind::Gcn => Ok(Forward::Gcn(classical::gcn_forward(
                graph,
                params,
                &self.config,
            )?)),
            ModelKind::QuanMlp | ModelKind::QuanSgc => Ok(Forward::QuanPlain(
                quantum::quanplain_forward(graph, params, &self.config, mode)?,
            )),
            ModelKind::QuanGcn => Ok(Forward::QuanGcn(quantum::quangcn_forward(
                graph,
                params,
                &self.config,
                mode,
            )?)),
        }
    }

    /// Logits for evaluation; quantum measurement noise applies when given.
    pub fn eval_logits(
        &self,
        graph: &PreparedGraph,
        params: &ModelParams,
        noise: Option<&NoiseModel>,
    ) -> Result<Vec<f64>> {
        let mode = ForwardMode {
            injection: None,
            noise,
        };
        Ok(self.forward_with(graph, params, mode)?.logits().to_vec())
    }
}

/// Options for a forward pass. `injection` perturbs the circuit with fixed
/// random rotations (training-time robustness baseline; the gradient is taken
/// through the perturbed circuit). `noise` replaces the exact measurement
/// with the Monte Carlo noisy one; a noisy cache cannot back-propagate.
#[derive(Clone, Copy, Default)]
pub struct ForwardMode<'a> {
    pub injection: Option<(&'a InjectionPolicy, u64)>,
    pub noise: Option<&'a NoiseModel>,
}

/// A graph after per-run preprocessing: standardized features, plus the
/// normalized adjacency for the classical GCN, with features pre-propagated
/// through Â^K for the SGC-style kinds.
#[derive(Clone, Debug)]
pub struct PreparedGraph {
    pub a: Array2<f64>,
    pub x: Array2<f64>,
    pub a_norm: Option<Array2<f64>>,
    pub label: usize,
}

/// Prepares every graph of the dataset in index order.
pub fn prepare_graphs(
    dataset: &GraphDataset,
    standardizer: &Standardizer,
    config: &ModelConfig,
) -> Result<Vec<PreparedGraph>> {
    dataset
        .graphs
        .iter()
        .map(|g| prepare_graph(g, standardizer, config))
        .collect()
}

pub fn prepare_graph(
    graph: &Graph,
    standardizer: &Standardizer,
    config: &ModelConfig,
) -> Result<PreparedGraph> {
    let mut x = standardizer.apply(&graph.features);
    if config.kind.uses_sgc_features() {
        x = sgc_precompute(&graph.adjacency.view(), &x.view(), config.sgc_hops)?;
    }
    let a_norm = if config.kind == ModelKind::Gcn {
        Some(nn::normalized_adjacency(&graph.adjacency.view())?)
    } else {
        None
    };
    Ok(PreparedGraph {
        a: graph.adjacency.clone(),
        x,
        a_norm,
        label: graph.label,
    })
}

/// Everything a forward pass produces, by model kind.
pub enum Forward {
    Mlp(MlpCache),
    Sgc(SgcCache),
    Gcn(GcnCache),
    QuanPlain(QuanPlainCache),
    QuanGcn(QuanGcnCache),
}

impl Forward {
    pub fn logits(&self) -> &[f64] {
        match self {
            Forward::Mlp(c) => &c.logits,
            Forward::Sgc(c) => &c.logits,
            Forward::Gcn(c) => &c.logits,
            Forward::QuanPlain(c) => &c.logits,
            Forward::QuanGcn(c) => &c.logits,
        }
    }

    /// Total training loss: cross entropy, plus the weighted entropy
    /// regularizer for the pooled model.
    pub fn loss(&self) -> f64 {
        match self {
            Forward::Mlp(c) => c.xent,
            Forward::Sgc(c) => c.xent,
            Forward::Gcn(c) => c.xent,
            Forward::QuanPlain(c) => c.xent,
            Forward::QuanGcn(c) => c.loss,
        }
    }

    /// Whether the measurement vector came from the noisy path; such caches
    /// must not be used for gradients.
    pub fn is_noisy(&self) -> bool {
        match self {
            Forward::QuanPlain(c) => c.noisy,
            Forward::QuanGcn(c) => c.noisy,
            _ => false,
        }
    }

    /// Number of message-passing gates (U1/CU1) that survived the mask in
    /// the built circuit. Zero for models without the pooled layer.
    pub fn conv_gate_count(&self) -> usize {
        match self {
            Forward::QuanGcn(c) => c
                .circuit
                .gates
                .iter()
                .filter(|g| {
                    matches!(
                        g.kind,
                        crate::gates::GateKind::U1 | crate::gates::GateKind::Cu1
                    )
                })
                .count(),
            _ => 0,
        }
    }

    /// Number of normalized pre-mask edge probabilities above the uniform
    /// level 1/q²; the entropy regularizer drives this down.
    pub fn sparsity_above_uniform(&self) -> usize {
        match self {
            Forward::QuanGcn(c) => {
                let q2 = c.p_pre.len() as f64;
                if c.p_sum <= 0.0 {
                    return 0;
                }
                c.p_pre
                    .iter()
                    .filter(|&&p| p / c.p_sum > 1.0 / q2)
                    .count()
            }
            _ => 0,
        }
    }
}

/// Looks up a parameter block by name; the layouts built here guarantee
/// presence, so a miss means params and config disagree.
pub(crate) fn block_id(params: &ModelParams, name: &str) -> Result<nn::BlockId> {
    params
        .find(name)
        .ok_or_else(|| Error::config(format!("parameter block {name:?} is missing")))
}

pub(crate) fn mat(
    params: &ModelParams,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Array2<f64>> {
    Ok(params.matrix(block_id(params, name)?, rows, cols))
}

pub(crate) fn vec1(params: &ModelParams, name: &str) -> Result<Array1<f64>> {
    Ok(params.vector(block_id(params, name)?))
}

/// Argmax with ties resolved toward the lower class index.
pub fn predict(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate().skip(1) {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// The coarsening products `A_p = SᵀAS` and `X_p = SᵀX`.
pub fn pooled_from_s(
    a: &Array2<f64>,
    x: &Array2<f64>,
    s: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let st = s.t();
    let a_p = st.dot(a).dot(s);
    let x_p = st.dot(x);
    (a_p, x_p)
}

/// Intermediates of the pooling encoder.
pub struct PoolCache {
    /// `[X ‖ A·X]`, the encoder input.
    pub xax: Array2<f64>,
    pub pre1: Array2<f64>,
    pub h1: Array2<f64>,
    /// Pre-softmax cluster logits (the second encoder layer is linear).
    pub pre2: Array2<f64>,
    pub s: Array2<f64>,
    pub a_p: Array2<f64>,
    pub x_p: Array2<f64>,
}

/// Soft cluster assignment from the two-layer encoder, then the coarsening
/// products.
pub fn pool(
    a: &Array2<f64>,
    x: &Array2<f64>,
    enc1: &DenseLayer,
    enc2: &DenseLayer,
) -> Result<PoolCache> {
    let n = a.nrows();
    if a.ncols() != n || x.nrows() != n {
        return Err(Error::shape(format!(
            "pool expects A {n}x{n} and X with {n} rows, got A {n}x{} and X {}x{}",
            a.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    let ax = a.dot(x);
    let mut xax = Array2::zeros((n, 2 * x.ncols()));
    xax.slice_mut(ndarray::s![.., ..x.ncols()]).assign(x);
    xax.slice_mut(ndarray::s![.., x.ncols()..]).assign(&ax);
    let (h1, pre1) = enc1.forward_cached(&xax.view())?;
    let (_, pre2) = enc2.forward_cached(&h1.view())?;
    let s = softmax_rows(&pre2);
    let (a_p, x_p) = pooled_from_s(a, x, &s);
    Ok(PoolCache {
        xax,
        pre1,
        h1,
        pre2,
        s,
        a_p,
        x_p,
    })
}

/// Output of the angle map: `a_hat` holds the masked rotation angles
/// `π·σ(w)·[σ(w) ≥ τ]`, `p` the smooth pre-mask logistic values.
pub struct NormalizedAngles {
    pub a_hat: Array2<f64>,
    pub p: Array2<f64>,
    pub mask: Array2<bool>,
}

/// Maps arbitrary edge weights to rotation angles in [0, π]. The caller adds
/// any implicit self-loop to the diagonal before calling; the pooled pipeline
/// passes `A_p + I`.
pub fn angle_normalize(weights: &Array2<f64>, threshold: f64) -> NormalizedAngles {
    let p = weights.mapv(logistic);
    let mask = p.mapv(|v| v >= threshold);
    let mut a_hat = p.clone() * std::f64::consts::PI;
    ndarray::Zip::from(&mut a_hat).and(&mask).for_each(|a, &m| {
        if !m {
            *a = 0.0;
        }
    });
    NormalizedAngles { a_hat, p, mask }
}

/// Entropy of the edge-weight distribution: entries are normalized by their
/// sum and `−Σ p̃ ln p̃` is returned, with `0·ln 0 = 0`. Lower is sparser.
pub fn sparse_loss(p: &Array2<f64>) -> Result<f64> {
    let mut sum = 0.0;
    for &v in p.iter() {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::numeric(format!(
                "sparse loss needs non-negative finite entries, got {v}"
            )));
        }
        sum += v;
    }
    if sum == 0.0 {
        return Ok(0.0);
    }
    let mut h = 0.0;
    for &v in p.iter() {
        if v > 0.0 {
            let t = v / sum;
            h -= t * t.ln();
        }
    }
    Ok(h)
}

/// Mean per-graph accuracy of clean predictions over the given indices.
pub fn accuracy(
    model: &Model,
    params: &ModelParams,
    graphs: &[PreparedGraph],
    indices: &[usize],
) -> Result<f64> {
    accuracy_with_noise(model, params, graphs, indices, None, 0)
}

/// Accuracy under an optional measurement-noise model; each graph's
/// trajectory stream is derived from the preset seed and the graph's dataset
/// index, so results do not depend on evaluation order.
pub fn accuracy_with_noise(
    model: &Model,
    params: &ModelParams,
    graphs: &[PreparedGraph],
    indices: &[usize],
    noise: Option<&NoiseModel>,
    noise_seed: u64,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::config("cannot score an empty graph list"));
    }
    let mut correct = 0usize;
    for &gi in indices {
        let g = &graphs[gi];
        let per_graph = noise.map(|n| n.clone().with_seed(seeding::mix(noise_seed, gi as u64)));
        let logits = model.eval_logits(g, params, per_graph.as_ref())?;
        if predict(&logits) == g.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quangcn_config(d: usize, q: usize) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::QuanGcn,
            feature_dim: d,
            num_classes: 2,
            qubits: q,
            layers: 2,
            hidden: 8,
            skip: true,
            sparse_lambda: 0.5,
            mask_threshold: 0.55,
            sgc_hops: 2,
        }
    }

    #[test]
    fn config_validation_rejects_bad_combinations() {
        let mut c = quangcn_config(3, 4);
        c.qubits = 1;
        assert!(c.validate().is_err());
        let mut c = quangcn_config(3, 4);
        c.layers = 0;
        assert!(c.validate().is_err());
        let mut c = quangcn_config(3, 4);
        c.kind = ModelKind::Gcn;
        assert!(c.validate().is_err()); // skip + sparse on a classical kind
        c.skip = false;
        assert!(c.validate().is_err()); // sparse_lambda on a classical kind
        c.sparse_lambda = 0.0;
        c.validate().unwrap();
        let mut c = quangcn_config(3, 4);
        c.kind = ModelKind::QuanMlp;
        assert!(c.validate().is_err()); // sparse_lambda needs pooling
        c.sparse_lambda = 0.0;
        c.validate().unwrap();
    }

    #[test]
    fn registry_shapes_per_kind() {
        let d = 3;
        let q = 4;
        let c = quangcn_config(d, q);
        let model = Model::new(c).unwrap();
        let p = model.build_params().unwrap();
        // pool1 (6*8 + 8) + pool2 (8*4 + 4) + feat (3+1) + skip 3 +
        // clf (8*2 + 2) + quantum (2*6*4)
        assert_eq!(p.len(), 56 + 36 + 4 + 3 + 18 + 48);
        assert_eq!(p.segment_range(Segment::Quantum).len(), 48);

        let mut c = quangcn_config(d, q);
        c.kind = ModelKind::QuanMlp;
        c.sparse_lambda = 0.0;
        c.skip = false;
        let p = Model::new(c).unwrap().build_params().unwrap();
        // head (3*4 + 4) + clf (4*2 + 2) + quantum 48
        assert_eq!(p.len(), 16 + 10 + 48);

        let mut c = quangcn_config(d, q);
        c.kind = ModelKind::Gcn;
        c.skip = false;
        c.sparse_lambda = 0.0;
        c.hidden = 32;
        let p = Model::new(c).unwrap().build_params().unwrap();
        assert_eq!(p.len(), 3 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
        assert!(p.segment_range(Segment::Quantum).is_empty());
    }

    #[test]
    fn pooling_matches_triple_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(2..7);
            let q = rng.gen_range(2..5);
            let mut a = Array2::zeros((n, n));
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen::<f64>() < 0.5 {
                        a[(i, j)] = 1.0;
                        a[(j, i)] = 1.0;
                    }
                }
            }
            let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
            let z = Array2::from_shape_fn((n, q), |_| rng.gen_range(-1.0..1.0));
            let s = softmax_rows(&z);
            for row in s.axis_iter(Axis(0)) {
                assert!((row.sum() - 1.0).abs() < 1e-9);
            }
            let (a_p, x_p) = pooled_from_s(&a, &x, &s);
            // Independent elementwise triple product.
            for u in 0..q {
                for v in 0..q {
                    let mut direct = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            direct += s[(i, u)] * a[(i, j)] * s[(j, v)];
                        }
                    }
                    assert!((a_p[(u, v)] - direct).abs() < 1e-9);
                }
            }
            for u in 0..q {
                for c in 0..3 {
                    let direct: f64 = (0..n).map(|i| s[(i, u)] * x[(i, c)]).sum();
                    assert!((x_p[(u, c)] - direct).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn identity_assignment_pools_to_the_original_graph() {
        let a = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let x = array![[1.0], [2.0], [3.0]];
        let s = Array2::eye(3);
        let (a_p, x_p) = pooled_from_s(&a, &x, &s);
        assert_eq!(a_p, a);
        assert_eq!(x_p, x);
    }

    #[test]
    fn rank_one_assignment_sums_everything_into_cluster_zero() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let s = array![[1.0, 0.0], [1.0, 0.0]];
        let (a_p, x_p) = pooled_from_s(&a, &x, &s);
        assert_eq!(a_p[(0, 0)], 2.0); // sum of all adjacency entries
        assert_eq!(a_p[(0, 1)], 0.0);
        assert_eq!(a_p[(1, 1)], 0.0);
        assert_eq!(x_p.row(0).to_vec(), vec![4.0, 6.0]); // column sums
        assert_eq!(x_p.row(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn angle_map_examples() {
        let zero = Array2::zeros((3, 3));
        let n = angle_normalize(&zero, 0.0);
        for &v in n.a_hat.iter() {
            assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12); // σ(0)=0.5
        }
        let big = Array2::from_elem((2, 2), 50.0);
        let n = angle_normalize(&big, 0.0);
        for &v in n.a_hat.iter() {
            assert!((v - std::f64::consts::PI).abs() < 1e-9); // saturation
        }
        // Threshold masks small logistic values to exact zero.
        let w = array![[-5.0, 3.0], [0.1, -0.2]];
        let n = angle_normalize(&w, 0.5);
        assert_eq!(n.a_hat[(0, 0)], 0.0);
        assert!(!n.mask[(0, 0)]);
        assert!(n.a_hat[(0, 1)] > 0.0 && n.mask[(0, 1)]);
        assert!(n.mask[(1, 0)] && !n.mask[(1, 1)]);
        // Pre-mask values stay smooth and unmasked.
        assert!((n.p[(0, 0)] - logistic(-5.0)).abs() < 1e-15);
    }

    #[test]
    fn sparse_loss_examples() {
        let one_hot = array![[1.0, 0.0], [0.0, 0.0]];
        assert_eq!(sparse_loss(&one_hot).unwrap(), 0.0);
        let half = array![[0.5, 0.5]];
        assert!((sparse_loss(&half).unwrap() - 2f64.ln()).abs() < 1e-12);
        let uniform = Array2::from_elem((4, 4), 1.0 / 16.0);
        assert!((sparse_loss(&uniform).unwrap() - 16f64.ln()).abs() < 1e-12);
        // Direct-summation oracle on random entries.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Array2<f64> = Array2::from_shape_fn((4, 4), |_| rng.gen_range(0.0..1.0));
        let sum = p.sum();
        let direct: f64 = p
            .iter()
            .map(|&v| {
                let t = v / sum;
                -t * t.ln()
            })
            .sum();
        assert!((sparse_loss(&p).unwrap() - direct).abs() < 1e-12);
        let negative = array![[0.5, -0.1]];
        assert!(sparse_loss(&negative).is_err());
    }

    #[test]
    fn predict_breaks_ties_toward_the_lower_class() {
        assert_eq!(predict(&[0.3, 0.3]), 0);
        assert_eq!(predict(&[0.1, 0.4, 0.4]), 1);
        assert_eq!(predict(&[1.0, 2.0, 0.5]), 1);
    }
}
