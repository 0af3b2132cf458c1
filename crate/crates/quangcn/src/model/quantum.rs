//! Circuit construction and forward passes for the quantum models.
//!
//! A built circuit carries an occurrence list alongside its gates: every
//! differentiable angle records which gate parameter it sits in and where its
//! value came from (encoding wire, pooled edge, or trainable-angle slot).
//! The backward pass shifts each occurrence and routes the resulting partial
//! back through the classical pipeline.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gates::GateOp;
use crate::nn::{softmax_xent, Activation, DenseLayer, ModelParams};
use crate::noise::{inject_random_gates, noisy_forward, InjectionPolicy, NoiseModel};
use crate::seeding;
use crate::statevector::{circuit_expectations, StateVector};

use super::{
    angle_normalize, block_id, logistic, mat, pool, sparse_loss, vec1, ForwardMode, ModelConfig,
    PoolCache, PreparedGraph,
};

/// Stream id mixed into a per-(epoch, graph) injection seed.
const INJECTION_STREAM: u64 = 0x494e4a45; // "INJE"

/// Where a circuit angle comes from in the classical pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleRoute {
    /// Encoding rotation on wire i: θ_i = π·σ(u_i).
    Encode(usize),
    /// Pooled-edge angle `a_hat[(row, col)]`; row is the target wire, col the
    /// control wire, and row == col for the self-loop phase.
    Edge(usize, usize),
    /// Flat index into the trainable-angle block.
    Slot(usize),
}

/// One differentiable angle in the gate list.
#[derive(Clone, Copy, Debug)]
pub struct Occurrence {
    pub gate: usize,
    pub param: usize,
    pub route: AngleRoute,
}

/// Gate list plus the map from gate parameters back to their sources.
pub struct BuiltCircuit {
    pub gates: Vec<GateOp>,
    pub occurrences: Vec<Occurrence>,
}

fn push_encode(gates: &mut Vec<GateOp>, occ: &mut Vec<Occurrence>, theta: &[f64]) {
    for (i, &t) in theta.iter().enumerate() {
        occ.push(Occurrence {
            gate: gates.len(),
            param: 0,
            route: AngleRoute::Encode(i),
        });
        gates.push(GateOp::ry(i, t).trainable());
    }
}

/// Message-passing layer: a U1 self-loop phase per wire, then a CU1 crossing
/// phase per ordered pair (control j, target i), targets ascending, controls
/// ascending within a target. Masked entries emit no gate.
fn push_conv(
    gates: &mut Vec<GateOp>,
    occ: &mut Vec<Occurrence>,
    a_hat: &Array2<f64>,
    mask: &Array2<bool>,
) {
    let q = a_hat.nrows();
    for target in 0..q {
        if mask[(target, target)] {
            occ.push(Occurrence {
                gate: gates.len(),
                param: 0,
                route: AngleRoute::Edge(target, target),
            });
            gates.push(GateOp::u1(target, a_hat[(target, target)]).trainable());
        }
        for control in 0..q {
            if control == target || !mask[(target, control)] {
                continue;
            }
            occ.push(Occurrence {
                gate: gates.len(),
                param: 0,
                route: AngleRoute::Edge(target, control),
            });
            gates.push(GateOp::cu1(control, target, a_hat[(target, control)]).trainable());
        }
    }
}

/// Trainable layer: one U3 per wire, then one CU3 per ring pair
/// (control i, target (i+1) mod q). Layer l uses the 6q angles after the
/// first l·6q; within the layer, U3 angles come first.
fn push_trainable(
    gates: &mut Vec<GateOp>,
    occ: &mut Vec<Occurrence>,
    angles: &[f64],
    layer: usize,
    q: usize,
) {
    let base = layer * 6 * q;
    for wire in 0..q {
        let at = base + 3 * wire;
        for k in 0..3 {
            occ.push(Occurrence {
                gate: gates.len(),
                param: k,
                route: AngleRoute::Slot(at + k),
            });
        }
        gates.push(
            GateOp::u3(wire, angles[at], angles[at + 1], angles[at + 2])
                .trainable()
                .with_slot(0, at)
                .with_slot(1, at + 1)
                .with_slot(2, at + 2),
        );
    }
    for i in 0..q {
        let at = base + 3 * q + 3 * i;
        for k in 0..3 {
            occ.push(Occurrence {
                gate: gates.len(),
                param: k,
                route: AngleRoute::Slot(at + k),
            });
        }
        gates.push(
            GateOp::cu3(i, (i + 1) % q, angles[at], angles[at + 1], angles[at + 2])
                .trainable()
                .with_slot(0, at)
                .with_slot(1, at + 1)
                .with_slot(2, at + 2),
        );
    }
}

fn check_builder_inputs(theta: &[f64], angles: &[f64], layers: usize) -> Result<usize> {
    let q = theta.len();
    if q < 2 {
        return Err(Error::config(format!(
            "circuit needs at least 2 wires, got {q}"
        )));
    }
    if angles.len() != layers * 6 * q {
        return Err(Error::config(format!(
            "expected {} trainable angles for {layers} layers on {q} wires, got {}",
            layers * 6 * q,
            angles.len()
        )));
    }
    Ok(q)
}

/// Encoding followed by L trainable layers (no message passing).
pub fn build_plain_circuit(theta: &[f64], angles: &[f64], layers: usize) -> Result<BuiltCircuit> {
    let q = check_builder_inputs(theta, angles, layers)?;
    let mut gates = Vec::new();
    let mut occurrences = Vec::new();
    push_encode(&mut gates, &mut occurrences, theta);
    for layer in 0..layers {
        push_trainable(&mut gates, &mut occurrences, angles, layer, q);
    }
    Ok(BuiltCircuit { gates, occurrences })
}

/// Encoding followed by L rounds of message passing plus a trainable layer.
pub fn build_pooled_circuit(
    theta: &[f64],
    a_hat: &Array2<f64>,
    mask: &Array2<bool>,
    angles: &[f64],
    layers: usize,
) -> Result<BuiltCircuit> {
    let q = check_builder_inputs(theta, angles, layers)?;
    if a_hat.dim() != (q, q) || mask.dim() != (q, q) {
        return Err(Error::shape(format!(
            "edge angles must be {q}x{q}, got {:?} and mask {:?}",
            a_hat.dim(),
            mask.dim()
        )));
    }
    let mut gates = Vec::new();
    let mut occurrences = Vec::new();
    push_encode(&mut gates, &mut occurrences, theta);
    for layer in 0..layers {
        push_conv(&mut gates, &mut occurrences, a_hat, mask);
        push_trainable(&mut gates, &mut occurrences, angles, layer, q);
    }
    Ok(BuiltCircuit { gates, occurrences })
}

/// Product state ⊗ Ry(θ_i)|0⟩.
pub fn encode_state(theta: &[f64]) -> Result<StateVector> {
    let mut state = StateVector::ground_state(theta.len())?;
    for (i, &t) in theta.iter().enumerate() {
        state.apply_gate(&GateOp::ry(i, t))?;
    }
    Ok(state)
}

/// Applies one message-passing round for the full (unmasked) angle matrix;
/// zero entries contribute identity phases.
pub fn quantum_graph_conv(state: &mut StateVector, a_hat: &ArrayView2<f64>) -> Result<()> {
    let q = state.num_qubits();
    if a_hat.dim() != (q, q) {
        return Err(Error::shape(format!(
            "angle matrix must be {q}x{q}, got {:?}",
            a_hat.dim()
        )));
    }
    for target in 0..q {
        state.apply_gate(&GateOp::u1(target, a_hat[(target, target)]))?;
        for control in 0..q {
            if control != target {
                state.apply_gate(&GateOp::cu1(control, target, a_hat[(target, control)]))?;
            }
        }
    }
    Ok(())
}

/// Applies one trainable layer (6q angles) to the state.
pub fn trainable_layer(state: &mut StateVector, angles: &[f64]) -> Result<()> {
    let q = state.num_qubits();
    if angles.len() != 6 * q {
        return Err(Error::shape(format!(
            "trainable layer on {q} wires needs {} angles, got {}",
            6 * q,
            angles.len()
        )));
    }
    for wire in 0..q {
        let at = 3 * wire;
        state.apply_gate(&GateOp::u3(wire, angles[at], angles[at + 1], angles[at + 2]))?;
    }
    for i in 0..q {
        let at = 3 * q + 3 * i;
        state.apply_gate(&GateOp::cu3(
            i,
            (i + 1) % q,
            angles[at],
            angles[at + 1],
            angles[at + 2],
        ))?;
    }
    Ok(())
}

/// Inserts random fixed rotations, then rewires occurrence gate indices to
/// the new positions. The builders mark every gate trainable and injection
/// preserves order while inserting only non-trainable gates, so the k-th
/// trainable gate of the result is original gate k.
pub fn inject_and_remap(
    mut built: BuiltCircuit,
    policy: &InjectionPolicy,
    seed: u64,
) -> Result<BuiltCircuit> {
    let mut rng = seeding::rng(seed, INJECTION_STREAM);
    let injected = inject_random_gates(&built.gates, policy, &mut rng)?;
    let positions: Vec<usize> = injected
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.trainable.then_some(i))
        .collect();
    if positions.len() != built.gates.len() {
        return Err(Error::config(
            "injection changed the number of trainable gates",
        ));
    }
    for occ in &mut built.occurrences {
        occ.gate = positions[occ.gate];
    }
    built.gates = injected;
    Ok(built)
}

/// Per-wire Z expectations, exact or via the Monte Carlo noisy channel. The
/// returned flag says whether any randomness actually entered.
fn measure(q: usize, gates: &[GateOp], noise: Option<&NoiseModel>) -> Result<(Vec<f64>, bool)> {
    match noise {
        None => Ok((circuit_expectations(q, gates)?, false)),
        Some(n) => {
            let m = noisy_forward(q, gates, n)?;
            let clean = n.is_gate_noiseless() && n.readout_flip == 0.0;
            Ok((m, !clean))
        }
    }
}

/// Readout vector: measurements first, then the skip values when present.
fn readout(m: &[f64], skip_out: Option<&Array1<f64>>) -> Array1<f64> {
    let q = m.len();
    let extra = skip_out.map_or(0, |s| s.len());
    let mut r = Array1::zeros(q + extra);
    r.slice_mut(s![..q]).assign(&ndarray::ArrayView1::from(m));
    if let Some(sk) = skip_out {
        r.slice_mut(s![q..]).assign(sk);
    }
    r
}

pub struct QuanPlainCache {
    pub mean_x: Array1<f64>,
    pub u: Array1<f64>,
    pub theta: Vec<f64>,
    pub circuit: BuiltCircuit,
    pub m: Vec<f64>,
    pub skip_out: Option<Array1<f64>>,
    pub r: Array1<f64>,
    pub logits: Vec<f64>,
    pub dlogits: Vec<f64>,
    pub xent: f64,
    pub label: usize,
    pub noisy: bool,
}

/// Pooling-free quantum forward: graph features are mean-pooled, projected to
/// q angle pre-activations, encoded, and processed by trainable layers only.
pub(super) fn quanplain_forward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
    mode: ForwardMode,
) -> Result<QuanPlainCache> {
    let d = cfg.feature_dim;
    let q = cfg.qubits;
    let mean_x = graph
        .x
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::shape("graph has no nodes"))?;
    if mean_x.len() != d {
        return Err(Error::shape(format!(
            "expected {d} features per node, got {}",
            mean_x.len()
        )));
    }
    let w_head = mat(params, "head.w", d, q)?;
    let b_head = vec1(params, "head.b")?;
    let u = mean_x.dot(&w_head) + &b_head;
    let theta: Vec<f64> = u.iter().map(|&v| PI * logistic(v)).collect();
    let angles = params.slice(block_id(params, "quantum.angles")?);
    let mut built = build_plain_circuit(&theta, angles, cfg.layers)?;
    if let Some((policy, seed)) = mode.injection {
        built = inject_and_remap(built, policy, seed)?;
    }
    let (m, noisy) = measure(q, &built.gates, mode.noise)?;
    let skip_out = if cfg.skip {
        let w_skip = mat(params, "skip.w", d, q)?;
        Some(mean_x.dot(&w_skip))
    } else {
        None
    };
    let r = readout(&m, skip_out.as_ref());
    let w_c = mat(params, "clf.w", cfg.readout_dim(), cfg.num_classes)?;
    let b_c = vec1(params, "clf.b")?;
    let logits = (r.dot(&w_c) + &b_c).to_vec();
    let (xent, dlogits) = softmax_xent(&logits, graph.label)?;
    Ok(QuanPlainCache {
        mean_x,
        u,
        theta,
        circuit: built,
        m,
        skip_out,
        r,
        logits,
        dlogits,
        xent,
        label: graph.label,
        noisy,
    })
}

pub struct QuanGcnCache {
    pub pool: PoolCache,
    /// Pooled adjacency with the implicit self-loop: `A_p + I`.
    pub m_mat: Array2<f64>,
    /// Smooth logistic values σ(m_mat), before masking.
    pub p_pre: Array2<f64>,
    pub mask: Array2<bool>,
    pub a_hat: Array2<f64>,
    pub p_sum: f64,
    pub entropy: f64,
    pub u: Array1<f64>,
    pub theta: Vec<f64>,
    pub circuit: BuiltCircuit,
    pub m: Vec<f64>,
    pub skip_out: Option<Array1<f64>>,
    pub r: Array1<f64>,
    pub logits: Vec<f64>,
    pub dlogits: Vec<f64>,
    pub xent: f64,
    pub loss: f64,
    pub label: usize,
    pub noisy: bool,
}

/// Full pooled forward: learned soft assignment, coarsened graph, message
/// passing circuit, readout, classifier, plus the entropy regularizer.
pub(super) fn quangcn_forward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
    mode: ForwardMode,
) -> Result<QuanGcnCache> {
    let d = cfg.feature_dim;
    let h = cfg.hidden;
    let q = cfg.qubits;
    let enc1 = DenseLayer::new(
        mat(params, "pool1.w", 2 * d, h)?,
        vec1(params, "pool1.b")?,
        Activation::Tanh,
    );
    let enc2 = DenseLayer::new(
        mat(params, "pool2.w", h, q)?,
        vec1(params, "pool2.b")?,
        Activation::None,
    );
    let pc = pool(&graph.a, &graph.x, &enc1, &enc2)?;
    quangcn_tail(graph, params, cfg, pc, mode)
}

/// Evaluates the pipeline from a fixed assignment matrix, bypassing the
/// encoder. Test hook: backward must not be run on the result.
pub fn quangcn_forward_from_s(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
    s: &Array2<f64>,
) -> Result<QuanGcnCache> {
    let n = graph.a.nrows();
    if s.nrows() != n || s.ncols() != cfg.qubits {
        return Err(Error::shape(format!(
            "assignment must be {n}x{}, got {}x{}",
            cfg.qubits,
            s.nrows(),
            s.ncols()
        )));
    }
    let (a_p, x_p) = super::pooled_from_s(&graph.a, &graph.x, s);
    let pc = PoolCache {
        xax: Array2::zeros((n, 2 * cfg.feature_dim)),
        pre1: Array2::zeros((n, cfg.hidden)),
        h1: Array2::zeros((n, cfg.hidden)),
        pre2: Array2::zeros((n, cfg.qubits)),
        s: s.clone(),
        a_p,
        x_p,
    };
    quangcn_tail(graph, params, cfg, pc, ForwardMode::default())
}

fn quangcn_tail(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
    pc: PoolCache,
    mode: ForwardMode,
) -> Result<QuanGcnCache> {
    let q = cfg.qubits;
    let mut m_mat = pc.a_p.clone();
    for i in 0..q {
        m_mat[(i, i)] += 1.0;
    }
    let na = angle_normalize(&m_mat, cfg.mask_threshold);
    let entropy = sparse_loss(&na.p)?;
    let p_sum = na.p.sum();
    let w_f = vec1(params, "feat.w")?;
    let b_f = vec1(params, "feat.b")?[0];
    let u = pc.x_p.dot(&w_f) + b_f;
    let theta: Vec<f64> = u.iter().map(|&v| PI * logistic(v)).collect();
    let angles = params.slice(block_id(params, "quantum.angles")?);
    let mut built = build_pooled_circuit(&theta, &na.a_hat, &na.mask, angles, cfg.layers)?;
    if let Some((policy, seed)) = mode.injection {
        built = inject_and_remap(built, policy, seed)?;
    }
    let (m, noisy) = measure(q, &built.gates, mode.noise)?;
    let skip_out = if cfg.skip {
        let w_skip = vec1(params, "skip.w")?;
        Some(pc.x_p.dot(&w_skip))
    } else {
        None
    };
    let r = readout(&m, skip_out.as_ref());
    let w_c = mat(params, "clf.w", cfg.readout_dim(), cfg.num_classes)?;
    let b_c = vec1(params, "clf.b")?;
    let logits = (r.dot(&w_c) + &b_c).to_vec();
    let (xent, dlogits) = softmax_xent(&logits, graph.label)?;
    let loss = xent + cfg.sparse_lambda * entropy;
    Ok(QuanGcnCache {
        pool: pc,
        m_mat,
        p_pre: na.p,
        mask: na.mask,
        a_hat: na.a_hat,
        p_sum,
        entropy,
        u,
        theta,
        circuit: built,
        m,
        skip_out,
        r,
        logits,
        dlogits,
        xent,
        loss,
        label: graph.label,
        noisy,
    })
}
