//! Parameter-shift gradients for quantum circuits and the hand-derived
//! reverse pass through the hybrid pipeline.
//!
//! `quantum_grad` differentiates every occurrence (gate, parameter) of a
//! circuit by evaluating it at shifted angles; the rules are exact for the
//! gate set used here, so the only error is floating-point roundoff.
//! `hybrid_backward` chains those partials with the analytic derivatives of
//! the classical stages: classifier, skip projection, angle maps, entropy
//! regularizer, pooling products, softmax assignment, and the encoder.

use ndarray::{s, Array1, Array2, Axis};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gates::{shift_rule_of, GateOp};
use crate::model::{
    block_id, logistic, mat, vec1, AngleRoute, Forward, GcnCache, Model, MlpCache, ModelConfig,
    Occurrence, PreparedGraph, QuanGcnCache, QuanPlainCache, SgcCache,
};
use crate::nn::{
    add_matrix_grad, add_vector_grad, Activation, Block, DenseLayer, ModelParams, Segment,
};
use crate::statevector::{run_circuit_into, StateVector};

/// Per-occurrence partial derivatives of every wire's Z expectation, plus the
/// number of circuit evaluations spent.
pub struct QuantumGrad {
    /// `partials[k][w]` = ∂⟨Z_w⟩ / ∂(angle of occurrence k).
    pub partials: Vec<Vec<f64>>,
    pub evaluations: usize,
}

/// Differentiates the circuit at each listed occurrence with its shift rule.
/// Every occurrence must point at a trainable gate parameter that has one.
pub fn quantum_grad(
    q: usize,
    circuit: &[GateOp],
    occurrences: &[Occurrence],
) -> Result<QuantumGrad> {
    for (k, occ) in occurrences.iter().enumerate() {
        let gate = circuit.get(occ.gate).ok_or_else(|| {
            Error::config(format!(
                "occurrence {k} points at gate {} of a {}-gate circuit",
                occ.gate,
                circuit.len()
            ))
        })?;
        if !gate.trainable {
            return Err(Error::config(format!(
                "occurrence {k} targets non-trainable gate {} ({})",
                occ.gate,
                gate.kind.label()
            )));
        }
        if occ.param >= gate.kind.arity() {
            return Err(Error::config(format!(
                "occurrence {k} parameter index {} out of range for {}",
                occ.param,
                gate.kind.label()
            )));
        }
        if shift_rule_of(gate.kind, occ.param)?.is_none() {
            return Err(Error::config(format!(
                "no shift rule for {} parameter {}",
                gate.kind.label(),
                occ.param
            )));
        }
    }
    let mut work: Vec<GateOp> = circuit.to_vec();
    let mut state = StateVector::ground_state(q)?;
    let mut plus = vec![0.0; q];
    let mut minus = vec![0.0; q];
    let mut partials = Vec::with_capacity(occurrences.len());
    let mut evaluations = 0usize;
    for occ in occurrences {
        let terms = shift_rule_of(work[occ.gate].kind, occ.param)?
            .expect("occurrences were validated above");
        let original = work[occ.gate].params[occ.param];
        let mut partial = vec![0.0; q];
        for term in terms {
            work[occ.gate].params[occ.param] = original + term.shift;
            state.reset_ground();
            run_circuit_into(&mut state, &work)?;
            state.expect_all_z_into(&mut plus);
            work[occ.gate].params[occ.param] = original - term.shift;
            state.reset_ground();
            run_circuit_into(&mut state, &work)?;
            state.expect_all_z_into(&mut minus);
            evaluations += 2;
            for w in 0..q {
                partial[w] += term.scale * (plus[w] - minus[w]);
            }
        }
        work[occ.gate].params[occ.param] = original;
        partials.push(partial);
    }
    Ok(QuantumGrad {
        partials,
        evaluations,
    })
}

/// Central finite differences, the independent check for every analytic
/// gradient here: grad[i] ≈ (f(x + h·e_i) − f(x − h·e_i)) / 2h.
pub fn finite_diff_oracle<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::config(format!(
            "finite-difference step must be positive and finite, got {h}"
        )));
    }
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Full-model gradient of the training loss for one graph.
#[derive(Debug)]
pub struct GradientReport {
    pub grad: Vec<f64>,
    pub classical_norm: f64,
    pub quantum_norm: f64,
    /// Circuit evaluations consumed: shift evaluations plus the one forward
    /// run. Zero for classical models.
    pub evaluations: usize,
}

/// Reverse pass for the cached forward of any model kind. The cache must
/// come from a noise-free forward; injection is fine because the cached
/// circuit and occurrence list already describe the perturbed circuit.
pub fn hybrid_backward(
    model: &Model,
    graph: &PreparedGraph,
    params: &ModelParams,
    fwd: &Forward,
) -> Result<GradientReport> {
    if fwd.is_noisy() {
        return Err(Error::config(
            "cannot back-propagate through a noisy measurement; rerun the forward pass without noise",
        ));
    }
    let cfg = &model.config;
    let mut grads = vec![0.0; params.len()];
    let evaluations = match fwd {
        Forward::Mlp(c) => {
            mlp_backward(params, cfg, c, &mut grads)?;
            0
        }
        Forward::Sgc(c) => {
            sgc_backward(graph, params, cfg, c, &mut grads)?;
            0
        }
        Forward::Gcn(c) => {
            gcn_backward(graph, params, cfg, c, &mut grads)?;
            0
        }
        Forward::QuanPlain(c) => quanplain_backward(params, cfg, c, &mut grads)?,
        Forward::QuanGcn(c) => quangcn_backward(graph, params, cfg, c, &mut grads)?,
    };
    for (i, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite gradient at {}",
                params.describe_index(i)
            )));
        }
    }
    let classical_norm = norm_of(&grads[params.segment_range(Segment::Classical)]);
    let quantum_norm = norm_of(&grads[params.segment_range(Segment::Quantum)]);
    Ok(GradientReport {
        grad: grads,
        classical_norm,
        quantum_norm,
        evaluations,
    })
}

fn norm_of(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

fn block<'a>(params: &'a ModelParams, name: &str) -> Result<&'a Block> {
    Ok(params.block(block_id(params, name)?))
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Cross-entropy head: accumulates classifier gradients and returns the
/// gradient with respect to the classifier input. `dlogits` is the cached
/// softmax-minus-one-hot vector from the forward pass.
fn classifier_backward(
    params: &ModelParams,
    grads: &mut [f64],
    features: &Array1<f64>,
    dlogits: &[f64],
    in_dim: usize,
    classes: usize,
) -> Result<Array1<f64>> {
    let dlogits = Array1::from_shape_fn(classes, |k| dlogits[k]);
    let w_c = mat(params, "clf.w", in_dim, classes)?;
    add_matrix_grad(grads, block(params, "clf.w")?, &outer(features, &dlogits));
    add_vector_grad(grads, block(params, "clf.b")?, &dlogits);
    Ok(w_c.dot(&dlogits))
}

fn mlp_backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    c: &MlpCache,
    grads: &mut [f64],
) -> Result<()> {
    let pooled = c.h1.row(0).to_owned();
    let dpooled = classifier_backward(
        params,
        grads,
        &pooled,
        &c.dlogits,
        cfg.hidden,
        cfg.num_classes,
    )?;
    let dense = DenseLayer::new(
        mat(params, "dense.w", cfg.feature_dim, cfg.hidden)?,
        vec1(params, "dense.b")?,
        Activation::Relu,
    );
    let d_out = dpooled.insert_axis(Axis(0));
    let (_dx, dw, db) = dense.backward(&c.mean_x.view(), &c.pre1, &d_out);
    add_matrix_grad(grads, block(params, "dense.w")?, &dw);
    add_vector_grad(grads, block(params, "dense.b")?, &db);
    Ok(())
}

fn sgc_backward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
    c: &SgcCache,
    grads: &mut [f64],
) -> Result<()> {
    let dpooled = classifier_backward(
        params,
        grads,
        &c.pooled,
        &c.dlogits,
        cfg.hidden,
        cfg.num_classes,
    )?;
    let n = graph.x.nrows();
    let dh1 = Array2::from_shape_fn((n, cfg.hidden), |(_, j)| dpooled[j] / n as f64);
    let dense = DenseLayer::new(
        mat(params, "dense.w", cfg.feature_dim, cfg.hidden)?,
        vec1(params, "dense.b")?,
        Activation::Relu,
    );
    let (_dx, dw, db) = dense.backward(&graph.x.view(), &c.pre1, &dh1);
    add_matrix_grad(grads, block(params, "dense.w")?, &dw);
    add_vector_grad(grads, block(params, "dense.b")?, &db);
    Ok(())
}

fn gcn_backward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
    c: &GcnCache,
    grads: &mut [f64],
) -> Result<()> {
    let a_norm = graph.a_norm.as_ref().ok_or_else(|| {
        Error::config("this model needs graphs prepared with the normalized adjacency")
    })?;
    let dpooled = classifier_backward(
        params,
        grads,
        &c.pooled,
        &c.dlogits,
        cfg.hidden,
        cfg.num_classes,
    )?;
    let n = c.h2.nrows();
    let dh2 = Array2::from_shape_fn((n, cfg.hidden), |(_, j)| dpooled[j] / n as f64);
    let gcn2 = DenseLayer::new(
        mat(params, "gcn2.w", cfg.hidden, cfg.hidden)?,
        vec1(params, "gcn2.b")?,
        Activation::Relu,
    );
    let (dax2, dw2, db2) = gcn2.backward(&c.ax2.view(), &c.pre2, &dh2);
    add_matrix_grad(grads, block(params, "gcn2.w")?, &dw2);
    add_vector_grad(grads, block(params, "gcn2.b")?, &db2);
    let dh1 = a_norm.t().dot(&dax2);
    let gcn1 = DenseLayer::new(
        mat(params, "gcn1.w", cfg.feature_dim, cfg.hidden)?,
        vec1(params, "gcn1.b")?,
        Activation::Relu,
    );
    let (_dax1, dw1, db1) = gcn1.backward(&c.ax1.view(), &c.pre1, &dh1);
    add_matrix_grad(grads, block(params, "gcn1.w")?, &dw1);
    add_vector_grad(grads, block(params, "gcn1.b")?, &db1);
    Ok(())
}

/// dθ_i → du_i through θ = π·σ(u).
fn du_from_dtheta(dtheta: &Array1<f64>, u: &Array1<f64>) -> Array1<f64> {
    Array1::from_shape_fn(u.len(), |i| {
        let sig = logistic(u[i]);
        dtheta[i] * PI * sig * (1.0 - sig)
    })
}

fn quanplain_backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    c: &QuanPlainCache,
    grads: &mut [f64],
) -> Result<usize> {
    let q = cfg.qubits;
    let dr = classifier_backward(
        params,
        grads,
        &c.r,
        &c.dlogits,
        cfg.readout_dim(),
        cfg.num_classes,
    )?;
    let dm = dr.slice(s![..q]).to_owned();
    if cfg.skip {
        let dskip = dr.slice(s![q..]).to_owned();
        add_matrix_grad(grads, block(params, "skip.w")?, &outer(&c.mean_x, &dskip));
    }
    let qg = quantum_grad(q, &c.circuit.gates, &c.circuit.occurrences)?;
    let quantum_offset = block(params, "quantum.angles")?.offset;
    let mut dtheta = Array1::zeros(q);
    for (occ, partial) in c.circuit.occurrences.iter().zip(&qg.partials) {
        let g: f64 = (0..q).map(|w| dm[w] * partial[w]).sum();
        match occ.route {
            AngleRoute::Encode(i) => dtheta[i] += g,
            AngleRoute::Slot(k) => grads[quantum_offset + k] += g,
            AngleRoute::Edge(i, j) => {
                return Err(Error::config(format!(
                    "unexpected edge angle ({i},{j}) in a pooling-free circuit"
                )));
            }
        }
    }
    let du = du_from_dtheta(&dtheta, &c.u);
    add_matrix_grad(grads, block(params, "head.w")?, &outer(&c.mean_x, &du));
    add_vector_grad(grads, block(params, "head.b")?, &du);
    Ok(qg.evaluations + 1)
}

fn quangcn_backward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
    c: &QuanGcnCache,
    grads: &mut [f64],
) -> Result<usize> {
    let q = cfg.qubits;
    let d = cfg.feature_dim;
    let dr = classifier_backward(
        params,
        grads,
        &c.r,
        &c.dlogits,
        cfg.readout_dim(),
        cfg.num_classes,
    )?;
    let dm = dr.slice(s![..q]).to_owned();
    let mut dx_p = Array2::<f64>::zeros((q, d));
    if cfg.skip {
        let dskip = dr.slice(s![q..]).to_owned();
        let w_skip = vec1(params, "skip.w")?;
        add_vector_grad(grads, block(params, "skip.w")?, &c.pool.x_p.t().dot(&dskip));
        for i in 0..q {
            for a in 0..d {
                dx_p[(i, a)] += dskip[i] * w_skip[a];
            }
        }
    }

    let qg = quantum_grad(q, &c.circuit.gates, &c.circuit.occurrences)?;
    let quantum_offset = block(params, "quantum.angles")?.offset;
    let mut dtheta = Array1::<f64>::zeros(q);
    let mut da_hat = Array2::<f64>::zeros((q, q));
    for (occ, partial) in c.circuit.occurrences.iter().zip(&qg.partials) {
        let g: f64 = (0..q).map(|w| dm[w] * partial[w]).sum();
        match occ.route {
            AngleRoute::Encode(i) => dtheta[i] += g,
            AngleRoute::Slot(k) => grads[quantum_offset + k] += g,
            AngleRoute::Edge(i, j) => da_hat[(i, j)] += g,
        }
    }

    // Feature head u = X_p·w_f + b_f.
    let du = du_from_dtheta(&dtheta, &c.u);
    add_vector_grad(grads, block(params, "feat.w")?, &c.pool.x_p.t().dot(&du));
    add_vector_grad(grads, block(params, "feat.b")?, &Array1::from_elem(1, du.sum()));
    let w_f = vec1(params, "feat.w")?;
    for i in 0..q {
        for a in 0..d {
            dx_p[(i, a)] += du[i] * w_f[a];
        }
    }

    // Edge weights: circuit angles contribute π·dÂ on surviving entries (the
    // mask is a constant circuit-build decision), the entropy regularizer
    // contributes its smooth derivative everywhere.
    let mut dp = Array2::<f64>::zeros((q, q));
    for i in 0..q {
        for j in 0..q {
            if c.mask[(i, j)] {
                dp[(i, j)] += PI * da_hat[(i, j)];
            }
            if cfg.sparse_lambda > 0.0 && c.p_sum > 0.0 {
                let ptilde = c.p_pre[(i, j)] / c.p_sum;
                dp[(i, j)] += cfg.sparse_lambda * (-ptilde.ln() - c.entropy) / c.p_sum;
            }
        }
    }
    // Through σ, then the self-loop shift (identity derivative).
    let da_p = &dp * &c.p_pre.mapv(|p| p * (1.0 - p));

    // Pooling products: A_p = SᵀAS gives dS += A·S·(G + Gᵀ); X_p = SᵀX gives
    // dS += X·dX_pᵀ.
    let s_mat = &c.pool.s;
    let g_sym = &da_p + &da_p.t();
    let ds = graph.a.dot(s_mat).dot(&g_sym) + graph.x.dot(&dx_p.t());

    // Row-softmax backward: dz_i = s_i ⊙ (ds_i − ⟨ds_i, s_i⟩).
    let n = s_mat.nrows();
    let mut dz = Array2::zeros((n, q));
    for i in 0..n {
        let srow = s_mat.row(i);
        let dsrow = ds.row(i);
        let dot = srow.dot(&dsrow);
        for j in 0..q {
            dz[(i, j)] = srow[j] * (dsrow[j] - dot);
        }
    }

    let enc2 = DenseLayer::new(
        mat(params, "pool2.w", cfg.hidden, q)?,
        vec1(params, "pool2.b")?,
        Activation::None,
    );
    let (dh1, dw2, db2) = enc2.backward(&c.pool.h1.view(), &c.pool.pre2, &dz);
    add_matrix_grad(grads, block(params, "pool2.w")?, &dw2);
    add_vector_grad(grads, block(params, "pool2.b")?, &db2);
    let enc1 = DenseLayer::new(
        mat(params, "pool1.w", 2 * d, cfg.hidden)?,
        vec1(params, "pool1.b")?,
        Activation::Tanh,
    );
    let (_dxax, dw1, db1) = enc1.backward(&c.pool.xax.view(), &c.pool.pre1, &dh1);
    add_matrix_grad(grads, block(params, "pool1.w")?, &dw1);
    add_vector_grad(grads, block(params, "pool1.b")?, &db1);
    Ok(qg.evaluations + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{shift_evaluations, GateKind};
    use crate::model::{
        angle_normalize, build_plain_circuit, build_pooled_circuit, ForwardMode, Model,
        ModelConfig, ModelKind,
    };
    use crate::noise::{InjectionPolicy, NoiseModel};
    use crate::statevector::circuit_expectations;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;


    #[test]
    fn finite_differences_recover_polynomial_gradients() {
        let f = |x: &[f64]| Ok(x[0] * x[0] + 3.0 * x[0] * x[1]);
        let g = finite_diff_oracle(f, &[2.0, -1.0], 1e-4).unwrap();
        assert!((g[0] - (2.0 * 2.0 + 3.0 * -1.0)).abs() < 1e-8);
        assert!((g[1] - 3.0 * 2.0).abs() < 1e-8);
        assert!(finite_diff_oracle(f, &[0.0], 0.0).is_err());
        assert!(finite_diff_oracle(f, &[0.0], f64::NAN).is_err());
    }

    fn random_pooled_circuit(
        rng: &mut ChaCha8Rng,
        q: usize,
        layers: usize,
    ) -> crate::model::BuiltCircuit {
        let theta: Vec<f64> = (0..q).map(|_| rng.gen_range(0.0..PI)).collect();
        let weights = Array2::from_shape_fn((q, q), |_| rng.gen_range(-2.0..2.0));
        let na = angle_normalize(&weights, 0.55);
        let angles: Vec<f64> = (0..layers * 6 * q)
            .map(|_| rng.gen_range(-PI..PI))
            .collect();
        build_pooled_circuit(&theta, &na.a_hat, &na.mask, &angles, layers).unwrap()
    }

    #[test]
    fn shift_partials_match_finite_differences_on_every_wire() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &q in &[2usize, 3] {
            let built = random_pooled_circuit(&mut rng, q, 1);
            let qg = quantum_grad(q, &built.gates, &built.occurrences).unwrap();
            for (occ, partial) in built.occurrences.iter().zip(&qg.partials) {
                let base = built.gates[occ.gate].params[occ.param];
                for w in 0..q {
                    let f = |x: &[f64]| {
                        let mut gates = built.gates.clone();
                        gates[occ.gate].params[occ.param] = x[0];
                        Ok(circuit_expectations(q, &gates)?[w])
                    };
                    let fd = finite_diff_oracle(f, &[base], 1e-5).unwrap()[0];
                    assert!(
                        (partial[w] - fd).abs() < 1e-6,
                        "q={q} occ@gate{} param{} wire{w}: shift {} vs fd {fd}",
                        occ.gate,
                        occ.param,
                        partial[w]
                    );
                }
            }
        }
    }

    #[test]
    fn evaluation_count_sums_the_per_rule_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = 2;
        let theta: Vec<f64> = (0..q).map(|_| rng.gen_range(0.0..PI)).collect();
        let angles: Vec<f64> = (0..6 * q).map(|_| rng.gen_range(-PI..PI)).collect();
        let built = build_plain_circuit(&theta, &angles, 1).unwrap();
        let qg = quantum_grad(q, &built.gates, &built.occurrences).unwrap();
        let expected: usize = built
            .occurrences
            .iter()
            .map(|occ| shift_evaluations(built.gates[occ.gate].kind, occ.param).unwrap())
            .sum();
        assert_eq!(qg.evaluations, expected);
        // Encode 2·RY + 2·U3 (3 angles) + 2·CU3 (θ costs 4, φ and λ cost 2).
        assert_eq!(expected, 2 * 2 + 6 * 2 + 2 * (4 + 2 + 2));
    }

    #[test]
    fn trailing_diagonal_gate_has_negligible_partial() {
        // A phase gate at the very end cannot move any Z expectation; the
        // shifted evaluations agree up to roundoff.
        let gates = vec![
            GateOp::ry(0, 0.7).trainable(),
            GateOp::u1(0, 0.4).trainable(),
        ];
        let occurrences = vec![Occurrence {
            gate: 1,
            param: 0,
            route: AngleRoute::Slot(0),
        }];
        let qg = quantum_grad(2, &gates, &occurrences).unwrap();
        for w in 0..2 {
            assert!(qg.partials[0][w].abs() < 1e-13);
        }
    }

    #[test]
    fn occurrence_validation_rejects_bad_references() {
        let gates = vec![
            GateOp::ry(0, 0.3).trainable(),
            GateOp::pauli_x(1),
            GateOp::ry(1, 0.2),
        ];
        let occ = |gate, param| Occurrence {
            gate,
            param,
            route: AngleRoute::Slot(0),
        };
        // Out-of-range gate index.
        assert!(quantum_grad(2, &gates, &[occ(3, 0)]).is_err());
        // Non-trainable gate.
        assert!(quantum_grad(2, &gates, &[occ(2, 0)]).is_err());
        // Parameter index out of range for the gate kind.
        assert!(quantum_grad(2, &gates, &[occ(0, 1)]).is_err());
        // Valid single occurrence passes.
        assert!(quantum_grad(2, &gates, &[occ(0, 0)]).is_ok());
    }

    fn ring_graph(d: usize, kind: ModelKind) -> PreparedGraph {
        let a = array![
            [0.0, 1.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 1.0, 0.0]
        ];
        let x = Array2::from_shape_fn((5, d), |(i, j)| {
            0.4 * ((i * 7 + 3 * j + 1) as f64).sin()
        });
        let a_norm = (kind == ModelKind::Gcn)
            .then(|| crate::nn::normalized_adjacency(&a.view()).unwrap());
        PreparedGraph {
            a,
            x,
            a_norm,
            label: 1,
        }
    }

    fn config_for(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            feature_dim: 2,
            num_classes: 2,
            qubits: 3,
            layers: 1,
            hidden: 4,
            skip: kind.is_quantum(),
            sparse_lambda: if kind == ModelKind::QuanGcn { 0.3 } else { 0.0 },
            mask_threshold: 0.55,
            sgc_hops: 2,
        }
    }

    fn check_hybrid_against_fd(kind: ModelKind, seed: u64, tol: f64) {
        let cfg = config_for(kind);
        let model = Model::new(cfg).unwrap();
        let graph = ring_graph(2, kind);
        let params = model.init_params(seed).unwrap();
        if kind == ModelKind::QuanGcn {
            // Keep the probe away from the gate-elision boundary so the loss
            // is differentiable at this point.
            if let Forward::QuanGcn(c) = model.forward(&graph, &params).unwrap() {
                let margin = c
                    .p_pre
                    .iter()
                    .map(|p| (p - model.config.mask_threshold).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!(margin > 1e-3, "test point too close to the mask boundary");
            }
        }
        let fwd = model.forward(&graph, &params).unwrap();
        let report = hybrid_backward(&model, &graph, &params, &fwd).unwrap();
        let f = |x: &[f64]| {
            let mut p = model.build_params()?;
            p.set_values(x)?;
            Ok(model.forward(&graph, &p)?.loss())
        };
        let fd = finite_diff_oracle(f, params.values(), 1e-5).unwrap();
        for i in 0..fd.len() {
            let diff = (report.grad[i] - fd[i]).abs();
            assert!(
                diff < tol,
                "{kind:?} grad mismatch at {}: analytic {} vs fd {} (|Δ|={diff})",
                params.describe_index(i),
                report.grad[i],
                fd[i]
            );
        }
        if kind.is_quantum() {
            assert!(report.evaluations > 1);
            assert!(report.quantum_norm > 0.0);
        } else {
            assert_eq!(report.evaluations, 0);
            assert_eq!(report.quantum_norm, 0.0);
        }
    }

    #[test]
    fn hybrid_gradients_match_finite_differences_for_classical_kinds() {
        check_hybrid_against_fd(ModelKind::Mlp, 3, 1e-6);
        check_hybrid_against_fd(ModelKind::Sgc, 4, 1e-6);
        check_hybrid_against_fd(ModelKind::Gcn, 5, 1e-6);
    }

    #[test]
    fn hybrid_gradients_match_finite_differences_for_quantum_kinds() {
        check_hybrid_against_fd(ModelKind::QuanMlp, 6, 1e-5);
        check_hybrid_against_fd(ModelKind::QuanSgc, 7, 1e-5);
        check_hybrid_against_fd(ModelKind::QuanGcn, 8, 1e-5);
    }

    #[test]
    fn injected_forward_gradients_match_finite_differences() {
        let kind = ModelKind::QuanMlp;
        let cfg = config_for(kind);
        let model = Model::new(cfg).unwrap();
        let graph = ring_graph(2, kind);
        let params = model.init_params(9).unwrap();
        let policy = InjectionPolicy {
            insert_prob: 0.5,
            angle_spread: PI / 8.0,
            kinds: vec![GateKind::Ry],
        };
        let mode = ForwardMode {
            injection: Some((&policy, 77)),
            noise: None,
        };
        let fwd = model.forward_with(&graph, &params, mode).unwrap();
        let report = hybrid_backward(&model, &graph, &params, &fwd).unwrap();
        let f = |x: &[f64]| {
            let mut p = model.build_params()?;
            p.set_values(x)?;
            let mode = ForwardMode {
                injection: Some((&policy, 77)),
                noise: None,
            };
            Ok(model.forward_with(&graph, &p, mode)?.loss())
        };
        let fd = finite_diff_oracle(f, params.values(), 1e-5).unwrap();
        for i in 0..fd.len() {
            assert!(
                (report.grad[i] - fd[i]).abs() < 1e-5,
                "grad mismatch at {} with injection",
                params.describe_index(i)
            );
        }
    }

    #[test]
    fn noisy_caches_are_rejected() {
        let kind = ModelKind::QuanMlp;
        let model = Model::new(config_for(kind)).unwrap();
        let graph = ring_graph(2, kind);
        let params = model.init_params(2).unwrap();
        let noise = NoiseModel::default_preset();
        let mode = ForwardMode {
            injection: None,
            noise: Some(&noise),
        };
        let fwd = model.forward_with(&graph, &params, mode).unwrap();
        let err = hybrid_backward(&model, &graph, &params, &fwd).unwrap_err();
        assert!(err.to_string().contains("noisy"));
    }
}
