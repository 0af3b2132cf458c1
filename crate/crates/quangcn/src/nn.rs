//! Minimal dense neural-network kernel with hand-written reverse-mode
//! gradients: linear layers, activations, softmax cross-entropy, Adam, and
//! the flat trainable-parameter registry shared by every model variant.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::None => x,
        }
    }

    pub fn derivative_at(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::None => 1.0,
        }
    }
}

/// `out = activation(x · W + b)`, rows of `x` are batch entries.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(w: Array2<f64>, b: Array1<f64>, activation: Activation) -> Self {
        assert_eq!(w.ncols(), b.len(), "bias width must match output width");
        DenseLayer { w, b, activation }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Returns (post-activation, pre-activation); the backward pass needs
    /// the pre-activation values.
    pub fn forward_cached(&self, x: &ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        if x.ncols() != self.w.nrows() {
            return Err(Error::shape(format!(
                "dense layer expects {} input columns, got {}",
                self.w.nrows(),
                x.ncols()
            )));
        }
        let mut pre = x.dot(&self.w);
        pre += &self.b;
        let out = pre.mapv(|v| self.activation.apply(v));
        Ok((out, pre))
    }

    /// Reverse mode through the layer: given the forward input, the cached
    /// pre-activation, and the loss gradient at the output, returns
    /// (d_input, d_w, d_b).
    pub fn backward(
        &self,
        x: &ArrayView2<f64>,
        pre: &Array2<f64>,
        d_out: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let d_pre = d_out * &pre.mapv(|v| self.activation.derivative_at(v));
        let d_w = x.t().dot(&d_pre);
        let d_b = d_pre.sum_axis(Axis(0));
        let d_x = d_pre.dot(&self.w.t());
        (d_x, d_w, d_b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    Sum,
    Mean,
}

/// One graph-convolution layer: row i of the output is
/// `activation(Σ_j a_ij · x_j · W + b)`; MEAN divides each row by its
/// neighborhood weight Σ_j a_ij. `a_hat` must already carry self-loops.
pub fn gcn_layer(
    a_hat: &ArrayView2<f64>,
    x: &ArrayView2<f64>,
    layer: &DenseLayer,
    aggregate: Aggregate,
) -> Result<Array2<f64>> {
    let n = a_hat.nrows();
    if a_hat.ncols() != n {
        return Err(Error::shape(format!(
            "adjacency must be square, got {n}x{}",
            a_hat.ncols()
        )));
    }
    if x.nrows() != n {
        return Err(Error::shape(format!(
            "feature rows {} do not match {n} nodes",
            x.nrows()
        )));
    }
    for i in 0..n {
        if a_hat[(i, i)] <= 0.0 {
            return Err(Error::config(format!(
                "gcn_layer expects self-loops, a[{i}][{i}] = {}",
                a_hat[(i, i)]
            )));
        }
    }
    let agg = match aggregate {
        Aggregate::Sum => a_hat.dot(x),
        Aggregate::Mean => {
            let mut agg = a_hat.dot(x);
            for (i, mut row) in agg.axis_iter_mut(Axis(0)).enumerate() {
                let w = a_hat.row(i).sum();
                row.mapv_inplace(|v| v / w);
            }
            agg
        }
    };
    layer.forward(&agg.view())
}

/// `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` with D̃ the degree matrix of A + I.
/// Every degree is at least 1, so the normalization never divides by zero.
pub fn normalized_adjacency(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::shape(format!(
            "adjacency must be square, got {n}x{}",
            a.ncols()
        )));
    }
    let mut tilde = a.to_owned();
    for i in 0..n {
        tilde[(i, i)] += 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / tilde.row(i).sum().sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            tilde[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(tilde)
}

/// `Â^K · X`: the propagation-then-linear simplification of a K-layer GCN.
pub fn sgc_precompute(a: &ArrayView2<f64>, x: &ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::config("sgc_precompute needs at least one hop"));
    }
    if x.nrows() != a.nrows() {
        return Err(Error::shape(format!(
            "feature rows {} do not match {} nodes",
            x.nrows(),
            a.nrows()
        )));
    }
    let a_hat = normalized_adjacency(a)?;
    let mut out = x.to_owned();
    for _ in 0..k {
        out = a_hat.dot(&out);
    }
    Ok(out)
}

/// Numerically stabilized softmax cross-entropy; returns the loss and its
/// gradient with respect to the logits (softmax − one_hot).
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::config(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::numeric("non-finite logits"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut grad: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = grad.iter().sum();
    let loss = max + z.ln() - logits[label];
    for g in grad.iter_mut() {
        *g /= z;
    }
    grad[label] -= 1.0;
    Ok((loss, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    Classical,
    Quantum,
}

/// How a block is filled by `init_params`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    XavierUniform { fan_in: usize, fan_out: usize },
    Zero,
    UniformAngle { half_width: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub segment: Segment,
    pub init: Init,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockId(usize);

/// All trainable scalars of a model in one flat vector, partitioned into a
/// classical prefix and a quantum suffix. The block registry is a bijection
/// onto 0..len: blocks are contiguous, ordered, and cover every index.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    values: Vec<f64>,
    blocks: Vec<Block>,
}

#[derive(Default)]
pub struct ParamsBuilder {
    blocks: Vec<Block>,
    len: usize,
    quantum_seen: bool,
}

impl ParamsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, len: usize, segment: Segment, init: Init) -> Result<BlockId> {
        if len == 0 {
            return Err(Error::config(format!("block {name} has zero length")));
        }
        if self.blocks.iter().any(|b| b.name == name) {
            return Err(Error::config(format!("duplicate block name {name}")));
        }
        match segment {
            Segment::Quantum => self.quantum_seen = true,
            Segment::Classical if self.quantum_seen => {
                return Err(Error::config(format!(
                    "classical block {name} after quantum blocks would split the segments"
                )));
            }
            Segment::Classical => {}
        }
        let id = BlockId(self.blocks.len());
        self.blocks.push(Block {
            name: name.to_string(),
            offset: self.len,
            len,
            segment,
            init,
        });
        self.len += len;
        Ok(id)
    }

    pub fn build(self) -> ModelParams {
        ModelParams {
            values: vec![0.0; self.len],
            blocks: self.blocks,
        }
    }
}

impl ModelParams {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::shape(format!(
                "parameter vector length {} does not match registry length {}",
                values.len(),
                self.values.len()
            )));
        }
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn slice(&self, id: BlockId) -> &[f64] {
        let b = &self.blocks[id.0];
        &self.values[b.offset..b.offset + b.len]
    }

    pub fn slice_mut(&mut self, id: BlockId) -> &mut [f64] {
        let b = &self.blocks[id.0];
        &mut self.values[b.offset..b.offset + b.len]
    }

    /// Copies a block out as a row-major matrix.
    pub fn matrix(&self, id: BlockId, rows: usize, cols: usize) -> Array2<f64> {
        let s = self.slice(id);
        assert_eq!(s.len(), rows * cols, "block {} shape", self.block(id).name);
        Array2::from_shape_vec((rows, cols), s.to_vec()).expect("shape checked")
    }

    pub fn vector(&self, id: BlockId) -> Array1<f64> {
        Array1::from_vec(self.slice(id).to_vec())
    }

    pub fn segment_range(&self, segment: Segment) -> std::ops::Range<usize> {
        let mut start = usize::MAX;
        let mut end = 0;
        for b in &self.blocks {
            if b.segment == segment {
                start = start.min(b.offset);
                end = end.max(b.offset + b.len);
            }
        }
        if start == usize::MAX {
            0..0
        } else {
            start..end
        }
    }

    /// The registry must partition 0..len exactly.
    pub fn check_registry(&self) -> Result<()> {
        let mut expected = 0;
        for b in &self.blocks {
            if b.offset != expected {
                return Err(Error::config(format!(
                    "block {} starts at {} instead of {expected}",
                    b.name, b.offset
                )));
            }
            expected += b.len;
        }
        if expected != self.values.len() {
            return Err(Error::config(format!(
                "blocks cover {expected} scalars, vector holds {}",
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Human-readable location of a flat index, for diagnostics.
    pub fn describe_index(&self, flat: usize) -> String {
        for b in &self.blocks {
            if flat >= b.offset && flat < b.offset + b.len {
                return format!("{}[{}]", b.name, flat - b.offset);
            }
        }
        format!("index {flat} (outside registry)")
    }

    /// Fills every block according to its declared initializer, in block
    /// order, so initialization depends only on the generator seed.
    pub fn init_params<R: Rng>(&mut self, rng: &mut R) {
        for bi in 0..self.blocks.len() {
            let (offset, len, init) = {
                let b = &self.blocks[bi];
                (b.offset, b.len, b.init)
            };
            let slice = &mut self.values[offset..offset + len];
            match init {
                Init::Zero => slice.fill(0.0),
                Init::XavierUniform { fan_in, fan_out } => {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for v in slice.iter_mut() {
                        *v = rng.gen_range(-a..a);
                    }
                }
                Init::UniformAngle { half_width } => {
                    for v in slice.iter_mut() {
                        *v = rng.gen_range(-half_width..half_width);
                    }
                }
            }
        }
    }
}

/// Adds a matrix-shaped gradient into the flat gradient vector at a block.
pub fn add_matrix_grad(grads: &mut [f64], block: &Block, g: &Array2<f64>) {
    debug_assert_eq!(block.len, g.len(), "block {} shape", block.name);
    for (i, v) in g.iter().enumerate() {
        grads[block.offset + i] += v;
    }
}

pub fn add_vector_grad(grads: &mut [f64], block: &Block, g: &Array1<f64>) {
    debug_assert_eq!(block.len, g.len(), "block {} shape", block.name);
    for (i, v) in g.iter().enumerate() {
        grads[block.offset + i] += v;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Standard Adam update with bias correction. A non-finite gradient aborts
/// with a diagnostic naming the offending parameter.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[f64],
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::shape(format!(
            "gradient length {} does not match parameter length {}",
            grads.len(),
            params.len()
        )));
    }
    for (i, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite gradient at {} (flat index {i})",
                params.describe_index(i)
            )));
        }
    }
    state.t += 1;
    let c1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let c2 = 1.0 - hyper.beta2.powi(state.t as i32);
    let values = params.values_mut();
    for i in 0..values.len() {
        let g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        values[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
    Ok(())
}
