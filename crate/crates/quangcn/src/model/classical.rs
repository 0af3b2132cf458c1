//! Forward passes for the classical baselines: a mean-pooled MLP, a
//! simplified graph convolution (features pre-propagated with Â^K), and a
//! two-layer graph convolution network.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::nn::{softmax_xent, Activation, DenseLayer, ModelParams};

use super::{mat, vec1, ModelConfig, PreparedGraph};

fn mean_rows(x: &Array2<f64>) -> Result<Array1<f64>> {
    x.mean_axis(Axis(0))
        .ok_or_else(|| Error::shape("graph has no nodes"))
}

fn classify(
    params: &ModelParams,
    in_dim: usize,
    classes: usize,
    features: &Array1<f64>,
    label: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let w_c = mat(params, "clf.w", in_dim, classes)?;
    let b_c = vec1(params, "clf.b")?;
    let logits = (features.dot(&w_c) + &b_c).to_vec();
    let (xent, dlogits) = softmax_xent(&logits, label)?;
    Ok((logits, dlogits, xent))
}

pub struct MlpCache {
    /// Mean-pooled features as a single-row matrix.
    pub mean_x: Array2<f64>,
    pub pre1: Array2<f64>,
    pub h1: Array2<f64>,
    pub logits: Vec<f64>,
    pub dlogits: Vec<f64>,
    pub xent: f64,
    pub label: usize,
}

pub(super) fn mlp_forward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<MlpCache> {
    let mean_x = mean_rows(&graph.x)?.insert_axis(Axis(0));
    let dense = DenseLayer::new(
        mat(params, "dense.w", cfg.feature_dim, cfg.hidden)?,
        vec1(params, "dense.b")?,
        Activation::Relu,
    );
    let (h1, pre1) = dense.forward_cached(&mean_x.view())?;
    let pooled = h1.row(0).to_owned();
    let (logits, dlogits, xent) =
        classify(params, cfg.hidden, cfg.num_classes, &pooled, graph.label)?;
    Ok(MlpCache {
        mean_x,
        pre1,
        h1,
        logits,
        dlogits,
        xent,
        label: graph.label,
    })
}

pub struct SgcCache {
    pub pre1: Array2<f64>,
    pub h1: Array2<f64>,
    pub pooled: Array1<f64>,
    pub logits: Vec<f64>,
    pub dlogits: Vec<f64>,
    pub xent: f64,
    pub label: usize,
}

/// The propagation Â^K X happened once at preparation time; here each node
/// passes through a dense relu layer before mean readout.
pub(super) fn sgc_forward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<SgcCache> {
    let dense = DenseLayer::new(
        mat(params, "dense.w", cfg.feature_dim, cfg.hidden)?,
        vec1(params, "dense.b")?,
        Activation::Relu,
    );
    let (h1, pre1) = dense.forward_cached(&graph.x.view())?;
    let pooled = mean_rows(&h1)?;
    let (logits, dlogits, xent) =
        classify(params, cfg.hidden, cfg.num_classes, &pooled, graph.label)?;
    Ok(SgcCache {
        pre1,
        h1,
        pooled,
        logits,
        dlogits,
        xent,
        label: graph.label,
    })
}

pub struct GcnCache {
    pub ax1: Array2<f64>,
    pub pre1: Array2<f64>,
    pub h1: Array2<f64>,
    pub ax2: Array2<f64>,
    pub pre2: Array2<f64>,
    pub h2: Array2<f64>,
    pub pooled: Array1<f64>,
    pub logits: Vec<f64>,
    pub dlogits: Vec<f64>,
    pub xent: f64,
    pub label: usize,
}

/// Two rounds of normalized-adjacency aggregation with dense relu layers,
/// then mean readout.
pub(super) fn gcn_forward(
    graph: &PreparedGraph,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<GcnCache> {
    let a_norm = graph.a_norm.as_ref().ok_or_else(|| {
        Error::config("this model needs graphs prepared with the normalized adjacency")
    })?;
    let gcn1 = DenseLayer::new(
        mat(params, "gcn1.w", cfg.feature_dim, cfg.hidden)?,
        vec1(params, "gcn1.b")?,
        Activation::Relu,
    );
    let gcn2 = DenseLayer::new(
        mat(params, "gcn2.w", cfg.hidden, cfg.hidden)?,
        vec1(params, "gcn2.b")?,
        Activation::Relu,
    );
    let ax1 = a_norm.dot(&graph.x);
    let (h1, pre1) = gcn1.forward_cached(&ax1.view())?;
    let ax2 = a_norm.dot(&h1);
    let (h2, pre2) = gcn2.forward_cached(&ax2.view())?;
    let pooled = mean_rows(&h2)?;
    let (logits, dlogits, xent) =
        classify(params, cfg.hidden, cfg.num_classes, &pooled, graph.label)?;
    Ok(GcnCache {
        ax1,
        pre1,
        h1,
        ax2,
        pre2,
        h2,
        pooled,
        logits,
        dlogits,
        xent,
        label: graph.label,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Forward, Model, ModelConfig, ModelKind};
    use super::*;
    use crate::nn::{gcn_layer, normalized_adjacency, Aggregate};
    use ndarray::array;

    fn cfg(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            feature_dim: 2,
            num_classes: 2,
            qubits: 4,
            layers: 2,
            hidden: 5,
            skip: false,
            sparse_lambda: 0.0,
            mask_threshold: 0.55,
            sgc_hops: 2,
        }
    }

    fn path_graph(kind: ModelKind) -> PreparedGraph {
        let a = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let x = array![[0.2, -0.4], [1.0, 0.3], [-0.5, 0.8]];
        let a_norm = (kind == ModelKind::Gcn)
            .then(|| normalized_adjacency(&a.view()).unwrap());
        PreparedGraph {
            a,
            x,
            a_norm,
            label: 0,
        }
    }

    #[test]
    fn mlp_matches_hand_computation() {
        let model = Model::new(cfg(ModelKind::Mlp)).unwrap();
        let params = model.init_params(2).unwrap();
        let g = path_graph(ModelKind::Mlp);
        let fwd = model.forward(&g, &params).unwrap();
        let cache = match &fwd {
            Forward::Mlp(c) => c,
            _ => panic!("wrong arm"),
        };
        let mean = g.x.mean_axis(Axis(0)).unwrap();
        let w = mat(&params, "dense.w", 2, 5).unwrap();
        let b = vec1(&params, "dense.b").unwrap();
        let pre = mean.dot(&w) + &b;
        for j in 0..5 {
            assert!((cache.pre1[(0, j)] - pre[j]).abs() < 1e-12);
            assert!((cache.h1[(0, j)] - pre[j].max(0.0)).abs() < 1e-12);
        }
        let wc = mat(&params, "clf.w", 5, 2).unwrap();
        let bc = vec1(&params, "clf.b").unwrap();
        let logits = cache.h1.row(0).dot(&wc) + &bc;
        for k in 0..2 {
            assert!((cache.logits[k] - logits[k]).abs() < 1e-12);
        }
        assert!(cache.xent.is_finite());
    }

    #[test]
    fn sgc_pools_the_dense_layer_output() {
        let model = Model::new(cfg(ModelKind::Sgc)).unwrap();
        let params = model.init_params(4).unwrap();
        let g = path_graph(ModelKind::Sgc);
        let fwd = model.forward(&g, &params).unwrap();
        let cache = match &fwd {
            Forward::Sgc(c) => c,
            _ => panic!("wrong arm"),
        };
        assert_eq!(cache.h1.dim(), (3, 5));
        let mean = cache.h1.mean_axis(Axis(0)).unwrap();
        for j in 0..5 {
            assert!((cache.pooled[j] - mean[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn gcn_composes_two_aggregation_layers() {
        let model = Model::new(cfg(ModelKind::Gcn)).unwrap();
        let params = model.init_params(6).unwrap();
        let g = path_graph(ModelKind::Gcn);
        let fwd = model.forward(&g, &params).unwrap();
        let cache = match &fwd {
            Forward::Gcn(c) => c,
            _ => panic!("wrong arm"),
        };
        let a_norm = g.a_norm.clone().unwrap();
        let gcn1 = DenseLayer::new(
            mat(&params, "gcn1.w", 2, 5).unwrap(),
            vec1(&params, "gcn1.b").unwrap(),
            Activation::Relu,
        );
        let gcn2 = DenseLayer::new(
            mat(&params, "gcn2.w", 5, 5).unwrap(),
            vec1(&params, "gcn2.b").unwrap(),
            Activation::Relu,
        );
        let h1 = gcn_layer(&a_norm.view(), &g.x.view(), &gcn1, Aggregate::Sum).unwrap();
        let h2 = gcn_layer(&a_norm.view(), &h1.view(), &gcn2, Aggregate::Sum).unwrap();
        for ((i, j), &v) in h2.indexed_iter() {
            assert!((cache.h2[(i, j)] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gcn_requires_the_normalized_adjacency() {
        let model = Model::new(cfg(ModelKind::Gcn)).unwrap();
        let params = model.init_params(6).unwrap();
        let mut g = path_graph(ModelKind::Gcn);
        g.a_norm = None;
        assert!(model.forward(&g, &params).is_err());
    }
}
