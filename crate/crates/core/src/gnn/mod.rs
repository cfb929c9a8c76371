//! Graph neural network that maps a graph and a depth to QAOA angles.
//!
//! Layers: weighted graph convolution, two single-head attention layers,
//! mean pooling, a depth one-hot, and a two-layer head with `2 p_max`
//! outputs laid out as `[gamma_1..gamma_pmax | beta_1..beta_pmax]`. Outputs
//! are squashed with `scale * tanh(x/2)`, so network outputs always lie
//! strictly inside `(-scale, scale)`; see [`ModelMeta::weight_scaled_gamma`]
//! for how gamma is read off for weighted graphs. Gradients are derived by
//! hand per layer.

pub mod batch;
mod io;
pub mod layers;
mod train;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::ops::Range;

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{mean_abs_weight, normalize_edge_weights, Graph};
use crate::qaoa::ParamVector;
use crate::seed;
use batch::{GraphBatch, NUM_FEATURES};
use layers::{attention_bwd, attention_fwd, conv_bwd, conv_fwd, Attention, AttentionCache, ConvCache};

pub use io::{load, save, MODEL_VERSION};
pub use train::{train, EpochLoss, Sample, TrainConfig};

pub const DEFAULT_HIDDEN: usize = 256;

/// Everything needed to rebuild a model besides its weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub hidden: usize,
    pub p_max: usize,
    pub features: String,
    /// When false, every edge is treated as weight 1.
    pub edge_weights: bool,
    /// When set, the model serves only this depth and receives no depth input.
    pub fixed_depth: Option<usize>,
    pub gamma_scale: f64,
    pub beta_scale: f64,
    /// Gamma is learned as `gamma * mean|w|` and divided back at prediction,
    /// which makes predictions equivariant to a global weight scale.
    #[serde(default)]
    pub weight_scaled_gamma: bool,
    pub seed: u64,
}

impl ModelMeta {
    /// Depth-conditioned model over canonical angles and normalized weights.
    pub fn qseer(p_max: usize, seed: u64) -> Self {
        ModelMeta {
            hidden: DEFAULT_HIDDEN,
            p_max,
            features: "const,degree/(n-1),wdegree/max_wdegree".into(),
            edge_weights: true,
            fixed_depth: None,
            gamma_scale: FRAC_PI_2,
            beta_scale: FRAC_PI_4,
            weight_scaled_gamma: true,
            seed,
        }
    }

    /// Single-depth model over raw optimizer angles, ignoring edge weights.
    pub fn plain(depth: usize, p_max: usize, seed: u64) -> Self {
        ModelMeta {
            edge_weights: false,
            fixed_depth: Some(depth),
            gamma_scale: PI,
            beta_scale: FRAC_PI_2,
            weight_scaled_gamma: false,
            ..ModelMeta::qseer(p_max, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        let scales_ok = self.gamma_scale > 0.0 && self.beta_scale > 0.0;
        let depth_ok = self.fixed_depth.is_none_or(|p| (1..=self.p_max).contains(&p));
        if self.hidden == 0 || self.p_max == 0 || !scales_ok || !depth_ok {
            return Err(Error::Parameter(format!("invalid model configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Weights {
    conv_w: Array2<f64>,
    conv_b: Array1<f64>,
    att: [Attention; 2],
    mlp1_w: Array2<f64>,
    mlp1_b: Array1<f64>,
    mlp2_w: Array2<f64>,
    mlp2_b: Array1<f64>,
}

const TENSOR_NAMES: [&str; 16] = [
    "conv.w",
    "conv.b",
    "att1.w",
    "att1.a_src",
    "att1.a_dst",
    "att1.edge",
    "att1.b",
    "att2.w",
    "att2.a_src",
    "att2.a_dst",
    "att2.edge",
    "att2.b",
    "mlp1.w",
    "mlp1.b",
    "mlp2.w",
    "mlp2.b",
];

impl Weights {
    fn zeros(meta: &ModelMeta) -> Self {
        let (h, head) = (meta.hidden, meta.hidden + meta.p_max);
        Weights {
            conv_w: Array2::zeros((NUM_FEATURES, h)),
            conv_b: Array1::zeros(h),
            att: [Attention::zeros(h, h), Attention::zeros(h, h)],
            mlp1_w: Array2::zeros((head, head)),
            mlp1_b: Array1::zeros(head),
            mlp2_w: Array2::zeros((head, 2 * meta.p_max)),
            mlp2_b: Array1::zeros(2 * meta.p_max),
        }
    }

    /// Glorot-uniform matrices and attention vectors, zero biases.
    fn init(meta: &ModelMeta) -> Self {
        let mut w = Weights::zeros(meta);
        let mut rng = seed::rng(meta.seed);
        let shapes = w.shapes();
        for (t, shape) in w.tensors_mut().into_iter().zip(shapes) {
            if shape.len() == 2 {
                let a = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                t.iter_mut().for_each(|x| *x = rng.random_range(-a..a));
            }
        }
        for att in &mut w.att {
            let a = (6.0 / (att.a_src.len() + 1) as f64).sqrt();
            att.a_src.iter_mut().for_each(|x| *x = rng.random_range(-a..a));
            att.a_dst.iter_mut().for_each(|x| *x = rng.random_range(-a..a));
        }
        w
    }

    fn shapes(&self) -> Vec<Vec<usize>> {
        self.tensors_shaped().into_iter().map(|(s, _)| s).collect()
    }

    fn tensors_shaped(&self) -> Vec<(Vec<usize>, &[f64])> {
        let [a, b] = &self.att;
        fn m(x: &Array2<f64>) -> (Vec<usize>, &[f64]) {
            (x.shape().to_vec(), x.as_slice().expect("contiguous"))
        }
        fn v(x: &Array1<f64>) -> (Vec<usize>, &[f64]) {
            (x.shape().to_vec(), x.as_slice().expect("contiguous"))
        }
        vec![
            m(&self.conv_w),
            v(&self.conv_b),
            m(&a.w),
            v(&a.a_src),
            v(&a.a_dst),
            v(&a.edge),
            v(&a.bias),
            m(&b.w),
            v(&b.a_src),
            v(&b.a_dst),
            v(&b.edge),
            v(&b.bias),
            m(&self.mlp1_w),
            v(&self.mlp1_b),
            m(&self.mlp2_w),
            v(&self.mlp2_b),
        ]
    }

    fn tensors(&self) -> Vec<&[f64]> {
        self.tensors_shaped().into_iter().map(|(_, t)| t).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let [a, b] = &mut self.att;
        fn m(x: &mut Array2<f64>) -> &mut [f64] {
            x.as_slice_mut().expect("contiguous")
        }
        fn v(x: &mut Array1<f64>) -> &mut [f64] {
            x.as_slice_mut().expect("contiguous")
        }
        vec![
            m(&mut self.conv_w),
            v(&mut self.conv_b),
            m(&mut a.w),
            v(&mut a.a_src),
            v(&mut a.a_dst),
            v(&mut a.edge),
            v(&mut a.bias),
            m(&mut b.w),
            v(&mut b.a_src),
            v(&mut b.a_dst),
            v(&mut b.edge),
            v(&mut b.bias),
            m(&mut self.mlp1_w),
            v(&mut self.mlp1_b),
            m(&mut self.mlp2_w),
            v(&mut self.mlp2_b),
        ]
    }

    fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

struct Cache {
    conv: ConvCache,
    att: [AttentionCache; 2],
    h3: Array2<f64>,
    q: Array2<f64>,
    u: Array2<f64>,
    v: Array2<f64>,
    o: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnnModel {
    meta: ModelMeta,
    weights: Weights,
}

impl GnnModel {
    pub fn new(meta: ModelMeta) -> Result<Self> {
        meta.validate()?;
        let weights = Weights::init(&meta);
        Ok(GnnModel { meta, weights })
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    fn check_depth(&self, p: usize) -> Result<()> {
        let ok = match self.meta.fixed_depth {
            Some(d) => p == d,
            None => (1..=self.meta.p_max).contains(&p),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "depth {p} not served by this model (p_max={})",
                self.meta.p_max
            )))
        }
    }

    /// The graph as the network sees it: min-max normalized weights, or unit
    /// weights when the model ignores them.
    pub fn prepare(&self, g: &Graph) -> Result<GraphBatch> {
        let h = if self.meta.edge_weights {
            normalize_edge_weights(g)?
        } else {
            g.with_weights(&vec![1.0; g.num_edges()])?
        };
        Ok(GraphBatch::from_graph(&h))
    }

    fn scales(&self) -> Array1<f64> {
        // Shrinking by one ulp keeps a saturated tanh strictly inside the range.
        let p_max = self.meta.p_max;
        let shrink = 1.0 - f64::EPSILON;
        Array1::from_shape_fn(2 * p_max, |k| {
            shrink
                * if k < p_max {
                    self.meta.gamma_scale
                } else {
                    self.meta.beta_scale
                }
        })
    }

    fn forward_cached(&self, b: &GraphBatch, depths: &[usize]) -> (Array2<f64>, Cache) {
        let w = &self.weights;
        let (h1, conv) = conv_fwd(b, &b.x, &w.conv_w, &w.conv_b);
        let (h2, att0) = attention_fwd(b, &h1, &w.att[0]);
        let (h3, att1) = attention_fwd(b, &h2, &w.att[1]);
        let hid = self.meta.hidden;
        let mut q = Array2::zeros((b.num_graphs(), hid + self.meta.p_max));
        for (gi, r) in b.graph_nodes.iter().enumerate() {
            if !r.is_empty() {
                let mean = h3.slice(s![r.clone(), ..]).mean_axis(Axis(0)).expect("non-empty");
                q.slice_mut(s![gi, ..hid]).assign(&mean);
            }
            if self.meta.fixed_depth.is_none() {
                q[[gi, hid + depths[gi] - 1]] = 1.0;
            }
        }
        let u = q.dot(&w.mlp1_w) + &w.mlp1_b;
        let v = u.mapv(|x| x.max(0.0));
        let o = v.dot(&w.mlp2_w) + &w.mlp2_b;
        let scales = self.scales();
        let mut y = o.mapv(|x| (x / 2.0).tanh());
        y *= &scales;
        (
            y,
            Cache {
                conv,
                att: [att0, att1],
                h3,
                q,
                u,
                v,
                o,
            },
        )
    }

    fn backward(&self, b: &GraphBatch, cache: &Cache, dy: &Array2<f64>) -> Weights {
        let w = &self.weights;
        let scales = self.scales();
        let mut dout = dy.clone();
        dout.zip_mut_with(&cache.o, |d, &o| {
            let t = (o / 2.0).tanh();
            *d *= 0.5 * (1.0 - t * t);
        });
        dout *= &scales;
        let mlp2_w = cache.v.t().dot(&dout);
        let mlp2_b = dout.sum_axis(Axis(0));
        let mut du = dout.dot(&w.mlp2_w.t());
        du.zip_mut_with(&cache.u, |g, &u| {
            if u <= 0.0 {
                *g = 0.0;
            }
        });
        let mlp1_w = cache.q.t().dot(&du);
        let mlp1_b = du.sum_axis(Axis(0));
        let dq = du.dot(&w.mlp1_w.t());
        let hid = self.meta.hidden;
        let mut dh3 = Array2::zeros(cache.h3.raw_dim());
        for (gi, r) in b.graph_nodes.iter().enumerate() {
            let share = dq.slice(s![gi, ..hid]).mapv(|x| x / r.len() as f64);
            for v in r.clone() {
                dh3.row_mut(v).assign(&share);
            }
        }
        let (g1, dh2) = attention_bwd(b, &w.att[1], &cache.att[1], &dh3);
        let (g0, dh1) = attention_bwd(b, &w.att[0], &cache.att[0], &dh2);
        let (conv_w, conv_b) = conv_bwd(&cache.conv, &dh1);
        Weights {
            conv_w,
            conv_b,
            att: [g0, g1],
            mlp1_w,
            mlp1_b,
            mlp2_w,
            mlp2_b,
        }
    }

    /// Squashed head outputs (`2 p_max` per graph) for a batch.
    fn head_outputs(&self, b: &GraphBatch, depths: &[usize]) -> Array2<f64> {
        self.forward_cached(b, depths).0
    }

    /// All `2 p_max` squashed outputs for one graph at depth `p`.
    pub fn raw_output(&self, g: &Graph, p: usize) -> Result<Vec<f64>> {
        self.check_depth(p)?;
        let b = self.prepare(g)?;
        Ok(self.head_outputs(&b, &[p]).row(0).to_vec())
    }

    /// Predicted angles for depth `p`.
    pub fn predict(&self, g: &Graph, p: usize) -> Result<ParamVector> {
        Ok(self.predict_many(&[(g, p)])?.remove(0))
    }

    pub fn predict_many(&self, items: &[(&Graph, usize)]) -> Result<Vec<ParamVector>> {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(256) {
            let parts: Vec<GraphBatch> = chunk
                .iter()
                .map(|&(g, p)| {
                    self.check_depth(p)?;
                    self.prepare(g)
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&GraphBatch> = parts.iter().collect();
            let depths: Vec<usize> = chunk.iter().map(|&(_, p)| p).collect();
            let y = self.head_outputs(&GraphBatch::concat(&refs), &depths);
            for (row, &(g, p)) in y.rows().into_iter().zip(chunk) {
                let mut x = self.slice_params(row.as_slice().expect("contiguous"), p);
                let s = self.gamma_unit(g)?;
                x.gamma.iter_mut().for_each(|v| *v /= s);
                out.push(x);
            }
        }
        Ok(out)
    }

    fn slice_params(&self, row: &[f64], p: usize) -> ParamVector {
        let p_max = self.meta.p_max;
        ParamVector {
            gamma: row[..p].to_vec(),
            beta: row[p_max..p_max + p].to_vec(),
        }
    }

    fn batch_loss(&self, b: &GraphBatch, samples: &[&Sample], grad: bool) -> (f64, Option<Weights>) {
        let depths: Vec<usize> = samples.iter().map(|s| s.depth).collect();
        let (y, cache) = self.forward_cached(b, &depths);
        let p_max = self.meta.p_max;
        let mut dy = Array2::zeros(y.raw_dim());
        let mut loss = 0.0;
        let scale = 1.0 / samples.len() as f64;
        for (i, s) in samples.iter().enumerate() {
            let p = s.depth;
            let cols = (0..p)
                .map(|j| (j, s.target.gamma[j]))
                .chain((0..p).map(|j| (p_max + j, s.target.beta[j])));
            for (c, t) in cols {
                let e = y[[i, c]] - t;
                loss += scale * e * e / (2 * p) as f64;
                dy[[i, c]] = scale * 2.0 * e / (2 * p) as f64;
            }
        }
        let g = grad.then(|| self.backward(b, &cache, &dy));
        (loss, g)
    }

    fn check_samples(&self, samples: &[Sample]) -> Result<()> {
        for s in samples {
            self.check_depth(s.depth)?;
            if s.target.p() != s.depth {
                return Err(Error::Shape(format!(
                    "target has depth {}, sample says {}",
                    s.target.p(),
                    s.depth
                )));
            }
        }
        Ok(())
    }

    fn sample_batch(&self, samples: &[&Sample]) -> GraphBatch {
        let parts: Vec<&GraphBatch> = samples.iter().map(|s| &s.input).collect();
        GraphBatch::concat(&parts)
    }

    /// Mean over samples of the per-sample MSE across the first `2p` outputs.
    pub fn loss(&self, samples: &[Sample]) -> Result<f64> {
        self.check_samples(samples)?;
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for chunk in samples.chunks(256) {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let (l, _) = self.batch_loss(&self.sample_batch(&refs), &refs, false);
            total += l * chunk.len() as f64;
        }
        Ok(total / samples.len() as f64)
    }

    /// Loss and its gradient, flattened in [`GnnModel::parameters`] order.
    pub fn loss_and_gradient(&self, samples: &[Sample]) -> Result<(f64, Vec<f64>)> {
        self.check_samples(samples)?;
        if samples.is_empty() {
            return Err(Error::Parameter("no samples".into()));
        }
        let refs: Vec<&Sample> = samples.iter().collect();
        let (l, g) = self.batch_loss(&self.sample_batch(&refs), &refs, true);
        Ok((l, g.expect("requested").tensors().concat()))
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.len()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.weights.tensors().concat()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                flat.len()
            )));
        }
        let mut off = 0;
        for t in self.weights.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    /// Named ranges of the flattened parameter vector.
    pub fn parameter_blocks(&self) -> Vec<(&'static str, Range<usize>)> {
        let mut off = 0;
        TENSOR_NAMES
            .iter()
            .zip(self.weights.tensors())
            .map(|(&name, t)| {
                off += t.len();
                (name, off - t.len()..off)
            })
            .collect()
    }

    /// Factor between predicted and network-space gamma.
    fn gamma_unit(&self, g: &Graph) -> Result<f64> {
        if !self.meta.weight_scaled_gamma {
            return Ok(1.0);
        }
        let s = mean_abs_weight(g)?;
        Ok(if s > 0.0 && s.is_finite() { s } else { 1.0 })
    }

    /// Whether the network can emit `target` for `g`: every angle, in network
    /// units, strictly inside the squashed output range.
    pub fn representable(&self, g: &Graph, target: &ParamVector) -> Result<bool> {
        let s = self.gamma_unit(g)?;
        let (gs, bs) = (self.meta.gamma_scale, self.meta.beta_scale);
        Ok(target.gamma.iter().all(|v| (v * s).abs() < gs) && target.beta.iter().all(|v| v.abs() < bs))
    }

    /// Encodes a training pair for this model.
    pub fn sample(&self, g: &Graph, mut target: ParamVector) -> Result<Sample> {
        let depth = target.p();
        self.check_depth(depth)?;
        let s = self.gamma_unit(g)?;
        target.gamma.iter_mut().for_each(|v| *v *= s);
        Ok(Sample {
            input: self.prepare(g)?,
            depth,
            target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::enumerate_connected_nonisomorphic;

    fn small(seed: u64) -> GnnModel {
        GnnModel::new(ModelMeta {
            hidden: 6,
            ..ModelMeta::qseer(4, seed)
        })
        .unwrap()
    }

    fn weighted() -> Graph {
        Graph::new(
            5,
            [
                (0, 1, 0.4),
                (1, 2, 1.3),
                (2, 3, 0.2),
                (3, 4, 2.0),
                (0, 4, 0.9),
                (1, 3, 1.1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn prediction_shape_and_range() {
        let m = GnnModel::new(ModelMeta::qseer(4, 1)).unwrap();
        let g = weighted();
        let unit = m.gamma_unit(&g).unwrap();
        for p in 1..=4 {
            let x = m.predict(&g, p).unwrap();
            assert_eq!(x.p(), p);
            assert!(x.gamma.iter().all(|v| (v * unit).abs() < FRAC_PI_2));
            assert!(x.beta.iter().all(|v| v.abs() < FRAC_PI_4));
        }
        assert!(m.predict(&g, 0).is_err());
        assert!(m.predict(&g, 5).is_err());
    }

    #[test]
    fn saturated_outputs_stay_open() {
        let mut m = small(2);
        let mut flat = m.parameters();
        let b = m
            .parameter_blocks()
            .into_iter()
            .find(|(n, _)| *n == "mlp2.b")
            .unwrap()
            .1;
        for (k, i) in b.enumerate() {
            flat[i] = if k % 2 == 0 { 1e6 } else { -1e6 };
        }
        m.set_parameters(&flat).unwrap();
        let out = m.raw_output(&weighted(), 2).unwrap();
        for (k, v) in out.iter().enumerate() {
            let bound = if k < 4 { FRAC_PI_2 } else { FRAC_PI_4 };
            assert!(v.abs() < bound);
        }
        let unweighted = Graph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        assert!(crate::normalize::in_target_range(&m.predict(&unweighted, 4).unwrap()));
    }

    #[test]
    fn depth_outputs_are_prefixes_of_the_head() {
        let m = small(3);
        let g = weighted();
        for p in 1..=4 {
            let head = m.raw_output(&g, p).unwrap();
            let x = m.predict(&g, p).unwrap();
            let unit = m.gamma_unit(&g).unwrap();
            let gamma: Vec<f64> = head[..p].iter().map(|v| v / unit).collect();
            assert_eq!(x.gamma, gamma);
            assert_eq!(x.beta, head[4..4 + p]);
        }
    }

    #[test]
    fn batched_prediction_matches_single() {
        let m = small(4);
        let graphs = enumerate_connected_nonisomorphic(4).unwrap();
        let items: Vec<(&Graph, usize)> = graphs.iter().zip([1, 2, 3, 4, 1, 2]).collect();
        let batched = m.predict_many(&items).unwrap();
        for ((g, p), b) in items.iter().zip(&batched) {
            let single = m.predict(g, *p).unwrap();
            for (x, y) in single.to_flat().iter().zip(b.to_flat()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn plain_model_serves_one_depth_and_ignores_weights() {
        let m = GnnModel::new(ModelMeta {
            hidden: 6,
            ..ModelMeta::plain(2, 4, 5)
        })
        .unwrap();
        let g = weighted();
        assert!(m.predict(&g, 1).is_err());
        let unit = g.with_weights(&[1.0; 6]).unwrap();
        assert_eq!(m.predict(&g, 2).unwrap(), m.predict(&unit, 2).unwrap());
    }

    #[test]
    fn padded_label_tail_has_no_effect() {
        let m = small(6);
        let g = weighted();
        let target = ParamVector::new(vec![0.3, -0.2], vec![0.1, 0.05]).unwrap();
        let s = m.sample(&g, target).unwrap();
        let (l1, g1) = m.loss_and_gradient(std::slice::from_ref(&s)).unwrap();
        // The loss only reads the first p entries of each block; the head's
        // other outputs must receive no gradient at all.
        let blocks = m.parameter_blocks();
        let b = blocks.iter().find(|(n, _)| *n == "mlp2.b").unwrap().1.clone();
        let grad_b = &g1[b];
        for k in [2, 3, 6, 7] {
            assert_eq!(grad_b[k], 0.0);
        }
        assert!(grad_b[0] != 0.0 && grad_b[4] != 0.0);
        assert!(l1 > 0.0);
    }

    #[test]
    fn set_parameters_checks_length() {
        let mut m = small(7);
        assert!(matches!(m.set_parameters(&[0.0; 3]), Err(Error::Shape(_))));
        let p = m.parameters();
        m.set_parameters(&p).unwrap();
        assert_eq!(m.parameters(), p);
    }
}
