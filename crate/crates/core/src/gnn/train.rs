use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::batch::GraphBatch;
use super::GnnModel;
use crate::error::{Error, Result};
use crate::qaoa::ParamVector;
use crate::seed;

/// A prepared graph with its target angles.
#[derive(Clone, Debug)]
pub struct Sample {
    pub input: GraphBatch,
    pub depth: usize,
    pub target: ParamVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to 0 over all steps.
    pub lr0: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr0: 0.01,
            batch: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
}

/// Adam on the per-sample MSE, mini-batches in a seeded order per epoch.
///
/// `history[0]` holds the losses before the first update; `history[e]` the
/// losses after epoch `e`.
pub fn train(
    model: &GnnModel,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
) -> Result<(GnnModel, Vec<EpochLoss>)> {
    if train.is_empty() {
        return Err(Error::Parameter("empty training set".into()));
    }
    if cfg.epochs == 0 || cfg.batch == 0 || !(cfg.lr0 > 0.0) {
        return Err(Error::Parameter(format!("invalid training configuration {cfg:?}")));
    }
    model.check_samples(train)?;
    model.check_samples(val)?;

    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut model = model.clone();
    let mut theta = model.parameters();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let total_steps = cfg.epochs * train.len().div_ceil(cfg.batch);
    let mut step = 0usize;

    let losses = |model: &GnnModel, epoch: usize| -> Result<EpochLoss> {
        Ok(EpochLoss {
            epoch,
            train: model.loss(train)?,
            val: if val.is_empty() { None } else { Some(model.loss(val)?) },
        })
    };
    let mut history = vec![losses(&model, 0)?];
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut seed::rng(seed::derive(cfg.seed, epoch as u64)));
        for chunk in order.chunks(cfg.batch) {
            let refs: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let (_, grads) = model.batch_loss(&model.sample_batch(&refs), &refs, true);
            let grad = grads.expect("requested").tensors().concat();
            let lr = cfg.lr0 * (1.0 - step as f64 / total_steps as f64);
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step as i32), 1.0 - b2.powi(step as i32));
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            model.set_parameters(&theta)?;
        }
        let e = losses(&model, epoch)?;
        log::debug!("epoch {epoch}: train {:.6} val {:?}", e.train, e.val);
        history.push(e);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::ModelMeta;
    use crate::graph::Graph;

    fn model() -> GnnModel {
        GnnModel::new(ModelMeta {
            hidden: 16,
            ..ModelMeta::qseer(4, 9)
        })
        .unwrap()
    }

    #[test]
    fn memorizes_one_sample() {
        let m = model();
        let g = Graph::new(4, [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (0, 3, 1.5)]).unwrap();
        let target = ParamVector::new(vec![0.4, 0.9], vec![0.5, -0.2]).unwrap();
        let s = vec![m.sample(&g, target).unwrap()];
        let cfg = TrainConfig {
            epochs: 300,
            batch: 1,
            ..TrainConfig::default()
        };
        let (trained, hist) = train(&m, &s, &[], &cfg).unwrap();
        assert_eq!(hist.len(), 301);
        assert!(hist[300].train < 1e-3, "{:?}", hist.last());
        assert!(trained.loss(&s).unwrap() < 1e-3);
    }

    #[test]
    fn training_is_deterministic_and_validates_input() {
        let m = model();
        let g = Graph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        let s = vec![
            m.sample(&g, ParamVector::new(vec![0.3], vec![0.2]).unwrap()).unwrap(),
            m.sample(&g, ParamVector::new(vec![0.3, 0.5], vec![0.2, 0.1]).unwrap())
                .unwrap(),
        ];
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train(&m, &s, &s, &cfg).unwrap();
        let b = train(&m, &s, &s, &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert!(train(&m, &[], &s, &cfg).is_err());
        let bad = TrainConfig { epochs: 0, ..cfg };
        assert!(train(&m, &s, &s, &bad).is_err());
    }
}
