use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::mlp::{mlp_init, Gradients, MlpModel, SparseInput, TrainingMeta, DEFAULT_HIDDEN};
use crate::models::optim::{Optimizer, OptimizerKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.001,
            max_epochs: 500,
            patience: 25,
            batch_size: 32,
            validation_fraction: 0.2,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InfeasibleConfig(m.to_string()));
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("max_epochs, batch_size and patience must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation score; asks to stop once `patience` epochs
/// pass without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> Verdict {
        if score < self.best {
            self.best = score;
            self.best_epoch = epoch;
            Verdict::Improved
        } else if epoch - self.best_epoch >= self.patience {
            Verdict::Stop
        } else {
            Verdict::Continue
        }
    }
}

pub fn mlp_train(features: &[Vec<f64>], targets: &[f64], cfg: &TrainConfig) -> Result<(MlpModel, History)> {
    mlp_train_observed(features, targets, cfg, &mut |_, _| {})
}

/// Like [`mlp_train`], calling `observer` after every epoch with the current
/// parameters and that epoch's record. The observer may rewrite the record's
/// `val_mae` before early stopping sees it.
pub fn mlp_train_observed(
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&MlpModel, &mut EpochRecord),
) -> Result<(MlpModel, History)> {
    cfg.check()?;
    if features.is_empty() || features.len() != targets.len() {
        return Err(Error::InfeasibleConfig(format!(
            "{} feature vectors for {} targets",
            features.len(),
            targets.len()
        )));
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: f.len(),
        });
    }
    let inputs: Vec<SparseInput> = features.iter().map(|f| SparseInput::from_dense(f)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (inputs.len() as f64 * cfg.validation_fraction).round() as usize;
    let n_val = n_val.min(inputs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    // too few examples to hold any out: validate on the training set
    let val_idx: Vec<usize> = if val_idx.is_empty() { train_idx.to_vec() } else { val_idx.to_vec() };
    let mut train_idx = train_idx.to_vec();

    let mut dims = vec![dim];
    dims.extend(&cfg.hidden);
    dims.push(1);
    let mut model = mlp_init(&dims, cfg.seed)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut grads = Gradients::zeros_like(&model);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut history = History::default();

    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut abs_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                abs_sum += model.accumulate(&inputs[i], targets[i], scale, &mut grads)?;
            }
            let tensors = model
                .layers
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.biases))
                .flat_map(|(l, (gw, gb))| [(l.weights.as_mut_slice(), gw.as_slice()), (l.bias.as_mut_slice(), gb.as_slice())]);
            opt.step(tensors);
        }
        let train_mae = abs_sum / train_idx.len() as f64;
        let val_mae = mae_on(&model, &inputs, targets, &val_idx)?;
        if !train_mae.is_finite() || !val_mae.is_finite() {
            return Err(Error::Diverged(format!(
                "epoch {epoch}: train MAE {train_mae}, validation MAE {val_mae} ({} lr {})",
                cfg.optimizer, cfg.learning_rate
            )));
        }
        let mut record = EpochRecord {
            epoch,
            train_mae,
            val_mae,
        };
        observer(&model, &mut record);
        history.epochs.push(record);
        match stopper.observe(epoch, record.val_mae) {
            Verdict::Improved => best.clone_from(&model),
            Verdict::Continue => {}
            Verdict::Stop => {
                history.stopped_early = true;
                break;
            }
        }
        log::debug!("epoch {epoch}: train {train_mae:.4} val {:.4}", record.val_mae);
    }

    let (best_epoch, best_val) = stopper.best();
    history.best_epoch = best_epoch;
    history.best_val_mae = best_val;
    best.meta = Some(TrainingMeta {
        epochs_run: history.epochs.len(),
        best_epoch,
        best_val_mae: best_val,
        optimizer: cfg.optimizer,
        learning_rate: cfg.learning_rate,
        seed: cfg.seed,
    });
    Ok((best, history))
}

fn mae_on(model: &MlpModel, inputs: &[SparseInput], targets: &[f64], idx: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    for &i in idx {
        sum += (model.forward_sparse(&inputs[i])? - targets[i]).abs();
    }
    Ok(sum / idx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn quick(max_epochs: usize, patience: usize) -> TrainConfig {
        TrainConfig {
            max_epochs,
            patience,
            hidden: vec![16, 16],
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn early_stopping_counts_from_best() {
        let mut s = EarlyStopping::new(3);
        assert_eq!(s.observe(1, 5.0), Verdict::Improved);
        assert_eq!(s.observe(2, 4.0), Verdict::Improved);
        assert_eq!(s.observe(3, 4.0), Verdict::Continue);
        assert_eq!(s.observe(4, 9.0), Verdict::Continue);
        assert_eq!(s.observe(5, 4.5), Verdict::Stop);
        assert_eq!(s.best(), (2, 4.0));
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().check().is_ok());
        assert!(TrainConfig { validation_fraction: 1.0, ..Default::default() }.check().is_err());
        assert!(TrainConfig { patience: 0, ..Default::default() }.check().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.check().is_err());
    }

    #[test]
    fn memorizes_a_single_example() {
        let x = vec![vec![0.5, 0.0, 2.0, 1.0]];
        let (m, h) = mlp_train(&x, &[7.0], &quick(2000, 2000)).unwrap();
        assert!(h.best_val_mae < 1e-2, "{}", h.best_val_mae);
        assert!((m.forward(&x[0]).unwrap() - 7.0).abs() < 1e-2);
    }

    #[test]
    fn beats_the_mean_on_a_linear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0] - 2.0 * x[1] + x[4] + 1.0).collect();
        let (test_x, test_y) = (&xs[160..], &ys[160..]);
        let (m, _) = mlp_train(&xs[..160], &ys[..160], &quick(300, 30)).unwrap();
        let mean = ys[..160].iter().sum::<f64>() / 160.0;
        let baseline = test_y.iter().map(|y| (y - mean).abs()).sum::<f64>() / 40.0;
        let model_mae = test_x
            .iter()
            .zip(test_y)
            .map(|(x, y)| (m.forward(x).unwrap() - y).abs())
            .sum::<f64>()
            / 40.0;
        assert!(model_mae < 0.5 * baseline, "{model_mae} vs {baseline}");
    }

    #[test]
    fn deterministic_per_seed() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, (i % 7) as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * 4.0 + x[1]).collect();
        let a = mlp_train(&xs, &ys, &quick(20, 5)).unwrap();
        let b = mlp_train(&xs, &ys, &quick(20, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn returns_best_snapshot_after_plateau() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0, 1.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x[0]).collect();
        let mut snapshots = Vec::new();
        let (m, h) = mlp_train_observed(&xs, &ys, &quick(100, 4), &mut |model, rec| {
            snapshots.push(model.clone());
            rec.val_mae = if rec.epoch <= 6 { 10.0 - rec.epoch as f64 } else { 5.0 };
        })
        .unwrap();
        assert_eq!(h.best_epoch, 6);
        assert_eq!(h.epochs.len(), 10);
        assert!(h.stopped_early);
        assert_eq!(m.layers, snapshots[5].layers);
        assert_ne!(m.layers, snapshots[9].layers);
        assert_eq!(m.meta.as_ref().unwrap().epochs_run, 10);
    }

    #[test]
    fn divergence_is_reported() {
        let xs = vec![vec![f64::NAN, 1.0], vec![0.5, 1.0]];
        let err = mlp_train(&xs, &[1.0, 2.0], &quick(5, 5)).unwrap_err();
        assert!(matches!(err, Error::Diverged(_)), "{err}");
    }
}
