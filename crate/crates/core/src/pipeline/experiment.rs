use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{fit_quadratic, mlp_train, History, MlpModel, Model, OptimizerKind, QuadraticModel, TrainConfig};
use crate::pipeline::dataset::DatasetRecord;
use crate::pipeline::metrics::Metrics;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

/// Seeded shuffle, then the first `round(n · train_fraction)` items train.
pub fn split<T: Clone>(items: &[T], train_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((items.len() as f64) * train_fraction).round() as usize;
    let n_train = n_train.min(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    (pick(&order[..n_train]), pick(&order[n_train..]))
}

pub fn predict_record(model: &Model, r: &DatasetRecord) -> Result<f64> {
    match model {
        Model::Mlp(m) if m.encoder == r.encoder => m.forward(&r.features),
        _ => model.predict(&r.initial, r.instance.master_width),
    }
}

pub fn evaluate(model: &Model, test: &[DatasetRecord]) -> Result<Metrics> {
    let actual: Vec<f64> = test.iter().map(|r| r.final_count as f64).collect();
    let predicted = test.iter().map(|r| predict_record(model, r)).collect::<Result<Vec<f64>>>()?;
    Metrics::compute(&actual, &predicted)
}

pub fn fit_naive(train: &[DatasetRecord]) -> Result<QuadraticModel> {
    let pairs: Vec<(f64, f64)> = train
        .iter()
        .map(|r| (r.initial_count as f64, r.final_count as f64))
        .collect();
    fit_quadratic(&pairs)
}

/// Trains on the records' stored features; the model inherits their
/// encoder settings.
pub fn train_mlp(train: &[DatasetRecord], cfg: &TrainConfig) -> Result<(MlpModel, History)> {
    let Some(first) = train.first() else {
        return Err(Error::InfeasibleConfig("empty training set".into()));
    };
    if let Some(r) = train.iter().find(|r| r.encoder != first.encoder) {
        return Err(Error::InfeasibleConfig(format!(
            "record {} uses a different encoder from {}",
            r.instance_id, first.instance_id
        )));
    }
    let xs: Vec<Vec<f64>> = train.iter().map(|r| r.features.clone()).collect();
    let ys: Vec<f64> = train.iter().map(|r| r.final_count as f64).collect();
    let (mut model, history) = mlp_train(&xs, &ys, cfg)?;
    model.encoder = first.encoder;
    Ok((model, history))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub split_seed: u64,
    pub train_fraction: f64,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            split_seed: 0,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub quadratic: QuadraticModel,
    pub mlp: MlpModel,
    pub history: History,
    pub naive_metrics: Metrics,
    pub mlp_metrics: Metrics,
    pub train_size: usize,
    pub test_size: usize,
}

/// Fits both predictors on the same training split and scores them on the
/// held-out records.
pub fn run_experiment(records: &[DatasetRecord], cfg: &ExperimentConfig) -> Result<Experiment> {
    let (train, test) = split(records, cfg.train_fraction, cfg.split_seed);
    if test.len() < 2 {
        return Err(Error::InfeasibleConfig(format!("test split has {} records", test.len())));
    }
    let quadratic = fit_naive(&train)?;
    let (mlp, history) = train_mlp(&train, &cfg.train)?;
    let naive_metrics = evaluate(&Model::Quadratic(quadratic.clone()), &test)?;
    let mlp_model = Model::Mlp(mlp);
    let mlp_metrics = evaluate(&mlp_model, &test)?;
    let Model::Mlp(mlp) = mlp_model else { unreachable!() };
    Ok(Experiment {
        quadratic,
        mlp,
        history,
        naive_metrics,
        mlp_metrics,
        train_size: train.len(),
        test_size: test.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRow {
    pub optimizer: OptimizerKind,
    pub mapes: Vec<f64>,
    pub failures: usize,
    pub mean_mape: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_mape: f64,
}

/// Trains one model per `(optimizer, seed)` with seeds `base.seed ..
/// base.seed + seeds` and reports test MAPE per optimizer. A failed run is
/// logged and counted; the other cells still run.
pub fn compare_optimizers(
    train: &[DatasetRecord],
    test: &[DatasetRecord],
    base: &TrainConfig,
    optimizers: &[OptimizerKind],
    seeds: usize,
) -> Result<Vec<OptimizerRow>> {
    let mut rows = Vec::new();
    for &optimizer in optimizers {
        let mut mapes = Vec::new();
        let mut failures = 0;
        for k in 0..seeds {
            let cfg = TrainConfig {
                optimizer,
                seed: base.seed + k as u64,
                ..base.clone()
            };
            let outcome = train_mlp(train, &cfg).and_then(|(m, _)| evaluate(&Model::Mlp(m), test));
            match outcome {
                Ok(metrics) => mapes.push(metrics.mape),
                Err(e) => {
                    log::warn!("{optimizer} seed {}: {e}", cfg.seed);
                    failures += 1;
                }
            }
        }
        let n = mapes.len() as f64;
        let mean_mape = if mapes.is_empty() { f64::NAN } else { mapes.iter().sum::<f64>() / n };
        let std_mape = if mapes.len() < 2 {
            0.0
        } else {
            (mapes.iter().map(|m| (m - mean_mape).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        rows.push(OptimizerRow {
            optimizer,
            mapes,
            failures,
            mean_mape,
            std_mape,
        });
    }
    Ok(rows)
}

pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[(&str, &Metrics)]) -> Result<()> {
    writeln!(w, "model,n,mape,mae,r2")?;
    for (name, m) in rows {
        writeln!(w, "{name},{},{},{},{}", m.n, m.mape, m.mae, m.r2)?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(mut w: W, rows: &[(&str, &Metrics)]) -> Result<()> {
    writeln!(w, "model,bin_center,lower,upper,count")?;
    for (name, m) in rows {
        let h = &m.histogram;
        for (i, count) in h.counts.iter().enumerate() {
            let (lo, hi) = (h.edges[i], h.edges[i + 1]);
            writeln!(w, "{name},{},{lo},{hi},{count}", (lo + hi) / 2.0)?;
        }
    }
    Ok(())
}

pub fn write_scatter_csv<W: Write>(mut w: W, rows: &[(&str, &Metrics)]) -> Result<()> {
    writeln!(w, "model,actual,predicted")?;
    for (name, m) in rows {
        for (a, p) in &m.scatter {
            writeln!(w, "{name},{a},{p}")?;
        }
    }
    Ok(())
}

pub fn write_history_csv<W: Write>(mut w: W, h: &History) -> Result<()> {
    writeln!(w, "epoch,train_mae,val_mae")?;
    for e in &h.epochs {
        writeln!(w, "{},{},{}", e.epoch, e.train_mae, e.val_mae)?;
    }
    Ok(())
}

pub fn write_optimizer_csv<W: Write>(mut w: W, rows: &[OptimizerRow]) -> Result<()> {
    writeln!(w, "optimizer,runs,failures,mean_mape,std_mape")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.optimizer, r.mapes.len(), r.failures, r.mean_mape, r.std_mape)?;
    }
    Ok(())
}
