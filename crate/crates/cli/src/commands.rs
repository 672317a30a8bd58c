use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use trimcast_core::encoder::{encode, write_cache, EncoderConfig};
use trimcast_core::instancegen::{generate_batch, FamilyMix};
use trimcast_core::models::{load_model, save_model, Model, OptimizerKind, TrainConfig};
use trimcast_core::pipeline::{
    build_dataset, compare_optimizers, evaluate, read_dataset, read_jsonl, run_experiment, split, write_histogram_csv,
    write_history_csv, write_jsonl, write_metrics_csv, write_optimizer_csv, write_scatter_csv, BuildOptions,
    DatasetRecord, ExperimentConfig, Metrics,
};
use trimcast_core::trimsolver::{solve_initial, SolverConfig};
use trimcast_core::{reduce, Budget, CancelToken, Family, Instance, ReduceConfig, Solution, Width};
use trimcast_service::{AppState, Predictors, ServiceConfig};

use crate::args::*;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Reduce(a) => reduce_cmd(a),
        Command::Encode(a) => encode_cmd(a),
        Command::Dataset(a) => dataset(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::CompareOptimizers(a) => compare(a),
        Command::Predict(a) => predict(a),
        Command::Serve(a) => serve(a),
    }
}

fn reduce_config(b: &BudgetArgs) -> ReduceConfig {
    let budget = match (b.budget, b.nodes) {
        (Some(d), _) => Budget::wall_clock(d),
        (None, Some(n)) => Budget::nodes(n),
        (None, None) => ReduceConfig::default().budget,
    };
    if !budget.is_deterministic() {
        log::warn!("wall-clock reducer budget: results are not reproducible (use --nodes)");
    }
    ReduceConfig {
        budget,
        rng_seed: b.seed,
        enable_exact: !b.no_exact,
        ..ReduceConfig::default()
    }
}

fn train_config(t: &TrainingArgs, seed: u64) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        optimizer: t.optimizer.parse()?,
        learning_rate: t.lr,
        max_epochs: t.epochs,
        patience: t.patience,
        batch_size: t.batch_size,
        validation_fraction: t.validation_fraction,
        seed,
        hidden: t.hidden.clone(),
    };
    cfg.check()?;
    Ok(cfg)
}

fn by_id(instances: Vec<Instance>) -> HashMap<String, Instance> {
    instances.into_iter().map(|i| (i.id.clone(), i)).collect()
}

fn gen(a: GenArgs) -> Result<()> {
    let mix = if a.family.eq_ignore_ascii_case("mix") {
        FamilyMix::reference_scaled(a.count)
    } else {
        FamilyMix::single(a.family.parse::<Family>()?, a.count)
    };
    let instances = generate_batch(&mix, a.seed)?;
    write_jsonl(&a.out, &instances)?;
    log::info!("wrote {} instances to {}", instances.len(), a.out.display());
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let cfg = SolverConfig {
        repack: !a.no_repack,
        ..SolverConfig::default()
    };
    let instances: Vec<Instance> = read_jsonl(&a.input)?;
    let solutions = instances
        .iter()
        .map(|i| solve_initial(i, &cfg).with_context(|| format!("solving {}", i.id)))
        .collect::<Result<Vec<Solution>>>()?;
    write_jsonl(&a.out, &solutions)?;
    log::info!("wrote {} solutions to {}", solutions.len(), a.out.display());
    Ok(())
}

fn reduce_cmd(a: ReduceArgs) -> Result<()> {
    let cfg = reduce_config(&a.budget);
    let instances = by_id(read_jsonl(&a.instances)?);
    let solutions: Vec<Solution> = read_jsonl(&a.input)?;
    let mut out = Vec::with_capacity(solutions.len());
    for s in &solutions {
        let inst = instances
            .get(&s.instance_id)
            .ok_or_else(|| anyhow!("no instance {:?} in {}", s.instance_id, a.instances.display()))?;
        let (reduced, trace) = reduce(s, inst, &cfg, &CancelToken::new())?;
        log::info!(
            "{}: {} -> {} patterns ({:?})",
            s.instance_id,
            s.pattern_count(),
            reduced.pattern_count(),
            trace.reason
        );
        out.push(reduced);
    }
    write_jsonl(&a.out, &out)?;
    Ok(())
}

fn encode_cmd(a: EncodeArgs) -> Result<()> {
    let instances = by_id(read_jsonl(&a.instances)?);
    let solutions: Vec<Solution> = read_jsonl(&a.input)?;
    let matrices = solutions
        .iter()
        .map(|s| {
            let inst = instances
                .get(&s.instance_id)
                .ok_or_else(|| anyhow!("no instance {:?}", s.instance_id))?;
            Ok(encode(s, inst.master_width, a.rows, a.slots)?)
        })
        .collect::<Result<Vec<_>>>()?;
    write_cache(BufWriter::new(File::create(&a.out)?), a.rows, a.slots, &matrices)?;
    log::info!("wrote {} matrices to {}", matrices.len(), a.out.display());
    Ok(())
}

fn dataset(a: DatasetArgs) -> Result<()> {
    let instances: Vec<Instance> = read_jsonl(&a.input)?;
    let opts = BuildOptions {
        reduce: reduce_config(&a.budget),
        encoder: EncoderConfig {
            extra_features: a.extra_features,
            ..EncoderConfig::default()
        },
        jobs: a.jobs,
        ..BuildOptions::default()
    };
    let summary = build_dataset(&instances, &opts, &a.out)?;
    log::info!(
        "{} records written, {} already present, {} failed",
        summary.written,
        summary.skipped_existing,
        summary.failed.len()
    );
    Ok(())
}

fn write_reports(dir: &Path, rows: &[(&str, &Metrics)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_metrics_csv(File::create(dir.join("metrics.csv"))?, rows)?;
    write_histogram_csv(File::create(dir.join("histogram.csv"))?, rows)?;
    write_scatter_csv(File::create(dir.join("scatter.csv"))?, rows)?;
    for (name, m) in rows {
        println!("{name:>9}: MAPE {:6.2}%  MAE {:6.3}  R² {:6.3}  (n = {})", m.mape, m.mae, m.r2, m.n);
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let records = read_dataset(&a.input)?;
    let cfg = ExperimentConfig {
        split_seed: a.seed,
        train_fraction: a.train_fraction,
        train: train_config(&a.training, a.seed)?,
    };
    let exp = run_experiment(&records, &cfg)?;
    fs::create_dir_all(&a.out)?;
    save_model(&a.out.join("mlp.tcm"), &Model::Mlp(exp.mlp.clone()))?;
    save_model(&a.out.join("quadratic.json"), &Model::Quadratic(exp.quadratic.clone()))?;
    write_history_csv(File::create(a.out.join("history.csv"))?, &exp.history)?;
    log::info!(
        "trained on {} records, tested on {}; best epoch {} of {}",
        exp.train_size,
        exp.test_size,
        exp.history.best_epoch,
        exp.history.epochs.len()
    );
    write_reports(&a.out, &[("naive", &exp.naive_metrics), ("mlp", &exp.mlp_metrics)])
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.mlp.is_none() && a.quadratic.is_none() {
        bail!("give --mlp and/or --quadratic");
    }
    let records = read_dataset(&a.input)?;
    let test = if a.all {
        records
    } else {
        split(&records, a.train_fraction, a.seed).1
    };
    let mut scored = Vec::new();
    for (name, path) in [("naive", &a.quadratic), ("mlp", &a.mlp)] {
        if let Some(path) = path {
            let model = load_model(path)?;
            scored.push((name, evaluate(&model, &test)?));
        }
    }
    let rows: Vec<(&str, &Metrics)> = scored.iter().map(|(n, m)| (*n, m)).collect();
    write_reports(&a.out, &rows)
}

fn compare(a: CompareArgs) -> Result<()> {
    let records = read_dataset(&a.input)?;
    let (train, test) = split(&records, a.train_fraction, a.seed);
    let base = train_config(&a.training, a.seed)?;
    let optimizers = if a.optimizers.is_empty() {
        OptimizerKind::ALL.to_vec()
    } else {
        a.optimizers.iter().map(|o| o.parse()).collect::<Result<Vec<OptimizerKind>, _>>()?
    };
    let rows = compare_optimizers(&train, &test, &base, &optimizers, a.seeds)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_optimizer_csv(File::create(&a.out)?, &rows)?;
    for r in &rows {
        println!("{:>9}: {:6.2} ± {:.3} ({} runs)", r.optimizer.to_string(), r.mean_mape, r.std_mape, r.mapes.len());
    }
    Ok(())
}

#[derive(Deserialize)]
struct Pair {
    instance: Instance,
    solution: Solution,
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let text = fs::read_to_string(&a.solution).with_context(|| format!("reading {}", a.solution.display()))?;
    let (solution, mut master): (Solution, Option<Width>) = if let Ok(r) = serde_json::from_str::<DatasetRecord>(&text) {
        (r.initial, Some(r.instance.master_width))
    } else if let Ok(p) = serde_json::from_str::<Pair>(&text) {
        (p.solution, Some(p.instance.master_width))
    } else {
        let s: Solution =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", a.solution.display()))?;
        (s, None)
    };
    if let Some(path) = &a.instance {
        let inst: Instance = serde_json::from_str(&fs::read_to_string(path)?)?;
        master = Some(inst.master_width);
    }
    if a.master.is_some() {
        master = a.master;
    }
    let master = match (&model, master) {
        (_, Some(m)) => m,
        // the quadratic only looks at the pattern count
        (Model::Quadratic(_), None) => 1,
        (Model::Mlp(_), None) => bail!("the MLP needs a master width: pass --instance or --master"),
    };
    println!("{}", model.predict(&solution, master)?);
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut predictors = Predictors::default();
    for path in [&a.mlp, &a.quadratic].into_iter().flatten() {
        match load_model(path)? {
            Model::Mlp(m) => predictors.mlp = Some(m),
            Model::Quadratic(q) => predictors.quadratic = Some(q),
        }
    }
    let budget = match a.nodes {
        Some(n) => Budget::nodes(n),
        None => Budget::wall_clock(a.budget),
    };
    let config = ServiceConfig {
        reduce: ReduceConfig {
            budget,
            ..ReduceConfig::default()
        },
        max_sessions: a.max_sessions,
        ttl: a.ttl,
        static_dir: a.static_dir,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(trimcast_service::serve(a.addr, AppState::new(config, predictors)))?;
    Ok(())
}
