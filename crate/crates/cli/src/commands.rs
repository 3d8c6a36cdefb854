use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stlgru::baselines::BaselineKind;
use stlgru::data::{generate_synthetic, load_series, save_series, Dtype, StsfHeader};
use stlgru::gradcheck::{gradient_check, toy_config, DEFAULT_EPS, DEFAULT_TOLERANCE};
use stlgru::metrics::{CostReport, Metrics, MetricsReport};
use stlgru::model::{Architecture, ModelConfig};
use stlgru::trainer::{self, evaluate, prepare, split_dataset, windowize, Checkpoint, Precision, TrainConfig};
use stlgru::{Model, SeriesTensor};

use crate::config::RunConfig;
use crate::Failure;

/// Writes `body` after a `# config: {...}` line so every artifact carries the
/// settings and seed that produced it.
fn write_artifact(path: &Path, cfg: &RunConfig, body: &str) -> Result<(), Failure> {
    let text = format!("# config: {}\n{body}", cfg.to_json());
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, Failure> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn load_data(cfg: &mut RunConfig) -> Result<SeriesTensor, Failure> {
    let path = cfg
        .data
        .clone()
        .ok_or_else(|| Failure::Usage("missing `--data PATH` (an STSF file)".into()))?;
    let (_, series) = load_series(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    cfg.model.nodes = series.nodes();
    cfg.model.in_channels = series.channels();
    Ok(series)
}

fn metrics_row(m: &Metrics) -> String {
    format!("{:>10.4} {:>10.4} {:>9.3}%", m.mae, m.rmse, m.mape)
}

fn print_report(report: &MetricsReport) {
    println!("{:>8} {:>10} {:>10} {:>10}", "horizon", "MAE", "RMSE", "MAPE");
    for h in &report.horizons {
        println!("{:>8} {}", h.horizon, metrics_row(&h.metrics));
    }
    println!("{:>8} {}", "avg", metrics_row(&report.average));
    println!(
        "{} targets, {} excluded from MAPE",
        report.average.n_evaluated, report.average.masked_count
    );
}

pub fn synth(cfg: RunConfig) -> Result<(), Failure> {
    cfg.synthetic.validate().map_err(crate::config::usage)?;
    let out = generate_synthetic(&cfg.synthetic)?;
    let dir = out_dir(&cfg)?;
    let dtype = match cfg.train.precision {
        Precision::F32 => Dtype::F32,
        Precision::F64 => Dtype::F64,
    };
    let mut header = StsfHeader::for_series(&out.series, dtype);
    header.name = Some("synthetic".into());
    header.interval_minutes = Some(5.0);
    header.config = Some(serde_json::to_value(&cfg).expect("config serializes"));
    let data_path = dir.join("synthetic.stsf");
    save_series(&data_path, &out.series, &header)?;

    let mut edges = String::from("source,target\n");
    for (i, j) in out.edges() {
        let _ = writeln!(edges, "{i},{j}");
    }
    write_artifact(&dir.join("graph.csv"), &cfg, &edges)?;
    println!(
        "wrote {} ({} nodes, {} steps) and graph.csv ({} edges)",
        data_path.display(),
        out.series.nodes(),
        out.series.steps(),
        out.edges().len()
    );
    Ok(())
}

pub fn train(mut cfg: RunConfig) -> Result<(), Failure> {
    let series = load_data(&mut cfg)?;
    cfg.validate()?;
    let outcome = trainer::train(&cfg.model, &series, &cfg.train)?;
    let dir = out_dir(&cfg)?;
    let checkpoint = Checkpoint::new(&outcome, &cfg.train);
    checkpoint.save(dir.join("checkpoint.json"))?;

    let mut history = String::from("epoch,train_loss,val_mae,skipped_steps\n");
    for r in &outcome.history {
        let _ = writeln!(history, "{},{},{},{}", r.epoch, r.train_loss, r.val_mae, r.skipped_steps);
    }
    write_artifact(&dir.join("history.csv"), &cfg, &history)?;

    match outcome.best_epoch {
        Some(e) => println!(
            "best validation MAE {:.4} at epoch {e} of {}{}",
            outcome.history[e].val_mae,
            outcome.history.len(),
            if outcome.stopped_early { " (early stop)" } else { "" }
        ),
        None => println!("trained {} epochs; no validation windows", outcome.history.len()),
    }
    println!("wrote {}", dir.join("checkpoint.json").display());
    Ok(())
}

pub fn eval(mut cfg: RunConfig, checkpoint: &Path, explicit_horizons: bool, split: &str) -> Result<(), Failure> {
    let ck = Checkpoint::load(checkpoint).map_err(|e| Failure::Runtime(format!("{}: {e}", checkpoint.display())))?;
    let series = load_data(&mut cfg)?;
    let mc = &ck.model_config;
    if series.nodes() != mc.nodes {
        return Err(Failure::Usage(format!(
            "checkpoint was trained with N = {} nodes but the dataset has N = {}",
            mc.nodes,
            series.nodes()
        )));
    }
    if series.channels() != mc.in_channels {
        return Err(Failure::Usage(format!(
            "checkpoint expects {} input channels but the dataset has {}",
            mc.in_channels,
            series.channels()
        )));
    }
    let horizons: Vec<usize> = if explicit_horizons {
        if let Some(&h) = cfg.horizons.iter().find(|&&h| h > mc.horizon) {
            return Err(Failure::Usage(format!(
                "horizon {h} exceeds the checkpoint's forecast length T' = {}",
                mc.horizon
            )));
        }
        cfg.horizons.clone()
    } else {
        cfg.horizons.iter().copied().filter(|&h| h <= mc.horizon).collect()
    };
    // Echo what is actually evaluated.
    cfg.model = mc.clone();
    cfg.train = ck.train_config.clone();
    cfg.horizons = horizons.clone();

    let model = ck.model()?;
    let tc = &ck.train_config;
    let splits = split_dataset(series.steps(), tc.split_ratio, tc.split_order, tc.window_len())?;
    let range = if split == "validation" { splits.validation } else { splits.test };
    let normalized = ck.normalizer.apply_series(&series);
    let windows = windowize(&normalized, range, mc.input_len, mc.horizon);
    let report = evaluate(&model, &windows, &ck.normalizer, &horizons)?;
    print_report(&report);
    let dir = out_dir(&cfg)?;
    write_artifact(&dir.join("metrics.csv"), &cfg, &report.to_csv())?;
    println!("wrote {}", dir.join("metrics.csv").display());
    Ok(())
}

pub fn gradcheck(cfg: RunConfig) -> Result<(), Failure> {
    let m = &cfg.model;
    if m.architecture == Architecture::Persistence {
        println!("persistence has no parameters; nothing to check");
        return Ok(());
    }
    let toy = ModelConfig {
        use_gumbel: m.use_gumbel,
        use_maa: m.use_maa,
        attention_axis: m.attention_axis,
        tau: m.tau,
        ..toy_config(m.architecture)
    };
    let report = gradient_check(&toy, cfg.train.seed, DEFAULT_EPS)?;
    println!("{:<10} {:>8} {:>14}", "tensor", "shape", "rel. error");
    for t in &report.tensors {
        println!("{:<10} {:>8} {:>14.3e}", t.name, format!("{}x{}", t.shape.0, t.shape.1), t.relative_error);
    }
    let worst = report.max_relative_error();
    println!("max relative error {worst:.3e} (tolerance {DEFAULT_TOLERANCE:e})");
    if report.passed(DEFAULT_TOLERANCE) {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("gradient check failed: {worst:.3e} > {DEFAULT_TOLERANCE:e}")))
    }
}

pub fn inspect(mut cfg: RunConfig) -> Result<(), Failure> {
    if cfg.data.is_some() {
        load_data(&mut cfg)?;
    }
    let cost = CostReport::new(&cfg.model)?;
    println!("model: {}", serde_json::to_string_pretty(&cfg.model).expect("config serializes"));
    println!("parameters: {}", cost.parameter_count);
    for (name, n) in &cost.parameter_breakdown {
        println!("  {name:<10} {n:>12}");
    }
    println!("FLOPs per window (T = {}): {}", cfg.model.input_len, cost.flops_per_window);
    for (stage, n) in &cost.flop_breakdown {
        println!("  {stage:<10} {n:>12}");
    }
    Ok(())
}

pub fn ablate(mut cfg: RunConfig, repeats: u64) -> Result<(), Failure> {
    if repeats == 0 {
        return Err(Failure::Usage("`repeats` must be at least 1".into()));
    }
    let series = load_data(&mut cfg)?;
    cfg.validate()?;
    let base = ModelConfig {
        architecture: Architecture::Stlgru,
        use_gumbel: true,
        use_maa: true,
        ..cfg.model.clone()
    };
    let data = prepare(&series, &cfg.train)?;
    let cells = [
        ("full", base.clone()),
        ("gumbel_only", BaselineKind::StlgruNoMaa.configure(&base)),
        ("maa_only", BaselineKind::StlgruNoGumbel.configure(&base)),
        ("neither", BaselineKind::StlgruNoBoth.configure(&base)),
    ];
    let persistence = Model::zeros(BaselineKind::Persistence.configure(&base))?;
    let reference = evaluate(&persistence, &data.validation, &data.normalizer, &[])?.average;

    let mut csv = String::from("variant,use_gumbel,use_maa,seeds,val_mae,val_rmse,val_mape\n");
    println!("{:<12} {:>6} {:>6} {:>10} {:>10} {:>10}", "variant", "gumbel", "maa", "MAE", "RMSE", "MAPE");
    for (label, mc) in cells {
        let mut sum = [0.0; 3];
        for k in 0..repeats {
            let tc = TrainConfig {
                seed: cfg.train.seed + k,
                ..cfg.train.clone()
            };
            let out = trainer::train(&mc, &series, &tc)?;
            let m = evaluate(&out.model, &data.validation, &data.normalizer, &[])?.average;
            sum[0] += m.mae;
            sum[1] += m.rmse;
            sum[2] += m.mape;
        }
        let [mae, rmse, mape] = sum.map(|s| s / repeats as f64);
        println!(
            "{label:<12} {:>6} {:>6} {mae:>10.4} {rmse:>10.4} {mape:>9.3}%",
            mc.use_gumbel, mc.use_maa
        );
        let _ = writeln!(csv, "{label},{},{},{repeats},{mae},{rmse},{mape}", mc.use_gumbel, mc.use_maa);
    }
    println!(
        "{:<12} {:>6} {:>6} {:>10.4} {:>10.4} {:>9.3}%",
        "persistence", "-", "-", reference.mae, reference.rmse, reference.mape
    );
    let _ = writeln!(
        csv,
        "persistence,,,0,{},{},{}",
        reference.mae, reference.rmse, reference.mape
    );
    let dir = out_dir(&cfg)?;
    write_artifact(&dir.join("ablation.csv"), &cfg, &csv)?;
    println!("wrote {}", dir.join("ablation.csv").display());
    Ok(())
}
