//! Trains each ablation cell and the persistence reference on the default
//! synthetic series and prints validation MAE.
//!
//! `cargo run --release --example synthetic_benchmark -- [seeds] [epochs] [hidden]`

use std::time::Instant;

use stlgru::baselines::BaselineKind;
use stlgru::data::{generate_synthetic, SyntheticSpec};
use stlgru::model::{Architecture, Model, ModelConfig};
use stlgru::trainer::{evaluate, prepare, train, TrainConfig};

fn main() -> stlgru::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (seeds, epochs, hidden) = (arg(1, 3), arg(2, 50), arg(3, 64));
    let series = generate_synthetic(&SyntheticSpec::default())?.series;
    let base = ModelConfig {
        nodes: series.nodes(),
        hidden_dim: hidden,
        ..Default::default()
    };
    let tcfg = TrainConfig { epochs, ..Default::default() };
    let data = prepare(&series, &tcfg)?;
    let persist = Model::zeros(BaselineKind::Persistence.configure(&base))?;
    let p_mae = evaluate(&persist, &data.validation, &data.normalizer, &[])?.average.mae;
    println!("persistence validation MAE {p_mae:.4}");

    let cells = [
        ("full", base.clone()),
        ("gumbel_only", BaselineKind::StlgruNoMaa.configure(&base)),
        ("maa_only", BaselineKind::StlgruNoGumbel.configure(&base)),
        ("neither", BaselineKind::StlgruNoBoth.configure(&base)),
        ("gcn_gru", ModelConfig { architecture: Architecture::GcnGru, ..base.clone() }),
    ];
    for (name, cfg) in cells {
        let start = Instant::now();
        let mut maes = Vec::new();
        for seed in 0..seeds as u64 {
            let out = train(&cfg, &series, &TrainConfig { seed, ..tcfg.clone() })?;
            let mae = evaluate(&out.model, &data.validation, &data.normalizer, &[])?.average.mae;
            maes.push(mae);
        }
        let mean = maes.iter().sum::<f64>() / maes.len() as f64;
        println!(
            "{name:<12} mean MAE {mean:.4} ({:+.1}% vs persistence) {maes:.3?} in {:.1}s",
            100.0 * (mean / p_mae - 1.0),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
