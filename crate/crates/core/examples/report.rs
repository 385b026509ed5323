//! Runs every model in both feature modes and writes the report files.

use hoseq::config::RunConfig;
use hoseq::features::FeatureMode;
use hoseq::metrics::emit_report;
use hoseq::models::ModelKind;
use hoseq::pipeline::{prepare_trace, run_all};
use hoseq::sim::{generate_scenario, sample_trace, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 7;
    let raw = sample_trace(&generate_scenario(Preset::CorridorOscillation, seed), seed)?;
    let cfg = RunConfig {
        kinds: vec![ModelKind::Gru, ModelKind::Lstm, ModelKind::Transformer],
        modes: vec![FeatureMode::RsrpOnly, FeatureMode::All],
        ..RunConfig::default()
    };
    let (trace, _) = prepare_trace(&raw, cfg.repair)?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summaries: Vec<_> = run_all(&trace, &cfg, seed, jobs)?.into_iter().map(|e| e.summary).collect();
    let out = std::env::temp_dir().join("hoseq-report");
    for path in emit_report(&summaries, &out, hoseq::VERSION, false)? {
        println!("wrote {}", path.display());
    }
    print!("\n{}", std::fs::read_to_string(out.join("summary.txt"))?);
    Ok(())
}
