//! Generates one trace per preset and writes them as canonical CSV.

use hoseq::sim::{generate_scenario, sample_trace, Preset};
use hoseq::trace::write_trace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 7;
    let dir = std::env::temp_dir().join("hoseq-synth");
    std::fs::create_dir_all(&dir)?;
    for preset in [Preset::Grid, Preset::CorridorOscillation, Preset::StreetCanyon] {
        let scenario = generate_scenario(preset, seed);
        let trace = sample_trace(&scenario, seed)?;
        let path = dir.join(format!("{}.csv", preset.as_str()));
        std::fs::write(&path, write_trace(&trace))?;
        println!(
            "{:<22} cells {:>2}  samples {:>6}  {:>7.0} s  -> {}",
            preset.as_str(),
            scenario.cells.len(),
            trace.len(),
            trace.duration_s(),
            path.display()
        );
    }
    Ok(())
}
