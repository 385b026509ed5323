//! Baseline event-A3 handovers on the corridor preset, with stays and
//! ping-pong labels.

use hoseq::a3::{baseline_log, A3Params};
use hoseq::sim::{generate_scenario, sample_trace, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = sample_trace(&generate_scenario(Preset::CorridorOscillation, 7), 7)?;
    for hysteresis_db in [1.0, 3.0, 6.0] {
        let params = A3Params { hysteresis_db, ..A3Params::default() };
        let log = baseline_log(&trace, &params)?;
        println!(
            "hys {hysteresis_db} dB, ttt {} ms: {} handovers, {} ping-pongs, mean stay {:.1} s",
            params.ttt_ms,
            log.executed_count(),
            log.ping_pong_count(),
            log.mean_tos_s().unwrap_or(f64::NAN)
        );
    }
    let log = baseline_log(&trace, &A3Params::default())?;
    println!("\nfirst events:");
    for e in log.events.iter().take(8) {
        let tos = e.tos_s.map_or("censored".to_string(), |t| format!("{t:.1} s"));
        println!("  t={:>7.1} s  {} -> {}  stay {tos}  pp {}", e.trigger_ts_ms as f64 / 1000.0, e.source_cell_id, e.target_cell_id, e.pp_flag);
    }
    Ok(())
}
