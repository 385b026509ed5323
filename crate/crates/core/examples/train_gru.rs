//! Trains a GRU on corridor windows and prints the loss curve.

use hoseq::a3::{baseline_log, A3Params};
use hoseq::features::{apply_minmax, build_windows, chronological_split, fit_minmax, FeatureMode};
use hoseq::models::{forward, train, Dropout, ModelKind, TrainConfig};
use hoseq::sim::{generate_scenario, sample_trace, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = sample_trace(&generate_scenario(Preset::CorridorOscillation, 7), 7)?;
    let log = baseline_log(&trace, &A3Params::default())?;
    let mode = FeatureMode::All;
    let set = build_windows(&trace, &log, mode, 10);
    let (tr, va, te) = chronological_split(&set.windows, [0.7, 0.15, 0.15])?;
    let spec = fit_minmax(&tr, mode)?;
    let (tr, va, te) = (apply_minmax(&spec, &tr)?, apply_minmax(&spec, &va)?, apply_minmax(&spec, &te)?);

    let cfg = TrainConfig { max_epochs: 60, seed: 7, ..TrainConfig::default() };
    let (params, history) = train(ModelKind::Gru, &tr, &va, &cfg)?;
    for (e, (t, v)) in history.train_loss.iter().zip(&history.val_loss).enumerate().step_by(5) {
        println!("epoch {e:>3}  train {t:.4}  val {v:.4}");
    }
    println!("stopped at {}, best epoch {}, {} parameters", history.stopped_epoch, history.best_epoch, history.param_count);

    println!("\nheld-out predictions:");
    for w in te.iter().filter(|w| !w.censored).take(6) {
        let p = forward(&params, &w.features, Dropout::Off)?;
        println!("  true stay {:>5.1} s pp {:<5}  predicted {:>5.1} s pp {:.2}", w.target_tos_s, w.target_pp, p.tos_s(), p.pp_prob());
    }
    Ok(())
}
