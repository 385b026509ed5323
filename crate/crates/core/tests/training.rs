mod common;

use hoseq::features::{SequenceWindow, TriggerContext};
use hoseq::models::{forward, grid_search, train, train_with_validator, Dropout, GridOutcome, GridSpace, ModelKind, TrainConfig};
use rand::Rng;

fn windows(n: usize, seq_len: usize, seed: u64) -> Vec<SequenceWindow> {
    let mut r = common::rng(seed);
    (0..n)
        .map(|i| {
            let features: Vec<Vec<f64>> = (0..seq_len).map(|_| (0..3).map(|_| r.random_range(0.0..1.0)).collect()).collect();
            let last = &features[seq_len - 1];
            SequenceWindow {
                target_tos_s: 1.0 + 10.0 * last[0],
                censored: i % 17 == 0,
                target_pp: last[1] > 0.6,
                event_index: i,
                context: TriggerContext {
                    trigger_ts_ms: i as i64,
                    source_cell_id: 1,
                    target_cell_id: 2,
                    serving_rsrp_dbm: -90.0,
                    rsrp_slope: 0.0,
                    snr_slope: 0.0,
                    bearings_deg: vec![0.0; seq_len],
                    row_ts_ms: (0..seq_len as i64).collect(),
                },
                features,
            }
        })
        .collect()
}

fn quick(seed: u64) -> TrainConfig {
    TrainConfig { hidden_dim: 8, max_epochs: 15, patience: 5, seed, learning_rate: 3e-3, ..TrainConfig::default() }
}

#[test]
fn frozen_validation_stops_at_patience_plus_one() {
    let data = windows(120, 4, 1);
    for kind in [ModelKind::Gru, ModelKind::Lstm, ModelKind::Transformer] {
        for patience in [1, 3, 6] {
            let cfg = TrainConfig { patience, max_epochs: 50, ..quick(2) };
            let (_, h) = train_with_validator(kind, &data, &cfg, |_| Ok(0.25)).unwrap();
            assert_eq!(h.stopped_epoch, patience + 1, "{kind} patience {patience}");
            assert_eq!(h.best_epoch, 1);
            assert_eq!(h.val_loss.len(), patience + 2);
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = windows(200, 5, 3);
    let (tr, va) = data.split_at(160);
    for kind in [ModelKind::Gru, ModelKind::Lstm, ModelKind::Transformer] {
        let a = train(kind, tr, va, &quick(4)).unwrap();
        let b = train(kind, tr, va, &quick(4)).unwrap();
        assert_eq!(a.0, b.0, "{kind}");
        assert_eq!(a.1.val_loss, b.1.val_loss);
        let c = train(kind, tr, va, &quick(5)).unwrap();
        assert_ne!(a.0, c.0, "{kind}: seed has no effect");
    }
}

#[test]
fn returned_parameters_are_the_best_epoch() {
    let data = windows(200, 5, 6);
    let (tr, va) = data.split_at(160);
    let (params, h) = train(ModelKind::Gru, tr, va, &quick(7)).unwrap();
    let weights = hoseq::features::class_weights(&tr.iter().filter(|w| !w.censored).map(|w| w.target_pp).collect::<Vec<_>>()).unwrap();
    let usable: Vec<SequenceWindow> = va.iter().filter(|w| !w.censored).cloned().collect();
    let loss = hoseq::models::loss(&usable, &params, &weights, 1.0).unwrap();
    assert!((loss - h.best_val_loss().unwrap()).abs() < 1e-9);
    assert!(h.val_loss.iter().skip(1).all(|&v| v >= h.best_val_loss().unwrap() - 1e-6));
}

#[test]
fn params_survive_a_byte_round_trip() {
    let data = windows(60, 4, 8);
    let (p, _) = train(ModelKind::Transformer, &data[..50], &data[50..], &quick(1)).unwrap();
    let back = hoseq::models::PredictorParams::from_bytes(&p.to_bytes()).unwrap();
    assert_eq!(back, p);
    let x = &data[0].features;
    assert_eq!(forward(&p, x, Dropout::Off).unwrap(), forward(&back, x, Dropout::Off).unwrap());
}

#[test]
fn grid_has_one_row_per_cell_and_failures_stay_isolated() {
    let space = GridSpace { seq_lens: vec![3, 4], hidden_dims: vec![4, 5], learning_rates: vec![1e-2, 3e-3] };
    let base = TrainConfig { max_epochs: 4, patience: 2, seed: 9, ..TrainConfig::default() };
    let data = |l: usize| {
        if l == 4 {
            return Err("no windows for this length".to_string());
        }
        let w = windows(80, l, 10);
        Ok((w[..60].to_vec(), w[60..].to_vec()))
    };
    let kinds = [ModelKind::Gru, ModelKind::Transformer];
    let serial = grid_search(&kinds, &space, &base, data, 1).unwrap();
    let parallel = grid_search(&kinds, &space, &base, data, 4).unwrap();
    assert_eq!(serial.rows, parallel.rows);
    assert_eq!(serial.rows.len(), kinds.len() * space.len());

    for row in &serial.rows {
        let should_fail = row.seq_len == 4 || (row.kind == ModelKind::Transformer && row.hidden_dim % 2 == 1);
        assert_eq!(matches!(row.outcome, GridOutcome::Failed(_)), should_fail, "{row:?}");
    }
    // a healthy cell trains exactly as it would alone
    let alone = grid_search(
        &[ModelKind::Gru],
        &GridSpace { seq_lens: vec![3], hidden_dims: vec![4], learning_rates: vec![1e-2] },
        &base,
        data,
        1,
    )
    .unwrap();
    assert!(serial.rows.contains(&alone.rows[0]));
    let best = serial.best_row().unwrap();
    assert!(matches!(best.outcome, GridOutcome::Trained { .. }));
    assert!(serial.to_csv().lines().filter(|l| l.contains(",failed: ")).count() > 0);
}

#[test]
fn invalid_configs_are_rejected() {
    let data = windows(40, 3, 11);
    for cfg in [
        TrainConfig { learning_rate: -1.0, ..quick(1) },
        TrainConfig { dropout_prob: 1.0, ..quick(1) },
        TrainConfig { batch_size: 0, ..quick(1) },
        TrainConfig { hidden_dim: 0, ..quick(1) },
    ] {
        assert!(train(ModelKind::Gru, &data[..30], &data[30..], &cfg).is_err(), "{cfg:?}");
    }
}
