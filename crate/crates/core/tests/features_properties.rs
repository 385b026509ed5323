mod common;

use hoseq::a3::{baseline_log, A3Params};
use hoseq::features::{apply_minmax, build_windows, class_weights, fit_minmax, slope, FeatureMode};
use hoseq::trace::DriveTrace;
use proptest::prelude::*;

fn setup(seed: u64) -> (DriveTrace, hoseq::a3::HandoverLog) {
    let t = common::random_trace(&mut common::rng(seed), 600, 3, 200);
    let log = baseline_log(&t, &A3Params { hysteresis_db: 1.0, ..A3Params::default() }).unwrap();
    (t, log)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scaled_training_windows_lie_in_the_unit_box(seed in any::<u64>(), all in any::<bool>(), l in 2usize..12) {
        let mode = if all { FeatureMode::All } else { FeatureMode::RsrpOnly };
        let (t, log) = setup(seed);
        let set = build_windows(&t, &log, mode, l);
        if set.windows.is_empty() {
            return Ok(());
        }
        let spec = fit_minmax(&set.windows, mode).unwrap();
        for w in apply_minmax(&spec, &set.windows).unwrap() {
            prop_assert_eq!(w.seq_len(), l);
            prop_assert_eq!(w.feature_dim(), mode.feature_count());
            for v in w.features.iter().flatten() {
                prop_assert!((0.0..=1.0).contains(v), "{v}");
            }
        }
    }

    #[test]
    fn windows_never_see_the_future(seed in any::<u64>()) {
        let (t, log) = setup(seed);
        let set = build_windows(&t, &log, FeatureMode::All, 6);
        for w in set.windows.iter().take(5) {
            let k = t.index_of_ts(w.context.trigger_ts_ms).unwrap();
            let mut future = t.clone();
            for r in &mut future.records[k + 1..] {
                r.serving.rsrp_dbm = Some(-44.0);
                r.bearing_deg = 123.0;
                r.speed_mps = 40.0;
            }
            let again = build_windows(&future, &log, FeatureMode::All, 6);
            let same = again.windows.iter().find(|x| x.event_index == w.event_index).unwrap();
            prop_assert_eq!(&same.features, &w.features);
        }
    }

    #[test]
    fn class_weight_mass_equals_sample_count(n0 in 1usize..500, n1 in 1usize..500) {
        let labels: Vec<bool> = (0..n0 + n1).map(|i| i >= n0).collect();
        let w = class_weights(&labels).unwrap();
        let mass = n0 as f64 * w.get(false) + n1 as f64 * w.get(true);
        prop_assert!((mass - (n0 + n1) as f64).abs() < 1e-9);
    }

    #[test]
    fn slope_of_a_ramp_is_constant(a in -140.0f64..-40.0, b in -5.0f64..5.0, dt in 0.05f64..2.0, n in 2usize..100) {
        let ramp: Vec<f64> = (0..n).map(|k| a + b * k as f64).collect();
        for s in slope(&ramp, dt).unwrap() {
            prop_assert!((s - b / dt).abs() < 1e-9);
        }
    }
}

#[test]
fn single_class_weights_are_rejected() {
    assert!(class_weights(&[true, true]).is_err());
    assert!(class_weights(&[]).is_err());
}

#[test]
fn short_history_skips_the_event() {
    let (t, log) = setup(1);
    let huge = build_windows(&t, &log, FeatureMode::RsrpOnly, t.len() + 1);
    assert!(huge.windows.is_empty());
    assert_eq!(huge.skipped, log.executed_count());
}
