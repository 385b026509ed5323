mod common;

use hoseq::config::{RunConfig, DEFAULT_SEED, SEED_ENV};
use hoseq::metrics::{
    classification_metrics, parse_summary_csv, pp_reduction_pct, summary_csv, Classification, MetricsSummary, Reductions, SummaryRow, Timing,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn classification_matches_the_confusion_matrix(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..300)) {
        let (truth, pred): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let c = classification_metrics(&truth, &pred).unwrap();
        let want = common::reference_scores(&truth, &pred);
        for (got, want) in [c.accuracy, c.precision, c.recall, c.f1].into_iter().zip(want) {
            prop_assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn config_text_round_trips(h in 0.0f64..6.0, ttt in 0i64..2000, lr in 1e-5f64..1.0, l in 2usize..40, seed in proptest::option::of(any::<u64>()), both in any::<bool>()) {
        let mut c = RunConfig::default();
        c.a3.hysteresis_db = h;
        c.a3.ttt_ms = ttt;
        c.train.learning_rate = lr;
        c.seq_len = l;
        c.seed = seed;
        if both {
            c.set("feat.mode", "both").unwrap();
        }
        prop_assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn reduction_is_a_percentage_of_the_baseline(b in 1usize..500, r in 0usize..500) {
        let v = pp_reduction_pct(b, r).unwrap();
        prop_assert!((v - 100.0 * (b as f64 - r as f64) / b as f64).abs() < 1e-9);
    }
}

#[test]
fn no_baseline_ping_pongs_means_no_reduction() {
    assert_eq!(pp_reduction_pct(0, 0), None);
}

fn summary(kind: &str, f1: Option<f64>) -> MetricsSummary {
    MetricsSummary {
        kind: kind.into(),
        mode: "all".into(),
        detection: f1.map(|f1| Classification { accuracy: 90.0, precision: 50.0, recall: 50.0, f1 }),
        reductions: Reductions {
            pp_reduction_pct: Some(98.148148),
            ho_reduction_pct: 46.25,
            tos_gain_pct: None,
            baseline_handovers: 80,
            replayed_handovers: 43,
            baseline_pp: 54,
            replayed_pp: 1,
        },
        timing: Timing { train_s: 1.5, infer_total_s: 0.01, infer_per_event_s: Some(1e-4), param_count: 1234 },
    }
}

#[test]
fn summary_csv_parses_back() {
    let rows = [summary("gru", Some(61.5)), summary("lstm", None)];
    let text = summary_csv(&rows, false);
    assert!(text.starts_with("kind,mode,pp_reduction,pp_f1,ho_reduction,tos_gain,train_s,infer_s,params\n"));
    assert!(text.contains("gru,all,98.1481,61.5000,46.2500,NA,NA,NA,1234"));
    let parsed = parse_summary_csv(&text).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[1], SummaryRow { pp_reduction: Some(98.1481), train_s: None, infer_s: None, ..SummaryRow::from(&rows[1]) });
    let timed = parse_summary_csv(&summary_csv(&rows, true)).unwrap();
    assert_eq!(timed[0].train_s, Some(1.5));
    assert!(parse_summary_csv("kind,mode\n").is_err());
}

#[test]
fn unknown_and_malformed_keys_are_rejected() {
    assert!(RunConfig::parse("a3.hysteresis = 3").is_err());
    assert!(RunConfig::parse("a3.hysteresis_db = three").is_err());
    assert!(RunConfig::parse("just words").is_err());
    let c = RunConfig::parse("# comment\n\na3.hysteresis_db = 4 # trailing\n").unwrap();
    assert_eq!(c.a3.hysteresis_db, 4.0);
    assert!(RunConfig::parse("train.lr = -0.1").is_err());
    assert!(RunConfig::parse("split.ratios = 0.5,0.5,0.5").is_err());
}

#[test]
fn seed_precedence() {
    // the only test in this binary that touches the environment
    let mut c = RunConfig::default();
    std::env::remove_var(SEED_ENV);
    assert_eq!(c.resolve_seed(None).unwrap(), DEFAULT_SEED);
    std::env::set_var(SEED_ENV, "41");
    assert_eq!(c.resolve_seed(None).unwrap(), 41);
    c.seed = Some(42);
    assert_eq!(c.resolve_seed(None).unwrap(), 42);
    assert_eq!(c.resolve_seed(Some(43)).unwrap(), 43);
    c.seed = None;
    std::env::set_var(SEED_ENV, "x");
    assert!(c.resolve_seed(None).is_err());
    std::env::remove_var(SEED_ENV);
}
