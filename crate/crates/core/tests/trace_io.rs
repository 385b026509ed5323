mod common;

use hoseq::trace::{
    interpolate_missing, parse_trace, repair_ranges, validate_ranges, write_trace, ColumnMapping, DriveTrace, RepairPolicy,
};
use proptest::prelude::*;

fn trace_from_seed(seed: u64, samples: usize, cells: u32) -> DriveTrace {
    common::random_trace(&mut common::rng(seed), samples, cells, 200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_parse_is_identity(seed in any::<u64>(), samples in 1usize..300, cells in 1u32..=6) {
        let t = trace_from_seed(seed, samples, cells);
        let back = parse_trace(&write_trace(&t), &ColumnMapping::canonical()).unwrap();
        prop_assert_eq!(back.records, t.records);
    }

    #[test]
    fn clamping_always_yields_a_clean_trace(seed in any::<u64>(), samples in 1usize..200, shift in -80.0f64..80.0) {
        let mut t = trace_from_seed(seed, samples, 3);
        for r in &mut t.records {
            if let Some(p) = r.serving.rsrp_dbm.as_mut() {
                *p += shift;
            }
        }
        let fixed = repair_ranges(&t, RepairPolicy::Clamp).unwrap();
        prop_assert!(validate_ranges(&fixed).is_clean());
        prop_assert_eq!(fixed.len(), t.len());
    }

    #[test]
    fn dropping_removes_exactly_the_violating_rows(seed in any::<u64>(), bad in prop::collection::btree_set(0usize..100, 0..10)) {
        let mut t = trace_from_seed(seed, 100, 3);
        if bad.len() == 100 {
            return Ok(());
        }
        for &row in &bad {
            t.records[row].serving.snr_db = Some(99.0);
        }
        let fixed = repair_ranges(&t, RepairPolicy::DropRows).unwrap();
        prop_assert_eq!(fixed.len(), 100 - bad.len());
        prop_assert!(validate_ranges(&fixed).is_clean());
    }
}

#[test]
fn interior_gap_is_linear_in_time() {
    let mut t = trace_from_seed(3, 10, 1);
    for (k, r) in t.records.iter_mut().enumerate() {
        r.serving.rsrp_dbm = Some(-100.0 + 2.0 * k as f64);
    }
    for k in 3..7 {
        t.records[k].serving.rsrp_dbm = None;
    }
    let filled = interpolate_missing(&t).unwrap();
    for (k, r) in filled.records.iter().enumerate() {
        assert!((r.serving.rsrp_dbm.unwrap() - (-100.0 + 2.0 * k as f64)).abs() < 1e-9);
    }
}

#[test]
fn edge_gaps_take_the_nearest_value() {
    let mut t = trace_from_seed(4, 6, 1);
    for r in t.records.iter_mut() {
        r.serving.snr_db = None;
    }
    t.records[2].serving.snr_db = Some(7.0);
    t.records[3].serving.snr_db = Some(9.0);
    let filled = interpolate_missing(&t).unwrap();
    let snr: Vec<f64> = filled.records.iter().map(|r| r.serving.snr_db.unwrap()).collect();
    assert_eq!(snr, vec![7.0, 7.0, 7.0, 9.0, 9.0, 9.0]);
    assert_eq!(filled.count_missing(), 0);
}

#[test]
fn renamed_columns_parse_through_a_mapping() {
    let t = trace_from_seed(5, 20, 2);
    let csv = write_trace(&t).replacen("ts_ms", "time", 1).replacen("serving_rsrp", "RSRP", 1);
    assert!(parse_trace(&csv, &ColumnMapping::canonical()).is_err());
    let mapping = ColumnMapping::parse("# external names\nts_ms = time\nserving_rsrp = RSRP\n").unwrap();
    assert_eq!(parse_trace(&csv, &mapping).unwrap().records, t.records);
}

#[test]
fn malformed_input_is_rejected() {
    let t = trace_from_seed(6, 5, 2);
    let csv = write_trace(&t);
    let mut lines: Vec<&str> = csv.lines().collect();
    lines.swap(1, 2);
    assert!(parse_trace(&lines.join("\n"), &ColumnMapping::canonical()).is_err(), "timestamps out of order");
    assert!(parse_trace("", &ColumnMapping::canonical()).is_err());
    assert!(ColumnMapping::parse("not_a_column = x").is_err());
}
