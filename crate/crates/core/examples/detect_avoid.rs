//! The detection and avoidance rules on hand-picked events.

use hoseq::control::{avoid, detect_one, AvoidInput, ControlThresholds, DetectInput, DetectOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let th = ControlThresholds::default();
    let opts = DetectOptions::default();
    let cases = [
        ("short stay, steep RSRP", 3.0, 8.0, -90.0, [10.0, 12.0]),
        ("short stay, flat RSRP", 3.0, 0.5, -90.0, [10.0, 12.0]),
        ("very short stay", 1.5, 0.0, -90.0, [10.0, 12.0]),
        ("long stay, turning away", 20.0, 0.0, -90.0, [10.0, 100.0]),
        ("long stay, straight", 20.0, 0.0, -90.0, [10.0, 12.0]),
        ("short stay, weak serving", 3.0, 0.5, -115.0, [10.0, 12.0]),
    ];
    println!("{:<26} {:>5} {:>5} {:>6} {:>6} {:>5}  decision", "event", "short", "osc", "is_pp", "maway", "safe");
    for (name, y_p, slope, rsrp, bearings) in cases {
        let input = DetectInput { y_p: Some(y_p), rsrp_slope: slope, snr_slope: 0.0, pp_prob: None, truth_pp: false };
        let d = detect_one(&input, y_p, &th, &opts);
        let a = avoid(&AvoidInput { y_p, bearings_deg: &bearings, serving_rsrp_dbm: rsrp, is_pp: d.is_pp }, &th, true)?;
        println!("{name:<26} {:>5} {:>5} {:>6} {:>6} {:>5}  {:?}", d.short, d.osc, d.is_pp, a.maway, a.safe, a.decision);
    }
    Ok(())
}
