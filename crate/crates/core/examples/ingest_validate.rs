//! Ingests a trace with foreign column names and out-of-range values, then
//! compares the two repair policies.

use hoseq::sim::{generate_scenario, sample_trace, Preset};
use hoseq::trace::{interpolate_missing, parse_trace, repair_ranges, validate_ranges, write_trace, ColumnMapping, RepairPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = sample_trace(&generate_scenario(Preset::StreetCanyon, 3), 3)?;
    // rename two columns and plant a few bad readings
    let mut csv = write_trace(&trace).replacen("serving_rsrp", "RSRP", 1).replacen("serving_snr", "SINR", 1);
    let mut lines: Vec<String> = csv.lines().map(str::to_string).collect();
    let rsrp_col = lines[0].split(',').position(|c| c == "RSRP").expect("renamed column");
    for row in [10, 11, 500] {
        let mut cols: Vec<String> = lines[row].split(',').map(str::to_string).collect();
        cols[rsrp_col] = "-150".into();
        lines[row] = cols.join(",");
    }
    let mut cols: Vec<String> = lines[20].split(',').map(str::to_string).collect();
    cols[rsrp_col].clear();
    lines[20] = cols.join(",");
    csv = lines.join("\n");

    let mapping = ColumnMapping::parse("serving_rsrp = RSRP\nserving_snr = SINR\n")?;
    let raw = parse_trace(&csv, &mapping)?;
    let report = validate_ranges(&raw);
    println!("{} rows, {} missing values, violations {:?}", raw.len(), raw.count_missing(), report.counts_by_field());

    for policy in [RepairPolicy::Clamp, RepairPolicy::DropRows] {
        let fixed = interpolate_missing(&repair_ranges(&raw, policy)?)?;
        println!(
            "{policy:?}: {} rows, {} missing, clean {}",
            fixed.len(),
            fixed.count_missing(),
            validate_ranges(&fixed).is_clean()
        );
    }
    Ok(())
}
