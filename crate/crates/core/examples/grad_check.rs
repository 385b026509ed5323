//! Analytic gradients against central differences for all three models.

use hoseq::models::{grad_check, GradCheckDims, ModelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = GradCheckDims::default();
    for kind in [ModelKind::Gru, ModelKind::Lstm, ModelKind::Transformer] {
        let worst = (1..=5).map(|seed| grad_check(kind, dims, seed)).collect::<Result<Vec<_>, _>>()?;
        let max = worst.iter().copied().fold(0.0, f64::max);
        println!("{kind:<12} max relative error {max:.2e}");
    }
    Ok(())
}
