//! Verifier mode over a batch with displaced boxes: per-prediction reports
//! plus corpus metrics.

use docval::pipeline::{generate_fixtures, verify_batch};
use docval::ValidatorConfig;

fn main() -> docval::Result<()> {
    let fx = generate_fixtures(3, 200, 15)?;
    let predictions: Vec<_> = fx
        .predictions
        .iter()
        .zip(&fx.examples)
        .enumerate()
        .map(|(i, (p, ex))| {
            let mut p = p.clone();
            // shift every third box by a growing amount
            if i % 3 == 0 {
                let d = (i as i64 % 40) + 2;
                p.bbox = p.bbox.shifted_within(d, -d / 2, ex.page);
            }
            p
        })
        .collect();

    let outcome = verify_batch(&fx.examples, &predictions, &ValidatorConfig::default(), 4)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"));

    let worst = outcome
        .reports
        .iter()
        .min_by(|a, b| a.breakdown.q.total_cmp(&b.breakdown.q))
        .expect("non-empty batch");
    println!("\nlowest-scoring prediction:");
    println!("{}", serde_json::to_string_pretty(worst).expect("report serializes"));
    Ok(())
}
