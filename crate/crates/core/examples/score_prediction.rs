//! Scores one prediction on a receipt and prints the feedback report.
//!
//! ```text
//! cargo run --example score_prediction
//! ```

use docval::feedback::{build_report, decide};
use docval::pipeline::fixtures::receipt_case;
use docval::validators::validate;
use docval::ValidatorConfig;

fn main() -> docval::Result<()> {
    let cfg = ValidatorConfig::default();
    let case = receipt_case();

    for (who, prediction) in [("teacher", &case.teacher), ("student", &case.student)] {
        let breakdown = validate(&case.example, prediction, &cfg)?;
        let verdict = decide(&breakdown, &cfg);
        println!(
            "{who}: Q={:.3} (answer {:.3}, bbox {:.3}, reasoning {:.3}) -> {:?}",
            breakdown.q, breakdown.q_ans, breakdown.q_bbox, breakdown.q_reason, verdict.status
        );

        let report = build_report(&case.example, prediction, &breakdown, &cfg);
        for e in &report.errors {
            println!("  error  [{:?}] {}", e.category, e.message);
        }
        for (i, f) in report.fixes.iter().enumerate() {
            println!("  fix {} [{:?}] {}", i + 1, f.kind, f.directive);
        }
    }

    let breakdown = validate(&case.example, &case.student, &cfg)?;
    let report = build_report(&case.example, &case.student, &breakdown, &cfg);
    println!("\n{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
