//! Streams synthetic teacher outputs through the filter and keeps the good
//! ones. A few predictions get a corrupted answer and should be dropped.

use docval::pipeline::fixtures::corrupt_answer;
use docval::pipeline::{default_jobs, filter_stream, generate_fixtures};
use docval::ValidatorConfig;

fn main() -> docval::Result<()> {
    let fx = generate_fixtures(42, 2_000, 15)?;
    let predictions: Vec<_> = fx
        .predictions
        .iter()
        .enumerate()
        .map(|(i, p)| if i % 50 == 0 { corrupt_answer(p) } else { p.clone() })
        .collect();

    let mut kept = Vec::new();
    let stats = filter_stream(
        fx.examples.into_iter().map(Ok),
        predictions.into_iter().map(Ok),
        &ValidatorConfig::default(),
        default_jobs(),
        |rec| {
            kept.push(rec.example.id);
            Ok(())
        },
    )?;

    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    println!("first kept ids: {:?}", &kept[..3]);
    Ok(())
}
