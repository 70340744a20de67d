//! Seeded train/refine/test split.

use docval::model::split_dataset;

fn main() -> docval::Result<()> {
    let ids: Vec<String> = (0..95_000).map(|i| format!("doc-{i:05}")).collect();
    let split = split_dataset(&ids, [0.8, 0.1, 0.1], 2024)?;
    println!(
        "train={} refine={} test={}",
        split.train.len(),
        split.refine.len(),
        split.test.len()
    );
    println!("first training ids: {:?}", &split.train[..3]);

    let again = split_dataset(&ids, [0.8, 0.1, 0.1], 2024)?;
    println!("same seed, same split: {}", again == split);
    Ok(())
}
