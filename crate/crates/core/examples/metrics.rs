//! The text and box metrics on their own.

use docval::metrics::{anls, iou, map_over_iou, normalized_levenshtein, pixel_error, MatchedPair};
use docval::BBox;

fn main() -> docval::Result<()> {
    for (a, b) in [("$45.99", "$45.99"), ("Total", " total "), ("$42.50", "$45.99"), ("café", "cafe")] {
        println!("NLS({a:?}, {b:?}) = {:.3}", normalized_levenshtein(a, b, 0.5));
    }
    let gts = vec!["March 17, 2024".to_string(), "2024-03-17".to_string()];
    println!("ANLS(\"2024-03-17\", {gts:?}) = {:.3}", anls("2024-03-17", &gts, 0.5)?);

    let gt = BBox::new(510, 800, 570, 830).expect("valid box");
    for pred in [
        BBox::new(510, 800, 570, 830).expect("valid box"),
        BBox::new(520, 805, 580, 835).expect("valid box"),
        BBox::new(760, 650, 840, 680).expect("valid box"),
    ] {
        println!("pred {pred}: IoU={:.3} delta={:?}", iou(&pred, &gt), pixel_error(&pred, &gt));
    }

    let pairs = [0.6, 0.9].map(|iou| MatchedPair { iou, anls: 1.0 });
    let summary = map_over_iou(&pairs)?;
    println!("\nmAP over IoU 0.50:0.95 = {:.2}", summary.map);
    for (t, acc) in &summary.per_threshold {
        println!("  @{t:.2}: {acc:.2}");
    }
    Ok(())
}
