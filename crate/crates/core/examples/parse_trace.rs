//! Parses a free-form reasoning trace and shows what the validator sees.

use docval::cot::parse_trace;

const TRACE: &str = "Looking at the receipt header first.
Step 1: The question asks for the invoice date.
step 2: Dates usually sit in the upper right, near [700, 60, 900, 90].
Step 3: Region #4 reads 2024-03-17 at [720, 64, 880, 88].
Answer: 2024-03-17
BBox: [720, 64, 880, 88]";

fn main() {
    let trace = parse_trace(TRACE);
    println!("preamble: {:?}", trace.preamble);
    for step in &trace.steps {
        println!("step {}: {}", step.ordinal, step.text);
        for b in &step.coordinates {
            println!("    coordinate {b}");
        }
        for p in &step.spatial_phrases {
            println!("    {:?} band {:?} from {:?}", p.axis, p.band, p.source_text);
        }
    }
    println!("answer: {:?}", trace.final_answer);
    println!("bbox:   {:?}", trace.final_bbox.map(|b| b.to_string()));
    println!("last coordinate mention: {:?}", trace.last_coordinate().map(|b| b.to_string()));
    println!("\ncanonical form:\n{}", trace.to_canonical());
}
