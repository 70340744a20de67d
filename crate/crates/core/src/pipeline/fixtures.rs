//! Deterministic synthetic documents for tests, demos and benchmarks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cot::render_trace;
use crate::error::{Error, Result};
use crate::feedback::position_phrase;
use crate::model::{BBox, DocumentExample, PageGeometry, PredictionTuple, Region, ValidatorConfig};
use crate::validators::box_bands;

pub const DEFAULT_PAGE: PageGeometry = PageGeometry {
    width: 1000,
    height: 1000,
};

const ROW_PITCH: i64 = 50;
const TOP_MARGIN: i64 = 25;
const COLUMNS: i64 = 3;

/// Layout slots on [`DEFAULT_PAGE`]: each region gets its own cell.
pub const MAX_REGIONS: usize = (((1000 - 2 * TOP_MARGIN) / ROW_PITCH) * COLUMNS) as usize;

const WORDS: &[&str] = &[
    "Coffee", "Sandwich", "Invoice", "Customer", "Cashier", "Account", "Reference", "Balance", "Payment",
    "Terminal", "Store", "Receipt", "Card", "Change", "Discount", "Quantity", "Salad", "Muffin", "Parking",
    "Delivery",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    pub examples: Vec<DocumentExample>,
    /// Ground-truth predictions, one per example, in the same order.
    pub predictions: Vec<PredictionTuple>,
}

fn region_text(rng: &mut ChaCha8Rng) -> (&'static str, String) {
    match rng.gen_range(0..4) {
        0 => ("amount", format!("${}.{:02}", rng.gen_range(1..1000), rng.gen_range(0..100))),
        1 => (
            "date",
            format!("2024-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28)),
        ),
        2 => ("reference code", format!("INV-{:05}", rng.gen_range(0..100_000))),
        _ => ("item", WORDS[rng.gen_range(0..WORDS.len())].to_string()),
    }
}

fn layout(rng: &mut ChaCha8Rng, count: usize) -> Vec<BBox> {
    let col_width = i64::from(DEFAULT_PAGE.width) / COLUMNS;
    let mut slots = sample(rng, MAX_REGIONS, count).into_vec();
    slots.sort_unstable();
    slots
        .into_iter()
        .map(|slot| {
            let (row, col) = (slot as i64 / COLUMNS, slot as i64 % COLUMNS);
            let w = rng.gen_range(40..=300);
            let h = rng.gen_range(16..=36);
            let x1 = col * col_width + rng.gen_range(5..=col_width - w - 5);
            let y1 = TOP_MARGIN + row * ROW_PITCH + rng.gen_range(5..=ROW_PITCH - h - 5);
            BBox::new(x1, y1, x1 + w, y1 + h).expect("slot geometry is valid")
        })
        .collect()
}

/// The canonical trace a perfect teacher writes for `example`.
pub fn ground_truth_trace(example: &DocumentExample) -> String {
    let (v, h) = box_bands(&example.gt_bbox, example.page, ValidatorConfig::default().spatial_band_edges);
    let scan = format!("Scan the {} of the page.", position_phrase(v, h));
    let found = match example.gt_region_index.and_then(|k| example.region(k)) {
        Some(r) => format!("Region #{} reads \"{}\" at {}.", r.index, r.text, r.bbox),
        None => format!("The answer is printed at {}.", example.gt_bbox),
    };
    render_trace(
        "",
        &[
            (1, "Read the question and identify the requested field."),
            (2, &scan),
            (3, &found),
        ],
        Some(example.primary_answer()),
        Some(&example.gt_bbox),
    )
}

/// Generates `n` single-page documents with `regions_per_doc` disjoint text
/// regions each, plus their ground-truth predictions.
pub fn generate_fixtures(seed: u64, n: usize, regions_per_doc: usize) -> Result<Fixtures> {
    if n == 0 {
        return Err(Error::EmptyInput("generate_fixtures needs n >= 1"));
    }
    if regions_per_doc == 0 || regions_per_doc > MAX_REGIONS {
        return Err(Error::InfeasibleLayout {
            regions: regions_per_doc,
            width: DEFAULT_PAGE.width,
            height: DEFAULT_PAGE.height,
        });
    }

    let mut examples = Vec::with_capacity(n);
    let mut predictions = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);

        let boxes = layout(&mut rng, regions_per_doc);
        let mut kinds = Vec::with_capacity(boxes.len());
        let regions: Vec<Region> = boxes
            .into_iter()
            .enumerate()
            .map(|(k, bbox)| {
                let (kind, text) = region_text(&mut rng);
                kinds.push(kind);
                Region {
                    index: k as u32,
                    bbox,
                    text,
                }
            })
            .collect();

        let target = rng.gen_range(0..regions.len());
        let answer_region = &regions[target];
        let example = DocumentExample {
            id: format!("fx-{seed}-{i:06}"),
            page: DEFAULT_PAGE,
            question: format!("Which {} appears on this document?", kinds[target]),
            answers: vec![answer_region.text.clone()],
            gt_bbox: answer_region.bbox,
            gt_region_index: Some(answer_region.index),
            regions,
        };
        predictions.push(PredictionTuple {
            id: example.id.clone(),
            cot: ground_truth_trace(&example),
            answer: example.primary_answer().to_string(),
            bbox: example.gt_bbox,
        });
        examples.push(example);
    }
    Ok(Fixtures { examples, predictions })
}

/// Replaces the answer with text that matches neither the ground truth nor
/// any region, which caps the overall score at 0.6 under default weights.
pub fn corrupt_answer(prediction: &PredictionTuple) -> PredictionTuple {
    PredictionTuple {
        answer: "##unreadable##".to_string(),
        ..prediction.clone()
    }
}

/// A receipt with fifteen detected regions, a question about its total, a
/// teacher trace that gets it right and a student trace that reads the
/// subtotal instead.
#[derive(Debug, Clone)]
pub struct ReceiptCase {
    pub example: DocumentExample,
    pub teacher: PredictionTuple,
    pub student: PredictionTuple,
}

pub fn receipt_case() -> ReceiptCase {
    let regions = [
        (0, [350, 40, 650, 80], "STORE 24"),
        (1, [380, 100, 620, 130], "Receipt #10482"),
        (2, [510, 800, 570, 830], "$45.99"),
        (3, [100, 300, 220, 330], "Coffee"),
        (4, [760, 300, 840, 330], "$4.50"),
        (5, [100, 360, 260, 390], "Sandwich"),
        (6, [760, 360, 840, 390], "$12.00"),
        (7, [760, 650, 840, 680], "Subtotal"),
        (8, [860, 650, 940, 680], "$42.50"),
        (9, [100, 720, 160, 750], "Tax"),
        (10, [760, 720, 840, 750], "$3.49"),
        (11, [100, 420, 200, 450], "Salad"),
        (12, [760, 420, 840, 450], "$26.00"),
        (13, [400, 920, 600, 950], "Thank you!"),
        (14, [445, 795, 505, 825], "TOTAL:"),
    ]
    .into_iter()
    .map(|(index, c, text)| Region {
        index,
        bbox: BBox::from_coords(c).expect("valid receipt box"),
        text: text.to_string(),
    })
    .collect();

    let gt = BBox::new(510, 800, 570, 830).expect("valid");
    let example = DocumentExample {
        id: "receipt-0001".to_string(),
        page: DEFAULT_PAGE,
        question: "What is the total?".to_string(),
        answers: vec!["$45.99".to_string()],
        gt_bbox: gt,
        gt_region_index: Some(2),
        regions,
    };

    let teacher = PredictionTuple {
        id: example.id.clone(),
        cot: "Step 1: The question asks for the total amount.\n\
              Step 2: Region #14 holds the TOTAL: label in the lower section.\n\
              Step 3: The amount next to it, Region #2, reads $45.99 at [510, 800, 570, 830].\n\
              Answer: $45.99\n\
              BBox: [510, 800, 570, 830]"
            .to_string(),
        answer: "$45.99".to_string(),
        bbox: gt,
    };

    let student_box = BBox::new(760, 650, 840, 680).expect("valid");
    let student = PredictionTuple {
        id: example.id.clone(),
        cot: "Step 1: Look for the total amount on the receipt.\n\
              Step 2: Scan the middle section for summary fields.\n\
              Step 3: Found the SUBTOTAL label in the middle right area.\n\
              Step 4: The amount next to it reads $42.50.\n\
              Step 5: Its box is [760, 650, 840, 680].\n\
              Answer: $42.50\n\
              BBox: [760, 650, 840, 680]"
            .to_string(),
        answer: "$42.50".to_string(),
        bbox: student_box,
    };

    ReceiptCase {
        example,
        teacher,
        student,
    }
}
