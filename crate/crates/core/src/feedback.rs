//! Output modes of the validator.
//!
//! Filter mode only needs a [`Verdict`]. Verifier mode renders a
//! [`FeedbackReport`]: one error per failing module, pixel corrections,
//! fixes in priority order and a suggested corrected output.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cot::{parse_trace, render_trace, Band, CoTTrace};
use crate::model::{BBox, DocumentExample, PredictionTuple, QualityBreakdown, ValidatorConfig};
use crate::validators::box_bands;

/// Scores below `1 - FAILING_EPS` count as failing.
pub const FAILING_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Decision,
    pub q: f64,
    pub threshold: f64,
}

/// Accepts strictly above `q_min`.
pub fn decide(breakdown: &QualityBreakdown, cfg: &ValidatorConfig) -> Verdict {
    Verdict {
        status: if breakdown.q > cfg.q_min {
            Decision::Accept
        } else {
            Decision::Reject
        },
        q: breakdown.q,
        threshold: cfg.q_min,
    }
}

/// Turns the top-left corner error into a movement instruction, e.g.
/// `Move 250px LEFT, 150px DOWN.`
pub fn render_bbox_directive(delta: [i64; 4]) -> String {
    let [dx, dy, _, _] = delta;
    let mut parts = Vec::with_capacity(2);
    if dx != 0 {
        parts.push(format!("{}px {}", dx.abs(), if dx < 0 { "LEFT" } else { "RIGHT" }));
    }
    if dy != 0 {
        parts.push(format!("{}px {}", dy.abs(), if dy < 0 { "UP" } else { "DOWN" }));
    }
    if parts.is_empty() {
        "Position correct.".to_string()
    } else {
        format!("Move {}.", parts.join(", "))
    }
}

/// Words for a page position, e.g. "lower center" or "middle right".
pub fn position_phrase(vertical: Band, horizontal: Band) -> String {
    use crate::cot::Axis;
    match (vertical, horizontal) {
        (Band::Middle, Band::Middle) => "center".to_string(),
        (v, h) => format!("{} {}", v.word(Axis::Vertical), h.word(Axis::Horizontal)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCategory {
    Answer,
    Bbox,
    Reasoning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorItem {
    pub category: ErrorCategory,
    pub message: String,
    /// `1 - component score`.
    pub severity: f64,
}

/// Fix kinds, declared in priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FixKind {
    /// The answer came from the wrong field of the document.
    AnswerField,
    AnswerText,
    RegionLocalization,
    BBoxAdjustment,
    Reasoning,
}

impl FixKind {
    pub fn is_answer(self) -> bool {
        matches!(self, FixKind::AnswerField | FixKind::AnswerText)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fix {
    pub kind: FixKind,
    pub directive: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackReport {
    pub id: String,
    pub status: Status,
    pub breakdown: QualityBreakdown,
    pub errors: Vec<ErrorItem>,
    pub fixes: Vec<Fix>,
    pub suggested_answer: String,
    pub suggested_bbox: BBox,
    pub correction_directive: String,
    /// The suggested output in canonical trace format.
    pub suggested_trace: String,
}

fn failing(score: f64) -> bool {
    score < 1.0 - FAILING_EPS
}

fn region_label(example: &DocumentExample, index: u32) -> String {
    match example.region(index) {
        Some(r) => format!("Region #{index} ({})", r.text),
        None => format!("Region #{index}"),
    }
}

/// Renders the verifier-mode report for one validated prediction.
pub fn build_report(
    example: &DocumentExample,
    prediction: &PredictionTuple,
    breakdown: &QualityBreakdown,
    cfg: &ValidatorConfig,
) -> FeedbackReport {
    let b = breakdown;
    let gt_answer = example.primary_answer();
    let directive = render_bbox_directive(b.delta);
    let (gt_v, gt_h) = box_bands(&example.gt_bbox, example.page, cfg.spatial_band_edges);
    let gt_position = position_phrase(gt_v, gt_h);

    let pred_r = b.pred_region.region_index;
    let gt_r = b.gt_region.region_index;
    let wrong_region = match (pred_r, gt_r) {
        (Some(p), Some(g)) => (p != g).then_some((p, g)),
        _ => None,
    };
    let wrong_field = wrong_region.filter(|_| failing(b.anls));

    let mut errors = Vec::new();
    let mut fixes = Vec::new();

    if failing(b.q_ans) {
        let mut message = match wrong_field {
            Some((p, g)) => format!(
                "Got \"{}\" from {}, expected \"{gt_answer}\" from {}. Wrong semantic field.",
                prediction.answer,
                region_label(example, p),
                region_label(example, g)
            ),
            None if failing(b.anls) => format!(
                "Got \"{}\", expected \"{gt_answer}\" (ANLS={:.3}).",
                prediction.answer, b.anls
            ),
            None => format!("Answer \"{}\" matches the expected text.", prediction.answer),
        };
        if !b.answer_in_ocr {
            message.push_str(" The answer text does not occur in any detected region.");
        }
        errors.push(ErrorItem {
            category: ErrorCategory::Answer,
            message,
            severity: 1.0 - b.q_ans,
        });
        fixes.push(match wrong_field {
            Some((p, g)) => Fix {
                kind: FixKind::AnswerField,
                directive: format!(
                    "Distinguish {} from {}; answer with \"{gt_answer}\".",
                    region_label(example, p),
                    region_label(example, g)
                ),
            },
            None => Fix {
                kind: FixKind::AnswerText,
                directive: format!("Answer with \"{gt_answer}\" exactly as printed in the document."),
            },
        });
    }

    if failing(b.q_bbox) {
        let message = match (pred_r, gt_r) {
            (Some(p), Some(g)) if p != g => format!(
                "Your bbox {} targets {} but should target {} at {}. {directive}",
                prediction.bbox,
                region_label(example, p),
                region_label(example, g),
                example.gt_bbox
            ),
            (Some(p), Some(_)) => format!(
                "Your bbox {} overlaps the target {} but misses the answer box {} (IoU={:.3}). {directive}",
                prediction.bbox,
                region_label(example, p),
                example.gt_bbox,
                b.iou
            ),
            (Some(p), None) => format!(
                "Your bbox {} targets {} but the answer lies at {}. {directive}",
                prediction.bbox,
                region_label(example, p),
                example.gt_bbox
            ),
            (None, _) => format!(
                "Your bbox {} targets empty space; the answer lies at {}. {directive}",
                prediction.bbox, example.gt_bbox
            ),
        };
        errors.push(ErrorItem {
            category: ErrorCategory::Bbox,
            message,
            severity: 1.0 - b.q_bbox,
        });
        if let (Some(g), true) = (gt_r, pred_r != gt_r) {
            fixes.push(Fix {
                kind: FixKind::RegionLocalization,
                directive: format!("Locate {} in the {gt_position} of the page.", region_label(example, g)),
            });
        }
        if failing(b.iou) {
            fixes.push(Fix {
                kind: FixKind::BBoxAdjustment,
                directive: format!("Adjust bbox to {}: {directive}", example.gt_bbox),
            });
        }
    }

    if failing(b.q_reason) {
        let trace = parse_trace(&prediction.cot);
        let (message, repairs) = reasoning_feedback(&trace, prediction, example, b, cfg);
        errors.push(ErrorItem {
            category: ErrorCategory::Reasoning,
            message,
            severity: 1.0 - b.q_reason,
        });
        fixes.extend(repairs.into_iter().map(|directive| Fix {
            kind: FixKind::Reasoning,
            directive,
        }));
    }

    // stable: kinds keep their emission order within a priority level
    fixes.sort_by_key(|f| f.kind);

    FeedbackReport {
        id: example.id.clone(),
        status: if b.q > cfg.q_min { Status::Valid } else { Status::Invalid },
        breakdown: b.clone(),
        errors,
        fixes,
        suggested_answer: gt_answer.to_string(),
        suggested_bbox: example.gt_bbox,
        correction_directive: directive,
        suggested_trace: suggested_trace(example, b, &gt_position),
    }
}

fn reasoning_feedback(
    trace: &CoTTrace,
    prediction: &PredictionTuple,
    example: &DocumentExample,
    b: &QualityBreakdown,
    cfg: &ValidatorConfig,
) -> (String, Vec<String>) {
    let mut message = format!(
        "Reasoning scored {:.3} (structure {:.2}, coordinates {:.2}, spatial {:.2}).",
        b.q_reason, b.s_struct, b.s_coord, b.s_spatial
    );
    let mut repairs = Vec::new();

    if failing(b.s_struct) {
        let mut missing = Vec::new();
        if trace.steps.len() < 2 {
            missing.push(if trace.steps.is_empty() { "reasoning steps" } else { "a second reasoning step" });
        }
        if trace.final_answer.is_none() {
            missing.push("the Answer line");
        }
        if trace.final_bbox.is_none() {
            missing.push("the BBox line");
        }
        let _ = write!(message, " Missing {}.", missing.join(", "));
        repairs.push(format!(
            "Write at least two \"Step N:\" lines, then \"Answer: {}\" and \"BBox: {}\".",
            example.primary_answer(),
            example.gt_bbox
        ));
    }
    if failing(b.s_coord) && trace.final_bbox.is_some() {
        message.push_str(" Coordinates cited in the trace disagree with the declared bbox.");
        repairs.push(format!(
            "Make the last cited coordinates and the BBox line agree with the declared bbox {}.",
            prediction.bbox
        ));
    }
    if failing(b.s_spatial) {
        let (v, h) = box_bands(&prediction.bbox, example.page, cfg.spatial_band_edges);
        let _ = write!(
            message,
            " Spatial language does not match the bbox position ({} of the page).",
            position_phrase(v, h)
        );
        let (gv, gh) = box_bands(&example.gt_bbox, example.page, cfg.spatial_band_edges);
        repairs.push(format!(
            "Describe the answer as located in the {} of the page.",
            position_phrase(gv, gh)
        ));
    }
    (message, repairs)
}

fn suggested_trace(example: &DocumentExample, b: &QualityBreakdown, gt_position: &str) -> String {
    let located = match b.gt_region.region_index {
        Some(g) => format!(
            "{} in the {gt_position} of the page holds the answer at {}.",
            region_label(example, g),
            example.gt_bbox
        ),
        None => format!("The answer sits in the {gt_position} of the page at {}.", example.gt_bbox),
    };
    render_trace(
        "",
        &[(1, "Read the question and identify the requested field."), (2, &located)],
        Some(example.primary_answer()),
        Some(&example.gt_bbox),
    )
}

#[derive(Serialize)]
struct Components {
    q_ans: f64,
    q_bbox: f64,
    q_reason: f64,
    s_struct: f64,
    s_coord: f64,
    s_spatial: f64,
}

#[derive(Serialize)]
struct Suggested<'a> {
    answer: &'a str,
    bbox: BBox,
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    id: &'a str,
    status: Status,
    q: f64,
    components: Components,
    delta: [i64; 4],
    errors: &'a [ErrorItem],
    fixes: Vec<&'a str>,
    suggested: Suggested<'a>,
}

impl Serialize for FeedbackReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let b = &self.breakdown;
        ReportRecord {
            id: &self.id,
            status: self.status,
            q: b.q,
            components: Components {
                q_ans: b.q_ans,
                q_bbox: b.q_bbox,
                q_reason: b.q_reason,
                s_struct: b.s_struct,
                s_coord: b.s_coord,
                s_spatial: b.s_spatial,
            },
            delta: b.delta,
            errors: &self.errors,
            fixes: self.fixes.iter().map(|f| f.directive.as_str()).collect(),
            suggested: Suggested {
                answer: &self.suggested_answer,
                bbox: self.suggested_bbox,
            },
        }
        .serialize(serializer)
    }
}
