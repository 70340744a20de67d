//! The scoring modules: OCR grounding, answer, bbox and reasoning checks, and
//! their weighted aggregate.

use crate::cot::{parse_trace, Axis, Band, CoTTrace};
use crate::error::{Error, Result};
use crate::metrics::{anls, iou, normalize_text, pixel_error};
use crate::model::{BBox, DocumentExample, PageGeometry, PredictionTuple, QualityBreakdown, Region, ValidatorConfig};

pub use crate::model::RegionAssignment;

/// Assigns `b` to the region it overlaps most. Ties go to the lowest region
/// index; no overlap at all leaves the box ungrounded.
pub fn ground_region(b: &BBox, regions: &[Region]) -> RegionAssignment {
    let mut best = RegionAssignment::UNGROUNDED;
    for r in regions {
        let overlap = iou(b, &r.bbox);
        if overlap <= 0.0 {
            continue;
        }
        let better = match best.region_index {
            None => true,
            Some(cur) => overlap > best.overlap_iou || (overlap == best.overlap_iou && r.index < cur),
        };
        if better {
            best = RegionAssignment {
                region_index: Some(r.index),
                overlap_iou: overlap,
            };
        }
    }
    best
}

/// Ground-truth region: the annotated index when present, otherwise the
/// region the ground-truth box grounds to.
pub fn ground_truth_region(example: &DocumentExample) -> RegionAssignment {
    match example.gt_region_index.and_then(|k| example.region(k)) {
        Some(r) => RegionAssignment {
            region_index: Some(r.index),
            overlap_iou: iou(&example.gt_bbox, &r.bbox),
        },
        None => ground_region(&example.gt_bbox, &example.regions),
    }
}

/// True when the normalized answer occurs inside one region's normalized
/// text. An empty answer never counts.
pub fn answer_in_regions(answer: &str, regions: &[Region]) -> bool {
    let needle = normalize_text(answer);
    !needle.is_empty() && regions.iter().any(|r| normalize_text(&r.text).contains(&needle))
}

/// `0.7 * anls + 0.3 * [answer found in a region]`.
pub fn answer_quality(anls: f64, answer_in_ocr: bool) -> f64 {
    0.7 * anls + 0.3 * f64::from(u8::from(answer_in_ocr))
}

/// `0.8 * iou + 0.2 * [same region]`.
pub fn bbox_quality(iou: f64, same_region: bool) -> f64 {
    0.8 * iou + 0.2 * f64::from(u8::from(same_region))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerScore {
    pub q_ans: f64,
    pub anls: f64,
    pub answer_in_ocr: bool,
}

pub fn score_answer(answer: &str, gts: &[String], regions: &[Region], cfg: &ValidatorConfig) -> Result<AnswerScore> {
    let anls = anls(answer, gts, cfg.anls_threshold)?;
    let answer_in_ocr = answer_in_regions(answer, regions);
    Ok(AnswerScore {
        q_ans: answer_quality(anls, answer_in_ocr),
        anls,
        answer_in_ocr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxScore {
    pub q_bbox: f64,
    pub iou: f64,
    pub delta: [i64; 4],
    pub pred_region: RegionAssignment,
    pub gt_region: RegionAssignment,
}

/// Scores `pred` against `gt`. The region bonus is paid only when both
/// boxes are grounded to the same region.
pub fn score_bbox(pred: &BBox, gt: &BBox, gt_region: RegionAssignment, regions: &[Region]) -> BoxScore {
    let overlap = iou(pred, gt);
    let pred_region = ground_region(pred, regions);
    let same_region = pred_region.region_index.is_some() && pred_region.region_index == gt_region.region_index;
    BoxScore {
        q_bbox: bbox_quality(overlap, same_region),
        iou: overlap,
        delta: pixel_error(pred, gt),
        pred_region,
        gt_region,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReasoningScore {
    pub q_reason: f64,
    pub s_struct: f64,
    pub s_coord: f64,
    pub s_spatial: f64,
}

/// Fraction of {>=1 step, >=2 steps, answer line, bbox line} present.
pub fn structure_score(trace: &CoTTrace) -> f64 {
    let present = [
        !trace.steps.is_empty(),
        trace.steps.len() >= 2,
        trace.final_answer.is_some(),
        trace.final_bbox.is_some(),
    ];
    present.iter().filter(|p| **p).count() as f64 / 4.0
}

fn max_abs_diff(a: &BBox, b: &BBox) -> i64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or(0)
}

/// Agreement between the coordinates written in the trace and the declared
/// box: full marks within `coord_tolerance` pixels, then a linear fall-off
/// reaching zero `coord_penalty_scale` pixels later.
pub fn coordinate_score(trace: &CoTTrace, declared: &BBox, cfg: &ValidatorConfig) -> f64 {
    let Some(final_bbox) = trace.final_bbox else {
        return 0.0;
    };
    let mut worst = max_abs_diff(&final_bbox, declared);
    if let Some(mention) = trace.last_coordinate() {
        worst = worst.max(max_abs_diff(mention, declared));
    }
    if worst <= cfg.coord_tolerance {
        1.0
    } else {
        (1.0 - (worst - cfg.coord_tolerance) as f64 / cfg.coord_penalty_scale as f64).max(0.0)
    }
}

/// Bands of the centre of `b` on `page`, `(vertical, horizontal)`.
pub fn box_bands(b: &BBox, page: PageGeometry, edges: [f64; 2]) -> (Band, Band) {
    let (cx, cy) = b.center();
    (
        Band::of_fraction(cy / f64::from(page.height), edges),
        Band::of_fraction(cx / f64::from(page.width), edges),
    )
}

/// Fraction of spatial phrases consistent with where `declared` sits on the
/// page; 1 when the trace makes no spatial claim.
pub fn spatial_score(trace: &CoTTrace, declared: &BBox, page: PageGeometry, cfg: &ValidatorConfig) -> f64 {
    let (v, h) = box_bands(declared, page, cfg.spatial_band_edges);
    let (mut total, mut hits) = (0usize, 0usize);
    for p in trace.spatial_phrases() {
        total += 1;
        let actual = match p.axis {
            Axis::Vertical => v,
            Axis::Horizontal => h,
        };
        hits += usize::from(p.band == actual);
    }
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

pub fn score_reasoning(trace: &CoTTrace, declared: &PredictionTuple, page: PageGeometry, cfg: &ValidatorConfig) -> ReasoningScore {
    let s_struct = structure_score(trace);
    let s_coord = coordinate_score(trace, &declared.bbox, cfg);
    let s_spatial = spatial_score(trace, &declared.bbox, page, cfg);
    ReasoningScore {
        q_reason: (s_struct + s_coord + s_spatial) / 3.0,
        s_struct,
        s_coord,
        s_spatial,
    }
}

/// Weighted sum of the three module scores.
pub fn overall_quality(q_ans: f64, q_bbox: f64, q_reason: f64, cfg: &ValidatorConfig) -> Result<f64> {
    for (name, value) in [("q_ans", q_ans), ("q_bbox", q_bbox), ("q_reason", q_reason)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { name, value });
        }
    }
    Ok(cfg.alpha_ans * q_ans + cfg.alpha_bbox * q_bbox + cfg.alpha_reason * q_reason)
}

/// Runs every scoring module on one prediction.
pub fn validate(example: &DocumentExample, prediction: &PredictionTuple, cfg: &ValidatorConfig) -> Result<QualityBreakdown> {
    if example.id != prediction.id {
        return Err(Error::IdMismatch {
            example: example.id.clone(),
            prediction: prediction.id.clone(),
        });
    }
    let ans = score_answer(&prediction.answer, &example.answers, &example.regions, cfg)?;
    let bbox = score_bbox(&prediction.bbox, &example.gt_bbox, ground_truth_region(example), &example.regions);
    let trace = parse_trace(&prediction.cot);
    let reason = score_reasoning(&trace, prediction, example.page, cfg);
    let q = overall_quality(ans.q_ans, bbox.q_bbox, reason.q_reason, cfg)?;

    Ok(QualityBreakdown {
        q_ans: ans.q_ans,
        q_bbox: bbox.q_bbox,
        q_reason: reason.q_reason,
        q,
        s_struct: reason.s_struct,
        s_coord: reason.s_coord,
        s_spatial: reason.s_spatial,
        anls: ans.anls,
        iou: bbox.iou,
        delta: bbox.delta,
        pred_region: bbox.pred_region,
        gt_region: bbox.gt_region,
        answer_in_ocr: ans.answer_in_ocr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: i64, y1: i64, x2: i64, y2: i64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn region(index: u32, bbox: BBox, text: &str) -> Region {
        Region {
            index,
            bbox,
            text: text.into(),
        }
    }

    fn page() -> PageGeometry {
        PageGeometry {
            width: 1000,
            height: 1000,
        }
    }

    fn pred(cot: &str, bbox: BBox) -> PredictionTuple {
        PredictionTuple {
            id: "x".into(),
            cot: cot.into(),
            answer: "$45.99".into(),
            bbox,
        }
    }

    #[test]
    fn grounds_to_overlapping_region() {
        let regions = vec![
            region(2, b(510, 800, 570, 830), "$45.99"),
            region(7, b(760, 650, 840, 680), "Subtotal"),
        ];
        let a = ground_region(&b(760, 650, 840, 680), &regions);
        assert_eq!(a.region_index, Some(7));
        assert_eq!(a.overlap_iou, 1.0);

        let a = ground_region(&b(0, 0, 10, 10), &regions);
        assert_eq!(a, RegionAssignment::UNGROUNDED);
        assert_eq!(ground_region(&b(0, 0, 10, 10), &[]), RegionAssignment::UNGROUNDED);
    }

    #[test]
    fn ground_region_ties_go_to_lowest_index() {
        // each strip: inter 40, union 100 + 40 - 40 = 100 -> 0.4
        let q = b(0, 0, 10, 10);
        let regions = vec![region(5, b(0, 0, 10, 4), "r5"), region(2, b(0, 6, 10, 10), "r2")];
        assert_eq!(iou(&q, &regions[0].bbox), 0.4);
        assert_eq!(iou(&q, &regions[1].bbox), 0.4);
        let a = ground_region(&q, &regions);
        assert_eq!(a.region_index, Some(2));
        assert_eq!(a.overlap_iou, 0.4);
    }

    #[test]
    fn answer_scores() {
        let cfg = ValidatorConfig::default();
        let regions = vec![region(2, b(510, 800, 570, 830), "$45.99")];
        let gts = vec!["$45.99".to_string()];
        let s = score_answer("$45.99", &gts, &regions, &cfg).unwrap();
        assert_eq!(s.q_ans, 1.0);
        let s = score_answer("hallucinated", &gts, &regions, &cfg).unwrap();
        assert_eq!((s.q_ans, s.anls, s.answer_in_ocr), (0.0, 0.0, false));
        assert!(score_answer("a", &[], &regions, &cfg).is_err());
        assert!(!answer_in_regions("   ", &regions));
    }

    #[test]
    fn answer_quality_with_partial_anls() {
        // 0.7 * 0.167 + 0.3 = 0.4169
        assert_eq!(format!("{:.3}", answer_quality(0.167, true)), "0.417");
        assert_eq!(answer_quality(0.0, false), 0.0);
        assert_eq!(answer_quality(1.0, true), 1.0);
    }

    #[test]
    fn bbox_scores() {
        let regions = vec![
            region(2, b(510, 800, 570, 830), "$45.99"),
            region(7, b(760, 650, 840, 680), "Subtotal"),
        ];
        let gt = b(510, 800, 570, 830);
        let gt_r = ground_region(&gt, &regions);
        assert_eq!(score_bbox(&gt, &gt, gt_r, &regions).q_bbox, 1.0);

        let s = score_bbox(&b(760, 650, 840, 680), &gt, gt_r, &regions);
        assert_eq!((s.q_bbox, s.iou), (0.0, 0.0));
        assert_eq!(s.pred_region.region_index, Some(7));

        // [0,0,20,10] vs gt [0,0,10,10] -> iou 100/200 = 0.5, region covers both
        let regions = vec![region(0, b(0, 0, 20, 10), "wide")];
        let gt = b(0, 0, 10, 10);
        let s = score_bbox(&b(0, 0, 20, 10), &gt, ground_region(&gt, &regions), &regions);
        assert_eq!(s.iou, 0.5);
        assert!((s.q_bbox - 0.6).abs() < 1e-12);
    }

    #[test]
    fn ungrounded_pairs_earn_no_region_bonus() {
        let gt = b(0, 0, 10, 10);
        let s = score_bbox(&gt, &gt, RegionAssignment::UNGROUNDED, &[]);
        assert_eq!(s.q_bbox, 0.8);
    }

    #[test]
    fn reasoning_fully_consistent() {
        let cfg = ValidatorConfig::default();
        let bx = b(510, 800, 570, 830);
        let cot = "Step 1: read the question\nStep 2: look in the lower section\nStep 3: TOTAL value at [510, 800, 570, 830]\nAnswer: $45.99\nBBox: [510, 800, 570, 830]";
        let p = pred(cot, bx);
        let s = score_reasoning(&parse_trace(cot), &p, page(), &cfg);
        assert_eq!((s.q_reason, s.s_struct, s.s_coord, s.s_spatial), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn reasoning_missing_bbox_line() {
        let cfg = ValidatorConfig::default();
        let cot = "Step 1: a\nStep 2: b\nAnswer: $45.99";
        let p = pred(cot, b(510, 800, 570, 830));
        let s = score_reasoning(&parse_trace(cot), &p, page(), &cfg);
        assert_eq!(s.s_struct, 0.75);
        assert_eq!(s.s_coord, 0.0);
    }

    #[test]
    fn reasoning_spatial_mismatch() {
        let cfg = ValidatorConfig::default();
        // centre y = 900 -> 90% of the page, "upper" is wrong
        let bx = b(100, 880, 200, 920);
        let cot = format!("Step 1: check the upper part\nStep 2: value found\nAnswer: $45.99\nBBox: {bx}");
        let s = score_reasoning(&parse_trace(&cot), &pred(&cot, bx), page(), &cfg);
        assert_eq!(s.s_spatial, 0.0);
        assert_eq!((s.s_struct, s.s_coord), (1.0, 1.0));
        assert!((s.q_reason - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coordinate_penalty_is_linear() {
        let cfg = ValidatorConfig::default();
        let declared = b(100, 100, 200, 200);
        let score_at = |shift: i64| {
            let cot = format!("Step 1: x\nStep 2: y\nAnswer: a\nBBox: [{}, 100, 200, 200]", 100 + shift);
            coordinate_score(&parse_trace(&cot), &declared, &cfg)
        };
        assert_eq!(score_at(5), 1.0);
        assert_eq!(score_at(30), 0.5);
        assert_eq!(score_at(55), 0.0);
        assert_eq!(score_at(99), 0.0);
        // an earlier mention does not count, only the last one
        let cot = "Step 1: [0, 0, 10, 10]\nStep 2: [100, 100, 200, 200]\nBBox: [100, 100, 200, 200]";
        assert_eq!(coordinate_score(&parse_trace(cot), &declared, &cfg), 1.0);
        let cot = "Step 1: [100, 100, 200, 200]\nStep 2: [0, 0, 10, 10]\nBBox: [100, 100, 200, 200]";
        assert_eq!(coordinate_score(&parse_trace(cot), &declared, &cfg), 0.0);
    }

    #[test]
    fn overall_examples() {
        let cfg = ValidatorConfig::default();
        let q = overall_quality(0.417, 0.0, 0.73, &cfg).unwrap();
        assert!((q - 0.3128).abs() < 1e-12);
        assert_eq!(format!("{q:.3}"), "0.313");
        assert_eq!(overall_quality(1.0, 1.0, 1.0, &cfg).unwrap(), 1.0);
        assert_eq!(overall_quality(0.0, 0.0, 0.0, &cfg).unwrap(), 0.0);
        assert!(matches!(
            overall_quality(1.2, 0.0, 0.0, &cfg),
            Err(Error::OutOfRange { name: "q_ans", .. })
        ));
    }

    #[test]
    fn validate_rejects_id_mismatch() {
        let ex = DocumentExample {
            id: "a".into(),
            page: page(),
            question: "q".into(),
            answers: vec!["x".into()],
            gt_bbox: b(0, 0, 10, 10),
            gt_region_index: None,
            regions: vec![],
        };
        let p = PredictionTuple {
            id: "b".into(),
            cot: String::new(),
            answer: "x".into(),
            bbox: b(0, 0, 10, 10),
        };
        assert!(matches!(validate(&ex, &p, &ValidatorConfig::default()), Err(Error::IdMismatch { .. })));
    }
}
