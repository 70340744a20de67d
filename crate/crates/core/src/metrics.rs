//! Answer similarity (ANLS), box geometry (IoU, pixel error) and corpus
//! aggregates (mAP over IoU thresholds, mean ANLS).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BBox;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub const IOU_THRESHOLDS: [f64; 10] = {
    let mut t = [0.0; 10];
    let mut i = 0;
    while i < 10 {
        t[i] = (50 + 5 * i) as f64 / 100.0;
        i += 1;
    }
    t
};

/// Lowercases, trims and collapses internal whitespace runs to one space.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized Levenshtein similarity, zeroed below `tau`.
pub fn normalized_levenshtein(a: &str, b: &str, tau: f64) -> f64 {
    let a: Vec<char> = normalize_text(a).chars().collect();
    let b: Vec<char> = normalize_text(b).chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let nls = 1.0 - edit_distance(&a, &b) as f64 / longest as f64;
    if nls >= tau {
        nls
    } else {
        0.0
    }
}

/// Best thresholded similarity of `pred` against any ground-truth variant.
pub fn anls(pred: &str, gts: &[String], tau: f64) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(gts
        .iter()
        .map(|g| normalized_levenshtein(pred, g, tau))
        .fold(0.0, f64::max))
}

pub fn intersection_area(a: &BBox, b: &BBox) -> i64 {
    let w = (a.x2().min(b.x2()) - a.x1().max(b.x1())).max(0);
    let h = (a.y2().min(b.y2()) - a.y1().max(b.y1())).max(0);
    w * h
}

/// Intersection over union with half-open areas. Zero-area boxes score 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Ground truth minus prediction, corner by corner. Positive x means the
/// target lies to the right, positive y means below.
pub fn pixel_error(pred: &BBox, gt: &BBox) -> [i64; 4] {
    let (p, g) = (pred.coords(), gt.coords());
    [g[0] - p[0], g[1] - p[1], g[2] - p[2], g[3] - p[3]]
}

/// Per-example values feeding the corpus aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub iou: f64,
    pub anls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummary {
    /// Mean accuracy over [`IOU_THRESHOLDS`], in `[0, 1]`.
    pub map: f64,
    pub iou_50: f64,
    pub iou_75: f64,
    pub per_threshold: Vec<(f64, f64)>,
}

/// With one box per question, AP at a threshold is the fraction of
/// predictions whose IoU reaches it.
pub fn map_over_iou(pairs: &[MatchedPair]) -> Result<MapSummary> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("map_over_iou needs at least one pair"));
    }
    let n = pairs.len() as f64;
    let per_threshold: Vec<(f64, f64)> = IOU_THRESHOLDS
        .iter()
        .map(|&t| {
            let hits = pairs.iter().filter(|p| p.iou >= t).count();
            (t, hits as f64 / n)
        })
        .collect();
    let map = per_threshold.iter().map(|(_, acc)| acc).sum::<f64>() / IOU_THRESHOLDS.len() as f64;
    Ok(MapSummary {
        map,
        iou_50: per_threshold[0].1,
        iou_75: per_threshold[5].1,
        per_threshold,
    })
}

pub fn dataset_anls(pairs: &[MatchedPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("dataset_anls needs at least one pair"));
    }
    Ok(pairs.iter().map(|p| p.anls).sum::<f64>() / pairs.len() as f64)
}
