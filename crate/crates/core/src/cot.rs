//! Chain-of-thought trace parsing.
//!
//! The trace format is line oriented:
//!
//! ```text
//! Step 1: scan the lower section of the receipt
//! Step 2: the TOTAL label sits left of [510, 800, 570, 830]
//! Answer: $45.99
//! BBox: [510, 800, 570, 830]
//! ```
//!
//! `Step <N>:` opens a step, `Answer:` and `BBox:` declare the final output,
//! and any other line continues the current step (or the preamble before the
//! first step). Parsing never fails; missing pieces are simply absent.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;

use crate::model::BBox;

static STEP_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\s*step\s+(\d+)\s*:(.*)$").unwrap());
static ANSWER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\s*answer\s*:(.*)$").unwrap());
static BBOX_LINE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*bbox\s*:\s*\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]").unwrap()
});
static COORD_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Vertical,
    Horizontal,
}

/// Position along an axis: upper/middle/lower or left/center/right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    First,
    Middle,
    Last,
}

impl Band {
    /// The word used for this band on `axis`.
    pub fn word(self, axis: Axis) -> &'static str {
        match (axis, self) {
            (Axis::Vertical, Band::First) => "upper",
            (Axis::Vertical, Band::Middle) => "middle",
            (Axis::Vertical, Band::Last) => "lower",
            (Axis::Horizontal, Band::First) => "left",
            (Axis::Horizontal, Band::Middle) => "center",
            (Axis::Horizontal, Band::Last) => "right",
        }
    }

    /// Band of a relative position `frac` in `[0, 1]` given two band edges.
    pub fn of_fraction(frac: f64, edges: [f64; 2]) -> Band {
        if frac < edges[0] {
            Band::First
        } else if frac < edges[1] {
            Band::Middle
        } else {
            Band::Last
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialPhrase {
    pub axis: Axis,
    pub band: Band,
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReasoningStep {
    /// Ordinal as written; gaps are preserved.
    pub ordinal: u32,
    pub text: String,
    pub coordinates: Vec<BBox>,
    pub spatial_phrases: Vec<SpatialPhrase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoTTrace {
    pub preamble: String,
    pub steps: Vec<ReasoningStep>,
    pub final_answer: Option<String>,
    pub final_bbox: Option<BBox>,
    pub raw: String,
}

impl CoTTrace {
    /// The last coordinate mention across all steps.
    pub fn last_coordinate(&self) -> Option<&BBox> {
        self.steps.iter().rev().find_map(|s| s.coordinates.last())
    }

    pub fn spatial_phrases(&self) -> impl Iterator<Item = &SpatialPhrase> {
        self.steps.iter().flat_map(|s| s.spatial_phrases.iter())
    }

    /// Renders the trace back into the canonical line format.
    pub fn to_canonical(&self) -> String {
        let steps: Vec<(u32, &str)> = self.steps.iter().map(|s| (s.ordinal, s.text.as_str())).collect();
        render_trace(&self.preamble, &steps, self.final_answer.as_deref(), self.final_bbox.as_ref())
    }
}

/// Writes a trace in the canonical line format.
pub fn render_trace(preamble: &str, steps: &[(u32, &str)], answer: Option<&str>, bbox: Option<&BBox>) -> String {
    let mut out = String::new();
    if !preamble.is_empty() {
        out.push_str(preamble);
        out.push('\n');
    }
    for (ordinal, text) in steps {
        let _ = writeln!(out, "Step {ordinal}: {text}");
    }
    if let Some(a) = answer {
        let _ = writeln!(out, "Answer: {a}");
    }
    if let Some(b) = bbox {
        let _ = writeln!(out, "BBox: {b}");
    }
    if out.ends_with('\n') {
        out.pop();
    }
    out
}

fn parse_quad(caps: &regex::Captures<'_>) -> Option<BBox> {
    let mut c = [0i64; 4];
    for (i, slot) in c.iter_mut().enumerate() {
        *slot = caps[i + 1].parse().ok()?;
    }
    BBox::from_coords(c).ok()
}

/// Every well-formed `[x1, y1, x2, y2]` group in `text`. Groups with inverted
/// corners are not boxes and are skipped.
pub fn coordinate_mentions(text: &str) -> Vec<BBox> {
    COORD_RE.captures_iter(text).filter_map(|c| parse_quad(&c)).collect()
}

pub fn parse_trace(raw: &str) -> CoTTrace {
    struct Open {
        ordinal: u32,
        lines: Vec<String>,
    }

    let mut preamble: Vec<&str> = Vec::new();
    let mut open: Vec<Open> = Vec::new();
    let mut final_answer = None;
    let mut final_bbox = None;

    for line in raw.lines() {
        if let Some(c) = STEP_RE.captures(line) {
            if let Ok(ordinal) = c[1].parse::<u32>() {
                open.push(Open {
                    ordinal,
                    lines: vec![c[2].trim().to_string()],
                });
                continue;
            }
        }
        if let Some(c) = BBOX_LINE_RE.captures(line) {
            final_bbox = parse_quad(&c);
            continue;
        }
        if let Some(c) = ANSWER_RE.captures(line) {
            let a = c[1].trim();
            final_answer = (!a.is_empty()).then(|| a.to_string());
            continue;
        }
        match open.last_mut() {
            Some(step) => step.lines.push(line.to_string()),
            None => preamble.push(line),
        }
    }

    let steps = open
        .into_iter()
        .map(|o| {
            let text = o.lines.join("\n");
            ReasoningStep {
                ordinal: o.ordinal,
                coordinates: coordinate_mentions(&text),
                spatial_phrases: extract_spatial_phrases(&text),
                text,
            }
        })
        .collect();

    CoTTrace {
        preamble: preamble.join("\n"),
        steps,
        final_answer,
        final_bbox,
        raw: raw.to_string(),
    }
}

fn fixed_band(word: &str) -> Option<(Axis, Band)> {
    Some(match word {
        "top" | "upper" => (Axis::Vertical, Band::First),
        "bottom" | "lower" => (Axis::Vertical, Band::Last),
        "left" => (Axis::Horizontal, Band::First),
        "right" => (Axis::Horizontal, Band::Last),
        _ => return None,
    })
}

fn is_centre_word(word: &str) -> bool {
    matches!(word, "middle" | "center" | "centre" | "centered" | "centred")
}

/// Axis implied by a word sitting next to "middle"/"center".
fn context_axis(word: &str) -> Option<Axis> {
    match word {
        // "middle left": the middle qualifies the other axis
        "left" | "right" | "vertically" | "vertical" | "row" | "line" => Some(Axis::Vertical),
        "top" | "upper" | "bottom" | "lower" | "horizontally" | "horizontal" | "column" => Some(Axis::Horizontal),
        _ => None,
    }
}

/// Scans `text` for positional keywords.
///
/// top/upper and bottom/lower set the vertical band, left/right the
/// horizontal one. "middle" and "center" take their axis from an adjacent
/// word ("middle left" is vertical, "top center" horizontal); alone they
/// yield the middle band on both axes.
pub fn extract_spatial_phrases(text: &str) -> Vec<SpatialPhrase> {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();

    let mut out = Vec::new();
    for (i, &w) in words.iter().enumerate() {
        if let Some((axis, band)) = fixed_band(w) {
            out.push(SpatialPhrase {
                axis,
                band,
                source_text: w.to_string(),
            });
        } else if is_centre_word(w) {
            let prev = i.checked_sub(1).map(|j| words[j]);
            let next = words.get(i + 1).copied();
            let axes: Vec<Axis> = match (prev.and_then(context_axis), next.and_then(context_axis)) {
                (Some(a), _) | (None, Some(a)) => vec![a],
                (None, None) => vec![Axis::Vertical, Axis::Horizontal],
            };
            for axis in axes {
                out.push(SpatialPhrase {
                    axis,
                    band: Band::Middle,
                    source_text: w.to_string(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bands(text: &str) -> Vec<(Axis, Band)> {
        extract_spatial_phrases(text).into_iter().map(|p| (p.axis, p.band)).collect()
    }

    #[test]
    fn parses_canonical_trace() {
        let t = parse_trace("Step 1: scan lower section\nStep 2: found TOTAL\nAnswer: $45.99\nBBox: [510, 800, 570, 830]");
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.final_answer.as_deref(), Some("$45.99"));
        assert_eq!(t.final_bbox.unwrap().coords(), [510, 800, 570, 830]);
        assert_eq!(t.steps[0].text, "scan lower section");
        assert_eq!(t.steps[0].spatial_phrases.len(), 1);
    }

    #[test]
    fn empty_trace() {
        let t = parse_trace("");
        assert!(t.steps.is_empty());
        assert!(t.final_answer.is_none());
        assert!(t.final_bbox.is_none());
    }

    #[test]
    fn step_with_coordinate_and_phrases() {
        let t = parse_trace("Step 1: region at [100, 200, 300, 400] in the upper left");
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].coordinates, vec![BBox::new(100, 200, 300, 400).unwrap()]);
        assert_eq!(
            bands(&t.steps[0].text),
            vec![(Axis::Vertical, Band::First), (Axis::Horizontal, Band::First)]
        );
    }

    #[test]
    fn grammar_is_lenient() {
        let raw = "Looking at the page.\n  step 3 :  first\ncontinued [1,2,3,4]\nSTEP 7: last\nanswer:   x y  \nbbox:[0,0 , 5,5]";
        let t = parse_trace(raw);
        assert_eq!(t.preamble, "Looking at the page.");
        assert_eq!(t.steps.iter().map(|s| s.ordinal).collect::<Vec<_>>(), vec![3, 7]);
        assert_eq!(t.steps[0].text, "first\ncontinued [1,2,3,4]");
        assert_eq!(t.steps[0].coordinates.len(), 1);
        assert_eq!(t.final_answer.as_deref(), Some("x y"));
        assert_eq!(t.final_bbox.unwrap().coords(), [0, 0, 5, 5]);
    }

    #[test]
    fn inverted_boxes_are_not_mentions() {
        let t = parse_trace("Step 1: bad [30, 0, 10, 5]\nBBox: [30, 0, 10, 5]");
        assert!(t.steps[0].coordinates.is_empty());
        assert!(t.final_bbox.is_none());
    }

    #[test]
    fn spatial_keyword_table() {
        assert_eq!(bands("lower section"), vec![(Axis::Vertical, Band::Last)]);
        assert!(bands("no spatial words here").is_empty());
        assert_eq!(
            bands("upper right corner"),
            vec![(Axis::Vertical, Band::First), (Axis::Horizontal, Band::Last)]
        );
        assert_eq!(
            bands("in the middle"),
            vec![(Axis::Vertical, Band::Middle), (Axis::Horizontal, Band::Middle)]
        );
        assert_eq!(
            bands("middle left"),
            vec![(Axis::Vertical, Band::Middle), (Axis::Horizontal, Band::First)]
        );
        assert_eq!(
            bands("Top-Center"),
            vec![(Axis::Vertical, Band::First), (Axis::Horizontal, Band::Middle)]
        );
        // substrings do not count
        assert!(bands("stop, leftover, brightness").is_empty());
    }

    #[test]
    fn canonical_rendering_round_trips() {
        let raw = "Step 1: a\nStep 4: b [1, 2, 3, 4]\nAnswer: x\nBBox: [1, 2, 3, 4]";
        let t = parse_trace(raw);
        assert_eq!(t.to_canonical(), raw);
    }

    #[test]
    fn band_edges() {
        let e = [1.0 / 3.0, 2.0 / 3.0];
        assert_eq!(Band::of_fraction(0.0, e), Band::First);
        assert_eq!(Band::of_fraction(1.0 / 3.0, e), Band::Middle);
        assert_eq!(Band::of_fraction(0.665, e), Band::Middle);
        assert_eq!(Band::of_fraction(0.815, e), Band::Last);
    }
}
