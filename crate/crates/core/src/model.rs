//! Shared domain types: page geometry, boxes, detected text regions, the
//! example and prediction records, score breakdowns and validator settings.
//!
//! Records enter through [`validate_example`] / [`validate_prediction`], which
//! check every invariant once so the scoring code can trust its inputs.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};

/// Axis-aligned pixel box, origin top-left, `x` to the right and `y` down.
///
/// Always satisfies `0 <= x1 <= x2` and `0 <= y1 <= y2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    x1: i64,
    y1: i64,
    x2: i64,
    y2: i64,
}

/// Why a coordinate quadruple is not a [`BBox`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BBoxDefect {
    Negative,
    Inverted,
}

impl BBoxDefect {
    pub fn as_str(self) -> &'static str {
        match self {
            BBoxDefect::Negative => "negative coordinate",
            BBoxDefect::Inverted => "x2 < x1 or y2 < y1",
        }
    }
}

impl fmt::Display for BBoxDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl BBox {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Result<Self, BBoxDefect> {
        if x1 < 0 || y1 < 0 || x2 < 0 || y2 < 0 {
            return Err(BBoxDefect::Negative);
        }
        if x2 < x1 || y2 < y1 {
            return Err(BBoxDefect::Inverted);
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn from_coords(c: [i64; 4]) -> Result<Self, BBoxDefect> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    /// Builds a box from arbitrary corners: reorders them and clamps to the
    /// non-negative quadrant.
    pub fn normalized(c: [i64; 4]) -> Self {
        let (x1, x2) = (c[0].min(c[2]).max(0), c[0].max(c[2]).max(0));
        let (y1, y2) = (c[1].min(c[3]).max(0), c[1].max(c[3]).max(0));
        BBox { x1, y1, x2, y2 }
    }

    pub fn x1(&self) -> i64 {
        self.x1
    }
    pub fn y1(&self) -> i64 {
        self.y1
    }
    pub fn x2(&self) -> i64 {
        self.x2
    }
    pub fn y2(&self) -> i64 {
        self.y2
    }

    pub fn coords(&self) -> [i64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> i64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> i64 {
        self.y2 - self.y1
    }

    /// Half-open pixel area `(x2 - x1) * (y2 - y1)`.
    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x1 + self.x2) as f64 / 2.0,
            (self.y1 + self.y2) as f64 / 2.0,
        )
    }

    pub fn fits_within(&self, page: PageGeometry) -> bool {
        self.x2 <= i64::from(page.width) && self.y2 <= i64::from(page.height)
    }

    /// Moves the box by `(dx, dy)` and clamps it inside `page`, keeping its
    /// size whenever the page is large enough.
    pub fn shifted_within(&self, dx: i64, dy: i64, page: PageGeometry) -> BBox {
        let (w, h) = (i64::from(page.width), i64::from(page.height));
        let x1 = (self.x1 + dx).clamp(0, (w - self.width()).max(0));
        let y1 = (self.y1 + dy).clamp(0, (h - self.height()).max(0));
        BBox {
            x1,
            y1,
            x2: (x1 + self.width()).min(w),
            y2: (y1 + self.height()).min(h),
        }
    }

    pub fn scaled(&self, factor: i64) -> BBox {
        BBox {
            x1: self.x1 * factor,
            y1: self.y1 * factor,
            x2: self.x2 * factor,
            y2: self.y2 * factor,
        }
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.x1 < other.x2 && other.x1 < self.x2 && self.y1 < other.y2 && other.y1 < self.y2
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(4))?;
        for c in self.coords() {
            seq.serialize_element(&c)?;
        }
        seq.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PageGeometry {
    pub width: u32,
    pub height: u32,
}

/// One detected text instance: box, OCR text and its index in the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Region {
    pub index: u32,
    pub bbox: BBox,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentExample {
    pub id: String,
    pub page: PageGeometry,
    pub question: String,
    pub answers: Vec<String>,
    pub gt_bbox: BBox,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_region_index: Option<u32>,
    pub regions: Vec<Region>,
}

impl DocumentExample {
    pub fn region(&self, index: u32) -> Option<&Region> {
        self.regions.iter().find(|r| r.index == index)
    }

    /// The primary ground-truth answer.
    pub fn primary_answer(&self) -> &str {
        &self.answers[0]
    }

    pub fn from_json_str(line: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(line).map_err(|source| Error::Json { line: 0, source })?;
        validate_example(&value)
    }
}

/// The `(CoT, answer, bbox)` output of a teacher or student.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictionTuple {
    pub id: String,
    pub cot: String,
    pub answer: String,
    pub bbox: BBox,
}

impl PredictionTuple {
    pub fn from_json_str(line: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(line).map_err(|source| Error::Json { line: 0, source })?;
        validate_prediction(&value)
    }
}

/// The region a box was assigned to, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionAssignment {
    /// `None` means ungrounded: the box overlaps no region.
    pub region_index: Option<u32>,
    pub overlap_iou: f64,
}

impl RegionAssignment {
    pub const UNGROUNDED: RegionAssignment = RegionAssignment {
        region_index: None,
        overlap_iou: 0.0,
    };

    pub fn is_grounded(&self) -> bool {
        self.region_index.is_some()
    }
}

/// Every component score computed for one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityBreakdown {
    pub q_ans: f64,
    pub q_bbox: f64,
    pub q_reason: f64,
    pub q: f64,
    pub s_struct: f64,
    pub s_coord: f64,
    pub s_spatial: f64,
    pub anls: f64,
    pub iou: f64,
    /// Ground truth minus prediction, `[dx1, dy1, dx2, dy2]`.
    pub delta: [i64; 4],
    pub pred_region: RegionAssignment,
    pub gt_region: RegionAssignment,
    pub answer_in_ocr: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceConfig {
    pub window: usize,
    pub eps_mean: f64,
    pub eps_max: f64,
    pub max_iterations: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            window: 3,
            eps_mean: 0.2,
            eps_max: 0.4,
            max_iterations: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatorConfig {
    pub q_min: f64,
    pub alpha_ans: f64,
    pub alpha_bbox: f64,
    pub alpha_reason: f64,
    pub anls_threshold: f64,
    /// Pixels of slack before the coordinate-consistency score drops.
    pub coord_tolerance: i64,
    /// Pixels past the tolerance at which the coordinate score reaches zero.
    pub coord_penalty_scale: i64,
    pub spatial_band_edges: [f64; 2],
    pub convergence: ConvergenceConfig,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        ValidatorConfig {
            q_min: 0.85,
            alpha_ans: 0.4,
            alpha_bbox: 0.4,
            alpha_reason: 0.2,
            anls_threshold: 0.5,
            coord_tolerance: 5,
            coord_penalty_scale: 50,
            spatial_band_edges: [1.0 / 3.0, 2.0 / 3.0],
            convergence: ConvergenceConfig::default(),
        }
    }
}

/// Keys accepted by [`ValidatorConfig::set`] and the flat config file.
pub const CONFIG_KEYS: &[&str] = &[
    "q_min",
    "alpha_ans",
    "alpha_bbox",
    "alpha_reason",
    "anls_threshold",
    "coord_tolerance",
    "coord_penalty_scale",
    "spatial_band_edges",
    "convergence.window",
    "convergence.eps_mean",
    "convergence.eps_max",
    "convergence.max_iterations",
];

impl ValidatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let sum = self.alpha_ans + self.alpha_bbox + self.alpha_reason;
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {sum}, expected 1"));
        }
        for (name, w) in [
            ("alpha_ans", self.alpha_ans),
            ("alpha_bbox", self.alpha_bbox),
            ("alpha_reason", self.alpha_reason),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return bad(format!("{name} = {w} outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.q_min) {
            return bad(format!("q_min = {} outside [0, 1]", self.q_min));
        }
        if !(0.0..=1.0).contains(&self.anls_threshold) {
            return bad(format!("anls_threshold = {} outside [0, 1]", self.anls_threshold));
        }
        if self.coord_tolerance < 0 || self.coord_penalty_scale <= 0 {
            return bad("coord_tolerance must be >= 0 and coord_penalty_scale > 0".into());
        }
        let [lo, hi] = self.spatial_band_edges;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad(format!("spatial_band_edges {lo},{hi} must satisfy 0 < lo < hi < 1"));
        }
        let c = &self.convergence;
        if c.window < 1 || c.max_iterations < 1 {
            return bad("convergence.window and convergence.max_iterations must be >= 1".into());
        }
        if !(c.eps_mean.is_finite() && c.eps_max.is_finite()) {
            return bad("convergence thresholds must be finite".into());
        }
        Ok(())
    }

    /// Sets one field by its dotted key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{v}`")))
        }
        match key {
            "q_min" => self.q_min = num(key, value)?,
            "alpha_ans" => self.alpha_ans = num(key, value)?,
            "alpha_bbox" => self.alpha_bbox = num(key, value)?,
            "alpha_reason" => self.alpha_reason = num(key, value)?,
            "anls_threshold" => self.anls_threshold = num(key, value)?,
            "coord_tolerance" => self.coord_tolerance = num(key, value)?,
            "coord_penalty_scale" => self.coord_penalty_scale = num(key, value)?,
            "spatial_band_edges" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::InvalidConfig(format!(
                        "{key}: expected two comma-separated reals, got `{value}`"
                    )));
                }
                self.spatial_band_edges = [num(key, parts[0])?, num(key, parts[1])?];
            }
            "convergence.window" => self.convergence.window = num(key, value)?,
            "convergence.eps_mean" => self.convergence.eps_mean = num(key, value)?,
            "convergence.eps_max" => self.convergence.eps_max = num(key, value)?,
            "convergence.max_iterations" => self.convergence.max_iterations = num(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value, got `{line}`", n + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn from_overrides(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_overrides(text)?;
        Ok(cfg)
    }
}

fn record_id(record: &Value) -> String {
    record
        .get("id")
        .and_then(Value::as_str)
        .unwrap_or("<unknown>")
        .to_string()
}

fn field<'a>(record: &'a Value, id: &str, name: &str) -> Result<&'a Value> {
    match record.get(name) {
        Some(Value::Null) | None => Err(Error::MissingField {
            id: id.to_string(),
            field: name.to_string(),
        }),
        Some(v) => Ok(v),
    }
}

fn invalid(id: &str, field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidField {
        id: id.to_string(),
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn as_str<'a>(v: &'a Value, id: &str, name: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| invalid(id, name, "expected a string"))
}

/// Integers only: `12.0` and `12.5` are both rejected.
fn as_int(v: &Value, id: &str, name: &str) -> Result<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .ok_or_else(|| invalid(id, name, format!("expected an integer, got {n}"))),
        _ => Err(invalid(id, name, "expected an integer")),
    }
}

fn as_bbox(v: &Value, id: &str, name: &str) -> Result<BBox> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| invalid(id, name, "expected [x1, y1, x2, y2]"))?;
    let mut coords = [0i64; 4];
    for (slot, item) in coords.iter_mut().zip(arr) {
        *slot = as_int(item, id, name)?;
    }
    BBox::from_coords(coords).map_err(|defect| Error::InvalidBBox {
        id: id.to_string(),
        field: name.to_string(),
        coords,
        reason: defect.as_str(),
    })
}

fn check_in_page(b: &BBox, page: PageGeometry, id: &str, name: &str) -> Result<()> {
    if b.fits_within(page) {
        Ok(())
    } else {
        Err(Error::OutOfPageBounds {
            id: id.to_string(),
            field: name.to_string(),
            coords: b.coords(),
            width: page.width,
            height: page.height,
        })
    }
}

/// Checks a parsed example record against every type invariant.
pub fn validate_example(record: &Value) -> Result<DocumentExample> {
    let id = record_id(record);
    let id_value = as_str(field(record, &id, "id")?, &id, "id")?.to_string();

    let page_v = field(record, &id, "page")?;
    let mut dims = [0u32; 2];
    for (slot, name) in dims.iter_mut().zip(["width", "height"]) {
        let path = format!("page.{name}");
        let v = field(page_v, &id, name).map_err(|_| Error::MissingField {
            id: id.clone(),
            field: path.clone(),
        })?;
        let n = as_int(v, &id, &path)?;
        if n <= 0 || n > i64::from(u32::MAX) {
            return Err(invalid(&id, &path, format!("must be a positive pixel count, got {n}")));
        }
        *slot = n as u32;
    }
    let page = PageGeometry {
        width: dims[0],
        height: dims[1],
    };

    let question = as_str(field(record, &id, "question")?, &id, "question")?.to_string();

    let answers_v = field(record, &id, "answers")?
        .as_array()
        .ok_or_else(|| invalid(&id, "answers", "expected an array of strings"))?;
    if answers_v.is_empty() {
        return Err(invalid(&id, "answers", "must not be empty"));
    }
    let answers = answers_v
        .iter()
        .map(|a| as_str(a, &id, "answers").map(str::to_string))
        .collect::<Result<Vec<_>>>()?;

    let gt_bbox = as_bbox(field(record, &id, "gt_bbox")?, &id, "gt_bbox")?;
    check_in_page(&gt_bbox, page, &id, "gt_bbox")?;

    let regions_v = field(record, &id, "regions")?
        .as_array()
        .ok_or_else(|| invalid(&id, "regions", "expected an array"))?;
    let mut regions = Vec::with_capacity(regions_v.len());
    let mut seen = HashSet::with_capacity(regions_v.len());
    for (i, r) in regions_v.iter().enumerate() {
        let idx_name = format!("regions[{i}].index");
        let index = as_int(field(r, &id, "index").map_err(|_| Error::MissingField {
            id: id.clone(),
            field: idx_name.clone(),
        })?, &id, &idx_name)?;
        let index = u32::try_from(index)
            .map_err(|_| invalid(&id, &idx_name, format!("must be a non-negative integer, got {index}")))?;
        if !seen.insert(index) {
            return Err(Error::DuplicateRegionIndex { id: id.clone(), index });
        }
        let bbox_name = format!("regions[{i}].bbox");
        let bbox = as_bbox(
            field(r, &id, "bbox").map_err(|_| Error::MissingField {
                id: id.clone(),
                field: bbox_name.clone(),
            })?,
            &id,
            &bbox_name,
        )?;
        check_in_page(&bbox, page, &id, &bbox_name)?;
        let text_name = format!("regions[{i}].text");
        let text = as_str(
            field(r, &id, "text").map_err(|_| Error::MissingField {
                id: id.clone(),
                field: text_name.clone(),
            })?,
            &id,
            &text_name,
        )?
        .to_string();
        regions.push(Region { index, bbox, text });
    }

    let gt_region_index = match record.get("gt_region_index") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let k = as_int(v, &id, "gt_region_index")?;
            let k = u32::try_from(k)
                .ok()
                .filter(|k| seen.contains(k))
                .ok_or_else(|| invalid(&id, "gt_region_index", format!("no region with index {k}")))?;
            Some(k)
        }
    };

    Ok(DocumentExample {
        id: id_value,
        page,
        question,
        answers,
        gt_bbox,
        gt_region_index,
        regions,
    })
}

/// Checks a parsed prediction record. The box need not lie on the page, only
/// be well formed.
pub fn validate_prediction(record: &Value) -> Result<PredictionTuple> {
    let id = record_id(record);
    Ok(PredictionTuple {
        id: as_str(field(record, &id, "id")?, &id, "id")?.to_string(),
        cot: as_str(field(record, &id, "cot")?, &id, "cot")?.to_string(),
        answer: as_str(field(record, &id, "answer")?, &id, "answer")?.to_string(),
        bbox: as_bbox(field(record, &id, "bbox")?, &id, "bbox")?,
    })
}

/// The three disjoint parts produced by [`split_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub refine: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles with a seeded permutation, then slices `floor(n * r1)` items for
/// training, `floor(n * r2)` for refinement and the remainder for testing.
pub fn split_dataset<T: Clone>(items: &[T], ratios: [f64; 3], seed: u64) -> Result<Split<T>> {
    if items.is_empty() {
        return Err(Error::EmptyInput("split_dataset needs at least one example"));
    }
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0 || *r > 1.0) {
        return Err(Error::BadRatios(format!("{ratios:?}: each ratio must lie in [0, 1]")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadRatios(format!("{ratios:?} sums to {sum}, expected 1")));
    }

    let n = items.len();
    // 1e-9 absorbs products such as 95000 * 0.1 landing a hair under an integer
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_train = floor(ratios[0]).min(n);
    let n_refine = floor(ratios[1]).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |range: &[usize]| range.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();

    Ok(Split {
        train: pick(&order[..n_train]),
        refine: pick(&order[n_train..n_train + n_refine]),
        test: pick(&order[n_train + n_refine..]),
    })
}
