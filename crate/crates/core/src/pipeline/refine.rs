use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::batch::{verify_batch, BatchSummary, VerifyOutcome};
use super::convergence::convergence_check;
use crate::cot::render_trace;
use crate::error::{Error, Result};
use crate::feedback::{position_phrase, FeedbackReport};
use crate::model::{BBox, DocumentExample, PageGeometry, PredictionTuple, ValidatorConfig};
use crate::validators::box_bands;

/// What a student gets to see: never the detected regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudentQuery<'a> {
    pub id: &'a str,
    pub page: PageGeometry,
    pub question: &'a str,
}

impl<'a> From<&'a DocumentExample> for StudentQuery<'a> {
    fn from(ex: &'a DocumentExample) -> Self {
        StudentQuery {
            id: &ex.id,
            page: ex.page,
            question: &ex.question,
        }
    }
}

/// The model being refined. `predict` must be deterministic for a given
/// adapter state.
pub trait StudentAdapter {
    fn predict(&self, query: &StudentQuery<'_>) -> Result<PredictionTuple>;

    /// Learns from one round of verifier reports.
    fn update(&mut self, reports: &[FeedbackReport]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// mAP in percentage points.
    pub map: f64,
    pub mean_anls: f64,
    pub mean_q: f64,
}

impl IterationRecord {
    fn new(k: usize, s: &BatchSummary) -> Self {
        IterationRecord {
            k,
            map: 100.0 * s.map,
            mean_anls: s.anls,
            mean_q: s.mean_q,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RefinementHistory {
    /// Scores of the student before any update. Not part of the
    /// convergence window.
    pub initial: Option<IterationRecord>,
    pub iterations: Vec<IterationRecord>,
    pub converged_at: Option<usize>,
}

impl RefinementHistory {
    pub fn maps(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.map).collect()
    }

    pub fn final_map(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.map)
    }
}

/// A failed loop, with everything recorded up to the failure.
#[derive(Debug)]
pub struct RefinementError {
    pub history: RefinementHistory,
    pub source: Error,
}

impl fmt::Display for RefinementError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "refinement stopped after {} iterations: {}",
            self.history.iterations.len(),
            self.source
        )
    }
}

impl std::error::Error for RefinementError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn predict_all<S: StudentAdapter + ?Sized>(student: &S, set: &[DocumentExample]) -> Result<Vec<PredictionTuple>> {
    set.iter().map(|ex| student.predict(&StudentQuery::from(ex))).collect()
}

/// Iterates predict → verify → update over `refine_set`.
///
/// Iteration `k` updates the student on the reports for its current
/// predictions, then predicts again and records that mAP as `mAP_k`. The
/// loop ends when the mAP history converges or after
/// `convergence.max_iterations` rounds.
#[allow(clippy::result_large_err)] // the error carries the partial history
pub fn run_refinement_loop<S: StudentAdapter + ?Sized>(
    student: &mut S,
    refine_set: &[DocumentExample],
    cfg: &ValidatorConfig,
    jobs: usize,
) -> Result<RefinementHistory, RefinementError> {
    let mut history = RefinementHistory::default();
    if refine_set.is_empty() {
        return Err(RefinementError {
            history,
            source: Error::EmptyInput("refinement set is empty"),
        });
    }

    let round = |student: &S| -> Result<VerifyOutcome> {
        let predictions = predict_all(student, refine_set)?;
        verify_batch(refine_set, &predictions, cfg, jobs)
    };

    let mut current = match round(student) {
        Ok(o) => o,
        Err(source) => return Err(RefinementError { history, source }),
    };
    history.initial = Some(IterationRecord::new(0, &current.summary));

    for k in 1..=cfg.convergence.max_iterations {
        let step = student.update(&current.reports).and_then(|()| round(student));
        current = match step {
            Ok(o) => o,
            Err(source) => return Err(RefinementError { history, source }),
        };
        history.iterations.push(IterationRecord::new(k, &current.summary));
        if convergence_check(&history.maps(), &cfg.convergence).converged {
            history.converged_at = Some(k);
            break;
        }
    }
    Ok(history)
}

/// What the synthetic student currently believes about one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentBelief {
    pub page: PageGeometry,
    pub answer: String,
    pub bbox: BBox,
}

/// A desk-scale stand-in for a fine-tuned model.
///
/// It applies a fraction `rho` of each reported pixel error, plus seeded
/// uniform noise of up to `noise` pixels per coordinate, and adopts the
/// suggested answer with probability `rho` whenever the top fix concerns the
/// answer.
#[derive(Debug, Clone)]
pub struct SyntheticStudent {
    rng: ChaCha8Rng,
    rho: f64,
    noise: i64,
    beliefs: HashMap<String, StudentBelief>,
}

/// Largest initial box displacement, in pixels, of [`synthetic_student`].
pub const INITIAL_OFFSET: i64 = 80;

/// Builds a student whose initial guesses are the ground truth of
/// `curriculum` displaced by a seeded offset, with every other answer taken
/// from a decoy region.
pub fn synthetic_student(seed: u64, rho: f64, noise: i64, curriculum: &[DocumentExample]) -> Result<SyntheticStudent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beliefs = Vec::with_capacity(curriculum.len());
    for ex in curriculum {
        let dx = rng.gen_range(-INITIAL_OFFSET..=INITIAL_OFFSET);
        let dy = rng.gen_range(-INITIAL_OFFSET..=INITIAL_OFFSET);
        let decoys: Vec<&str> = ex
            .regions
            .iter()
            .filter(|r| Some(r.index) != ex.gt_region_index && r.bbox != ex.gt_bbox)
            .map(|r| r.text.as_str())
            .collect();
        let use_decoy = rng.gen_bool(0.5) && !decoys.is_empty();
        let answer = if use_decoy {
            decoys[rng.gen_range(0..decoys.len())].to_string()
        } else {
            ex.primary_answer().to_string()
        };
        beliefs.push((
            ex.id.clone(),
            StudentBelief {
                page: ex.page,
                answer,
                bbox: ex.gt_bbox.shifted_within(dx, dy, ex.page),
            },
        ));
    }
    SyntheticStudent::with_beliefs(seed, rho, noise, beliefs)
}

impl SyntheticStudent {
    pub fn with_beliefs(
        seed: u64,
        rho: f64,
        noise: i64,
        beliefs: impl IntoIterator<Item = (String, StudentBelief)>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidConfig(format!("rho = {rho} outside [0, 1]")));
        }
        if noise < 0 {
            return Err(Error::InvalidConfig(format!("noise = {noise} must be >= 0")));
        }
        Ok(SyntheticStudent {
            // separate stream from the one that drew the initial beliefs
            rng: {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                rng
            },
            rho,
            noise,
            beliefs: beliefs.into_iter().collect(),
        })
    }

    pub fn belief(&self, id: &str) -> Option<&StudentBelief> {
        self.beliefs.get(id)
    }
}

fn clamp_to_page(c: [i64; 4], page: PageGeometry) -> BBox {
    let (w, h) = (i64::from(page.width), i64::from(page.height));
    BBox::normalized([c[0].clamp(0, w), c[1].clamp(0, h), c[2].clamp(0, w), c[3].clamp(0, h)])
}

impl StudentAdapter for SyntheticStudent {
    fn predict(&self, query: &StudentQuery<'_>) -> Result<PredictionTuple> {
        let belief = self
            .beliefs
            .get(query.id)
            .ok_or_else(|| Error::Adapter(format!("no belief for example {}", query.id)))?;
        let (v, h) = box_bands(&belief.bbox, belief.page, ValidatorConfig::default().spatial_band_edges);
        let located = format!(
            "The answer sits in the {} of the page at {}.",
            position_phrase(v, h),
            belief.bbox
        );
        Ok(PredictionTuple {
            id: query.id.to_string(),
            cot: render_trace(
                "",
                &[(1, "Read the question and identify the requested field."), (2, &located)],
                Some(&belief.answer),
                Some(&belief.bbox),
            ),
            answer: belief.answer.clone(),
            bbox: belief.bbox,
        })
    }

    fn update(&mut self, reports: &[FeedbackReport]) -> Result<()> {
        for report in reports {
            let belief = self
                .beliefs
                .get_mut(&report.id)
                .ok_or_else(|| Error::Adapter(format!("report for unknown example {}", report.id)))?;
            let old = belief.bbox.coords();
            let mut moved = [0i64; 4];
            for i in 0..4 {
                let step = (self.rho * report.breakdown.delta[i] as f64).round() as i64;
                let jitter = self.rng.gen_range(-self.noise..=self.noise);
                moved[i] = old[i] + step + jitter;
            }
            belief.bbox = clamp_to_page(moved, belief.page);

            let draw: f64 = self.rng.gen();
            let answer_first = report.fixes.first().is_some_and(|f| f.kind.is_answer());
            if answer_first && draw < self.rho {
                belief.answer = report.suggested_answer.clone();
            }
        }
        Ok(())
    }
}
