use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::workers::Workers;
use crate::error::{Error, Result};
use crate::feedback::{build_report, FeedbackReport};
use crate::metrics::{dataset_anls, map_over_iou, MatchedPair};
use crate::model::{DocumentExample, PredictionTuple, QualityBreakdown, ValidatorConfig};
use crate::validators::validate;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RejectionReasons {
    pub answer: usize,
    pub bbox: usize,
    pub reasoning: usize,
}

impl RejectionReasons {
    /// Attributes a rejection to its lowest-scoring module; ties go to the
    /// earlier of answer, bbox, reasoning.
    fn record(&mut self, b: &QualityBreakdown) {
        if b.q_ans <= b.q_bbox && b.q_ans <= b.q_reason {
            self.answer += 1;
        } else if b.q_bbox <= b.q_reason {
            self.bbox += 1;
        } else {
            self.reasoning += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FilterStats {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// `accepted / total`, 0 for an empty stream.
    pub retention: f64,
    pub reasons: RejectionReasons,
}

/// A record that passed the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Accepted {
    pub example: DocumentExample,
    pub prediction: PredictionTuple,
    pub breakdown: QualityBreakdown,
}

impl Serialize for Accepted {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record<'a> {
            example: &'a DocumentExample,
            prediction: &'a PredictionTuple,
            q: f64,
        }
        Record {
            example: &self.example,
            prediction: &self.prediction,
            q: self.breakdown.q,
        }
        .serialize(serializer)
    }
}

/// Walks the prediction stream and finds each prediction's example further
/// along the example stream. Both streams must share one order; examples
/// with no prediction are skipped.
struct Pairing<E, P> {
    examples: E,
    predictions: P,
    seen_examples: HashSet<String>,
    seen_predictions: HashSet<String>,
}

impl<E, P> Iterator for Pairing<E, P>
where
    E: Iterator<Item = Result<DocumentExample>>,
    P: Iterator<Item = Result<PredictionTuple>>,
{
    type Item = Result<(DocumentExample, PredictionTuple)>;

    fn next(&mut self) -> Option<Self::Item> {
        let prediction = match self.predictions.next()? {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        if !self.seen_predictions.insert(prediction.id.clone()) {
            return Some(Err(Error::DuplicateId { id: prediction.id }));
        }
        loop {
            let example = match self.examples.next() {
                None => return Some(Err(Error::OrphanPrediction { id: prediction.id })),
                Some(Err(e)) => return Some(Err(e)),
                Some(Ok(ex)) => ex,
            };
            if !self.seen_examples.insert(example.id.clone()) {
                return Some(Err(Error::DuplicateId { id: example.id }));
            }
            if example.id == prediction.id {
                return Some(Ok((example, prediction)));
            }
        }
    }
}

/// Filter mode: validates each pair and hands accepted records to `emit` in
/// input order. At most one chunk of pairs is held in memory.
pub fn filter_stream<E, P, F>(examples: E, predictions: P, cfg: &ValidatorConfig, jobs: usize, mut emit: F) -> Result<FilterStats>
where
    E: IntoIterator<Item = Result<DocumentExample>>,
    P: IntoIterator<Item = Result<PredictionTuple>>,
    F: FnMut(Accepted) -> Result<()>,
{
    let workers = Workers::new(jobs);
    let chunk_len = workers.chunk_len();
    let mut pairs = Pairing {
        examples: examples.into_iter(),
        predictions: predictions.into_iter(),
        seen_examples: HashSet::new(),
        seen_predictions: HashSet::new(),
    };
    let mut stats = FilterStats::default();
    let mut chunk = Vec::with_capacity(chunk_len);

    loop {
        chunk.clear();
        for pair in pairs.by_ref().take(chunk_len) {
            chunk.push(pair?);
        }
        if chunk.is_empty() {
            break;
        }
        let scored = workers.map(&chunk, |(ex, p)| validate(ex, p, cfg));
        for ((example, prediction), breakdown) in chunk.drain(..).zip(scored) {
            let breakdown = breakdown?;
            stats.total += 1;
            if breakdown.q > cfg.q_min {
                stats.accepted += 1;
                emit(Accepted {
                    example,
                    prediction,
                    breakdown,
                })?;
            } else {
                stats.rejected += 1;
                stats.reasons.record(&breakdown);
            }
        }
    }

    stats.retention = if stats.total == 0 {
        0.0
    } else {
        stats.accepted as f64 / stats.total as f64
    };
    Ok(stats)
}

/// Corpus-level metrics over one batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub count: usize,
    /// mAP over IoU 0.50:0.95, in `[0, 1]`.
    pub map: f64,
    pub iou_50: f64,
    pub iou_75: f64,
    pub anls: f64,
    pub mean_q: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub reports: Vec<FeedbackReport>,
    pub summary: BatchSummary,
}

fn index_examples(examples: &[DocumentExample]) -> Result<HashMap<&str, &DocumentExample>> {
    let mut by_id = HashMap::with_capacity(examples.len());
    for ex in examples {
        if by_id.insert(ex.id.as_str(), ex).is_some() {
            return Err(Error::DuplicateId { id: ex.id.clone() });
        }
    }
    Ok(by_id)
}

fn match_predictions<'a>(
    examples: &'a [DocumentExample],
    predictions: &'a [PredictionTuple],
) -> Result<Vec<(&'a DocumentExample, &'a PredictionTuple)>> {
    let by_id = index_examples(examples)?;
    let mut seen = HashSet::with_capacity(predictions.len());
    predictions
        .iter()
        .map(|p| {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId { id: p.id.clone() });
            }
            by_id
                .get(p.id.as_str())
                .map(|ex| (*ex, p))
                .ok_or_else(|| Error::OrphanPrediction { id: p.id.clone() })
        })
        .collect()
}

/// Validates every prediction against its example, in prediction order.
pub fn score_batch(
    examples: &[DocumentExample],
    predictions: &[PredictionTuple],
    cfg: &ValidatorConfig,
    jobs: usize,
) -> Result<Vec<QualityBreakdown>> {
    let pairs = match_predictions(examples, predictions)?;
    Workers::new(jobs)
        .map(&pairs, |(ex, p)| validate(ex, p, cfg))
        .into_iter()
        .collect()
}

pub fn summarize(breakdowns: &[QualityBreakdown]) -> Result<BatchSummary> {
    let pairs: Vec<MatchedPair> = breakdowns
        .iter()
        .map(|b| MatchedPair {
            iou: b.iou,
            anls: b.anls,
        })
        .collect();
    let map = map_over_iou(&pairs)?;
    Ok(BatchSummary {
        count: breakdowns.len(),
        map: map.map,
        iou_50: map.iou_50,
        iou_75: map.iou_75,
        anls: dataset_anls(&pairs)?,
        mean_q: breakdowns.iter().map(|b| b.q).sum::<f64>() / breakdowns.len() as f64,
    })
}

/// Scores a batch without building reports.
pub fn evaluate(
    examples: &[DocumentExample],
    predictions: &[PredictionTuple],
    cfg: &ValidatorConfig,
    jobs: usize,
) -> Result<BatchSummary> {
    summarize(&score_batch(examples, predictions, cfg, jobs)?)
}

/// Verifier mode: one detailed report per prediction plus corpus metrics.
pub fn verify_batch(
    examples: &[DocumentExample],
    predictions: &[PredictionTuple],
    cfg: &ValidatorConfig,
    jobs: usize,
) -> Result<VerifyOutcome> {
    let pairs = match_predictions(examples, predictions)?;
    let outcomes = Workers::new(jobs).map(&pairs, |(ex, p)| {
        validate(ex, p, cfg).map(|b| {
            let report = build_report(ex, p, &b, cfg);
            (b, report)
        })
    });
    let mut breakdowns = Vec::with_capacity(outcomes.len());
    let mut reports = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let (b, r) = outcome?;
        breakdowns.push(b);
        reports.push(r);
    }
    Ok(VerifyOutcome {
        summary: summarize(&breakdowns)?,
        reports,
    })
}
