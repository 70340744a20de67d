//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use docval::feedback::{build_report, decide, render_bbox_directive, Decision, FixKind};
use docval::metrics::{edit_distance, iou, map_over_iou, pixel_error, MatchedPair};
use docval::model::{split_dataset, ConvergenceConfig, RegionAssignment};
use docval::pipeline::fixtures::{corrupt_answer, receipt_case};
use docval::pipeline::{
    convergence_check, filter_stream, generate_fixtures, run_refinement_loop, synthetic_student,
};
use docval::validators::{overall_quality, validate};
use docval::{BBox, PredictionTuple, QualityBreakdown, ValidatorConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn bbox(c: [i64; 4]) -> BBox {
    BBox::from_coords(c).unwrap()
}

fn worked_quality() -> Outcome {
    let cfg = ValidatorConfig::default();
    let q = overall_quality(0.417, 0.0, 0.73, &cfg).map_err(|e| e.to_string())?;
    // 0.4 * 0.417 + 0.4 * 0 + 0.2 * 0.73 = 0.1668 + 0.146
    ensure((q - 0.313).abs() <= 0.0005, format!("Q = {q}"))?;
    let breakdown = QualityBreakdown {
        q_ans: 0.417,
        q_bbox: 0.0,
        q_reason: 0.73,
        q,
        s_struct: 0.0,
        s_coord: 0.0,
        s_spatial: 0.0,
        anls: 0.0,
        iou: 0.0,
        delta: [0; 4],
        pred_region: RegionAssignment::UNGROUNDED,
        gt_region: RegionAssignment::UNGROUNDED,
        answer_in_ocr: false,
    };
    let verdict = decide(&breakdown, &cfg);
    ensure(verdict.status == Decision::Reject, "expected rejection at q_min 0.85")?;
    Ok(format!("Q = {q:.4}, rejected"))
}

fn directive() -> Outcome {
    let delta = pixel_error(&bbox([760, 650, 840, 680]), &bbox([510, 800, 570, 830]));
    ensure(delta == [-250, 150, -270, 150], format!("delta = {delta:?}"))?;
    let text = render_bbox_directive(delta);
    ensure(text == "Move 250px LEFT, 150px DOWN.", format!("directive = {text:?}"))?;
    Ok(format!("{delta:?} -> {text:?}"))
}

fn region_semantics() -> Outcome {
    let cfg = ValidatorConfig::default();
    let case = receipt_case();
    let b = validate(&case.example, &case.student, &cfg).map_err(|e| e.to_string())?;
    let report = build_report(&case.example, &case.student, &b, &cfg);
    let bbox_error = report
        .errors
        .iter()
        .find(|e| e.message.starts_with("Your bbox"))
        .ok_or("no bbox error")?;
    ensure(bbox_error.message.contains("targets Region #7"), bbox_error.message.clone())?;
    ensure(bbox_error.message.contains("Region #2"), bbox_error.message.clone())?;
    let first = report.fixes.first().ok_or("no fixes")?;
    ensure(first.kind == FixKind::AnswerField, format!("first fix {:?}", first.kind))?;

    let golden = include_str!("golden/receipt_report.json");
    let actual = serde_json::to_string_pretty(&report).unwrap() + "\n";
    ensure(actual == golden, "report differs from tests/golden/receipt_report.json")?;
    Ok("bbox error names Region #7 and Region #2; first fix is AnswerField; golden file matches".into())
}

/// Random edits to ground-truth predictions covering every score path.
fn perturbed(rng: &mut ChaCha8Rng, ex: &docval::DocumentExample, gt: &PredictionTuple) -> PredictionTuple {
    let mut p = gt.clone();
    match rng.gen_range(0..4) {
        0 => {}
        1 => p.answer = ex.regions[rng.gen_range(0..ex.regions.len())].text.clone(),
        2 => p.answer = corrupt_answer(gt).answer,
        _ => p.answer.push_str(&rng.gen_range(0..100).to_string()),
    }
    if rng.gen_bool(0.7) {
        let (dx, dy) = (rng.gen_range(-120..=120), rng.gen_range(-120..=120));
        p.bbox = p.bbox.shifted_within(dx, dy, ex.page);
    }
    let lines: Vec<&str> = gt.cot.lines().collect();
    p.cot = match rng.gen_range(0..5) {
        0 => gt.cot.clone(),
        1 => lines[..lines.len() - 1].join("\n"),
        2 => lines[2..].join("\n"),
        3 => gt.cot.replace("upper", "lower").replace("left", "right"),
        _ => format!("{}\nBBox: {}", lines[..lines.len() - 1].join("\n"), p.bbox),
    };
    p
}

fn formula_suite() -> Outcome {
    let cfg = ValidatorConfig::default();
    let fx = generate_fixtures(404, 1_000, 15).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let preds: Vec<_> = fx
        .examples
        .iter()
        .zip(&fx.predictions)
        .map(|(ex, gt)| perturbed(&mut rng, ex, gt))
        .collect();

    let start = Instant::now();
    let mut distinct_q = Vec::new();
    for (ex, p) in fx.examples.iter().zip(&preds) {
        let b = validate(ex, p, &cfg).map_err(|e| e.to_string())?;
        let q = 0.4 * b.q_ans + 0.4 * b.q_bbox + 0.2 * b.q_reason;
        let reason = (b.s_struct + b.s_coord + b.s_spatial) / 3.0;
        let ans = 0.7 * b.anls + 0.3 * f64::from(u8::from(b.answer_in_ocr));
        let same = b.pred_region.is_grounded() && b.pred_region.region_index == b.gt_region.region_index;
        let bx = 0.8 * b.iou + 0.2 * f64::from(u8::from(same));
        for (name, got, want) in [("Q", b.q, q), ("Q_reason", b.q_reason, reason), ("Q_ans", b.q_ans, ans), ("Q_bbox", b.q_bbox, bx)] {
            ensure((got - want).abs() <= 1e-9, format!("{}: {name} = {got}, formula gives {want}", ex.id))?;
        }
        distinct_q.push((b.q * 1e6).round() as i64);
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    distinct_q.sort_unstable();
    distinct_q.dedup();
    ensure(distinct_q.len() > 50, format!("only {} distinct Q values", distinct_q.len()))?;
    Ok(format!("1000 breakdowns, {} distinct Q values, {:?}", distinct_q.len(), start.elapsed()))
}

/// Plain recursive edit distance, memoised so 6x6 inputs stay cheap.
fn recursive_distance(a: &[char], b: &[char], memo: &mut [[Option<usize>; 7]; 7]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(d) = memo[a.len()][b.len()] {
        return d;
    }
    let sub = usize::from(a[0] != b[0]);
    let d = (recursive_distance(&a[1..], b, memo) + 1)
        .min(recursive_distance(a, &b[1..], memo) + 1)
        .min(recursive_distance(&a[1..], &b[1..], memo) + sub);
    memo[a.len()][b.len()] = Some(d);
    d
}

fn all_strings(max_len: usize) -> Vec<Vec<char>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s: &Vec<char>| {
                ['a', 'b', 'c'].map(|c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

/// Intersection over union from first principles, as exact rationals.
fn iou_oracle(a: [i64; 4], b: [i64; 4]) -> (i64, i64) {
    let area = |c: [i64; 4]| (c[2] - c[0]) * (c[3] - c[1]);
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0);
    (w * h, area(a) + area(b) - w * h)
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let strings = all_strings(6);
    let mut pairs = 0usize;
    for a in &strings {
        for b in &strings {
            let want = recursive_distance(a, b, &mut [[None; 7]; 7]);
            let got = edit_distance(a, b);
            ensure(got == want, format!("{a:?} vs {b:?}: {got} != {want}"))?;
            pairs += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rand_box = |rng: &mut ChaCha8Rng| {
        let (x1, y1) = (rng.gen_range(0..200), rng.gen_range(0..200));
        [x1, y1, x1 + rng.gen_range(0..80), y1 + rng.gen_range(0..80)]
    };
    for _ in 0..10_000 {
        let (ca, cb) = (rand_box(&mut rng), rand_box(&mut rng));
        let (a, b) = (bbox(ca), bbox(cb));
        let (ab, ba) = (iou(&a, &b), iou(&b, &a));
        ensure(ab == ba, format!("asymmetric {a} {b}"))?;
        ensure((0.0..=1.0).contains(&ab), format!("out of range {ab}"))?;
        let (num, den) = iou_oracle(ca, cb);
        let want = if den == 0 || num == 0 { 0.0 } else { num as f64 / den as f64 };
        ensure((ab - want).abs() < 1e-12, format!("{a} {b}: {ab} vs {want}"))?;
        let self_iou = iou(&a, &a);
        let want_self = if a.area() > 0 { 1.0 } else { 0.0 };
        ensure(self_iou == want_self, format!("iou({a}, {a}) = {self_iou}"))?;
    }

    // thresholds .50..=.95: 0.6 clears 3 of them and 0.9 clears 9
    let want_map = (3.0 + 9.0) / 20.0;
    let m = map_over_iou(&[0.6, 0.9].map(|iou| MatchedPair { iou, anls: 1.0 })).map_err(|e| e.to_string())?;
    ensure(m.map == want_map && m.map == 0.60, format!("mAP = {}", m.map))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{pairs} string pairs, 10000 box pairs, mAP = {:.2}, {:?}", m.map, start.elapsed()))
}

fn filter_equivalence() -> Outcome {
    let cfg = ValidatorConfig::default();
    let fx = generate_fixtures(2024, 10_000, 15).map_err(|e| e.to_string())?;
    let corrupted: Vec<usize> = (0..100).map(|i| i * 100 + 37).collect();
    let mut preds = fx.predictions.clone();
    for &i in &corrupted {
        preds[i] = corrupt_answer(&preds[i]);
    }

    let oracle: Vec<String> = fx
        .examples
        .iter()
        .zip(&preds)
        .filter(|(ex, p)| validate(ex, p, &cfg).unwrap().q > cfg.q_min)
        .map(|(ex, _)| ex.id.clone())
        .collect();
    let corrupted_ids: Vec<&str> = corrupted.iter().map(|&i| fx.examples[i].id.as_str()).collect();
    ensure(
        corrupted_ids.iter().all(|id| !oracle.iter().any(|o| o == id)),
        "oracle kept a corrupted record",
    )?;

    let mut notes = Vec::new();
    for jobs in [1, 4] {
        let mut kept = Vec::with_capacity(oracle.len());
        let start = Instant::now();
        let stats = filter_stream(
            fx.examples.iter().cloned().map(Ok),
            preds.iter().cloned().map(Ok),
            &cfg,
            jobs,
            |rec| {
                kept.push(rec.example.id);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        if jobs == 1 {
            within(elapsed, Duration::from_secs(10))?;
        }
        ensure(kept == oracle, format!("jobs={jobs}: accepted ids differ from the oracle"))?;
        ensure(
            stats.total == 10_000 && stats.accepted == 9_900 && stats.rejected == 100,
            format!("jobs={jobs}: {stats:?}"),
        )?;
        ensure((stats.retention - 0.990).abs() < 1e-12, format!("retention {}", stats.retention))?;
        notes.push(format!("jobs={jobs} {elapsed:?}"));
    }
    Ok(format!("retention 0.990, order preserved ({})", notes.join(", ")))
}

fn convergence_suite() -> Outcome {
    let cfg = ConvergenceConfig::default();
    let got = [
        convergence_check(&[70.0, 74.0, 76.0, 77.0, 77.1, 77.2, 77.25], &cfg).converged,
        convergence_check(&[80.0, 80.0, 80.0, 80.0], &cfg).converged,
        convergence_check(&[75.0, 75.1, 75.2, 75.7], &cfg).converged,
    ];
    ensure(got == [true, true, false], format!("{got:?}"))?;
    // deltas 0.2, 0.2, 0.2: mean is exactly the threshold
    let tie = convergence_check(&[70.0, 70.2, 70.4, 70.6], &cfg);
    ensure(!tie.converged, format!("mean = 0.2 converged: {tie:?}"))?;
    let flat_tie = convergence_check(&[0.0, 0.2, 0.4, 0.6], &cfg);
    ensure(!flat_tie.converged, format!("mean = 0.2 converged: {flat_tie:?}"))?;
    let below = convergence_check(&[70.0, 70.19, 70.38, 70.57], &cfg);
    ensure(below.converged, format!("mean 0.19 did not converge: {below:?}"))?;
    Ok(format!("{got:?}; mean = 0.2 does not converge"))
}

fn end_to_end_loop() -> Outcome {
    let start = Instant::now();
    let cfg = ValidatorConfig::default();
    let set = generate_fixtures(8, 200, 15).map_err(|e| e.to_string())?.examples;

    let mut exact = synthetic_student(8, 1.0, 0, &set).map_err(|e| e.to_string())?;
    let h = run_refinement_loop(&mut exact, &set, &cfg, 4).map_err(|e| e.to_string())?;
    let w = cfg.convergence.window;
    ensure(h.final_map() == Some(100.0), format!("final mAP {:?}", h.final_map()))?;
    let k = h.converged_at.ok_or("did not converge")?;
    ensure(k <= w + 2, format!("converged at {k}, limit {}", w + 2))?;

    let run = |jobs| -> Result<String, String> {
        let mut s = synthetic_student(77, 0.5, 2, &set).map_err(|e| e.to_string())?;
        let h = run_refinement_loop(&mut s, &set, &cfg, jobs).map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&h).unwrap())
    };
    let first = run(4)?;
    ensure(first == run(4)?, "repeated run produced a different history")?;
    ensure(first == run(1)?, "jobs=1 produced a different history")?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("mAP 100 at k={k}; noisy history byte-identical; {:?}", start.elapsed()))
}

fn split_reproduction() -> Outcome {
    let ids: Vec<u32> = (0..95_000).collect();
    let s = split_dataset(&ids, [0.8, 0.1, 0.1], 7).map_err(|e| e.to_string())?;
    let sizes = (s.train.len(), s.refine.len(), s.test.len());
    ensure(sizes == (76_000, 9_500, 9_500), format!("{sizes:?}"))?;
    let mut all: Vec<u32> = s.train.iter().chain(&s.refine).chain(&s.test).copied().collect();
    all.sort_unstable();
    ensure(all == ids, "parts are not a partition")?;
    Ok(format!("{sizes:?}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("worked quality score", worked_quality),
        ("bbox directive", directive),
        ("region semantics (golden)", region_semantics),
        ("score formulas", formula_suite),
        ("metric oracles", metric_oracles),
        ("filter oracle equivalence", filter_equivalence),
        ("convergence", convergence_suite),
        ("refinement loop", end_to_end_loop),
        ("dataset split", split_reproduction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
