use serde::Serialize;

use crate::model::ConvergenceConfig;

/// Window statistics closer than this to a threshold count as equal to it,
/// so ties never converge even after floating-point rounding.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceStatus {
    pub converged: bool,
    /// Mean of the last `window` consecutive differences, if enough history.
    pub mean_delta: Option<f64>,
    pub max_delta: Option<f64>,
}

/// Checks the mAP history (percentage points) for convergence: the last
/// `window` consecutive gains must have mean below `eps_mean` and maximum
/// below `eps_max`, both strictly.
pub fn convergence_check(history: &[f64], cfg: &ConvergenceConfig) -> ConvergenceStatus {
    let w = cfg.window.max(1);
    if history.len() < w + 1 {
        return ConvergenceStatus {
            converged: false,
            mean_delta: None,
            max_delta: None,
        };
    }
    let tail = &history[history.len() - w - 1..];
    let deltas: Vec<f64> = tail.windows(2).map(|p| p[1] - p[0]).collect();
    let mean = deltas.iter().sum::<f64>() / w as f64;
    let max = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ConvergenceStatus {
        converged: mean < cfg.eps_mean - TIE_TOLERANCE && max < cfg.eps_max - TIE_TOLERANCE,
        mean_delta: Some(mean),
        max_delta: Some(max),
    }
}
