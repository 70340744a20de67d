//! Convergence checks on a few mAP histories.

use docval::model::ConvergenceConfig;
use docval::pipeline::convergence_check;

fn main() {
    let cfg = ConvergenceConfig::default();
    let histories: [&[f64]; 4] = [
        &[70.0, 74.0, 76.0, 77.0, 77.1, 77.2, 77.25],
        &[80.0, 80.0, 80.0, 80.0],
        &[75.0, 75.1, 75.2, 75.7],
        &[70.0, 71.0],
    ];
    for h in histories {
        let s = convergence_check(h, &cfg);
        println!("{h:?}\n  converged={} mean={:?} max={:?}", s.converged, s.mean_delta, s.max_delta);
    }
}
