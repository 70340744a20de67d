//! Runs the predict, verify, update loop against the synthetic student for a
//! few correction rates.

use docval::pipeline::{generate_fixtures, run_refinement_loop, synthetic_student};
use docval::ValidatorConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ValidatorConfig::default();
    let set = generate_fixtures(11, 200, 15)?.examples;

    for (rho, noise) in [(1.0, 0), (0.5, 2), (0.2, 4)] {
        let mut student = synthetic_student(11, rho, noise, &set)?;
        let history = run_refinement_loop(&mut student, &set, &cfg, 4)?;
        println!("rho={rho} noise={noise}");
        if let Some(init) = &history.initial {
            println!("  k=0  mAP={:6.2}  ANLS={:.3}  Q={:.3}", init.map, init.mean_anls, init.mean_q);
        }
        for r in &history.iterations {
            println!("  k={:<2} mAP={:6.2}  ANLS={:.3}  Q={:.3}", r.k, r.map, r.mean_anls, r.mean_q);
        }
        match history.converged_at {
            Some(k) => println!("  converged at k={k}"),
            None => println!("  stopped at the iteration cap"),
        }
    }
    Ok(())
}
