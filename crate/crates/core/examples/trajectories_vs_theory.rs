// Mean GROUSE cosines over independent trials next to the ODE limit,
// with two-standard-error bands.

use subspace_limits::harness::{
    compare_to_theory, run_experiment, theory_curves, AlgorithmSpec, ExperimentConfig, InitSpec, ModelSpec, RunSpec,
    TheoryMethod,
};
use subspace_limits::schedule::StepSchedule;
use subspace_limits::trackers::Algorithm;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        model: ModelSpec {
            n: 500,
            lambdas: vec![5.0, 4.0, 3.0, 2.0],
            sigma: 1.0,
            alpha: 0.5,
        },
        algorithm: AlgorithmSpec::new(Algorithm::Grouse, StepSchedule::constant(0.5), 5.0, 10.0),
        init: InitSpec::uniform(0.5),
        run: RunSpec {
            horizon: 2.0,
            record_times: vec![0.5, 1.0, 1.5, 2.0],
            trials: 8,
            seed: 42,
            store_q: false,
        },
    };
    let rec = run_experiment(&cfg, None)?;
    let theory = theory_curves(&cfg, &cfg.run.record_times, TheoryMethod::ClosedForm)?;
    let report = compare_to_theory(&rec, &theory.points())?;
    for p in &report.points {
        println!(
            "t={:.2} dir={} mean={:.4} ± {:.4} theory={:.4}",
            p.t,
            p.direction + 1,
            p.mean,
            2.0 * p.sem,
            p.theory
        );
    }
    println!("max |mean - theory| = {:.4}", report.max_abs_err);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
