// Distance between the finite-n cosine and its limit as n grows.

use subspace_limits::harness::{finite_sample_sweep, AlgorithmSpec, ExperimentConfig, InitSpec, ModelSpec, RunSpec};
use subspace_limits::schedule::StepSchedule;
use subspace_limits::trackers::Algorithm;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let base = ExperimentConfig {
        model: ModelSpec {
            n: 100,
            lambdas: vec![5.0],
            sigma: 1.0,
            alpha: 0.5,
        },
        algorithm: AlgorithmSpec::new(Algorithm::Grouse, StepSchedule::constant(0.5), 5.0, 10.0),
        init: InitSpec::uniform(0.5),
        run: RunSpec {
            horizon: 0.5,
            record_times: vec![0.5],
            trials: 20,
            seed: 42,
            store_q: false,
        },
    };
    let sweep = finite_sample_sweep(&base, &[100, 400, 1600], 0.5, None)?;
    for p in &sweep.points {
        println!("n={:>5}  E|Q_n - Q| = {:.4} ± {:.4}", p.n, p.mean_err, p.sem_err);
    }
    println!("{:?}", sweep.fit);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
