// Feed one stream of partially observed samples to each tracker and watch
// the principal cosines with the true subspace.

use subspace_limits::linalg::cosine_similarity;
use subspace_limits::model::{correlated_init, sample_observation, trial_rng, SubspaceModel};
use subspace_limits::schedule::StepSchedule;
use subspace_limits::trackers::{estimate, Algorithm, TrackerParams, TrackerState};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (n, alpha) = (400, 0.5);
    let mut rng = trial_rng(7, 0);
    let model = SubspaceModel::random(n, 2, vec![4.0, 3.0], 1.0, alpha, &mut rng)?;
    let x0 = correlated_init(&model.u, 0.3, &mut rng)?;

    for algo in [Algorithm::Oja, Algorithm::Grouse, Algorithm::Petrels] {
        let params = TrackerParams::with_defaults(alpha, StepSchedule::constant(0.5), 5.0, 1.0);
        let mut state = TrackerState::new(algo, x0.clone(), params, alpha)?;
        let mut data = trial_rng(7, 1);
        print!("{:>8}:", algo.name());
        for k in 0..=4 * n as u64 {
            if k % n as u64 == 0 {
                let cos = cosine_similarity(&model.u, &estimate(&state)?)?.cosines;
                print!("  t={} [{:.3}, {:.3}]", k / n as u64, cos[0], cos[1]);
            }
            state.step(&sample_observation(&model, k, &mut data))?;
        }
        println!();
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
