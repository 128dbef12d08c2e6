// PETRELS limit in both representations: the (A, K, W) system and the
// reduced (Q, G) system.

use nalgebra::DMatrix;
use subspace_limits::schedule::StepSchedule;
use subspace_limits::theory::{integrate_at, predicted_cosines, OdeParams, OdeState, OdeSystem, DEFAULT_STEP};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let p = OdeParams::new(vec![5.0, 4.0, 3.0, 2.0], 1.0, 0.5, StepSchedule::constant(0.0), 5.0);
    let full0 = OdeState::petrels_full_from_init(DMatrix::from_diagonal_element(4, 4, 0.5), 1.0);
    let times = [0.5, 1.0, 2.0, 4.0, 8.0];
    let full = integrate_at(&OdeSystem::PetrelsFull(p.clone()), &full0, &times, DEFAULT_STEP)?;
    let reduced = integrate_at(&OdeSystem::PetrelsReduced(p), &full0.reduce_petrels()?, &times, DEFAULT_STEP)?;
    for ((t, f), r) in times.iter().zip(&full).zip(&reduced) {
        let (cf, cr) = (predicted_cosines(f)?, predicted_cosines(r)?);
        let gap = cf.iter().zip(&cr).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!("t={t:>4}: {cf:.4?}  |full - reduced| = {gap:.1e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
