// Oja/GROUSE limit: the closed form in P = (QQᵀ)⁻¹ against RK4, and the
// long-time cosines against the steady-state formula.

use nalgebra::DMatrix;
use subspace_limits::schedule::StepSchedule;
use subspace_limits::theory::{
    integrate_at, inverse_gram_from_cosine, oja_grouse_closed_form, oja_grouse_critical_tau, predicted_cosines,
    squared_cosines_from_inverse_gram, steady_state_cos2, OdeParams, OdeState, OdeSystem, DEFAULT_STEP,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let lambdas = vec![5.0, 4.0, 3.0, 2.0];
    let p = OdeParams::new(lambdas.clone(), 1.0, 0.5, StepSchedule::constant(0.5), 0.0);
    let q0 = DMatrix::from_diagonal_element(4, 4, 0.5);
    let p0 = inverse_gram_from_cosine(&q0)?;
    let times = [0.5, 1.0, 2.0, 5.0, 20.0];
    let states = integrate_at(&OdeSystem::OjaGrouse(p.clone()), &OdeState::oja_grouse(q0), &times, DEFAULT_STEP)?;
    for (t, s) in times.iter().zip(&states) {
        let closed: Vec<f64> = squared_cosines_from_inverse_gram(&oja_grouse_closed_form(&p0, &p, *t)?)?
            .iter()
            .map(|c| c.sqrt())
            .collect();
        let rk4 = predicted_cosines(s)?;
        let gap = closed.iter().zip(&rk4).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!("t={t:>5}: {closed:.4?}  |closed - rk4| = {gap:.1e}");
    }
    let steady: Vec<f64> = lambdas
        .iter()
        .map(|&l| steady_state_cos2(l, &p).map(f64::sqrt))
        .collect::<Result<_, _>>()?;
    println!("steady state cosines {steady:.4?}");
    println!("informative while tau < {:.3}", oja_grouse_critical_tau(&p));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
