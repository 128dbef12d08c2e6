// (Q², G) flow of the one-dimensional PETRELS limit on either side of the
// critical discount.

use subspace_limits::harness::{phase_portrait, PortraitConfig};
use subspace_limits::schedule::StepSchedule;
use subspace_limits::theory::OdeParams;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let layout = PortraitConfig {
        starts: vec![[0.05, 0.1], [0.05, 4.0], [0.95, 4.0], [0.95, 0.1]],
        t_end: 60.0,
        sample_interval: 1.0,
        g_max: 4.0,
        g_points: 40,
    };
    // alpha lambda^2 / sigma^2 = 2, so the transition sits at mu = 20
    for mu in [5.0, 40.0] {
        let p = OdeParams::new(vec![2.0], 1.0, 0.5, StepSchedule::constant(0.0), mu);
        let res = phase_portrait(&p, &layout)?;
        println!(
            "mu={mu}: critical mu {:.2}, fixed point Q²={:.4} G={:.4}",
            res.critical_mu,
            res.fixed_point.q2(),
            res.fixed_point.g()
        );
        for tr in &res.trajectories {
            let (a, b) = (tr[0], tr[tr.len() - 1]);
            println!("  ({:.2}, {:.2}) -> ({:.4}, {:.4})", a[1], a[2], b[1], b[2]);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
