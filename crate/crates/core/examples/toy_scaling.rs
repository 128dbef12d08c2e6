// The scalar recursion q ← q − (τ/n) q + n^(−1/2−δ) v and its limit q₀e^(−τt).

use subspace_limits::harness::{toy_scaling_demo, ToyConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ToyConfig {
        tau: 1.0,
        delta_exp: 0.25,
        q0: 1.0,
        n_list: vec![100, 1000, 10000],
        t_end: 1.0,
        record_every: 0.25,
        trials: 200,
        noise: true,
        seed: 42,
    };
    for run in toy_scaling_demo(&cfg, None)? {
        let last = run.times.len() - 1;
        println!(
            "n={:>6}  q(1) = {:.4} ± {:.4}  limit {:.4}  max dev {:.4}",
            run.n, run.mean[last], run.std[last], run.limit[last], run.max_dev
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
