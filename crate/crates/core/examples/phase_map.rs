// Steady PETRELS overlap on a small (snr, mu) grid against the predicted
// phase boundary.

use subspace_limits::harness::{phase_heatmap, HeatmapConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = HeatmapConfig {
        mu_grid: vec![0.1, 0.5, 2.5, 12.5],
        snr_grid: vec![0.3, 0.6, 1.2],
        n: 200,
        t_end: 10.0,
        trials: 2,
        sigma: 1.0,
        alpha: 0.5,
        q0: 0.5,
        delta: 1.0,
        seed: 42,
    };
    let res = phase_heatmap(&cfg, None)?;
    for (si, snr) in cfg.snr_grid.iter().enumerate() {
        print!("snr={snr:<4}");
        for mi in 0..cfg.mu_grid.len() {
            let c = res.cell(si, mi, cfg.mu_grid.len());
            let side = if c.mu < c.critical_mu { '+' } else { '-' };
            print!("  {side}{:.2}", c.mean_q2);
        }
        println!();
    }
    println!("boundary starts at {:?}", res.boundary[0]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
