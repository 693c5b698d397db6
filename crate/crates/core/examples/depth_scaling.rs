//! Wall time of the closed-form estimator as depth doubles at fixed width.

use std::time::Instant;

use lipcert::estimators::{estimate_fast, estimate_trivial, EstimateOptions};
use lipcert::netio::{bench_dims, random_network, DEFAULT_NORM_RANGE};

fn main() -> lipcert::Result<()> {
    let width = 50;
    println!("depth  time (s)   L/trivial");
    for depth in [10, 20, 40, 80, 160] {
        let net = random_network(&bench_dims(depth, width), 1, DEFAULT_NORM_RANGE)?;
        let t = Instant::now();
        let cert = estimate_fast(&net, &EstimateOptions::default())?;
        let secs = t.elapsed().as_secs_f64();
        let trivial = estimate_trivial(&net)?.bound;
        println!("{depth:>5}  {secs:.5}   {:.4}", cert.bound / trivial);
    }
    Ok(())
}
