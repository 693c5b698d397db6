//! Certify a seeded random network with every estimator.
//!
//! `cargo run --release --example certify_random_net -- [depth] [width] [seed]`

use lipcert::estimators::{estimate, EstimateOptions};
use lipcert::netio::{bench_dims, random_network, DEFAULT_NORM_RANGE};
use lipcert::Algorithm;

fn main() -> lipcert::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let depth = args.first().copied().unwrap_or(5) as usize;
    let width = args.get(1).copied().unwrap_or(20) as usize;
    let seed = args.get(2).copied().unwrap_or(1);

    let net = random_network(&bench_dims(depth, width), seed, DEFAULT_NORM_RANGE)?;
    println!("network dims {:?}", net.dims());
    for algo in [Algorithm::Trivial, Algorithm::Fast, Algorithm::Sdp] {
        let opts = EstimateOptions {
            verify: algo != Algorithm::Trivial,
            ..EstimateOptions::new(algo)
        };
        let t = std::time::Instant::now();
        let cert = estimate(&net, &opts)?;
        println!("{:>8}: L = {:.6}  ({:.3} s)", algo, cert.bound, t.elapsed().as_secs_f64());
    }
    Ok(())
}
