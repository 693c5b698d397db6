//! Sample gradient norms to get a lower bound and compare it with the
//! certified upper bounds.

use lipcert::estimators::{empirical_lower_bound_with, estimate_fast, estimate_sdp, EstimateOptions, SamplingOptions};
use lipcert::netio::{bench_dims, random_network, DEFAULT_NORM_RANGE};
use lipcert::Algorithm;

fn main() -> lipcert::Result<()> {
    let net = random_network(&bench_dims(5, 20), 11, DEFAULT_NORM_RANGE)?;
    let opts = SamplingOptions {
        quotient: true,
        ..SamplingOptions::default()
    };
    for n in [100, 1000, 10000] {
        let report = empirical_lower_bound_with(&net, n, 11, &opts)?;
        println!("{n:>6} samples: lower bound {:.6}", report.lower_bound);
    }
    println!("fast upper bound {:.6}", estimate_fast(&net, &EstimateOptions::default())?.bound);
    println!("sdp upper bound  {:.6}", estimate_sdp(&net, &EstimateOptions::new(Algorithm::Sdp))?.bound);
    Ok(())
}
