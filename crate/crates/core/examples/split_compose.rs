//! Bound a deep network by splitting it into sub-networks and multiplying
//! their bounds.

use lipcert::estimators::{estimate_fast, split_compose, EstimateOptions};
use lipcert::netio::{bench_dims, random_network, DEFAULT_NORM_RANGE};
use lipcert::Algorithm;

fn main() -> lipcert::Result<()> {
    let net = random_network(&bench_dims(12, 16), 3, DEFAULT_NORM_RANGE)?;
    println!("whole network, fast: {:.6}", estimate_fast(&net, &EstimateOptions::default())?.bound);
    for split in [vec![6, 6], vec![4, 4, 4], vec![3; 4], vec![1; 12]] {
        for base in [Algorithm::Fast, Algorithm::Sdp] {
            println!("split {split:?} with {base}: {:.6}", split_compose(&net, &split, base)?);
        }
    }
    Ok(())
}
