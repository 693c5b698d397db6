//! Compare the layer-by-layer estimates with the joint network-wide SDP on
//! small networks, alongside a sampled lower bound.

use lipcert::estimators::{empirical_lower_bound, estimate_fast, estimate_sdp, EstimateOptions};
use lipcert::netio::{bench_dims, random_network, DEFAULT_NORM_RANGE};
use lipcert::sdpsolve::{solve_joint_lipsdp, JointVariant, DEFAULT_JOINT_TOL};
use lipcert::Algorithm;

fn main() -> lipcert::Result<()> {
    println!("seed   lower   joint-n  joint-l  sdp      fast");
    for seed in 1..=5 {
        let net = random_network(&bench_dims(3, 8), seed, DEFAULT_NORM_RANGE)?;
        let lower = empirical_lower_bound(&net, 5000, seed, 10.0)?.lower_bound;
        let jn = solve_joint_lipsdp(&net, JointVariant::Neuron, DEFAULT_JOINT_TOL)?.bound;
        let jl = solve_joint_lipsdp(&net, JointVariant::Layer, DEFAULT_JOINT_TOL)?.bound;
        let sdp = estimate_sdp(&net, &EstimateOptions::new(Algorithm::Sdp))?.bound;
        let fast = estimate_fast(&net, &EstimateOptions::default())?.bound;
        println!("{seed:>4}  {lower:.4}  {jn:.4}   {jl:.4}   {sdp:.4}   {fast:.4}");
    }
    Ok(())
}
