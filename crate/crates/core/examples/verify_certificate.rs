//! Issue a certificate, replay it both ways, then show that a forged one
//! claiming half the bound is rejected.

use lipcert::cascade::{verify_chain, verify_monolithic, DEFAULT_MONOLITHIC_CAP, DEFAULT_SLACK};
use lipcert::estimators::{estimate_fast, EstimateOptions};
use lipcert::netio::{bench_dims, random_network, DEFAULT_NORM_RANGE};
use lipcert::Certificate;

fn main() -> lipcert::Result<()> {
    let net = random_network(&bench_dims(4, 10), 7, DEFAULT_NORM_RANGE)?;
    let cert = estimate_fast(&net, &EstimateOptions::default())?;
    println!("{}", cert.to_json()?);

    let chain = verify_chain(&net, &cert, DEFAULT_SLACK)?;
    let mono = verify_monolithic(&net, &cert, DEFAULT_SLACK, DEFAULT_MONOLITHIC_CAP)?;
    println!("chain ok={} stage min eigs {:?}", chain.ok, chain.stage_min_eigs);
    println!("monolithic ok={} dim={} min eig {:.3e}", mono.ok, mono.dim, mono.min_eig);

    let forged = Certificate::new(cert.algo, cert.lambdas.clone(), cert.inv_f / 2.0);
    let chain = verify_chain(&net, &forged, DEFAULT_SLACK)?;
    println!("forged L={:.6}: chain ok={} (failed at condition {:?})", forged.bound, chain.ok, chain.failed_at);
    Ok(())
}
