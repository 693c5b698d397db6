//! Solve a single per-layer SDP from its closed-form start with both
//! backends and compare the results.

use lipcert::cascade::{next_f, CascadeState};
use lipcert::netio::{random_network, DEFAULT_NORM_RANGE};
use lipcert::sdpsolve::{build_layer_lmi, feasible_start, maximize_bisection, maximize_c, DEFAULT_SDP_TOL};

fn main() -> lipcert::Result<()> {
    let net = random_network(&[4, 6, 3], 2, DEFAULT_NORM_RANGE)?;
    let m0 = CascadeState::initial(4);
    let prob = build_layer_lmi(net.weight(0), m0.m(), net.weight(1))?;
    let (mut x, c) = feasible_start(net.weight(0), m0.m(), net.weight(1))?;
    println!("start c = {c:.6}, LMI dimension {}", prob.dim());
    x.push(c);

    let barrier = maximize_c(&prob, &x, DEFAULT_SDP_TOL)?;
    println!("barrier:   c* = {:.8} after {} Newton steps, margin {:.2e}", barrier.objective, barrier.newton_steps, barrier.margin);
    let bisect = maximize_bisection(&prob, &x, DEFAULT_SDP_TOL)?;
    println!("bisection: c* = {:.8}", bisect.objective);
    println!("multipliers {:?}", &barrier.x[..prob.n_vars() - 1]);

    let f1 = next_f(net.weight(0), &m0)?;
    println!("λ_max(F_1) = {:.6}", lipcert::spectral::sym_max_eig(&f1)?);
    Ok(())
}
