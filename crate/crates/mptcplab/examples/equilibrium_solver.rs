//! Direct equilibrium solves for the generalized family at fixed route
//! prices: the scalar-root construction for finite norm orders and the
//! closed form for the max-norm members.
//!
//! ```sh
//! cargo run --example equilibrium_solver
//! ```

use mptcplab::algorithms::{Algorithm, NormOrder, PhiMode};
use mptcplab::equilibrium::{
    solve_generalized_equilibrium, solve_generalized_equilibrium_maxnorm,
};

fn main() -> mptcplab::Result<()> {
    let qs = [0.8, 1.5, 3.0];
    let taus = [1.0, 1.0, 1.0];

    println!("route prices q = {qs:?}, rtts = {taus:?}");

    for n in [1u32, 2, 8] {
        let sol = solve_generalized_equilibrium(&qs, &taus, 0.5, n)?;
        println!(
            "beta = 0.5, n = {n}: aggregate = {:.5}, x = {:?} ({} bisection steps, root residual {:.1e})",
            sol.aggregate(),
            sol.x.iter().map(|v| (v * 1e5).round() / 1e5).collect::<Vec<_>>(),
            sol.iterations,
            sol.residual,
        );
    }

    let sol = solve_generalized_equilibrium_maxnorm(&qs, &taus, 0.2)?;
    println!(
        "balia parameters (beta = 0.2, max-norm): aggregate = {:.5}, x = {:?}",
        sol.aggregate(),
        sol.x.iter().map(|v| (v * 1e5).round() / 1e5).collect::<Vec<_>>(),
    );

    // Self-verification: the returned rates reproduce the prices.
    let phi = Algorithm::generalized(0.2, 0.0, NormOrder::Inf)
        .fluid_phi(&sol.x, &taus, PhiMode::Analysis)?;
    let worst = phi
        .iter()
        .zip(&qs)
        .map(|(p, q)| ((p - q) / q).abs())
        .fold(0.0f64, f64::max);
    println!("worst relative marginal residual: {worst:.2e}");
    Ok(())
}
