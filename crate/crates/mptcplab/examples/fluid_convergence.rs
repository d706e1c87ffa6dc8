//! Integrates Balia on a two-link network next to a single-path flow and
//! reports convergence diagnostics; writes the trace to
//! `fluid_convergence.csv`.
//!
//! ```sh
//! cargo run --example fluid_convergence
//! ```

use mptcplab::algorithms::Algorithm;
use mptcplab::fluid::{integrate, settle_to_equilibrium, FluidRunConfig};
use mptcplab::net::{LinkSpec, NetworkSpec, RouteSpec, SystemState};

fn main() -> mptcplab::Result<()> {
    let net = NetworkSpec::new(
        vec![LinkSpec::new(8.0, 1.0), LinkSpec::new(6.0, 1.0)],
        vec![
            RouteSpec::new(0, vec![0], 1.0),
            RouteSpec::new(0, vec![1], 1.0),
            RouteSpec::new(1, vec![1], 1.0),
        ],
    )?;
    let algs = [Algorithm::Balia, Algorithm::NewReno];

    // Settle once to get a reference point for the Lyapunov diagnostic.
    let eq = settle_to_equilibrium(&net, &algs, 1e-3, 1e-8)?;
    println!("equilibrium rates:  {:?}", eq.rates.as_slice());
    println!("equilibrium prices: {:?}", eq.prices.as_slice());

    let mut cfg = FluidRunConfig::new(SystemState::uniform(&net, 1.0, 0.05), 1e-3, 150.0);
    cfg.record_every = 100;
    cfg.reference_equilibrium = Some(eq);
    let trace = integrate(&net, &algs, &cfg)?;

    let v = trace.lyapunov.as_ref().unwrap();
    let res = trace.residuals.as_ref().unwrap();
    println!("V(0) = {:.4e}  ->  V(t_end) = {:.4e}", v[0], v.last().unwrap());
    println!("terminal equilibrium residual: {:.3e}", res.last().unwrap());
    println!("final rates: {:?}", trace.final_state().rates.as_slice());

    trace.write_csv_file("fluid_convergence.csv")?;
    println!("trace written to fluid_convergence.csv");
    Ok(())
}
