//! Linearization spectra at fluid equilibria: spectral abscissa and the
//! per-eigenvector Rayleigh bound for each descriptor.
//!
//! ```sh
//! cargo run --example responsiveness_spectrum
//! ```

use mptcplab::algorithms::Algorithm;
use mptcplab::analysis::linearization;
use mptcplab::fluid::settle_to_equilibrium;
use mptcplab::net::{LinkSpec, NetworkSpec, RouteSpec, SystemState};

fn main() -> mptcplab::Result<()> {
    // The textbook 2x2 case first: one NewReno flow on one unit link.
    let tiny = NetworkSpec::new(
        vec![LinkSpec::new(1.0, 1.0)],
        vec![RouteSpec::new(0, vec![0], 1.0)],
    )?;
    let eq = SystemState::from_slices(&[1.0], &[2.0]);
    let spec = linearization(&tiny, &[Algorithm::NewReno], &eq)?;
    println!("single NewReno flow/link: eigenvalues {:?}", spec.eigenvalues);
    println!("  spectral abscissa {:.6} (expected -1 + sqrt(1/2) = {:.6})\n",
        spec.spectral_abscissa, -1.0 + 0.5f64.sqrt());

    // Two links, a two-route source and a single-path competitor.
    let net = NetworkSpec::new(
        vec![LinkSpec::new(8.0, 1.0), LinkSpec::new(6.0, 1.0)],
        vec![
            RouteSpec::new(0, vec![0], 1.0),
            RouteSpec::new(0, vec![1], 1.0),
            RouteSpec::new(1, vec![1], 1.0),
        ],
    )?;
    println!(
        "{:<14} {:>18} {:>16} {:>16}",
        "algorithm", "spectral abscissa", "rayleigh bound", "identity error"
    );
    for alg in [
        Algorithm::ewtcp(),
        Algorithm::Semicoupled,
        Algorithm::Max,
        Algorithm::Balia,
    ] {
        let algs = [alg, Algorithm::NewReno];
        let eq = settle_to_equilibrium(&net, &algs, 1e-3, 1e-8)?;
        let spec = linearization(&net, &algs, &eq)?;
        println!(
            "{:<14} {:>18.6} {:>16.6} {:>16.2e}",
            alg.name(),
            spec.spectral_abscissa,
            spec.lambda_bar,
            spec.rayleigh_identity_error
        );
    }
    println!("\nmore negative numbers mean faster local convergence.");
    Ok(())
}
