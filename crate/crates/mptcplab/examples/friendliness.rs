//! Bottleneck share of each multipath descriptor against a single-path
//! NewReno flow, from the test-network equilibrium.
//!
//! ```sh
//! cargo run --example friendliness
//! ```

use mptcplab::algorithms::Algorithm;
use mptcplab::equilibrium::solve_test_network;

fn main() -> mptcplab::Result<()> {
    let c = 10.0;
    println!("bottleneck capacity c = {c}, equal RTTs, two multipath routes\n");
    println!("{:<14} {:>12} {:>12} {:>14}", "algorithm", "mp share", "sp share", "price");
    for alg in [
        Algorithm::ewtcp(),
        Algorithm::Semicoupled,
        Algorithm::Max,
        Algorithm::Balia,
        Algorithm::Coupled,
    ] {
        let sol = solve_test_network(alg, &[1.0, 1.0], 1.0, c)?;
        println!(
            "{:<14} {:>12.6} {:>12.6} {:>14.6}",
            alg.name(),
            sol.mp_throughput,
            sol.sp_throughput,
            sol.bottleneck_price
        );
    }
    println!("\nfriendlier designs leave more to the single-path flow (rows are");
    println!("ordered from most to least aggressive).");
    Ok(())
}
