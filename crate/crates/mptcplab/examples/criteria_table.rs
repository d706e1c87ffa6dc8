//! Prints the design-criteria verdict table for every descriptor.
//!
//! ```sh
//! cargo run --example criteria_table
//! ```

use mptcplab::algorithms::Algorithm;
use mptcplab::analysis::criteria_verdicts;

fn main() -> mptcplab::Result<()> {
    let algorithms = [
        Algorithm::ewtcp(),
        Algorithm::Coupled,
        Algorithm::Semicoupled,
        Algorithm::Max,
        Algorithm::Balia,
    ];
    println!("{:<14} {:>4} {:>4} {:>4} {:>4} {:>4} {:>4}", "algorithm", "C0", "C1", "C2", "C3", "C4", "C5");
    for alg in algorithms {
        let v = criteria_verdicts(alg, 100, 2024)?;
        let yn = |b: bool| if b { "yes" } else { "no" };
        println!(
            "{:<14} {:>4} {:>4} {:>4} {:>4} {:>4} {:>4}",
            v.algorithm,
            yn(v.c0),
            yn(v.c1),
            yn(v.c2),
            yn(v.c3),
            yn(v.c4),
            yn(v.c5)
        );
    }
    Ok(())
}
