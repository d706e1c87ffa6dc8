//! The dynamic-sharing packet scenario: a long-lived two-path flow keeps
//! one route on each of two links while five single-path flows occupy the
//! second link for a while; the example reports how fast the second route's
//! window recovers after they leave, per descriptor.
//!
//! ```sh
//! cargo run --release --example packet_experiment
//! ```

use mptcplab::algorithms::Algorithm;
use mptcplab::experiments::responsiveness_scenario;
use mptcplab::packet::{convergence_time, run_packet_sim, FlowSpec, PacketRunConfig};

fn main() -> mptcplab::Result<()> {
    let (net, sp_start, sp_end, horizon) = responsiveness_scenario()?;
    println!(
        "two links, 2000 pkts/s each; 5 single-path flows between t = {sp_start}s and t = {sp_end}s\n"
    );
    println!("{:<14} {:>22}", "algorithm", "recovery time (s)");
    for alg in [
        Algorithm::ewtcp(),
        Algorithm::Semicoupled,
        Algorithm::Max,
        Algorithm::Balia,
        Algorithm::Coupled,
    ] {
        let mut flows = vec![FlowSpec::new(0, alg)];
        for s in 1..=5 {
            flows.push(FlowSpec::new(s, Algorithm::NewReno).between(sp_start, sp_end));
        }
        let mut cfg = PacketRunConfig::new(horizon, 1);
        cfg.start_jitter = 0.02;
        cfg.sample_every = 0.02;
        let trace = run_packet_sim(&net, &flows, &cfg)?;
        match convergence_time(&trace, 0, 1, sp_end) {
            Some(t) => println!("{:<14} {:>22.2}", alg.name(), t),
            None => println!("{:<14} {:>22}", alg.name(), "> horizon"),
        }
    }
    Ok(())
}
