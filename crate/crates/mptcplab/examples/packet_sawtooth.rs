//! Single NewReno flow through one drop-tail link: the classic sawtooth.
//! Writes the trace to `packet_sawtooth.csv`.
//!
//! ```sh
//! cargo run --example packet_sawtooth
//! ```

use mptcplab::algorithms::Algorithm;
use mptcplab::net::{LinkSpec, NetworkSpec, RouteSpec};
use mptcplab::packet::{run_packet_sim, FlowSpec, PacketRunConfig};

fn main() -> mptcplab::Result<()> {
    let capacity = 500.0; // packets per second
    let net = NetworkSpec::new(
        vec![LinkSpec::new(capacity, 1.0).with_buffer(25).with_prop_delay(0.005)],
        vec![RouteSpec::new(0, vec![0], 0.02)],
    )?;
    let flows = [FlowSpec::new(0, Algorithm::NewReno)];
    let cfg = PacketRunConfig::new(30.0, 42);
    let trace = run_packet_sim(&net, &flows, &cfg)?;

    let thr = trace.throughput(0, 5.0, 30.0);
    println!("capacity {capacity} pkts/s, measured {thr:.1} pkts/s ({:.1}% utilization)",
        100.0 * thr / capacity);
    println!(
        "sent {} / acked {} / lost {}; {} window cuts",
        trace.stats[0].sent, trace.stats[0].acked, trace.stats[0].lost, trace.cuts.len()
    );

    // A coarse look at the sawtooth.
    let wmax = trace
        .window_series(0, 0)
        .map(|(_, w)| w)
        .fold(f64::MIN, f64::max);
    println!("peak window {wmax:.1} packets");

    trace.write_csv_file("packet_sawtooth.csv")?;
    println!("trace written to packet_sawtooth.csv");
    Ok(())
}
