//! Built-in reference experiments.
//!
//! Three named scenarios reproduce the qualitative findings the toolkit is
//! organized around, at desk scale:
//!
//! - `table3_friendliness`: equilibrium and packet-level share of a
//!   multipath flow against a single-path NewReno flow on one bottleneck,
//!   for every descriptor; expected ordering
//!   ewtcp >= semicoupled >= max >= balia >= coupled.
//! - `table4_responsiveness`: window-recovery times on a two-link network
//!   after five single-path flows depart; expected ewtcp < semicoupled and
//!   {max, balia} < coupled with coupled > 3x ewtcp.
//! - `fig5_oscillation`: per-loss aggregate throughput drop of a two-path
//!   flow against a single-path flow on the same link; multipath is
//!   expected to oscillate less.
//!
//! Each run emits a JSON report comparing the measured orderings with the
//! expected ones.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algorithms::Algorithm;
use crate::equilibrium::solve_test_network;
use crate::error::{Error, Result};
use crate::net::{LinkSpec, NetworkSpec, RouteSpec};
use crate::packet::{
    convergence_time, friendliness_split, oscillation_trace_metric, run_packet_sim, FlowSpec,
    LossModel, PacketRunConfig, PacketTrace,
};

pub const EXPERIMENT_NAMES: [&str; 3] = [
    "table3_friendliness",
    "table4_responsiveness",
    "fig5_oscillation",
];

pub fn describe(name: &str) -> Option<&'static str> {
    match name {
        "table3_friendliness" => Some(
            "bottleneck share of each multipath descriptor against a single-path flow \
             (fluid equilibrium + packet run)",
        ),
        "table4_responsiveness" => Some(
            "window recovery time after single-path flows depart, per descriptor, 3 seeds",
        ),
        "fig5_oscillation" => Some(
            "per-loss aggregate throughput drop: two-path flow vs single-path flow",
        ),
        _ => None,
    }
}

/// Descriptors in expected friendliness order (most throughput first).
fn ordered_descriptors() -> Vec<Algorithm> {
    vec![
        Algorithm::ewtcp(),
        Algorithm::Semicoupled,
        Algorithm::Max,
        Algorithm::Balia,
        Algorithm::Coupled,
    ]
}

/// Runs closures on up to `jobs` worker threads, preserving output order.
pub fn run_parallel<T, F>(jobs: usize, tasks: Vec<F>) -> Result<Vec<T>>
where
    T: Send,
    F: FnOnce() -> Result<T> + Send,
{
    let jobs = jobs.max(1);
    if jobs == 1 || tasks.len() <= 1 {
        return tasks.into_iter().map(|t| t()).collect();
    }
    let n = tasks.len();
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    let work: Vec<(usize, F)> = tasks.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(work);
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                match item {
                    Some((idx, task)) => {
                        let out = task();
                        results.lock().unwrap()[idx] = Some(out);
                    }
                    None => break,
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every task ran"))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FriendlinessRow {
    pub algorithm: String,
    pub fluid_mp_throughput: f64,
    pub fluid_sp_throughput: f64,
    pub packet_mp_throughput: f64,
    pub packet_sp_throughput: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FriendlinessExperiment {
    pub capacity: f64,
    pub rows: Vec<FriendlinessRow>,
    pub expected_ordering: Vec<String>,
    /// Expected ordering holds for the fluid equilibria (ties allowed).
    pub fluid_ordering_holds: bool,
    /// Same test on the packet measurements, with a 5% tie tolerance.
    pub packet_ordering_holds: bool,
}

/// Single bottleneck at desk scale: one two-route flow under test plus one
/// single-path NewReno flow.
pub fn run_table3_friendliness(seed: u64, jobs: usize) -> Result<FriendlinessExperiment> {
    let capacity = 2000.0;
    let rtt = 0.02;
    let net = NetworkSpec::new(
        vec![LinkSpec::new(capacity, 1.0).with_buffer(50).with_prop_delay(0.005)],
        vec![
            RouteSpec::new(0, vec![0], rtt),
            RouteSpec::new(0, vec![0], rtt),
            RouteSpec::new(1, vec![0], rtt),
        ],
    )?;
    let algs = ordered_descriptors();

    let tasks: Vec<_> = algs
        .iter()
        .map(|&alg| {
            let net = net.clone();
            move || -> Result<FriendlinessRow> {
                let fluid = solve_test_network(alg, &[rtt, rtt], rtt, capacity)?;
                let flows = [
                    FlowSpec::new(0, alg),
                    FlowSpec::new(1, Algorithm::NewReno),
                ];
                let mut cfg = PacketRunConfig::new(60.0, seed);
                cfg.start_jitter = 0.02;
                cfg.sample_every = 0.05;
                let trace = run_packet_sim(&net, &flows, &cfg)?;
                let (mp, sp) = friendliness_split(&trace, 0, &[1], (20.0, 60.0));
                Ok(FriendlinessRow {
                    algorithm: alg.name().into(),
                    fluid_mp_throughput: fluid.mp_throughput,
                    fluid_sp_throughput: fluid.sp_throughput,
                    packet_mp_throughput: mp,
                    packet_sp_throughput: sp,
                })
            }
        })
        .collect();
    let rows = run_parallel(jobs, tasks)?;

    let fluid_ordering_holds = rows
        .windows(2)
        .all(|w| w[0].fluid_mp_throughput >= w[1].fluid_mp_throughput - 1e-9 * capacity);
    let packet_ordering_holds = rows
        .windows(2)
        .all(|w| w[0].packet_mp_throughput >= w[1].packet_mp_throughput - 0.05 * capacity);
    Ok(FriendlinessExperiment {
        capacity,
        expected_ordering: rows.iter().map(|r| r.algorithm.clone()).collect(),
        rows,
        fluid_ordering_holds,
        packet_ordering_holds,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponsivenessRow {
    pub algorithm: String,
    /// Per-seed recovery times in seconds; the horizon stands in when the
    /// window never reached its target.
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponsivenessExperiment {
    pub rows: Vec<ResponsivenessRow>,
    pub seeds: Vec<u64>,
    pub departure: f64,
    pub horizon: f64,
    /// ewtcp < semicoupled, max < coupled, balia < coupled, coupled > 3x ewtcp.
    pub expected_relations_hold: bool,
}

/// The scenario behind the reference experiment config, at desk scale.
pub fn responsiveness_scenario() -> Result<(NetworkSpec, f64, f64, f64)> {
    let capacity = 2000.0;
    let rtt = 0.02;
    let mut routes = vec![
        RouteSpec::new(0, vec![0], rtt),
        RouteSpec::new(0, vec![1], rtt),
    ];
    for s in 1..=5 {
        routes.push(RouteSpec::new(s, vec![1], rtt));
    }
    let net = NetworkSpec::new(
        vec![
            LinkSpec::new(capacity, 1.0).with_buffer(40).with_prop_delay(0.005),
            LinkSpec::new(capacity, 1.0).with_buffer(40).with_prop_delay(0.005),
        ],
        routes,
    )?;
    Ok((net, 40.0, 80.0, 140.0))
}

/// Two links; the multipath flow under test keeps one route per link while
/// five single-path flows occupy the second link between `t = 40` and
/// `t = 80`. Measures how fast the second route's window recovers.
pub fn run_table4_responsiveness(base_seed: u64, jobs: usize) -> Result<ResponsivenessExperiment> {
    let (net, sp_start, sp_end, horizon) = responsiveness_scenario()?;
    let algs = ordered_descriptors();
    let seeds: Vec<u64> = (0..3).map(|k| base_seed + k).collect();

    let mut tasks = Vec::new();
    for &alg in &algs {
        for &seed in &seeds {
            let net = net.clone();
            tasks.push(move || -> Result<f64> {
                let mut flows = vec![FlowSpec::new(0, alg)];
                for s in 1..=5 {
                    flows.push(FlowSpec::new(s, Algorithm::NewReno).between(sp_start, sp_end));
                }
                let mut cfg = PacketRunConfig::new(horizon, seed);
                cfg.start_jitter = 0.02;
                cfg.sample_every = 0.02;
                let trace = run_packet_sim(&net, &flows, &cfg)?;
                Ok(convergence_time(&trace, 0, 1, sp_end).unwrap_or(horizon))
            });
        }
    }
    let flat = run_parallel(jobs, tasks)?;

    let mut rows = Vec::new();
    for (i, &alg) in algs.iter().enumerate() {
        let per_seed: Vec<f64> = flat[i * seeds.len()..(i + 1) * seeds.len()].to_vec();
        let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        rows.push(ResponsivenessRow {
            algorithm: alg.name().into(),
            per_seed,
            mean,
        });
    }
    let by_name = |n: &str| rows.iter().find(|r| r.algorithm == n).unwrap().mean;
    let expected_relations_hold = by_name("ewtcp") < by_name("semicoupled")
        && by_name("max") < by_name("coupled")
        && by_name("balia") < by_name("coupled")
        && by_name("coupled") > 3.0 * by_name("ewtcp");
    Ok(ResponsivenessExperiment {
        rows,
        seeds,
        departure: sp_end,
        horizon,
        expected_relations_hold,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscillationExperiment {
    pub mp_algorithm: String,
    pub mp_drop_metric: f64,
    pub sp_drop_metric: f64,
    pub loss_probability: f64,
    pub multipath_oscillates_less: bool,
}

/// One link with Bernoulli losses; a two-path flow and then a single-path
/// flow traverse it, and the per-epoch aggregate drop fractions are
/// compared.
pub fn run_fig5_oscillation(seed: u64) -> Result<OscillationExperiment> {
    run_oscillation_for(Algorithm::Balia, seed)
}

pub fn run_oscillation_for(alg: Algorithm, seed: u64) -> Result<OscillationExperiment> {
    let capacity = 2000.0;
    let rtt = 0.02;
    let loss_p = 0.01;
    let net_mp = NetworkSpec::new(
        vec![LinkSpec::new(capacity, 1.0).with_buffer(400).with_prop_delay(0.005)],
        vec![
            RouteSpec::new(0, vec![0], rtt),
            RouteSpec::new(0, vec![0], rtt),
        ],
    )?;
    let net_sp = NetworkSpec::new(
        vec![LinkSpec::new(capacity, 1.0).with_buffer(400).with_prop_delay(0.005)],
        vec![RouteSpec::new(0, vec![0], rtt)],
    )?;
    let mut cfg = PacketRunConfig::new(60.0, seed);
    cfg.loss_model = LossModel::Bernoulli(vec![loss_p]);
    cfg.sample_every = 0.05;

    let mp_trace = run_packet_sim(&net_mp, &[FlowSpec::new(0, alg)], &cfg)?;
    let sp_trace = run_packet_sim(&net_sp, &[FlowSpec::new(0, Algorithm::NewReno)], &cfg)?;
    let mp = oscillation_trace_metric(&mp_trace, 0)
        .ok_or_else(|| Error::Domain("no loss epochs in the multipath run".into()))?;
    let sp = oscillation_trace_metric(&sp_trace, 0)
        .ok_or_else(|| Error::Domain("no loss epochs in the single-path run".into()))?;
    Ok(OscillationExperiment {
        mp_algorithm: alg.name().into(),
        mp_drop_metric: mp,
        sp_drop_metric: sp,
        loss_probability: loss_p,
        multipath_oscillates_less: mp < sp,
    })
}

/// Runs a named experiment and returns its JSON report.
pub fn run_named(name: &str, seed: u64, jobs: usize) -> Result<serde_json::Value> {
    match name {
        "table3_friendliness" => {
            let r = run_table3_friendliness(seed, jobs)?;
            Ok(serde_json::to_value(&r).expect("serializable"))
        }
        "table4_responsiveness" => {
            let r = run_table4_responsiveness(seed, jobs)?;
            Ok(serde_json::to_value(&r).expect("serializable"))
        }
        "fig5_oscillation" => {
            let r = run_fig5_oscillation(seed)?;
            Ok(json!({
                "balia": serde_json::to_value(&r).expect("serializable"),
            }))
        }
        other => Err(Error::UnknownExperiment(other.into())),
    }
}

/// A single-bottleneck packet scenario used by consistency tests: one
/// multipath flow and one single-path flow share a link; returns the trace
/// and the flow indices `(mp, sp)`.
pub fn bottleneck_packet_run(
    alg: Algorithm,
    capacity: f64,
    horizon: f64,
    seed: u64,
) -> Result<(PacketTrace, usize, usize)> {
    let rtt = 0.02;
    let net = NetworkSpec::new(
        vec![LinkSpec::new(capacity, 1.0).with_buffer(50).with_prop_delay(0.005)],
        vec![
            RouteSpec::new(0, vec![0], rtt),
            RouteSpec::new(0, vec![0], rtt),
            RouteSpec::new(1, vec![0], rtt),
        ],
    )?;
    let flows = [FlowSpec::new(0, alg), FlowSpec::new(1, Algorithm::NewReno)];
    let mut cfg = PacketRunConfig::new(horizon, seed);
    cfg.start_jitter = 0.02;
    cfg.sample_every = 0.05;
    let trace = run_packet_sim(&net, &flows, &cfg)?;
    Ok((trace, 0, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_resolve() {
        for name in EXPERIMENT_NAMES {
            assert!(describe(name).is_some());
        }
        assert!(describe("nonsense").is_none());
        assert!(matches!(
            run_named("nonsense", 0, 1),
            Err(Error::UnknownExperiment(_))
        ));
    }

    #[test]
    fn parallel_runner_preserves_order() {
        let tasks: Vec<_> = (0..16)
            .map(|i| move || -> Result<usize> { Ok(i * i) })
            .collect();
        let out = run_parallel(4, tasks).unwrap();
        assert_eq!(out, (0..16).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn oscillation_experiment_runs() {
        let r = run_fig5_oscillation(7).unwrap();
        assert!(r.sp_drop_metric > 0.3 && r.sp_drop_metric < 0.7);
        assert!(r.multipath_oscillates_less, "{r:?}");
    }
}
