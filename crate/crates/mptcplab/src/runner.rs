//! Config-driven execution: dispatches a parsed [`ExperimentConfig`] to the
//! right subsystem, writes CSV traces and JSON summaries, and maps errors to
//! process exit codes (0 success, 2 validation, 3 numerical failure).

use serde_json::json;
use std::path::{Path, PathBuf};

use crate::analysis::{criteria_reports, criteria_verdicts};
use crate::config::{ExperimentConfig, Mode};
use crate::equilibrium::{
    solve_generalized_equilibrium, solve_generalized_equilibrium_maxnorm, solve_test_network,
};
use crate::error::{Error, Result};
use crate::experiments;
use crate::fluid::{integrate, FluidRunConfig};
use crate::net::SystemState;
use crate::packet::{oscillation_trace_metric, run_packet_sim, PacketRunConfig};
use crate::algorithms::NormOrder;

/// What a run produced.
#[derive(Debug)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Exit code classification per the CLI contract.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. }
        | Error::NoConvergence { .. }
        | Error::NotAnEquilibrium { .. }
        | Error::NonFiniteMarginal { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

/// Writes a diagnostic JSON for a failed run and returns its path.
pub fn write_diagnostic(out_dir: &Path, err: &Error) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("diagnostic.json");
    let body = json!({
        "error": err.to_string(),
        "exit_code": exit_code_for(err),
    });
    std::fs::write(&path, serde_json::to_string_pretty(&body).expect("serializable"))?;
    Ok(path)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value).expect("serializable"))?;
    Ok(())
}

/// Executes a validated config. `seed_override` takes precedence over the
/// config's seed; `jobs` bounds worker threads for multi-run experiments.
pub fn run_config(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    jobs: usize,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let seed = seed_override.unwrap_or(cfg.seed);
    let prefix = &cfg.output.prefix;
    let mut files = Vec::new();

    let summary = match cfg.mode {
        Mode::Fluid => {
            let net = cfg.network.as_ref().expect("validated").build()?;
            let algs = cfg.source_algorithms(&net)?;
            let rates = match &cfg.fluid.initial_rates {
                Some(v) => {
                    if v.len() != net.num_routes() {
                        return Err(Error::Config(format!(
                            "key 'fluid.initial_rates': expected {} entries, got {}",
                            net.num_routes(),
                            v.len()
                        )));
                    }
                    v.clone()
                }
                None => vec![cfg.fluid.initial_rate; net.num_routes()],
            };
            let prices = match &cfg.fluid.initial_prices {
                Some(v) => {
                    if v.len() != net.num_links() {
                        return Err(Error::Config(format!(
                            "key 'fluid.initial_prices': expected {} entries, got {}",
                            net.num_links(),
                            v.len()
                        )));
                    }
                    v.clone()
                }
                None => vec![cfg.fluid.initial_price; net.num_links()],
            };
            let mut run = FluidRunConfig::new(
                SystemState::from_slices(&rates, &prices),
                cfg.fluid.dt,
                cfg.fluid.t_end,
            );
            run.method = cfg.fluid.method;
            run.record_every = cfg.fluid.record_every;
            let trace = integrate(&net, &algs, &run)?;
            let csv = out_dir.join(format!("{prefix}_fluid_trace.csv"));
            trace.write_csv_file(&csv)?;
            files.push(csv);
            let fin = trace.final_state();
            json!({
                "mode": "fluid",
                "t_end": trace.final_time(),
                "final_rates": fin.rates.as_slice(),
                "final_prices": fin.prices.as_slice(),
                "final_residual": trace.residuals.as_ref().and_then(|r| r.last().copied()),
            })
        }
        Mode::Packet => {
            let net = cfg.network.as_ref().expect("validated").build()?;
            let flows = cfg.packet_flows()?;
            let mut run = PacketRunConfig::new(cfg.packet.horizon, seed);
            run.sample_every = cfg.packet.sample_every;
            run.start_jitter = cfg.packet.start_jitter;
            run.loss_model = cfg.packet.loss_model()?;
            let trace = run_packet_sim(&net, &flows, &run)?;
            let csv = out_dir.join(format!("{prefix}_packet_trace.csv"));
            trace.write_csv_file(&csv)?;
            files.push(csv);
            let horizon = cfg.packet.horizon;
            let throughputs: Vec<f64> = (0..flows.len())
                .map(|f| trace.throughput(f, horizon * 0.5, horizon))
                .collect();
            let oscillation: Vec<Option<f64>> = (0..flows.len())
                .map(|f| oscillation_trace_metric(&trace, f))
                .collect();
            // Recovery times for flows that outlive the last departure.
            let last_departure = flows.iter().filter_map(|f| f.end).fold(f64::NAN, f64::max);
            let convergence: Vec<Option<f64>> = flows
                .iter()
                .enumerate()
                .map(|(f, spec)| {
                    if !last_departure.is_finite() || spec.end.is_some() {
                        return None;
                    }
                    (0..trace.flow_routes[f].len())
                        .filter_map(|slot| {
                            crate::packet::convergence_time(&trace, f, slot, last_departure)
                        })
                        .fold(None, |acc: Option<f64>, t| {
                            Some(acc.map_or(t, |a| a.max(t)))
                        })
                })
                .collect();
            json!({
                "mode": "packet",
                "seed": seed,
                "throughput_second_half": throughputs,
                "oscillation_drop_metric": oscillation,
                "convergence_after_departure": convergence,
                "stats": trace.stats,
                "drops": trace.drops.len(),
                "cuts": trace.cuts.len(),
            })
        }
        Mode::Analyze => {
            let mut algs = Vec::new();
            for a in &cfg.analyze.algorithms {
                algs.push(a.resolve()?);
            }
            if algs.is_empty() {
                for f in &cfg.flows {
                    algs.push(f.algorithm.resolve()?);
                }
            }
            let mut table = Vec::new();
            for &alg in &algs {
                let reports = criteria_reports(alg, cfg.analyze.samples, seed)?;
                let path = out_dir.join(format!("{prefix}_analysis_{}.json", alg.name()));
                write_json(&path, &serde_json::to_value(&reports).expect("serializable"))?;
                files.push(path);
                let v = criteria_verdicts(alg, cfg.analyze.samples, seed)?;
                table.push(json!({
                    "algorithm": v.algorithm,
                    "C0": v.c0, "C1": v.c1, "C2": v.c2,
                    "C3": v.c3, "C4": v.c4, "C5": v.c5,
                }));
            }
            json!({ "mode": "analyze", "samples": cfg.analyze.samples, "verdicts": table })
        }
        Mode::Equilibrium => {
            let eq = cfg.equilibrium.as_ref().expect("validated");
            let result = match eq.norm_order()? {
                NormOrder::Inf => {
                    solve_generalized_equilibrium_maxnorm(&eq.q, &eq.taus, eq.beta)?
                }
                NormOrder::Finite(n) => {
                    solve_generalized_equilibrium(&eq.q, &eq.taus, eq.beta, n)?
                }
            };
            let value = serde_json::to_value(&result).expect("serializable");
            let path = out_dir.join(format!("{prefix}_equilibrium.json"));
            write_json(&path, &value)?;
            files.push(path);
            json!({ "mode": "equilibrium", "result": value })
        }
        Mode::Friendliness => {
            let fr = cfg.friendliness.as_ref().expect("validated");
            let algs = if fr.algorithms.is_empty() {
                crate::algorithms::standard_descriptors()
            } else {
                fr.algorithms
                    .iter()
                    .map(|a| a.resolve())
                    .collect::<Result<Vec<_>>>()?
            };
            let tasks: Vec<_> = algs
                .iter()
                .map(|&alg| {
                    let mp_rtts = fr.mp_rtts.clone();
                    let (sp_rtt, capacity) = (fr.sp_rtt, fr.capacity);
                    move || -> Result<serde_json::Value> {
                        let sol = solve_test_network(alg, &mp_rtts, sp_rtt, capacity)?;
                        Ok(json!({
                            "algorithm": alg.name(),
                            "mp_throughput": sol.mp_throughput,
                            "sp_throughput": sol.sp_throughput,
                            "bottleneck_price": sol.bottleneck_price,
                            "residual": sol.residual,
                        }))
                    }
                })
                .collect();
            let rows = experiments::run_parallel(jobs, tasks)?;
            let value = json!({ "mode": "friendliness", "capacity": fr.capacity, "rows": rows });
            let path = out_dir.join(format!("{prefix}_friendliness.json"));
            write_json(&path, &value)?;
            files.push(path);
            value
        }
    };

    let summary_path = out_dir.join(format!("{prefix}_summary.json"));
    write_json(&summary_path, &summary)?;
    files.push(summary_path);
    Ok(RunArtifacts { files, summary })
}

/// Runs a built-in named experiment and writes its report.
pub fn run_reproduce(name: &str, out_dir: &Path, seed: u64, jobs: usize) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let report = experiments::run_named(name, seed, jobs)?;
    let path = out_dir.join(format!("{name}.json"));
    write_json(&path, &report)?;
    Ok(RunArtifacts {
        files: vec![path],
        summary: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), 2);
        assert_eq!(exit_code_for(&Error::UnknownExperiment("x".into())), 2);
        assert_eq!(
            exit_code_for(&Error::Diverged { t: 1.0, norm: 1e9 }),
            3
        );
        assert_eq!(
            exit_code_for(&Error::NoConvergence {
                iterations: 10,
                residual: 1.0
            }),
            3
        );
    }

    #[test]
    fn fluid_mode_writes_artifacts() {
        let text = r#"
schema_version = 1
mode = "fluid"

[network]
[[network.links]]
capacity = 1.0

[[network.routes]]
source = 0
links = [0]
rtt = 1.0

[[flows]]
source = 0
algorithm = "newreno"

[fluid]
dt = 1e-3
t_end = 5.0
record_every = 100
initial_rate = 0.2
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let arts = run_config(&cfg, dir.path(), None, 1).unwrap();
        assert_eq!(arts.files.len(), 2);
        for f in &arts.files {
            assert!(f.exists());
        }
        assert_eq!(arts.summary["mode"], "fluid");
    }

    #[test]
    fn analyze_mode_emits_verdicts() {
        let text = r#"
schema_version = 1
mode = "analyze"

[analyze]
algorithms = ["balia"]
samples = 20
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let arts = run_config(&cfg, dir.path(), Some(11), 1).unwrap();
        let verdicts = &arts.summary["verdicts"][0];
        assert_eq!(verdicts["algorithm"], "balia");
        assert_eq!(verdicts["C0"], false);
        for c in ["C1", "C2", "C3", "C4", "C5"] {
            assert_eq!(verdicts[c], true, "criterion {c}");
        }
    }

    #[test]
    fn equilibrium_mode_solves() {
        let text = r#"
schema_version = 1
mode = "equilibrium"

[equilibrium]
q = [2.0, 2.0]
taus = [1.0, 1.0]
beta = 0.2
n = "inf"
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let arts = run_config(&cfg, dir.path(), None, 1).unwrap();
        let x = arts.summary["result"]["x"].as_array().unwrap();
        assert!((x[0].as_f64().unwrap() - 0.5).abs() < 1e-9);
    }
}
