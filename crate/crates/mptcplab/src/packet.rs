//! Event-driven packet-level simulator.
//!
//! Per-route congestion windows are driven by the per-ACK / per-loss update
//! rules of [`crate::algorithms`]; links are FIFO servers at their capacity
//! with finite drop-tail buffers and fixed propagation delays; ACKs clock
//! new transmissions. Losses reach the sender one (smoothed) round-trip
//! after the drop, and loss events within one RTT of a previous window cut
//! on the same route coalesce into a single multiplicative decrease.
//!
//! Flows begin in congestion avoidance at a one-packet window; slow start
//! and recovery mechanics are deliberately out of scope. Runs are exactly
//! reproducible: identical configuration and seed give bit-identical
//! traces.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;
use std::path::Path;

use crate::algorithms::Algorithm;
use crate::error::{Error, Result};
use crate::net::NetworkSpec;

/// Loss process at the links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossModel {
    /// Packets arriving at a full buffer are dropped.
    DropTail,
    /// Additionally drop arrivals at link `l` with probability `p[l]`,
    /// mirroring the loss-probability reading of the fluid price.
    Bernoulli(Vec<f64>),
}

/// One flow: a source of the network, the algorithm driving it, and its
/// active interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub source: usize,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub end: Option<f64>,
}

impl FlowSpec {
    pub fn new(source: usize, algorithm: Algorithm) -> Self {
        Self {
            source,
            algorithm,
            start: 0.0,
            end: None,
        }
    }

    pub fn between(mut self, start: f64, end: f64) -> Self {
        self.start = start;
        self.end = Some(end);
        self
    }
}

/// Packet-run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRunConfig {
    pub horizon: f64,
    pub seed: u64,
    pub loss_model: LossModel,
    /// Interval between periodic window/queue samples.
    pub sample_every: f64,
    /// Uniform start-time jitter per flow (desynchronizes identical flows).
    pub start_jitter: f64,
}

impl PacketRunConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            loss_model: LossModel::DropTail,
            sample_every: 0.01,
            start_jitter: 0.0,
        }
    }
}

/// Periodic sample of the visible simulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Per flow, per route slot: congestion window.
    pub windows: Vec<Vec<f64>>,
    /// Per flow, per route slot: packets outstanding.
    pub in_flight: Vec<Vec<u64>>,
    /// Per flow, per route slot: smoothed RTT.
    pub srtt: Vec<Vec<f64>>,
    /// Per link: queue occupancy (including the packet in service).
    pub queues: Vec<usize>,
    /// Per flow: cumulative ACKed packets.
    pub acked: Vec<u64>,
}

/// A window cut applied at the sender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutEvent {
    pub t: f64,
    pub flow: usize,
    pub route_slot: usize,
    pub decrement: f64,
    /// `(D_r / srtt_r) / (sum_k w_k / srtt_k)` immediately before the cut.
    pub rate_drop_fraction: f64,
    pub srtt: f64,
}

/// A packet dropped at a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEvent {
    pub t: f64,
    pub link: usize,
    pub flow: usize,
    pub route_slot: usize,
}

/// Sender-side packet ledger of one flow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub sent: u64,
    pub acked: u64,
    pub lost: u64,
}

/// Full record of one packet run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketTrace {
    pub samples: Vec<Sample>,
    pub cuts: Vec<CutEvent>,
    pub drops: Vec<DropEvent>,
    pub stats: Vec<FlowStats>,
    pub horizon: f64,
    /// Route slots (route ids of the flow's source) per flow.
    pub flow_routes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: usize,
    route_slot: usize,
    hop: usize,
    sent_at: f64,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    FlowStart { flow: usize },
    FlowEnd { flow: usize },
    Arrive { link: usize, packet: Packet },
    Depart { link: usize },
    Ack { packet: Packet },
    Loss { packet: Packet },
    Sample,
}

struct Event {
    time: f64,
    id: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.id == other.id
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Min-heap on (time, id): earlier times first, insertion order breaks
    // ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .partial_cmp(&self.time)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct LinkState {
    queue: VecDeque<Packet>,
    busy: bool,
}

struct FlowState {
    active: bool,
    windows: Vec<f64>,
    in_flight: Vec<u64>,
    srtt: Vec<f64>,
    next_seq: Vec<u64>,
    last_cut: Vec<f64>,
    stats: FlowStats,
}

struct Sim<'a> {
    net: &'a NetworkSpec,
    flows: &'a [FlowSpec],
    cfg: &'a PacketRunConfig,
    heap: BinaryHeap<Event>,
    next_id: u64,
    links: Vec<LinkState>,
    states: Vec<FlowState>,
    rng: ChaCha8Rng,
    samples: Vec<Sample>,
    cuts: Vec<CutEvent>,
    drops: Vec<DropEvent>,
    /// Reverse-path delay per route: rtt minus the forward propagation.
    reverse_delay: Vec<f64>,
}

impl<'a> Sim<'a> {
    fn push(&mut self, time: f64, kind: EventKind) {
        let id = self.next_id;
        self.next_id += 1;
        self.heap.push(Event { time, id, kind });
    }

    fn route_of(&self, flow: usize, slot: usize) -> usize {
        self.net.source_routes(self.flows[flow].source)[slot]
    }

    fn send_allowed(&mut self, t: f64, flow: usize) {
        if !self.states[flow].active {
            return;
        }
        let slots = self.net.source_routes(self.flows[flow].source).len();
        for slot in 0..slots {
            loop {
                let st = &mut self.states[flow];
                if (st.in_flight[slot] as f64) < st.windows[slot].floor() {
                    st.next_seq[slot] += 1;
                    st.in_flight[slot] += 1;
                    st.stats.sent += 1;
                    let route = self.route_of(flow, slot);
                    let first_link = self.net.route(route).links[0];
                    let packet = Packet {
                        flow,
                        route_slot: slot,
                        hop: 0,
                        sent_at: t,
                    };
                    self.push(t, EventKind::Arrive { link: first_link, packet });
                } else {
                    break;
                }
            }
        }
    }

    fn handle_arrive(&mut self, t: f64, link: usize, packet: Packet) {
        let spec = self.net.link(link);
        let bernoulli_drop = match &self.cfg.loss_model {
            LossModel::Bernoulli(p) => self.rng.gen::<f64>() < p[link],
            LossModel::DropTail => false,
        };
        let full = self.links[link].queue.len() >= spec.buffer;
        if bernoulli_drop || full {
            self.drops.push(DropEvent {
                t,
                link,
                flow: packet.flow,
                route_slot: packet.route_slot,
            });
            // The sender notices roughly one smoothed round trip later.
            let delay = self.states[packet.flow].srtt[packet.route_slot];
            self.push(t + delay, EventKind::Loss { packet });
            return;
        }
        let state = &mut self.links[link];
        state.queue.push_back(packet);
        debug_assert!(state.queue.len() <= spec.buffer);
        if !state.busy {
            state.busy = true;
            self.push(t + 1.0 / spec.capacity, EventKind::Depart { link });
        }
    }

    fn handle_depart(&mut self, t: f64, link: usize) {
        let spec = self.net.link(link);
        let packet = match self.links[link].queue.pop_front() {
            Some(p) => p,
            None => {
                self.links[link].busy = false;
                return;
            }
        };
        if self.links[link].queue.is_empty() {
            self.links[link].busy = false;
        } else {
            self.push(t + 1.0 / spec.capacity, EventKind::Depart { link });
        }
        let route = self.route_of(packet.flow, packet.route_slot);
        let links = &self.net.route(route).links;
        let after_prop = t + spec.prop_delay;
        if packet.hop + 1 < links.len() {
            let mut fwd = packet;
            fwd.hop += 1;
            let next_link = links[fwd.hop];
            self.push(after_prop, EventKind::Arrive { link: next_link, packet: fwd });
        } else {
            let ack_at = after_prop + self.reverse_delay[route];
            self.push(ack_at, EventKind::Ack { packet });
        }
    }

    fn handle_ack(&mut self, t: f64, packet: Packet) {
        let flow = packet.flow;
        let slot = packet.route_slot;
        {
            let st = &mut self.states[flow];
            st.in_flight[slot] = st.in_flight[slot].saturating_sub(1);
            st.stats.acked += 1;
            let sample = t - packet.sent_at;
            st.srtt[slot] = 0.875 * st.srtt[slot] + 0.125 * sample;
        }
        if self.states[flow].active {
            let st = &self.states[flow];
            let inc = self.flows[flow]
                .algorithm
                .packet_increment(&st.windows, &st.srtt)
                .expect("windows stay >= 1");
            self.states[flow].windows[slot] += inc[slot];
        }
        self.send_allowed(t, flow);
    }

    fn handle_loss(&mut self, t: f64, packet: Packet) {
        let flow = packet.flow;
        let slot = packet.route_slot;
        {
            let st = &mut self.states[flow];
            st.in_flight[slot] = st.in_flight[slot].saturating_sub(1);
            st.stats.lost += 1;
        }
        let should_cut = {
            let st = &self.states[flow];
            t - st.last_cut[slot] >= st.srtt[slot]
        };
        if should_cut && self.states[flow].active {
            let (decrement, fraction, srtt) = {
                let st = &self.states[flow];
                let d = self.flows[flow]
                    .algorithm
                    .packet_decrement(&st.windows, &st.srtt, slot)
                    .expect("windows stay >= 1");
                let agg: f64 = st
                    .windows
                    .iter()
                    .zip(&st.srtt)
                    .map(|(&w, &tau)| w / tau)
                    .sum();
                (d, (d / st.srtt[slot]) / agg, st.srtt[slot])
            };
            let st = &mut self.states[flow];
            st.windows[slot] = (st.windows[slot] - decrement).max(1.0);
            st.last_cut[slot] = t;
            self.cuts.push(CutEvent {
                t,
                flow,
                route_slot: slot,
                decrement,
                rate_drop_fraction: fraction,
                srtt,
            });
        }
        self.send_allowed(t, flow);
    }

    fn take_sample(&mut self, t: f64) {
        let sample = Sample {
            t,
            windows: self.states.iter().map(|s| s.windows.clone()).collect(),
            in_flight: self.states.iter().map(|s| s.in_flight.clone()).collect(),
            srtt: self.states.iter().map(|s| s.srtt.clone()).collect(),
            queues: self.links.iter().map(|l| l.queue.len()).collect(),
            acked: self.states.iter().map(|s| s.stats.acked).collect(),
        };
        self.samples.push(sample);
        let next = t + self.cfg.sample_every;
        if next <= self.cfg.horizon {
            self.push(next, EventKind::Sample);
        }
    }
}

fn validate(net: &NetworkSpec, flows: &[FlowSpec], cfg: &PacketRunConfig) -> Result<()> {
    if !(cfg.horizon > 0.0) {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    if !(cfg.sample_every > 0.0) {
        return Err(Error::InvalidConfig("sample_every must be positive".into()));
    }
    if flows.is_empty() {
        return Err(Error::InvalidConfig("no flows".into()));
    }
    let mut used = vec![false; net.num_sources()];
    for (i, f) in flows.iter().enumerate() {
        if f.source >= net.num_sources() {
            return Err(Error::InvalidConfig(format!(
                "flow {i}: source {} out of range",
                f.source
            )));
        }
        if used[f.source] {
            return Err(Error::InvalidConfig(format!(
                "flow {i}: source {} already driven by another flow",
                f.source
            )));
        }
        used[f.source] = true;
        f.algorithm.validate()?;
        if f.start < 0.0 || f.start >= cfg.horizon {
            return Err(Error::InvalidConfig(format!(
                "flow {i}: start {} outside [0, horizon)",
                f.start
            )));
        }
        if let Some(end) = f.end {
            if end <= f.start || end > cfg.horizon {
                return Err(Error::InvalidConfig(format!(
                    "flow {i}: end {end} outside (start, horizon]"
                )));
            }
        }
    }
    if let LossModel::Bernoulli(p) = &cfg.loss_model {
        if p.len() != net.num_links() {
            return Err(Error::DimensionMismatch {
                what: "bernoulli loss probabilities",
                expected: net.num_links(),
                got: p.len(),
            });
        }
        if p.iter().any(|&v| !(0.0..1.0).contains(&v)) {
            return Err(Error::InvalidConfig(
                "bernoulli loss probabilities must lie in [0, 1)".into(),
            ));
        }
    }
    Ok(())
}

/// Runs the simulator. Deterministic given `(net, flows, cfg)`.
pub fn run_packet_sim(
    net: &NetworkSpec,
    flows: &[FlowSpec],
    cfg: &PacketRunConfig,
) -> Result<PacketTrace> {
    validate(net, flows, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Per-flow start jitter, drawn in flow order.
    let jitter: Vec<f64> = flows
        .iter()
        .map(|_| {
            if cfg.start_jitter > 0.0 {
                rng.gen::<f64>() * cfg.start_jitter
            } else {
                0.0
            }
        })
        .collect();

    let reverse_delay: Vec<f64> = net
        .routes()
        .iter()
        .map(|r| {
            let fwd: f64 = r.links.iter().map(|&l| net.link(l).prop_delay).sum();
            r.rtt - fwd
        })
        .collect();

    let states: Vec<FlowState> = flows
        .iter()
        .map(|f| {
            let slots = net.source_routes(f.source).len();
            FlowState {
                active: false,
                windows: vec![1.0; slots],
                in_flight: vec![0; slots],
                srtt: net.source_rtts(f.source),
                next_seq: vec![0; slots],
                last_cut: vec![f64::NEG_INFINITY; slots],
                stats: FlowStats::default(),
            }
        })
        .collect();

    let links: Vec<LinkState> = (0..net.num_links())
        .map(|_| LinkState {
            queue: VecDeque::new(),
            busy: false,
        })
        .collect();

    let mut sim = Sim {
        net,
        flows,
        cfg,
        heap: BinaryHeap::new(),
        next_id: 0,
        links,
        states,
        rng,
        samples: Vec::new(),
        cuts: Vec::new(),
        drops: Vec::new(),
        reverse_delay,
    };

    for (i, f) in flows.iter().enumerate() {
        let start = (f.start + jitter[i]).min(cfg.horizon * 0.999_999);
        sim.push(start, EventKind::FlowStart { flow: i });
        if let Some(end) = f.end {
            sim.push(end, EventKind::FlowEnd { flow: i });
        }
    }
    sim.push(0.0, EventKind::Sample);

    while let Some(ev) = sim.heap.pop() {
        if ev.time > cfg.horizon {
            break;
        }
        match ev.kind {
            EventKind::FlowStart { flow } => {
                sim.states[flow].active = true;
                sim.send_allowed(ev.time, flow);
            }
            EventKind::FlowEnd { flow } => {
                sim.states[flow].active = false;
            }
            EventKind::Arrive { link, packet } => sim.handle_arrive(ev.time, link, packet),
            EventKind::Depart { link } => sim.handle_depart(ev.time, link),
            EventKind::Ack { packet } => sim.handle_ack(ev.time, packet),
            EventKind::Loss { packet } => sim.handle_loss(ev.time, packet),
            EventKind::Sample => sim.take_sample(ev.time),
        }
    }

    Ok(PacketTrace {
        samples: sim.samples,
        cuts: sim.cuts,
        drops: sim.drops,
        stats: sim.states.into_iter().map(|s| s.stats).collect(),
        horizon: cfg.horizon,
        flow_routes: flows
            .iter()
            .map(|f| net.source_routes(f.source).to_vec())
            .collect(),
    })
}

impl PacketTrace {
    /// ACK-counted throughput of a flow (packets/sec) between the samples
    /// nearest `t0` and `t1`.
    pub fn throughput(&self, flow: usize, t0: f64, t1: f64) -> f64 {
        let idx = |t: f64| -> usize {
            match self
                .samples
                .binary_search_by(|s| s.t.partial_cmp(&t).unwrap())
            {
                Ok(i) => i,
                Err(i) => i.saturating_sub(1),
            }
        };
        let (i0, i1) = (idx(t0), idx(t1));
        if i1 <= i0 {
            return 0.0;
        }
        let dt = self.samples[i1].t - self.samples[i0].t;
        let da = self.samples[i1].acked[flow] - self.samples[i0].acked[flow];
        da as f64 / dt
    }

    /// Window time series of one route slot of a flow.
    pub fn window_series(&self, flow: usize, slot: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().map(move |s| (s.t, s.windows[flow][slot]))
    }

    /// Long-format CSV: `t,flow,route,w,in_flight,acked,q_1..q_L,event`.
    /// Sample rows carry an empty event column; drop and cut events appear
    /// as their own rows, so every summary metric (throughput from the
    /// cumulative `acked` column, oscillation from the cut fractions) is
    /// recomputable from the file.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let num_links = self.samples.first().map_or(0, |s| s.queues.len());
        write!(w, "t,flow,route,w,in_flight,acked")?;
        for l in 0..num_links {
            write!(w, ",q_{}", l + 1)?;
        }
        writeln!(w, ",event")?;
        for s in &self.samples {
            for (f, routes) in self.flow_routes.iter().enumerate() {
                for (slot, &route) in routes.iter().enumerate() {
                    write!(
                        w,
                        "{:.6},{},{},{:.6},{},{}",
                        s.t, f, route, s.windows[f][slot], s.in_flight[f][slot], s.acked[f]
                    )?;
                    for l in 0..num_links {
                        write!(w, ",{}", s.queues[l])?;
                    }
                    writeln!(w, ",")?;
                }
            }
        }
        for d in &self.drops {
            let route = self.flow_routes[d.flow][d.route_slot];
            write!(w, "{:.6},{},{},,,", d.t, d.flow, route)?;
            for _ in 0..num_links {
                write!(w, ",")?;
            }
            writeln!(w, ",drop@link{}", d.link)?;
        }
        for c in &self.cuts {
            let route = self.flow_routes[c.flow][c.route_slot];
            write!(w, "{:.6},{},{},,,", c.t, c.flow, route)?;
            for _ in 0..num_links {
                write!(w, ",")?;
            }
            writeln!(w, ",cut:{:.4}:frac={:.6}", c.decrement, c.rate_drop_fraction)?;
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Time for a route's window to recover after competing flows depart.
///
/// The target is the long-run mean window over the last third of the run;
/// returns `None` when the window never reaches it before the horizon, and
/// exactly zero when the first sample after `departure` already clears it.
pub fn convergence_time(
    trace: &PacketTrace,
    flow: usize,
    slot: usize,
    departure: f64,
) -> Option<f64> {
    let t_tail = trace.horizon * (2.0 / 3.0);
    let tail: Vec<f64> = trace
        .samples
        .iter()
        .filter(|s| s.t >= t_tail)
        .map(|s| s.windows[flow][slot])
        .collect();
    if tail.is_empty() {
        return None;
    }
    let target: f64 = tail.iter().sum::<f64>() / tail.len() as f64;
    let mut first = true;
    for s in &trace.samples {
        if s.t < departure {
            continue;
        }
        if s.windows[flow][slot] >= target {
            return Some(if first { 0.0 } else { s.t - departure });
        }
        first = false;
    }
    None
}

/// Average throughputs over a time window: the multipath flow's total and
/// the per-flow mean of the single-path competitors.
pub fn friendliness_split(
    trace: &PacketTrace,
    mp_flow: usize,
    sp_flows: &[usize],
    window: (f64, f64),
) -> (f64, f64) {
    let mp = trace.throughput(mp_flow, window.0, window.1);
    if sp_flows.is_empty() {
        return (mp, 0.0);
    }
    let sp: f64 = sp_flows
        .iter()
        .map(|&f| trace.throughput(f, window.0, window.1))
        .sum::<f64>()
        / sp_flows.len() as f64;
    (mp, sp)
}

/// Mean relative aggregate-rate drop per loss epoch for one flow.
///
/// Cuts within one smoothed RTT of the epoch opener belong to the same
/// epoch; their rate-drop fractions add.
pub fn oscillation_trace_metric(trace: &PacketTrace, flow: usize) -> Option<f64> {
    let mut epochs: Vec<f64> = Vec::new();
    let mut epoch_start = f64::NEG_INFINITY;
    let mut epoch_window = 0.0;
    let mut acc = 0.0;
    let mut open = false;
    for cut in trace.cuts.iter().filter(|c| c.flow == flow) {
        if open && cut.t - epoch_start < epoch_window {
            acc += cut.rate_drop_fraction;
        } else {
            if open {
                epochs.push(acc);
            }
            epoch_start = cut.t;
            epoch_window = cut.srtt;
            acc = cut.rate_drop_fraction;
            open = true;
        }
    }
    if open {
        epochs.push(acc);
    }
    if epochs.is_empty() {
        None
    } else {
        Some(epochs.iter().sum::<f64>() / epochs.len() as f64)
    }
}
