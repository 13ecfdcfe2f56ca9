//! Deterministic discrete-event executor.
//!
//! A run is a pure function of its [`Scenario`]: every random draw comes from
//! a ChaCha stream derived from the master seed, the VL and the purpose of the
//! draw, and simultaneous events are dispatched in scheduling order.

mod clock;
mod queue;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use clock::{Clock, MockClock, SystemClock};
pub use queue::EventQueue;
pub use trace::{PathKey, RowError, TraceError, TraceEvent, TraceKind, TraceLog, TRACE_HEADER};

use crate::models::{
    channel_delay, effective_period, plan_switched, route, switched_hop, ChannelOccupancy, DelaySampler,
    OccupancyViolation, PlanError, RedundancyDecision, RedundancyState, SwitchedPlan, UniformSampler,
};
use crate::policing::{AutomatonState, BucketParams, Decision, OracleState, PolicerState, PolicingError};
use crate::topology::{Interval, Peer, PortId, SwitchId, TimedChannelSpec, TopologySpec, TopologyViolation};
use crate::vl::{advance_seq, EsId, Frame, Nanos, NetworkConstants, VirtualLinkSpec, VlId, NS_PER_MS, NS_PER_S};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x00AF_D0C0_FFEE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelLevel {
    TimedChannel,
    DirectVl,
    SwitchedVl,
}

impl FromStr for ModelLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tc" | "timed_channel" => Ok(ModelLevel::TimedChannel),
            "dvl" | "direct_vl" => Ok(ModelLevel::DirectVl),
            "svl" | "switched_vl" => Ok(ModelLevel::SwitchedVl),
            _ => Err(format!("unknown model {s:?} (expected tc, dvl or svl)")),
        }
    }
}

impl fmt::Display for ModelLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelLevel::TimedChannel => "tc",
            ModelLevel::DirectVl => "dvl",
            ModelLevel::SwitchedVl => "svl",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pacing {
    Fast,
    Realtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicerKind {
    Automaton,
    Oracle,
}

/// Parses `short`/`medium`/`long` or a number of seconds.
pub fn parse_duration(s: &str) -> Result<Nanos, String> {
    match s {
        "short" => Ok(10 * NS_PER_S),
        "medium" => Ok(60 * NS_PER_S),
        "long" => Ok(300 * NS_PER_S),
        _ => {
            let secs: f64 = s.parse().map_err(|_| format!("bad duration {s:?}"))?;
            if !(secs.is_finite() && secs > 0.0) {
                return Err(format!("duration must be positive, got {s}"));
            }
            Ok((secs * NS_PER_S as f64).round() as Nanos)
        }
    }
}

/// An extra frame emitted on `vl_id` at `at`, outside the periodic schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injection {
    pub vl_id: VlId,
    pub at: Nanos,
}

/// Period `period` of `vl_id` misses its window and is lost in emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkipFault {
    pub vl_id: VlId,
    pub period: u64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: TopologySpec,
    pub model: ModelLevel,
    pub duration_ns: Nanos,
    pub speed: f64,
    pub seed: u64,
    pub pacing: Pacing,
    pub policing: bool,
    pub policer: PolicerKind,
    pub constants: NetworkConstants,
    pub injections: Vec<Injection>,
    pub skipped_periods: Vec<SkipFault>,
    /// Paced mode flags events dispatched later than this.
    pub drift_bound_ns: Nanos,
}

impl Scenario {
    pub fn new(topology: TopologySpec, model: ModelLevel) -> Self {
        Scenario {
            topology,
            model,
            duration_ns: 10 * NS_PER_S,
            speed: 1.0,
            seed: DEFAULT_SEED,
            pacing: Pacing::Fast,
            policing: true,
            policer: PolicerKind::Automaton,
            constants: NetworkConstants::default(),
            injections: Vec::new(),
            skipped_periods: Vec::new(),
            drift_bound_ns: NS_PER_MS,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid topology: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTopology(Vec<TopologyViolation>),
    #[error("VL {vl}: no traversal bounds for the path to end system {dst}")]
    MissingBounds { vl: VlId, dst: EsId },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("occupancy violation: {0}")]
    Occupancy(#[from] OccupancyViolation),
    #[error("VL {vl}: {source}")]
    Policing { vl: VlId, source: PolicingError },
    #[error("pacing mode mismatch: scenario is not set to realtime")]
    PacingMismatch,
}

/// Wall-clock versus virtual-time agreement of a paced run.
#[derive(Debug, Clone, PartialEq)]
pub struct PacingReport {
    pub events: u64,
    pub max_drift_ns: Nanos,
    pub mean_drift_ns: f64,
    pub virtual_elapsed_ns: Nanos,
    pub wall_elapsed_ns: Nanos,
    pub drift_bound_ns: Nanos,
    pub events_over_bound: u64,
}

impl PacingReport {
    /// Mean drift as a fraction of the simulated duration.
    pub fn mean_drift_ratio(&self) -> f64 {
        if self.virtual_elapsed_ns == 0 {
            0.0
        } else {
            self.mean_drift_ns / self.virtual_elapsed_ns as f64
        }
    }
}

/// Runs `scenario` as fast as possible.
pub fn run(scenario: &Scenario) -> Result<TraceLog, EngineError> {
    Engine::new(scenario).run()
}

/// Runs `scenario` with each event dispatched no earlier than its virtual due
/// time on `clock`.
pub fn run_paced(scenario: &Scenario, clock: &dyn Clock) -> Result<(TraceLog, PacingReport), EngineError> {
    Engine::new(scenario).run_paced(clock)
}

#[derive(Clone, Copy)]
enum Purpose {
    Jitter = 1,
    Channel = 2,
    Hop = 3,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for one (VL, purpose, detail) triple.
fn stream(seed: u64, vl: VlId, purpose: Purpose, detail: u64) -> ChaCha8Rng {
    let tag = (u64::from(vl.0) << 40) | ((purpose as u64) << 32) | (detail & 0xFFFF_FFFF);
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(tag)))
}

enum Policer {
    Automaton(AutomatonState),
    Oracle(OracleState),
}

struct PolicerSlot {
    params: BucketParams,
    state: Policer,
    generation: u64,
}

impl PolicerSlot {
    fn on_frame(&mut self, t: Nanos) -> Result<Decision, PolicingError> {
        let (d, next) = match &self.state {
            Policer::Automaton(s) => {
                let (d, n) = s.on_frame(&self.params, t)?;
                (d, Policer::Automaton(n))
            }
            Policer::Oracle(s) => {
                let (d, n) = s.on_frame(&self.params, t)?;
                (d, Policer::Oracle(n))
            }
        };
        self.state = next;
        Ok(d)
    }

    fn deadline(&self) -> Option<Nanos> {
        match &self.state {
            Policer::Automaton(s) => s.deadline(),
            Policer::Oracle(_) => None,
        }
    }
}

struct VlRuntime {
    spec: VirtualLinkSpec,
    period: Nanos,
    periods: u64,
    last_seq: Option<u8>,
    pending_skips: u64,
    skips: BTreeSet<u64>,
    jitter_rng: ChaCha8Rng,
    channel_rngs: BTreeMap<(u8, EsId), ChaCha8Rng>,
    hop_rngs: Vec<ChaCha8Rng>,
    channels: BTreeMap<EsId, (TimedChannelSpec, ChannelOccupancy)>,
    plan: SwitchedPlan,
    entry: Option<(SwitchId, PortId)>,
    policers: BTreeMap<(u8, SwitchId), PolicerSlot>,
    redundancy: BTreeMap<EsId, RedundancyState>,
}

impl VlRuntime {
    fn seq_after_pending(&self) -> u8 {
        match (self.last_seq, self.pending_skips) {
            (None, 0) => 0,
            (None, k) => advance_seq(0, k - 1),
            (Some(s), k) => advance_seq(s, k),
        }
    }
}

enum Ev {
    Emit {
        vl: usize,
        period: u64,
    },
    Inject {
        vl: usize,
    },
    ChannelExit {
        vl: usize,
        dst: EsId,
        frame: Frame,
    },
    HopForward {
        vl: usize,
        net: u8,
        switch: SwitchId,
        in_port: PortId,
        frame: Frame,
        targets: Vec<EsId>,
    },
    PolicingInternal {
        vl: usize,
        net: u8,
        switch: SwitchId,
        generation: u64,
    },
    Deliver {
        vl: usize,
        dst: EsId,
        frame: Frame,
    },
}

/// One simulation run. Owns all mutable per-run state.
pub struct Engine<'a> {
    scenario: &'a Scenario,
    sampler: Box<dyn DelaySampler + 'a>,
}

impl<'a> Engine<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Engine {
            scenario,
            sampler: Box::new(UniformSampler),
        }
    }

    /// Replaces the uniform delay sampler.
    pub fn with_sampler(mut self, sampler: impl DelaySampler + 'a) -> Self {
        self.sampler = Box::new(sampler);
        self
    }

    pub fn run(&self) -> Result<TraceLog, EngineError> {
        let mut state = self.prepare()?;
        while let Some((due, ev)) = state.queue.pop() {
            self.dispatch(&mut state, due, ev)?;
        }
        Ok(state.trace)
    }

    pub fn run_paced(&self, clock: &dyn Clock) -> Result<(TraceLog, PacingReport), EngineError> {
        if self.scenario.pacing != Pacing::Realtime {
            return Err(EngineError::PacingMismatch);
        }
        let mut state = self.prepare()?;
        let origin = clock.now();
        let mut events = 0u64;
        let mut max_drift = 0;
        let mut total_drift: u128 = 0;
        let mut over = 0;
        let mut last_due = 0;
        while let Some((due, ev)) = state.queue.pop() {
            let target = origin + Duration::from_nanos(due);
            clock.sleep_until(target);
            let drift = clock.now().saturating_sub(target).as_nanos() as Nanos;
            events += 1;
            max_drift = max_drift.max(drift);
            total_drift += u128::from(drift);
            if drift > self.scenario.drift_bound_ns {
                over += 1;
            }
            last_due = due;
            self.dispatch(&mut state, due, ev)?;
        }
        let report = PacingReport {
            events,
            max_drift_ns: max_drift,
            mean_drift_ns: if events == 0 {
                0.0
            } else {
                total_drift as f64 / events as f64
            },
            virtual_elapsed_ns: last_due.max(self.scenario.duration_ns),
            wall_elapsed_ns: clock.now().saturating_sub(origin).as_nanos() as Nanos,
            drift_bound_ns: self.scenario.drift_bound_ns,
            events_over_bound: over,
        };
        Ok((state.trace, report))
    }

    fn networks(&self) -> u8 {
        let s = self.scenario;
        if s.topology.redundant && s.model != ModelLevel::TimedChannel {
            2
        } else {
            1
        }
    }

    fn prepare(&self) -> Result<RunState, EngineError> {
        let s = self.scenario;
        if s.duration_ns == 0 {
            return Err(EngineError::InvalidScenario("duration must be positive".into()));
        }
        if !(s.speed.is_finite() && s.speed > 0.0) {
            return Err(EngineError::InvalidScenario("speed must be a positive factor".into()));
        }
        let violations = s.topology.validate();
        if !violations.is_empty() {
            return Err(EngineError::InvalidTopology(violations));
        }
        let nets = self.networks();
        let mut vls = Vec::with_capacity(s.topology.vls.len());
        for spec in &s.topology.vls {
            let period = effective_period(spec.bag_ns(), s.speed);
            let periods = s.duration_ns.div_ceil(period);
            let mut rt = VlRuntime {
                spec: spec.clone(),
                period,
                periods,
                last_seq: None,
                pending_skips: 0,
                skips: s
                    .skipped_periods
                    .iter()
                    .filter(|f| f.vl_id == spec.vl_id)
                    .map(|f| f.period)
                    .collect(),
                jitter_rng: stream(s.seed, spec.vl_id, Purpose::Jitter, 0),
                channel_rngs: BTreeMap::new(),
                hop_rngs: (0..nets)
                    .map(|n| stream(s.seed, spec.vl_id, Purpose::Hop, u64::from(n)))
                    .collect(),
                channels: BTreeMap::new(),
                plan: SwitchedPlan::default(),
                entry: None,
                policers: BTreeMap::new(),
                redundancy: BTreeMap::new(),
            };
            match s.model {
                ModelLevel::TimedChannel | ModelLevel::DirectVl => {
                    for &dst in &spec.destinations {
                        let ch = s
                            .topology
                            .channel(spec.vl_id, dst)
                            .ok_or(EngineError::MissingBounds { vl: spec.vl_id, dst })?;
                        rt.channels.insert(dst, (ch.clone(), ChannelOccupancy::default()));
                        for n in 0..nets {
                            let detail = (u64::from(n) << 31) | u64::from(dst.0 & 0x7FFF_FFFF);
                            rt.channel_rngs
                                .insert((n, dst), stream(s.seed, spec.vl_id, Purpose::Channel, detail));
                        }
                    }
                }
                ModelLevel::SwitchedVl => {
                    rt.plan = plan_switched(&s.topology, spec, &s.constants)?;
                    rt.entry = s.topology.attachment(spec.source);
                    if s.policing {
                        let params = BucketParams::new(spec.s_max, period, spec.j_max_ns)
                            .map_err(|source| EngineError::Policing { vl: spec.vl_id, source })?;
                        for sw in s
                            .topology
                            .switches
                            .iter()
                            .filter(|sw| sw.policed_vls.contains(&spec.vl_id))
                        {
                            for n in 0..nets {
                                let state = match s.policer {
                                    PolicerKind::Automaton => Policer::Automaton(AutomatonState::initial(&params)),
                                    PolicerKind::Oracle => Policer::Oracle(OracleState::initial(&params)),
                                };
                                rt.policers.insert(
                                    (n, sw.id),
                                    PolicerSlot {
                                        params,
                                        state,
                                        generation: 0,
                                    },
                                );
                            }
                        }
                    }
                }
            }
            vls.push(rt);
        }

        let mut queue = EventQueue::default();
        for (i, rt) in vls.iter_mut().enumerate() {
            let t = self.emission_time(rt, 0);
            queue.push(t, Ev::Emit { vl: i, period: 0 });
        }
        for inj in &s.injections {
            let idx = vls
                .iter()
                .position(|v| v.spec.vl_id == inj.vl_id)
                .ok_or_else(|| EngineError::InvalidScenario(format!("injection on unknown VL {}", inj.vl_id)))?;
            queue.push(inj.at, Ev::Inject { vl: idx });
        }
        Ok(RunState {
            vls,
            queue,
            trace: TraceLog::default(),
        })
    }

    fn emission_time(&self, rt: &mut VlRuntime, period: u64) -> Nanos {
        let start = period * rt.period;
        if rt.skips.contains(&period) || self.scenario.model == ModelLevel::TimedChannel {
            return start;
        }
        start
            + self
                .sampler
                .sample(&mut rt.jitter_rng, Interval::new(0, rt.spec.j_max_ns))
    }

    fn dispatch(&self, st: &mut RunState, t: Nanos, ev: Ev) -> Result<(), EngineError> {
        match ev {
            Ev::Emit { vl, period } => {
                let next = period + 1;
                if next < st.vls[vl].periods {
                    let due = self.emission_time(&mut st.vls[vl], next);
                    st.queue.push(due, Ev::Emit { vl, period: next });
                }
                let rt = &mut st.vls[vl];
                if rt.skips.contains(&period) {
                    let seq = rt.seq_after_pending();
                    rt.pending_skips += 1;
                    for &dst in &rt.spec.destinations {
                        st.trace
                            .push(row(t, TraceKind::SkippedPeriod, &rt.spec, dst, seq, None));
                    }
                    return Ok(());
                }
                self.emit(st, vl, t)
            }
            Ev::Inject { vl } => self.emit(st, vl, t),
            Ev::ChannelExit { vl, dst, frame } => {
                let spec = &st.vls[vl].spec;
                st.trace.push(row(
                    t,
                    TraceKind::Delivered,
                    spec,
                    dst,
                    frame.seq_no,
                    Some(t - frame.emit_time),
                ));
                Ok(())
            }
            Ev::Deliver { vl, dst, frame } => {
                let rt = &mut st.vls[vl];
                let kind = if self.networks() > 1 {
                    let window = rt.spec.bag_ns();
                    match rt
                        .redundancy
                        .entry(dst)
                        .or_default()
                        .accept(rt.spec.vl_id, frame.seq_no, t, window)
                    {
                        RedundancyDecision::Accept => TraceKind::Delivered,
                        RedundancyDecision::Discard => TraceKind::DiscardedDup,
                    }
                } else {
                    TraceKind::Delivered
                };
                let latency = (kind == TraceKind::Delivered).then(|| t - frame.emit_time);
                st.trace.push(row(t, kind, &rt.spec, dst, frame.seq_no, latency));
                Ok(())
            }
            Ev::PolicingInternal {
                vl,
                net,
                switch,
                generation,
            } => {
                let vl_id = st.vls[vl].spec.vl_id;
                let slot = st.vls[vl].policers.get_mut(&(net, switch)).expect("policer exists");
                if slot.generation != generation {
                    return Ok(());
                }
                if let Policer::Automaton(s) = &slot.state {
                    let next = s
                        .advance(&slot.params, t)
                        .map_err(|source| EngineError::Policing { vl: vl_id, source })?;
                    slot.state = Policer::Automaton(next);
                }
                if let Some(d) = slot.deadline() {
                    slot.generation += 1;
                    let generation = slot.generation;
                    st.queue.push(
                        d,
                        Ev::PolicingInternal {
                            vl,
                            net,
                            switch,
                            generation,
                        },
                    );
                }
                Ok(())
            }
            Ev::HopForward {
                vl,
                net,
                switch,
                in_port,
                frame,
                targets,
            } => self.hop(st, t, vl, net, switch, in_port, frame, targets),
        }
    }

    fn emit(&self, st: &mut RunState, vl: usize, t: Nanos) -> Result<(), EngineError> {
        let nets = self.networks();
        let rt = &mut st.vls[vl];
        let seq = rt.seq_after_pending();
        rt.last_seq = Some(seq);
        rt.pending_skips = 0;
        let frame = Frame::new(&rt.spec, seq, t);
        for &dst in &rt.spec.destinations {
            st.trace.push(row(t, TraceKind::Emitted, &rt.spec, dst, seq, None));
        }
        match self.scenario.model {
            ModelLevel::TimedChannel => {
                for &dst in &rt.spec.destinations {
                    let (ch, occ) = rt.channels.get_mut(&dst).expect("channel prepared");
                    let rng = rt.channel_rngs.get_mut(&(0, dst)).expect("stream prepared");
                    let delay = channel_delay(ch, self.sampler.as_ref(), rng);
                    let exit = occ.enter(ch, t, delay)?;
                    st.queue.push(exit, Ev::ChannelExit { vl, dst, frame });
                }
            }
            ModelLevel::DirectVl => {
                for net in 0..nets {
                    for &dst in &rt.spec.destinations {
                        let (ch, _) = &rt.channels[&dst];
                        let rng = rt.channel_rngs.get_mut(&(net, dst)).expect("stream prepared");
                        let at = crate::models::rx_pipeline(ch, t, self.sampler.as_ref(), rng);
                        st.queue.push(at, Ev::Deliver { vl, dst, frame });
                    }
                }
            }
            ModelLevel::SwitchedVl => {
                let targets = rt.spec.destinations.clone();
                match rt.entry {
                    Some((switch, in_port)) => {
                        for net in 0..nets {
                            st.queue.push(
                                t,
                                Ev::HopForward {
                                    vl,
                                    net,
                                    switch,
                                    in_port,
                                    frame,
                                    targets: targets.clone(),
                                },
                            );
                        }
                    }
                    None => {
                        for dst in targets {
                            st.trace.push(row(t, TraceKind::Filtered, &rt.spec, dst, seq, None));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn hop(
        &self,
        st: &mut RunState,
        t: Nanos,
        vl: usize,
        net: u8,
        switch: SwitchId,
        in_port: PortId,
        frame: Frame,
        targets: Vec<EsId>,
    ) -> Result<(), EngineError> {
        let sw = self.scenario.topology.switch(switch).expect("validated wiring");
        let rt = &mut st.vls[vl];
        let vl_id = rt.spec.vl_id;
        if let Some(slot) = rt.policers.get_mut(&(net, switch)) {
            let decision = slot
                .on_frame(t)
                .map_err(|source| EngineError::Policing { vl: vl_id, source })?;
            if let Some(d) = slot.deadline() {
                slot.generation += 1;
                st.queue.push(
                    d,
                    Ev::PolicingInternal {
                        vl,
                        net,
                        switch,
                        generation: slot.generation,
                    },
                );
            }
            let kind = match decision {
                Decision::Accept => TraceKind::Accepted,
                Decision::Reject => TraceKind::Rejected,
            };
            for &dst in &targets {
                st.trace.push(row(t, kind, &rt.spec, dst, frame.seq_no, None));
            }
            if decision == Decision::Reject {
                return Ok(());
            }
        }
        let outs = match route(sw, in_port, frame.dest_mac()) {
            Ok(outs) => outs,
            Err(_) => {
                for &dst in &targets {
                    st.trace
                        .push(row(t, TraceKind::Filtered, &rt.spec, dst, frame.seq_no, None));
                }
                return Ok(());
            }
        };
        let mut covered = BTreeSet::new();
        for &out in outs {
            let Some(reach) = rt.plan.reach.get(&(switch, out)) else {
                continue;
            };
            let branch: Vec<EsId> = targets.iter().copied().filter(|d| reach.contains(d)).collect();
            if branch.is_empty() {
                continue;
            }
            let timing = rt.plan.hop_timing[&(switch, out)];
            let fwd = switched_hop(
                &timing,
                frame.size,
                t,
                &self.scenario.constants,
                self.sampler.as_ref(),
                &mut rt.hop_rngs[usize::from(net)],
            );
            covered.extend(branch.iter().copied());
            match sw.ports.get(&out) {
                Some(Peer::EndSystem(es)) => st.queue.push(fwd, Ev::Deliver { vl, dst: *es, frame }),
                Some(Peer::Switch { switch: next, port }) => st.queue.push(
                    fwd,
                    Ev::HopForward {
                        vl,
                        net,
                        switch: *next,
                        in_port: *port,
                        frame,
                        targets: branch,
                    },
                ),
                None => {}
            }
        }
        for dst in targets.into_iter().filter(|d| !covered.contains(d)) {
            st.trace
                .push(row(t, TraceKind::Filtered, &rt.spec, dst, frame.seq_no, None));
        }
        Ok(())
    }
}

struct RunState {
    vls: Vec<VlRuntime>,
    queue: EventQueue<Ev>,
    trace: TraceLog,
}

fn row(time: Nanos, kind: TraceKind, vl: &VirtualLinkSpec, dst: EsId, seq: u8, latency: Option<Nanos>) -> TraceEvent {
    TraceEvent {
        time,
        kind,
        vl_id: vl.vl_id,
        src: vl.source,
        dst,
        seq,
        latency,
    }
}
