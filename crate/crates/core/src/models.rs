//! Frame transport at the three abstraction levels: timed channels, direct
//! virtual links and switched virtual links, plus receiver-side redundancy
//! management.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::topology::{Interval, Peer, PortId, SwitchId, SwitchSpec, TimedChannelSpec, TopologySpec};
use crate::vl::{transmission_time, EsId, FrameSize, MacAddr, Nanos, NetworkConstants, VirtualLinkSpec, VlId};

/// Draws a delay from a closed interval.
pub trait DelaySampler {
    fn sample(&self, rng: &mut dyn RngCore, interval: Interval) -> Nanos;
}

/// Uniform draw over the closed interval.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformSampler;

impl DelaySampler for UniformSampler {
    fn sample(&self, rng: &mut dyn RngCore, interval: Interval) -> Nanos {
        if interval.min_ns >= interval.max_ns {
            interval.min_ns
        } else {
            rng.gen_range(interval.min_ns..=interval.max_ns)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("channel {channel}: frame entered at {entered} ns while the previous frame occupies it until {busy_until} ns")]
pub struct OccupancyViolation {
    pub channel: String,
    pub entered: Nanos,
    pub busy_until: Nanos,
}

/// Delay of one frame crossing a timed channel.
pub fn channel_delay(ch: &TimedChannelSpec, sampler: &dyn DelaySampler, rng: &mut dyn RngCore) -> Nanos {
    sampler.sample(rng, ch.bounds())
}

/// Tracks the single frame a timed channel may carry.
#[derive(Debug, Clone, Default)]
pub struct ChannelOccupancy {
    busy_until: Option<Nanos>,
}

impl ChannelOccupancy {
    /// Admits a frame entering at `t` and leaving after `delay`; returns its exit time.
    pub fn enter(&mut self, ch: &TimedChannelSpec, t: Nanos, delay: Nanos) -> Result<Nanos, OccupancyViolation> {
        if let Some(busy_until) = self.busy_until {
            if t < busy_until {
                return Err(OccupancyViolation {
                    channel: ch.label(),
                    entered: t,
                    busy_until,
                });
            }
        }
        let exit = t + delay;
        self.busy_until = Some(exit);
        Ok(exit)
    }
}

/// Emission period of a link once the speed factor is applied.
pub fn effective_period(bag_ns: Nanos, speed: f64) -> Nanos {
    assert!(
        speed > 0.0 && speed.is_finite(),
        "speed must be a positive finite factor"
    );
    ((bag_ns as f64) / speed).round().max(1.0) as Nanos
}

/// Emission time of period `i`: start of the (speed-scaled) period plus a jitter
/// drawn from `[0, j_max]`.
pub fn tx_pipeline(
    vl: &VirtualLinkSpec,
    i: u64,
    speed: f64,
    sampler: &dyn DelaySampler,
    rng: &mut dyn RngCore,
) -> Nanos {
    let start = i * effective_period(vl.bag_ns(), speed);
    start + sampler.sample(rng, Interval::new(0, vl.j_max_ns))
}

/// Delivery time at the end of a direct-link path.
pub fn rx_pipeline(
    path: &TimedChannelSpec,
    arrival: Nanos,
    sampler: &dyn DelaySampler,
    rng: &mut dyn RngCore,
) -> Nanos {
    arrival + sampler.sample(rng, path.bounds())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no flow entry for ({in_port}, {dest_mac})")]
pub struct Filtered {
    pub in_port: PortId,
    pub dest_mac: MacAddr,
}

/// Output ports of the unique entry matching `(in_port, dest_mac)` exactly.
pub fn route(sw: &SwitchSpec, in_port: PortId, dest_mac: MacAddr) -> Result<&[PortId], Filtered> {
    sw.flow_table
        .iter()
        .find(|e| e.in_port == in_port && e.match_dest_mac == dest_mac)
        .map(|e| e.out_ports.as_slice())
        .ok_or(Filtered { in_port, dest_mac })
}

/// Timing of one switch traversal toward one output port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopTiming {
    pub tech_latency: Interval,
    pub output_processing: Interval,
}

/// Time at which a frame that reached the switch at `t` leaves the output port.
pub fn switched_hop(
    hop: &HopTiming,
    frame_size: u32,
    t: Nanos,
    consts: &NetworkConstants,
    sampler: &dyn DelaySampler,
    rng: &mut dyn RngCore,
) -> Nanos {
    let tech = sampler.sample(rng, hop.tech_latency);
    let proc = sampler.sample(rng, hop.output_processing);
    t + tech + proc + transmission_time(FrameSize::from_bytes(frame_size), consts)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalibrationError {
    #[error(
        "VL {vl} -> {dst}: bounds [{bctt}, {wctt}] ns cannot absorb {hops} hops of transmission and processing time"
    )]
    Infeasible {
        vl: VlId,
        dst: EsId,
        bctt: Nanos,
        wctt: Nanos,
        hops: usize,
    },
    #[error("VL {vl}: hop at {switch} port {port} serves paths with disjoint latency windows")]
    Conflict { vl: VlId, switch: SwitchId, port: PortId },
}

/// Splits the end-to-end window evenly over `hops` hops, leaving room for the
/// per-hop transmission time and the worst output processing time, so that
/// any combination of draws lands inside `[bctt, wctt]`.
pub fn calibrate_hops(bounds: Interval, hops: usize, tx_per_hop: Nanos, processing_max: Nanos) -> Option<Interval> {
    let h = hops as Nanos;
    if h == 0 {
        return None;
    }
    let fixed = h * tx_per_hop;
    let lo = bounds.min_ns.checked_sub(fixed)?.div_ceil(h);
    let hi = (bounds.max_ns.checked_sub(fixed)? / h).checked_sub(processing_max)?;
    (lo <= hi).then_some(Interval::new(lo, hi))
}

/// One switch crossing on a VL path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathHop {
    pub switch: SwitchId,
    pub in_port: PortId,
    pub out_port: PortId,
}

/// Follows the flow tables from the source's attachment point to `dst`.
/// Returns `None` when the tables never deliver the VL to `dst`.
pub fn trace_path(topo: &TopologySpec, vl: &VirtualLinkSpec, dst: EsId) -> Option<Vec<PathHop>> {
    let (sw, port) = topo.attachment(vl.source)?;
    let mut visited = BTreeSet::new();
    let mut hops = Vec::new();
    walk(topo, vl, dst, sw, port, &mut visited, &mut hops).then_some(hops)
}

fn walk(
    topo: &TopologySpec,
    vl: &VirtualLinkSpec,
    dst: EsId,
    sw_id: SwitchId,
    in_port: PortId,
    visited: &mut BTreeSet<(SwitchId, PortId)>,
    hops: &mut Vec<PathHop>,
) -> bool {
    if !visited.insert((sw_id, in_port)) {
        return false;
    }
    let Some(sw) = topo.switch(sw_id) else { return false };
    let Ok(outs) = route(sw, in_port, crate::vl::encode_dest_mac(vl.vl_id)) else {
        return false;
    };
    for &out in outs {
        hops.push(PathHop {
            switch: sw_id,
            in_port,
            out_port: out,
        });
        match sw.ports.get(&out) {
            Some(Peer::EndSystem(es)) if *es == dst => return true,
            Some(Peer::Switch { switch, port }) if walk(topo, vl, dst, *switch, *port, visited, hops) => return true,
            _ => {}
        }
        hops.pop();
    }
    false
}

/// Destinations of `vl` reachable through `(switch, out_port)`.
pub type Reachability = BTreeMap<(SwitchId, PortId), BTreeSet<EsId>>;

/// Per-hop timing and reachability of a VL across the switched network.
#[derive(Debug, Clone, Default)]
pub struct SwitchedPlan {
    pub hop_timing: BTreeMap<(SwitchId, PortId), HopTiming>,
    pub reach: Reachability,
    /// Destinations with no configured route.
    pub unreachable: Vec<EsId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("VL {vl}: source end system {es} is not wired to any switch")]
    Detached { vl: VlId, es: EsId },
    #[error("VL {vl} -> {dst}: no traversal bounds and switch {switch} has no tech_latency")]
    MissingBounds { vl: VlId, dst: EsId, switch: SwitchId },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Builds hop timings for `vl`. Switches with an explicit `tech_latency` use
/// it; the others are calibrated from the path's traversal bounds.
pub fn plan_switched(
    topo: &TopologySpec,
    vl: &VirtualLinkSpec,
    consts: &NetworkConstants,
) -> Result<SwitchedPlan, PlanError> {
    if topo.attachment(vl.source).is_none() {
        return Err(PlanError::Detached {
            vl: vl.vl_id,
            es: vl.source,
        });
    }
    let tx = transmission_time(FrameSize::from_bytes(vl.s_max.ceil_bytes()), consts);
    let mut plan = SwitchedPlan::default();
    for &dst in &vl.destinations {
        let Some(path) = trace_path(topo, vl, dst) else {
            plan.unreachable.push(dst);
            continue;
        };
        let needs_calibration = path
            .iter()
            .any(|h| topo.switch(h.switch).is_some_and(|s| s.tech_latency.is_none()));
        let calibrated = if needs_calibration {
            let ch = topo.channel(vl.vl_id, dst).ok_or_else(|| PlanError::MissingBounds {
                vl: vl.vl_id,
                dst,
                switch: path
                    .iter()
                    .find(|h| topo.switch(h.switch).is_some_and(|s| s.tech_latency.is_none()))
                    .map(|h| h.switch)
                    .expect("at least one uncalibrated hop"),
            })?;
            let p_max = path
                .iter()
                .filter_map(|h| topo.switch(h.switch))
                .map(|s| s.output_processing.max_ns)
                .max()
                .unwrap_or(0);
            Some(
                calibrate_hops(ch.bounds(), path.len(), tx, p_max).ok_or(CalibrationError::Infeasible {
                    vl: vl.vl_id,
                    dst,
                    bctt: ch.bctt_ns,
                    wctt: ch.wctt_ns,
                    hops: path.len(),
                })?,
            )
        } else {
            None
        };
        for hop in &path {
            let sw = topo.switch(hop.switch).expect("hop on a known switch");
            let tech = sw.tech_latency.or(calibrated).expect("calibrated when absent");
            let key = (hop.switch, hop.out_port);
            plan.reach.entry(key).or_default().insert(dst);
            match plan.hop_timing.get_mut(&key) {
                Some(existing) => {
                    existing.tech_latency =
                        existing
                            .tech_latency
                            .intersect(&tech)
                            .ok_or(CalibrationError::Conflict {
                                vl: vl.vl_id,
                                switch: hop.switch,
                                port: hop.out_port,
                            })?;
                }
                None => {
                    plan.hop_timing.insert(
                        key,
                        HopTiming {
                            tech_latency: tech,
                            output_processing: sw.output_processing,
                        },
                    );
                }
            }
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedundancyDecision {
    Accept,
    Discard,
}

/// Receiver-side first-valid-wins filter, one per (VL, receiving end system).
#[derive(Debug, Clone, Default)]
pub struct RedundancyState {
    last: BTreeMap<VlId, (u8, Nanos)>,
}

impl RedundancyState {
    /// Accepts the first copy of each sequence number; a copy with the same
    /// number arriving within `window` of the accepted one is discarded.
    pub fn accept(&mut self, vl: VlId, seq: u8, t: Nanos, window: Nanos) -> RedundancyDecision {
        if let Some(&(last_seq, last_t)) = self.last.get(&vl) {
            if last_seq == seq && t.saturating_sub(last_t) <= window {
                return RedundancyDecision::Discard;
            }
        }
        self.last.insert(vl, (seq, t));
        RedundancyDecision::Accept
    }
}

pub fn redundancy_accept(state: &mut RedundancyState, vl: &VirtualLinkSpec, seq: u8, t: Nanos) -> RedundancyDecision {
    state.accept(vl.vl_id, seq, t, vl.bag_ns())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::FlowEntry;
    use crate::vl::{NS_PER_MS, NS_PER_US};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn channel(bctt_us: u64, wctt_us: u64) -> TimedChannelSpec {
        TimedChannelSpec {
            name: Some("C1".into()),
            vl_id: VlId(1),
            source: EsId(1),
            destination: EsId(3),
            bctt_ns: bctt_us * NS_PER_US,
            wctt_ns: wctt_us * NS_PER_US,
        }
    }

    fn vl1() -> VirtualLinkSpec {
        VirtualLinkSpec {
            vl_id: VlId(1),
            source: EsId(1),
            destinations: vec![EsId(3), EsId(4)],
            bag_ms: 32,
            s_max: FrameSize::from_bytes(75),
            j_max_ns: 47_600,
        }
    }

    #[test]
    fn channel_delay_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c1 = channel(298, 444);
        let c9 = channel(150, 156);
        for _ in 0..1000 {
            assert!(c1.bounds().contains(channel_delay(&c1, &UniformSampler, &mut rng)));
            assert!(c9.bounds().contains(channel_delay(&c9, &UniformSampler, &mut rng)));
        }
        let fixed = channel(200, 200);
        assert_eq!(channel_delay(&fixed, &UniformSampler, &mut rng), 200_000);
    }

    #[test]
    fn channel_carries_one_frame_at_a_time() {
        let c = channel(298, 444);
        let mut occ = ChannelOccupancy::default();
        let exit = occ.enter(&c, 0, 300_000).unwrap();
        assert_eq!(exit, 300_000);
        let err = occ.enter(&c, 299_999, 1).unwrap_err();
        assert_eq!(err.busy_until, 300_000);
        assert!(err.to_string().contains("C1"));
        assert!(occ.enter(&c, 300_000, 1).is_ok());
    }

    #[test]
    fn tx_pipeline_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = vl1();
        struct Zero;
        impl DelaySampler for Zero {
            fn sample(&self, _: &mut dyn RngCore, i: Interval) -> Nanos {
                i.min_ns
            }
        }
        assert_eq!(tx_pipeline(&v, 0, 1.0, &Zero, &mut rng), 0);
        for _ in 0..200 {
            let t = tx_pipeline(&v, 3, 1.0, &UniformSampler, &mut rng);
            assert!((96 * NS_PER_MS..=96 * NS_PER_MS + 47_600).contains(&t));
            let t = tx_pipeline(&v, 3, 2.0, &UniformSampler, &mut rng);
            assert!((48 * NS_PER_MS..=48 * NS_PER_MS + 47_600).contains(&t));
        }
    }

    #[test]
    fn rx_pipeline_draws_independently_and_deterministically() {
        let c = channel(298, 444);
        let draws = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| rx_pipeline(&c, 1_000, &UniformSampler, &mut rng))
                .collect::<Vec<_>>()
        };
        let a = draws(9);
        assert_eq!(a, draws(9));
        assert!(a.iter().all(|d| (299_000..=445_000).contains(d)));
        assert!(a.windows(2).any(|w| w[0] != w[1]));
        let degenerate = channel(100, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(rx_pipeline(&degenerate, 5, &UniformSampler, &mut rng), 100_005);
    }

    fn one_switch() -> SwitchSpec {
        let mut sw = SwitchSpec::new(SwitchId(1));
        sw.flow_table.push(FlowEntry::for_vl(1, VlId(1), vec![2, 3]));
        sw
    }

    #[test]
    fn routing_is_exact_match() {
        let sw = one_switch();
        let mac = crate::vl::encode_dest_mac(VlId(1));
        assert_eq!(route(&sw, 1, mac).unwrap(), &[2, 3]);
        assert!(route(&sw, 1, crate::vl::encode_dest_mac(VlId(2))).is_err());
        assert_eq!(
            route(&sw, 2, mac),
            Err(Filtered {
                in_port: 2,
                dest_mac: mac
            })
        );
    }

    #[test]
    fn switched_hop_degenerate() {
        let c = NetworkConstants::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zero = HopTiming {
            tech_latency: Interval::ZERO,
            output_processing: Interval::ZERO,
        };
        let t1 = switched_hop(&zero, 75, 0, &c, &UniformSampler, &mut rng);
        let t2 = switched_hop(&zero, 75, t1, &c, &UniformSampler, &mut rng);
        assert_eq!(t2, 15_200);
        let fixed = HopTiming {
            tech_latency: Interval::exactly(5_000),
            output_processing: Interval::ZERO,
        };
        assert_eq!(
            switched_hop(&fixed, 75, 100, &c, &UniformSampler, &mut rng),
            100 + 5_000 + 7_600
        );
    }

    #[test]
    fn calibration_keeps_end_to_end_in_bounds() {
        let b = Interval::new(298_000, 444_000);
        let hop = calibrate_hops(b, 2, 7_600, 100).unwrap();
        assert_eq!(hop, Interval::new(141_400, 214_300));
        assert!(2 * (hop.min_ns + 7_600) >= b.min_ns);
        assert!(2 * (hop.max_ns + 100 + 7_600) <= b.max_ns);
        assert_eq!(calibrate_hops(Interval::new(10, 20), 1, 50, 0), None);
        assert_eq!(calibrate_hops(b, 0, 0, 0), None);
    }

    #[test]
    fn redundancy_first_valid_wins() {
        let v = vl1();
        let mut st = RedundancyState::default();
        assert_eq!(redundancy_accept(&mut st, &v, 5, 1_000), RedundancyDecision::Accept);
        assert_eq!(redundancy_accept(&mut st, &v, 5, 2_000), RedundancyDecision::Discard);
        let mut solo = RedundancyState::default();
        assert_eq!(redundancy_accept(&mut solo, &v, 5, 0), RedundancyDecision::Accept);
        let later = v.bag_ns() + 1;
        assert_eq!(redundancy_accept(&mut solo, &v, 5, later), RedundancyDecision::Accept);
    }
}
