//! Runtime monitors: latency bounds, emission jitter classes and sequence-gap
//! drop counting. Each monitor is a pure function; [`MonitorState`] folds them
//! over a stream of trace events, either online or over a stored trace.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{PathKey, TraceEvent, TraceKind, TraceLog, TRACE_HEADER};
use crate::models::effective_period;
use crate::topology::{Interval, TopologySpec};
use crate::vl::{Nanos, VlId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum JitterClass {
    TooEarly,
    Ok,
    TooLate,
    SkippedPeriod,
}

impl JitterClass {
    pub const ALL: [JitterClass; 4] = [
        JitterClass::TooEarly,
        JitterClass::Ok,
        JitterClass::TooLate,
        JitterClass::SkippedPeriod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JitterClass::TooEarly => "too_early",
            JitterClass::Ok => "ok",
            JitterClass::TooLate => "too_late",
            JitterClass::SkippedPeriod => "skipped_period",
        }
    }
}

impl fmt::Display for JitterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies the emission of period `i` against the window
/// `[i*P, i*P + j_max]`. Returns the class and the signed jitter `emit - i*P`.
pub fn classify_jitter(i: u64, emit: Nanos, period: Nanos, j_max: Nanos) -> (JitterClass, i64) {
    let jitter = i128::from(emit) - i128::from(i) * i128::from(period);
    let class = if jitter < 0 {
        JitterClass::TooEarly
    } else if jitter <= i128::from(j_max) {
        JitterClass::Ok
    } else if jitter < i128::from(period) {
        JitterClass::TooLate
    } else {
        JitterClass::SkippedPeriod
    };
    (class, jitter.clamp(i64::MIN.into(), i64::MAX.into()) as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LatencyVerdict {
    BelowBcTT(Nanos),
    InBounds(Nanos),
    AboveWcTT(Nanos),
}

impl LatencyVerdict {
    pub fn latency(self) -> Nanos {
        match self {
            LatencyVerdict::BelowBcTT(l) | LatencyVerdict::InBounds(l) | LatencyVerdict::AboveWcTT(l) => l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("reception at {recv} ns precedes emission at {emit} ns")]
pub struct ClockFault {
    pub emit: Nanos,
    pub recv: Nanos,
}

/// Compares `recv - emit` with the closed interval `[bctt, wctt]`.
pub fn check_latency(emit: Nanos, recv: Nanos, bounds: Interval) -> Result<LatencyVerdict, ClockFault> {
    let latency = recv.checked_sub(emit).ok_or(ClockFault { emit, recv })?;
    Ok(if latency < bounds.min_ns {
        LatencyVerdict::BelowBcTT(latency)
    } else if latency > bounds.max_ns {
        LatencyVerdict::AboveWcTT(latency)
    } else {
        LatencyVerdict::InBounds(latency)
    })
}

/// Frames missing between two consecutive receptions. A `0` is a start
/// marker: it restarts the count and is followed by `1`.
fn gap(prev: u8, cur: u8) -> u64 {
    if cur == 0 {
        return 0;
    }
    if prev == 0 {
        return u64::from(cur) - 1;
    }
    let steps = (u64::from(cur) + 255 - u64::from(prev)) % 255;
    steps.saturating_sub(1)
}

/// Lost frames implied by the sequence numbers of consecutive receptions.
pub fn count_drops(seqs: &[u8]) -> u64 {
    seqs.windows(2).map(|w| gap(w[0], w[1])).sum()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DropCount {
    pub lost: u64,
    /// Reception pairs further apart than 254 periods; their gap may hide
    /// whole sequence cycles.
    pub aliasing_warnings: u64,
}

/// [`count_drops`] over `(arrival time, seq)` pairs, flagging gaps too long for
/// the sequence numbers to resolve.
pub fn count_drops_timed(arrivals: &[(Nanos, u8)], period: Nanos) -> DropCount {
    let mut out = DropCount::default();
    for w in arrivals.windows(2) {
        out.lost += gap(w[0].1, w[1].1);
        if w[1].0.saturating_sub(w[0].0) > 254 * period {
            out.aliasing_warnings += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub speed: f64,
    /// Percent of the run discarded at each end of the time axis.
    pub trim_percent: f64,
    /// Span used for trimming; the last event time when absent.
    pub duration_ns: Option<Nanos>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            speed: 1.0,
            trim_percent: 0.0,
            duration_ns: None,
        }
    }
}

/// Closed analysis window `[lo, hi]` after trimming `percent` off each end.
pub fn trim_window(span: Nanos, percent: f64) -> (Nanos, Nanos) {
    let cut = (span as f64 * percent / 100.0).round() as Nanos;
    (cut.min(span), span.saturating_sub(cut).max(cut.min(span)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LatencySummary {
    pub count: u64,
    pub min_ns: Option<Nanos>,
    pub max_ns: Option<Nanos>,
    pub mean_ns: Option<f64>,
    pub below_bctt: u64,
    pub above_wctt: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PathSummary {
    pub vl_id: VlId,
    pub src: u32,
    pub dst: u32,
    pub channel: Option<String>,
    pub emitted: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub filtered: u64,
    pub delivered: u64,
    pub discarded_dup: u64,
    pub skipped_periods: u64,
    pub latency: LatencySummary,
    pub jitter: BTreeMap<JitterClass, u64>,
    pub drops: DropCount,
    /// Terminal outcomes per emitted frame: 1, or 2 on a redundant network.
    pub networks: u64,
    pub conserved: bool,
    #[serde(skip)]
    pub latencies: Vec<Nanos>,
    #[serde(skip)]
    pub jitters: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedFrame {
    pub event: TraceEvent,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MonitorReport {
    pub window_ns: (Nanos, Nanos),
    pub paths: Vec<PathSummary>,
    #[serde(skip)]
    pub flagged: Vec<FlaggedFrame>,
    pub flagged_count: usize,
    pub clock_faults: u64,
}

struct JitterTrack {
    period: Nanos,
    j_max: Nanos,
    next_index: Option<u64>,
}

impl JitterTrack {
    fn nearest(&self, t: Nanos) -> u64 {
        (t + self.period / 2) / self.period
    }

    fn skip(&mut self, t: Nanos) {
        let i = self.next_index.unwrap_or_else(|| self.nearest(t));
        self.next_index = Some(i + 1);
    }

    fn observe(&mut self, emit: Nanos) -> (JitterClass, i64) {
        let mut i = self.next_index.unwrap_or_else(|| self.nearest(emit));
        if i128::from(emit) < i128::from(i) * i128::from(self.period) - i128::from(self.period / 2) {
            i = self.nearest(emit);
        }
        let (class, jitter) = classify_jitter(i, emit, self.period, self.j_max);
        let landed = if class == JitterClass::SkippedPeriod {
            emit / self.period
        } else {
            i
        };
        self.next_index = Some(landed + 1);
        (class, jitter)
    }
}

struct PathState {
    summary: PathSummary,
    bounds: Option<Interval>,
    jitter: Option<JitterTrack>,
    arrivals: Vec<(Nanos, u8)>,
    latency_sum: u128,
}

/// Online monitor: feed events in time order, then call [`MonitorState::finish`].
pub struct MonitorState<'a> {
    topology: &'a TopologySpec,
    options: ReportOptions,
    window: (Nanos, Nanos),
    paths: BTreeMap<PathKey, PathState>,
    flagged: Vec<FlaggedFrame>,
    clock_faults: u64,
}

impl<'a> MonitorState<'a> {
    /// `window` restricts latency and jitter statistics; counts always cover
    /// the whole stream.
    pub fn new(topology: &'a TopologySpec, options: ReportOptions, window: (Nanos, Nanos)) -> Self {
        MonitorState {
            topology,
            options,
            window,
            paths: BTreeMap::new(),
            flagged: Vec::new(),
            clock_faults: 0,
        }
    }

    fn path(&mut self, key: PathKey) -> &mut PathState {
        let topo = self.topology;
        let speed = self.options.speed;
        self.paths.entry(key).or_insert_with(|| {
            let channel = topo.channel(key.vl_id, key.dst);
            let jitter = topo.vl(key.vl_id).map(|v| JitterTrack {
                period: effective_period(v.bag_ns(), speed),
                j_max: v.j_max_ns,
                next_index: None,
            });
            PathState {
                summary: PathSummary {
                    vl_id: key.vl_id,
                    src: key.src.0,
                    dst: key.dst.0,
                    channel: channel.map(|c| c.label()),
                    ..PathSummary::default()
                },
                bounds: channel.map(|c| c.bounds()),
                jitter,
                arrivals: Vec::new(),
                latency_sum: 0,
            }
        })
    }

    pub fn observe(&mut self, e: &TraceEvent) {
        let in_window = e.time >= self.window.0 && e.time <= self.window.1;
        let mut flags: Vec<&'static str> = Vec::new();
        let mut fault = false;
        let p = self.path(e.path());
        let s = &mut p.summary;
        match e.kind {
            TraceKind::Emitted => {
                s.emitted += 1;
                if let Some(track) = p.jitter.as_mut() {
                    let (class, jitter) = track.observe(e.time);
                    if in_window {
                        *s.jitter.entry(class).or_default() += 1;
                        s.jitters.push(jitter);
                        match class {
                            JitterClass::Ok => {}
                            JitterClass::TooEarly => flags.push("jitter_too_early"),
                            JitterClass::TooLate => flags.push("jitter_too_late"),
                            JitterClass::SkippedPeriod => flags.push("jitter_skipped_period"),
                        }
                    }
                }
            }
            TraceKind::SkippedPeriod => {
                s.skipped_periods += 1;
                if let Some(track) = p.jitter.as_mut() {
                    track.skip(e.time);
                }
                if in_window {
                    *s.jitter.entry(JitterClass::SkippedPeriod).or_default() += 1;
                    flags.push("skipped_period");
                }
            }
            TraceKind::Accepted => s.accepted += 1,
            TraceKind::Rejected => {
                s.rejected += 1;
                flags.push("policing_rejected");
            }
            TraceKind::Filtered => {
                s.filtered += 1;
                flags.push("filtered");
            }
            TraceKind::DiscardedDup => s.discarded_dup += 1,
            TraceKind::Delivered => {
                s.delivered += 1;
                p.arrivals.push((e.time, e.seq));
                if in_window {
                    let latency = e.latency.unwrap_or(0);
                    match e.time.checked_sub(latency) {
                        None => fault = true,
                        Some(emit) => {
                            s.latencies.push(latency);
                            p.latency_sum += u128::from(latency);
                            let l = &mut s.latency;
                            l.count += 1;
                            l.min_ns = Some(l.min_ns.map_or(latency, |m| m.min(latency)));
                            l.max_ns = Some(l.max_ns.map_or(latency, |m| m.max(latency)));
                            if let Some(b) = p.bounds {
                                match check_latency(emit, e.time, b) {
                                    Ok(LatencyVerdict::BelowBcTT(_)) => {
                                        l.below_bctt += 1;
                                        flags.push("below_bctt");
                                    }
                                    Ok(LatencyVerdict::AboveWcTT(_)) => {
                                        l.above_wctt += 1;
                                        flags.push("above_wctt");
                                    }
                                    Ok(LatencyVerdict::InBounds(_)) => {}
                                    Err(_) => fault = true,
                                }
                            }
                        }
                    }
                }
            }
        }
        if fault {
            self.clock_faults += 1;
            flags.push("clock_fault");
        }
        self.flagged
            .extend(flags.into_iter().map(|reason| FlaggedFrame { event: *e, reason }));
    }

    pub fn finish(self) -> MonitorReport {
        let redundant = self.topology.redundant;
        let paths = self
            .paths
            .into_values()
            .map(|mut p| {
                let s = &mut p.summary;
                if s.latency.count > 0 {
                    s.latency.mean_ns = Some(p.latency_sum as f64 / s.latency.count as f64);
                }
                let period = p.jitter.as_ref().map_or(Nanos::MAX / 255, |j| j.period);
                s.drops = count_drops_timed(&p.arrivals, period);
                let outcomes = s.delivered + s.rejected + s.filtered + s.discarded_dup;
                s.networks = if redundant && outcomes == 2 * s.emitted && s.emitted > 0 {
                    2
                } else {
                    1
                };
                s.conserved = outcomes == s.networks * s.emitted;
                p.summary
            })
            .collect();
        MonitorReport {
            window_ns: self.window,
            paths,
            flagged_count: self.flagged.len(),
            flagged: self.flagged,
            clock_faults: self.clock_faults,
        }
    }
}

/// Aggregates all monitors over a stored trace.
pub fn monitor_report(trace: &TraceLog, topology: &TopologySpec, options: &ReportOptions) -> MonitorReport {
    let span = options
        .duration_ns
        .unwrap_or_else(|| trace.events.iter().map(|e| e.time).max().unwrap_or(0));
    let window = trim_window(span, options.trim_percent);
    let mut events: Vec<&TraceEvent> = trace.events.iter().collect();
    // Stable: rows of the same instant keep their recorded order.
    events.sort_by_key(|e| e.time);
    let mut state = MonitorState::new(topology, *options, window);
    for e in events {
        state.observe(e);
    }
    state.finish()
}

impl MonitorReport {
    pub fn total(&self, f: impl Fn(&PathSummary) -> u64) -> u64 {
        self.paths.iter().map(f).sum()
    }

    pub fn path(&self, vl: VlId, dst: u32) -> Option<&PathSummary> {
        self.paths.iter().find(|p| p.vl_id == vl && p.dst == dst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flagged frames in the trace CSV layout with an extra `reason` column.
    pub fn flagged_csv(&self) -> String {
        let mut out = format!("{TRACE_HEADER},reason\n");
        for f in &self.flagged {
            let mut row = Vec::new();
            f.event.write_csv_row(&mut row).expect("in-memory write");
            let row = String::from_utf8(row).expect("ASCII row");
            let _ = writeln!(out, "{},{}", row.trim_end(), f.reason);
        }
        out
    }

    /// Aligned text table, one line per path.
    pub fn to_table(&self) -> String {
        let header = [
            "path",
            "channel",
            "emit",
            "deliv",
            "rej",
            "filt",
            "dup",
            "skip",
            "lat_min_us",
            "lat_max_us",
            "lat_mean_us",
            "<bctt",
            ">wctt",
            "j_early",
            "j_ok",
            "j_late",
            "j_skip",
            "drops",
            "ok",
        ];
        let us = |v: Option<Nanos>| v.map_or("-".to_string(), crate::vl::format_us);
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
        for p in &self.paths {
            let j = |c: JitterClass| p.jitter.get(&c).copied().unwrap_or(0).to_string();
            rows.push(vec![
                format!("VL{} {}->{}", p.vl_id, p.src, p.dst),
                p.channel.clone().unwrap_or_else(|| "-".into()),
                p.emitted.to_string(),
                p.delivered.to_string(),
                p.rejected.to_string(),
                p.filtered.to_string(),
                p.discarded_dup.to_string(),
                p.skipped_periods.to_string(),
                us(p.latency.min_ns),
                us(p.latency.max_ns),
                p.latency.mean_ns.map_or("-".into(), |m| format!("{:.3}", m / 1000.0)),
                p.latency.below_bctt.to_string(),
                p.latency.above_wctt.to_string(),
                j(JitterClass::TooEarly),
                j(JitterClass::Ok),
                j(JitterClass::TooLate),
                j(JitterClass::SkippedPeriod),
                p.drops.lost.to_string(),
                if p.conserved { "yes" } else { "NO" }.into(),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, w))| if c < 2 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vl::{NS_PER_MS, NS_PER_US};
    use proptest::prelude::*;

    const BAG: Nanos = 32 * NS_PER_MS;
    const JMAX: Nanos = 47_600;

    #[test]
    fn jitter_examples() {
        assert_eq!(classify_jitter(3, 96_020_000, BAG, JMAX), (JitterClass::Ok, 20_000));
        assert_eq!(classify_jitter(3, 95_900_000, BAG, JMAX).0, JitterClass::TooEarly);
        assert_eq!(classify_jitter(3, 96_100_000, BAG, JMAX).0, JitterClass::TooLate);
        assert_eq!(classify_jitter(3, 128_500_000, BAG, JMAX).0, JitterClass::SkippedPeriod);
    }

    #[test]
    fn jitter_edges() {
        let base = 3 * BAG;
        assert_eq!(classify_jitter(3, base - 1, BAG, JMAX).0, JitterClass::TooEarly);
        assert_eq!(classify_jitter(3, base, BAG, JMAX).0, JitterClass::Ok);
        assert_eq!(classify_jitter(3, base + JMAX, BAG, JMAX).0, JitterClass::Ok);
        assert_eq!(classify_jitter(3, base + JMAX + 1, BAG, JMAX).0, JitterClass::TooLate);
        assert_eq!(classify_jitter(3, base + BAG - 1, BAG, JMAX).0, JitterClass::TooLate);
        assert_eq!(classify_jitter(3, base + BAG, BAG, JMAX).0, JitterClass::SkippedPeriod);
        // Half speed doubles the nominal period.
        let p = effective_period(BAG, 0.5);
        assert_eq!(classify_jitter(1, 64 * NS_PER_MS + 10, p, JMAX).0, JitterClass::Ok);
    }

    #[test]
    fn latency_examples() {
        let c1 = Interval::new(298 * NS_PER_US, 444 * NS_PER_US);
        assert_eq!(check_latency(0, 350_000, c1), Ok(LatencyVerdict::InBounds(350_000)));
        assert_eq!(check_latency(0, 444_000, c1), Ok(LatencyVerdict::InBounds(444_000)));
        assert_eq!(check_latency(0, 444_001, c1), Ok(LatencyVerdict::AboveWcTT(444_001)));
        assert_eq!(check_latency(0, 200_000, c1), Ok(LatencyVerdict::BelowBcTT(200_000)));
        assert_eq!(check_latency(10, 5, c1), Err(ClockFault { emit: 10, recv: 5 }));
    }

    #[test]
    fn drop_examples() {
        assert_eq!(count_drops(&[1, 2, 3, 5]), 1);
        assert_eq!(count_drops(&[254, 255, 1]), 0);
        assert_eq!(count_drops(&[255, 3]), 2);
        assert_eq!(count_drops(&[0, 1, 2]), 0);
        assert_eq!(count_drops(&[0, 2]), 1);
        assert_eq!(count_drops(&[]), 0);
        assert_eq!(count_drops(&[7]), 0);
        // A restart marker mid-stream resets the count.
        assert_eq!(count_drops(&[10, 0, 1]), 0);
    }

    #[test]
    fn aliasing_is_flagged() {
        let p = NS_PER_MS;
        let r = count_drops_timed(&[(0, 5), (255 * p, 5)], p);
        assert_eq!(
            r,
            DropCount {
                lost: 0,
                aliasing_warnings: 1
            }
        );
        let r = count_drops_timed(&[(0, 5), (p, 7)], p);
        assert_eq!(
            r,
            DropCount {
                lost: 1,
                aliasing_warnings: 0
            }
        );
    }

    #[test]
    fn trim_window_arithmetic() {
        assert_eq!(trim_window(60 * 1_000_000_000, 10.0), (6_000_000_000, 54_000_000_000));
        assert_eq!(trim_window(100, 0.0), (0, 100));
        assert_eq!(trim_window(100, 60.0), (60, 60));
    }

    #[test]
    fn empty_trace_gives_empty_report() {
        let r = monitor_report(
            &TraceLog::default(),
            &TopologySpec::default(),
            &ReportOptions::default(),
        );
        assert!(r.paths.is_empty());
        assert!(r.flagged.is_empty());
    }

    fn rotate(s: u8, r: u8) -> u8 {
        if s == 0 {
            0
        } else {
            ((u16::from(s) - 1 + u16::from(r)) % 255 + 1) as u8
        }
    }

    proptest! {
        #[test]
        fn classes_partition(i in 0u64..10_000, off in -40_000_000i64..80_000_000, bag_idx in 0usize..8, jfrac in 1u64..1000) {
            let period = u64::from(crate::vl::BAG_VALUES_MS[bag_idx]) * NS_PER_MS;
            let j_max = (period * jfrac / 1000).min(500_000).min(period - 1).max(1);
            let emit = (i128::from(i) * i128::from(period) + i128::from(off)).max(0) as u64;
            let (class, jitter) = classify_jitter(i, emit, period, j_max);
            let hits = [
                jitter < 0,
                (0..=j_max as i64).contains(&jitter),
                jitter > j_max as i64 && jitter < period as i64,
                jitter >= period as i64,
            ];
            prop_assert_eq!(hits.iter().filter(|h| **h).count(), 1);
            prop_assert!(hits[JitterClass::ALL.iter().position(|c| *c == class).unwrap()]);
        }

        #[test]
        fn drops_are_rotation_invariant(start in 1u8..=255, steps in proptest::collection::vec(1u8..20, 0..50), r in 0u8..255) {
            let mut seqs = vec![start];
            for s in steps {
                let mut cur = *seqs.last().unwrap();
                for _ in 0..s {
                    cur = crate::vl::next_seq(cur);
                }
                seqs.push(cur);
            }
            let rotated: Vec<u8> = seqs.iter().map(|&s| rotate(s, r)).collect();
            prop_assert_eq!(count_drops(&seqs), count_drops(&rotated));
        }

        #[test]
        fn drops_match_removed_frames(n in 2usize..600, holes in proptest::collection::btree_set(1usize..599, 0..40)) {
            let mut seq = 0u8;
            let mut all = Vec::with_capacity(n);
            for _ in 0..n {
                all.push(seq);
                seq = crate::vl::next_seq(seq);
            }
            let holes: Vec<usize> = holes.into_iter().filter(|&h| h < n - 1).collect();
            let kept: Vec<u8> = all.iter().enumerate().filter(|(i, _)| !holes.contains(i)).map(|(_, s)| *s).collect();
            prop_assert_eq!(count_drops(&kept), holes.len() as u64);
        }
    }
}
