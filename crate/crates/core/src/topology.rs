//! Network description: end systems, virtual links, switches with their flow
//! tables and port wiring, and per-path traversal bounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vl::{decode_dest_mac, encode_dest_mac, validate_vl, EsId, MacAddr, Nanos, VirtualLinkSpec, VlId};

pub type PortId = u16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SwitchId(pub u32);

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

/// Closed nanosecond interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub min_ns: Nanos,
    pub max_ns: Nanos,
}

impl Interval {
    pub const ZERO: Interval = Interval { min_ns: 0, max_ns: 0 };

    pub fn new(min_ns: Nanos, max_ns: Nanos) -> Self {
        debug_assert!(min_ns <= max_ns);
        Interval { min_ns, max_ns }
    }

    pub fn exactly(v: Nanos) -> Self {
        Interval { min_ns: v, max_ns: v }
    }

    pub fn contains(&self, v: Nanos) -> bool {
        self.min_ns <= v && v <= self.max_ns
    }

    /// Overlap of two intervals, if any.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.min_ns.max(other.min_ns);
        let hi = self.max_ns.min(other.max_ns);
        (lo <= hi).then_some(Interval { min_ns: lo, max_ns: hi })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndSystem {
    pub id: EsId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Traversal-time bounds of one VL path, abstracted as a dedicated channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub vl_id: VlId,
    pub source: EsId,
    pub destination: EsId,
    pub bctt_ns: Nanos,
    pub wctt_ns: Nanos,
}

impl TimedChannelSpec {
    pub fn bounds(&self) -> Interval {
        Interval {
            min_ns: self.bctt_ns,
            max_ns: self.wctt_ns,
        }
    }

    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("VL{}:{}->{}", self.vl_id, self.source, self.destination),
        }
    }
}

/// Exact-match forwarding rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FlowEntryRepr", into = "FlowEntryRepr")]
pub struct FlowEntry {
    pub in_port: PortId,
    pub match_dest_mac: MacAddr,
    pub out_ports: Vec<PortId>,
}

impl FlowEntry {
    pub fn for_vl(in_port: PortId, vl: VlId, out_ports: Vec<PortId>) -> Self {
        FlowEntry {
            in_port,
            match_dest_mac: encode_dest_mac(vl),
            out_ports,
        }
    }
}

/// On-disk form: `{"in_port": 1, "vl_id": "00:01", "actions": [2, 3]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowEntryRepr {
    in_port: PortId,
    vl_id: String,
    actions: Vec<PortId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowEntryError {
    #[error("vl_id {0:?} is not of the form hh:ll")]
    BadVlId(String),
    #[error("flow entry has no output port")]
    NoActions,
    #[error("output port {0} listed twice")]
    DuplicateAction(PortId),
    #[error("match address {0} does not carry a VL identifier")]
    NotVlAddress(MacAddr),
}

fn parse_vl_field(s: &str) -> Option<VlId> {
    let (hi, lo) = s.split_once(':')?;
    if hi.len() != 2 || lo.len() != 2 {
        return None;
    }
    let hi = u8::from_str_radix(hi, 16).ok()?;
    let lo = u8::from_str_radix(lo, 16).ok()?;
    Some(VlId(u16::from_be_bytes([hi, lo])))
}

impl TryFrom<FlowEntryRepr> for FlowEntry {
    type Error = FlowEntryError;

    fn try_from(r: FlowEntryRepr) -> Result<Self, Self::Error> {
        let vl = parse_vl_field(&r.vl_id).ok_or(FlowEntryError::BadVlId(r.vl_id))?;
        if r.actions.is_empty() {
            return Err(FlowEntryError::NoActions);
        }
        for (i, p) in r.actions.iter().enumerate() {
            if r.actions[..i].contains(p) {
                return Err(FlowEntryError::DuplicateAction(*p));
            }
        }
        Ok(FlowEntry::for_vl(r.in_port, vl, r.actions))
    }
}

impl From<FlowEntry> for FlowEntryRepr {
    fn from(e: FlowEntry) -> Self {
        let m = e.match_dest_mac.0;
        FlowEntryRepr {
            in_port: e.in_port,
            vl_id: format!("{:02x}:{:02x}", m[4], m[5]),
            actions: e.out_ports,
        }
    }
}

/// Parses a flow table document (a JSON array of flow entries).
pub fn parse_flow_table(json: &str) -> Result<Vec<FlowEntry>, serde_json::Error> {
    serde_json::from_str(json)
}

pub fn flow_table_to_json(entries: &[FlowEntry]) -> String {
    serde_json::to_string_pretty(entries).expect("flow entries always serialize")
}

/// What sits at the other end of a switch port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Peer {
    EndSystem(EsId),
    Switch { switch: SwitchId, port: PortId },
}

/// Default maximum output processing time of a switch (0.1 us).
pub const DEFAULT_OUTPUT_PROCESSING_MAX_NS: Nanos = 100;

fn default_output_processing() -> Interval {
    Interval::new(0, DEFAULT_OUTPUT_PROCESSING_MAX_NS)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSpec {
    pub id: SwitchId,
    pub ports: BTreeMap<PortId, Peer>,
    pub flow_table: Vec<FlowEntry>,
    /// Per-hop technological latency. When absent, hop latencies are
    /// calibrated from the path bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tech_latency: Option<Interval>,
    #[serde(default = "default_output_processing")]
    pub output_processing: Interval,
    #[serde(default)]
    pub policed_vls: BTreeSet<VlId>,
}

impl SwitchSpec {
    pub fn new(id: SwitchId) -> Self {
        SwitchSpec {
            id,
            ports: BTreeMap::new(),
            flow_table: Vec::new(),
            tech_latency: None,
            output_processing: default_output_processing(),
            policed_vls: BTreeSet::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub end_systems: Vec<EndSystem>,
    pub vls: Vec<VirtualLinkSpec>,
    #[serde(default)]
    pub switches: Vec<SwitchSpec>,
    #[serde(default)]
    pub channels: Vec<TimedChannelSpec>,
    /// Frames are duplicated over two independent networks A and B.
    #[serde(default)]
    pub redundant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyViolation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("malformed topology JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl TopologySpec {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology always serializes")
    }

    pub fn vl(&self, id: VlId) -> Option<&VirtualLinkSpec> {
        self.vls.iter().find(|v| v.vl_id == id)
    }

    pub fn switch(&self, id: SwitchId) -> Option<&SwitchSpec> {
        self.switches.iter().find(|s| s.id == id)
    }

    pub fn channel(&self, vl: VlId, dst: EsId) -> Option<&TimedChannelSpec> {
        self.channels.iter().find(|c| c.vl_id == vl && c.destination == dst)
    }

    pub fn es_name(&self, id: EsId) -> Option<&str> {
        self.end_systems
            .iter()
            .find(|e| e.id == id)
            .and_then(|e| e.name.as_deref())
    }

    /// First switch port wired to end system `es`.
    pub fn attachment(&self, es: EsId) -> Option<(SwitchId, PortId)> {
        self.switches.iter().find_map(|sw| {
            sw.ports
                .iter()
                .find(|(_, peer)| **peer == Peer::EndSystem(es))
                .map(|(p, _)| (sw.id, *p))
        })
    }

    /// Checks every link contract and the structural consistency of the
    /// description. Returns all problems found.
    pub fn validate(&self) -> Vec<TopologyViolation> {
        let mut out = Vec::new();
        let mut push = |location: String, message: String| out.push(TopologyViolation { location, message });

        let es_ids: BTreeSet<EsId> = self.end_systems.iter().map(|e| e.id).collect();
        if es_ids.len() != self.end_systems.len() {
            push("end_systems".into(), "duplicate end system id".into());
        }
        let mut seen = BTreeSet::new();
        for vl in &self.vls {
            let loc = format!("VL {}", vl.vl_id);
            if !seen.insert(vl.vl_id) {
                push(loc.clone(), "duplicate vl_id".into());
            }
            for v in validate_vl(vl) {
                push(loc.clone(), v.to_string());
            }
            for es in std::iter::once(&vl.source).chain(&vl.destinations) {
                if !es_ids.contains(es) {
                    push(loc.clone(), format!("unknown end system {es}"));
                }
            }
        }
        for ch in &self.channels {
            let loc = format!("channel {}", ch.label());
            match self.vl(ch.vl_id) {
                None => push(loc.clone(), format!("unknown VL {}", ch.vl_id)),
                Some(vl) => {
                    if vl.source != ch.source || !vl.destinations.contains(&ch.destination) {
                        push(loc.clone(), "endpoints do not match a path of the VL".into());
                    }
                    if ch.wctt_ns >= vl.bag_ns() {
                        push(loc.clone(), "wctt not below the VL's bag".into());
                    }
                }
            }
            if ch.bctt_ns == 0 || ch.bctt_ns > ch.wctt_ns {
                push(loc, "bounds must satisfy 0 < bctt <= wctt".into());
            }
        }
        let sw_ids: BTreeSet<SwitchId> = self.switches.iter().map(|s| s.id).collect();
        if sw_ids.len() != self.switches.len() {
            push("switches".into(), "duplicate switch id".into());
        }
        for sw in &self.switches {
            let loc = format!("switch {}", sw.id);
            let mut keys = BTreeSet::new();
            for (i, e) in sw.flow_table.iter().enumerate() {
                if !keys.insert((e.in_port, e.match_dest_mac)) {
                    push(loc.clone(), format!("flow entry {i} duplicates (in_port, match)"));
                }
                if decode_dest_mac(e.match_dest_mac).is_none() {
                    push(loc.clone(), format!("flow entry {i} matches a non-VL address"));
                }
                if e.out_ports.is_empty() {
                    push(loc.clone(), format!("flow entry {i} has no output"));
                }
                for p in e.out_ports.iter().chain(std::iter::once(&e.in_port)) {
                    if !sw.ports.contains_key(p) {
                        push(loc.clone(), format!("flow entry {i} references unwired port {p}"));
                    }
                }
            }
            for (port, peer) in &sw.ports {
                match peer {
                    Peer::EndSystem(es) if !es_ids.contains(es) => {
                        push(loc.clone(), format!("port {port} wired to unknown end system {es}"))
                    }
                    Peer::Switch { switch, port: rp } => match self.switch(*switch) {
                        Some(other)
                            if other.ports.get(rp)
                                == Some(&Peer::Switch {
                                    switch: sw.id,
                                    port: *port,
                                }) => {}
                        _ => push(
                            loc.clone(),
                            format!("port {port} wiring to {switch}:{rp} is not symmetric"),
                        ),
                    },
                    _ => {}
                }
            }
            if let Some(t) = sw.tech_latency {
                if t.min_ns > t.max_ns {
                    push(loc.clone(), "tech_latency min above max".into());
                }
            }
            if sw.output_processing.min_ns > sw.output_processing.max_ns {
                push(loc, "output_processing min above max".into());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_entry_json_mirrors_switch_config() {
        let e = FlowEntry::for_vl(1, VlId(1), vec![2, 3]);
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"in_port":1,"vl_id":"00:01","actions":[2,3]}"#);
        let back: FlowEntry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.match_dest_mac.to_string(), "03:00:00:00:00:01");
    }

    #[test]
    fn flow_entry_rejects_bad_documents() {
        for bad in [
            r#"{"in_port":1,"vl_id":"0001","actions":[2]}"#,
            r#"{"in_port":1,"vl_id":"00:01","actions":[]}"#,
            r#"{"in_port":1,"vl_id":"00:01","actions":[2,2]}"#,
            r#"{"in_port":1,"vl_id":"zz:01","actions":[2]}"#,
        ] {
            assert!(serde_json::from_str::<FlowEntry>(bad).is_err(), "{bad}");
        }
        let table = parse_flow_table(r#"[{"in_port":1,"vl_id":"01:02","actions":[4]}]"#).unwrap();
        assert_eq!(decode_dest_mac(table[0].match_dest_mac), Some(VlId(258)));
        assert!(flow_table_to_json(&table).contains("\"01:02\""));
    }

    #[test]
    fn interval_ops() {
        let a = Interval::new(10, 20);
        assert!(a.contains(10) && a.contains(20) && !a.contains(21));
        assert_eq!(a.intersect(&Interval::new(15, 30)), Some(Interval::new(15, 20)));
        assert_eq!(a.intersect(&Interval::new(21, 30)), None);
    }
}
