//! Benchmark topologies: random single-switch networks, the `vlid,src,dst,bag,size`
//! CSV template format, and replication of templates.
//!
//! Every topology built here uses the many-to-one mapping: one switch, one
//! port per end system (port number = end system id), one flow entry per VL,
//! and policing of every VL at that switch.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::topology::{EndSystem, FlowEntry, Peer, PortId, SwitchId, SwitchSpec, TimedChannelSpec, TopologySpec};
use crate::vl::{
    max_jitter_for_sizes, transmission_time, validate_vl, EsId, FrameSize, Nanos, NetworkConstants, VirtualLinkSpec,
    VlId, BAG_VALUES_MS, MAX_FRAME_BYTES, MIN_FRAME_BYTES, NS_PER_US,
};

pub const CSV_HEADER: &str = "vlid,src,dst,bag,size";

/// The flight management system network as a CSV template.
pub const FMS_CSV: &str = r#"vlid,src,dst,bag,size
1,1,"3,4",32,75
2,2,"3,4",32,75
3,3,"1",8,625
4,3,"7",16,125
5,4,"2",8,625
6,4,"7",16,125
7,7,"3",64,500
8,7,"4",64,500
9,8,"5",32,64
10,9,"6",32,64
11,5,"3,4",32,87.5
12,6,"3,4",32,87.5
"#;

/// End system names of the flight management system template.
pub const FMS_NAMES: [(u32, &str); 9] = [
    (1, "KU1/MFD1"),
    (2, "KU2/MFD2"),
    (3, "FM1"),
    (4, "FM2"),
    (5, "ADIRU1"),
    (6, "ADIRU2"),
    (7, "NDB"),
    (8, "RDC1"),
    (9, "RDC2"),
];

/// Timed-channel bounds of the flight management system, in microseconds:
/// (name, vl, src, dst, bctt, wctt).
pub const FMS_CHANNELS: [(&str, u16, u32, u32, u64, u64); 16] = [
    ("C1", 1, 1, 3, 298, 444),
    ("C1'", 1, 1, 4, 298, 444),
    ("C2", 2, 2, 3, 298, 444),
    ("C2'", 2, 2, 4, 298, 444),
    ("C3", 3, 3, 1, 310, 490),
    ("C4", 4, 3, 7, 310, 450),
    ("C5", 5, 4, 2, 310, 490),
    ("C6", 6, 4, 7, 310, 450),
    ("C7", 7, 7, 3, 400, 508),
    ("C8", 8, 7, 4, 400, 508),
    ("C9", 9, 8, 5, 150, 156),
    ("C10", 10, 9, 6, 150, 156),
    ("C11", 11, 5, 3, 452, 584),
    ("C11'", 11, 5, 4, 452, 584),
    ("C12", 12, 6, 4, 452, 584),
    ("C12'", 12, 6, 3, 452, 584),
];

/// The flight management system with its names and traversal bounds.
pub fn fms_topology() -> TopologySpec {
    let csv = parse_csv(FMS_CSV).expect("built-in template is valid");
    let mut topo = csv_to_topology(&csv, &NetworkConstants::default()).expect("built-in template converts");
    for es in &mut topo.end_systems {
        es.name = FMS_NAMES
            .iter()
            .find(|(id, _)| *id == es.id.0)
            .map(|(_, n)| n.to_string());
    }
    topo.channels = FMS_CHANNELS
        .iter()
        .map(|&(name, vl, src, dst, b, w)| TimedChannelSpec {
            name: Some(name.to_string()),
            vl_id: VlId(vl),
            source: EsId(src),
            destination: EsId(dst),
            bctt_ns: b * NS_PER_US,
            wctt_ns: w * NS_PER_US,
        })
        .collect();
    topo
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvRow {
    /// 1-based line number in the source text.
    pub line: usize,
    pub vl_id: VlId,
    pub src: EsId,
    pub dst: Vec<EsId>,
    pub bag_ms: u32,
    pub size: FrameSize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvTopology {
    pub rows: Vec<CsvRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsvError {
    #[error("line 1: header must be exactly `{CSV_HEADER}`")]
    BadHeader,
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("empty input")]
    Empty,
}

/// Parses the CSV layout without checking link contracts. Structural problems
/// (header, field count, number syntax) are errors; see [`csv_violations`] for
/// the rest.
pub fn parse_csv_lenient(text: &str) -> Result<CsvTopology, CsvError> {
    if text.trim().is_empty() {
        return Err(CsvError::Empty);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut records = reader.records();
    match records.next() {
        Some(Ok(h)) if h.iter().collect::<Vec<_>>() == CSV_HEADER.split(',').collect::<Vec<_>>() => {}
        _ => return Err(CsvError::BadHeader),
    }
    for rec in records {
        let rec = rec.map_err(|e| CsvError::Row {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| CsvError::Row { line, message };
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", rec.len())));
        }
        let vl_id = rec[0]
            .trim()
            .parse::<u16>()
            .map_err(|_| err(format!("bad vlid {:?}", &rec[0])))?;
        let src = rec[1]
            .trim()
            .parse::<u32>()
            .map_err(|_| err(format!("bad src {:?}", &rec[1])))?;
        let dst = rec[2]
            .split(',')
            .map(|d| d.trim().parse::<u32>().map(EsId))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| err(format!("bad dst list {:?}", &rec[2])))?;
        let bag_ms = rec[3]
            .trim()
            .parse::<u32>()
            .map_err(|_| err(format!("bad bag {:?}", &rec[3])))?;
        let size = rec[4].trim().parse::<FrameSize>().map_err(|e| err(e.to_string()))?;
        rows.push(CsvRow {
            line,
            vl_id: VlId(vl_id),
            src: EsId(src),
            dst,
            bag_ms,
            size,
        });
    }
    Ok(CsvTopology { rows })
}

/// Contract violations of a leniently parsed template, one entry per problem.
pub fn csv_violations(csv: &CsvTopology) -> Vec<CsvError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for row in &csv.rows {
        if !seen.insert(row.vl_id) {
            out.push(CsvError::Row {
                line: row.line,
                message: format!("duplicate vlid {}", row.vl_id),
            });
        }
        let spec = VirtualLinkSpec {
            vl_id: row.vl_id,
            source: row.src,
            destinations: row.dst.clone(),
            bag_ms: row.bag_ms,
            s_max: row.size,
            // The jitter is derived later; use a placeholder that is always legal.
            j_max_ns: NetworkConstants::default().tech_jitter_floor_ns,
        };
        for v in validate_vl(&spec) {
            out.push(CsvError::Row {
                line: row.line,
                message: v.to_string(),
            });
        }
    }
    out
}

/// Parses and validates a template.
pub fn parse_csv(text: &str) -> Result<CsvTopology, CsvError> {
    let csv = parse_csv_lenient(text)?;
    match csv_violations(&csv).into_iter().next() {
        Some(e) => Err(e),
        None => Ok(csv),
    }
}

/// Renders a template; the destination list is always quoted.
pub fn emit_csv(csv: &CsvTopology) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &csv.rows {
        let dst: Vec<String> = r.dst.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},\"{}\",{},{}",
            r.vl_id,
            r.src,
            dst.join(","),
            r.bag_ms,
            r.size
        );
    }
    out
}

/// Template view of a topology (VL contracts only).
pub fn topology_to_csv(topo: &TopologySpec) -> CsvTopology {
    CsvTopology {
        rows: topo
            .vls
            .iter()
            .enumerate()
            .map(|(i, v)| CsvRow {
                line: i + 2,
                vl_id: v.vl_id,
                src: v.source,
                dst: v.destinations.clone(),
                bag_ms: v.bag_ms,
                size: v.s_max,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("{0} copies of {1} VLs exceed the 16-bit VL identifier space")]
    VlIdOverflow(u64, usize),
    #[error("end system id {0} does not fit a 16-bit switch port")]
    PortOverflow(u32),
    #[error("copy count must be at least 1")]
    ZeroCopies,
    #[error("at least one VL is required")]
    NoVls,
    #[error(transparent)]
    Csv(#[from] CsvError),
}

/// Builds the single-switch topology for a set of contracts. `j_max` of each VL
/// is the Eq. 1/Eq. 2 bound of its source end system.
fn single_switch(
    vls: Vec<(VlId, EsId, Vec<EsId>, u32, FrameSize)>,
    names: &BTreeMap<EsId, String>,
    consts: &NetworkConstants,
) -> Result<TopologySpec, GenError> {
    let mut by_source: BTreeMap<EsId, Vec<FrameSize>> = BTreeMap::new();
    let mut es: BTreeSet<EsId> = BTreeSet::new();
    for (_, src, dst, _, size) in &vls {
        by_source.entry(*src).or_default().push(*size);
        es.insert(*src);
        es.extend(dst.iter().copied());
    }
    let port = |e: EsId| PortId::try_from(e.0).map_err(|_| GenError::PortOverflow(e.0));
    let mut sw = SwitchSpec::new(SwitchId(1));
    for &e in &es {
        sw.ports.insert(port(e)?, Peer::EndSystem(e));
    }
    let mut specs = Vec::with_capacity(vls.len());
    for (vl_id, src, dst, bag_ms, size) in vls {
        let outs = dst.iter().map(|&d| port(d)).collect::<Result<Vec<_>, _>>()?;
        sw.flow_table.push(FlowEntry::for_vl(port(src)?, vl_id, outs));
        sw.policed_vls.insert(vl_id);
        specs.push(VirtualLinkSpec {
            vl_id,
            source: src,
            destinations: dst,
            bag_ms,
            s_max: size,
            j_max_ns: max_jitter_for_sizes(by_source[&src].iter().copied(), consts),
        });
    }
    Ok(TopologySpec {
        end_systems: es
            .into_iter()
            .map(|id| EndSystem {
                id,
                name: names.get(&id).cloned(),
            })
            .collect(),
        vls: specs,
        switches: vec![sw],
        channels: Vec::new(),
        redundant: false,
    })
}

pub fn csv_to_topology(csv: &CsvTopology, consts: &NetworkConstants) -> Result<TopologySpec, GenError> {
    single_switch(
        csv.rows
            .iter()
            .map(|r| (r.vl_id, r.src, r.dst.clone(), r.bag_ms, r.size))
            .collect(),
        &BTreeMap::new(),
        consts,
    )
}

#[derive(Debug, Clone)]
pub struct RandomGenSpec {
    pub n_vls: usize,
    pub seed: u64,
    /// Extra room above the hop's transmission time for the synthetic WCTT.
    pub wctt_margin_ns: Nanos,
}

impl RandomGenSpec {
    pub fn new(n_vls: usize, seed: u64) -> Self {
        RandomGenSpec {
            n_vls,
            seed,
            wctt_margin_ns: 100 * NS_PER_US,
        }
    }
}

/// `n` point-to-point VLs through one switch, with BAG and size drawn
/// uniformly. VL `k` runs from end system `2k-1` to `2k`. Synthetic traversal
/// bounds are `[tx, tx + margin]` where `tx` is the one-hop transmission time.
pub fn generate_random(spec: &RandomGenSpec, consts: &NetworkConstants) -> Result<TopologySpec, GenError> {
    if spec.n_vls == 0 {
        return Err(GenError::NoVls);
    }
    if spec.n_vls > usize::from(u16::MAX) || 2 * spec.n_vls > usize::from(u16::MAX) {
        return Err(GenError::VlIdOverflow(1, spec.n_vls));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vls: Vec<_> = (1..=spec.n_vls as u32)
        .map(|k| {
            let bag = BAG_VALUES_MS[rng.gen_range(0..BAG_VALUES_MS.len())];
            let size = rng.gen_range(MIN_FRAME_BYTES..=MAX_FRAME_BYTES);
            (
                VlId(k as u16),
                EsId(2 * k - 1),
                vec![EsId(2 * k)],
                bag,
                FrameSize::from_bytes(size),
            )
        })
        .collect();
    let mut topo = single_switch(vls, &BTreeMap::new(), consts)?;
    topo.channels = topo
        .vls
        .iter()
        .map(|v| {
            let tx = transmission_time(FrameSize::from_bytes(v.s_max.ceil_bytes()), consts);
            TimedChannelSpec {
                name: None,
                vl_id: v.vl_id,
                source: v.source,
                destination: v.destinations[0],
                bctt_ns: tx,
                wctt_ns: tx + spec.wctt_margin_ns,
            }
        })
        .collect();
    Ok(topo)
}

/// `k` disjoint copies of a template. Copy `c` (0-based) offsets VL ids by
/// `c * n_vls` and end system ids by `c * max_es`.
pub fn replicate(template: &CsvTopology, k: usize, consts: &NetworkConstants) -> Result<TopologySpec, GenError> {
    replicate_topology(&csv_to_topology(template, consts)?, k)
}

/// Like [`replicate`], keeping names and traversal bounds of a full topology.
/// Each copy keeps its own switch.
pub fn replicate_topology(template: &TopologySpec, k: usize) -> Result<TopologySpec, GenError> {
    if k == 0 {
        return Err(GenError::ZeroCopies);
    }
    let n = template.vls.len();
    let max_vl = template.vls.iter().map(|v| u64::from(v.vl_id.0)).max().unwrap_or(0);
    if (k as u64 - 1) * n as u64 + max_vl > u64::from(u16::MAX) {
        return Err(GenError::VlIdOverflow(k as u64, n));
    }
    let es_span = template.end_systems.iter().map(|e| e.id.0).max().unwrap_or(0);
    let sw_span = template.switches.iter().map(|s| s.id.0).max().unwrap_or(0);
    let mut out = TopologySpec {
        redundant: template.redundant,
        ..TopologySpec::default()
    };
    for c in 0..k as u32 {
        let vl_off = (c as usize * n) as u16;
        let es_off = c * es_span;
        let vl = |v: VlId| VlId(v.0 + vl_off);
        let es = |e: EsId| EsId(e.0 + es_off);
        out.end_systems.extend(template.end_systems.iter().map(|e| {
            EndSystem {
                id: es(e.id),
                name: e
                    .name
                    .as_ref()
                    .map(|nm| if c == 0 { nm.clone() } else { format!("{nm}#{}", c + 1) }),
            }
        }));
        out.vls.extend(template.vls.iter().map(|v| VirtualLinkSpec {
            vl_id: vl(v.vl_id),
            source: es(v.source),
            destinations: v.destinations.iter().map(|&d| es(d)).collect(),
            ..v.clone()
        }));
        out.channels.extend(template.channels.iter().map(|ch| {
            TimedChannelSpec {
                name: ch
                    .name
                    .as_ref()
                    .map(|nm| if c == 0 { nm.clone() } else { format!("{nm}#{}", c + 1) }),
                vl_id: vl(ch.vl_id),
                source: es(ch.source),
                destination: es(ch.destination),
                ..ch.clone()
            }
        }));
        for sw in &template.switches {
            let mut copy = sw.clone();
            copy.id = SwitchId(sw.id.0 + c * sw_span);
            copy.ports = sw
                .ports
                .iter()
                .map(|(&p, peer)| {
                    let peer = match *peer {
                        Peer::EndSystem(e) => Peer::EndSystem(es(e)),
                        Peer::Switch { switch, port } => Peer::Switch {
                            switch: SwitchId(switch.0 + c * sw_span),
                            port,
                        },
                    };
                    (p, peer)
                })
                .collect();
            copy.flow_table = sw
                .flow_table
                .iter()
                .map(|e| {
                    let id = crate::vl::decode_dest_mac(e.match_dest_mac)
                        .map_or(e.match_dest_mac, |v| crate::vl::encode_dest_mac(vl(v)));
                    FlowEntry {
                        match_dest_mac: id,
                        ..e.clone()
                    }
                })
                .collect();
            copy.policed_vls = sw.policed_vls.iter().map(|&v| vl(v)).collect();
            out.switches.push(copy);
        }
    }
    // Ports keep their numbers inside each switch copy, so copies stay disjoint
    // as long as each copy has its own switch.
    Ok(out)
}
