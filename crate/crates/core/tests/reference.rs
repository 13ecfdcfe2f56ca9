use std::collections::BTreeSet;

use afdx::engine::{run, ModelLevel, Scenario, TraceKind};
use afdx::generators::fms_topology;
use afdx::monitors::{monitor_report, ReportOptions};
use afdx::topology::{EndSystem, FlowEntry, Peer, SwitchId, SwitchSpec, TimedChannelSpec, TopologySpec};
use afdx::vl::{
    max_jitter_for_es, transmission_time, EsId, FrameSize, NetworkConstants, VirtualLinkSpec, VlId, NS_PER_S,
};

#[test]
fn per_end_system_jitter_bounds() {
    let t = fms_topology();
    let c = NetworkConstants::default();
    let hosted = |es: u32| -> Vec<VirtualLinkSpec> { t.vls.iter().filter(|v| v.source == EsId(es)).cloned().collect() };
    assert_eq!(max_jitter_for_es(&hosted(1), &c), 47_600);
    // FM1 sends VL3 (625 B) and VL4 (125 B): 40 + (645 + 145) * 8 / 100 us.
    assert_eq!(max_jitter_for_es(&hosted(3), &c), 103_200);
    // NDB sends VL7 and VL8 (500 B each).
    assert_eq!(max_jitter_for_es(&hosted(7), &c), 123_200);
    // ADIRU1 sends VL11 (87.5 B): 40 + 107.5 * 8 / 100 us.
    assert_eq!(max_jitter_for_es(&hosted(5), &c), 48_600);
    assert_eq!(transmission_time(FrameSize::from_bytes(75), &c), 7_600);
}

#[test]
fn fms_json_round_trip() {
    let t = fms_topology();
    let back = TopologySpec::from_json(&t.to_json()).unwrap();
    assert_eq!(back, t);
    assert!(t.to_json().contains("\"00:0c\""), "flow tables carry VL ids as hh:ll");
}

#[test]
fn checked_in_data_matches_the_library() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let csv = std::fs::read_to_string(root.join("fms.csv")).unwrap();
    assert_eq!(csv, afdx::generators::FMS_CSV);
    let json = std::fs::read_to_string(root.join("fms.json")).unwrap();
    assert_eq!(TopologySpec::from_json(&json).unwrap(), fms_topology());
}

/// ES1 -- S1 ==== S2 -- ES2, ES3 on S2 as a second destination.
fn two_switches() -> TopologySpec {
    let vl = VirtualLinkSpec {
        vl_id: VlId(7),
        source: EsId(1),
        destinations: vec![EsId(2), EsId(3)],
        bag_ms: 4,
        s_max: FrameSize::from_bytes(200),
        j_max_ns: 60_000,
    };
    let mut s1 = SwitchSpec::new(SwitchId(1));
    s1.ports.insert(1, Peer::EndSystem(EsId(1)));
    s1.ports.insert(
        9,
        Peer::Switch {
            switch: SwitchId(2),
            port: 9,
        },
    );
    s1.flow_table.push(FlowEntry::for_vl(1, VlId(7), vec![9]));
    s1.policed_vls.insert(VlId(7));
    let mut s2 = SwitchSpec::new(SwitchId(2));
    s2.ports.insert(
        9,
        Peer::Switch {
            switch: SwitchId(1),
            port: 9,
        },
    );
    s2.ports.insert(2, Peer::EndSystem(EsId(2)));
    s2.ports.insert(3, Peer::EndSystem(EsId(3)));
    s2.flow_table.push(FlowEntry::for_vl(9, VlId(7), vec![2, 3]));
    let channel = |dst: u32| TimedChannelSpec {
        name: None,
        vl_id: VlId(7),
        source: EsId(1),
        destination: EsId(dst),
        bctt_ns: 100_000,
        wctt_ns: 400_000,
    };
    TopologySpec {
        end_systems: (1..=3)
            .map(|i| EndSystem {
                id: EsId(i),
                name: None,
            })
            .collect(),
        vls: vec![vl],
        switches: vec![s1, s2],
        channels: vec![channel(2), channel(3)],
        redundant: false,
    }
}

#[test]
fn multi_hop_switched_path_stays_in_bounds() {
    let topo = two_switches();
    assert!(topo.validate().is_empty(), "{:?}", topo.validate());
    let mut s = Scenario::new(topo, ModelLevel::SwitchedVl);
    s.duration_ns = NS_PER_S;
    let trace = run(&s).unwrap();
    assert_eq!(trace.count(TraceKind::Delivered), 500);
    assert_eq!(trace.count(TraceKind::Rejected), 0);
    let report = monitor_report(&trace, &s.topology, &ReportOptions::default());
    assert_eq!(report.paths.len(), 2);
    for p in &report.paths {
        assert_eq!(
            (p.latency.above_wctt, p.latency.below_bctt, p.drops.lost),
            (0, 0, 0),
            "{p:?}"
        );
        assert!(p.conserved);
    }
    let dsts: BTreeSet<EsId> = trace.events.iter().map(|e| e.dst).collect();
    assert_eq!(dsts, BTreeSet::from([EsId(2), EsId(3)]));
}

#[test]
fn asymmetric_wiring_is_reported() {
    let mut topo = two_switches();
    topo.switches[1].ports.remove(&9);
    topo.switches[1].flow_table.clear();
    let v = topo.validate();
    assert!(v.iter().any(|v| v.message.contains("not symmetric")), "{v:?}");
}
