#![no_main]

use afdx::engine::{run, ModelLevel, Scenario};
use afdx::topology::TopologySpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(topo) = TopologySpec::from_json(text) else {
        return;
    };
    assert_eq!(TopologySpec::from_json(&topo.to_json()).expect("re-parses"), topo);
    if !topo.validate().is_empty() || topo.vls.len() > 16 {
        return;
    }
    // Any valid topology must run (or fail with an error) without panicking.
    for model in [ModelLevel::TimedChannel, ModelLevel::DirectVl, ModelLevel::SwitchedVl] {
        let mut s = Scenario::new(topo.clone(), model);
        s.duration_ns = 20_000_000;
        let _ = run(&s);
    }
});
