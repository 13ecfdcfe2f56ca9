#![no_main]

use afdx::generators::{csv_violations, emit_csv, parse_csv, parse_csv_lenient};
use afdx::vl::NetworkConstants;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(csv) = parse_csv_lenient(text) else { return };
    if !csv_violations(&csv).is_empty() {
        return;
    }
    let again = parse_csv(&emit_csv(&csv)).expect("emitted template parses");
    assert_eq!(
        again
            .rows
            .iter()
            .map(|r| (r.vl_id, r.src, &r.dst, r.bag_ms, r.size))
            .collect::<Vec<_>>(),
        csv.rows
            .iter()
            .map(|r| (r.vl_id, r.src, &r.dst, r.bag_ms, r.size))
            .collect::<Vec<_>>()
    );
    let _ = afdx::generators::csv_to_topology(&csv, &NetworkConstants::default());
});
