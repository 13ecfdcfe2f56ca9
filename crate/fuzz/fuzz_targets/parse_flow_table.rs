#![no_main]

use afdx::topology::{flow_table_to_json, parse_flow_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = parse_flow_table(text) else { return };
    assert_eq!(parse_flow_table(&flow_table_to_json(&table)).expect("re-parses"), table);
});
