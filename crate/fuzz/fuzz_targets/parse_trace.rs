#![no_main]

use afdx::engine::TraceLog;
use afdx::monitors::{monitor_report, ReportOptions};
use afdx::topology::TopologySpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(log) = TraceLog::parse(text) else { return };
    assert_eq!(TraceLog::parse(&log.to_csv_string()).as_ref(), Ok(&log));
    let opts = ReportOptions {
        trim_percent: 10.0,
        ..ReportOptions::default()
    };
    let _ = monitor_report(&log, &TopologySpec::default(), &opts);
});
