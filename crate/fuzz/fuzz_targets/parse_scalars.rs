#![no_main]

//! Small textual decoders: frame sizes, MAC addresses, durations, model names.

use afdx::engine::{parse_duration, ModelLevel};
use afdx::vl::{decode_dest_mac, encode_dest_mac, FrameSize, MacAddr};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(size) = text.parse::<FrameSize>() {
        assert_eq!(size.to_string().parse::<FrameSize>(), Ok(size));
    }
    if let Ok(mac) = text.parse::<MacAddr>() {
        assert_eq!(mac.to_string().parse::<MacAddr>(), Ok(mac));
        if let Some(vl) = decode_dest_mac(mac) {
            assert_eq!(encode_dest_mac(vl), mac);
        }
    }
    let _ = parse_duration(text);
    if let Ok(m) = text.parse::<ModelLevel>() {
        assert_eq!(m.to_string().parse::<ModelLevel>(), Ok(m));
    }
});
