//! Virtual link contracts, frames and the closed-form AFDX formulas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Timestamps and durations are integer nanoseconds throughout the crate.
pub type Nanos = u64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_MS: Nanos = 1_000_000;
pub const NS_PER_S: Nanos = 1_000_000_000;

/// Legal BAG values in milliseconds.
pub const BAG_VALUES_MS: [u32; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 1518;

/// Payload length used when a frame is built without an explicit payload.
pub const DEFAULT_PAYLOAD_LEN: u32 = 17;

/// Renders a nanosecond duration in microseconds with one decimal.
pub fn format_us(ns: Nanos) -> String {
    let tenths = (ns + 50) / 100;
    format!("{}.{}", tenths / 10, tenths % 10)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VlId(pub u16);

impl fmt::Display for VlId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// End system identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EsId(pub u32);

impl fmt::Display for EsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Frame size kept exactly in tenths of a byte, so configured sizes such as
/// 87.5 bytes survive parsing and rate computations unchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FrameSize(u32);

impl FrameSize {
    pub const fn from_tenths(tenths: u32) -> Self {
        FrameSize(tenths)
    }

    pub const fn from_bytes(bytes: u32) -> Self {
        FrameSize(bytes * 10)
    }

    pub const fn tenths(self) -> u32 {
        self.0
    }

    /// Whole bytes, rounded up. Used when materialising a concrete frame.
    pub const fn ceil_bytes(self) -> u32 {
        self.0.div_ceil(10)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for FrameSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(10) {
            write!(f, "{}", self.0 / 10)
        } else {
            write!(f, "{}.{}", self.0 / 10, self.0 % 10)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid frame size {0:?}: expected a non-negative decimal with at most one fractional digit")]
pub struct FrameSizeParseError(pub String);

impl FromStr for FrameSize {
    type Err = FrameSizeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FrameSizeParseError(s.to_string());
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (s, None),
        };
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: u32 = int.parse().map_err(|_| err())?;
        let tenth = match frac {
            None => 0,
            Some(f) if f.len() == 1 && f.as_bytes()[0].is_ascii_digit() => u32::from(f.as_bytes()[0] - b'0'),
            Some(_) => return Err(err()),
        };
        whole
            .checked_mul(10)
            .and_then(|w| w.checked_add(tenth))
            .map(FrameSize)
            .ok_or_else(err)
    }
}

impl Serialize for FrameSize {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_multiple_of(10) {
            serializer.serialize_u32(self.0 / 10)
        } else {
            serializer.serialize_f64(self.as_f64())
        }
    }
}

impl<'de> Deserialize<'de> for FrameSize {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        let tenths = (v * 10.0).round();
        if !v.is_finite() || v < 0.0 || (tenths - v * 10.0).abs() > 1e-6 || tenths > f64::from(u32::MAX) {
            return Err(serde::de::Error::custom(format!(
                "frame size {v} is not a non-negative multiple of 0.1 byte"
            )));
        }
        Ok(FrameSize(tenths as u32))
    }
}

/// One virtual link's traffic contract.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualLinkSpec {
    pub vl_id: VlId,
    pub source: EsId,
    pub destinations: Vec<EsId>,
    pub bag_ms: u32,
    pub s_max: FrameSize,
    pub j_max_ns: Nanos,
}

impl VirtualLinkSpec {
    pub fn bag_ns(&self) -> Nanos {
        Nanos::from(self.bag_ms) * NS_PER_MS
    }
}

/// A single broken invariant of a [`VirtualLinkSpec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    BagNotPowerOfTwo(u32),
    SizeOutOfRange(FrameSize),
    NoDestinations,
    SourceIsDestination(EsId),
    DuplicateDestination(EsId),
    JitterZero,
    JitterAboveHardLimit(Nanos),
    JitterNotBelowBag { j_max_ns: Nanos, bag_ms: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BagNotPowerOfTwo(b) => write!(f, "bag not a power-of-two in 1..128 ms (got {b})"),
            Violation::SizeOutOfRange(s) => write!(f, "s_max out of [64,1518] bytes (got {s})"),
            Violation::NoDestinations => write!(f, "destination list is empty"),
            Violation::SourceIsDestination(es) => write!(f, "source ES {es} is also a destination"),
            Violation::DuplicateDestination(es) => write!(f, "destination ES {es} listed twice"),
            Violation::JitterZero => write!(f, "j_max must be strictly positive"),
            Violation::JitterAboveHardLimit(j) => {
                write!(f, "j_max {} us exceeds the 500 us hard limit", format_us(*j))
            }
            Violation::JitterNotBelowBag { j_max_ns, bag_ms } => {
                write!(f, "j_max {} us is not below bag {bag_ms} ms", format_us(*j_max_ns))
            }
        }
    }
}

/// Returns every invariant `spec` breaks. An empty list means the link is valid.
pub fn validate_vl(spec: &VirtualLinkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if !BAG_VALUES_MS.contains(&spec.bag_ms) {
        out.push(Violation::BagNotPowerOfTwo(spec.bag_ms));
    }
    let min = FrameSize::from_bytes(MIN_FRAME_BYTES);
    let max = FrameSize::from_bytes(MAX_FRAME_BYTES);
    if spec.s_max < min || spec.s_max > max {
        out.push(Violation::SizeOutOfRange(spec.s_max));
    }
    if spec.destinations.is_empty() {
        out.push(Violation::NoDestinations);
    }
    if spec.destinations.contains(&spec.source) {
        out.push(Violation::SourceIsDestination(spec.source));
    }
    for (i, d) in spec.destinations.iter().enumerate() {
        if spec.destinations[..i].contains(d) && *d != spec.source {
            out.push(Violation::DuplicateDestination(*d));
        }
    }
    let hard = NetworkConstants::default().jitter_hard_limit_ns;
    if spec.j_max_ns == 0 {
        out.push(Violation::JitterZero);
    }
    if spec.j_max_ns > hard {
        out.push(Violation::JitterAboveHardLimit(spec.j_max_ns));
    }
    if spec.j_max_ns >= spec.bag_ns() {
        out.push(Violation::JitterNotBelowBag {
            j_max_ns: spec.j_max_ns,
            bag_ms: spec.bag_ms,
        });
    }
    out
}

/// Physical constants of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConstants {
    /// Link bandwidth in bits per microsecond (100 = 100 Mbps).
    pub nbw_bits_per_us: u64,
    /// Per-frame wire overhead in bytes.
    pub wire_overhead_bytes: u32,
    pub tech_jitter_floor_ns: Nanos,
    pub jitter_hard_limit_ns: Nanos,
}

impl Default for NetworkConstants {
    fn default() -> Self {
        NetworkConstants {
            nbw_bits_per_us: 100,
            wire_overhead_bytes: 20,
            tech_jitter_floor_ns: 40 * NS_PER_US,
            jitter_hard_limit_ns: 500 * NS_PER_US,
        }
    }
}

/// Time to put a frame of `size` bytes (plus wire overhead) on the link.
/// Exact for the default 100 Mbps link; rounded up to the next nanosecond otherwise.
pub fn transmission_time(size: FrameSize, consts: &NetworkConstants) -> Nanos {
    // bits = (overhead + size) * 8; ns = bits * 1000 / nbw; size in tenths.
    let tenths = u64::from(consts.wire_overhead_bytes) * 10 + u64::from(size.tenths());
    (tenths * 800).div_ceil(consts.nbw_bits_per_us)
}

/// Maximum emission jitter allowed for an end system hosting links with the
/// given frame sizes, clamped to the hard limit.
pub fn max_jitter_for_sizes<I>(sizes: I, consts: &NetworkConstants) -> Nanos
where
    I: IntoIterator<Item = FrameSize>,
{
    let raw = sizes
        .into_iter()
        .fold(consts.tech_jitter_floor_ns, |acc, s| acc + transmission_time(s, consts));
    raw.min(consts.jitter_hard_limit_ns)
}

/// Default `j_max` for the links of one end system. All links are expected to
/// share the same source.
pub fn max_jitter_for_es(vls: &[VirtualLinkSpec], consts: &NetworkConstants) -> Nanos {
    debug_assert!(vls.windows(2).all(|w| w[0].source == w[1].source));
    max_jitter_for_sizes(vls.iter().map(|v| v.s_max), consts)
}

/// Next sequence number; 0 is only ever the start-up value.
pub fn next_seq(seq: u8) -> u8 {
    if seq == 255 {
        1
    } else {
        seq + 1
    }
}

/// Sequence number of the next emitted frame after `skipped` periods were
/// lost in emission (`next_seq` applied `skipped + 1` times).
pub fn advance_seq(seq: u8, skipped: u64) -> u8 {
    // Position in the 1..=255 cycle, with 0 sitting one step before 1.
    let start = u64::from(seq);
    let steps = skipped + 1;
    let pos = if start == 0 { steps - 1 } else { start - 1 + steps };
    (pos % 255 + 1) as u8
}

/// 48-bit MAC address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

/// Fixed prefix of AFDX multicast destination addresses.
pub const DEST_MAC_PREFIX: [u8; 4] = [0x03, 0x00, 0x00, 0x00];

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid MAC address {0:?}")]
pub struct MacParseError(pub String);

impl FromStr for MacAddr {
    type Err = MacParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for byte in out.iter_mut() {
            let p = parts.next().ok_or_else(|| MacParseError(s.into()))?;
            if p.len() != 2 {
                return Err(MacParseError(s.into()));
            }
            *byte = u8::from_str_radix(p, 16).map_err(|_| MacParseError(s.into()))?;
        }
        if parts.next().is_some() {
            return Err(MacParseError(s.into()));
        }
        Ok(MacAddr(out))
    }
}

/// Destination address carrying `vl` big-endian in its low 16 bits.
pub fn encode_dest_mac(vl: VlId) -> MacAddr {
    let [hi, lo] = vl.0.to_be_bytes();
    let p = DEST_MAC_PREFIX;
    MacAddr([p[0], p[1], p[2], p[3], hi, lo])
}

/// Inverse of [`encode_dest_mac`]; `None` when the prefix does not match.
pub fn decode_dest_mac(mac: MacAddr) -> Option<VlId> {
    (mac.0[..4] == DEST_MAC_PREFIX).then(|| VlId(u16::from_be_bytes([mac.0[4], mac.0[5]])))
}

/// A frame in flight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub vl_id: VlId,
    pub seq_no: u8,
    /// Emission timestamp, as carried in the payload.
    pub emit_time: Nanos,
    pub size: u32,
    pub payload_len: u32,
}

impl Frame {
    pub fn new(vl: &VirtualLinkSpec, seq_no: u8, emit_time: Nanos) -> Self {
        Frame {
            vl_id: vl.vl_id,
            seq_no,
            emit_time,
            size: vl.s_max.ceil_bytes(),
            payload_len: DEFAULT_PAYLOAD_LEN,
        }
    }

    pub fn dest_mac(&self) -> MacAddr {
        encode_dest_mac(self.vl_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vl(bag_ms: u32, s_max: FrameSize, dests: &[u32]) -> VirtualLinkSpec {
        VirtualLinkSpec {
            vl_id: VlId(1),
            source: EsId(1),
            destinations: dests.iter().map(|&d| EsId(d)).collect(),
            bag_ms,
            s_max,
            j_max_ns: 47_600,
        }
    }

    #[test]
    fn fms_vl1_is_valid() {
        assert!(validate_vl(&vl(32, FrameSize::from_bytes(75), &[3, 4])).is_empty());
    }

    #[test]
    fn bag_three_is_rejected() {
        let v = validate_vl(&vl(3, FrameSize::from_bytes(75), &[3]));
        assert_eq!(v, vec![Violation::BagNotPowerOfTwo(3)]);
        assert!(v[0].to_string().contains("power-of-two"));
    }

    #[test]
    fn oversize_frame_is_rejected() {
        let v = validate_vl(&vl(32, FrameSize::from_bytes(1600), &[3]));
        assert_eq!(v, vec![Violation::SizeOutOfRange(FrameSize::from_bytes(1600))]);
    }

    #[test]
    fn size_bounds_are_inclusive() {
        assert!(validate_vl(&vl(1, FrameSize::from_bytes(64), &[2])).is_empty());
        assert!(validate_vl(&vl(1, FrameSize::from_bytes(1518), &[2])).is_empty());
        assert!(!validate_vl(&vl(1, FrameSize::from_tenths(639), &[2])).is_empty());
    }

    #[test]
    fn structural_violations() {
        let v = validate_vl(&vl(32, FrameSize::from_bytes(75), &[]));
        assert_eq!(v, vec![Violation::NoDestinations]);
        let v = validate_vl(&vl(32, FrameSize::from_bytes(75), &[1, 2]));
        assert_eq!(v, vec![Violation::SourceIsDestination(EsId(1))]);
        let mut s = vl(1, FrameSize::from_bytes(75), &[2]);
        s.j_max_ns = 600_000;
        assert_eq!(validate_vl(&s), vec![Violation::JitterAboveHardLimit(600_000)]);
        s.j_max_ns = 0;
        assert_eq!(validate_vl(&s), vec![Violation::JitterZero]);
    }

    #[test]
    fn jitter_single_minimum_frame() {
        let c = NetworkConstants::default();
        assert_eq!(max_jitter_for_sizes([FrameSize::from_bytes(75)], &c), 47_600);
        assert_eq!(format_us(47_600), "47.6");
    }

    #[test]
    fn jitter_empty_set_is_floor() {
        assert_eq!(max_jitter_for_es(&[], &NetworkConstants::default()), 40_000);
    }

    #[test]
    fn jitter_two_links() {
        let c = NetworkConstants::default();
        let j = max_jitter_for_sizes([625, 125].map(FrameSize::from_bytes), &c);
        assert_eq!(j, 103_200);
    }

    #[test]
    fn jitter_clamps_at_hard_limit() {
        let c = NetworkConstants::default();
        let sizes = std::iter::repeat_n(FrameSize::from_bytes(700), 80);
        // raw sum 40 + 80 * 57.6 = 4648 us
        let raw: Nanos = 40_000 + 80 * transmission_time(FrameSize::from_bytes(700), &c);
        assert_eq!(raw, 4_648_000);
        assert_eq!(max_jitter_for_sizes(sizes, &c), 500_000);
    }

    #[test]
    fn transmission_times() {
        let c = NetworkConstants::default();
        assert_eq!(transmission_time(FrameSize::from_bytes(75), &c), 7_600);
        assert_eq!(transmission_time(FrameSize::from_bytes(105), &c), 10_000);
        assert_eq!(transmission_time(FrameSize::from_bytes(1480), &c), 120_000);
        assert_eq!(transmission_time(FrameSize::from_tenths(875), &c), 8_600);
    }

    #[test]
    fn sequence_numbers() {
        assert_eq!(next_seq(255), 1);
        assert_eq!(next_seq(0), 1);
        assert_eq!(next_seq(37), 38);
        assert_eq!(advance_seq(10, 0), 11);
        assert_eq!(advance_seq(254, 2), 2);
    }

    #[test]
    fn advance_seq_matches_repeated_next_seq() {
        fn brute(mut s: u8, k: u64) -> u8 {
            for _ in 0..=k {
                s = next_seq(s);
            }
            s
        }
        // 256 applications starting from 255 land back on 1.
        assert_eq!(brute(255, 255), 1);
        assert_eq!(advance_seq(255, 255), 1);
        for s in 0..=255u8 {
            for k in [0, 1, 2, 100, 253, 254, 255, 256, 600] {
                assert_eq!(advance_seq(s, k), brute(s, k), "seq {s} k {k}");
            }
        }
    }

    #[test]
    fn dest_mac_encoding() {
        assert_eq!(encode_dest_mac(VlId(1)).to_string(), "03:00:00:00:00:01");
        assert_eq!(encode_dest_mac(VlId(0)).to_string(), "03:00:00:00:00:00");
        assert_eq!(encode_dest_mac(VlId(258)).to_string(), "03:00:00:00:01:02");
        let mac: MacAddr = "03:00:00:00:01:02".parse().unwrap();
        assert_eq!(decode_dest_mac(mac), Some(VlId(258)));
        let other: MacAddr = "01:00:5e:00:00:01".parse().unwrap();
        assert_eq!(decode_dest_mac(other), None);
        assert!("03:00:00:00:01".parse::<MacAddr>().is_err());
    }

    #[test]
    fn frame_size_parse_and_display() {
        assert_eq!("87.5".parse::<FrameSize>().unwrap(), FrameSize::from_tenths(875));
        assert_eq!("75".parse::<FrameSize>().unwrap().to_string(), "75");
        assert_eq!(FrameSize::from_tenths(875).to_string(), "87.5");
        assert_eq!(FrameSize::from_tenths(875).ceil_bytes(), 88);
        for bad in ["", ".5", "1.25", "-1", "7a", "1e3", "99999999999"] {
            assert!(bad.parse::<FrameSize>().is_err(), "{bad}");
        }
    }

    #[test]
    fn frame_size_json() {
        let s: FrameSize = serde_json::from_str("87.5").unwrap();
        assert_eq!(s, FrameSize::from_tenths(875));
        assert_eq!(serde_json::to_string(&s).unwrap(), "87.5");
        assert_eq!(serde_json::to_string(&FrameSize::from_bytes(75)).unwrap(), "75");
        assert!(serde_json::from_str::<FrameSize>("87.55").is_err());
    }

    #[test]
    fn frame_rounds_size_up() {
        let v = vl(32, FrameSize::from_tenths(875), &[3]);
        let f = Frame::new(&v, 0, 10);
        assert_eq!(f.size, 88);
        assert_eq!(f.payload_len, 17);
        assert_eq!(f.dest_mac().to_string(), "03:00:00:00:00:01");
    }
}
