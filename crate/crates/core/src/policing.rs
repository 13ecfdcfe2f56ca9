//! Frame-based token-bucket policing.
//!
//! Two independent implementations share [`BucketParams`]:
//!
//! * [`OracleState`] keeps the continuous byte account, credited at
//!   `s_max / bag` and capped at `s_max * (1 + j_max / bag)`.
//! * [`AutomatonState`] is the four-place timed automaton (`S0`..`S3`) driven
//!   only by the two constants `delta1 = bag - j_max` and `delta2 = j_max`.
//!
//! [`check_equivalence`] runs both over the same arrivals.
//!
//! Both compare with `>=`: a frame arriving exactly when the account reaches
//! `s_max` is accepted, and internal transitions due at an arrival instant
//! fire before the arrival is handled.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use crate::vl::{
    FrameSize, Nanos, VirtualLinkSpec, BAG_VALUES_MS, MAX_FRAME_BYTES, MIN_FRAME_BYTES, NS_PER_MS, NS_PER_S, NS_PER_US,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicingError {
    #[error("j_max ({j_max_ns} ns) must be below bag ({bag_ns} ns)")]
    JitterNotBelowBag { j_max_ns: Nanos, bag_ns: Nanos },
    #[error("j_max must be strictly positive")]
    ZeroJitter,
    #[error("s_max must be strictly positive")]
    ZeroSize,
    #[error("time went backwards: {t} ns is before {last} ns")]
    TimeRegression { t: Nanos, last: Nanos },
    #[error("arrivals not strictly increasing at index {index}")]
    NotIncreasing { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn letter(self) -> char {
        match self {
            Decision::Accept => 'A',
            Decision::Reject => 'R',
        }
    }
}

/// Bucket configuration for one virtual link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketParams {
    s_max: FrameSize,
    bag_ns: Nanos,
    j_max_ns: Nanos,
}

impl BucketParams {
    pub fn new(s_max: FrameSize, bag_ns: Nanos, j_max_ns: Nanos) -> Result<Self, PolicingError> {
        if s_max.tenths() == 0 {
            return Err(PolicingError::ZeroSize);
        }
        if j_max_ns == 0 {
            return Err(PolicingError::ZeroJitter);
        }
        if j_max_ns >= bag_ns {
            return Err(PolicingError::JitterNotBelowBag { j_max_ns, bag_ns });
        }
        Ok(BucketParams {
            s_max,
            bag_ns,
            j_max_ns,
        })
    }

    pub fn s_max(&self) -> FrameSize {
        self.s_max
    }

    pub fn bag_ns(&self) -> Nanos {
        self.bag_ns
    }

    pub fn j_max_ns(&self) -> Nanos {
        self.j_max_ns
    }

    /// Time from leaving the full state until the account covers `s_max` again.
    pub fn delta1(&self) -> Nanos {
        self.bag_ns - self.j_max_ns
    }

    /// Time for the account to refill from `s_max` to its cap.
    pub fn delta2(&self) -> Nanos {
        self.j_max_ns
    }

    /// Credit rate in bytes per second.
    pub fn rate_bytes_per_s(&self) -> f64 {
        self.s_max.as_f64() * NS_PER_S as f64 / self.bag_ns as f64
    }

    pub fn rate_bytes_per_s_ceil(&self) -> u64 {
        let num = u128::from(self.s_max.tenths()) * u128::from(NS_PER_S);
        let den = 10 * u128::from(self.bag_ns);
        num.div_ceil(den) as u64
    }

    /// Account cap in bytes.
    pub fn ac_max_bytes(&self) -> f64 {
        self.s_max.as_f64() * (self.bag_ns + self.j_max_ns) as f64 / self.bag_ns as f64
    }

    pub fn ac_max_bytes_ceil(&self) -> u64 {
        let num = u128::from(self.s_max.tenths()) * u128::from(self.bag_ns + self.j_max_ns);
        let den = 10 * u128::from(self.bag_ns);
        num.div_ceil(den) as u64
    }

    // Internal account unit: tenths of a byte times nanoseconds of bag. With this
    // scaling one nanosecond credits exactly `s_max` units, and one frame costs
    // exactly `s_max * bag` units, so all arithmetic stays integral.
    fn frame_cost(&self) -> u128 {
        u128::from(self.s_max.tenths()) * u128::from(self.bag_ns)
    }

    fn credit_per_ns(&self) -> u128 {
        u128::from(self.s_max.tenths())
    }

    fn account_cap(&self) -> u128 {
        u128::from(self.s_max.tenths()) * u128::from(self.bag_ns + self.j_max_ns)
    }

    /// Policing configuration record mirroring a Linux `tc` police action.
    pub fn export(&self) -> PoliceConfig {
        PoliceConfig {
            rate_bps: self.rate_bytes_per_s_ceil(),
            burst_b: self.ac_max_bytes_ceil(),
            overhead_b: ETHERNET_OVERHEAD_BYTES,
            conform_exceed: "drop".to_string(),
        }
    }
}

/// Ethernet encapsulation overhead declared to the policer.
pub const ETHERNET_OVERHEAD_BYTES: u32 = 14;

/// Parameters for `vl`, whose `j_max` must be below its BAG.
pub fn bucket_params(vl: &VirtualLinkSpec) -> Result<BucketParams, PolicingError> {
    BucketParams::new(vl.s_max, vl.bag_ns(), vl.j_max_ns)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoliceConfig {
    #[serde(rename = "rate_Bps")]
    pub rate_bps: u64,
    #[serde(rename = "burst_B")]
    pub burst_b: u64,
    #[serde(rename = "overhead_B")]
    pub overhead_b: u32,
    pub conform_exceed: String,
}

impl fmt::Display for PoliceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "police rate {}bps burst {}b overhead {} conform-exceed {}",
            self.rate_bps, self.burst_b, self.overhead_b, self.conform_exceed
        )
    }
}

/// A policer expressed as a pure state transformer.
pub trait PolicerState: Sized + Clone {
    /// Full-bucket initial state.
    fn initial(params: &BucketParams) -> Self;

    fn on_frame(&self, params: &BucketParams, t: Nanos) -> Result<(Decision, Self), PolicingError>;
}

/// Continuous account policer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleState {
    account: u128,
    last_update: Nanos,
}

impl OracleState {
    /// Current account in bytes.
    pub fn account_bytes(&self, params: &BucketParams) -> f64 {
        self.account as f64 / (10.0 * params.bag_ns as f64)
    }

    pub fn last_update(&self) -> Nanos {
        self.last_update
    }
}

impl PolicerState for OracleState {
    fn initial(params: &BucketParams) -> Self {
        OracleState {
            account: params.account_cap(),
            last_update: 0,
        }
    }

    fn on_frame(&self, params: &BucketParams, t: Nanos) -> Result<(Decision, Self), PolicingError> {
        if t < self.last_update {
            return Err(PolicingError::TimeRegression {
                t,
                last: self.last_update,
            });
        }
        let elapsed = u128::from(t - self.last_update);
        let credited = self
            .account
            .saturating_add(elapsed.saturating_mul(params.credit_per_ns()))
            .min(params.account_cap());
        let cost = params.frame_cost();
        let (decision, account) = if credited >= cost {
            (Decision::Accept, credited - cost)
        } else {
            (Decision::Reject, credited)
        };
        Ok((
            decision,
            OracleState {
                account,
                last_update: t,
            },
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Place {
    /// Bucket full.
    S0,
    /// Account covers a frame; not yet full.
    S1,
    /// Account below one frame.
    S2,
    /// A frame was accepted in S1; waiting for the S1 clock to run out.
    S3,
}

/// Four-place timed automaton policer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutomatonState {
    place: Place,
    deadline: Option<Nanos>,
    s1_entry: Option<Nanos>,
    last_event: Nanos,
}

impl AutomatonState {
    pub fn place(&self) -> Place {
        self.place
    }

    /// Time of the next internal transition, if one is scheduled.
    pub fn deadline(&self) -> Option<Nanos> {
        self.deadline
    }

    pub fn s1_entry(&self) -> Option<Nanos> {
        self.s1_entry
    }

    /// Fires every internal transition due at or before `t`.
    pub fn advance(&self, params: &BucketParams, t: Nanos) -> Result<Self, PolicingError> {
        if t < self.last_event {
            return Err(PolicingError::TimeRegression {
                t,
                last: self.last_event,
            });
        }
        let mut s = *self;
        while let Some(due) = s.deadline.filter(|&d| d <= t) {
            s = match s.place {
                // Account reached s_max.
                Place::S2 => AutomatonState {
                    place: Place::S1,
                    deadline: Some(due + params.delta2()),
                    s1_entry: Some(due),
                    last_event: due,
                },
                // Account reached the cap without a frame.
                Place::S1 => AutomatonState {
                    place: Place::S0,
                    deadline: None,
                    s1_entry: None,
                    last_event: due,
                },
                // The S1 clock expired; the zero-time hop back to S2 follows.
                Place::S3 => AutomatonState {
                    place: Place::S2,
                    deadline: Some(due + params.delta1()),
                    s1_entry: None,
                    last_event: due,
                },
                Place::S0 => unreachable!("S0 has no deadline"),
            };
        }
        s.last_event = t;
        Ok(s)
    }
}

impl PolicerState for AutomatonState {
    fn initial(_params: &BucketParams) -> Self {
        AutomatonState {
            place: Place::S0,
            deadline: None,
            s1_entry: None,
            last_event: 0,
        }
    }

    fn on_frame(&self, params: &BucketParams, t: Nanos) -> Result<(Decision, Self), PolicingError> {
        let s = self.advance(params, t)?;
        Ok(match s.place {
            Place::S0 => (
                Decision::Accept,
                AutomatonState {
                    place: Place::S2,
                    deadline: Some(t + params.delta1()),
                    s1_entry: None,
                    last_event: t,
                },
            ),
            Place::S1 => (Decision::Accept, AutomatonState { place: Place::S3, ..s }),
            Place::S2 | Place::S3 => (Decision::Reject, s),
        })
    }
}

pub fn oracle_on_frame(
    state: &OracleState,
    params: &BucketParams,
    t: Nanos,
) -> Result<(Decision, OracleState), PolicingError> {
    state.on_frame(params, t)
}

pub fn automaton_on_frame(
    state: &AutomatonState,
    params: &BucketParams,
    t: Nanos,
) -> Result<(Decision, AutomatonState), PolicingError> {
    state.on_frame(params, t)
}

/// Runs a policer from its initial state over `arrivals`.
pub fn run_policer<P: PolicerState>(params: &BucketParams, arrivals: &[Nanos]) -> Result<Vec<Decision>, PolicingError> {
    let mut state = P::initial(params);
    arrivals
        .iter()
        .map(|&t| {
            let (d, next) = state.on_frame(params, t)?;
            state = next;
            Ok(d)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Match(Vec<Decision>),
    Diverged {
        index: usize,
        oracle: Decision,
        automaton: Decision,
    },
}

impl Equivalence {
    pub fn is_match(&self) -> bool {
        matches!(self, Equivalence::Match(_))
    }
}

/// Runs both policers from a full bucket and reports the first index at which
/// their decisions differ.
pub fn check_equivalence(params: &BucketParams, arrivals: &[Nanos]) -> Result<Equivalence, PolicingError> {
    if let Some(i) = arrivals.windows(2).position(|w| w[1] <= w[0]) {
        return Err(PolicingError::NotIncreasing { index: i + 1 });
    }
    let mut oracle = OracleState::initial(params);
    let mut automaton = AutomatonState::initial(params);
    let mut decisions = Vec::with_capacity(arrivals.len());
    for (index, &t) in arrivals.iter().enumerate() {
        let (a, next_o) = oracle.on_frame(params, t)?;
        let (b, next_a) = automaton.on_frame(params, t)?;
        if a != b {
            return Ok(Equivalence::Diverged {
                index,
                oracle: a,
                automaton: b,
            });
        }
        oracle = next_o;
        automaton = next_a;
        decisions.push(a);
    }
    Ok(Equivalence::Match(decisions))
}

/// Random legal parameters: a BAG from the AFDX pool, a frame size in
/// `[64, 1518]` bytes (tenths allowed) and `0 < j_max <= min(500 us, bag - 1)`.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R) -> BucketParams {
    let bag_ns = Nanos::from(BAG_VALUES_MS[rng.gen_range(0..BAG_VALUES_MS.len())]) * NS_PER_MS;
    let j_max_ns = rng.gen_range(1..=(500 * NS_PER_US).min(bag_ns - 1));
    let s_max = FrameSize::from_tenths(rng.gen_range(MIN_FRAME_BYTES * 10..=MAX_FRAME_BYTES * 10));
    BucketParams::new(s_max, bag_ns, j_max_ns).expect("drawn inside the legal ranges")
}

/// [`random_arrivals`] drawn from a ChaCha8 stream, so a seed gives the same
/// sequence on every platform and `rand` release.
pub fn seeded_arrivals(params: &BucketParams, n: usize, seed: u64) -> Vec<Nanos> {
    use rand::SeedableRng;
    random_arrivals(params, n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
}

/// `n` strictly increasing arrival times starting at 0. Gaps mix uniform draws
/// with the exact thresholds of the automaton (and their neighbours), where
/// the two policers are most likely to disagree.
pub fn random_arrivals<R: Rng + ?Sized>(params: &BucketParams, n: usize, rng: &mut R) -> Vec<Nanos> {
    let (bag, d1, d2) = (params.bag_ns(), params.delta1(), params.delta2());
    let marks = [d1, d2, bag, d1 + d2, bag + d2, 2 * bag];
    let mut t = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let gap = match rng.gen_range(0..4) {
                0 => rng.gen_range(1..=2 * bag),
                1 => rng.gen_range(1..=d2.max(1)),
                _ => {
                    let m = marks[rng.gen_range(0..marks.len())];
                    (m + rng.gen_range(0..=2)).saturating_sub(1).max(1)
                }
            };
            t += gap;
        }
        out.push(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vl::{EsId, VlId, NS_PER_MS};
    use proptest::prelude::*;

    fn example() -> BucketParams {
        BucketParams::new(FrameSize::from_bytes(100), 8 * NS_PER_MS, 2 * NS_PER_MS).unwrap()
    }

    fn ms(v: &[u64]) -> Vec<Nanos> {
        v.iter().map(|x| x * NS_PER_MS).collect()
    }

    #[test]
    fn vl1_export_matches_tc_parameters() {
        let vl = VirtualLinkSpec {
            vl_id: VlId(1),
            source: EsId(1),
            destinations: vec![EsId(3), EsId(4)],
            bag_ms: 32,
            s_max: FrameSize::from_bytes(75),
            j_max_ns: 500_000,
        };
        let p = bucket_params(&vl).unwrap();
        assert_eq!(p.rate_bytes_per_s(), 2343.75);
        assert_eq!(p.ac_max_bytes(), 76.171875);
        let cfg = p.export();
        assert_eq!(cfg.rate_bps, 2344);
        assert_eq!(cfg.burst_b, 77);
        assert_eq!(
            cfg.to_string(),
            "police rate 2344bps burst 77b overhead 14 conform-exceed drop"
        );
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            json,
            r#"{"rate_Bps":2344,"burst_B":77,"overhead_B":14,"conform_exceed":"drop"}"#
        );
    }

    #[test]
    fn deltas() {
        let p = BucketParams::new(FrameSize::from_bytes(100), 8, 2).unwrap();
        assert_eq!((p.delta1(), p.delta2()), (6, 2));
        let p = BucketParams::new(FrameSize::from_bytes(200), 10, 5).unwrap();
        assert_eq!((p.delta1(), p.delta2()), (5, 5));
        assert_eq!(p.ac_max_bytes(), 300.0);
    }

    #[test]
    fn unsound_params_rejected() {
        assert_eq!(
            BucketParams::new(FrameSize::from_bytes(100), 8, 8),
            Err(PolicingError::JitterNotBelowBag { j_max_ns: 8, bag_ns: 8 })
        );
        assert_eq!(
            BucketParams::new(FrameSize::from_bytes(100), 8, 0),
            Err(PolicingError::ZeroJitter)
        );
    }

    #[test]
    fn oracle_hand_trace() {
        let p = example();
        let s0 = OracleState::initial(&p);
        assert_eq!(s0.account_bytes(&p), 125.0);
        let (d, s1) = oracle_on_frame(&s0, &p, 0).unwrap();
        assert_eq!((d, s1.account_bytes(&p)), (Decision::Accept, 25.0));
        let (d, s2) = oracle_on_frame(&s1, &p, 3 * NS_PER_MS).unwrap();
        assert_eq!((d, s2.account_bytes(&p)), (Decision::Reject, 62.5));
        let (d, s3) = oracle_on_frame(&s2, &p, 7 * NS_PER_MS).unwrap();
        assert_eq!((d, s3.account_bytes(&p)), (Decision::Accept, 12.5));
        let (d, s4) = oracle_on_frame(&s3, &p, 14 * NS_PER_MS).unwrap();
        assert_eq!((d, s4.account_bytes(&p)), (Decision::Accept, 0.0));
        assert!(matches!(
            oracle_on_frame(&s4, &p, 13 * NS_PER_MS),
            Err(PolicingError::TimeRegression { .. })
        ));
    }

    #[test]
    fn automaton_hand_trace() {
        let p = example();
        let s = AutomatonState::initial(&p);
        let (d, s) = automaton_on_frame(&s, &p, 0).unwrap();
        assert_eq!(
            (d, s.place(), s.deadline()),
            (Decision::Accept, Place::S2, Some(6 * NS_PER_MS))
        );
        let (d, s) = automaton_on_frame(&s, &p, 3 * NS_PER_MS).unwrap();
        assert_eq!((d, s.place()), (Decision::Reject, Place::S2));
        let (d, s) = automaton_on_frame(&s, &p, 7 * NS_PER_MS).unwrap();
        assert_eq!(d, Decision::Accept);
        assert_eq!(s.place(), Place::S3);
        assert_eq!(s.s1_entry(), Some(6 * NS_PER_MS));
        assert_eq!(s.deadline(), Some(8 * NS_PER_MS));
        let mid = s.advance(&p, 8 * NS_PER_MS).unwrap();
        assert_eq!((mid.place(), mid.deadline()), (Place::S2, Some(14 * NS_PER_MS)));
        let (d, s) = automaton_on_frame(&s, &p, 14 * NS_PER_MS).unwrap();
        assert_eq!((d, s.place()), (Decision::Accept, Place::S3));
        assert_eq!(s.s1_entry(), Some(14 * NS_PER_MS));
    }

    #[test]
    fn automaton_refills_to_s0() {
        let p = example();
        let (_, s) = automaton_on_frame(&AutomatonState::initial(&p), &p, 0).unwrap();
        let s = s.advance(&p, 8 * NS_PER_MS).unwrap();
        assert_eq!((s.place(), s.deadline()), (Place::S0, None));
        assert!(s.advance(&p, 7 * NS_PER_MS).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let p = example();
        let nominal: Vec<Nanos> = (0..50).map(|i| i * p.bag_ns()).collect();
        match check_equivalence(&p, &nominal).unwrap() {
            Equivalence::Match(d) => assert!(d.iter().all(|&x| x == Decision::Accept)),
            other => panic!("{other:?}"),
        }
        let d = check_equivalence(&p, &ms(&[0, 3, 7, 14])).unwrap();
        use Decision::*;
        assert_eq!(d, Equivalence::Match(vec![Accept, Reject, Accept, Accept]));
        assert_eq!(
            check_equivalence(&p, &ms(&[0, 3, 3])),
            Err(PolicingError::NotIncreasing { index: 2 })
        );
    }

    fn params_strategy() -> impl Strategy<Value = BucketParams> {
        (1u32..15_180, 2u64..200, any::<u64>()).prop_map(|(s, bag, j)| {
            let j = 1 + j % (bag - 1);
            BucketParams::new(FrameSize::from_tenths(s), bag, j).unwrap()
        })
    }

    fn arrivals_strategy() -> impl Strategy<Value = Vec<Nanos>> {
        proptest::collection::vec(1u64..40, 0..60).prop_map(|gaps| {
            let mut t = 0;
            gaps.into_iter()
                .map(|g| {
                    t += g;
                    t
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn oracle_account_stays_in_range(p in params_strategy(), arrivals in arrivals_strategy()) {
            let mut s = OracleState::initial(&p);
            for t in arrivals {
                s = s.on_frame(&p, t).unwrap().1;
                prop_assert!(s.account <= p.account_cap());
            }
        }

        #[test]
        fn quiet_bag_after_accept_means_accept(p in params_strategy(), arrivals in arrivals_strategy(), extra in 0u64..50) {
            let mut s = OracleState::initial(&p);
            let mut last_accept = None;
            for &t in &arrivals {
                let (d, n) = s.on_frame(&p, t).unwrap();
                if d == Decision::Accept { last_accept = Some(t); }
                s = n;
            }
            if let Some(t) = last_accept {
                let probe = arrivals.last().copied().unwrap().max(t + p.bag_ns()) + extra;
                prop_assert_eq!(s.on_frame(&p, probe).unwrap().0, Decision::Accept);
            }
        }

        #[test]
        fn automaton_matches_oracle(p in params_strategy(), arrivals in arrivals_strategy()) {
            prop_assert!(check_equivalence(&p, &arrivals).unwrap().is_match());
        }

        #[test]
        fn time_translation_invariance(p in params_strategy(), arrivals in arrivals_strategy(), shift in 0u64..1_000_000) {
            let shifted: Vec<Nanos> = arrivals.iter().map(|t| t + shift).collect();
            let a = run_policer::<AutomatonState>(&p, &arrivals).unwrap();
            let b = run_policer::<AutomatonState>(&p, &shifted).unwrap();
            prop_assert_eq!(&a, &b);
            let c = run_policer::<OracleState>(&p, &shifted).unwrap();
            prop_assert_eq!(a, c);
        }
    }
}
