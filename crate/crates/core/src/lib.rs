//! Discrete-event simulation and analysis of AFDX (ARINC 664 part 7) networks.
//!
//! The crate is layered bottom-up:
//!
//! * [`vl`]: virtual link contracts, frames, sequence numbers and the jitter bound.
//! * [`policing`]: the frame-based token bucket, both as an account oracle and
//!   as a four-place timed automaton.
//! * [`topology`] and [`models`]: network descriptions and the three transport
//!   abstractions (timed channels, direct VLs, switched VLs).
//! * [`engine`]: a deterministic event executor producing a [`engine::TraceLog`].
//! * [`monitors`] and [`analysis`]: latency, jitter and drop monitors, ECDFs.
//! * [`generators`]: random and template-based benchmark topologies.

pub mod analysis;
pub mod engine;
pub mod generators;
pub mod models;
pub mod monitors;
pub mod policing;
pub mod topology;
pub mod vl;

pub use engine::{run, ModelLevel, Scenario, TraceEvent, TraceKind, TraceLog};
pub use topology::TopologySpec;
pub use vl::{EsId, FrameSize, Nanos, VirtualLinkSpec, VlId};
