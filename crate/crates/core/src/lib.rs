//! Analytics for time-sampled user position traces: line-of-sight contact
//! networks, temporal / spatial / graph-theoretic metric suites, synthetic
//! mobility generation, and contact-event export for trace-driven DTN
//! simulation.

pub mod contact;
pub mod graph;
pub mod io;
pub mod model;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use contact::{CensorPolicy, ContactInterval, PairTimeline, Session};
pub use model::{
    DistanceMode, LandConfig, Position, RadioRange, Snapshot, TraceSet, UserId,
};
pub use stats::EmpiricalDistribution;
