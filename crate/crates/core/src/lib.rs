//! Tree-splitting random access over a symbolic collision channel.
//!
//! * [`signal`]: superposition and exact cancellation of packet signals.
//! * [`crp`]: collision resolution protocols (BTA, MTA, SICTA, ATIC and
//!   its collision-only broadcast variant) driven one CRI at a time.
//! * [`analytics`]: exact and asymptotic CRI length and throughput.
//! * [`traffic`]: long-run simulation with Poisson arrivals.

pub mod analytics;
pub mod crp;
pub mod signal;
pub mod traffic;
