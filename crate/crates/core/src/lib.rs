//! Partitioned compilation of commutable two-qubit circuits onto
//! reconfigurable neutral-atom arrays.

pub mod circuit;
pub mod compiler;
pub mod division;
pub mod encoder;
pub mod hardware;
pub mod metrics;
pub mod orchestrator;
pub mod schedule;
pub mod solver;
pub mod verifier;
