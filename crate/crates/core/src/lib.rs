//! Hybrid path-sum symbolic execution and verification for hybrid quantum programs.

pub mod boolexpr;
pub mod error;
pub mod phase;
pub mod interval;
pub mod exact;
pub mod scalar;
pub mod memory;
pub mod compiled;
pub mod hps;
pub mod prob;
pub mod rewrite;
pub mod lang;
pub mod semantics;
pub mod oracle;
pub mod assert;
pub mod cases;
