//! Quantum detailed balance through elementary transitions.
//!
//! A channel `ℰ` together with a state `ρ` is encoded as a bipartite state
//! `κ` (the state-relative Choi–Jamiołkowski map). Detailed balance becomes
//! the swap symmetry of `κ`, and the dual channel and the balance conditions
//! built on it are computed from `κ` directly.

pub mod balance;
pub mod catalog;
pub mod channel;
pub mod classical;
pub mod error;
pub mod linalg;
pub mod parity;
pub mod random;
pub mod schema;
pub mod tolerance;
pub mod transitions;

pub use error::{Error, Result};
pub use tolerance::ToleranceConfig;
