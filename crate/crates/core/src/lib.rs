//! Deterministic round-based simulation of linear iterative approximate
//! Byzantine consensus in partially connected mobile networks.
//!
//! The crate is split along the lifecycle of a run:
//!
//! - [`protocol`]: the per-node state machine (gathering, admission test,
//!   reducing, averaging, periodic log reset).
//! - [`dynamics`]: mobility, disk-model round graphs, lossy delivery and
//!   joint graphs over round windows.
//! - [`adversary`]: Byzantine message generation.
//! - [`trace`]: the per-round execution record and its JSON-lines format.
//! - [`analysis`]: offline checkers over traces (validity, legality,
//!   safety, group classification, the convergence condition, phase
//!   progress).
//! - [`harness`]: scenario files, run orchestration, sweeps and the bundled
//!   scenario library.
//!
//! ```
//! use mabc::harness::{library::builtin, run_scenario};
//!
//! let cfg = builtin("fully_connected_baseline").unwrap();
//! let out = run_scenario(&cfg).unwrap();
//! assert!(out.report.passed);
//! assert_eq!(out.report.convergence.at_round, Some(5));
//! ```

pub mod adversary;
pub mod analysis;
pub mod dynamics;
pub mod harness;
pub mod protocol;
pub mod rng;
pub mod trace;

mod float;

pub use protocol::{NodeId, Round};
