//! Stabilizer-state engine: Pauli algebra, CHP tableau with destabilizers,
//! gate rules derived from conjugation tables, cluster-graph rewrite rules,
//! dual-rail linear-optics simulation and cross-checking oracles.

pub mod dense;
pub mod error;
pub mod gf2;
pub mod graph;
pub mod kmap;
pub mod optics;
pub mod pauli;
pub mod tableau;
pub mod verifier;

pub use error::{Error, Result};
pub use graph::{Branch, ClusterGraph, LocalOp, RuleOutcome};
pub use kmap::GateId;
pub use pauli::{Pauli, PauliString};
pub use tableau::{Basis, MeasurementRecord, Tableau};
