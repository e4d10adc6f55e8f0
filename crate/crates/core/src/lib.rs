//! Rank-phase QAOA workbench for 3-SAT and MaxSAT.
//!
//! * [`cnf`]: DIMACS parsing and clause evaluation (`h`, `d`, `g`, weights).
//! * [`qsim`]: exact product-state simulation of the rank-phase circuit and
//!   shot sampling.
//! * [`shaping`]: cost histograms, nearest-rank quantiles, shaped cost.
//! * [`evolve`]: genetic search over circuit angles.
//! * [`oracle`]: exhaustive enumeration references.
//! * [`harness`]: command implementations and run artifacts.

pub mod cnf;
pub mod evolve;
pub mod harness;
pub mod oracle;
pub mod qsim;
pub mod shaping;

pub use cnf::{Assignment, CnfFormula, CostParams, Literal, ParseError};
pub use evolve::{GaConfig, RunHistory};
pub use oracle::{DistributionTable, Oracle};
pub use qsim::{AngleVector, QuantumState, QubitOrder, ShotSet};
pub use shaping::{CostHistogram, QuantileSet};
