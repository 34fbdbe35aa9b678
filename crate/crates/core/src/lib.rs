//! Model-independent bounds for forward-start straddles `|Y - X|` given the
//! laws of `X` and `Y`: optimal martingale couplings, semi-static hedges and
//! a linear-programming cross-check.

pub mod bounds;
pub mod cli;
pub mod curve;
pub mod error;
pub mod fixtures;
pub mod hedge;
pub mod lower;
pub mod measure;
pub mod multiperiod;
pub mod oracle;
pub mod potential;
pub mod quadrature;
mod tangent;
pub mod transport;
pub mod upper;

pub use error::{Error, Result};
pub use measure::{convex_order_leq, decompose, MarginalPair, Measure, OrderVerdict};
pub use lower::{CouplingMap, LowerRecord, PushforwardLaw, Selection};
pub use potential::{Potential, Region, ShapeVerdict};
pub use hedge::{HedgePair, SubhedgeCertificate};
pub use upper::{check_strengthened, jensen_bound, UpperCouplingMap, UpperRecord, UpperVerdict};
pub use bounds::{lower_bound, BoundOptions, BoundReport, LowerBound};
pub use multiperiod::{bound_sequence, MarginalSequence, SequenceBound};
