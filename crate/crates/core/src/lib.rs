//! Propagation sets and Harnack-type estimates for second order hypoelliptic
//! operators `ℒu = Σ ∂ᵢ(aᵢⱼ ∂ⱼu) + Σ bᵢ ∂ᵢu`.
//!
//! * [`expr`]: coefficient expressions (parse, evaluate, differentiate).
//! * [`operator`]: operators, vector fields `Xⱼ`, `Y`, Lie brackets, barriers, lifting.
//! * [`reach`]: grid approximation of the propagation set by flood fill.
//! * [`path`]: explicit propagation paths and their validation.
//! * [`pde`]: monotone upwind discretization, harmonic measures, Harnack ratios.
//! * [`catalog`]: the worked example operators and domains.

pub mod catalog;
pub mod expr;
pub mod operator;
pub mod path;
pub mod pde;
pub mod reach;

pub use expr::{parse, Expr, ParseError};
pub use operator::{BarrierParams, DomainSpec, OperatorError, OperatorSpec, VectorField};
pub use path::{ControlSegment, PathError, PropagationPath, ValidationReport};
pub use pde::{
    DiscreteOperator, DiscreteSolution, HarmonicMeasureRow, HarnackEstimate, PdeError, Ratio,
};
pub use reach::{CellSet, Grid, ReachConfig, ReachError, ReachSet};
