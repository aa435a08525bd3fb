//! Exact arithmetic and constraint machinery for the Luthar-Passi method on
//! torsion units of integral group rings.
//!
//! Modules, bottom-up:
//!
//! * [`cyclotomic`]: cyclotomic integers with exact Galois traces.
//! * [`chartable`]: conjugacy classes, power maps and partial character data.
//! * [`lp`]: partial-augmentation variables and the `μ_l` linear forms.
//! * [`st`]: `(s,t)`-constant characters and two-variable rule-outs.
//! * [`csp`]: complete integer enumeration with divisor chaining.
//! * [`report`]: bundled tables, golden datasets and the reproduction report.

pub mod chartable;
pub mod csp;
pub mod cyclotomic;
pub mod lp;
pub mod numtheory;
pub mod report;
pub mod st;

pub use chartable::{CharTable, Character, CharacterKind, ConjClass, TableError};
pub use csp::{
    chain_solve, solve, ChainConfig, ChainResult, CspInstance, PaSolution, Propagation, SolveError,
    SolveMode,
};
pub use cyclotomic::{CycInt, Rational};
pub use lp::{LinearForm, MuConstraint, PaVar};
pub use st::{RowSelection, RuleOutReport, StConstraintRow, Survivors, Verdict};
