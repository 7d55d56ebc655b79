// NaN must fail every range check, so `!(a < b)` is intended
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifunction;
pub mod catalog;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod problem;
pub mod report;
pub mod setmap;
pub mod solver;
pub mod verdict;

pub use bifunction::{Bifunction, ObjectiveFunction, QviOperator};
pub use catalog::{AnyInstance, Payload, ProblemInstance};
pub use error::{Error, Result};
pub use geometry::{CompactBox, ExactScalar, Grid, Point, Rational, Scalar, ScalarKind};
pub use report::VerifyReport;
pub use setmap::{ConvexRegion, MapVariant, SetValuedMap};
pub use solver::{ProblemKind, SolveReport, SolverConfig};
pub use verdict::Verdict;
