//! FOIL: first-order interpretability queries over Boolean classifiers.
//!
//! The logic has one unary predicate `Pos` (full instance classified
//! positive) and one binary predicate `⊆` (subsumption between partial
//! instances), evaluated over the structure of all partial instances of a
//! model's dimension. This crate provides the models (decision trees, free
//! and ordered BDDs, complete ternary diagrams, perceptrons), the query
//! language with its macro library, three evaluation engines, the
//! binarization front end for real-valued trees, and the reduction-based
//! generators used for testing and benchmarking.

pub mod bench;
pub mod error;
pub mod eval;
pub mod generators;
pub mod hl;
pub mod instance;
pub mod model;
pub mod reductions;
pub mod syntax;

pub use error::{FoilError, Result};
pub use instance::{PartialInstance, Quad, Trit, UndeterminedInstance};
pub use model::{DecisionDiagram, DiagramKind, Model, Node, Perceptron, ValidationReport};
pub use syntax::{Binding, Formula, FragmentTag, Term};
