//! Model classes: decision diagrams and perceptrons, plus the JSON exchange
//! format used by the CLI.

mod diagram;
mod json;
mod perceptron;

pub use diagram::{DecisionDiagram, DiagramKind, Node, ValidationReport};
pub use json::{model_from_json, model_to_json};
pub use perceptron::{DomainInstance, Perceptron};

use crate::error::Result;
use crate::instance::PartialInstance;

/// Any supported model class.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Diagram(DecisionDiagram),
    Perceptron(Perceptron),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Diagram(d) => d.dim,
            Model::Perceptron(p) => p.dim(),
        }
    }

    /// Classify an instance. Binary diagrams and perceptrons require full
    /// input; ternary diagrams accept partial instances.
    pub fn classify(&self, e: &PartialInstance) -> Result<bool> {
        match self {
            Model::Diagram(d) => d.classify(e),
            Model::Perceptron(p) => p.classify(e),
        }
    }

    /// Membership of `e` in the Pos predicate of the associated structure:
    /// full and classified positive. For ternary diagrams this matches the
    /// convention that only full instances can be positive.
    pub fn is_positive_instance(&self, e: &PartialInstance) -> Result<bool> {
        if !e.is_full() {
            return Ok(false);
        }
        self.classify(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::PartialInstance;

    #[test]
    fn pos_predicate_false_on_partials() {
        let m = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 2, true));
        assert!(m.is_positive_instance(&PartialInstance::parse("(1,1)").unwrap()).unwrap());
        assert!(!m.is_positive_instance(&PartialInstance::parse("(1,?)").unwrap()).unwrap());
    }
}
