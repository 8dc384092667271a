//! The JSON model exchange format.
//!
//! ```json
//! {"type": "dt", "dim": 3, "root": 0,
//!  "nodes": [{"id": 0, "var": 0, "lo": 1, "hi": 2},
//!            {"id": 1, "leaf": true, "value": 0},
//!            {"id": 2, "leaf": true, "value": 1}],
//!  "features": ["a", "b", "c"], "classes": ["neg", "pos"]}
//! ```
//!
//! `type` is one of `dt`, `fbdd`, `obdd`, `cobdd`, `cotdd`, `perceptron`.
//! Diagram feature indices (`var`, `order`) are 0-based. Ternary nodes add a
//! `bot` child id. Perceptrons use `weights`, `threshold` and optionally
//! `protected` instead of `nodes`/`root`.

use crate::error::{FoilError, Result};
use crate::model::{DecisionDiagram, DiagramKind, Model, Node, Perceptron};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "type")]
    kind: String,
    dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    root: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    nodes: Vec<NodeFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    protected: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeFile {
    id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    var: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lo: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hi: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leaf: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<u8>,
}

/// Feature and class names carried alongside a model file.
#[derive(Debug, Clone, Default)]
pub struct ModelMeta {
    pub features: Option<Vec<String>>,
    pub classes: Option<Vec<String>>,
}

/// Parse a model from its JSON text. Structural validity is checked; the
/// declared kind's invariants (freeness, order, completeness) are verified
/// against the validation report.
pub fn model_from_json(text: &str) -> Result<(Model, ModelMeta)> {
    let file: ModelFile = serde_json::from_str(text)?;
    let meta = ModelMeta { features: file.features.clone(), classes: file.classes.clone() };
    if file.kind == "perceptron" {
        let weights = file
            .weights
            .ok_or_else(|| FoilError::InvalidModel("perceptron requires `weights`".into()))?;
        if weights.len() != file.dim {
            return Err(FoilError::InvalidModel(format!(
                "dim {} does not match {} weights",
                file.dim,
                weights.len()
            )));
        }
        let threshold = file
            .threshold
            .ok_or_else(|| FoilError::InvalidModel("perceptron requires `threshold`".into()))?;
        let mut p = Perceptron::new(weights, threshold);
        if let Some(prot) = file.protected {
            for &i in &prot {
                if i >= p.dim() {
                    return Err(FoilError::InvalidModel(format!(
                        "protected feature {i} outside dimension {}",
                        p.dim()
                    )));
                }
            }
            p.protected = prot;
        }
        return Ok((Model::Perceptron(p), meta));
    }

    let kind = match file.kind.as_str() {
        "dt" => DiagramKind::Dt,
        "fbdd" => DiagramKind::Fbdd,
        "obdd" => DiagramKind::Obdd,
        "cobdd" => DiagramKind::Cobdd,
        "cotdd" => DiagramKind::Cotdd,
        other => {
            return Err(FoilError::InvalidModel(format!("unknown model type `{other}`")));
        }
    };
    let root_id = file
        .root
        .ok_or_else(|| FoilError::InvalidModel("diagram requires `root`".into()))?;
    // Map external ids to dense indices.
    let mut index: HashMap<usize, usize> = HashMap::new();
    for (i, n) in file.nodes.iter().enumerate() {
        if index.insert(n.id, i).is_some() {
            return Err(FoilError::InvalidModel(format!("duplicate node id {}", n.id)));
        }
    }
    let lookup = |id: usize| -> Result<usize> {
        index
            .get(&id)
            .copied()
            .ok_or_else(|| FoilError::InvalidModel(format!("dangling child id {id}")))
    };
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for n in &file.nodes {
        if n.leaf == Some(true) {
            let value = n
                .value
                .ok_or_else(|| FoilError::InvalidModel(format!("leaf {} missing value", n.id)))?;
            nodes.push(Node::Leaf { value: value != 0 });
        } else {
            let var = n
                .var
                .ok_or_else(|| FoilError::InvalidModel(format!("node {} missing var", n.id)))?;
            let lo = lookup(n.lo.ok_or_else(|| {
                FoilError::InvalidModel(format!("node {} missing lo child", n.id))
            })?)?;
            let hi = lookup(n.hi.ok_or_else(|| {
                FoilError::InvalidModel(format!("node {} missing hi child", n.id))
            })?)?;
            let bot = n.bot.map(lookup).transpose()?;
            nodes.push(Node::Internal { var, lo, hi, bot });
        }
    }
    let diagram = DecisionDiagram {
        kind,
        dim: file.dim,
        nodes,
        root: lookup(root_id)?,
        order: file.order,
    };
    let report = diagram.validate()?;
    let ok = match kind {
        DiagramKind::Dt | DiagramKind::Fbdd => report.is_free,
        DiagramKind::Obdd => report.is_free && report.is_ordered,
        DiagramKind::Cobdd | DiagramKind::Cotdd => {
            report.is_free && report.is_ordered && report.is_complete
        }
    };
    if !ok {
        return Err(FoilError::InvalidModel(format!(
            "diagram does not satisfy the invariants of type `{}` (free={}, ordered={}, complete={})",
            kind.as_str(),
            report.is_free,
            report.is_ordered,
            report.is_complete
        )));
    }
    Ok((Model::Diagram(diagram), meta))
}

/// Serialize a model back to the JSON format.
pub fn model_to_json(model: &Model, meta: &ModelMeta) -> String {
    let file = match model {
        Model::Perceptron(p) => ModelFile {
            kind: "perceptron".into(),
            dim: p.dim(),
            order: None,
            root: None,
            nodes: vec![],
            weights: Some(p.weights.clone()),
            threshold: Some(p.threshold),
            protected: (!p.protected.is_empty()).then(|| p.protected.clone()),
            features: meta.features.clone(),
            classes: meta.classes.clone(),
        },
        Model::Diagram(d) => ModelFile {
            kind: d.kind.as_str().into(),
            dim: d.dim,
            order: d.order.clone(),
            root: Some(d.root),
            nodes: d
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| match n {
                    Node::Leaf { value } => NodeFile {
                        id,
                        var: None,
                        lo: None,
                        hi: None,
                        bot: None,
                        leaf: Some(true),
                        value: Some(u8::from(*value)),
                    },
                    Node::Internal { var, lo, hi, bot } => NodeFile {
                        id,
                        var: Some(*var),
                        lo: Some(*lo),
                        hi: Some(*hi),
                        bot: *bot,
                        leaf: None,
                        value: None,
                    },
                })
                .collect(),
            weights: None,
            threshold: None,
            protected: None,
            features: meta.features.clone(),
            classes: meta.classes.clone(),
        },
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::PartialInstance;

    #[test]
    fn roundtrip_diagram() {
        let text = r#"{
            "type": "dt", "dim": 2, "root": 0,
            "nodes": [
                {"id": 0, "var": 0, "lo": 1, "hi": 2},
                {"id": 1, "leaf": true, "value": 0},
                {"id": 2, "var": 1, "lo": 1, "hi": 3},
                {"id": 3, "leaf": true, "value": 1}
            ],
            "features": ["a", "b"], "classes": ["neg", "pos"]
        }"#;
        let (m, meta) = model_from_json(text).unwrap();
        assert_eq!(m.dim(), 2);
        assert!(m.classify(&PartialInstance::parse("(1,1)").unwrap()).unwrap());
        assert!(!m.classify(&PartialInstance::parse("(0,1)").unwrap()).unwrap());
        let again = model_to_json(&m, &meta);
        let (m2, _) = model_from_json(&again).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn roundtrip_perceptron() {
        let text = r#"{"type": "perceptron", "dim": 3, "weights": [1.0, 2.0, 1.0],
                       "threshold": 3.5, "protected": [2]}"#;
        let (m, meta) = model_from_json(text).unwrap();
        assert!(m.classify(&PartialInstance::parse("(1,1,1)").unwrap()).unwrap());
        assert!(!m.classify(&PartialInstance::parse("(1,1,0)").unwrap()).unwrap());
        let (m2, _) = model_from_json(&model_to_json(&m, &meta)).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn kind_invariants_enforced() {
        // Label repeated on a path cannot be an fbdd.
        let text = r#"{
            "type": "fbdd", "dim": 2, "root": 0,
            "nodes": [
                {"id": 0, "var": 0, "lo": 1, "hi": 2},
                {"id": 1, "var": 0, "lo": 2, "hi": 3},
                {"id": 2, "leaf": true, "value": 0},
                {"id": 3, "leaf": true, "value": 1}
            ]
        }"#;
        assert!(model_from_json(text).is_err());
    }

    #[test]
    fn malformed_json_is_an_error() {
        assert!(model_from_json("{not json").is_err());
        assert!(model_from_json(r#"{"type":"dt","dim":1,"root":7,"nodes":[]}"#).is_err());
    }
}
