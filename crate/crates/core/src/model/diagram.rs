//! Rooted labeled DAG models: decision trees, free/ordered/complete BDDs and
//! complete ternary diagrams.

use crate::error::{FoilError, Result};
use crate::instance::{PartialInstance, Trit};
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagramKind {
    Dt,
    Fbdd,
    Obdd,
    Cobdd,
    Cotdd,
}

impl DiagramKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagramKind::Dt => "dt",
            DiagramKind::Fbdd => "fbdd",
            DiagramKind::Obdd => "obdd",
            DiagramKind::Cobdd => "cobdd",
            DiagramKind::Cotdd => "cotdd",
        }
    }

    pub fn is_ternary(self) -> bool {
        self == DiagramKind::Cotdd
    }
}

/// One node of a diagram. Feature indices are 0-based internally and in files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Internal {
        var: usize,
        lo: usize,
        hi: usize,
        /// Taken on `?` inputs; present only in ternary diagrams.
        bot: Option<usize>,
    },
    Leaf {
        value: bool,
    },
}

/// A decision diagram model. Nodes are addressed by their index in `nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionDiagram {
    pub kind: DiagramKind,
    pub dim: usize,
    pub nodes: Vec<Node>,
    pub root: usize,
    /// Feature order respected along every path (OBDD/COBDD/COTDD).
    pub order: Option<Vec<usize>>,
}

/// Structural flags and the width statistic reported by [`DecisionDiagram::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub is_free: bool,
    pub is_ordered: bool,
    pub is_complete: bool,
    /// Maximum number of nodes sharing one feature label.
    pub width: usize,
}

impl DecisionDiagram {
    pub fn constant(kind: DiagramKind, dim: usize, value: bool) -> DecisionDiagram {
        DecisionDiagram {
            kind,
            dim,
            nodes: vec![Node::Leaf { value }],
            root: 0,
            order: None,
        }
    }

    fn children(&self, id: usize) -> Vec<usize> {
        match &self.nodes[id] {
            Node::Leaf { .. } => vec![],
            Node::Internal { lo, hi, bot, .. } => {
                let mut c = vec![*lo, *hi];
                if let Some(b) = bot {
                    c.push(*b);
                }
                c
            }
        }
    }

    /// Structural sanity: ids in range, arity matching the kind, acyclic.
    /// Returns a topological order (parents before children).
    fn check_structure(&self) -> Result<Vec<usize>> {
        if self.dim == 0 {
            return Err(FoilError::InvalidModel("dimension must be at least 1".into()));
        }
        if self.root >= self.nodes.len() {
            return Err(FoilError::InvalidModel(format!("dangling root id {}", self.root)));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Internal { var, lo, hi, bot } = node {
                if *var >= self.dim {
                    return Err(FoilError::InvalidModel(format!(
                        "node {id} tests feature {var} outside dimension {}",
                        self.dim
                    )));
                }
                for child in [Some(*lo), Some(*hi), *bot].into_iter().flatten() {
                    if child >= self.nodes.len() {
                        return Err(FoilError::InvalidModel(format!(
                            "node {id} has dangling child id {child}"
                        )));
                    }
                }
                match (self.kind.is_ternary(), bot.is_some()) {
                    (true, false) => {
                        return Err(FoilError::InvalidModel(format!(
                            "ternary diagram node {id} is missing its `bot` edge"
                        )))
                    }
                    (false, true) => {
                        return Err(FoilError::InvalidModel(format!(
                            "binary diagram node {id} must not have a `bot` edge"
                        )))
                    }
                    _ => {}
                }
            }
        }
        // DFS cycle check from the root.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Black,
        }
        let mut marks = vec![Mark::White; self.nodes.len()];
        let mut topo = Vec::new();
        let mut stack: Vec<(usize, usize)> = vec![(self.root, 0)];
        marks[self.root] = Mark::Grey;
        while let Some(frame) = stack.last_mut() {
            let id = frame.0;
            let children = self.children(id);
            if frame.1 < children.len() {
                let child = children[frame.1];
                frame.1 += 1;
                match marks[child] {
                    Mark::White => {
                        marks[child] = Mark::Grey;
                        stack.push((child, 0));
                    }
                    Mark::Grey => {
                        return Err(FoilError::InvalidModel(format!(
                            "cycle through node {child}"
                        )))
                    }
                    Mark::Black => {}
                }
            } else {
                marks[id] = Mark::Black;
                topo.push(id);
                stack.pop();
            }
        }
        topo.reverse();
        Ok(topo)
    }

    /// Validate structure and report freeness, orderedness, completeness and width.
    pub fn validate(&self) -> Result<ValidationReport> {
        let topo = self.check_structure()?;
        let reachable: HashSet<usize> = topo.iter().copied().collect();

        let mut label_count: HashMap<usize, usize> = HashMap::new();
        for &id in &topo {
            if let Node::Internal { var, .. } = self.nodes[id] {
                *label_count.entry(var).or_insert(0) += 1;
            }
        }
        let width = label_count.values().copied().max().unwrap_or(0);

        // Free: no feature repeats on any root-to-leaf path. Equivalent to:
        // no node's label occurs among the labels of its strict descendants.
        let mut desc_labels: HashMap<usize, HashSet<usize>> = HashMap::new();
        for &id in topo.iter().rev() {
            let mut labels = HashSet::new();
            for child in self.children(id) {
                if let Node::Internal { var, .. } = self.nodes[child] {
                    labels.insert(var);
                }
                labels.extend(desc_labels[&child].iter().copied());
            }
            desc_labels.insert(id, labels);
        }
        let mut is_free = true;
        for &id in &topo {
            if let Node::Internal { var, .. } = self.nodes[id] {
                if desc_labels[&id].contains(&var) {
                    is_free = false;
                }
            }
        }

        // Ordered: some linear order on features increases along every path.
        // With an explicit order, check it; otherwise check that the
        // label-precedence digraph is acyclic.
        let is_ordered = match &self.order {
            Some(order) => {
                let mut rank = vec![usize::MAX; self.dim];
                let mut ok = order.len() == self.dim;
                for (r, &f) in order.iter().enumerate() {
                    if f >= self.dim || rank[f] != usize::MAX {
                        ok = false;
                        break;
                    }
                    rank[f] = r;
                }
                ok && topo.iter().all(|&id| match self.nodes[id] {
                    Node::Internal { var, .. } => self.children(id).iter().all(|&c| {
                        match self.nodes[c] {
                            Node::Internal { var: cv, .. } => rank[var] < rank[cv],
                            Node::Leaf { .. } => true,
                        }
                    }),
                    Node::Leaf { .. } => true,
                })
            }
            None => {
                // Edges label(u) -> label of any strict descendant of u.
                let mut edges: HashSet<(usize, usize)> = HashSet::new();
                for &id in &topo {
                    if let Node::Internal { var, .. } = self.nodes[id] {
                        for &l in &desc_labels[&id] {
                            edges.insert((var, l));
                        }
                    }
                }
                let mut indeg = vec![0usize; self.dim];
                let mut adj: Vec<Vec<usize>> = vec![vec![]; self.dim];
                for &(a, b) in &edges {
                    if a == b {
                        continue;
                    }
                    adj[a].push(b);
                    indeg[b] += 1;
                }
                // A self-loop (label repeated on a path) means not ordered.
                let self_loop = edges.iter().any(|&(a, b)| a == b);
                let mut queue: Vec<usize> = (0..self.dim).filter(|&v| indeg[v] == 0).collect();
                let mut seen = 0;
                while let Some(v) = queue.pop() {
                    seen += 1;
                    for &w in &adj[v] {
                        indeg[w] -= 1;
                        if indeg[w] == 0 {
                            queue.push(w);
                        }
                    }
                }
                !self_loop && seen == self.dim
            }
        };

        // Complete: every root-to-leaf path tests every feature. Checked as:
        // all nodes sit at a consistent depth, internal chains are full-length
        // and no feature repeats, so each path tests dim distinct features.
        let mut depth: HashMap<usize, usize> = HashMap::new();
        depth.insert(self.root, 0);
        let mut consistent_depth = true;
        let mut leaves_at_dim = true;
        for &id in &topo {
            let d = depth[&id];
            match &self.nodes[id] {
                Node::Leaf { .. } => {
                    if d != self.dim {
                        leaves_at_dim = false;
                    }
                }
                Node::Internal { .. } => {
                    for child in self.children(id) {
                        match depth.get(&child) {
                            Some(&dc) if dc != d + 1 => consistent_depth = false,
                            None => {
                                depth.insert(child, d + 1);
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let is_complete = consistent_depth && leaves_at_dim && is_free && !reachable.is_empty();

        Ok(ValidationReport {
            is_free,
            is_ordered,
            is_complete,
            width,
        })
    }

    /// Classify a full instance (binary diagrams) or a partial one (ternary).
    pub fn classify(&self, e: &PartialInstance) -> Result<bool> {
        if e.dim() != self.dim {
            return Err(FoilError::DimensionMismatch(format!(
                "instance dimension {} vs model dimension {}",
                e.dim(),
                self.dim
            )));
        }
        if !self.kind.is_ternary() && !e.is_full() {
            return Err(FoilError::Unsupported(
                "binary diagrams classify only full instances".into(),
            ));
        }
        let mut id = self.root;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value } => return Ok(*value),
                Node::Internal { var, lo, hi, bot } => {
                    id = match e.get(*var) {
                        Trit::Zero => *lo,
                        Trit::One => *hi,
                        Trit::Bot => bot.expect("checked: ternary diagram"),
                    };
                }
            }
        }
    }

    /// Search for a full completion of `e` reaching a leaf with `target` value,
    /// pruning edges that contradict a defined feature of `e`. Sound and
    /// complete on free diagrams. Features off the accepting path and not
    /// defined in `e` are filled with 0. Ternary `bot` edges are never taken
    /// since the witness must be full.
    pub fn completion_with_value(&self, e: &PartialInstance, target: bool) -> Option<PartialInstance> {
        debug_assert_eq!(e.dim(), self.dim);
        // allowed 0/1 children under the pruning by e
        let allowed = |id: usize| -> Vec<(usize, Trit)> {
            match &self.nodes[id] {
                Node::Leaf { .. } => vec![],
                Node::Internal { var, lo, hi, .. } => match e.get(*var) {
                    Trit::Zero => vec![(*lo, Trit::Zero)],
                    Trit::One => vec![(*hi, Trit::One)],
                    Trit::Bot => vec![(*lo, Trit::Zero), (*hi, Trit::One)],
                },
            }
        };
        // Which nodes can reach a target leaf through the pruned graph?
        let mut reaches = vec![None::<bool>; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(&id) = stack.last() {
            if reaches[id].is_some() {
                stack.pop();
                continue;
            }
            match &self.nodes[id] {
                Node::Leaf { value } => {
                    reaches[id] = Some(*value == target);
                    stack.pop();
                }
                _ => {
                    let mut pending = false;
                    for (child, _) in allowed(id) {
                        if reaches[child].is_none() {
                            stack.push(child);
                            pending = true;
                        }
                    }
                    if !pending {
                        let hit = allowed(id).iter().any(|&(c, _)| reaches[c] == Some(true));
                        reaches[id] = Some(hit);
                        stack.pop();
                    }
                }
            }
        }
        if reaches[self.root] != Some(true) {
            return None;
        }
        // Extract one accepted path, recording the values it fixes.
        let mut out = e.clone();
        let mut id = self.root;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value } => {
                    debug_assert_eq!(*value, target);
                    break;
                }
                Node::Internal { var, .. } => {
                    let var = *var;
                    let (child, v) = allowed(id)
                        .into_iter()
                        .find(|&(c, _)| reaches[c] == Some(true))
                        .expect("reachability said yes");
                    out.set(var, v);
                    id = child;
                }
            }
        }
        for i in 0..out.dim() {
            if out.get(i) == Trit::Bot {
                out.set(i, Trit::Zero);
            }
        }
        Some(out)
    }

    /// A full completion of `e` classified positive, if one exists (free diagrams).
    pub fn positive_completion(&self, e: &PartialInstance) -> Option<PartialInstance> {
        self.completion_with_value(e, true)
    }

    /// A full completion of `e` classified negative, if one exists (free diagrams).
    pub fn negative_completion(&self, e: &PartialInstance) -> Option<PartialInstance> {
        self.completion_with_value(e, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::PartialInstance;

    /// The clause tree for C = (x1 ∨ x2 ∨ x3) over features 0,1,2 of dim 3:
    /// a complete depth-3 tree whose only false leaf is at (0,0,0).
    pub(crate) fn clause_tree_dim3() -> DecisionDiagram {
        // Nodes: 0..6 internal (levels 0,1,2), 7..14 leaves for the 8 paths.
        let mut nodes = Vec::new();
        // level 0: node 0 tests f0 -> (1,2); level 1: nodes 1,2 test f1; level 2: 3..6 test f2.
        nodes.push(Node::Internal { var: 0, lo: 1, hi: 2, bot: None });
        nodes.push(Node::Internal { var: 1, lo: 3, hi: 4, bot: None });
        nodes.push(Node::Internal { var: 1, lo: 5, hi: 6, bot: None });
        for i in 0..4 {
            nodes.push(Node::Internal { var: 2, lo: 7 + 2 * i, hi: 8 + 2 * i, bot: None });
        }
        for path in 0..8 {
            let (b0, b1, b2) = (path >> 2 & 1, path >> 1 & 1, path & 1);
            let value = b0 == 1 || b1 == 1 || b2 == 1;
            nodes.push(Node::Leaf { value });
        }
        DecisionDiagram {
            kind: DiagramKind::Dt,
            dim: 3,
            nodes,
            root: 0,
            order: Some(vec![0, 1, 2]),
        }
    }

    fn pi(text: &str) -> PartialInstance {
        PartialInstance::parse(text).unwrap()
    }

    #[test]
    fn clause_tree_classification() {
        let t = clause_tree_dim3();
        assert!(!t.classify(&pi("(0,0,0)")).unwrap());
        assert!(t.classify(&pi("(1,0,0)")).unwrap());
        assert!(t.classify(&pi("(0,0,1)")).unwrap());
        assert!(t.classify(&pi("(0,?,1)")).is_err());
    }

    #[test]
    fn validate_clause_tree() {
        let t = clause_tree_dim3();
        let report = t.validate().unwrap();
        assert!(report.is_free);
        assert!(report.is_ordered);
        assert!(report.is_complete);
        assert_eq!(report.width, 4);
    }

    #[test]
    fn validate_path_shaped() {
        // A path testing features 0,1,2 once each, complete and ordered, width 1.
        let nodes = vec![
            Node::Internal { var: 0, lo: 1, hi: 1, bot: None },
            Node::Internal { var: 1, lo: 2, hi: 2, bot: None },
            Node::Internal { var: 2, lo: 3, hi: 4, bot: None },
            Node::Leaf { value: false },
            Node::Leaf { value: true },
        ];
        let d = DecisionDiagram { kind: DiagramKind::Obdd, dim: 3, nodes, root: 0, order: None };
        let report = d.validate().unwrap();
        assert!(report.is_free && report.is_ordered && report.is_complete);
        assert_eq!(report.width, 1);
    }

    #[test]
    fn validate_repeated_label_not_free() {
        let nodes = vec![
            Node::Internal { var: 0, lo: 1, hi: 2, bot: None },
            Node::Internal { var: 0, lo: 2, hi: 3, bot: None },
            Node::Leaf { value: false },
            Node::Leaf { value: true },
        ];
        let d = DecisionDiagram { kind: DiagramKind::Fbdd, dim: 2, nodes, root: 0, order: None };
        let report = d.validate().unwrap();
        assert!(!report.is_free);
        assert!(!report.is_ordered);
    }

    #[test]
    fn validate_rejects_cycle_and_dangling() {
        let cyclic = DecisionDiagram {
            kind: DiagramKind::Fbdd,
            dim: 2,
            nodes: vec![
                Node::Internal { var: 0, lo: 1, hi: 1, bot: None },
                Node::Internal { var: 1, lo: 0, hi: 0, bot: None },
            ],
            root: 0,
            order: None,
        };
        assert!(cyclic.validate().is_err());
        let dangling = DecisionDiagram {
            kind: DiagramKind::Fbdd,
            dim: 2,
            nodes: vec![Node::Internal { var: 0, lo: 5, hi: 5, bot: None }],
            root: 0,
            order: None,
        };
        assert!(dangling.validate().is_err());
    }

    #[test]
    fn positive_completion_examples() {
        let t = clause_tree_dim3();
        // (?,0,0) completes positively only via x1 = 1.
        let w = t.positive_completion(&pi("(?,0,0)")).unwrap();
        assert_eq!(w, pi("(1,0,0)"));
        assert!(t.positive_completion(&pi("(0,0,0)")).is_none());

        let yes = DecisionDiagram::constant(DiagramKind::Dt, 2, true);
        let w = yes.positive_completion(&pi("(?,?)")).unwrap();
        assert!(w.is_full());
        assert!(yes.classify(&w).unwrap());
        let no = DecisionDiagram::constant(DiagramKind::Dt, 2, false);
        assert!(no.positive_completion(&pi("(?,?)")).is_none());
    }

    #[test]
    fn completion_matches_brute_force() {
        // Cross-check positive_completion against enumeration on the clause tree.
        let t = clause_tree_dim3();
        for e in PartialInstance::enumerate_all(3) {
            let brute = e.completions().any(|c| t.classify(&c).unwrap());
            let fast = t.positive_completion(&e);
            assert_eq!(brute, fast.is_some(), "on {e}");
            if let Some(w) = fast {
                assert!(e.subsumed_by(&w).unwrap());
                assert!(t.classify(&w).unwrap());
            }
        }
    }
}
