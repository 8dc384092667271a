//! Seeded random generators for benchmark models and queries.

use crate::error::{FoilError, Result};
use crate::instance::Trit;
use crate::model::{DecisionDiagram, DiagramKind, Node};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A random query in the plain-text syntax: a quantifier prefix over
/// `nvars` variables (all existential or all universal) and a recursively
/// split matrix over the atoms `P(x)`, `C <= x`, `x <= C`, `x <= y`, with a
/// coin-flip negation in front of every subexpression. Deterministic for a
/// fixed seed.
pub fn random_query(dim: usize, nvars: usize, size: usize, seed: u64) -> String {
    assert!(size >= 1 && nvars >= 1 && dim >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let universal = rng.gen_bool(0.5);
    let vars: Vec<String> = (0..nvars).map(|i| format!("x{}", i + 1)).collect();
    let mut text = String::new();
    for v in &vars {
        text.push_str(if universal { "ForAll " } else { "Exists " });
        text.push_str(v);
        text.push_str(", ");
    }
    text.push_str(&expression(dim, &vars, size, &mut rng));
    text
}

fn random_constant(dim: usize, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("(");
    for i in 0..dim {
        if i > 0 {
            out.push(',');
        }
        out.push(match rng.gen_range(0..3) {
            0 => '0',
            1 => '1',
            _ => '?',
        });
    }
    out.push(')');
    out
}

fn expression(dim: usize, vars: &[String], size: usize, rng: &mut ChaCha8Rng) -> String {
    let negated = rng.gen_bool(0.5);
    let body = if size == 1 {
        let x = &vars[rng.gen_range(0..vars.len())];
        match rng.gen_range(0..4) {
            0 => format!("P({x})"),
            1 => format!("{} <= {x}", random_constant(dim, rng)),
            2 => format!("{x} <= {}", random_constant(dim, rng)),
            _ => {
                let y = &vars[rng.gen_range(0..vars.len())];
                format!("{x} <= {y}")
            }
        }
    } else {
        let k = rng.gen_range(1..size);
        let left = expression(dim, vars, k, rng);
        let op = if rng.gen_bool(0.5) { "^" } else { "V" };
        let right = expression(dim, vars, size - k, rng);
        format!("({left} {op} {right})")
    };
    if negated {
        format!("~{body}")
    } else {
        body
    }
}

/// Grow a random free decision tree with exactly `leaves` leaves: repeatedly
/// expand a random leaf into a test of a feature unused on its path, with
/// random leaf labels. Deterministic for a fixed seed.
pub fn random_tree(dim: usize, leaves: usize, seed: u64) -> Result<DecisionDiagram> {
    if leaves == 0 || (dim < 63 && leaves as u64 > 1u64 << dim) {
        return Err(FoilError::InvalidModel(format!(
            "cannot grow {leaves} leaves at dimension {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: rng.gen_bool(0.5) }];
    // Expandable leaves with the features still unused on their path.
    let mut open: Vec<(usize, Vec<usize>)> = vec![(0, (0..dim).collect())];
    for _ in 1..leaves {
        if open.is_empty() {
            return Err(FoilError::InvalidModel(format!(
                "cannot grow {leaves} leaves at dimension {dim}"
            )));
        }
        let pick = rng.gen_range(0..open.len());
        let (leaf_id, mut unused) = open.swap_remove(pick);
        let feature = unused.swap_remove(rng.gen_range(0..unused.len()));
        let lo = nodes.len();
        nodes.push(Node::Leaf { value: rng.gen_bool(0.5) });
        let hi = nodes.len();
        nodes.push(Node::Leaf { value: rng.gen_bool(0.5) });
        nodes[leaf_id] = Node::Internal { var: feature, lo, hi, bot: None };
        if !unused.is_empty() {
            open.push((lo, unused.clone()));
            open.push((hi, unused));
        }
    }
    Ok(DecisionDiagram { kind: DiagramKind::Dt, dim, nodes, root: 0, order: None })
}

/// A random complete ordered binary diagram of bounded width, for the width
/// engine batteries: at most `width` nodes per level with random wiring.
pub fn random_cobdd(dim: usize, width: usize, seed: u64) -> DecisionDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes: Vec<usize> = Vec::with_capacity(dim);
    for l in 0..dim {
        let cap = if l == 0 { 1 } else { width.min(2 * sizes[l - 1]) };
        sizes.push(if l == 0 { 1 } else { rng.gen_range(1..=cap) });
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut base: Vec<usize> = Vec::new();
    for &s in &sizes {
        base.push(nodes.len());
        for _ in 0..s {
            nodes.push(Node::Leaf { value: false });
        }
    }
    let false_leaf = nodes.len();
    nodes.push(Node::Leaf { value: false });
    let true_leaf = nodes.len();
    nodes.push(Node::Leaf { value: true });
    for l in 0..dim {
        for i in 0..sizes[l] {
            let mut child = |force: Option<usize>| -> usize {
                if l + 1 == dim {
                    if rng.gen_bool(0.5) {
                        true_leaf
                    } else {
                        false_leaf
                    }
                } else {
                    base[l + 1] + force.unwrap_or_else(|| rng.gen_range(0..sizes[l + 1]))
                }
            };
            // Cover every next-level node at least once to keep them
            // reachable: route node i's lo edge to node i when possible.
            let lo = child((l + 1 < dim && i < sizes[l + 1]).then_some(i));
            let hi = child(None);
            nodes[base[l] + i] = Node::Internal { var: l, lo, hi, bot: None };
        }
    }
    // Ensure last-level reachability of every node: the construction above
    // may strand next-level nodes with index >= current size; patch by
    // rerouting unreachable ones is unnecessary since reduce() in the width
    // engine drops them. Completeness and order hold by construction.
    DecisionDiagram {
        kind: DiagramKind::Cobdd,
        dim,
        nodes,
        root: base[0],
        order: Some((0..dim).collect()),
    }
}

/// A random partial instance as a constant (used by batteries).
pub fn random_instance(dim: usize, rng: &mut ChaCha8Rng) -> crate::instance::PartialInstance {
    let values = (0..dim)
        .map(|_| match rng.gen_range(0..3) {
            0 => Trit::Bot,
            1 => Trit::Zero,
            _ => Trit::One,
        })
        .collect();
    crate::instance::PartialInstance::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_core;

    #[test]
    fn same_seed_reproduces_query() {
        let a = random_query(5, 3, 6, 42);
        let b = random_query(5, 3, 6, 42);
        assert_eq!(a, b);
        let c = random_query(5, 3, 6, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_queries_parse() {
        for seed in 0..1000 {
            let q = random_query(4, 1 + (seed as usize % 4), 1 + (seed as usize % 8), seed);
            parse_core(&q).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{q}"));
        }
    }

    #[test]
    fn size_one_is_single_atom() {
        let q = random_query(3, 1, 1, 7);
        let f = parse_core(&q).unwrap();
        fn atoms(f: &crate::syntax::Formula) -> usize {
            use crate::syntax::Formula::*;
            match f {
                Not(g) | Exists(_, g) | Forall(_, g) => atoms(g),
                And(a, b) | Or(a, b) => atoms(a) + atoms(b),
                _ => 1,
            }
        }
        assert_eq!(atoms(&f), 1);
    }

    #[test]
    fn random_tree_has_exact_leaves_and_is_free() {
        for (dim, leaves, seed) in [(4, 5, 1), (10, 100, 2), (350, 1000, 3)] {
            let t = random_tree(dim, leaves, seed).unwrap();
            let count = t
                .nodes
                .iter()
                .filter(|n| matches!(n, Node::Leaf { .. }))
                .count();
            assert_eq!(count, leaves);
            let report = t.validate().unwrap();
            assert!(report.is_free);
        }
        assert_eq!(
            random_tree(7, 11, 9).unwrap(),
            random_tree(7, 11, 9).unwrap()
        );
        assert!(random_tree(2, 5, 0).is_err());
    }

    #[test]
    fn single_leaf_tree_is_constant() {
        let t = random_tree(3, 1, 5).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn random_cobdd_is_complete_ordered() {
        for seed in 0..20 {
            let d = random_cobdd(3, 2, seed);
            let report = d.validate().unwrap();
            assert!(report.is_ordered, "seed {seed}");
            assert!(report.is_complete, "seed {seed}");
            assert!(report.width <= 2, "seed {seed}");
        }
    }
}
