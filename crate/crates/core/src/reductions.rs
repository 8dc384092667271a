//! Hardness-reduction constructions used as correctness stress tests:
//! satisfiability round trips through generated models and queries.

use crate::error::{FoilError, Result};
use crate::instance::{PartialInstance, Quad, Trit, UndeterminedInstance};
use crate::model::{DecisionDiagram, DiagramKind, Node, Perceptron};
use crate::syntax::{psi_surface, psi_two_alternations, Formula};

/// A 3-CNF formula: clauses of exactly three distinct, non-complementary
/// literals. Literals are signed 1-based variable indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    pub nvars: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl CnfFormula {
    pub fn new(nvars: usize, clauses: Vec<[i32; 3]>) -> Result<CnfFormula> {
        for clause in &clauses {
            let mut vars = Vec::new();
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > nvars {
                    return Err(FoilError::InvalidModel(format!(
                        "literal {lit} outside 1..={nvars}"
                    )));
                }
                if vars.contains(&lit.abs()) {
                    return Err(FoilError::InvalidModel(
                        "clause with repeated or complementary literals".into(),
                    ));
                }
                vars.push(lit.abs());
            }
        }
        Ok(CnfFormula { nvars, clauses })
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|clause| {
            clause.iter().any(|&lit| {
                let v = assignment[lit.unsigned_abs() as usize - 1];
                if lit > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    }

    /// Brute-force satisfiability, the independent oracle for the round trips.
    pub fn satisfiable(&self) -> bool {
        let n = self.nvars;
        (0u64..1 << n).any(|mask| {
            let assignment: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            self.eval(&assignment)
        })
    }
}

struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    fn leaf(&mut self, value: bool) -> usize {
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn internal(&mut self, var: usize, lo: usize, hi: usize) -> usize {
        self.nodes.push(Node::Internal { var, lo, hi, bot: None });
        self.nodes.len() - 1
    }

    /// A depth-3 complete tree over the clause's variables (ascending),
    /// true exactly on assignments satisfying the clause.
    fn clause_tree(&mut self, clause: &[i32; 3], var_feature: impl Fn(usize) -> usize) -> usize {
        let mut lits: Vec<i32> = clause.to_vec();
        lits.sort_by_key(|l| l.unsigned_abs());
        // Build bottom-up over the 8 assignments.
        let mut layer: Vec<usize> = (0..8)
            .map(|bits: usize| {
                let value = lits.iter().enumerate().any(|(i, &lit)| {
                    let v = bits >> (2 - i) & 1 == 1;
                    (lit > 0) == v
                });
                self.leaf(value)
            })
            .collect();
        for depth in (0..3).rev() {
            let feature = var_feature(lits[depth].unsigned_abs() as usize);
            layer = layer
                .chunks(2)
                .map(|pair| self.internal(feature, pair[0], pair[1]))
                .collect();
        }
        layer[0]
    }
}

/// The satisfiability round-trip instance: an ordered decision tree over
/// `clauses + vars` features, the partial instance with 1 on every clause
/// selector and `?` on every variable, and the stability query; the query
/// holds on the instance iff the formula is satisfiable.
pub fn tree_from_3cnf(c: &CnfFormula) -> Result<(DecisionDiagram, PartialInstance, Formula)> {
    let ncl = c.clauses.len();
    if ncl == 0 {
        return Err(FoilError::InvalidModel("need at least one clause".into()));
    }
    let dim = ncl + c.nvars;
    let var_feature = |v: usize| ncl + v - 1;
    let mut b = TreeBuilder { nodes: Vec::new() };
    // Chain over clause selectors: selector i at 0 hands off to the clause
    // tree, at 1 moves on; all-ones ends at true.
    let mut next = b.leaf(true);
    for (i, clause) in c.clauses.iter().enumerate().rev() {
        let sub = b.clause_tree(clause, var_feature);
        next = b.internal(i, sub, next);
    }
    let tree = DecisionDiagram {
        kind: DiagramKind::Dt,
        dim,
        nodes: b.nodes,
        root: next,
        order: Some((0..dim).collect()),
    };
    let mut e = PartialInstance::bottom(dim);
    for i in 0..ncl {
        e.set(i, Trit::One);
    }
    Ok((tree, e, psi_surface("x")))
}

/// The two-quantifier-alternation form of the same query, for cross-checks.
pub fn psi_alternation_form() -> Formula {
    psi_two_alternations("x")
}

/// The determinization-hardness instance: an ordered tree whose selector
/// levels pick a clause and an undetermined instance with `?` selectors and
/// `◇` variables; some determinization has all completions positive iff the
/// formula is satisfiable. Clauses are padded with fresh variables to the
/// next power of two.
pub fn dap_from_3sat(c: &CnfFormula) -> Result<(DecisionDiagram, UndeterminedInstance)> {
    if c.clauses.is_empty() {
        return Err(FoilError::InvalidModel("need at least one clause".into()));
    }
    // Pad with always-satisfiable clauses over fresh variables.
    let m = c.clauses.len();
    let k = (usize::BITS - (m - 1).leading_zeros()) as usize; // ceil log2
    let k = if m == 1 { 0 } else { k };
    let padded = 1usize << k;
    let mut clauses = c.clauses.clone();
    let mut nvars = c.nvars;
    // Padding clauses use fresh variables, so they never constrain the
    // original ones and satisfiability is preserved.
    while clauses.len() < padded {
        let f1 = (nvars + 1) as i32;
        let f2 = (nvars + 2) as i32;
        let f3 = (nvars + 3) as i32;
        nvars += 3;
        clauses.push([f1, f2, f3]);
    }
    let padded_cnf = CnfFormula::new(nvars, clauses)?;

    let dim = k + nvars;
    let var_feature = |v: usize| k + v - 1;
    let mut b = TreeBuilder { nodes: Vec::new() };
    // Clause subtrees in order, then a complete selector tree above them.
    let mut layer: Vec<usize> = padded_cnf
        .clauses
        .iter()
        .map(|clause| b.clause_tree(clause, var_feature))
        .collect();
    for level in (0..k).rev() {
        layer = layer
            .chunks(2)
            .map(|pair| b.internal(level, pair[0], pair[1]))
            .collect();
    }
    let tree = DecisionDiagram {
        kind: DiagramKind::Dt,
        dim,
        nodes: b.nodes,
        root: layer[0],
        order: Some((0..dim).collect()),
    };
    let mut u = UndeterminedInstance::all_diamond(dim);
    for i in 0..k {
        u.set(i, Quad::Bot);
    }
    Ok((tree, u))
}

/// Brute-force DeterminizationAllPos over a diagram, the oracle for the
/// reduction tests: enumerate determinizations, then completions.
pub fn brute_force_dap(d: &DecisionDiagram, u: &UndeterminedInstance) -> Result<bool> {
    for det in u.determinizations() {
        let mut all_pos = true;
        for compl in det.completions() {
            if !d.classify(&compl)? {
                all_pos = false;
                break;
            }
        }
        if all_pos {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The bias-detection instance: weights from the subset-sum values, one
/// protected extra feature of weight 1, threshold `k + 1`. The model is
/// biased iff some subset sums to `k`.
pub fn perceptron_from_subset_sum(values: &[u64], k: u64) -> Result<Perceptron> {
    if values.is_empty() {
        return Err(FoilError::InvalidModel("need at least one value".into()));
    }
    let mut weights: Vec<f64> = values.iter().map(|&s| s as f64).collect();
    weights.push(1.0);
    let mut p = Perceptron::new(weights, k as f64 + 1.0);
    p.protected = vec![values.len()];
    Ok(p)
}

/// Dynamic-programming subset-sum, the independent oracle.
pub fn subset_sum(values: &[u64], k: u64) -> bool {
    let mut reachable = vec![false; k as usize + 1];
    reachable[0] = true;
    for &v in values {
        if v == 0 {
            continue;
        }
        for target in (0..=k as usize).rev() {
            if target as u64 >= v && reachable[target - v as usize] {
                reachable[target] = true;
            }
        }
    }
    // Zeros contribute nothing but a zero target is reachable by the empty
    // subset only if the problem counts it; the reduction asks for any
    // subset, empty included when k = 0.
    reachable[k as usize]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{eval_naive, EvalConfig};
    use crate::model::Model;
    use crate::syntax::{expand_macros, Binding};

    fn cfg() -> EvalConfig {
        EvalConfig { max_work: 200_000_000, ..EvalConfig::default() }
    }

    #[test]
    fn single_clause_is_satisfiable() {
        let c = CnfFormula::new(3, vec![[1, 2, 3]]).unwrap();
        assert!(c.satisfiable());
        let (tree, e, psi) = tree_from_3cnf(&c).unwrap();
        let report = tree.validate().unwrap();
        assert!(report.is_free && report.is_ordered);
        let mut b = Binding::new();
        b.insert("x".into(), e);
        let f = expand_macros(&psi);
        let m = Model::Diagram(tree);
        assert!(eval_naive(&m, &f, &b, &cfg()).unwrap());
    }

    #[test]
    fn contradiction_is_unsatisfiable() {
        // All eight sign patterns of (±1, ±2, ±3): unsatisfiable. At this
        // dimension the cheaper two-alternation query form is used.
        let mut clauses = Vec::new();
        for mask in 0..8 {
            let sign = |bit: usize, var: i32| if mask >> bit & 1 == 1 { -var } else { var };
            clauses.push([sign(0, 1), sign(1, 2), sign(2, 3)]);
        }
        let c = CnfFormula::new(3, clauses).unwrap();
        assert!(!c.satisfiable());
        let (tree, e, _) = tree_from_3cnf(&c).unwrap();
        let mut b = Binding::new();
        b.insert("x".into(), e);
        let f = expand_macros(&psi_alternation_form());
        let m = Model::Diagram(tree);
        let big = EvalConfig { max_work: 20_000_000_000, ..EvalConfig::default() };
        assert!(!eval_naive(&m, &f, &b, &big).unwrap());
    }

    #[test]
    fn clause_tree_semantics() {
        let c = CnfFormula::new(3, vec![[1, -2, 3]]).unwrap();
        let (tree, _, _) = tree_from_3cnf(&c).unwrap();
        // dim = 1 selector + 3 vars; selector 0 routes into the clause tree.
        for bits in 0..8u8 {
            let assignment = [bits & 4 != 0, bits & 2 != 0, bits & 1 != 0];
            let mut e = PartialInstance::from_bits(&[false, assignment[0], assignment[1], assignment[2]]);
            e.set(0, Trit::Zero);
            let expected = c.eval(&assignment);
            assert_eq!(tree.classify(&e).unwrap(), expected, "bits {bits}");
        }
    }

    #[test]
    fn dap_reduction_round_trip_small() {
        let sat = CnfFormula::new(3, vec![[1, 2, 3], [-1, 2, 3]]).unwrap();
        let (tree, u) = dap_from_3sat(&sat).unwrap();
        assert!(tree.validate().unwrap().is_free);
        assert_eq!(brute_force_dap(&tree, &u).unwrap(), sat.satisfiable());

        let mut clauses = Vec::new();
        for mask in 0..8 {
            let sign = |bit: usize, var: i32| if mask >> bit & 1 == 1 { -var } else { var };
            clauses.push([sign(0, 1), sign(1, 2), sign(2, 3)]);
        }
        let unsat = CnfFormula::new(3, clauses).unwrap();
        let (tree, u) = dap_from_3sat(&unsat).unwrap();
        assert!(!brute_force_dap(&tree, &u).unwrap());
        assert!(!unsat.satisfiable());
    }

    #[test]
    fn padded_clause_count_is_power_of_two() {
        for m in 1..=6usize {
            let clauses: Vec<[i32; 3]> = (0..m).map(|_| [1, 2, 3]).collect();
            let c = CnfFormula::new(3, clauses).unwrap();
            let (_, u) = dap_from_3sat(&c).unwrap();
            // Selector count is the number of ? components.
            let selectors = (0..u.dim()).filter(|&i| u.get(i) == Quad::Bot).count();
            let padded = 1usize << selectors;
            assert!(padded >= m, "padded {padded} < {m}");
            assert!(padded < 2 * m || m == 1, "padded {padded} too large for {m}");
        }
    }

    #[test]
    fn subset_sum_examples() {
        assert!(subset_sum(&[1, 2], 3));
        assert!(!subset_sum(&[2, 4], 3));
        assert!(subset_sum(&[5], 5));
        let p = perceptron_from_subset_sum(&[1, 2], 3).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.threshold, 4.0);
        assert_eq!(p.protected, vec![2]);
    }
}
