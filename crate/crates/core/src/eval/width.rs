//! Full-logic evaluation over complete width-bounded ordered diagrams via
//! ternary-diagram algebra: pointwise connectives by synchronized product,
//! quantification by subset-construction projection, and atom gadgets laid
//! out over an interleaved component order.

use crate::error::{FoilError, Result};
use crate::instance::{PartialInstance, Trit};
use crate::model::{DecisionDiagram, DiagramKind, Model, Node};
use crate::syntax::{
    expand_macros_to, prenex_blocks, rewrite_eq, Binding, Formula, Quantifier, Target, Term,
};
use std::collections::HashMap;
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, Ordering};

/// A complete ordered ternary decision diagram in level-normalized form:
/// one layer per position of the order, every edge spanning one level.
/// Children at the last level are leaf codes (0 = false, 1 = true).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tdd {
    /// Original component index tested at each level.
    pub feature_of_level: Vec<usize>,
    /// `levels[l][i]` children point into `levels[l+1]`, or to leaf codes at
    /// the last level.
    pub levels: Vec<Vec<TddNode>>,
    /// Value when there are no levels at all.
    pub const_value: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TddNode {
    pub lo: u32,
    pub hi: u32,
    pub bot: u32,
}

impl TddNode {
    fn child(&self, v: Trit) -> u32 {
        match v {
            Trit::Zero => self.lo,
            Trit::One => self.hi,
            Trit::Bot => self.bot,
        }
    }
}

/// Pointwise operations implemented by the synchronized product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TddOp {
    And,
    Or,
}

/// Projection polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectMode {
    Exists,
    Forall,
}

/// Counters for the width-bound assertions of the test batteries.
#[derive(Debug, Default)]
pub struct WidthStats {
    pub apply_calls: AtomicU64,
    /// Apply calls where some level exceeds the sum of the operand node
    /// counts at that level.
    pub apply_sum_bound_violations: AtomicU64,
    pub project_calls: AtomicU64,
    /// Project calls exceeding the `2^width` bound.
    pub project_bound_violations: AtomicU64,
    pub max_width_seen: AtomicU64,
}

impl WidthStats {
    pub fn new() -> WidthStats {
        WidthStats::default()
    }

    fn saw(&self, t: &Tdd) {
        self.max_width_seen.fetch_max(t.width() as u64, Ordering::Relaxed);
    }
}

impl Tdd {
    pub fn constant(value: bool) -> Tdd {
        Tdd { feature_of_level: vec![], levels: vec![], const_value: value }
    }

    pub fn width(&self) -> usize {
        self.levels.iter().map(|l| l.len()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    /// Evaluate on a partial instance indexed by original components.
    pub fn classify(&self, e: &PartialInstance) -> bool {
        if self.levels.is_empty() {
            return self.const_value;
        }
        let mut node = 0u32;
        for (l, &feature) in self.feature_of_level.iter().enumerate() {
            let n = self.levels[l][node as usize];
            node = n.child(e.get(feature));
        }
        node == 1
    }

    /// Merge equal nodes bottom-up and drop unreachable ones.
    pub fn reduce(&self) -> Tdd {
        if self.levels.is_empty() {
            return self.clone();
        }
        let mut levels = self.levels.clone();
        for l in (0..levels.len()).rev() {
            let mut seen: HashMap<TddNode, u32> = HashMap::new();
            let mut remap: Vec<u32> = Vec::with_capacity(levels[l].len());
            let mut kept: Vec<TddNode> = Vec::new();
            for node in &levels[l] {
                let idx = *seen.entry(*node).or_insert_with(|| {
                    kept.push(*node);
                    (kept.len() - 1) as u32
                });
                remap.push(idx);
            }
            levels[l] = kept;
            if l > 0 {
                for up in &mut levels[l - 1] {
                    up.lo = remap[up.lo as usize];
                    up.hi = remap[up.hi as usize];
                    up.bot = remap[up.bot as usize];
                }
            }
        }
        // Reachability sweep from the root.
        let mut alive: Vec<Vec<bool>> = levels.iter().map(|l| vec![false; l.len()]).collect();
        alive[0][0] = true;
        for l in 0..levels.len() - 1 {
            for (i, node) in levels[l].iter().enumerate() {
                if alive[l][i] {
                    alive[l + 1][node.lo as usize] = true;
                    alive[l + 1][node.hi as usize] = true;
                    alive[l + 1][node.bot as usize] = true;
                }
            }
        }
        for l in (1..levels.len()).rev() {
            let mut remap = vec![0u32; levels[l].len()];
            let mut kept = Vec::new();
            for (i, node) in levels[l].iter().enumerate() {
                if alive[l][i] {
                    remap[i] = kept.len() as u32;
                    kept.push(*node);
                }
            }
            levels[l] = kept;
            for up in &mut levels[l - 1] {
                up.lo = remap[up.lo as usize];
                up.hi = remap[up.hi as usize];
                up.bot = remap[up.bot as usize];
            }
        }
        Tdd {
            feature_of_level: self.feature_of_level.clone(),
            levels,
            const_value: self.const_value,
        }
    }

    fn check_caps(&self, cfg: &crate::eval::naive::EvalConfig) -> Result<()> {
        let w = self.width();
        if w > cfg.max_width {
            return Err(FoilError::WidthCapExceeded { width: w, cap: cfg.max_width });
        }
        let n = self.node_count();
        if n > cfg.max_nodes {
            return Err(FoilError::NodeCapExceeded { nodes: n, cap: cfg.max_nodes });
        }
        Ok(())
    }
}

/// Build a level-normalized ternary diagram from a synchronous state
/// machine: `step(level, state, value)` advances, `accept` judges the state
/// after the last level. Only reachable states materialize.
fn build_tdd<S: Clone + Eq + Hash>(
    features: Vec<usize>,
    start: S,
    mut step: impl FnMut(usize, &S, Trit) -> S,
    mut accept: impl FnMut(&S) -> bool,
) -> Tdd {
    if features.is_empty() {
        let value = accept(&start);
        return Tdd::constant(value);
    }
    let nlevels = features.len();
    let mut levels: Vec<Vec<TddNode>> = Vec::with_capacity(nlevels);
    let mut frontier: Vec<S> = vec![start];
    for l in 0..nlevels {
        let last = l + 1 == nlevels;
        let mut next: Vec<S> = Vec::new();
        let mut index: HashMap<S, u32> = HashMap::new();
        let mut nodes: Vec<TddNode> = Vec::with_capacity(frontier.len());
        for s in &frontier {
            let mut resolve = |v: Trit| -> u32 {
                let ns = step(l, s, v);
                if last {
                    u32::from(accept(&ns))
                } else {
                    *index.entry(ns.clone()).or_insert_with(|| {
                        next.push(ns);
                        (next.len() - 1) as u32
                    })
                }
            };
            nodes.push(TddNode {
                lo: resolve(Trit::Zero),
                hi: resolve(Trit::One),
                bot: resolve(Trit::Bot),
            });
        }
        levels.push(nodes);
        frontier = next;
    }
    Tdd { feature_of_level: features, levels, const_value: false }.reduce()
}

/// Pointwise complement: swap the leaf codes.
pub fn tdd_negate(m: &Tdd) -> Tdd {
    let mut out = m.clone();
    out.const_value = !out.const_value;
    if let Some(last) = out.levels.last_mut() {
        for node in last {
            node.lo ^= 1;
            node.hi ^= 1;
            node.bot ^= 1;
        }
    }
    out
}

/// Pointwise conjunction/disjunction by synchronized pair product, reduced.
pub fn tdd_apply(op: TddOp, a: &Tdd, b: &Tdd, stats: Option<&WidthStats>) -> Result<Tdd> {
    if a.feature_of_level != b.feature_of_level {
        return Err(FoilError::DimensionMismatch(
            "apply requires diagrams over the same order".into(),
        ));
    }
    let combine = |x: bool, y: bool| match op {
        TddOp::And => x && y,
        TddOp::Or => x || y,
    };
    if a.levels.is_empty() {
        return Ok(Tdd::constant(combine(a.const_value, b.const_value)));
    }
    #[derive(Clone, PartialEq, Eq, Hash)]
    struct Pair(u32, u32);
    let out = build_tdd(
        a.feature_of_level.clone(),
        Pair(0, 0),
        |l, s, v| {
            let na = a.levels[l][s.0 as usize];
            let nb = b.levels[l][s.1 as usize];
            Pair(na.child(v), nb.child(v))
        },
        |s| combine(s.0 == 1, s.1 == 1),
    );
    if let Some(stats) = stats {
        stats.apply_calls.fetch_add(1, Ordering::Relaxed);
        stats.saw(&out);
        for l in 0..out.levels.len() {
            if out.levels[l].len() > a.levels[l].len() + b.levels[l].len() {
                stats.apply_sum_bound_violations.fetch_add(1, Ordering::Relaxed);
                break;
            }
        }
    }
    Ok(out)
}

/// Existential or universal projection of a set of original components:
/// `∃_S M(e) = 1` iff some instance agreeing with `e` outside `S` satisfies
/// `M`, the projected components ranging over `{0,1,?}`. Subset construction
/// per level; the universal mode is `¬∃_S ¬M`.
pub fn tdd_project(
    m: &Tdd,
    s: &[usize],
    mode: ProjectMode,
    stats: Option<&WidthStats>,
) -> Result<Tdd> {
    match mode {
        ProjectMode::Exists => project_exists(m, s, stats),
        ProjectMode::Forall => {
            let neg = tdd_negate(m);
            let proj = project_exists(&neg, s, stats)?;
            Ok(tdd_negate(&proj))
        }
    }
}

fn project_exists(m: &Tdd, s: &[usize], stats: Option<&WidthStats>) -> Result<Tdd> {
    if m.levels.is_empty() || s.is_empty() {
        return Ok(m.clone());
    }
    let projected: Vec<bool> = m.feature_of_level.iter().map(|f| s.contains(f)).collect();
    let kept: Vec<usize> = m
        .feature_of_level
        .iter()
        .copied()
        .filter(|f| !s.contains(f))
        .collect();
    // Absorb projected levels into node sets between kept levels.
    let absorb = |mut set: Vec<u32>, from: usize, to: usize| -> Vec<u32> {
        for l in from..to {
            let mut out = Vec::new();
            for &i in &set {
                let n = m.levels[l][i as usize];
                out.extend([n.lo, n.hi, n.bot]);
            }
            out.sort_unstable();
            out.dedup();
            set = out;
        }
        set
    };
    // Map each kept output level to its level index in m, plus the stretch
    // of projected levels before/after.
    let kept_levels: Vec<usize> =
        (0..m.levels.len()).filter(|&l| !projected[l]).collect();
    if kept_levels.is_empty() {
        let set = absorb(vec![0], 0, m.levels.len());
        let out = Tdd::constant(set.contains(&1));
        if let Some(stats) = stats {
            stats.project_calls.fetch_add(1, Ordering::Relaxed);
        }
        return Ok(out);
    }
    let start = absorb(vec![0], 0, kept_levels[0]);
    let out = build_tdd(
        kept,
        start,
        |out_l, set: &Vec<u32>, v| {
            let l = kept_levels[out_l];
            let mut img: Vec<u32> = set
                .iter()
                .map(|&i| m.levels[l][i as usize].child(v))
                .collect();
            img.sort_unstable();
            img.dedup();
            let stretch_end = kept_levels.get(out_l + 1).copied().unwrap_or(m.levels.len());
            absorb(img, l + 1, stretch_end)
        },
        |set| set.contains(&1),
    );
    if let Some(stats) = stats {
        stats.project_calls.fetch_add(1, Ordering::Relaxed);
        stats.saw(&out);
        let k = m.width().min(62) as u32;
        if (out.width() as u64) > (1u64 << k) {
            stats.project_bound_violations.fetch_add(1, Ordering::Relaxed);
        }
    }
    Ok(out)
}

// ---- conversions ---------------------------------------------------------

fn diagram_order(m: &DecisionDiagram) -> Result<Vec<usize>> {
    if let Some(order) = &m.order {
        if order.len() != m.dim {
            return Err(FoilError::InvalidModel("order must list every feature".into()));
        }
        return Ok(order.clone());
    }
    // Read the order off one root-to-leaf path; completeness makes every
    // path test the same sequence.
    let mut order = Vec::new();
    let mut id = m.root;
    loop {
        match &m.nodes[id] {
            Node::Leaf { .. } => break,
            Node::Internal { var, lo, .. } => {
                order.push(*var);
                id = *lo;
            }
        }
    }
    if order.len() != m.dim {
        return Err(FoilError::ModelNotComplete);
    }
    Ok(order)
}

/// Level-normalize a complete ordered binary diagram and graft a reject
/// path for `?` inputs: the result agrees with the input on full instances
/// and is false whenever any component is undefined. A bare leaf is padded
/// to a full test chain.
pub fn bdd_to_tdd(m: &DecisionDiagram) -> Result<Tdd> {
    if m.kind.is_ternary() {
        return Err(FoilError::InvalidModel("input is already ternary".into()));
    }
    if let Node::Leaf { value } = m.nodes[m.root] {
        let order = m.order.clone().unwrap_or_else(|| (0..m.dim).collect());
        // True exactly on full instances when the leaf is true.
        return Ok(build_tdd(
            order,
            value,
            |_, &alive: &bool, v| alive && v != Trit::Bot,
            |&alive| alive,
        ));
    }
    let report = m.validate()?;
    if !report.is_ordered || !report.is_complete {
        return Err(FoilError::ModelNotComplete);
    }
    let order = diagram_order(m)?;
    // State: current node id, or None once rejected by a `?`.
    let out = build_tdd(
        order,
        Some(m.root),
        |_, state: &Option<usize>, v| match state {
            None => None,
            Some(id) => match (&m.nodes[*id], v) {
                (_, Trit::Bot) => None,
                (Node::Internal { lo, hi: _, .. }, Trit::Zero) => Some(*lo),
                (Node::Internal { hi, .. }, Trit::One) => Some(*hi),
                (Node::Leaf { .. }, _) => unreachable!("complete diagram ended early"),
            },
        },
        |state| matches!(state, Some(id) if matches!(m.nodes[*id], Node::Leaf { value: true })),
    );
    Ok(out)
}

/// Level-normalize a complete ordered ternary diagram.
pub fn diagram_to_tdd(m: &DecisionDiagram) -> Result<Tdd> {
    if !m.kind.is_ternary() {
        return bdd_to_tdd(m);
    }
    if let Node::Leaf { value } = m.nodes[m.root] {
        let order = m.order.clone().unwrap_or_else(|| (0..m.dim).collect());
        return Ok(build_tdd(order, value, |_, &alive: &bool, _| alive, |&a| a));
    }
    m.validate()?;
    let order = diagram_order(m)?;
    let out = build_tdd(
        order,
        m.root,
        |_, &id: &usize, v| match &m.nodes[id] {
            Node::Internal { lo, hi, bot, .. } => match v {
                Trit::Zero => *lo,
                Trit::One => *hi,
                Trit::Bot => bot.expect("ternary diagram validated"),
            },
            Node::Leaf { .. } => unreachable!("complete diagram ended early"),
        },
        |&id| matches!(m.nodes[id], Node::Leaf { value: true }),
    );
    Ok(out)
}

/// Export a ternary diagram to the graph model form.
pub fn tdd_to_diagram(t: &Tdd, dim: usize) -> DecisionDiagram {
    if t.levels.is_empty() {
        return DecisionDiagram::constant(DiagramKind::Cotdd, dim.max(1), t.const_value);
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut base: Vec<usize> = Vec::new();
    for level in &t.levels {
        base.push(nodes.len());
        for _ in level {
            nodes.push(Node::Leaf { value: false });
        }
    }
    let false_leaf = nodes.len();
    nodes.push(Node::Leaf { value: false });
    let true_leaf = nodes.len();
    nodes.push(Node::Leaf { value: true });
    for (l, level) in t.levels.iter().enumerate() {
        for (i, n) in level.iter().enumerate() {
            let map = |c: u32| -> usize {
                if l + 1 == t.levels.len() {
                    if c == 1 {
                        true_leaf
                    } else {
                        false_leaf
                    }
                } else {
                    base[l + 1] + c as usize
                }
            };
            nodes[base[l] + i] = Node::Internal {
                var: t.feature_of_level[l],
                lo: map(n.lo),
                hi: map(n.hi),
                bot: Some(map(n.bot)),
            };
        }
    }
    DecisionDiagram {
        kind: DiagramKind::Cotdd,
        dim,
        nodes,
        root: 0,
        order: Some(t.feature_of_level.clone()),
    }
}

/// Turn an ordered free binary diagram into an equivalent complete one by
/// inserting pass-through tests for skipped features, then reducing.
pub fn complete_diagram(m: &DecisionDiagram) -> Result<DecisionDiagram> {
    let report = m.validate()?;
    if !report.is_free || !report.is_ordered {
        return Err(FoilError::ModelNotComplete);
    }
    let order: Vec<usize> = m.order.clone().unwrap_or_else(|| (0..m.dim).collect());
    let pos_of = {
        let mut p = vec![usize::MAX; m.dim];
        for (i, &f) in order.iter().enumerate() {
            p[f] = i;
        }
        p
    };
    // Binary automaton: state = current node; advance when the node tests
    // the current order position, else pass through.
    #[derive(Clone, PartialEq, Eq, Hash)]
    struct St(usize);
    let nlevels = order.len();
    let mut levels: Vec<Vec<(u32, u32)>> = Vec::with_capacity(nlevels);
    let mut frontier: Vec<St> = vec![St(m.root)];
    for l in 0..nlevels {
        let last = l + 1 == nlevels;
        let mut next: Vec<St> = Vec::new();
        let mut index: HashMap<St, u32> = HashMap::new();
        let mut nodes = Vec::with_capacity(frontier.len());
        for s in frontier.iter() {
            let mut resolve = |v: bool| -> Result<u32> {
                let ns = match &m.nodes[s.0] {
                    Node::Internal { var, lo, hi, .. } if pos_of[*var] == l => {
                        St(if v { *hi } else { *lo })
                    }
                    Node::Internal { var, .. } if pos_of[*var] < l => {
                        return Err(FoilError::ModelNotComplete)
                    }
                    _ => s.clone(),
                };
                Ok(if last {
                    match &m.nodes[ns.0] {
                        Node::Leaf { value } => u32::from(*value),
                        Node::Internal { .. } => return Err(FoilError::ModelNotComplete),
                    }
                } else {
                    *index.entry(ns.clone()).or_insert_with(|| {
                        next.push(ns);
                        (next.len() - 1) as u32
                    })
                })
            };
            let lo = resolve(false)?;
            let hi = resolve(true)?;
            nodes.push((lo, hi));
        }
        levels.push(nodes);
        frontier = next;
    }
    // Assemble, merging equal nodes bottom-up.
    for l in (0..nlevels).rev() {
        let mut seen: HashMap<(u32, u32), u32> = HashMap::new();
        let mut remap = Vec::with_capacity(levels[l].len());
        let mut kept = Vec::new();
        for node in &levels[l] {
            let idx = *seen.entry(*node).or_insert_with(|| {
                kept.push(*node);
                (kept.len() - 1) as u32
            });
            remap.push(idx);
        }
        levels[l] = kept;
        if l > 0 {
            for up in &mut levels[l - 1] {
                up.0 = remap[up.0 as usize];
                up.1 = remap[up.1 as usize];
            }
        }
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut base: Vec<usize> = Vec::new();
    for level in &levels {
        base.push(nodes.len());
        for _ in level {
            nodes.push(Node::Leaf { value: false });
        }
    }
    let false_leaf = nodes.len();
    nodes.push(Node::Leaf { value: false });
    let true_leaf = nodes.len();
    nodes.push(Node::Leaf { value: true });
    for (l, level) in levels.iter().enumerate() {
        for (i, &(lo, hi)) in level.iter().enumerate() {
            let map = |c: u32| -> usize {
                if l + 1 == nlevels {
                    if c == 1 {
                        true_leaf
                    } else {
                        false_leaf
                    }
                } else {
                    base[l + 1] + c as usize
                }
            };
            nodes[base[l] + i] =
                Node::Internal { var: order[l], lo: map(lo), hi: map(hi), bot: None };
        }
    }
    Ok(DecisionDiagram { kind: DiagramKind::Cobdd, dim: m.dim, nodes, root: 0, order: Some(order) })
}

// ---- interleaved order and gadgets ---------------------------------------

/// The component order of the `q`-slot product structure: for each original
/// position (following the base order) the same component of every slot, in
/// slot order. Component `k` of slot `s` has product index `s*n + k`.
#[derive(Debug, Clone)]
pub struct InterleavedOrder {
    pub base: Vec<usize>,
    pub slots: usize,
    pub n: usize,
}

impl InterleavedOrder {
    pub fn new(base: Vec<usize>, slots: usize) -> InterleavedOrder {
        let n = base.len();
        InterleavedOrder { base, slots, n }
    }

    /// The flattened product-component sequence.
    pub fn positions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n * self.slots);
        for &f in &self.base {
            for s in 0..self.slots {
                out.push(s * self.n + f);
            }
        }
        out
    }

    /// Product components belonging to one slot.
    pub fn slot_components(&self, slot: usize) -> Vec<usize> {
        (0..self.n).map(|k| slot * self.n + k).collect()
    }

    fn slot_of(&self, product_component: usize) -> usize {
        product_component / self.n
    }
}

/// A ternary diagram over the interleaved order, true exactly on product
/// tuples whose `slot` entry is a full positive instance of `m`. Width at
/// most `width(m) + 1` per level.
pub fn lift_model(m: &Tdd, slot: usize, ord: &InterleavedOrder, stats: Option<&WidthStats>) -> Tdd {
    let positions = ord.positions();
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum St {
        At(u32),
        Done(bool),
        Reject,
    }
    // How many of this slot's components precede each global level.
    let mut consumed = Vec::with_capacity(positions.len());
    let mut c = 0usize;
    for &pos in &positions {
        consumed.push(c);
        if ord.slot_of(pos) == slot {
            c += 1;
        }
    }
    let out = build_tdd(
        positions.clone(),
        if m.levels.is_empty() { St::Done(m.const_value) } else { St::At(0) },
        |l, s, v| {
            if ord.slot_of(positions[l]) != slot {
                return s.clone();
            }
            match s {
                St::Reject => St::Reject,
                St::Done(b) => {
                    if v == Trit::Bot {
                        St::Reject
                    } else {
                        St::Done(*b)
                    }
                }
                St::At(i) => {
                    if v == Trit::Bot {
                        return St::Reject;
                    }
                    let ml = consumed[l];
                    let n = m.levels[ml][*i as usize];
                    let child = n.child(v);
                    if ml + 1 == m.levels.len() {
                        St::Done(child == 1)
                    } else {
                        St::At(child)
                    }
                }
            }
        },
        |s| matches!(s, St::Done(true)),
    );
    if let Some(stats) = stats {
        stats.saw(&out);
    }
    out
}

/// Gadget: slot `i` subsumed by slot `j`, checked componentwise. Four live
/// states at the widest levels (three value trackers plus the shared
/// failure path).
pub fn containment_gadget(i: usize, j: usize, ord: &InterleavedOrder) -> Tdd {
    assert_ne!(i, j);
    let positions = ord.positions();
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum St {
        Idle,
        /// Value of the first-read slot for the current original component.
        Pending(Trit),
        Dead,
    }
    let first = i.min(j);
    let second = i.max(j);
    let out = build_tdd(
        positions.clone(),
        St::Idle,
        |l, s, v| {
            let slot = ord.slot_of(positions[l]);
            match s {
                St::Dead => St::Dead,
                St::Idle if slot == first => St::Pending(v),
                St::Pending(w) if slot == second => {
                    let (iv, jv) = if first == i { (*w, v) } else { (v, *w) };
                    if iv == Trit::Bot || iv == jv {
                        St::Idle
                    } else {
                        St::Dead
                    }
                }
                other => other.clone(),
            }
        },
        |s| matches!(s, St::Idle),
    );
    out
}

/// Gadget: slot `i` has no undefined component.
pub fn full_gadget(i: usize, ord: &InterleavedOrder) -> Tdd {
    let positions = ord.positions();
    build_tdd(
        positions.clone(),
        true,
        |l, &alive: &bool, v| alive && !(ord.slot_of(positions[l]) == i && v == Trit::Bot),
        |&alive| alive,
    )
}

// ---- the matrix compiler and driver --------------------------------------

/// Compile a quantifier-free matrix over `Pos`, `⊆` and `Full` atoms into a
/// ternary diagram over the interleaved product order. `slot_terms[s]` names
/// the variable or constant occupying slot `s`; equality atoms must have
/// been rewritten to double containment beforehand.
pub fn compile_matrix(
    m: &Tdd,
    matrix: &Formula,
    slot_terms: &[Term],
    ord: &InterleavedOrder,
    cfg: &crate::eval::naive::EvalConfig,
    stats: Option<&WidthStats>,
) -> Result<Tdd> {
    let slot_of_term = |t: &Term| -> Result<usize> {
        slot_terms
            .iter()
            .position(|s| s == t)
            .ok_or_else(|| FoilError::Unsupported(format!("term {t} not assigned a slot")))
    };
    let out = match matrix {
        Formula::Pos(t) => lift_model(m, slot_of_term(t)?, ord, stats),
        Formula::FullAtom(t) => full_gadget(slot_of_term(t)?, ord),
        Formula::Subsumed(a, b) => {
            let (sa, sb) = (slot_of_term(a)?, slot_of_term(b)?);
            if sa == sb {
                constant_over(ord, true)
            } else {
                containment_gadget(sa, sb, ord)
            }
        }
        Formula::Not(g) => tdd_negate(&compile_matrix(m, g, slot_terms, ord, cfg, stats)?),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let op = if matches!(matrix, Formula::And(..)) { TddOp::And } else { TddOp::Or };
            let ta = compile_matrix(m, a, slot_terms, ord, cfg, stats)?;
            let tb = compile_matrix(m, b, slot_terms, ord, cfg, stats)?;
            tdd_apply(op, &ta, &tb, stats)?
        }
        Formula::Eq(..) => {
            return Err(FoilError::Unsupported(
                "equality atoms must be rewritten to double containment first".into(),
            ))
        }
        other => {
            return Err(FoilError::Unsupported(format!(
                "matrix atom not supported by the width engine: {other}"
            )))
        }
    };
    out.check_caps(cfg)?;
    Ok(out)
}

fn constant_over(ord: &InterleavedOrder, value: bool) -> Tdd {
    build_tdd(ord.positions(), value, |_, &b: &bool, _| b, |&b| b)
}

/// Evaluate any query over a complete ordered diagram: compile the prenexed
/// matrix into a product ternary diagram, project the quantifier blocks
/// innermost-first, then classify the concatenation of free-variable values.
pub fn eval_full_foil(
    m: &Model,
    f: &Formula,
    binding: &Binding,
    cfg: &crate::eval::naive::EvalConfig,
    stats: Option<&WidthStats>,
) -> Result<bool> {
    let Model::Diagram(d) = m else {
        return Err(FoilError::ModelNotComplete);
    };
    let base = diagram_to_tdd(d)?;
    let n = m.dim();

    let f = f.substitute(binding);
    if let Some(v) = f.free_vars().first() {
        return Err(FoilError::UnboundVariable(v.clone()));
    }
    if let Some(cd) = f.const_dim() {
        if cd != n {
            return Err(FoilError::DimensionMismatch(format!(
                "query constants have dimension {cd}, model has {n}"
            )));
        }
    }
    let expanded = expand_macros_to(&f, Target::Gadget);
    let mut prenex = prenex_blocks(&expanded);
    prenex.matrix = rewrite_eq(&prenex.matrix);

    // Slot assignment: distinct constants first, then the quantified
    // variables in prefix order.
    let mut slot_terms: Vec<Term> = Vec::new();
    prenex.matrix.for_each_term(&mut |t| {
        if matches!(t, Term::Const(_)) && !slot_terms.contains(t) {
            slot_terms.push(t.clone());
        }
    });
    let free_slots = slot_terms.len();
    for (_, x) in &prenex.prefix {
        slot_terms.push(Term::var(x));
    }
    let q = slot_terms.len().max(1);
    let ord = InterleavedOrder::new(base.feature_of_level.clone(), q);

    let mut compiled = compile_matrix(&base, &prenex.matrix, &slot_terms, &ord, cfg, stats)?;

    // Project quantifier blocks innermost-first; consecutive same-polarity
    // quantifiers are projected together.
    let blocks = prenex.blocks();
    let var_slot: HashMap<&str, usize> = prenex
        .prefix
        .iter()
        .enumerate()
        .map(|(i, (_, x))| (x.as_str(), free_slots + i))
        .collect();
    for (quant, names) in blocks.iter().rev() {
        let mut components = Vec::new();
        for name in names {
            components.extend(ord.slot_components(var_slot[name.as_str()]));
        }
        let mode = match quant {
            Quantifier::Exists => ProjectMode::Exists,
            Quantifier::Forall => ProjectMode::Forall,
        };
        compiled = tdd_project(&compiled, &components, mode, stats)?;
        compiled.check_caps(cfg)?;
    }

    if free_slots == 0 {
        debug_assert!(compiled.levels.is_empty());
        return Ok(compiled.const_value);
    }
    // Classify the concatenation of the constant slots.
    let mut concat = PartialInstance::bottom(n * q);
    for (s, t) in slot_terms.iter().take(free_slots).enumerate() {
        if let Term::Const(c) = t {
            for k in 0..n {
                concat.set(s * n + k, c.get(k));
            }
        }
    }
    Ok(compiled.classify(&concat))
}
