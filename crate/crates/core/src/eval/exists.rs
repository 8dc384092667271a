//! Polynomial evaluation of the existential fragments by guessing unary
//! types and containment relations between the quantified variables, then
//! determinizing variable by variable along the containment DAG.
//!
//! Free diagrams support the core vocabulary plus the Full atom; models
//! supplying DeterminizationAllPos/Neg oracles (perceptrons built in)
//! additionally support AllPos/AllNeg atoms.

use crate::error::{FoilError, Result};
use crate::instance::{PartialInstance, Quad, Trit, UndeterminedInstance};
use crate::model::{DecisionDiagram, DomainInstance, Model, Perceptron};
use crate::syntax::{
    expand_macros_to, fragment_of, negate_dual, prenex_blocks, Binding, Formula, FragmentTag,
    Quantifier, Target, Term,
};
use std::collections::{BTreeMap, BTreeSet, HashMap};

// ---- spec-level guess structures --------------------------------------

/// Unary-predicate type of a quantified variable. The basic catalog is
/// `{Pos, NotPos}`; the extended one distinguishes full/non-full variables
/// and which completion classes exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarType {
    /// Full and classified positive.
    Pos,
    /// Anything not positive (basic catalog only).
    NotPos,
    /// Full and classified negative.
    FullNeg,
    /// Not full, no constraint on completions (full-extended catalog only).
    NonFull,
    /// Not full, every completion positive.
    PartAllPos,
    /// Not full, every completion negative.
    PartAllNeg,
    /// Not full, both positive and negative completions exist.
    PartMixed,
}

impl VarType {
    pub fn is_full(self) -> bool {
        matches!(self, VarType::Pos | VarType::FullNeg)
    }

    pub fn pos(self) -> bool {
        self == VarType::Pos
    }

    /// Some completion is positive.
    pub fn exists_pos(self) -> bool {
        matches!(self, VarType::Pos | VarType::PartAllPos | VarType::PartMixed)
    }

    /// Some completion is negative.
    pub fn exists_neg(self) -> bool {
        matches!(self, VarType::FullNeg | VarType::PartAllNeg | VarType::PartMixed)
    }

    pub fn all_pos(self) -> bool {
        !self.exists_neg() && self != VarType::NotPos && self != VarType::NonFull
    }

    pub fn all_neg(self) -> bool {
        !self.exists_pos() && self != VarType::NotPos && self != VarType::NonFull
    }
}

/// Which types a guess may assign, by the atoms the matrix needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Catalog {
    /// Pos atoms only.
    Basic,
    /// Pos and Full atoms.
    FullExtended,
    /// Pos, Full, AllPos and AllNeg atoms.
    Plus,
}

impl Catalog {
    pub(crate) fn types(self) -> &'static [VarType] {
        match self {
            Catalog::Basic => &[VarType::Pos, VarType::NotPos],
            Catalog::FullExtended => &[VarType::Pos, VarType::FullNeg, VarType::NonFull],
            Catalog::Plus => &[
                VarType::Pos,
                VarType::FullNeg,
                VarType::PartAllPos,
                VarType::PartAllNeg,
                VarType::PartMixed,
            ],
        }
    }
}

/// A guessed type per quantified variable.
pub type TypeAssignment = Vec<VarType>;

/// A containment guess: `p` holds the ordered pairs asserted subsumed, `n`
/// the pairs asserted not subsumed. Together they cover all ordered pairs;
/// `p` is reflexively and transitively closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainmentGuess {
    pub p: BTreeSet<(usize, usize)>,
    pub n: BTreeSet<(usize, usize)>,
}

fn transitively_closed(p: &BTreeSet<(usize, usize)>) -> bool {
    for &(a, b) in p {
        for &(c, d) in p {
            if b == c && !p.contains(&(a, d)) {
                return false;
            }
        }
    }
    true
}

/// All consistent (type assignment, containment guess) pairs for `nvars`
/// quantified variables. The containment guesses are exactly the reflexive
/// transitive relations on the variables (equal variables are legal, so
/// antisymmetry is not required); every other ordered pair goes to `n`.
pub fn enumerate_guesses(nvars: usize, extended: bool) -> Vec<(TypeAssignment, ContainmentGuess)> {
    let catalog = if extended { Catalog::Plus } else { Catalog::Basic };
    let types = catalog.types();
    let off_diag: Vec<(usize, usize)> = (0..nvars)
        .flat_map(|i| (0..nvars).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut guesses = Vec::new();
    for mask in 0u64..(1 << off_diag.len()) {
        let mut p: BTreeSet<(usize, usize)> = (0..nvars).map(|i| (i, i)).collect();
        for (bit, &pair) in off_diag.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                p.insert(pair);
            }
        }
        if !transitively_closed(&p) {
            continue;
        }
        let n: BTreeSet<(usize, usize)> =
            off_diag.iter().copied().filter(|pair| !p.contains(pair)).collect();
        guesses.push(ContainmentGuess { p, n });
    }
    let mut out = Vec::new();
    let mut assignment = vec![types[0]; nvars];
    fn fill(
        i: usize,
        types: &[VarType],
        assignment: &mut TypeAssignment,
        guesses: &[ContainmentGuess],
        out: &mut Vec<(TypeAssignment, ContainmentGuess)>,
    ) {
        if i == assignment.len() {
            for g in guesses {
                out.push((assignment.clone(), g.clone()));
            }
            return;
        }
        for &t in types {
            assignment[i] = t;
            fill(i + 1, types, assignment, guesses, out);
        }
    }
    if nvars == 0 {
        for g in &guesses {
            out.push((vec![], g.clone()));
        }
    } else {
        fill(0, types, &mut assignment, &guesses, &mut out);
    }
    out
}

/// A set of component facts `var[k] = α`, closed under containment
/// propagation: defined values flow to successors, `?` flows to predecessors.
pub type FactSet = BTreeMap<(usize, usize), Trit>;

fn close_facts(facts: &mut FactSet, p: &BTreeSet<(usize, usize)>) -> bool {
    loop {
        let mut additions: Vec<((usize, usize), Trit)> = Vec::new();
        for (&(var, k), &val) in facts.iter() {
            match val {
                Trit::Bot => {
                    for &(a, b) in p {
                        if b == var && a != var {
                            additions.push(((a, k), Trit::Bot));
                        }
                    }
                }
                defined => {
                    for &(a, b) in p {
                        if a == var && b != var {
                            additions.push(((b, k), defined));
                        }
                    }
                }
            }
        }
        let mut changed = false;
        for (key, val) in additions {
            match facts.get(&key) {
                Some(&old) if old != val => return false,
                Some(_) => {}
                None => {
                    facts.insert(key, val);
                    changed = true;
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

/// All propagation-closed fact sets certifying every pair in `n_pairs`
/// (an index where the left variable is defined and differs from the right),
/// plus a `?`-component witness for every variable listed in `nonfull`.
pub fn guess_witnesses(
    n_pairs: &[(usize, usize)],
    p: &BTreeSet<(usize, usize)>,
    dim: usize,
    nonfull: &[usize],
) -> Vec<FactSet> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, FactSet)> = vec![(0, FactSet::new())];
    let total_obligations = n_pairs.len() + nonfull.len();
    while let Some((step, facts)) = stack.pop() {
        if step == total_obligations {
            out.push(facts);
            continue;
        }
        if step < n_pairs.len() {
            let (i, j) = n_pairs[step];
            for k in 0..dim {
                for a in [Trit::Zero, Trit::One] {
                    let other = if a == Trit::Zero { Trit::One } else { Trit::Zero };
                    for b in [other, Trit::Bot] {
                        let mut next = facts.clone();
                        let mut ok = true;
                        for (key, val) in [((i, k), a), ((j, k), b)] {
                            match next.get(&key) {
                                Some(&old) if old != val => ok = false,
                                Some(_) => {}
                                None => {
                                    next.insert(key, val);
                                }
                            }
                        }
                        if ok && close_facts(&mut next, p) {
                            stack.push((step + 1, next));
                        }
                    }
                }
            }
        } else {
            let var = nonfull[step - n_pairs.len()];
            for k in 0..dim {
                let mut next = facts.clone();
                match next.get(&(var, k)) {
                    Some(&old) if old != Trit::Bot => continue,
                    _ => {
                        next.insert((var, k), Trit::Bot);
                    }
                }
                if close_facts(&mut next, p) {
                    stack.push((step + 1, next));
                }
            }
        }
    }
    out
}

// ---- oracles -----------------------------------------------------------

/// Determinization oracles for a model class: find a determinization of the
/// allowed-set instance whose completions are all positive (respectively all
/// negative), or report that none exists.
pub trait DetOracle: Sync {
    fn det_all_pos(&self, d: &DomainInstance) -> Option<PartialInstance>;
    fn det_all_neg(&self, d: &DomainInstance) -> Option<PartialInstance>;
}

impl DetOracle for Perceptron {
    fn det_all_pos(&self, d: &DomainInstance) -> Option<PartialInstance> {
        self.det_all_pos_restricted(d).expect("dimension checked by engine")
    }

    fn det_all_neg(&self, d: &DomainInstance) -> Option<PartialInstance> {
        self.det_all_neg_restricted(d).expect("dimension checked by engine")
    }
}

/// DeterminizationAllPos for a perceptron and a four-valued instance.
pub fn det_all_pos_perceptron(m: &Perceptron, u: &UndeterminedInstance) -> Result<Option<PartialInstance>> {
    m.det_all_pos(u)
}

/// DeterminizationAllNeg for a perceptron and a four-valued instance.
pub fn det_all_neg_perceptron(m: &Perceptron, u: &UndeterminedInstance) -> Result<Option<PartialInstance>> {
    m.det_all_neg(u)
}

/// Does every full completion of `e` classify positive?
pub fn model_all_pos(m: &Model, e: &PartialInstance) -> Result<bool> {
    match m {
        Model::Diagram(d) => Ok(d.negative_completion(e).is_none()),
        Model::Perceptron(p) => {
            Ok(p.det_all_pos(&UndeterminedInstance::from_partial(e))?.is_some())
        }
    }
}

/// Does every full completion of `e` classify negative?
pub fn model_all_neg(m: &Model, e: &PartialInstance) -> Result<bool> {
    match m {
        Model::Diagram(d) => Ok(d.positive_completion(e).is_none()),
        Model::Perceptron(p) => {
            Ok(p.det_all_neg(&UndeterminedInstance::from_partial(e))?.is_some())
        }
    }
}

// ---- the PartialAllPos / DeterminizationAllPos reduction ----------------

/// Outcome of reducing an `(x, y, z)` triple to a determinization instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PapReduction {
    /// A component conflict already refutes the query.
    VerdictFalse,
    /// The determinization answer on this instance equals the query answer.
    Instance(UndeterminedInstance),
}

/// Reduce `PartialAllPos(x, y, z)` to a `DeterminizationAllPos` instance
/// (the same mapping serves `PartialAllNeg`/`DeterminizationAllNeg`).
///
/// Where `x` is defined, a conflicting defined `y` or `z` value refutes the
/// query outright. Where `x` is undefined, the witness component is pinned
/// by whichever of `y`, `z` are defined: conflicting definitions force `?`,
/// a single defined value `c` may be taken outright (refining `?` to `c`
/// only shrinks the completion set, preserving the all-positive or
/// all-negative property), and unconstrained components stay `◇`.
pub fn reduce_pap_to_dap(
    x: &PartialInstance,
    y: &PartialInstance,
    z: &PartialInstance,
) -> Result<PapReduction> {
    if x.dim() != y.dim() || x.dim() != z.dim() {
        return Err(FoilError::DimensionMismatch(
            "PartialAllPos arguments must share one dimension".into(),
        ));
    }
    let mut values = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let (xv, yv, zv) = (x.get(i), y.get(i), z.get(i));
        if xv != Trit::Bot {
            for other in [yv, zv] {
                if other != Trit::Bot && other != xv {
                    return Ok(PapReduction::VerdictFalse);
                }
            }
            values.push(Quad::from_trit(xv));
        } else {
            values.push(match (yv, zv) {
                (Trit::Bot, Trit::Bot) => Quad::Diamond,
                (a, Trit::Bot) => Quad::from_trit(a),
                (Trit::Bot, b) => Quad::from_trit(b),
                (a, b) if a == b => Quad::from_trit(a),
                _ => Quad::Bot,
            });
        }
    }
    Ok(PapReduction::Instance(UndeterminedInstance::new(values)))
}

/// Same reduction for the all-negative problem pair.
pub fn reduce_pan_to_dan(
    x: &PartialInstance,
    y: &PartialInstance,
    z: &PartialInstance,
) -> Result<PapReduction> {
    reduce_pap_to_dap(x, y, z)
}

/// The inverse construction: from a determinization instance, the triple
/// whose `PartialAllPos` answer matches. `x` keeps the determined values
/// with `?` where `u` is `?` or `◇`; `y` puts 1 exactly on `u`'s `?`
/// components; `z` puts 0 there.
pub fn pap_triple_from_dap(
    u: &UndeterminedInstance,
) -> (PartialInstance, PartialInstance, PartialInstance) {
    let n = u.dim();
    let mut x = PartialInstance::bottom(n);
    let mut y = PartialInstance::bottom(n);
    let mut z = PartialInstance::bottom(n);
    for i in 0..n {
        match u.get(i) {
            Quad::Zero => x.set(i, Trit::Zero),
            Quad::One => x.set(i, Trit::One),
            Quad::Bot => {
                y.set(i, Trit::One);
                z.set(i, Trit::Zero);
            }
            Quad::Diamond => {}
        }
    }
    (x, y, z)
}

// ---- the engine ---------------------------------------------------------

/// How variables typed full get determinized: free diagrams search the
/// pruned graph, oracle-backed classes use their closed forms.
pub trait CompletionSearch: Sync {
    /// A full instance within the allowed sets reaching a `target` leaf.
    fn completion_in(&self, dom: &DomainInstance, target: bool) -> Option<PartialInstance>;
}

/// Domain-pruned reachability on a free diagram.
impl CompletionSearch for DecisionDiagram {
    fn completion_in(&self, dom: &DomainInstance, target: bool) -> Option<PartialInstance> {
        diagram_completion_in(self, dom, target)
    }
}

pub(crate) fn diagram_completion_in(
    d: &DecisionDiagram,
    dom: &DomainInstance,
    target: bool,
) -> Option<PartialInstance> {
    use crate::model::Node;
    // A full instance needs a defined value in every component.
    for k in 0..dom.dim() {
        if !dom.allows(k, Trit::Zero) && !dom.allows(k, Trit::One) {
            return None;
        }
    }
    let allowed = |id: usize| -> [(usize, Trit); 2] {
        match &d.nodes[id] {
            Node::Leaf { .. } => unreachable!(),
            Node::Internal { var, lo, hi, .. } => {
                let mut out = [(usize::MAX, Trit::Bot); 2];
                let mut i = 0;
                if dom.allows(*var, Trit::Zero) {
                    out[i] = (*lo, Trit::Zero);
                    i += 1;
                }
                if dom.allows(*var, Trit::One) {
                    out[i] = (*hi, Trit::One);
                }
                out
            }
        }
    };
    let mut reaches = vec![None::<bool>; d.nodes.len()];
    let mut stack = vec![d.root];
    while let Some(&id) = stack.last() {
        if reaches[id].is_some() {
            stack.pop();
            continue;
        }
        match &d.nodes[id] {
            Node::Leaf { value } => {
                reaches[id] = Some(*value == target);
                stack.pop();
            }
            _ => {
                let mut pending = false;
                for (child, _) in allowed(id) {
                    if child != usize::MAX && reaches[child].is_none() {
                        stack.push(child);
                        pending = true;
                    }
                }
                if !pending {
                    let hit = allowed(id)
                        .iter()
                        .any(|&(c, _)| c != usize::MAX && reaches[c] == Some(true));
                    reaches[id] = Some(hit);
                    stack.pop();
                }
            }
        }
    }
    if reaches[d.root] != Some(true) {
        return None;
    }
    let mut values: Vec<Option<Trit>> = vec![None; dom.dim()];
    let mut id = d.root;
    loop {
        match &d.nodes[id] {
            Node::Leaf { .. } => break,
            Node::Internal { var, .. } => {
                let var = *var;
                let (child, v) = allowed(id)
                    .into_iter()
                    .find(|&(c, _)| c != usize::MAX && reaches[c] == Some(true))
                    .expect("reachability said yes");
                values[var] = Some(v);
                id = child;
            }
        }
    }
    let filled: Vec<Trit> = values
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            v.unwrap_or_else(|| {
                if dom.allows(k, Trit::Zero) {
                    Trit::Zero
                } else {
                    Trit::One
                }
            })
        })
        .collect();
    Some(PartialInstance::new(filled))
}

pub(crate) enum Solver<'a> {
    Free { diagram: &'a DecisionDiagram, search: &'a dyn CompletionSearch },
    Oracle { oracle: &'a dyn DetOracle, model: &'a Model },
}

impl<'a> Solver<'a> {
    fn classify(&self, e: &PartialInstance) -> Result<bool> {
        match self {
            Solver::Free { diagram, .. } => diagram.classify(e),
            Solver::Oracle { model, .. } => model.classify(e),
        }
    }

    fn exists_pos(&self, e: &PartialInstance) -> Result<bool> {
        match self {
            Solver::Free { diagram, .. } => Ok(diagram.positive_completion(e).is_some()),
            Solver::Oracle { oracle, .. } => {
                let d = DomainInstance::from_undetermined(&UndeterminedInstance::diamonds_at_bot(e))?;
                Ok(oracle.det_all_pos(&d).is_some())
            }
        }
    }

    fn exists_neg(&self, e: &PartialInstance) -> Result<bool> {
        match self {
            Solver::Free { diagram, .. } => Ok(diagram.negative_completion(e).is_some()),
            Solver::Oracle { oracle, .. } => {
                let d = DomainInstance::from_undetermined(&UndeterminedInstance::diamonds_at_bot(e))?;
                Ok(oracle.det_all_neg(&d).is_some())
            }
        }
    }
}

/// A node of the matrix signature: a quantified variable or a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum SigNode {
    Var(usize),
    Const(usize),
}

/// The collapsed containment DAG the determinization walks: classes of
/// equal variables, topologically ordered edges, optional pinned constant.
#[derive(Debug, Clone)]
pub struct GuessDag {
    /// Members (variable indices) of each class.
    pub classes: Vec<Vec<usize>>,
    /// Constant pinned to the class, if any.
    pub pinned: Vec<Option<PartialInstance>>,
    /// Containment edges between distinct classes, transitively closed.
    pub edges: BTreeSet<(usize, usize)>,
    /// Classes in determinization order.
    pub topo: Vec<usize>,
}

/// Per-class allowed-set store with containment arc-consistency.
struct DomainStore {
    doms: Vec<DomainInstance>,
    dim: usize,
}

impl DomainStore {
    fn propagate(&mut self, edges: &BTreeSet<(usize, usize)>, mut dirty: Vec<usize>) -> bool {
        // e_i ⊆ e_j constrains componentwise: D_i ⊆ {?} ∪ D_j, and when
        // ? ∉ D_i also D_j ⊆ D_i.
        while let Some(class) = dirty.pop() {
            for &(a, b) in edges.iter() {
                if a != class && b != class {
                    continue;
                }
                for k in 0..self.dim {
                    let da = mask(&self.doms[a], k);
                    let db = mask(&self.doms[b], k);
                    let mut na = da & (1 | db);
                    let mut nb = db;
                    if na & 1 == 0 {
                        nb &= na;
                    }
                    // Recompute: the rules interact.
                    na = da & (1 | nb);
                    if na == 0 || nb == 0 {
                        return false;
                    }
                    if na != da {
                        set_mask(&mut self.doms[a], k, na);
                        if !dirty.contains(&a) {
                            dirty.push(a);
                        }
                    }
                    if nb != db {
                        set_mask(&mut self.doms[b], k, nb);
                        if !dirty.contains(&b) {
                            dirty.push(b);
                        }
                    }
                }
            }
        }
        true
    }

    /// Pin every component of `class` to the values of `e`.
    fn pin_instance(&mut self, class: usize, e: &PartialInstance) -> bool {
        for k in 0..self.dim {
            if !self.doms[class].pin(k, e.get(k)) {
                return false;
            }
        }
        true
    }
}

fn mask(d: &DomainInstance, k: usize) -> u8 {
    let mut m = 0;
    if d.allows(k, Trit::Bot) {
        m |= 1;
    }
    if d.allows(k, Trit::Zero) {
        m |= 2;
    }
    if d.allows(k, Trit::One) {
        m |= 4;
    }
    m
}

fn set_mask(d: &mut DomainInstance, k: usize, m: u8) {
    d.restrict(k, m);
}

/// Atom of the compiled matrix.
#[derive(Debug, Clone)]
enum MAtom {
    PosVar(usize),
    FullVar(usize),
    AllPosVar(usize),
    AllNegVar(usize),
    Pair(SigNode, SigNode),
    EqPair(SigNode, SigNode),
    ConstFact(bool),
}

#[derive(Debug, Clone)]
enum Matrix {
    Atom(usize),
    Not(Box<Matrix>),
    And(Box<Matrix>, Box<Matrix>),
    Or(Box<Matrix>, Box<Matrix>),
}

struct Engine<'a> {
    solver: Solver<'a>,
    catalog: Catalog,
    dim: usize,
    nvars: usize,
    consts: Vec<PartialInstance>,
    atoms: Vec<MAtom>,
    matrix: Matrix,
    /// Ordered pairs of signature nodes mentioned by containment atoms,
    /// at least one side a variable.
    mentioned: Vec<(SigNode, SigNode)>,
}

fn node_index(node: &SigNode, nvars: usize) -> usize {
    match node {
        SigNode::Var(i) => *i,
        SigNode::Const(i) => nvars + i,
    }
}

impl<'a> Engine<'a> {
    fn build(solver: Solver<'a>, dim: usize, vars: &[String], matrix_f: &Formula) -> Result<Engine<'a>> {
        let var_index: HashMap<&str, usize> =
            vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut consts: Vec<PartialInstance> = Vec::new();
        let mut intern = |c: &PartialInstance| -> usize {
            if let Some(i) = consts.iter().position(|x| x == c) {
                i
            } else {
                consts.push(c.clone());
                consts.len() - 1
            }
        };
        let mut atoms: Vec<MAtom> = Vec::new();
        let mut mentioned: Vec<(SigNode, SigNode)> = Vec::new();
        let matrix = Self::compile(
            matrix_f,
            &var_index,
            &mut intern,
            &mut atoms,
            &mut mentioned,
            dim,
        )?;
        // Constant atoms are resolved once up front.
        let consts = consts;
        Ok(Engine {
            solver,
            catalog: Catalog::Basic, // fixed up by caller
            dim,
            nvars: vars.len(),
            consts,
            atoms,
            matrix,
            mentioned,
        })
    }

    fn compile(
        f: &Formula,
        vars: &HashMap<&str, usize>,
        intern: &mut impl FnMut(&PartialInstance) -> usize,
        atoms: &mut Vec<MAtom>,
        mentioned: &mut Vec<(SigNode, SigNode)>,
        dim: usize,
    ) -> Result<Matrix> {
        let node = |t: &Term,
                    vars: &HashMap<&str, usize>,
                    intern: &mut dyn FnMut(&PartialInstance) -> usize|
         -> Result<SigNode> {
            match t {
                Term::Var(v) => vars
                    .get(v.as_str())
                    .map(|&i| SigNode::Var(i))
                    .ok_or_else(|| FoilError::UnboundVariable(v.clone())),
                Term::Const(c) => {
                    if c.dim() != dim {
                        return Err(FoilError::DimensionMismatch(format!(
                            "constant of dimension {}, model has {dim}",
                            c.dim()
                        )));
                    }
                    Ok(SigNode::Const(intern(c)))
                }
            }
        };
        let push = |a: MAtom, atoms: &mut Vec<MAtom>| -> Matrix {
            atoms.push(a);
            Matrix::Atom(atoms.len() - 1)
        };
        Ok(match f {
            Formula::Pos(t) => {
                let n = node(t, vars, intern)?;
                match n {
                    SigNode::Var(i) => push(MAtom::PosVar(i), atoms),
                    SigNode::Const(_) => push(MAtom::Pair(n.clone(), n), atoms), // placeholder, fixed below
                }
            }
            Formula::FullAtom(t) => {
                let n = node(t, vars, intern)?;
                match n {
                    SigNode::Var(i) => push(MAtom::FullVar(i), atoms),
                    SigNode::Const(_) => push(MAtom::Pair(n.clone(), n), atoms),
                }
            }
            Formula::AllPosAtom(t) => {
                let n = node(t, vars, intern)?;
                match n {
                    SigNode::Var(i) => push(MAtom::AllPosVar(i), atoms),
                    SigNode::Const(_) => push(MAtom::Pair(n.clone(), n), atoms),
                }
            }
            Formula::AllNegAtom(t) => {
                let n = node(t, vars, intern)?;
                match n {
                    SigNode::Var(i) => push(MAtom::AllNegVar(i), atoms),
                    SigNode::Const(_) => push(MAtom::Pair(n.clone(), n), atoms),
                }
            }
            Formula::Subsumed(a, b) => {
                let na = node(a, vars, intern)?;
                let nb = node(b, vars, intern)?;
                if matches!((&na, &nb), (SigNode::Var(_), _) | (_, SigNode::Var(_))) && na != nb {
                    mentioned.push((na.clone(), nb.clone()));
                }
                push(MAtom::Pair(na, nb), atoms)
            }
            Formula::Eq(a, b) => {
                let na = node(a, vars, intern)?;
                let nb = node(b, vars, intern)?;
                if matches!((&na, &nb), (SigNode::Var(_), _) | (_, SigNode::Var(_))) && na != nb {
                    mentioned.push((na.clone(), nb.clone()));
                    mentioned.push((nb.clone(), na.clone()));
                }
                push(MAtom::EqPair(na, nb), atoms)
            }
            Formula::Macro(k, _) => {
                return Err(FoilError::Unsupported(format!(
                    "macro {} must be expanded before evaluation",
                    k.name()
                )))
            }
            Formula::Not(g) => {
                Matrix::Not(Box::new(Self::compile(g, vars, intern, atoms, mentioned, dim)?))
            }
            Formula::And(a, b) => Matrix::And(
                Box::new(Self::compile(a, vars, intern, atoms, mentioned, dim)?),
                Box::new(Self::compile(b, vars, intern, atoms, mentioned, dim)?),
            ),
            Formula::Or(a, b) => Matrix::Or(
                Box::new(Self::compile(a, vars, intern, atoms, mentioned, dim)?),
                Box::new(Self::compile(b, vars, intern, atoms, mentioned, dim)?),
            ),
            Formula::Exists(..) | Formula::Forall(..) => {
                return Err(FoilError::Unsupported(
                    "quantifier inside the matrix after prenexing".into(),
                ))
            }
        })
    }

    /// Replace placeholder constant atoms by precomputed truth values.
    fn resolve_const_atoms(&mut self, original: &Formula) -> Result<()> {
        // Recompile constant-only atoms: walk the formula in the same order
        // compile() visited it, patching atoms that involve only constants.
        let mut values: Vec<Option<bool>> = vec![None; self.atoms.len()];
        for (i, atom) in self.atoms.iter().enumerate() {
            let v = match atom {
                MAtom::Pair(SigNode::Const(a), SigNode::Const(b)) if a == b => {
                    // Placeholder from Pos/Full/AllPos/AllNeg on a constant,
                    // or a trivially reflexive containment.
                    None // handled below via original walk
                }
                MAtom::Pair(SigNode::Const(a), SigNode::Const(b)) => {
                    Some(self.consts[*a].subsumed_by_unchecked(&self.consts[*b]))
                }
                MAtom::EqPair(SigNode::Const(a), SigNode::Const(b)) => {
                    Some(self.consts[*a] == self.consts[*b])
                }
                MAtom::Pair(SigNode::Var(a), SigNode::Var(b)) if a == b => Some(true),
                MAtom::EqPair(SigNode::Var(a), SigNode::Var(b)) if a == b => Some(true),
                _ => None,
            };
            values[i] = v;
        }
        // Unary atoms over constants need the model; recover them by
        // re-walking the original formula in step with the atom list.
        let mut cursor = 0usize;
        self.patch_unary(original, &mut cursor, &mut values)?;
        for (i, v) in values.into_iter().enumerate() {
            if let Some(b) = v {
                self.atoms[i] = MAtom::ConstFact(b);
            }
        }
        Ok(())
    }

    fn patch_unary(
        &self,
        f: &Formula,
        cursor: &mut usize,
        values: &mut Vec<Option<bool>>,
    ) -> Result<()> {
        match f {
            Formula::Pos(t) | Formula::FullAtom(t) | Formula::AllPosAtom(t) | Formula::AllNegAtom(t) => {
                let i = *cursor;
                *cursor += 1;
                if let Term::Const(c) = t {
                    let v = match f {
                        Formula::Pos(_) => c.is_full() && self.solver.classify(c)?,
                        Formula::FullAtom(_) => c.is_full(),
                        Formula::AllPosAtom(_) => !self.solver.exists_neg(c)?,
                        _ => !self.solver.exists_pos(c)?,
                    };
                    values[i] = Some(v);
                }
                Ok(())
            }
            Formula::Subsumed(..) | Formula::Eq(..) => {
                *cursor += 1;
                Ok(())
            }
            Formula::Not(g) => self.patch_unary(g, cursor, values),
            Formula::And(a, b) | Formula::Or(a, b) => {
                self.patch_unary(a, cursor, values)?;
                self.patch_unary(b, cursor, values)
            }
            _ => Ok(()),
        }
    }

    fn atom_value(&self, i: usize, types: &[VarType], rel: &dyn Fn(usize, usize) -> bool) -> bool {
        match &self.atoms[i] {
            MAtom::ConstFact(b) => *b,
            MAtom::PosVar(v) => types[*v].pos(),
            MAtom::FullVar(v) => types[*v].is_full(),
            MAtom::AllPosVar(v) => types[*v].all_pos(),
            MAtom::AllNegVar(v) => types[*v].all_neg(),
            MAtom::Pair(a, b) => rel(node_index(a, self.nvars), node_index(b, self.nvars)),
            MAtom::EqPair(a, b) => {
                let (ia, ib) = (node_index(a, self.nvars), node_index(b, self.nvars));
                rel(ia, ib) && rel(ib, ia)
            }
        }
    }

    fn matrix_value(&self, m: &Matrix, types: &[VarType], rel: &dyn Fn(usize, usize) -> bool) -> bool {
        match m {
            Matrix::Atom(i) => self.atom_value(*i, types, rel),
            Matrix::Not(g) => !self.matrix_value(g, types, rel),
            Matrix::And(a, b) => {
                self.matrix_value(a, types, rel) && self.matrix_value(b, types, rel)
            }
            Matrix::Or(a, b) => self.matrix_value(a, types, rel) || self.matrix_value(b, types, rel),
        }
    }

    /// The full guess loop: types × containment assignments over mentioned
    /// pairs, then witness search and determinization.
    fn run(&self) -> Result<bool> {
        let types = self.catalog.types();
        // Deduplicate mentioned pairs.
        let mut pairs: Vec<(usize, usize)> = self
            .mentioned
            .iter()
            .map(|(a, b)| (node_index(a, self.nvars), node_index(b, self.nvars)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        // Constant-constant relations are facts, not guesses.
        pairs.retain(|&(a, b)| a < self.nvars || b < self.nvars);

        let mut assignment = vec![types[0]; self.nvars];
        let mut chosen = vec![false; pairs.len()];
        self.enumerate_types(0, types, &mut assignment, &pairs, &mut chosen)
    }

    fn enumerate_types(
        &self,
        i: usize,
        types: &[VarType],
        assignment: &mut Vec<VarType>,
        pairs: &[(usize, usize)],
        chosen: &mut Vec<bool>,
    ) -> Result<bool> {
        if i < self.nvars {
            for &t in types {
                assignment[i] = t;
                if self.enumerate_types(i + 1, types, assignment, pairs, chosen)? {
                    return Ok(true);
                }
            }
            return Ok(false);
        }
        self.enumerate_pairs(0, assignment, pairs, chosen)
    }

    fn enumerate_pairs(
        &self,
        i: usize,
        types: &[VarType],
        pairs: &[(usize, usize)],
        chosen: &mut Vec<bool>,
    ) -> Result<bool> {
        if i < pairs.len() {
            for v in [true, false] {
                chosen[i] = v;
                if self.enumerate_pairs(i + 1, types, pairs, chosen)? {
                    return Ok(true);
                }
            }
            return Ok(false);
        }
        self.try_guess(types, pairs, chosen)
    }

    fn try_guess(&self, types: &[VarType], pairs: &[(usize, usize)], chosen: &[bool]) -> Result<bool> {
        let nnodes = self.nvars + self.consts.len();
        // Closure base: reflexive + guessed-true pairs + actual
        // constant-constant subsumptions.
        let mut p: BTreeSet<(usize, usize)> = (0..nnodes).map(|i| (i, i)).collect();
        for (idx, &(a, b)) in pairs.iter().enumerate() {
            if chosen[idx] {
                p.insert((a, b));
            }
        }
        for (ci, c) in self.consts.iter().enumerate() {
            for (cj, d) in self.consts.iter().enumerate() {
                if ci != cj && c.subsumed_by_unchecked(d) {
                    p.insert((self.nvars + ci, self.nvars + cj));
                }
            }
        }
        // Transitive closure.
        loop {
            let mut add = Vec::new();
            for &(a, b) in &p {
                for &(c, d) in &p {
                    if b == c && !p.contains(&(a, d)) {
                        add.push((a, d));
                    }
                }
            }
            if add.is_empty() {
                break;
            }
            p.extend(add);
        }
        // Guessed-false pairs must not be forced true by the closure, and
        // closure constant-constant pairs must actually hold.
        let n_pairs: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|&(i, _)| !chosen[i])
            .map(|(_, &pr)| pr)
            .collect();
        for &pr in &n_pairs {
            if p.contains(&pr) {
                return Ok(false);
            }
        }
        for &(a, b) in &p {
            if a >= self.nvars && b >= self.nvars && a != b {
                let (ca, cb) = (&self.consts[a - self.nvars], &self.consts[b - self.nvars]);
                if !ca.subsumed_by_unchecked(cb) {
                    return Ok(false);
                }
            }
        }
        // The relation the matrix sees: closure membership for P, actual
        // constant facts otherwise; unmentioned pairs never reach here.
        let rel = |a: usize, b: usize| -> bool {
            if a == b {
                return true;
            }
            p.contains(&(a, b))
        };
        if !self.matrix_value(&self.matrix, types, &rel) {
            return Ok(false);
        }

        // SCC collapse over the closure.
        let mut class_of = vec![usize::MAX; nnodes];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for v in 0..nnodes {
            if class_of[v] != usize::MAX {
                continue;
            }
            let id = classes.len();
            let mut members = vec![v];
            class_of[v] = id;
            for w in v + 1..nnodes {
                if class_of[w] == usize::MAX && p.contains(&(v, w)) && p.contains(&(w, v)) {
                    class_of[w] = id;
                    members.push(w);
                }
            }
            classes.push(members);
        }
        // Class coherence: variable types equal; pinned constants equal and
        // type-compatible.
        let mut pinned: Vec<Option<PartialInstance>> = vec![None; classes.len()];
        let mut class_type: Vec<Option<VarType>> = vec![None; classes.len()];
        for (id, members) in classes.iter().enumerate() {
            for &m in members {
                if m < self.nvars {
                    match class_type[id] {
                        None => class_type[id] = Some(types[m]),
                        Some(t) if t == types[m] => {}
                        _ => return Ok(false),
                    }
                } else {
                    let c = &self.consts[m - self.nvars];
                    match &pinned[id] {
                        None => pinned[id] = Some(c.clone()),
                        Some(prev) if prev == c => {}
                        _ => return Ok(false),
                    }
                }
            }
        }
        // A pinned class must realize its guessed type.
        for id in 0..classes.len() {
            if let (Some(c), Some(t)) = (&pinned[id], class_type[id]) {
                if !self.type_matches(c, t)? {
                    return Ok(false);
                }
            }
        }
        // Edges between classes; N pairs inside one class are contradictions.
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(a, b) in &p {
            let (ca, cb) = (class_of[a], class_of[b]);
            if ca != cb {
                edges.insert((ca, cb));
            }
        }
        let mut n_class: Vec<(usize, usize)> = Vec::new();
        for &(a, b) in &n_pairs {
            let (ca, cb) = (class_of[a], class_of[b]);
            if ca == cb {
                return Ok(false);
            }
            // Two pinned classes: already decided by the closure check
            // (the pair is false in reality or it would be in p).
            if pinned[ca].is_some() && pinned[cb].is_some() {
                continue;
            }
            n_class.push((ca, cb));
        }
        n_class.sort_unstable();
        n_class.dedup();

        // Topological order, ties by smallest member index.
        let topo = topo_order(classes.len(), &edges);

        let dag = GuessDag { classes, pinned, edges, topo };
        let class_types: Vec<VarType> = class_type
            .into_iter()
            .enumerate()
            .map(|(id, t)| t.unwrap_or(if dag.pinned[id].is_some() { VarType::Pos } else { VarType::NotPos }))
            .collect();
        // Classes with no variable member and no pinned constant cannot
        // exist; classes made only of constants are fully pinned.
        self.search_witnesses(&dag, &class_types, &n_class)
    }

    fn type_matches(&self, c: &PartialInstance, t: VarType) -> Result<bool> {
        let full = c.is_full();
        let pos = full && self.solver.classify(c)?;
        Ok(match self.catalog {
            Catalog::Basic => (t == VarType::Pos) == pos,
            Catalog::FullExtended => match t {
                VarType::Pos => pos,
                VarType::FullNeg => full && !pos,
                VarType::NonFull => !full,
                _ => false,
            },
            Catalog::Plus => match t {
                VarType::Pos => pos,
                VarType::FullNeg => full && !pos,
                VarType::PartAllPos => !full && !self.solver.exists_neg(c)?,
                VarType::PartAllNeg => !full && !self.solver.exists_pos(c)?,
                VarType::PartMixed => {
                    !full && self.solver.exists_pos(c)? && self.solver.exists_neg(c)?
                }
                _ => false,
            },
        })
    }

    /// Backtracking search over certificates for the N pairs (and, in the
    /// plus catalog, the `?`-component witnesses of non-full classes),
    /// finishing each leaf with the DAG determinization.
    fn search_witnesses(
        &self,
        dag: &GuessDag,
        class_types: &[VarType],
        n_class: &[(usize, usize)],
    ) -> Result<bool> {
        let mut store = DomainStore {
            doms: vec![DomainInstance::unrestricted(self.dim); dag.classes.len()],
            dim: self.dim,
        };
        // Seed pinned constants and full-type restrictions.
        for (id, pin) in dag.pinned.iter().enumerate() {
            if let Some(c) = pin {
                if !store.pin_instance(id, c) {
                    return Ok(false);
                }
            }
        }
        for (id, &t) in class_types.iter().enumerate() {
            if t.is_full() {
                for k in 0..self.dim {
                    if !store.doms[id].restrict(k, 0b110) {
                        return Ok(false);
                    }
                }
            }
        }
        if !store.propagate(&dag.edges, (0..dag.classes.len()).collect()) {
            return Ok(false);
        }
        // Obligations: certificates for N pairs, then (plus catalog only)
        // one `?` component per non-full unpinned class.
        let mut bot_witness: Vec<usize> = Vec::new();
        if self.catalog == Catalog::Plus {
            for (id, &t) in class_types.iter().enumerate() {
                if !t.is_full() && dag.pinned[id].is_none() {
                    bot_witness.push(id);
                }
            }
        }
        self.certify(dag, class_types, n_class, &bot_witness, 0, &mut store)
    }

    fn certify(
        &self,
        dag: &GuessDag,
        class_types: &[VarType],
        n_class: &[(usize, usize)],
        bot_witness: &[usize],
        step: usize,
        store: &mut DomainStore,
    ) -> Result<bool> {
        if step == n_class.len() + bot_witness.len() {
            return self.determinize(dag, class_types, n_class, store);
        }
        if step < n_class.len() {
            let (i, j) = n_class[step];
            // Already certified: some component where i is pinned defined
            // and j cannot take that value.
            let certified = (0..self.dim).any(|k| match store.doms[i].fixed(k) {
                Some(v) if v != Trit::Bot => !store.doms[j].allows(k, v),
                _ => false,
            });
            if certified {
                return self.certify(dag, class_types, n_class, bot_witness, step + 1, store);
            }
            for k in 0..self.dim {
                for a in [Trit::Zero, Trit::One] {
                    if !store.doms[i].allows(k, a) {
                        continue;
                    }
                    let other = if a == Trit::Zero { Trit::One } else { Trit::Zero };
                    for b in [other, Trit::Bot] {
                        if !store.doms[j].allows(k, b) {
                            continue;
                        }
                        let mut next = DomainStore { doms: store.doms.clone(), dim: self.dim };
                        if !next.doms[i].pin(k, a) || !next.doms[j].pin(k, b) {
                            continue;
                        }
                        if !next.propagate(&dag.edges, vec![i, j]) {
                            continue;
                        }
                        if !self.classes_feasible(dag, class_types, &next)? {
                            continue;
                        }
                        if self.certify(dag, class_types, n_class, bot_witness, step + 1, &mut next)? {
                            return Ok(true);
                        }
                    }
                }
            }
            return Ok(false);
        }
        let class = bot_witness[step - n_class.len()];
        for k in 0..self.dim {
            if !store.doms[class].allows(k, Trit::Bot) {
                continue;
            }
            let mut next = DomainStore { doms: store.doms.clone(), dim: self.dim };
            if !next.doms[class].pin(k, Trit::Bot) || !next.propagate(&dag.edges, vec![class]) {
                continue;
            }
            if !self.classes_feasible(dag, class_types, &next)? {
                continue;
            }
            if self.certify(dag, class_types, n_class, bot_witness, step + 1, &mut next)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Cheap per-class feasibility used to prune the certificate search.
    fn classes_feasible(
        &self,
        dag: &GuessDag,
        class_types: &[VarType],
        store: &DomainStore,
    ) -> Result<bool> {
        for (id, &t) in class_types.iter().enumerate() {
            if dag.pinned[id].is_some() {
                continue;
            }
            let dom = &store.doms[id];
            let ok = match (t, &self.solver) {
                (VarType::Pos, Solver::Free { search, .. }) => {
                    search.completion_in(dom, true).is_some()
                }
                (VarType::FullNeg, Solver::Free { search, .. }) => {
                    search.completion_in(dom, false).is_some()
                }
                (VarType::Pos, Solver::Oracle { oracle, .. }) => {
                    let mut d = dom.clone();
                    for k in 0..self.dim {
                        if !d.restrict(k, 0b110) {
                            return Ok(false);
                        }
                    }
                    oracle.det_all_pos(&d).is_some()
                }
                (VarType::FullNeg, Solver::Oracle { oracle, .. }) => {
                    let mut d = dom.clone();
                    for k in 0..self.dim {
                        if !d.restrict(k, 0b110) {
                            return Ok(false);
                        }
                    }
                    oracle.det_all_neg(&d).is_some()
                }
                (VarType::PartAllPos, Solver::Oracle { oracle, .. }) => {
                    oracle.det_all_pos(dom).is_some()
                }
                (VarType::PartAllNeg, Solver::Oracle { oracle, .. }) => {
                    oracle.det_all_neg(dom).is_some()
                }
                _ => true,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Walk the DAG in topological order, determinizing each class; verify
    /// every guessed fact on the produced values.
    fn determinize(
        &self,
        dag: &GuessDag,
        class_types: &[VarType],
        n_class: &[(usize, usize)],
        store: &mut DomainStore,
    ) -> Result<bool> {
        let mut values: Vec<Option<PartialInstance>> = dag.pinned.clone();
        for &id in &dag.topo {
            if values[id].is_some() {
                continue;
            }
            let t = class_types[id];
            let dom = &store.doms[id];
            let v: Option<PartialInstance> = match (&self.solver, t) {
                (Solver::Free { search, .. }, VarType::Pos) => search.completion_in(dom, true),
                (Solver::Free { search, .. }, VarType::FullNeg) => search.completion_in(dom, false),
                (Solver::Free { .. }, _) | (Solver::Oracle { .. }, VarType::NotPos)
                | (Solver::Oracle { .. }, VarType::NonFull)
                | (Solver::Oracle { .. }, VarType::PartMixed) => {
                    // Fill every unforced component with `?`.
                    let mut out = Vec::with_capacity(self.dim);
                    for k in 0..self.dim {
                        out.push(if dom.allows(k, Trit::Bot) {
                            Trit::Bot
                        } else if let Some(v) = dom.fixed(k) {
                            v
                        } else {
                            // Forced defined but unpinned: predecessors all
                            // processed, so this only happens under a
                            // full-typed equal-class; pick 0.
                            if dom.allows(k, Trit::Zero) {
                                Trit::Zero
                            } else {
                                Trit::One
                            }
                        });
                    }
                    Some(PartialInstance::new(out))
                }
                (Solver::Oracle { oracle, .. }, VarType::Pos) => {
                    let mut d = dom.clone();
                    let mut ok = true;
                    for k in 0..self.dim {
                        ok &= d.restrict(k, 0b110);
                    }
                    if ok {
                        oracle.det_all_pos(&d)
                    } else {
                        None
                    }
                }
                (Solver::Oracle { oracle, .. }, VarType::FullNeg) => {
                    let mut d = dom.clone();
                    let mut ok = true;
                    for k in 0..self.dim {
                        ok &= d.restrict(k, 0b110);
                    }
                    if ok {
                        oracle.det_all_neg(&d)
                    } else {
                        None
                    }
                }
                (Solver::Oracle { oracle, .. }, VarType::PartAllPos) => oracle.det_all_pos(dom),
                (Solver::Oracle { oracle, .. }, VarType::PartAllNeg) => oracle.det_all_neg(dom),
            };
            let Some(v) = v else { return Ok(false) };
            if !store.pin_instance(id, &v) {
                return Ok(false);
            }
            if !store.propagate(&dag.edges, vec![id]) {
                return Ok(false);
            }
            values[id] = Some(v);
        }
        // Verification: every type fact on the concrete values. Pinned
        // classes were checked against their guessed type up front;
        // constant-only classes carry no guessed type at all.
        for (id, v) in values.iter().enumerate() {
            if dag.pinned[id].is_some() {
                continue;
            }
            let v = v.as_ref().expect("all classes determinized");
            if !self.type_matches(v, class_types[id])? {
                return Ok(false);
            }
        }
        // The containment facts hold by construction; check in debug builds.
        #[cfg(debug_assertions)]
        {
            for &(a, b) in &dag.edges {
                let (va, vb) = (values[a].as_ref().unwrap(), values[b].as_ref().unwrap());
                debug_assert!(va.subsumed_by_unchecked(vb), "P edge violated");
            }
            for &(a, b) in n_class {
                let (va, vb) = (values[a].as_ref().unwrap(), values[b].as_ref().unwrap());
                debug_assert!(!va.subsumed_by_unchecked(vb), "N pair violated");
            }
        }
        let _ = n_class;
        Ok(true)
    }
}

fn topo_order(nclasses: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<usize> {
    let mut indeg = vec![0usize; nclasses];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..nclasses).filter(|&c| indeg[c] == 0).collect();
    let mut out = Vec::with_capacity(nclasses);
    while let Some(&c) = ready.iter().next() {
        ready.remove(&c);
        out.push(c);
        for &(a, b) in edges {
            if a == c {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.insert(b);
                }
            }
        }
    }
    debug_assert_eq!(out.len(), nclasses, "containment closure must be acyclic");
    out
}

/// Determinize the classes of a guess DAG under the given types and closed
/// fact set. Exposed for direct testing of the determinization step.
pub fn determinize_dag(
    dag: &GuessDag,
    class_types: &[VarType],
    facts: &FactSet,
    solver_model: &Model,
    dim: usize,
) -> Result<Option<Vec<PartialInstance>>> {
    let engine = match solver_model {
        Model::Diagram(d) => Engine {
            solver: Solver::Free { diagram: d, search: d },
            catalog: Catalog::FullExtended,
            dim,
            nvars: dag.classes.iter().map(|c| c.len()).sum(),
            consts: vec![],
            atoms: vec![],
            matrix: Matrix::Atom(usize::MAX),
            mentioned: vec![],
        },
        Model::Perceptron(p) => Engine {
            solver: Solver::Oracle { oracle: p, model: solver_model },
            catalog: Catalog::Plus,
            dim,
            nvars: dag.classes.iter().map(|c| c.len()).sum(),
            consts: vec![],
            atoms: vec![],
            matrix: Matrix::Atom(usize::MAX),
            mentioned: vec![],
        },
    };
    let mut store = DomainStore {
        doms: vec![DomainInstance::unrestricted(dim); dag.classes.len()],
        dim,
    };
    for (id, pin) in dag.pinned.iter().enumerate() {
        if let Some(c) = pin {
            if !store.pin_instance(id, c) {
                return Ok(None);
            }
        }
    }
    for (&(var, k), &val) in facts {
        let class = dag
            .classes
            .iter()
            .position(|members| members.contains(&var))
            .expect("fact variable not in any class");
        if !store.doms[class].pin(k, val) {
            return Ok(None);
        }
    }
    for (id, &t) in class_types.iter().enumerate() {
        if t.is_full() {
            for k in 0..dim {
                if !store.doms[id].restrict(k, 0b110) {
                    return Ok(None);
                }
            }
        }
    }
    if !store.propagate(&dag.edges, (0..dag.classes.len()).collect()) {
        return Ok(None);
    }
    let mut values = Vec::new();
    if engine.determinize(dag, class_types, &[], &mut store)? {
        for id in 0..dag.classes.len() {
            let mut out = Vec::with_capacity(dim);
            for k in 0..dim {
                out.push(store.doms[id].fixed(k).unwrap_or(Trit::Bot));
            }
            values.push(PartialInstance::new(out));
        }
        Ok(Some(values))
    } else {
        Ok(None)
    }
}

// ---- entry points -------------------------------------------------------

fn catalog_for(matrix: &Formula) -> Catalog {
    fn scan(f: &Formula, plus: &mut bool, full: &mut bool) {
        match f {
            Formula::AllPosAtom(Term::Var(_)) | Formula::AllNegAtom(Term::Var(_)) => *plus = true,
            Formula::FullAtom(Term::Var(_)) => *full = true,
            Formula::Not(g) => scan(g, plus, full),
            Formula::And(a, b) | Formula::Or(a, b) => {
                scan(a, plus, full);
                scan(b, plus, full);
            }
            Formula::Exists(_, g) | Formula::Forall(_, g) => scan(g, plus, full),
            _ => {}
        }
    }
    let (mut plus, mut full) = (false, false);
    scan(matrix, &mut plus, &mut full);
    if plus {
        Catalog::Plus
    } else if full {
        Catalog::FullExtended
    } else {
        Catalog::Basic
    }
}

fn eval_existential(solver: Solver, dim: usize, f: &Formula, binding: &Binding) -> Result<bool> {
    let f = f.substitute(binding);
    if let Some(v) = f.free_vars().first() {
        return Err(FoilError::UnboundVariable(v.clone()));
    }
    if let Some(cd) = f.const_dim() {
        if cd != dim {
            return Err(FoilError::DimensionMismatch(format!(
                "query constants have dimension {cd}, model has {dim}"
            )));
        }
    }
    let expanded = expand_macros_to(&f, Target::Extended);
    let (expanded, complement) = match fragment_of(&expanded) {
        FragmentTag::ExistsFoil | FragmentTag::ExistsFoilPlus => (expanded, false),
        FragmentTag::ForallFoil | FragmentTag::ForallFoilPlus => (negate_dual(&expanded)?, true),
        FragmentTag::GeneralFoil => {
            return Err(FoilError::Unsupported(
                "the existential engine handles only the existential and universal fragments"
                    .into(),
            ))
        }
    };
    let prenex = prenex_blocks(&expanded);
    debug_assert!(prenex.prefix.iter().all(|(q, _)| *q == Quantifier::Exists));
    let vars: Vec<String> = prenex.prefix.iter().map(|(_, x)| x.clone()).collect();

    let catalog = catalog_for(&prenex.matrix);
    if matches!(solver, Solver::Free { .. }) && catalog == Catalog::Plus {
        return Err(FoilError::MissingOracle(
            "AllPos/AllNeg atoms on quantified variables need determinization oracles; \
             free diagrams provide none (use the naive engine)"
                .into(),
        ));
    }
    let mut engine = Engine::build(solver, dim, &vars, &prenex.matrix)?;
    engine.catalog = catalog;
    engine.resolve_const_atoms(&prenex.matrix)?;
    let answer = engine.run()?;
    Ok(answer != complement)
}

/// Evaluate an existential- or universal-fragment query over a free diagram.
pub fn eval_exists_fbdd(m: &DecisionDiagram, f: &Formula, binding: &Binding) -> Result<bool> {
    let report = m.validate()?;
    if !report.is_free {
        return Err(FoilError::ModelNotFree);
    }
    eval_existential(Solver::Free { diagram: m, search: m }, m.dim, f, binding)
}

/// Evaluate with a caller-supplied completion search, for diagrams that are
/// free only gadget-wise (the binarization output).
pub fn eval_exists_fbdd_with_search(
    m: &DecisionDiagram,
    search: &dyn CompletionSearch,
    f: &Formula,
    binding: &Binding,
) -> Result<bool> {
    m.validate()?;
    eval_existential(Solver::Free { diagram: m, search }, m.dim, f, binding)
}

/// Evaluate an existential-plus query over any model class with
/// determinization oracles.
pub fn eval_exists_plus(
    m: &Model,
    f: &Formula,
    binding: &Binding,
    oracle: &dyn DetOracle,
) -> Result<bool> {
    eval_existential(Solver::Oracle { oracle, model: m }, m.dim(), f, binding)
}

/// Oracle selection by model class: perceptrons have built-in closed forms;
/// other classes must supply their own.
pub fn eval_exists_auto(m: &Model, f: &Formula, binding: &Binding) -> Result<bool> {
    match m {
        Model::Perceptron(p) => eval_exists_plus(m, f, binding, p),
        Model::Diagram(d) => eval_exists_fbdd(d, f, binding),
    }
}
