//! Ground-truth evaluation by exhaustive quantification over `{0,1,?}^n`.
//!
//! Deliberately the slow oracle: structural recursion with short-circuiting,
//! a work cap counting atom evaluations, and optional parallel partitioning
//! of the outermost quantifier.

use crate::error::{FoilError, Result};
use crate::instance::{PartialInstance, Trit};
use crate::model::Model;
use crate::syntax::{Binding, Formula, Term};
use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

/// Evaluation limits shared by the engines.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Cap on atom evaluations performed by the naive engine.
    pub max_work: u64,
    /// Allow parallel partitioning of the top-level quantifier.
    pub parallel: bool,
    /// Width cap for intermediate diagrams in the width engine.
    pub max_width: usize,
    /// Node cap for intermediate diagrams in the width engine.
    pub max_nodes: usize,
}

impl Default for EvalConfig {
    fn default() -> EvalConfig {
        EvalConfig {
            max_work: 10_000_000,
            parallel: true,
            max_width: 4096,
            max_nodes: 1_000_000,
        }
    }
}

pub(crate) struct WorkMeter {
    spent: AtomicU64,
    cap: u64,
    stop: AtomicBool,
}

impl WorkMeter {
    pub(crate) fn new(cap: u64) -> WorkMeter {
        WorkMeter { spent: AtomicU64::new(0), cap, stop: AtomicBool::new(false) }
    }

    fn charge(&self, amount: u64) -> Result<()> {
        let total = self.spent.fetch_add(amount, Ordering::Relaxed) + amount;
        if total > self.cap {
            self.stop.store(true, Ordering::Relaxed);
            return Err(FoilError::WorkCapExceeded { spent: total, cap: self.cap });
        }
        Ok(())
    }

    pub(crate) fn spent(&self) -> u64 {
        self.spent.load(Ordering::Relaxed)
    }
}

/// Batches cap checks so the shared counter is touched rarely.
struct LocalWork<'a> {
    meter: &'a WorkMeter,
    pending: u64,
}

const FLUSH_EVERY: u64 = 8192;

impl<'a> LocalWork<'a> {
    fn new(meter: &'a WorkMeter) -> LocalWork<'a> {
        LocalWork { meter, pending: 0 }
    }

    #[inline]
    fn tick(&mut self) -> Result<()> {
        self.pending += 1;
        if self.pending >= FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if self.pending > 0 {
            let p = std::mem::take(&mut self.pending);
            self.meter.charge(p)?;
        }
        if self.meter.stop.load(Ordering::Relaxed) {
            return Err(FoilError::WorkCapExceeded {
                spent: self.meter.spent(),
                cap: self.meter.cap,
            });
        }
        Ok(())
    }
}

/// Formula compiled to variable slots for allocation-free evaluation.
enum CTerm {
    Slot(usize),
    Const(PartialInstance),
}

enum CFormula {
    Pos(CTerm),
    Sub(CTerm, CTerm),
    Eq(CTerm, CTerm),
    Full(CTerm),
    AllPos(CTerm),
    AllNeg(CTerm),
    Not(Box<CFormula>),
    And(Box<CFormula>, Box<CFormula>),
    Or(Box<CFormula>, Box<CFormula>),
    Exists(usize, Box<CFormula>),
    Forall(usize, Box<CFormula>),
}

fn compile(
    f: &Formula,
    scope: &mut Vec<(String, usize)>,
    next_slot: &mut usize,
    binding: &Binding,
    dim: usize,
) -> Result<CFormula> {
    let term = |t: &Term, scope: &Vec<(String, usize)>| -> Result<CTerm> {
        match t {
            Term::Var(v) => {
                if let Some(&(_, slot)) = scope.iter().rev().find(|(name, _)| name == v) {
                    return Ok(CTerm::Slot(slot));
                }
                match binding.get(v) {
                    Some(c) if c.dim() == dim => Ok(CTerm::Const(c.clone())),
                    Some(c) => Err(FoilError::DimensionMismatch(format!(
                        "binding for `{v}` has dimension {}, model has {dim}",
                        c.dim()
                    ))),
                    None => Err(FoilError::UnboundVariable(v.clone())),
                }
            }
            Term::Const(c) if c.dim() == dim => Ok(CTerm::Const(c.clone())),
            Term::Const(c) => Err(FoilError::DimensionMismatch(format!(
                "constant of dimension {}, model has {dim}",
                c.dim()
            ))),
        }
    };
    Ok(match f {
        Formula::Pos(t) => CFormula::Pos(term(t, scope)?),
        Formula::Subsumed(a, b) => CFormula::Sub(term(a, scope)?, term(b, scope)?),
        Formula::Eq(a, b) => CFormula::Eq(term(a, scope)?, term(b, scope)?),
        Formula::FullAtom(t) => CFormula::Full(term(t, scope)?),
        Formula::AllPosAtom(t) => CFormula::AllPos(term(t, scope)?),
        Formula::AllNegAtom(t) => CFormula::AllNeg(term(t, scope)?),
        Formula::Macro(k, _) => {
            return Err(FoilError::Unsupported(format!(
                "macro {} must be expanded before evaluation",
                k.name()
            )))
        }
        Formula::Not(g) => CFormula::Not(Box::new(compile(g, scope, next_slot, binding, dim)?)),
        Formula::And(a, b) => CFormula::And(
            Box::new(compile(a, scope, next_slot, binding, dim)?),
            Box::new(compile(b, scope, next_slot, binding, dim)?),
        ),
        Formula::Or(a, b) => CFormula::Or(
            Box::new(compile(a, scope, next_slot, binding, dim)?),
            Box::new(compile(b, scope, next_slot, binding, dim)?),
        ),
        Formula::Exists(x, g) | Formula::Forall(x, g) => {
            let slot = *next_slot;
            *next_slot += 1;
            scope.push((x.clone(), slot));
            let body = compile(g, scope, next_slot, binding, dim)?;
            scope.pop();
            match f {
                Formula::Exists(..) => CFormula::Exists(slot, Box::new(body)),
                _ => CFormula::Forall(slot, Box::new(body)),
            }
        }
    })
}

/// In-place odometer step over `{?,0,1}^n` in lexicographic order with
/// `? < 0 < 1`, index 0 most significant. False when wrapped.
fn increment(e: &mut PartialInstance) -> bool {
    for i in (0..e.dim()).rev() {
        match e.get(i) {
            Trit::Bot => {
                e.set(i, Trit::Zero);
                return true;
            }
            Trit::Zero => {
                e.set(i, Trit::One);
                return true;
            }
            Trit::One => e.set(i, Trit::Bot),
        }
    }
    false
}

fn decode(mut code: u64, n: usize) -> PartialInstance {
    let mut values = vec![Trit::Bot; n];
    for slot in values.iter_mut().rev() {
        *slot = match code % 3 {
            0 => Trit::Bot,
            1 => Trit::Zero,
            _ => Trit::One,
        };
        code /= 3;
    }
    PartialInstance::new(values)
}

struct Evaluator<'a> {
    model: &'a Model,
    dim: usize,
}

impl<'a> Evaluator<'a> {
    fn resolve<'e>(&self, t: &'e CTerm, env: &'e [PartialInstance]) -> &'e PartialInstance {
        match t {
            CTerm::Slot(s) => &env[*s],
            CTerm::Const(c) => c,
        }
    }

    fn eval(&self, f: &CFormula, env: &mut Vec<PartialInstance>, work: &mut LocalWork) -> Result<bool> {
        match f {
            CFormula::Pos(t) => {
                work.tick()?;
                let e = self.resolve(t, env);
                if !e.is_full() {
                    return Ok(false);
                }
                self.model.classify(e)
            }
            CFormula::Sub(a, b) => {
                work.tick()?;
                Ok(self.resolve(a, env).subsumed_by_unchecked(self.resolve(b, env)))
            }
            CFormula::Eq(a, b) => {
                work.tick()?;
                Ok(self.resolve(a, env) == self.resolve(b, env))
            }
            CFormula::Full(t) => {
                work.tick()?;
                Ok(self.resolve(t, env).is_full())
            }
            CFormula::AllPos(t) => {
                // All full completions positive; completions of completions
                // are themselves, so this also covers the literal
                // universal-superset reading.
                let e = self.resolve(t, env).clone();
                for c in e.completions() {
                    work.tick()?;
                    if !self.model.classify(&c)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            CFormula::AllNeg(t) => {
                let e = self.resolve(t, env).clone();
                for c in e.completions() {
                    work.tick()?;
                    if self.model.classify(&c)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            CFormula::Not(g) => Ok(!self.eval(g, env, work)?),
            CFormula::And(a, b) => Ok(self.eval(a, env, work)? && self.eval(b, env, work)?),
            CFormula::Or(a, b) => Ok(self.eval(a, env, work)? || self.eval(b, env, work)?),
            CFormula::Exists(slot, body) => {
                env[*slot] = PartialInstance::bottom(self.dim);
                loop {
                    if self.eval(body, env, work)? {
                        return Ok(true);
                    }
                    if !increment(&mut env[*slot]) {
                        return Ok(false);
                    }
                }
            }
            CFormula::Forall(slot, body) => {
                env[*slot] = PartialInstance::bottom(self.dim);
                loop {
                    if !self.eval(body, env, work)? {
                        return Ok(false);
                    }
                    if !increment(&mut env[*slot]) {
                        return Ok(true);
                    }
                }
            }
        }
    }
}

/// Evaluate a macro-expanded formula over the structure of all partial
/// instances of the model's dimension. Free variables are resolved against
/// `binding`; enumeration work is bounded by `cfg.max_work`.
pub fn eval_naive(model: &Model, f: &Formula, binding: &Binding, cfg: &EvalConfig) -> Result<bool> {
    let dim = model.dim();
    if let Some(cd) = f.const_dim() {
        if cd != dim {
            return Err(FoilError::DimensionMismatch(format!(
                "query constants have dimension {cd}, model has {dim}"
            )));
        }
    }
    let mut scope = Vec::new();
    let mut slots = 0usize;
    let compiled = compile(f, &mut scope, &mut slots, binding, dim)?;
    let meter = WorkMeter::new(cfg.max_work);
    let eval = Evaluator { model, dim };

    // Parallel partitioning of the outermost quantifier when worthwhile.
    let domain = 3u64.checked_pow(dim as u32);
    if cfg.parallel && dim >= 6 {
        if let (Some(domain), CFormula::Exists(slot, body) | CFormula::Forall(slot, body)) =
            (domain, &compiled)
        {
            let is_exists = matches!(compiled, CFormula::Exists(..));
            let chunks = (rayon::current_num_threads() * 4) as u64;
            let chunk = domain.div_ceil(chunks);
            let found = AtomicBool::new(false);
            let result: Result<Vec<bool>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let lo = c * chunk;
                    let hi = ((c + 1) * chunk).min(domain);
                    if lo >= hi {
                        return Ok(!is_exists);
                    }
                    let mut env = vec![PartialInstance::bottom(dim); slots];
                    let mut work = LocalWork::new(&meter);
                    let mut code = lo;
                    env[*slot] = decode(lo, dim);
                    loop {
                        if found.load(Ordering::Relaxed) {
                            // Another partition already decided the result.
                            return Ok(!is_exists);
                        }
                        let v = eval.eval(body, &mut env, &mut work)?;
                        if v == is_exists {
                            found.store(true, Ordering::Relaxed);
                            work.flush()?;
                            return Ok(is_exists);
                        }
                        code += 1;
                        if code >= hi {
                            work.flush()?;
                            return Ok(!is_exists);
                        }
                        increment(&mut env[*slot]);
                    }
                })
                .collect();
            let parts = result?;
            return Ok(if is_exists {
                parts.iter().any(|&b| b)
            } else {
                parts.iter().all(|&b| b)
            });
        }
    }

    let mut env = vec![PartialInstance::bottom(dim); slots.max(1)];
    let mut work = LocalWork::new(&meter);
    let out = eval.eval(&compiled, &mut env, &mut work);
    work.flush().and(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecisionDiagram, DiagramKind, Perceptron};
    use crate::syntax::parse_core;

    fn cfg() -> EvalConfig {
        EvalConfig { parallel: false, ..EvalConfig::default() }
    }

    #[test]
    fn reflexivity_witness() {
        let m = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 2, false));
        let f = parse_core("Exists x, x <= x").unwrap();
        assert!(eval_naive(&m, &f, &Binding::new(), &cfg()).unwrap());
    }

    #[test]
    fn no_positive_instance() {
        let m = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 3, false));
        let f = parse_core("Exists x, P(x)").unwrap();
        assert!(!eval_naive(&m, &f, &Binding::new(), &cfg()).unwrap());
    }

    #[test]
    fn perceptron_superset_query() {
        // Only (1,1) is positive, and it does not complete (0,?).
        let m = Model::Perceptron(Perceptron::new(vec![1.0, 1.0], 2.0));
        let f = parse_core("Exists x, P(x) ^ (0,?) <= x").unwrap();
        assert!(!eval_naive(&m, &f, &Binding::new(), &cfg()).unwrap());
        let g = parse_core("Exists x, P(x) ^ (1,?) <= x").unwrap();
        assert!(eval_naive(&m, &g, &Binding::new(), &cfg()).unwrap());
    }

    #[test]
    fn work_cap_is_an_error() {
        let m = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 4, false));
        let f = parse_core("ForAll x, ForAll y, ForAll z, x <= x").unwrap();
        let tight = EvalConfig { max_work: 1000, parallel: false, ..EvalConfig::default() };
        match eval_naive(&m, &f, &Binding::new(), &tight) {
            Err(FoilError::WorkCapExceeded { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unbound_free_variable_is_an_error() {
        let m = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 2, true));
        let f = parse_core("P(x)").unwrap();
        match eval_naive(&m, &f, &Binding::new(), &cfg()) {
            Err(FoilError::UnboundVariable(v)) => assert_eq!(v, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binding_resolves_free_variables() {
        let m = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 2, true));
        let f = parse_core("Exists y, x <= y ^ P(y)").unwrap();
        let mut b = Binding::new();
        b.insert("x".into(), PartialInstance::parse("(1,?)").unwrap());
        assert!(eval_naive(&m, &f, &b, &cfg()).unwrap());
    }

    #[test]
    fn monotone_in_pos() {
        // Adding positive instances never flips Exists x, P(x) true -> false.
        let f = parse_core("Exists x, P(x)").unwrap();
        let none = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 2, false));
        let all = Model::Diagram(DecisionDiagram::constant(DiagramKind::Dt, 2, true));
        let before = eval_naive(&none, &f, &Binding::new(), &cfg()).unwrap();
        let after = eval_naive(&all, &f, &Binding::new(), &cfg()).unwrap();
        assert!(!before && after);
    }

    #[test]
    fn parallel_agrees_with_sequential() {
        let m = Model::Perceptron(Perceptron::new(vec![1.0, -1.0, 0.5, 1.0, -0.5, 1.0], 1.5));
        let f = parse_core("Exists x, P(x) ^ ~(x <= (1,1,1,1,1,1))").unwrap();
        let seq = eval_naive(&m, &f, &Binding::new(), &cfg()).unwrap();
        let par = eval_naive(
            &m,
            &f,
            &Binding::new(),
            &EvalConfig { parallel: true, ..EvalConfig::default() },
        )
        .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn allneg_collapse_to_full_completions() {
        // AllNeg over all partial supersets equals "no positive full
        // completion" because Pos never holds on non-full instances.
        let m = Model::Perceptron(Perceptron::new(vec![1.0, 1.0], 2.0));
        let collapsed = parse_core("ALLNEG(x)").unwrap();
        // Literal form quantifying over all supersets.
        let literal = parse_core("ForAll y, ~(x <= y) V ~P(y)").unwrap();
        for e in PartialInstance::enumerate_all(2) {
            let mut b = Binding::new();
            b.insert("x".into(), e.clone());
            assert_eq!(
                eval_naive(&m, &collapsed, &b, &cfg()).unwrap(),
                eval_naive(&m, &literal, &b, &cfg()).unwrap(),
                "at {e}"
            );
        }
    }
}
