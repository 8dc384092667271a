//! Abstract syntax for the query language.

use crate::instance::PartialInstance;
use std::collections::BTreeSet;
use std::fmt;

/// A term: a variable or a partial-instance constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(PartialInstance),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }
}

/// Named macros of the surface syntax. `FULL`, `ALLPOS` and `ALLNEG` parse
/// directly to the extended atoms instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MacroKind {
    Sr,
    Msr,
    Match,
    BiasedDecision,
    BiasedModel,
    Adj,
    Diff,
    Stable,
    PartialAllPos,
    PartialAllNeg,
}

impl MacroKind {
    pub fn name(self) -> &'static str {
        match self {
            MacroKind::Sr => "SR",
            MacroKind::Msr => "MSR",
            MacroKind::Match => "MATCH",
            MacroKind::BiasedDecision => "BIASEDDECISION",
            MacroKind::BiasedModel => "BIASEDMODEL",
            MacroKind::Adj => "ADJ",
            MacroKind::Diff => "DIFF",
            MacroKind::Stable => "STABLE",
            MacroKind::PartialAllPos => "PARTIALALLPOS",
            MacroKind::PartialAllNeg => "PARTIALALLNEG",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            MacroKind::Sr | MacroKind::Msr | MacroKind::Adj | MacroKind::Diff => 2,
            MacroKind::Match => 4,
            MacroKind::BiasedDecision => 3,
            MacroKind::BiasedModel => 2,
            MacroKind::Stable => 1,
            MacroKind::PartialAllPos | MacroKind::PartialAllNeg => 3,
        }
    }

    pub fn from_name(name: &str) -> Option<MacroKind> {
        Some(match name.to_ascii_uppercase().as_str() {
            "SR" => MacroKind::Sr,
            "MSR" => MacroKind::Msr,
            "MATCH" => MacroKind::Match,
            "BIASEDDECISION" => MacroKind::BiasedDecision,
            "BIASEDMODEL" => MacroKind::BiasedModel,
            "ADJ" => MacroKind::Adj,
            "DIFF" => MacroKind::Diff,
            "STABLE" => MacroKind::Stable,
            "PARTIALALLPOS" => MacroKind::PartialAllPos,
            "PARTIALALLNEG" => MacroKind::PartialAllNeg,
            _ => return None,
        })
    }
}

/// A formula over the vocabulary {Pos, ⊆, =} with the extended unary atoms
/// Full/AllPos/AllNeg and named macros awaiting expansion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Pos(Term),
    Subsumed(Term, Term),
    Eq(Term, Term),
    FullAtom(Term),
    AllPosAtom(Term),
    AllNegAtom(Term),
    Macro(MacroKind, Vec<Term>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(x: &str, f: Formula) -> Formula {
        Formula::Exists(x.to_string(), Box::new(f))
    }

    pub fn forall(x: &str, f: Formula) -> Formula {
        Formula::Forall(x.to_string(), Box::new(f))
    }

    /// `a -> b` as `~a V b`.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(Formula::not(a), b)
    }

    /// `a <-> b` as `(~a V b) ^ (~b V a)`.
    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::and(
            Formula::or(Formula::not(a.clone()), b.clone()),
            Formula::or(Formula::not(b), a),
        )
    }

    /// Conjunction of a nonempty list.
    pub fn and_all(mut fs: Vec<Formula>) -> Formula {
        let mut acc = fs.pop().expect("nonempty");
        while let Some(f) = fs.pop() {
            acc = Formula::and(f, acc);
        }
        acc
    }

    pub fn for_each_term(&self, f: &mut impl FnMut(&Term)) {
        match self {
            Formula::Pos(t) | Formula::FullAtom(t) | Formula::AllPosAtom(t) | Formula::AllNegAtom(t) => {
                f(t)
            }
            Formula::Subsumed(a, b) | Formula::Eq(a, b) => {
                f(a);
                f(b);
            }
            Formula::Macro(_, args) => args.iter().for_each(|t| f(t)),
            Formula::Not(g) => g.for_each_term(f),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.for_each_term(f);
                b.for_each_term(f);
            }
            Formula::Exists(_, g) | Formula::Forall(_, g) => g.for_each_term(f),
        }
    }

    /// All variable names occurring anywhere (free, bound or binding).
    pub fn all_names(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        self.collect_names(&mut names);
        names
    }

    fn collect_names(&self, names: &mut BTreeSet<String>) {
        match self {
            Formula::Exists(x, g) | Formula::Forall(x, g) => {
                names.insert(x.clone());
                g.collect_names(names);
            }
            Formula::Not(g) => g.collect_names(names),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_names(names);
                b.collect_names(names);
            }
            _ => self.for_each_term(&mut |t| {
                if let Term::Var(v) = t {
                    names.insert(v.clone());
                }
            }),
        }
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        self.free_vars_rec(&mut bound, &mut out);
        out
    }

    fn free_vars_rec(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match self {
            Formula::Exists(x, g) | Formula::Forall(x, g) => {
                bound.push(x.clone());
                g.free_vars_rec(bound, out);
                bound.pop();
            }
            Formula::Not(g) => g.free_vars_rec(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.free_vars_rec(bound, out);
                b.free_vars_rec(bound, out);
            }
            _ => self.for_each_term(&mut |t| {
                if let Term::Var(v) = t {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }),
        }
    }

    /// The common dimension of all constants, if any constant occurs.
    pub fn const_dim(&self) -> Option<usize> {
        let mut dim = None;
        self.for_each_term(&mut |t| {
            if let Term::Const(c) = t {
                dim.get_or_insert(c.dim());
            }
        });
        dim
    }

    /// Replace free occurrences of variables by constants.
    pub fn substitute(&self, map: &std::collections::HashMap<String, PartialInstance>) -> Formula {
        let sub_term = |t: &Term| match t {
            Term::Var(v) => match map.get(v) {
                Some(c) => Term::Const(c.clone()),
                None => t.clone(),
            },
            Term::Const(_) => t.clone(),
        };
        match self {
            Formula::Pos(t) => Formula::Pos(sub_term(t)),
            Formula::Subsumed(a, b) => Formula::Subsumed(sub_term(a), sub_term(b)),
            Formula::Eq(a, b) => Formula::Eq(sub_term(a), sub_term(b)),
            Formula::FullAtom(t) => Formula::FullAtom(sub_term(t)),
            Formula::AllPosAtom(t) => Formula::AllPosAtom(sub_term(t)),
            Formula::AllNegAtom(t) => Formula::AllNegAtom(sub_term(t)),
            Formula::Macro(k, args) => Formula::Macro(*k, args.iter().map(sub_term).collect()),
            Formula::Not(g) => Formula::not(g.substitute(map)),
            Formula::And(a, b) => Formula::and(a.substitute(map), b.substitute(map)),
            Formula::Or(a, b) => Formula::or(a.substitute(map), b.substitute(map)),
            Formula::Exists(x, g) => {
                let mut inner = map.clone();
                inner.remove(x);
                Formula::Exists(x.clone(), Box::new(g.substitute(&inner)))
            }
            Formula::Forall(x, g) => {
                let mut inner = map.clone();
                inner.remove(x);
                Formula::Forall(x.clone(), Box::new(g.substitute(&inner)))
            }
        }
    }
}

/// Syntactic fragments, from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentTag {
    ExistsFoil,
    ForallFoil,
    ExistsFoilPlus,
    ForallFoilPlus,
    GeneralFoil,
}

/// An assignment of partial instances to free variables.
pub type Binding = std::collections::HashMap<String, PartialInstance>;

// ---- printing ---------------------------------------------------------

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// Precedence levels for printing: quantifiers lowest, then V, ^, ~, atoms.
fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Exists(..) | Formula::Forall(..) => 0,
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        Formula::Not(..) => 3,
        _ => 4,
    }
}

fn write_prec(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(f);
    let parens = p < min;
    if parens {
        write!(out, "(")?;
    }
    match f {
        Formula::Pos(t) => write!(out, "P({t})")?,
        Formula::Subsumed(a, b) => write!(out, "{a} <= {b}")?,
        Formula::Eq(a, b) => write!(out, "{a} = {b}")?,
        Formula::FullAtom(t) => write!(out, "FULL({t})")?,
        Formula::AllPosAtom(t) => write!(out, "ALLPOS({t})")?,
        Formula::AllNegAtom(t) => write!(out, "ALLNEG({t})")?,
        Formula::Macro(k, args) => {
            write!(out, "{}(", k.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(out, ", ")?;
                }
                write!(out, "{a}")?;
            }
            write!(out, ")")?;
        }
        Formula::Not(g) => {
            write!(out, "~")?;
            // Binary atoms read badly unparenthesized after `~`.
            let needs = matches!(**g, Formula::Subsumed(..) | Formula::Eq(..));
            write_prec(g, if needs { 5 } else { 3 }, out)?;
        }
        Formula::And(a, b) => {
            // Connectives parse right-associatively; nested same-level
            // connectives on the right are parenthesized so the printed
            // form reparses to the identical tree.
            write_prec(a, 3, out)?;
            write!(out, " ^ ")?;
            if matches!(**b, Formula::Exists(..) | Formula::Forall(..)) {
                write_prec(b, 0, out)?;
            } else {
                write_prec(b, 3, out)?;
            }
        }
        Formula::Or(a, b) => {
            write_prec(a, 2, out)?;
            write!(out, " V ")?;
            if matches!(**b, Formula::Exists(..) | Formula::Forall(..)) {
                write_prec(b, 0, out)?;
            } else {
                write_prec(b, 2, out)?;
            }
        }
        Formula::Exists(x, g) => {
            write!(out, "Exists {x}, ")?;
            write_prec(g, 0, out)?;
        }
        Formula::Forall(x, g) => {
            write!(out, "ForAll {x}, ")?;
            write_prec(g, 0, out)?;
        }
    }
    if parens {
        write!(out, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, f)
    }
}
