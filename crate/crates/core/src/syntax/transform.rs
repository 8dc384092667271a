//! Fragment classification, dualization and prenexing.

use crate::error::{FoilError, Result};
use crate::syntax::ast::{Formula, FragmentTag, Term};
use std::collections::HashMap;

#[derive(Default)]
struct Scan {
    has_exists: bool,
    has_forall: bool,
    exists_neg: bool,
    forall_neg: bool,
    extended: bool,
    macros: bool,
}

fn scan(f: &Formula, positive: bool, acc: &mut Scan) {
    match f {
        Formula::Pos(_) | Formula::Subsumed(..) | Formula::Eq(..) => {}
        Formula::FullAtom(_) | Formula::AllPosAtom(_) | Formula::AllNegAtom(_) => {
            acc.extended = true;
        }
        Formula::Macro(..) => acc.macros = true,
        Formula::Not(g) => scan(g, !positive, acc),
        Formula::And(a, b) | Formula::Or(a, b) => {
            scan(a, positive, acc);
            scan(b, positive, acc);
        }
        Formula::Exists(_, g) => {
            acc.has_exists = true;
            if !positive {
                acc.exists_neg = true;
            }
            scan(g, positive, acc);
        }
        Formula::Forall(_, g) => {
            acc.has_forall = true;
            if !positive {
                acc.forall_neg = true;
            }
            scan(g, positive, acc);
        }
    }
}

/// The tightest syntactic fragment containing `f`. Macros must be expanded
/// first; a formula with macro nodes is reported as general.
pub fn fragment_of(f: &Formula) -> FragmentTag {
    let mut acc = Scan::default();
    scan(f, true, &mut acc);
    if acc.macros {
        return FragmentTag::GeneralFoil;
    }
    let existsy = !acc.has_forall && !acc.exists_neg;
    let forally = !acc.has_exists && !acc.forall_neg;
    match (existsy, forally, acc.extended) {
        (true, _, false) => FragmentTag::ExistsFoil,
        (_, true, false) => FragmentTag::ForallFoil,
        (true, _, true) => FragmentTag::ExistsFoilPlus,
        (_, true, true) => FragmentTag::ForallFoilPlus,
        _ => FragmentTag::GeneralFoil,
    }
}

/// For `f` in a universal fragment, a formula in the dual existential
/// fragment equivalent to `¬f` (negation pushed to the atoms).
pub fn negate_dual(f: &Formula) -> Result<Formula> {
    match fragment_of(f) {
        FragmentTag::ForallFoil | FragmentTag::ForallFoilPlus => Ok(negate(f)),
        other => Err(FoilError::Unsupported(format!(
            "negate_dual expects a universal-fragment formula, got {other:?}"
        ))),
    }
}

/// Push a negation through `f`, eliminating double negations.
pub fn negate(f: &Formula) -> Formula {
    match f {
        Formula::Not(g) => (**g).clone(),
        Formula::And(a, b) => Formula::or(negate(a), negate(b)),
        Formula::Or(a, b) => Formula::and(negate(a), negate(b)),
        Formula::Exists(x, g) => Formula::Forall(x.clone(), Box::new(negate(g))),
        Formula::Forall(x, g) => Formula::Exists(x.clone(), Box::new(negate(g))),
        atom => Formula::not(atom.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    Forall,
}

/// A quantifier prefix plus quantifier-free matrix.
#[derive(Debug, Clone)]
pub struct PrenexForm {
    pub prefix: Vec<(Quantifier, String)>,
    pub matrix: Formula,
}

impl PrenexForm {
    pub fn into_formula(self) -> Formula {
        let mut f = self.matrix;
        for (q, x) in self.prefix.into_iter().rev() {
            f = match q {
                Quantifier::Exists => Formula::Exists(x, Box::new(f)),
                Quantifier::Forall => Formula::Forall(x, Box::new(f)),
            };
        }
        f
    }

    /// Consecutive same-polarity quantifiers grouped into blocks.
    pub fn blocks(&self) -> Vec<(Quantifier, Vec<String>)> {
        let mut out: Vec<(Quantifier, Vec<String>)> = Vec::new();
        for (q, x) in &self.prefix {
            match out.last_mut() {
                Some((lq, names)) if lq == q => names.push(x.clone()),
                _ => out.push((*q, vec![x.clone()])),
            }
        }
        out
    }
}

fn freshen(
    f: &Formula,
    renaming: &HashMap<String, String>,
    used: &mut std::collections::BTreeSet<String>,
) -> Formula {
    let ren_term = |t: &Term| match t {
        Term::Var(v) => Term::Var(renaming.get(v).cloned().unwrap_or_else(|| v.clone())),
        c => c.clone(),
    };
    match f {
        Formula::Pos(t) => Formula::Pos(ren_term(t)),
        Formula::Subsumed(a, b) => Formula::Subsumed(ren_term(a), ren_term(b)),
        Formula::Eq(a, b) => Formula::Eq(ren_term(a), ren_term(b)),
        Formula::FullAtom(t) => Formula::FullAtom(ren_term(t)),
        Formula::AllPosAtom(t) => Formula::AllPosAtom(ren_term(t)),
        Formula::AllNegAtom(t) => Formula::AllNegAtom(ren_term(t)),
        Formula::Macro(k, args) => Formula::Macro(*k, args.iter().map(ren_term).collect()),
        Formula::Not(g) => Formula::not(freshen(g, renaming, used)),
        Formula::And(a, b) => Formula::and(freshen(a, renaming, used), freshen(b, renaming, used)),
        Formula::Or(a, b) => Formula::or(freshen(a, renaming, used), freshen(b, renaming, used)),
        Formula::Exists(x, g) | Formula::Forall(x, g) => {
            let mut name = x.clone();
            if !used.insert(name.clone()) {
                let mut i = 0usize;
                loop {
                    let candidate = format!("{x}_{i}");
                    i += 1;
                    if used.insert(candidate.clone()) {
                        name = candidate;
                        break;
                    }
                }
            }
            let mut inner = renaming.clone();
            inner.insert(x.clone(), name.clone());
            let body = freshen(g, &inner, used);
            match f {
                Formula::Exists(..) => Formula::Exists(name, Box::new(body)),
                _ => Formula::Forall(name, Box::new(body)),
            }
        }
    }
}

fn pull(f: &Formula) -> PrenexForm {
    match f {
        Formula::Not(g) => {
            let inner = pull(g);
            PrenexForm {
                prefix: inner
                    .prefix
                    .into_iter()
                    .map(|(q, x)| {
                        let q = match q {
                            Quantifier::Exists => Quantifier::Forall,
                            Quantifier::Forall => Quantifier::Exists,
                        };
                        (q, x)
                    })
                    .collect(),
                matrix: negate(&inner.matrix),
            }
        }
        Formula::And(a, b) | Formula::Or(a, b) => {
            let left = pull(a);
            let right = pull(b);
            let mut prefix = left.prefix;
            prefix.extend(right.prefix);
            let matrix = match f {
                Formula::And(..) => Formula::and(left.matrix, right.matrix),
                _ => Formula::or(left.matrix, right.matrix),
            };
            PrenexForm { prefix, matrix }
        }
        Formula::Exists(x, g) => {
            let mut inner = pull(g);
            inner.prefix.insert(0, (Quantifier::Exists, x.clone()));
            inner
        }
        Formula::Forall(x, g) => {
            let mut inner = pull(g);
            inner.prefix.insert(0, (Quantifier::Forall, x.clone()));
            inner
        }
        atom => PrenexForm { prefix: vec![], matrix: atom.clone() },
    }
}

/// Prenex `f` after renaming bound variables apart. Core formulas only
/// (macros must be expanded). Equality atoms in the matrix are left intact;
/// see [`to_prenex`] for the strict form the width pipeline consumes.
pub fn prenex_blocks(f: &Formula) -> PrenexForm {
    // Bound names must be pairwise distinct and distinct from the free
    // variables; names that already are stay untouched.
    let mut used: std::collections::BTreeSet<String> = f.free_vars().into_iter().collect();
    let fresh = freshen(f, &HashMap::new(), &mut used);
    pull(&fresh)
}

/// Rewrite equality atoms to double containment.
pub fn rewrite_eq(f: &Formula) -> Formula {
    match f {
        Formula::Eq(a, b) => Formula::and(
            Formula::Subsumed(a.clone(), b.clone()),
            Formula::Subsumed(b.clone(), a.clone()),
        ),
        Formula::Not(g) => Formula::not(rewrite_eq(g)),
        Formula::And(a, b) => Formula::and(rewrite_eq(a), rewrite_eq(b)),
        Formula::Or(a, b) => Formula::or(rewrite_eq(a), rewrite_eq(b)),
        Formula::Exists(x, g) => Formula::Exists(x.clone(), Box::new(rewrite_eq(g))),
        Formula::Forall(x, g) => Formula::Forall(x.clone(), Box::new(rewrite_eq(g))),
        other => other.clone(),
    }
}

/// Prenex normal form with a strictly alternating prefix that starts with an
/// existential block, padding with dummy variables where needed; matrix
/// equality atoms are rewritten to double containment.
pub fn to_prenex(f: &Formula) -> Formula {
    let mut form = prenex_blocks(f);
    form.matrix = rewrite_eq(&form.matrix);
    if form.prefix.is_empty() {
        return form.matrix;
    }
    let mut used = f.all_names();
    let fresh_dummy = |used: &mut std::collections::BTreeSet<String>| {
        let mut i = 0usize;
        loop {
            let name = format!("_d{i}");
            i += 1;
            if used.insert(name.clone()) {
                return name;
            }
        }
    };
    let mut prefix: Vec<(Quantifier, String)> = Vec::new();
    for (q, x) in form.prefix {
        match prefix.last() {
            None => {
                if q == Quantifier::Forall {
                    prefix.push((Quantifier::Exists, fresh_dummy(&mut used)));
                }
            }
            Some((lq, _)) if *lq == q => {
                let other = match q {
                    Quantifier::Exists => Quantifier::Forall,
                    Quantifier::Forall => Quantifier::Exists,
                };
                prefix.push((other, fresh_dummy(&mut used)));
            }
            _ => {}
        }
        prefix.push((q, x));
    }
    PrenexForm { prefix, matrix: form.matrix }.into_formula()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::macros::{expand_macros, expand_macros_to, psi_two_alternations, Target};
    use crate::syntax::parse::parse_core;

    #[test]
    fn fragment_examples() {
        let f = parse_core("Exists x, P(x)").unwrap();
        assert_eq!(fragment_of(&f), FragmentTag::ExistsFoil);

        let msr = expand_macros_to(&parse_core("MSR((1,0), (1,?))").unwrap(), Target::Extended);
        assert_eq!(fragment_of(&msr), FragmentTag::ForallFoilPlus);

        let psi = expand_macros(&psi_two_alternations("x"));
        assert_eq!(fragment_of(&psi), FragmentTag::GeneralFoil);
    }

    #[test]
    fn negated_universal_is_not_universal_fragment() {
        // A ∀ occurrence disqualifies ExistsFOIL even under negation.
        let f = parse_core("~(ForAll x, P(x))").unwrap();
        assert_eq!(fragment_of(&f), FragmentTag::GeneralFoil);
    }

    #[test]
    fn negate_dual_examples() {
        let f = parse_core("ForAll x, P(x)").unwrap();
        let g = negate_dual(&f).unwrap();
        assert_eq!(g, parse_core("Exists x, ~P(x)").unwrap());
        assert_eq!(fragment_of(&g), FragmentTag::ExistsFoil);

        // Double application is the identity on negation-normal inputs.
        let back = negate_dual(&negate(&g)).ok();
        assert!(back.is_none() || back == Some(g.clone()));
        let h = negate(&negate(&g));
        assert_eq!(h, g);

        assert!(negate_dual(&parse_core("Exists x, P(x)").unwrap()).is_err());
    }

    #[test]
    fn dual_fragments_correspond() {
        let sr = expand_macros_to(&parse_core("SR((1,0), (1,?))").unwrap(), Target::Extended);
        assert_eq!(fragment_of(&sr), FragmentTag::ForallFoilPlus);
        let neg = negate_dual(&sr).unwrap();
        assert_eq!(fragment_of(&neg), FragmentTag::ExistsFoilPlus);
    }

    #[test]
    fn prenex_leaves_single_block_alone() {
        let f = parse_core("Exists x, P(x)").unwrap();
        assert_eq!(to_prenex(&f), f);
    }

    #[test]
    fn prenex_pushes_negation() {
        let f = parse_core("~(ForAll x, P(x))").unwrap();
        assert_eq!(to_prenex(&f), parse_core("Exists x, ~P(x)").unwrap());
    }

    #[test]
    fn prenex_alternates_strictly_and_starts_existential() {
        let f = expand_macros(&psi_two_alternations("x"));
        let p = to_prenex(&f);
        let mut quants = Vec::new();
        let mut g = &p;
        loop {
            match g {
                Formula::Exists(_, b) => {
                    quants.push(Quantifier::Exists);
                    g = b;
                }
                Formula::Forall(_, b) => {
                    quants.push(Quantifier::Forall);
                    g = b;
                }
                _ => break,
            }
        }
        assert_eq!(quants.first(), Some(&Quantifier::Exists));
        for w in quants.windows(2) {
            assert_ne!(w[0], w[1], "prefix not strictly alternating: {quants:?}");
        }
        // Matrix is quantifier-free and equality-free.
        fn check_matrix(f: &Formula) {
            match f {
                Formula::Exists(..) | Formula::Forall(..) => panic!("quantifier in matrix"),
                Formula::Eq(..) => panic!("equality left in matrix"),
                Formula::Not(g) => check_matrix(g),
                Formula::And(a, b) | Formula::Or(a, b) => {
                    check_matrix(a);
                    check_matrix(b);
                }
                _ => {}
            }
        }
        check_matrix(g);
    }
}
