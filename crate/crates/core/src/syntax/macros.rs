//! Expansion of the named predicate macros into the core vocabulary
//! {Pos, ⊆, =} or into the extended one keeping Full/AllPos/AllNeg atoms.

use crate::syntax::ast::{Formula, MacroKind, Term};
use std::collections::BTreeSet;

/// Expansion target: `Core` rewrites everything down to {Pos, ⊆, =};
/// `Extended` keeps Full/AllPos/AllNeg as atoms, which the existential-plus
/// evaluator consumes directly; `Gadget` keeps only Full, the one atom the
/// width engine implements as a diagram gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Core,
    Extended,
    Gadget,
}

struct Fresh {
    used: BTreeSet<String>,
    counter: usize,
}

impl Fresh {
    fn new(f: &Formula) -> Fresh {
        Fresh { used: f.all_names(), counter: 0 }
    }

    fn next(&mut self, hint: &str) -> String {
        loop {
            let name = format!("{hint}{}", self.counter);
            self.counter += 1;
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// Rewrite all macros (and, for `Target::Core`, the extended atoms) into
/// plain formulas, inventing bound-variable names that avoid capture.
pub fn expand_macros_to(f: &Formula, target: Target) -> Formula {
    let mut fresh = Fresh::new(f);
    expand(f, target, &mut fresh)
}

/// Expansion into the core vocabulary {Pos, ⊆, =}.
pub fn expand_macros(f: &Formula) -> Formula {
    expand_macros_to(f, Target::Core)
}

fn expand(f: &Formula, target: Target, fresh: &mut Fresh) -> Formula {
    match f {
        Formula::Pos(_) | Formula::Subsumed(..) | Formula::Eq(..) => f.clone(),
        Formula::FullAtom(t) => match target {
            Target::Extended | Target::Gadget => f.clone(),
            Target::Core => {
                // Full(x) = ForAll y, ~(x <= y) V x = y
                let y = fresh.next("_f");
                Formula::forall(
                    &y,
                    Formula::or(
                        Formula::not(Formula::Subsumed(t.clone(), Term::var(&y))),
                        Formula::Eq(t.clone(), Term::var(&y)),
                    ),
                )
            }
        },
        Formula::AllPosAtom(t) => match target {
            Target::Extended => f.clone(),
            Target::Core | Target::Gadget => {
                // AllPos(x) = ForAll y, (x <= y ^ Full(y)) -> P(y)
                let y = fresh.next("_p");
                let body = Formula::implies(
                    Formula::and(
                        Formula::Subsumed(t.clone(), Term::var(&y)),
                        expand(&Formula::FullAtom(Term::var(&y)), target, fresh),
                    ),
                    Formula::Pos(Term::var(&y)),
                );
                Formula::forall(&y, body)
            }
        },
        Formula::AllNegAtom(t) => match target {
            Target::Extended => f.clone(),
            Target::Core | Target::Gadget => {
                // AllNeg(x) = ForAll y, x <= y -> ~P(y)
                let y = fresh.next("_n");
                Formula::forall(
                    &y,
                    Formula::implies(
                        Formula::Subsumed(t.clone(), Term::var(&y)),
                        Formula::not(Formula::Pos(Term::var(&y))),
                    ),
                )
            }
        },
        Formula::Macro(kind, args) => {
            let def = definition(*kind, args, fresh);
            expand(&def, target, fresh)
        }
        Formula::Not(g) => Formula::not(expand(g, target, fresh)),
        Formula::And(a, b) => Formula::and(expand(a, target, fresh), expand(b, target, fresh)),
        Formula::Or(a, b) => Formula::or(expand(a, target, fresh), expand(b, target, fresh)),
        Formula::Exists(x, g) => Formula::Exists(x.clone(), Box::new(expand(g, target, fresh))),
        Formula::Forall(x, g) => Formula::Forall(x.clone(), Box::new(expand(g, target, fresh))),
    }
}

/// `x ⊂ y`: strictly subsumed.
fn strict(x: &Term, y: &Term) -> Formula {
    Formula::and(
        Formula::Subsumed(x.clone(), y.clone()),
        Formula::not(Formula::Eq(x.clone(), y.clone())),
    )
}

/// One level of definition for a macro; nested macros/atoms remain for the
/// caller to keep expanding.
fn definition(kind: MacroKind, args: &[Term], fresh: &mut Fresh) -> Formula {
    let a = |i: usize| args[i].clone();
    match kind {
        // SR(x,y) = Full(x) ^ y <= x ^ ForAll z, (y <= z ^ Full(z)) -> (P(x) <-> P(z))
        MacroKind::Sr => {
            let z = fresh.next("_z");
            Formula::and_all(vec![
                Formula::FullAtom(a(0)),
                Formula::Subsumed(a(1), a(0)),
                Formula::forall(
                    &z,
                    Formula::implies(
                        Formula::and(
                            Formula::Subsumed(a(1), Term::var(&z)),
                            Formula::FullAtom(Term::var(&z)),
                        ),
                        Formula::iff(Formula::Pos(a(0)), Formula::Pos(Term::var(&z))),
                    ),
                ),
            ])
        }
        // mSR(x,y) = SR(x,y) ^ ForAll u, (u <= y ^ u != y ^ P(x)) -> ~AllPos(u)
        //                    ^ ForAll v, (v <= y ^ v != y ^ ~P(x)) -> ~AllNeg(v)
        MacroKind::Msr => {
            let u = fresh.next("_u");
            let v = fresh.next("_v");
            Formula::and_all(vec![
                Formula::Macro(MacroKind::Sr, vec![a(0), a(1)]),
                Formula::forall(
                    &u,
                    Formula::implies(
                        Formula::and_all(vec![
                            Formula::Subsumed(Term::var(&u), a(1)),
                            Formula::not(Formula::Eq(Term::var(&u), a(1))),
                            Formula::Pos(a(0)),
                        ]),
                        Formula::not(Formula::AllPosAtom(Term::var(&u))),
                    ),
                ),
                Formula::forall(
                    &v,
                    Formula::implies(
                        Formula::and_all(vec![
                            Formula::Subsumed(Term::var(&v), a(1)),
                            Formula::not(Formula::Eq(Term::var(&v), a(1))),
                            Formula::not(Formula::Pos(a(0))),
                        ]),
                        Formula::not(Formula::AllNegAtom(Term::var(&v))),
                    ),
                ),
            ])
        }
        // Match(x,y,u,v) = ForAll z, (z <= u V z <= v) -> (z <= x <-> z <= y)
        MacroKind::Match => {
            let z = fresh.next("_m");
            let zv = Term::var(&z);
            Formula::forall(
                &z,
                Formula::implies(
                    Formula::or(
                        Formula::Subsumed(zv.clone(), a(2)),
                        Formula::Subsumed(zv.clone(), a(3)),
                    ),
                    Formula::iff(
                        Formula::Subsumed(zv.clone(), a(0)),
                        Formula::Subsumed(zv, a(1)),
                    ),
                ),
            )
        }
        // BiasedDecision(x,u,v) = Full(x) ^ Exists y, Full(y) ^ Match(x,y,u,v)
        //                                            ^ (P(x) <-> ~P(y))
        MacroKind::BiasedDecision => {
            let y = fresh.next("_b");
            let yv = Term::var(&y);
            Formula::and(
                Formula::FullAtom(a(0)),
                Formula::exists(
                    &y,
                    Formula::and_all(vec![
                        Formula::FullAtom(yv.clone()),
                        Formula::Macro(MacroKind::Match, vec![a(0), yv.clone(), a(1), a(2)]),
                        Formula::iff(Formula::Pos(a(0)), Formula::not(Formula::Pos(yv))),
                    ]),
                ),
            )
        }
        // BiasedModel(u,v) = Exists x, BiasedDecision(x,u,v)
        MacroKind::BiasedModel => {
            let x = fresh.next("_x");
            Formula::exists(
                &x,
                Formula::Macro(MacroKind::BiasedDecision, vec![Term::var(&x), a(0), a(1)]),
            )
        }
        // Adj(x,y) = x ⊂ y ^ ~Exists z, (x ⊂ z ^ z ⊂ y)
        MacroKind::Adj => {
            let z = fresh.next("_j");
            let zv = Term::var(&z);
            Formula::and(
                strict(&args[0], &args[1]),
                Formula::not(Formula::exists(
                    &z,
                    Formula::and(strict(&args[0], &zv), strict(&zv, &args[1])),
                )),
            )
        }
        // Diff(x,y) = Full(x) ^ Full(y) ^ x != y ^ Exists z, Adj(z,x) ^ Adj(z,y)
        MacroKind::Diff => {
            let z = fresh.next("_d");
            let zv = Term::var(&z);
            Formula::and_all(vec![
                Formula::FullAtom(a(0)),
                Formula::FullAtom(a(1)),
                Formula::not(Formula::Eq(a(0), a(1))),
                Formula::exists(
                    &z,
                    Formula::and(
                        Formula::Macro(MacroKind::Adj, vec![zv.clone(), a(0)]),
                        Formula::Macro(MacroKind::Adj, vec![zv, a(1)]),
                    ),
                ),
            ])
        }
        // Stable(x) = ForAll y, Diff(x,y) -> (P(x) <-> P(y))
        MacroKind::Stable => {
            let y = fresh.next("_s");
            let yv = Term::var(&y);
            Formula::forall(
                &y,
                Formula::implies(
                    Formula::Macro(MacroKind::Diff, vec![a(0), yv.clone()]),
                    Formula::iff(Formula::Pos(a(0)), Formula::Pos(yv)),
                ),
            )
        }
        // PartialAllPos(x,y,z) = Exists u, x <= u ^ AllPos(u)
        //     ^ (Exists v, y <= v ^ u <= v) ^ (Exists w, z <= w ^ u <= w)
        MacroKind::PartialAllPos | MacroKind::PartialAllNeg => {
            let u = fresh.next("_q");
            let v = fresh.next("_r");
            let w = fresh.next("_w");
            let uv = Term::var(&u);
            let guard = if kind == MacroKind::PartialAllPos {
                Formula::AllPosAtom(uv.clone())
            } else {
                Formula::AllNegAtom(uv.clone())
            };
            Formula::exists(
                &u,
                Formula::and_all(vec![
                    Formula::Subsumed(a(0), uv.clone()),
                    guard,
                    Formula::exists(
                        &v,
                        Formula::and(
                            Formula::Subsumed(a(1), Term::var(&v)),
                            Formula::Subsumed(uv.clone(), Term::var(&v)),
                        ),
                    ),
                    Formula::exists(
                        &w,
                        Formula::and(
                            Formula::Subsumed(a(2), Term::var(&w)),
                            Formula::Subsumed(uv, Term::var(&w)),
                        ),
                    ),
                ]),
            )
        }
    }
}

/// The intractability witness query: a positive stable completion exists.
/// `psi_surface(x) = Exists y, x <= y ^ P(y) ^ Stable(y)`.
pub fn psi_surface(x: &str) -> Formula {
    Formula::exists(
        "y",
        Formula::and_all(vec![
            Formula::Subsumed(Term::var(x), Term::var("y")),
            Formula::Pos(Term::var("y")),
            Formula::Macro(MacroKind::Stable, vec![Term::var("y")]),
        ]),
    )
}

/// The equivalent two-alternation form of the same query:
/// `Exists y, x <= y ^ Full(y) ^ ForAll z, (z <= y ^ ~(y <= z)) ->
///    (Exists u, z <= u ^ ~(u <= z) ^ ~Full(u)) V
///    (ForAll v, (z <= v ^ ~(v <= z)) -> P(v))`.
pub fn psi_two_alternations(x: &str) -> Formula {
    let sub = |a: &str, b: &str| Formula::Subsumed(Term::var(a), Term::var(b));
    Formula::exists(
        "y",
        Formula::and_all(vec![
            Formula::Subsumed(Term::var(x), Term::var("y")),
            Formula::FullAtom(Term::var("y")),
            Formula::forall(
                "z",
                Formula::implies(
                    Formula::and(sub("z", "y"), Formula::not(sub("y", "z"))),
                    Formula::or(
                        Formula::exists(
                            "u",
                            Formula::and_all(vec![
                                sub("z", "u"),
                                Formula::not(sub("u", "z")),
                                Formula::not(Formula::FullAtom(Term::var("u"))),
                            ]),
                        ),
                        Formula::forall(
                            "v",
                            Formula::implies(
                                Formula::and(sub("z", "v"), Formula::not(sub("v", "z"))),
                                Formula::Pos(Term::var("v")),
                            ),
                        ),
                    ),
                ),
            ),
        ]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse::parse_core;

    fn has_macros(f: &Formula) -> bool {
        match f {
            Formula::Macro(..) => true,
            Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => has_macros(g),
            Formula::And(a, b) | Formula::Or(a, b) => has_macros(a) || has_macros(b),
            _ => false,
        }
    }

    fn has_extended(f: &Formula) -> bool {
        match f {
            Formula::FullAtom(_) | Formula::AllPosAtom(_) | Formula::AllNegAtom(_) => true,
            Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => has_extended(g),
            Formula::And(a, b) | Formula::Or(a, b) => has_extended(a) || has_extended(b),
            _ => false,
        }
    }

    #[test]
    fn full_expands_to_the_universal_definition() {
        let f = parse_core("FULL(x)").unwrap();
        let e = expand_macros(&f);
        assert_eq!(e.to_string(), "ForAll _f0, ~(x <= _f0) V x = _f0");
    }

    #[test]
    fn core_expansion_removes_all_macros_and_atoms() {
        for text in [
            "STABLE(x)",
            "SR(x, y)",
            "MSR(x, y)",
            "MATCH(x, y, (0,?), (1,?))",
            "BIASEDMODEL((0,?), (1,?))",
            "PARTIALALLPOS(x, y, z)",
            "ALLNEG(x) V ALLPOS(y)",
        ] {
            let f = parse_core(text).unwrap();
            let e = expand_macros(&f);
            assert!(!has_macros(&e), "{text}");
            assert!(!has_extended(&e), "{text}");
        }
    }

    #[test]
    fn extended_expansion_keeps_extended_atoms() {
        let f = parse_core("MSR(x, y)").unwrap();
        let e = expand_macros_to(&f, Target::Extended);
        assert!(!has_macros(&e));
        assert!(has_extended(&e));
    }

    #[test]
    fn stable_has_three_nested_quantifier_layers() {
        // STABLE -> ForAll y (Diff -> ...), Diff -> Exists z (Adj ^ Adj),
        // Adj -> ~Exists p (...): three layers of nesting.
        let f = parse_core("STABLE(x)").unwrap();
        let e = expand_macros(&f);
        fn depth(f: &Formula) -> usize {
            match f {
                Formula::Exists(_, g) | Formula::Forall(_, g) => 1 + depth(g),
                Formula::Not(g) => depth(g),
                Formula::And(a, b) | Formula::Or(a, b) => depth(a).max(depth(b)),
                _ => 0,
            }
        }
        assert!(depth(&e) >= 3, "depth {}", depth(&e));
    }

    #[test]
    fn match_with_constant_parameters_is_closed() {
        let f = parse_core("MATCH((1,0), (1,1), (0,?), (1,?))").unwrap();
        let e = expand_macros(&f);
        assert!(e.free_vars().is_empty());
        assert!(matches!(e, Formula::Forall(..)));
    }

    #[test]
    fn expansion_avoids_capture() {
        // The argument is named like the first fresh hint; names must not clash.
        let f = parse_core("Exists _f0, FULL(_f0)").unwrap();
        let e = expand_macros(&f);
        match e {
            Formula::Exists(x, body) => {
                assert_eq!(x, "_f0");
                match *body {
                    Formula::Forall(y, _) => assert_ne!(y, "_f0"),
                    other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
