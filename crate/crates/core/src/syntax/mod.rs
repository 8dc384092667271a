//! Query language: abstract syntax, concrete syntax, macros and normal forms.

mod ast;
mod macros;
mod parse;
mod transform;

pub use ast::{Binding, Formula, FragmentTag, MacroKind, Term};
pub use macros::{expand_macros, expand_macros_to, psi_surface, psi_two_alternations, Target};
pub use parse::parse_core;
pub use transform::{
    fragment_of, negate, negate_dual, prenex_blocks, rewrite_eq, to_prenex, PrenexForm, Quantifier,
};
