//! Evaluation engines: the exhaustive oracle, the existential-fragment
//! engine and the width-bounded full-logic engine.

pub mod exists;
pub mod naive;
pub mod width;

pub use exists::{
    det_all_neg_perceptron, det_all_pos_perceptron, determinize_dag, enumerate_guesses,
    eval_exists_auto, eval_exists_fbdd, eval_exists_fbdd_with_search, eval_exists_plus,
    guess_witnesses, model_all_neg, model_all_pos, pap_triple_from_dap, reduce_pan_to_dan,
    reduce_pap_to_dap, CompletionSearch, ContainmentGuess, DetOracle, FactSet, GuessDag,
    PapReduction, TypeAssignment, VarType,
};
pub use naive::{eval_naive, EvalConfig};
pub use width::{
    bdd_to_tdd, compile_matrix, complete_diagram, containment_gadget, diagram_to_tdd,
    eval_full_foil, full_gadget, lift_model, tdd_apply, tdd_negate, tdd_project, tdd_to_diagram,
    InterleavedOrder, ProjectMode, Tdd, TddNode, TddOp, WidthStats,
};
