//! Underspecified semantics for a small English fragment: expressions
//! denote *sets* of senses over finite situation models, scope readings
//! are enumerated with Cooper storage, and discourse interpretation is
//! a closure-free default theory whose multiple extensions model
//! perceived ambiguity.

pub mod cooper;
pub mod defaults;
pub mod expr;
pub mod grammar;
pub mod model;
pub mod sexpr;

pub use cooper::{
    combine, cooper_value, discharge, readings, sentence_sequences, storeaway, tapply, Cat,
    CooperError, Sequence, StoreSet,
};
pub use defaults::{
    anchor_param, apply_rule, check_cdi, extensions, is_anti_random, load_rules, match_trigger,
    perceived_ambiguity, rules_from_json, AnchorOutcome, AntiRandomPolicy, Binding, DiPrinciple,
    EngineConfig, EngineError, Extension, RulesError, Theory, TraceStep, TriggerMatch,
};
pub use expr::{
    alpha_eq, alpha_normalize, beta_reduce, conjuncts, desugar_quant, is_h_ambiguous,
    resugar_quant, substitute, type_of, Det, Expr, LfCat, SemType, TypeError, Wff,
};
pub use grammar::{
    leaf_categories, parse, sentence_wff, tokenize, GrammarError, GrammarRule, LexEntry, Lexicon,
};
pub use model::{
    dedup_by_denotation, denotation_eq, denote, enumerate_domain, is_consistent, truth_values,
    Assignment, Denotation, DiscourseSituation, EvalError, Model, ModelError, Sense, Situation,
    TruthValue, Value,
};
pub use sexpr::{
    canonical_key, infer_signature, parse_expr, parse_expr_expecting, print_expr, ParseError,
    Signature,
};
