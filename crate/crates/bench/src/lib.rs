//! Benchmark helpers: fixtures shared by the criterion benches.

use std::collections::BTreeSet;

use ambigua_core::defaults::{AntiRandomPolicy, EngineConfig, Theory};
use ambigua_core::{grammar, Expr, Lexicon, Model, Signature};

pub fn lexicon() -> Lexicon {
    Lexicon::frog_fragment(&Signature::frog_fragment())
}

pub fn parse_one(sentence: &str, lexicon: &Lexicon) -> Expr {
    let trees = grammar::parse(&grammar::tokenize(sentence), lexicon).expect("parse");
    trees.into_iter().next().expect("one parse")
}

pub fn croak_model() -> Model {
    Model::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/model-frog.json"
    ))
    .expect("model")
}

pub fn two_rule_theory() -> (Theory, EngineConfig) {
    let sig = Signature::frog_fragment();
    let rules = ambigua_core::rules_from_json(
        include_str!("../../../data/rules-croak2.json"),
        &sig,
    )
    .expect("rules");
    let uf: BTreeSet<Expr> = [
        "(and (croak_U k) (frog k))",
        "(human-like k)",
    ]
    .iter()
    .map(|s| {
        ambigua_core::parse_expr_expecting(s, &sig, Some(&ambigua_core::SemType::T)).unwrap()
    })
    .collect();
    let model = croak_model();
    let theory = Theory {
        rules,
        uf,
        discourse: model.discourse.clone(),
        model,
    };
    let config = EngineConfig {
        anti_random: AntiRandomPolicy::Warn,
        ..EngineConfig::default()
    };
    (theory, config)
}
