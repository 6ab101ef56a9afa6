//! Shared test infrastructure: an independent brute-force first-order
//! evaluator (the oracle the denotation engine is checked against),
//! random model and term generators, the quantifier-prefix permutation
//! oracle for scope readings, and a brute-force extension enumerator.
//!
//! The evaluator here deliberately avoids the sense-table machinery: it
//! enumerates one interpretation choice per underspecified-constant or
//! parameter occurrence and then evaluates each situation directly from
//! the raw facts, quantifying over the universe.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use ambigua_core::expr::{
    self, app, app2, con, evar, exists, forall, lam, lf, quant, ucon, Det, Expr, SemType,
};
use ambigua_core::model::{DiscourseSituation, Model, Situation, Value};
use ambigua_core::{denote, Denotation, Lexicon, Signature};

// ---------------------------------------------------------------------------
// Independent first-order evaluator
// ---------------------------------------------------------------------------

/// One interpretation choice at an occurrence: a predicate sense name
/// for an underspecified constant, a candidate entity for a parameter.
#[derive(Debug, Clone)]
enum ChoicePoint {
    Senses(Vec<String>),
    Candidates(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Choice {
    Sense(String),
    Candidate(String),
}

fn collect_choice_points(e: &Expr, m: &Model, d: &DiscourseSituation, out: &mut Vec<ChoicePoint>) {
    match e {
        Expr::Const {
            name,
            underspecified,
            ..
        } => {
            if *underspecified {
                let senses = m
                    .predicate_senses(name)
                    .unwrap_or_else(|| vec![name.clone()]);
                out.push(ChoicePoint::Senses(senses));
            }
        }
        Expr::Param { anchor: None, .. } => {
            let candidates: Vec<String> = m.discourse_constituents(d).into_iter().collect();
            out.push(ChoicePoint::Candidates(candidates));
        }
        Expr::Param { .. } | Expr::Var { .. } | Expr::Meta(_) => {}
        Expr::App { fun, arg } => {
            collect_choice_points(fun, m, d, out);
            collect_choice_points(arg, m, d, out);
        }
        Expr::Lambda { body, .. } => collect_choice_points(body, m, d, out),
        Expr::Not(x) => collect_choice_points(x, m, d, out),
        Expr::And(a, b) | Expr::Eq(a, b) => {
            collect_choice_points(a, m, d, out);
            collect_choice_points(b, m, d, out);
        }
        Expr::Quant {
            restrictor, scope, ..
        } => {
            collect_choice_points(restrictor, m, d, out);
            collect_choice_points(scope, m, d, out);
        }
        Expr::LfNode { children, .. } => {
            for c in children {
                collect_choice_points(c, m, d, out);
            }
        }
    }
}

struct OracleEval<'a> {
    m: &'a Model,
    choices: &'a [Choice],
    cursor: usize,
}

impl<'a> OracleEval<'a> {
    fn next_choice(&mut self) -> Choice {
        let c = self.choices[self.cursor].clone();
        self.cursor += 1;
        c
    }

    fn term(&mut self, e: &Expr, env: &BTreeMap<String, String>, sit: &str) -> Option<String> {
        match e {
            Expr::Const { name, .. } => Some(
                self.m
                    .entity_of(name)
                    .unwrap_or_else(|| panic!("oracle: unknown entity constant {name}"))
                    .to_string(),
            ),
            Expr::Var { name, .. } => Some(
                env.get(name)
                    .unwrap_or_else(|| panic!("oracle: unbound variable {name}"))
                    .clone(),
            ),
            Expr::Param { anchor: None, .. } => match self.next_choice() {
                Choice::Candidate(a) => {
                    let present = self
                        .m
                        .situation(sit)
                        .map(|s| s.constituents.contains(&a))
                        .unwrap_or(false);
                    if present {
                        Some(a)
                    } else {
                        None
                    }
                }
                Choice::Sense(_) => panic!("oracle: choice kind mismatch"),
            },
            Expr::Param {
                anchor: Some(inner),
                ..
            } => {
                let a = self.term(inner, env, sit)?;
                let present = self
                    .m
                    .situation(sit)
                    .map(|s| s.constituents.contains(&a))
                    .unwrap_or(false);
                if present {
                    Some(a)
                } else {
                    None
                }
            }
            other => panic!(
                "oracle: unsupported term {}",
                ambigua_core::print_expr(other)
            ),
        }
    }

    fn formula(&mut self, e: &Expr, env: &BTreeMap<String, String>, sit: &str) -> Option<bool> {
        match e {
            Expr::App { .. } => {
                let mut spine = Vec::new();
                let mut head = e;
                while let Expr::App { fun, arg } = head {
                    spine.push(&**arg);
                    head = fun;
                }
                spine.reverse();
                let (name, underspecified) = match head {
                    Expr::Const {
                        name,
                        underspecified,
                        ..
                    } => (name.clone(), *underspecified),
                    other => panic!(
                        "oracle: non-constant predicate head {}",
                        ambigua_core::print_expr(other)
                    ),
                };
                let sense = if underspecified {
                    match self.next_choice() {
                        Choice::Sense(s) => s,
                        Choice::Candidate(_) => panic!("oracle: choice kind mismatch"),
                    }
                } else {
                    name
                };
                let mut args = Vec::new();
                let mut undefined = false;
                for a in spine {
                    match self.term(a, env, sit) {
                        Some(v) => args.push(v),
                        None => undefined = true,
                    }
                }
                if undefined {
                    return None;
                }
                Some(self.m.fact_holds(sit, &sense, &args))
            }
            Expr::Not(x) => self.formula(x, env, sit).map(|b| !b),
            Expr::And(a, b) => {
                // Strict: evaluate both sides, undefined poisons.
                let va = self.formula(a, env, sit);
                let vb = self.formula(b, env, sit);
                match (va, vb) {
                    (Some(p), Some(q)) => Some(p && q),
                    _ => None,
                }
            }
            Expr::Eq(a, b) => {
                let va = self.term(a, env, sit);
                let vb = self.term(b, env, sit);
                match (va, vb) {
                    (Some(p), Some(q)) => Some(p == q),
                    _ => None,
                }
            }
            Expr::Quant {
                det,
                var,
                restrictor,
                scope,
            } => {
                let mut restr = Vec::new();
                let mut scop = Vec::new();
                // The choice cursor must advance identically for every
                // entity; remember it and verify the traversals agree.
                let start = self.cursor;
                let mut end = start;
                for ent in self.m.universe.iter() {
                    self.cursor = start;
                    let mut env2 = env.clone();
                    env2.insert(var.clone(), ent.clone());
                    restr.push(self.formula(restrictor, &env2, sit));
                    scop.push(self.formula(scope, &env2, sit));
                    end = self.cursor;
                }
                self.cursor = end;
                if restr.iter().chain(scop.iter()).any(Option::is_none) {
                    return None;
                }
                let pairs: Vec<(bool, bool)> = restr
                    .into_iter()
                    .zip(scop)
                    .map(|(r, s)| (r.unwrap(), s.unwrap()))
                    .collect();
                Some(match det {
                    Det::Every => pairs.iter().all(|(r, s)| !r || *s),
                    Det::A => pairs.iter().any(|(r, s)| *r && *s),
                })
            }
            other => panic!(
                "oracle: unsupported formula {}",
                ambigua_core::print_expr(other)
            ),
        }
    }
}

pub type TruthTable = BTreeMap<String, Option<bool>>;

/// The set of situation-to-truth-value tables a closed wff can denote,
/// computed by direct enumeration of interpretation choices.
pub fn oracle_truth_tables(
    w: &Expr,
    m: &Model,
    d: &DiscourseSituation,
) -> BTreeSet<TruthTable> {
    let mut points = Vec::new();
    collect_choice_points(w, m, d, &mut points);
    let mut vectors: Vec<Vec<Choice>> = vec![Vec::new()];
    for p in &points {
        let options: Vec<Choice> = match p {
            ChoicePoint::Senses(names) => {
                names.iter().map(|n| Choice::Sense(n.clone())).collect()
            }
            ChoicePoint::Candidates(ents) => ents
                .iter()
                .map(|e| Choice::Candidate(e.clone()))
                .collect(),
        };
        let mut next = Vec::new();
        for v in &vectors {
            for o in &options {
                let mut v2 = v.clone();
                v2.push(o.clone());
                next.push(v2);
            }
        }
        vectors = next;
    }
    let mut out = BTreeSet::new();
    for choices in &vectors {
        let mut table = TruthTable::new();
        for s in &m.situations {
            let mut eval = OracleEval {
                m,
                choices,
                cursor: 0,
            };
            table.insert(s.id.clone(), eval.formula(w, &BTreeMap::new(), &s.id));
        }
        out.insert(table);
    }
    out
}

/// Project a denotation of a closed type-t expression onto comparable
/// truth tables.
pub fn denotation_truth_tables(den: &Denotation) -> BTreeSet<TruthTable> {
    den.senses
        .iter()
        .map(|sense| {
            let row = sense.rows.values().next().expect("closed expression");
            row.iter()
                .map(|(sid, v)| {
                    let tv = match v {
                        Value::Truth(b) => Some(*b),
                        _ => None,
                    };
                    (sid.clone(), tv)
                })
                .collect()
        })
        .collect()
}

/// Check a closed wff against the oracle on a model.
pub fn agrees_with_oracle(w: &Expr, m: &Model, d: &DiscourseSituation) -> bool {
    let den = denote(w, m, d).expect("denote");
    denotation_truth_tables(&den) == oracle_truth_tables(w, m, d)
}

// ---------------------------------------------------------------------------
// Random models and terms
// ---------------------------------------------------------------------------

pub struct RandomWorld {
    pub model: Model,
    pub signature: Signature,
}

/// A random finite model: up to 4 entities, up to 3 situations, unary
/// predicates p1/p2, a binary r2, an underspecified u_U over u_1/u_2,
/// and entity constants c1/c2.
pub fn random_model(rng: &mut StdRng) -> RandomWorld {
    let n_ent = rng.gen_range(1..=4);
    let entities: Vec<String> = (1..=n_ent).map(|i| format!("e{i}")).collect();
    let n_sit = rng.gen_range(1..=3);
    let mut situations = Vec::new();
    for i in 1..=n_sit {
        let mut constituents = BTreeSet::new();
        // Non-empty so parameters always have candidates.
        constituents.insert(entities[rng.gen_range(0..entities.len())].clone());
        for e in &entities {
            if rng.gen_bool(0.5) {
                constituents.insert(e.clone());
            }
        }
        let mut facts: BTreeMap<String, BTreeSet<Vec<String>>> = BTreeMap::new();
        for pred in ["p1", "p2", "u_1", "u_2"] {
            let mut set = BTreeSet::new();
            for e in &entities {
                if rng.gen_bool(0.5) {
                    set.insert(vec![e.clone()]);
                }
            }
            facts.insert(pred.to_string(), set);
        }
        let mut r2 = BTreeSet::new();
        for a in &entities {
            for b in &entities {
                if rng.gen_bool(0.4) {
                    r2.insert(vec![a.clone(), b.clone()]);
                }
            }
        }
        facts.insert("r2".to_string(), r2);
        situations.push(Situation {
            id: format!("s{i}"),
            constituents,
            facts,
        });
    }
    let mut discourse = BTreeSet::new();
    discourse.insert(situations[rng.gen_range(0..situations.len())].id.clone());
    for s in &situations {
        if rng.gen_bool(0.5) {
            discourse.insert(s.id.clone());
        }
    }
    let mut entity_consts = BTreeMap::new();
    entity_consts.insert(
        "c1".to_string(),
        entities[rng.gen_range(0..entities.len())].clone(),
    );
    entity_consts.insert(
        "c2".to_string(),
        entities[rng.gen_range(0..entities.len())].clone(),
    );
    let mut underspec = BTreeMap::new();
    underspec.insert(
        "u_U".to_string(),
        vec!["u_1".to_string(), "u_2".to_string()],
    );
    let arities: BTreeMap<String, usize> = [
        ("p1", 1),
        ("p2", 1),
        ("u_1", 1),
        ("u_2", 1),
        ("r2", 2),
    ]
    .into_iter()
    .map(|(n, a)| (n.to_string(), a))
    .collect();
    let model = Model::build(
        entities,
        situations,
        entity_consts,
        underspec,
        arities,
        Some(DiscourseSituation {
            situations: discourse,
        }),
    )
    .expect("random model is schema-valid");
    let signature = model.signature();
    RandomWorld { model, signature }
}

/// A random well-typed term of the given type over the random world's
/// constants. Types stay within {e, t, ⟨e,t⟩, ⟨e,⟨e,t⟩⟩} so value
/// domains stay small.
pub fn random_term(
    rng: &mut StdRng,
    ty: &SemType,
    depth: usize,
    env: &Vec<(String, SemType)>,
    allow_params: bool,
) -> Expr {
    let e_vars: Vec<&String> = env
        .iter()
        .filter(|(_, t)| *t == SemType::E)
        .map(|(n, _)| n)
        .collect();
    let et_vars: Vec<&String> = env
        .iter()
        .filter(|(_, t)| *t == SemType::et())
        .map(|(n, _)| n)
        .collect();
    match ty {
        SemType::E => {
            let mut options: Vec<u8> = vec![0, 1];
            if !e_vars.is_empty() {
                options.extend([2, 2, 2]);
            }
            if allow_params {
                options.push(3);
            }
            match options.choose(rng).unwrap() {
                0 => con("c1", SemType::E),
                1 => con("c2", SemType::E),
                2 => evar(e_vars.choose(rng).unwrap()),
                _ => expr::param("pp"),
            }
        }
        SemType::T => {
            let atomic = |rng: &mut StdRng, env: &Vec<(String, SemType)>| {
                let choice = rng.gen_range(0..5);
                match choice {
                    0 => app(
                        con("p1", SemType::et()),
                        random_term(rng, &SemType::E, 0, env, allow_params),
                    ),
                    1 => app(
                        con("p2", SemType::et()),
                        random_term(rng, &SemType::E, 0, env, allow_params),
                    ),
                    2 => app(
                        ucon("u_U", SemType::et()),
                        random_term(rng, &SemType::E, 0, env, allow_params),
                    ),
                    3 => app2(
                        con("r2", SemType::eet()),
                        random_term(rng, &SemType::E, 0, env, allow_params),
                        random_term(rng, &SemType::E, 0, env, allow_params),
                    ),
                    _ => {
                        if et_vars.is_empty() {
                            app(
                                con("u_1", SemType::et()),
                                random_term(rng, &SemType::E, 0, env, allow_params),
                            )
                        } else {
                            app(
                                evar_ty(et_vars.choose(rng).unwrap(), SemType::et()),
                                random_term(rng, &SemType::E, 0, env, allow_params),
                            )
                        }
                    }
                }
            };
            if depth == 0 {
                return atomic(rng, env);
            }
            match rng.gen_range(0..8) {
                0 | 1 => atomic(rng, env),
                2 => expr::not(random_term(rng, &SemType::T, depth - 1, env, allow_params)),
                3 => expr::and(
                    random_term(rng, &SemType::T, depth - 1, env, allow_params),
                    random_term(rng, &SemType::T, depth - 1, env, allow_params),
                ),
                4 => expr::eq(
                    random_term(rng, &SemType::E, 0, env, allow_params),
                    random_term(rng, &SemType::E, 0, env, allow_params),
                ),
                5 | 6 => {
                    let v = format!("v{}", env.len() + 1);
                    let det = if rng.gen_bool(0.5) { Det::Every } else { Det::A };
                    let mut env2 = env.clone();
                    env2.push((v.clone(), SemType::E));
                    quant(
                        det,
                        &v,
                        random_term(rng, &SemType::T, depth - 1, &env2, allow_params),
                        random_term(rng, &SemType::T, depth - 1, &env2, allow_params),
                    )
                }
                _ => app(
                    random_term(rng, &SemType::et(), depth - 1, env, allow_params),
                    random_term(rng, &SemType::E, 0, env, allow_params),
                ),
            }
        }
        t if *t == SemType::et() => {
            if depth == 0 {
                return con(["p1", "p2", "u_1", "u_2"].choose(rng).unwrap(), SemType::et());
            }
            match rng.gen_range(0..4) {
                0 => con(["p1", "p2"].choose(rng).unwrap(), SemType::et()),
                1 => ucon("u_U", SemType::et()),
                2 => {
                    let v = format!("v{}", env.len() + 1);
                    let mut env2 = env.clone();
                    env2.push((v.clone(), SemType::E));
                    lam(
                        &v,
                        SemType::E,
                        random_term(rng, &SemType::T, depth - 1, &env2, allow_params),
                    )
                }
                _ => app(
                    con("r2", SemType::eet()),
                    random_term(rng, &SemType::E, 0, env, allow_params),
                ),
            }
        }
        t if *t == SemType::eet() => con("r2", SemType::eet()),
        other => panic!("random_term: unsupported type {other}"),
    }
}

fn evar_ty(name: &str, ty: SemType) -> Expr {
    Expr::Var {
        name: name.to_string(),
        ty,
    }
}

// ---------------------------------------------------------------------------
// Scope suite: extended test grammar and permutation oracle
// ---------------------------------------------------------------------------

/// The fragment grammar extended with a ditransitive verb and a third
/// noun, for three-quantifier sentences.
pub fn extended_lexicon() -> Lexicon {
    let text = r#"{
      "lexicon": [
        {"surface": "Kermit", "cat": "PN", "sem": "k"},
        {"surface": "every", "cat": "Det",
         "sem": "(lam P (lam Q (forall x (P x) (Q x))))"},
        {"surface": "a", "cat": "Det",
         "sem": "(lam P (lam Q (exists x (P x) (Q x))))"},
        {"surface": "dog", "cat": "N", "sem": "dog"},
        {"surface": "frog", "cat": "N", "sem": "frog"},
        {"surface": "cat", "cat": "N", "sem": "cat"},
        {"surface": "croaked", "cat": "IV", "sem": "croak_U"},
        {"surface": "saw", "cat": "TV", "sem": "saw"},
        {"surface": "showed", "cat": "DTV", "sem": "showed"},
        {"surface": "it", "cat": "PRO", "sem": "(param x)"}
      ],
      "rules": [
        {"lhs": "S", "rhs": ["NP", "VP"]},
        {"lhs": "NP", "rhs": ["PN"]},
        {"lhs": "NP", "rhs": ["Det", "N"]},
        {"lhs": "NP", "rhs": ["PRO"]},
        {"lhs": "VP", "rhs": ["IV"]},
        {"lhs": "VP", "rhs": ["TV", "NP"]},
        {"lhs": "VP", "rhs": ["DTV", "NP", "NP"]}
      ]
    }"#;
    Lexicon::from_json(text, &Signature::frog_fragment()).expect("extended lexicon")
}

/// The fixed 3-entity model the scope suite evaluates on. `cat` has a
/// singleton extension, so under it a universal and an existential
/// second object coincide; `dog` and `frog` overlap so subject and
/// first-object quantifiers discriminate.
pub fn scope_model() -> Model {
    let text = r#"{
      "universe": ["a", "b", "c"],
      "situations": [
        {"id": "s1", "constituents": ["a", "b", "c"],
         "facts": {"dog": [["a"], ["b"]],
                   "frog": [["b"], ["c"]],
                   "cat": [["c"]],
                   "croak_1": [["a"], ["b"]],
                   "croak_2": [["c"]],
                   "saw": [["b", "a"], ["c", "b"]],
                   "showed": [["b", "c", "a"], ["c", "c", "b"]]}},
        {"id": "s2", "constituents": ["a", "b"],
         "facts": {"dog": [["a"]],
                   "frog": [["b"], ["c"]],
                   "cat": [["c"]],
                   "saw": [["c", "a"]],
                   "showed": [["b", "c", "a"]]}}
      ],
      "constants": {
        "k": {"entity": "a"},
        "croak_U": {"senses": ["croak_1", "croak_2"]}
      }
    }"#;
    Model::from_json(text).expect("scope model")
}

/// One noun-phrase slot of a generated sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpSpec {
    Quantified(Det, &'static str),
    Name(&'static str),
}

/// A generated test sentence: subject, verb, objects.
#[derive(Debug, Clone)]
pub struct SentenceSpec {
    pub subject: NpSpec,
    pub verb: &'static str,
    pub objects: Vec<NpSpec>,
}

impl SentenceSpec {
    pub fn surface(&self) -> String {
        let np = |s: &NpSpec| match s {
            NpSpec::Quantified(Det::Every, n) => format!("every {n}"),
            NpSpec::Quantified(Det::A, n) => format!("a {n}"),
            NpSpec::Name(n) => n.to_string(),
        };
        let mut out = format!("{} {}", np(&self.subject), self.verb);
        for o in &self.objects {
            out.push(' ');
            out.push_str(&np(o));
        }
        out
    }

    pub fn quantifier_count(&self) -> usize {
        std::iter::once(&self.subject)
            .chain(self.objects.iter())
            .filter(|s| matches!(s, NpSpec::Quantified(..)))
            .count()
    }
}

/// Brute-force quantifier-prefix permutation oracle: build the core
/// predication, then wrap the quantifiers around it in every order.
pub fn permutation_oracle(spec: &SentenceSpec) -> Vec<Expr> {
    let verb_ty = match spec.objects.len() {
        0 => SemType::et(),
        1 => SemType::eet(),
        2 => SemType::eeet(),
        n => panic!("unsupported object count {n}"),
    };
    let verb = con(spec.verb, verb_ty);
    // Arguments in curried order: objects first, subject last.
    let mut slots: Vec<(&NpSpec, String)> = Vec::new();
    for (i, o) in spec.objects.iter().enumerate() {
        slots.push((o, format!("o{}", i + 1)));
    }
    slots.push((&spec.subject, "s".to_string()));
    let mut body = verb;
    for (np, var_name) in &slots {
        let arg = match np {
            NpSpec::Name(n) => con(n, SemType::E),
            NpSpec::Quantified(..) => evar(var_name),
        };
        body = app(body, arg);
    }
    let quantified: Vec<(&NpSpec, String)> = slots
        .iter()
        .filter(|(np, _)| matches!(np, NpSpec::Quantified(..)))
        .cloned()
        .collect();
    let mut readings = Vec::new();
    for perm in permutations(quantified.len()) {
        let mut formula = body.clone();
        // Innermost quantifier last in the permutation.
        for &idx in perm.iter().rev() {
            let (np, var_name) = &quantified[idx];
            if let NpSpec::Quantified(det, noun) = np {
                formula = quant(
                    *det,
                    var_name,
                    app(con(noun, SemType::et()), evar(var_name)),
                    formula,
                );
            }
        }
        if !readings
            .iter()
            .any(|prev| ambigua_core::alpha_eq(prev, &formula))
        {
            readings.push(formula);
        }
    }
    readings
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// The sentence suite: every 2-quantifier transitive sentence over the
/// nouns, and 3-quantifier ditransitives whose second object is the
/// singleton-extension noun (the fixed store order of the simplified
/// discharge cannot reorder two distinct wide objects).
pub fn scope_suite() -> Vec<SentenceSpec> {
    let dets = [Det::Every, Det::A];
    let nouns = ["dog", "frog", "cat"];
    let mut out = Vec::new();
    for sd in dets {
        for sn in nouns {
            for od in dets {
                for on in nouns {
                    out.push(SentenceSpec {
                        subject: NpSpec::Quantified(sd, sn),
                        verb: "saw",
                        objects: vec![NpSpec::Quantified(od, on)],
                    });
                }
            }
            // Proper-name objects and subjects for good measure.
            out.push(SentenceSpec {
                subject: NpSpec::Quantified(sd, sn),
                verb: "saw",
                objects: vec![NpSpec::Name("kermit")],
            });
            out.push(SentenceSpec {
                subject: NpSpec::Name("kermit"),
                verb: "saw",
                objects: vec![NpSpec::Quantified(sd, sn)],
            });
        }
    }
    for sd in dets {
        for o1d in dets {
            for o2d in dets {
                out.push(SentenceSpec {
                    subject: NpSpec::Quantified(sd, "dog"),
                    verb: "showed",
                    objects: vec![
                        NpSpec::Quantified(o1d, "frog"),
                        NpSpec::Quantified(o2d, "cat"),
                    ],
                });
            }
        }
    }
    out
}

/// Oracle spelling of "kermit" for the permutation formulas: the
/// lexicon translates the name to the constant `k`.
pub fn oracle_spec_fixup(spec: &SentenceSpec) -> SentenceSpec {
    let fix = |np: &NpSpec| match np {
        NpSpec::Name("kermit") => NpSpec::Name("k"),
        other => *other,
    };
    SentenceSpec {
        subject: fix(&spec.subject),
        verb: spec.verb,
        objects: spec.objects.iter().map(fix).collect(),
    }
}

// ---------------------------------------------------------------------------
// Brute-force extension enumerator
// ---------------------------------------------------------------------------

/// Enumerate extensions by plain breadth-first exploration of every
/// rule-application order, with no memoization or canonical-order
/// shortcuts: quiescent states are kept if they satisfy the condition
/// on discourse interpretation and every justification assumed along
/// the way survives in the final set.
pub fn brute_force_extensions(
    theory: &ambigua_core::Theory,
) -> Vec<BTreeSet<Expr>> {
    use ambigua_core::defaults::normalize_input_wff;

    let start: BTreeSet<Expr> = theory
        .uf
        .iter()
        .map(|w| normalize_input_wff(w).expect("normalize"))
        .collect();
    let mut queue: Vec<(BTreeSet<Expr>, Vec<Expr>)> = vec![(start, Vec::new())];
    let mut finals: Vec<BTreeSet<Expr>> = Vec::new();
    let mut guard = 0usize;
    while let Some((state, negs)) = queue.pop() {
        guard += 1;
        assert!(guard < 200_000, "brute force exploded");
        let mut progressed = false;
        for rule in &theory.rules {
            for tm in ambigua_core::match_trigger(rule, &state) {
                let neg = expr::not(instantiate_for_test(&rule.justification, &tm.binding));
                if holds_in(&state, &neg) {
                    continue;
                }
                match ambigua_core::apply_rule(rule, &tm, &state) {
                    Ok(next) => {
                        if next == state {
                            continue;
                        }
                        progressed = true;
                        let mut negs2 = negs.clone();
                        negs2.push(neg);
                        queue.push((next, negs2));
                    }
                    Err(_) => continue,
                }
            }
        }
        if !progressed {
            if !ambigua_core::check_cdi(&state) {
                continue;
            }
            if negs.iter().any(|n| holds_in(&state, n)) {
                continue;
            }
            if !finals.contains(&state) {
                finals.push(state);
            }
        }
    }
    finals.sort();
    finals
}

fn holds_in(state: &BTreeSet<Expr>, w: &Expr) -> bool {
    state.iter().any(|member| {
        ambigua_core::alpha_eq(member, w)
            || expr::conjuncts(member)
                .iter()
                .any(|c| ambigua_core::alpha_eq(c, w))
    })
}

/// Instantiate a pattern for the brute-force path. Test rules bind
/// metavariables to closed terms, so plain replacement suffices.
pub fn instantiate_for_test(pattern: &Expr, binding: &BTreeMap<String, Expr>) -> Expr {
    match pattern {
        Expr::Meta(n) => binding
            .get(n)
            .cloned()
            .unwrap_or_else(|| Expr::Meta(n.clone())),
        Expr::Const { .. } | Expr::Var { .. } => pattern.clone(),
        Expr::Param { name, anchor } => Expr::Param {
            name: name.clone(),
            anchor: anchor
                .as_ref()
                .map(|a| Box::new(instantiate_for_test(a, binding))),
        },
        Expr::App { fun, arg } => app(
            instantiate_for_test(fun, binding),
            instantiate_for_test(arg, binding),
        ),
        Expr::Lambda { var, var_ty, body } => lam(
            var,
            var_ty.clone(),
            instantiate_for_test(body, binding),
        ),
        Expr::Not(x) => expr::not(instantiate_for_test(x, binding)),
        Expr::And(a, b) => expr::and(
            instantiate_for_test(a, binding),
            instantiate_for_test(b, binding),
        ),
        Expr::Eq(a, b) => expr::eq(
            instantiate_for_test(a, binding),
            instantiate_for_test(b, binding),
        ),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => quant(
            *det,
            var,
            instantiate_for_test(restrictor, binding),
            instantiate_for_test(scope, binding),
        ),
        Expr::LfNode { cat, children } => lf(
            *cat,
            children
                .iter()
                .map(|c| instantiate_for_test(c, binding))
                .collect(),
        ),
    }
}

// ---------------------------------------------------------------------------
// Convenience
// ---------------------------------------------------------------------------

pub fn forall_exists_reading() -> Expr {
    forall(
        "x",
        app(con("dog", SemType::et()), evar("x")),
        exists(
            "y",
            app(con("frog", SemType::et()), evar("y")),
            app2(con("saw", SemType::eet()), evar("y"), evar("x")),
        ),
    )
}

pub fn exists_forall_reading() -> Expr {
    exists(
        "y",
        app(con("frog", SemType::et()), evar("y")),
        forall(
            "x",
            app(con("dog", SemType::et()), evar("x")),
            app2(con("saw", SemType::eet()), evar("y"), evar("x")),
        ),
    )
}
