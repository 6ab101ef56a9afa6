//! Finite models of situations with constituents, and the multi-sense
//! denotation function: every well-typed expression denotes a *set* of
//! senses, where a sense maps assignments and situations to values.
//!
//! Values of function type are finite tables, so denotation equality is
//! decidable by table comparison. Partiality is three-valued: an
//! undefined input makes a connective undefined.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::cooper;
use crate::expr::{
    self, is_h_ambiguous, lam, resugar_quant, type_of, Det, Expr, LfCat, SemType,
    TypeError, Wff,
};
use crate::sexpr::Signature;

pub type EntityId = String;
pub type SituationId = String;

/// A situation: its constituents plus per-predicate extension tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Situation {
    pub id: SituationId,
    pub constituents: BTreeSet<EntityId>,
    /// predicate sense id -> set of entity tuples (curried application
    /// order: the first-applied argument is the first tuple element).
    pub facts: BTreeMap<String, BTreeSet<Vec<EntityId>>>,
}

/// The discourse situation: a designated subset of the model's
/// situations whose constituents supply parameter candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscourseSituation {
    pub situations: BTreeSet<SituationId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ConstMeaning {
    Entity(EntityId),
    /// Predicate interpreted by its own facts tables.
    Pred { arity: usize },
    /// Underspecified constant: denotes the union of the named
    /// predicate senses.
    Senses(Vec<String>),
}

/// A finite model: universe, situations, and an interpretation mapping
/// each constant onto a set of sense tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub universe: BTreeSet<EntityId>,
    pub situations: Vec<Situation>,
    interp: BTreeMap<String, ConstMeaning>,
    pub discourse: DiscourseSituation,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model schema violation: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("uninterpreted constant {0}")]
    UninterpretedConstant(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("consistency is undefined for H-type ambiguous input: {0}")]
    AmbiguousInput(String),
    #[error("value domain too large for type {0}")]
    DomainTooLarge(String),
    #[error("logical form of category {0} has no denotation clause")]
    UnsupportedLogicalForm(String),
    #[error("parameter anchor cannot be resolved to an entity: {0}")]
    UnresolvedAnchor(String),
    #[error("expression must be closed, found free {0}")]
    FreeVariable(String),
    #[error("scope enumeration failed: {0}")]
    Cooper(String),
    #[error("unknown situation {0}")]
    UnknownSituation(String),
}

/// A semantic value: an entity, a truth value, a finite function table,
/// or the undefined value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Undef,
    Truth(bool),
    Entity(EntityId),
    Func(BTreeMap<Value, Value>),
}

pub type Assignment = BTreeMap<String, Value>;

/// One sense: a finite table from assignments (over the free variables
/// of the evaluated expression) and situations to values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Sense {
    pub rows: BTreeMap<Assignment, BTreeMap<SituationId, Value>>,
}

impl Sense {
    /// Value at the empty assignment and the given situation; only
    /// meaningful for closed expressions.
    pub fn at(&self, sit: &str) -> Value {
        self.rows
            .values()
            .next()
            .and_then(|m| m.get(sit).cloned())
            .unwrap_or(Value::Undef)
    }
}

/// A denotation: the set of senses of an expression, with its type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Denotation {
    pub senses: BTreeSet<Sense>,
    pub ty: SemType,
}

impl Denotation {
    pub fn len(&self) -> usize {
        self.senses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senses.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.senses.len() == 1
    }
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    universe: Vec<String>,
    situations: Vec<SituationFile>,
    #[serde(default)]
    constants: BTreeMap<String, ConstantDecl>,
    #[serde(default)]
    discourse: Option<DiscourseFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SituationFile {
    id: String,
    #[serde(default)]
    constituents: Vec<String>,
    #[serde(default)]
    facts: BTreeMap<String, Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscourseFile {
    situations: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
enum ConstantDecl {
    #[serde(rename = "entity")]
    Entity(String),
    #[serde(rename = "senses")]
    Senses(Vec<String>),
    #[serde(rename = "arity")]
    Arity(usize),
}

impl Model {
    pub fn load(path: impl AsRef<Path>) -> Result<Model, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Model::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        Model::from_file(file)
    }

    fn from_file(file: ModelFile) -> Result<Model, ModelError> {
        let universe: BTreeSet<String> = file.universe.into_iter().collect();
        if universe.is_empty() {
            return Err(ModelError::Schema("universe must be non-empty".into()));
        }
        let mut situations = Vec::new();
        let mut sit_ids = BTreeSet::new();
        let mut pred_arity: BTreeMap<String, usize> = BTreeMap::new();
        for s in file.situations {
            if !sit_ids.insert(s.id.clone()) {
                return Err(ModelError::Schema(format!("duplicate situation id {}", s.id)));
            }
            let constituents: BTreeSet<String> = s.constituents.into_iter().collect();
            for c in &constituents {
                if !universe.contains(c) {
                    return Err(ModelError::Schema(format!(
                        "constituent {c} of situation {} is not in the universe",
                        s.id
                    )));
                }
            }
            let mut facts = BTreeMap::new();
            for (pred, tuples) in s.facts {
                let mut set = BTreeSet::new();
                for tuple in tuples {
                    if tuple.is_empty() {
                        return Err(ModelError::Schema(format!(
                            "empty tuple for predicate {pred}"
                        )));
                    }
                    for ent in &tuple {
                        if !universe.contains(ent) {
                            return Err(ModelError::Schema(format!(
                                "entity {ent} in facts for {pred} is not in the universe"
                            )));
                        }
                    }
                    match pred_arity.get(&pred) {
                        Some(&n) if n != tuple.len() => {
                            return Err(ModelError::Schema(format!(
                                "predicate {pred} used with arities {n} and {}",
                                tuple.len()
                            )))
                        }
                        _ => {
                            pred_arity.insert(pred.clone(), tuple.len());
                        }
                    }
                    set.insert(tuple);
                }
                facts.insert(pred, set);
            }
            situations.push(Situation {
                id: s.id,
                constituents,
                facts,
            });
        }
        if situations.is_empty() {
            return Err(ModelError::Schema("at least one situation required".into()));
        }

        let mut interp: BTreeMap<String, ConstMeaning> = BTreeMap::new();
        for (name, decl) in file.constants {
            let meaning = match decl {
                ConstantDecl::Entity(e) => {
                    if !universe.contains(&e) {
                        return Err(ModelError::Schema(format!(
                            "constant {name} names entity {e} outside the universe"
                        )));
                    }
                    ConstMeaning::Entity(e)
                }
                ConstantDecl::Senses(list) => {
                    if list.is_empty() {
                        return Err(ModelError::Schema(format!(
                            "constant {name} declares an empty sense list"
                        )));
                    }
                    ConstMeaning::Senses(list)
                }
                ConstantDecl::Arity(n) => {
                    if n == 0 {
                        return Err(ModelError::Schema(format!(
                            "constant {name}: arity must be positive"
                        )));
                    }
                    match pred_arity.get(&name) {
                        Some(&m) if m != n => {
                            return Err(ModelError::Schema(format!(
                                "constant {name}: declared arity {n} conflicts with facts arity {m}"
                            )))
                        }
                        _ => {}
                    }
                    ConstMeaning::Pred { arity: n }
                }
            };
            interp.insert(name, meaning);
        }
        for (pred, arity) in &pred_arity {
            interp
                .entry(pred.clone())
                .or_insert(ConstMeaning::Pred { arity: *arity });
        }
        // Sense references must resolve to predicates.
        let names: Vec<String> = interp.keys().cloned().collect();
        for name in names {
            if let ConstMeaning::Senses(list) = interp.get(&name).cloned().unwrap() {
                let mut arity = None;
                for sense in &list {
                    match interp.get(sense) {
                        Some(ConstMeaning::Pred { arity: a }) => {
                            if let Some(prev) = arity {
                                if prev != *a {
                                    return Err(ModelError::Schema(format!(
                                        "senses of {name} disagree in arity"
                                    )));
                                }
                            }
                            arity = Some(*a);
                        }
                        _ => {
                            return Err(ModelError::Schema(format!(
                                "sense {sense} of {name} is not an interpreted predicate"
                            )))
                        }
                    }
                }
            }
        }

        let discourse = match file.discourse {
            Some(d) => {
                let set: BTreeSet<String> = d.situations.into_iter().collect();
                for id in &set {
                    if !sit_ids.contains(id) {
                        return Err(ModelError::Schema(format!(
                            "discourse situation {id} is not a model situation"
                        )));
                    }
                }
                DiscourseSituation { situations: set }
            }
            None => DiscourseSituation {
                situations: sit_ids.clone(),
            },
        };

        Ok(Model {
            universe,
            situations,
            interp,
            discourse,
        })
    }

    /// Programmatic construction for tests and generators.
    pub fn build(
        universe: impl IntoIterator<Item = String>,
        situations: Vec<Situation>,
        entities: BTreeMap<String, String>,
        underspecified: BTreeMap<String, Vec<String>>,
        pred_arities: BTreeMap<String, usize>,
        discourse: Option<DiscourseSituation>,
    ) -> Result<Model, ModelError> {
        let mut constants = BTreeMap::new();
        for (name, e) in entities {
            constants.insert(name, ConstantDecl::Entity(e));
        }
        for (name, senses) in underspecified {
            constants.insert(name, ConstantDecl::Senses(senses));
        }
        for (name, arity) in pred_arities {
            constants.entry(name).or_insert(ConstantDecl::Arity(arity));
        }
        Model::from_file(ModelFile {
            universe: universe.into_iter().collect(),
            situations: situations
                .into_iter()
                .map(|s| SituationFile {
                    id: s.id,
                    constituents: s.constituents.into_iter().collect(),
                    facts: s
                        .facts
                        .into_iter()
                        .map(|(k, v)| (k, v.into_iter().collect()))
                        .collect(),
                })
                .collect(),
            constants,
            discourse: discourse.map(|d| DiscourseFile {
                situations: d.situations.into_iter().collect(),
            }),
        })
    }

    pub fn situation(&self, id: &str) -> Option<&Situation> {
        self.situations.iter().find(|s| s.id == id)
    }

    /// Declare an extra entity-valued constant; used to probe rule
    /// contexts with fresh names.
    pub(crate) fn add_entity_constant(&mut self, name: &str, entity: &str) {
        debug_assert!(self.universe.contains(entity));
        self.interp
            .insert(name.to_string(), ConstMeaning::Entity(entity.to_string()));
    }

    /// The entity a constant names, if it is an entity constant.
    pub fn entity_of(&self, name: &str) -> Option<&str> {
        match self.interp.get(name) {
            Some(ConstMeaning::Entity(e)) => Some(e),
            _ => None,
        }
    }

    /// The predicate tables interpreting a constant: its own name for a
    /// plain predicate, the precisification names for an underspecified
    /// one.
    pub fn predicate_senses(&self, name: &str) -> Option<Vec<String>> {
        match self.interp.get(name) {
            Some(ConstMeaning::Pred { .. }) => Some(vec![name.to_string()]),
            Some(ConstMeaning::Senses(list)) => Some(list.clone()),
            _ => None,
        }
    }

    /// Raw facts lookup: does the tuple hold for the predicate sense at
    /// the situation?
    pub fn fact_holds(&self, sit: &str, pred: &str, args: &[String]) -> bool {
        self.situation(sit)
            .and_then(|s| s.facts.get(pred))
            .map(|tuples| tuples.contains(&args.to_vec()))
            .unwrap_or(false)
    }

    /// The constant signature induced by the interpretation.
    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new();
        for (name, meaning) in &self.interp {
            match meaning {
                ConstMeaning::Entity(_) => sig.declare(name, SemType::E, false),
                ConstMeaning::Pred { arity } => {
                    sig.declare(name, pred_type(*arity), false);
                }
                ConstMeaning::Senses(list) => {
                    let arity = list
                        .first()
                        .and_then(|s| match self.interp.get(s) {
                            Some(ConstMeaning::Pred { arity }) => Some(*arity),
                            _ => None,
                        })
                        .unwrap_or(1);
                    sig.declare(name, pred_type(arity), list.len() > 1);
                }
            }
        }
        sig
    }

    /// Entities that are constituents of some situation of the
    /// discourse situation: the candidate referents for parameters.
    pub fn discourse_constituents(&self, d: &DiscourseSituation) -> BTreeSet<EntityId> {
        let mut out = BTreeSet::new();
        for s in &self.situations {
            if d.situations.contains(&s.id) {
                out.extend(s.constituents.iter().cloned());
            }
        }
        out
    }

    fn pred_table(&self, pred: &str, arity: usize, sit: &Situation) -> Value {
        let empty = BTreeSet::new();
        let tuples = sit.facts.get(pred).unwrap_or(&empty);
        build_curried(&self.universe, arity, &mut Vec::new(), tuples)
    }

    /// The set of sense tables (situation id -> value) interpreting a
    /// constant.
    fn const_senses(&self, name: &str) -> Result<Vec<BTreeMap<SituationId, Value>>, EvalError> {
        match self.interp.get(name) {
            None => Err(EvalError::UninterpretedConstant(name.to_string())),
            Some(ConstMeaning::Entity(e)) => {
                let table = self
                    .situations
                    .iter()
                    .map(|s| (s.id.clone(), Value::Entity(e.clone())))
                    .collect();
                Ok(vec![table])
            }
            Some(ConstMeaning::Pred { arity }) => {
                let table = self
                    .situations
                    .iter()
                    .map(|s| (s.id.clone(), self.pred_table(name, *arity, s)))
                    .collect();
                Ok(vec![table])
            }
            Some(ConstMeaning::Senses(list)) => {
                let mut out = Vec::new();
                for sense in list {
                    match self.interp.get(sense) {
                        Some(ConstMeaning::Pred { arity }) => {
                            out.push(
                                self.situations
                                    .iter()
                                    .map(|s| (s.id.clone(), self.pred_table(sense, *arity, s)))
                                    .collect(),
                            );
                        }
                        _ => return Err(EvalError::UninterpretedConstant(sense.clone())),
                    }
                }
                Ok(out)
            }
        }
    }
}

fn pred_type(arity: usize) -> SemType {
    let mut t = SemType::T;
    for _ in 0..arity {
        t = SemType::func(SemType::E, t);
    }
    t
}

fn build_curried(
    universe: &BTreeSet<String>,
    remaining: usize,
    prefix: &mut Vec<String>,
    tuples: &BTreeSet<Vec<String>>,
) -> Value {
    if remaining == 0 {
        return Value::Truth(tuples.contains(prefix));
    }
    let mut table = BTreeMap::new();
    for e in universe {
        prefix.push(e.clone());
        let v = build_curried(universe, remaining - 1, prefix, tuples);
        prefix.pop();
        table.insert(Value::Entity(e.clone()), v);
    }
    Value::Func(table)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

const DOMAIN_LIMIT: usize = 1 << 16;

/// All values of a type over the model's universe, in canonical order.
pub fn enumerate_domain(ty: &SemType, m: &Model) -> Result<Vec<Value>, EvalError> {
    match ty {
        SemType::E => Ok(m
            .universe
            .iter()
            .map(|e| Value::Entity(e.clone()))
            .collect()),
        SemType::T => Ok(vec![Value::Truth(false), Value::Truth(true)]),
        SemType::Fn(a, b) => {
            let dom = enumerate_domain(a, m)?;
            let cod = enumerate_domain(b, m)?;
            let size = cod.len().checked_pow(dom.len() as u32).unwrap_or(usize::MAX);
            if size > DOMAIN_LIMIT {
                return Err(EvalError::DomainTooLarge(ty.to_string()));
            }
            let mut out = vec![BTreeMap::new()];
            for key in &dom {
                let mut next = Vec::with_capacity(out.len() * cod.len());
                for partial in &out {
                    for v in &cod {
                        let mut t: BTreeMap<Value, Value> = partial.clone();
                        t.insert(key.clone(), v.clone());
                        next.push(t);
                    }
                }
                out = next;
            }
            Ok(out.into_iter().map(Value::Func).collect())
        }
    }
}

struct Ctx<'a> {
    m: &'a Model,
    d: &'a DiscourseSituation,
}

/// The denotation of a well-typed expression: the set of senses built
/// compositionally over the model, relative to the discourse situation.
pub fn denote(e: &Expr, m: &Model, d: &DiscourseSituation) -> Result<Denotation, EvalError> {
    let e = expr::normalize_determiners(&resugar_quant(e));
    let fv = e.free_vars();
    let env: BTreeMap<String, SemType> = fv.clone().into_iter().collect();
    let ty = type_of(&e, &env)?;
    let mut assignments: Vec<Assignment> = vec![BTreeMap::new()];
    for (name, vty) in &fv {
        let dom = enumerate_domain(vty, m)?;
        let mut next = Vec::with_capacity(assignments.len() * dom.len());
        for g in &assignments {
            for v in &dom {
                let mut g2 = g.clone();
                g2.insert(name.clone(), v.clone());
                next.push(g2);
            }
        }
        assignments = next;
        if assignments.len() > DOMAIN_LIMIT {
            return Err(EvalError::DomainTooLarge("assignment space".into()));
        }
    }
    let ctx = Ctx { m, d };
    let senses = eval(&e, &ctx, &assignments)?;
    Ok(Denotation { senses, ty })
}

fn eval(e: &Expr, ctx: &Ctx, assignments: &[Assignment]) -> Result<BTreeSet<Sense>, EvalError> {
    match e {
        Expr::Const { name, .. } => {
            let tables = ctx.m.const_senses(name)?;
            let mut out = BTreeSet::new();
            for table in tables {
                let rows = assignments
                    .iter()
                    .map(|g| (g.clone(), table.clone()))
                    .collect();
                out.insert(Sense { rows });
            }
            Ok(out)
        }
        Expr::Var { name, .. } => {
            let mut rows = BTreeMap::new();
            for g in assignments {
                let v = g.get(name).cloned().unwrap_or(Value::Undef);
                let table = ctx
                    .m
                    .situations
                    .iter()
                    .map(|s| (s.id.clone(), v.clone()))
                    .collect();
                rows.insert(g.clone(), table);
            }
            Ok(BTreeSet::from([Sense { rows }]))
        }
        Expr::Param { name, anchor } => {
            let candidates: Vec<EntityId> = match anchor {
                None => ctx.m.discourse_constituents(ctx.d).into_iter().collect(),
                Some(t) => vec![resolve_anchor(t, ctx.m, name)?],
            };
            let mut out = BTreeSet::new();
            for a in candidates {
                let table: BTreeMap<SituationId, Value> = ctx
                    .m
                    .situations
                    .iter()
                    .map(|s| {
                        let v = if s.constituents.contains(&a) {
                            Value::Entity(a.clone())
                        } else {
                            Value::Undef
                        };
                        (s.id.clone(), v)
                    })
                    .collect();
                let rows = assignments
                    .iter()
                    .map(|g| (g.clone(), table.clone()))
                    .collect();
                out.insert(Sense { rows });
            }
            Ok(out)
        }
        Expr::App { fun, arg } => {
            let fs = eval(fun, ctx, assignments)?;
            let xs = eval(arg, ctx, assignments)?;
            let mut out = BTreeSet::new();
            for f in &fs {
                for x in &xs {
                    out.insert(pointwise2(f, x, assignments, ctx, |fv, xv| {
                        apply_value(fv, xv)
                    }));
                }
            }
            Ok(out)
        }
        Expr::Lambda { var, var_ty, body } => {
            // Rename the binder if it collides with an outer variable.
            let (var, body) = if assignments.iter().any(|g| g.contains_key(var)) {
                let mut avoid: BTreeSet<String> = body.all_var_names();
                for g in assignments {
                    avoid.extend(g.keys().cloned());
                }
                let nv = expr::fresh_name(var, &avoid);
                let renamed = expr::substitute(
                    body,
                    var,
                    &Expr::Var {
                        name: nv.clone(),
                        ty: var_ty.clone(),
                    },
                )
                .expect("rename");
                (nv, renamed)
            } else {
                (var.clone(), (**body).clone())
            };
            let dom = enumerate_domain(var_ty, ctx.m)?;
            let mut extended = Vec::with_capacity(assignments.len() * dom.len());
            for g in assignments {
                for v in &dom {
                    let mut g2 = g.clone();
                    g2.insert(var.clone(), v.clone());
                    extended.push(g2);
                }
            }
            if extended.len() > DOMAIN_LIMIT {
                return Err(EvalError::DomainTooLarge("assignment space".into()));
            }
            let inner = eval(&body, ctx, &extended)?;
            let mut out = BTreeSet::new();
            for m_sense in inner {
                // One output sense per input sense: the member chosen
                // for the body is held fixed across the abstracted
                // argument, which is what restores eta-soundness.
                let mut rows = BTreeMap::new();
                for g in assignments {
                    let mut per_sit: BTreeMap<SituationId, BTreeMap<Value, Value>> =
                        BTreeMap::new();
                    for v in &dom {
                        let mut g2 = g.clone();
                        g2.insert(var.clone(), v.clone());
                        let body_row = m_sense.rows.get(&g2).expect("assignment row");
                        for s in &ctx.m.situations {
                            let bv = body_row.get(&s.id).cloned().unwrap_or(Value::Undef);
                            per_sit
                                .entry(s.id.clone())
                                .or_default()
                                .insert(v.clone(), bv);
                        }
                    }
                    let table: BTreeMap<SituationId, Value> = per_sit
                        .into_iter()
                        .map(|(sid, t)| (sid, Value::Func(t)))
                        .collect();
                    rows.insert(g.clone(), table);
                }
                out.insert(Sense { rows });
            }
            Ok(out)
        }
        Expr::Not(x) => {
            let xs = eval(x, ctx, assignments)?;
            let mut out = BTreeSet::new();
            for s in &xs {
                out.insert(pointwise1(s, |v| match v {
                    Value::Truth(b) => Value::Truth(!b),
                    _ => Value::Undef,
                }));
            }
            Ok(out)
        }
        Expr::And(a, b) => {
            let xs = eval(a, ctx, assignments)?;
            let ys = eval(b, ctx, assignments)?;
            let mut out = BTreeSet::new();
            for x in &xs {
                for y in &ys {
                    out.insert(pointwise2(x, y, assignments, ctx, |xv, yv| {
                        match (xv, yv) {
                            (Value::Truth(p), Value::Truth(q)) => Value::Truth(*p && *q),
                            _ => Value::Undef,
                        }
                    }));
                }
            }
            Ok(out)
        }
        Expr::Eq(a, b) => {
            let xs = eval(a, ctx, assignments)?;
            let ys = eval(b, ctx, assignments)?;
            let mut out = BTreeSet::new();
            for x in &xs {
                for y in &ys {
                    out.insert(pointwise2(x, y, assignments, ctx, |xv, yv| {
                        match (xv, yv) {
                            (Value::Undef, _) | (_, Value::Undef) => Value::Undef,
                            (p, q) => Value::Truth(p == q),
                        }
                    }));
                }
            }
            Ok(out)
        }
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => {
            let f = lam(var, SemType::E, (**restrictor).clone());
            let g = lam(var, SemType::E, (**scope).clone());
            let fs = eval(&f, ctx, assignments)?;
            let gs = eval(&g, ctx, assignments)?;
            let det = *det;
            let mut out = BTreeSet::new();
            for h in &fs {
                for h2 in &gs {
                    out.insert(pointwise2(h, h2, assignments, ctx, |fv, gv| {
                        gq_value(det, fv, gv)
                    }));
                }
            }
            Ok(out)
        }
        Expr::LfNode { cat, children: _ } => {
            if *cat != LfCat::S {
                return Err(EvalError::UnsupportedLogicalForm(cat.name().to_string()));
            }
            let rs = cooper::readings(e).map_err(|err| EvalError::Cooper(err.to_string()))?;
            let mut out = BTreeSet::new();
            for r in rs {
                let r = expr::normalize_determiners(&resugar_quant(&r));
                out.extend(eval(&r, ctx, assignments)?);
            }
            Ok(out)
        }
        Expr::Meta(name) => Err(EvalError::Type(TypeError::UntypedMeta(name.clone()))),
    }
}

fn resolve_anchor(t: &Expr, m: &Model, pname: &str) -> Result<EntityId, EvalError> {
    match t {
        Expr::Const { name, ty, .. } if *ty == SemType::E => {
            match m.interp.get(name) {
                Some(ConstMeaning::Entity(e)) => Ok(e.clone()),
                _ => Err(EvalError::UninterpretedConstant(name.clone())),
            }
        }
        Expr::Param {
            anchor: Some(inner),
            name,
        } => resolve_anchor(inner, m, name),
        _ => Err(EvalError::UnresolvedAnchor(format!(
            "parameter {pname} anchored to a non-resolvable term"
        ))),
    }
}

fn apply_value(f: &Value, x: &Value) -> Value {
    match (f, x) {
        (Value::Undef, _) | (_, Value::Undef) => Value::Undef,
        (Value::Func(table), key) => table.get(key).cloned().unwrap_or(Value::Undef),
        _ => Value::Undef,
    }
}

/// Generalized-quantifier combination of two one-place predicate
/// tables: subset test for `every`, non-empty intersection for `a`.
/// Any undefined entry makes the result undefined.
fn gq_value(det: Det, f: &Value, g: &Value) -> Value {
    let (ft, gt) = match (f, g) {
        (Value::Func(ft), Value::Func(gt)) => (ft, gt),
        _ => return Value::Undef,
    };
    if ft.values().chain(gt.values()).any(|v| *v == Value::Undef) {
        return Value::Undef;
    }
    match det {
        Det::Every => {
            for (k, v) in ft {
                if *v == Value::Truth(true) && gt.get(k) != Some(&Value::Truth(true)) {
                    return Value::Truth(false);
                }
            }
            Value::Truth(true)
        }
        Det::A => {
            for (k, v) in ft {
                if *v == Value::Truth(true) && gt.get(k) == Some(&Value::Truth(true)) {
                    return Value::Truth(true);
                }
            }
            Value::Truth(false)
        }
    }
}

fn pointwise1(s: &Sense, op: impl Fn(&Value) -> Value) -> Sense {
    let rows = s
        .rows
        .iter()
        .map(|(g, table)| {
            (
                g.clone(),
                table.iter().map(|(sid, v)| (sid.clone(), op(v))).collect(),
            )
        })
        .collect();
    Sense { rows }
}

fn pointwise2(
    a: &Sense,
    b: &Sense,
    assignments: &[Assignment],
    ctx: &Ctx,
    op: impl Fn(&Value, &Value) -> Value,
) -> Sense {
    let mut rows = BTreeMap::new();
    for g in assignments {
        let ra = a.rows.get(g);
        let rb = b.rows.get(g);
        let mut table = BTreeMap::new();
        for s in &ctx.m.situations {
            let va = ra.and_then(|r| r.get(&s.id)).cloned().unwrap_or(Value::Undef);
            let vb = rb.and_then(|r| r.get(&s.id)).cloned().unwrap_or(Value::Undef);
            table.insert(s.id.clone(), op(&va, &vb));
        }
        rows.insert(g.clone(), table);
    }
    Sense { rows }
}

/// Truth values an expression can take at one situation: the values of
/// its senses there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TruthValue {
    False,
    True,
    Undefined,
}

pub fn truth_values(
    w: &Wff,
    m: &Model,
    d: &DiscourseSituation,
    sit: &str,
) -> Result<BTreeSet<TruthValue>, EvalError> {
    if let Some((name, _)) = w.free_vars().into_iter().next() {
        return Err(EvalError::FreeVariable(name));
    }
    if m.situation(sit).is_none() {
        return Err(EvalError::UnknownSituation(sit.to_string()));
    }
    let den = denote(w, m, d)?;
    Ok(den
        .senses
        .iter()
        .map(|s| match s.at(sit) {
            Value::Truth(true) => TruthValue::True,
            Value::Truth(false) => TruthValue::False,
            _ => TruthValue::Undefined,
        })
        .collect())
}

/// Set equality of sense tables. The two denotations must share a type
/// for the comparison to be meaningful.
pub fn denotation_eq(a: &Denotation, b: &Denotation) -> bool {
    a.ty == b.ty && a.senses == b.senses
}

/// Consistency of a set of disambiguated wffs: their conjunction is
/// true at some situation of the discourse situation. The empty set
/// denotes the function TRUE and is consistent.
pub fn is_consistent(
    ws: &BTreeSet<Wff>,
    m: &Model,
    d: &DiscourseSituation,
) -> Result<bool, EvalError> {
    if ws.is_empty() {
        return Ok(true);
    }
    for w in ws {
        if is_h_ambiguous(w) {
            return Err(EvalError::AmbiguousInput(crate::sexpr::print_expr(w)));
        }
    }
    let mut iter = ws.iter().cloned();
    let mut conj = iter.next().expect("nonempty");
    for w in iter {
        conj = expr::and(conj, w);
    }
    let den = denote(&conj, m, d)?;
    debug_assert!(den.is_singleton(), "disambiguated wffs denote singletons");
    Ok(den.senses.iter().any(|sense| {
        d.situations
            .iter()
            .any(|sid| sense.at(sid) == Value::Truth(true))
    }))
}

/// Deduplicate readings by denotation equality over a model; used
/// behind the `denotational-dedup` flag.
pub fn dedup_by_denotation(
    readings: Vec<Expr>,
    m: &Model,
    d: &DiscourseSituation,
) -> Result<Vec<Expr>, EvalError> {
    let mut seen: Vec<(Denotation, Expr)> = Vec::new();
    for r in readings {
        let den = denote(&r, m, d)?;
        if !seen.iter().any(|(prev, _)| denotation_eq(prev, &den)) {
            seen.push((den, r));
        }
    }
    Ok(seen.into_iter().map(|(_, e)| e).collect())
}
