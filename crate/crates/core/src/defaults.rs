//! Discourse interpretation as a default theory: rewriting default
//! rules over sets of underspecified wffs, with extensions defined as
//! fixed points of the closure-free operator (no deductive closure).
//!
//! A rule has a triggering wff, a contextual requirement, a
//! justification, a rewrite result, and optional additions. Matching is
//! against top-level wffs and against conjuncts of top-level
//! conjunctions; there is no deeper logical decomposition. The
//! justification check is syntactic absence of the negated
//! justification, re-verified against the final set.
//!
//! An extension must satisfy the condition on discourse interpretation:
//! it cannot contain an H-type ambiguous wff. A sentence-level logical
//! form whose Cooper value has collapsed to a single reading no longer
//! encodes a choice, so state normalization replaces it with that
//! reading; forms with several readings stay until a rule picks one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::cooper::{self, CooperError};
use crate::expr::{
    self, alpha_eq, beta_reduce, fresh_name, is_h_ambiguous, Expr, LfCat, SemType, TypeError, Wff,
};
use crate::model::{DiscourseSituation, EvalError, Model, Value};
use crate::sexpr::{canonical_key, parse_expr, print_expr, ParseError, Signature};

/// A discourse interpretation principle: a rewriting default rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiPrinciple {
    pub name: String,
    /// The triggering wff pattern (alpha).
    pub trigger: Expr,
    /// The contextual requirement (beta); `None` is the empty context,
    /// which the anti-random validator rejects.
    pub context: Option<Expr>,
    /// The justification (delta): assuming it must be consistent.
    pub justification: Expr,
    /// The rewrite result (sigma) replacing the trigger.
    pub rewrite: Expr,
    /// Additional wffs (tau) inserted on application.
    pub additions: Vec<Expr>,
}

impl DiPrinciple {
    /// A default is normal when its justification and rewrite result
    /// coincide.
    pub fn is_normal(&self) -> bool {
        alpha_eq(&self.justification, &self.rewrite)
    }

    fn metas(e: &Expr, out: &mut BTreeSet<String>) {
        match e {
            Expr::Meta(n) => {
                out.insert(n.clone());
            }
            Expr::Const { .. } | Expr::Var { .. } => {}
            Expr::Param { anchor, .. } => {
                if let Some(a) = anchor {
                    DiPrinciple::metas(a, out);
                }
            }
            Expr::App { fun, arg } => {
                DiPrinciple::metas(fun, out);
                DiPrinciple::metas(arg, out);
            }
            Expr::Lambda { body, .. } => DiPrinciple::metas(body, out),
            Expr::Not(x) => DiPrinciple::metas(x, out),
            Expr::And(a, b) | Expr::Eq(a, b) => {
                DiPrinciple::metas(a, out);
                DiPrinciple::metas(b, out);
            }
            Expr::Quant {
                restrictor, scope, ..
            } => {
                DiPrinciple::metas(restrictor, out);
                DiPrinciple::metas(scope, out);
            }
            Expr::LfNode { children, .. } => {
                for c in children {
                    DiPrinciple::metas(c, out);
                }
            }
        }
    }

    fn validate(&self) -> Result<(), RulesError> {
        let mut trigger_metas = BTreeSet::new();
        DiPrinciple::metas(&self.trigger, &mut trigger_metas);
        let mut others = BTreeSet::new();
        if let Some(c) = &self.context {
            DiPrinciple::metas(c, &mut others);
        }
        DiPrinciple::metas(&self.justification, &mut others);
        DiPrinciple::metas(&self.rewrite, &mut others);
        for a in &self.additions {
            DiPrinciple::metas(a, &mut others);
        }
        if let Some(loose) = others.difference(&trigger_metas).next() {
            return Err(RulesError::Schema(format!(
                "rule {}: metavariable ?{loose} does not appear in the trigger",
                self.name
            )));
        }
        Ok(())
    }
}

/// A default theory: rules plus underspecified wffs, interpreted
/// against a model and a discourse situation.
#[derive(Debug, Clone)]
pub struct Theory {
    pub rules: Vec<DiPrinciple>,
    pub uf: BTreeSet<Wff>,
    pub model: Model,
    pub discourse: DiscourseSituation,
}

/// An extension: a fixed point of the closure-free operator satisfying
/// the condition on discourse interpretation, with the rule
/// applications that produced it and a consistency flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub wffs: BTreeSet<Wff>,
    pub trace: Vec<TraceStep>,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: String,
    pub binding: Binding,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rule)?;
        if !self.binding.is_empty() {
            let parts: Vec<String> = self
                .binding
                .iter()
                .map(|(k, v)| format!("?{k} = {}", print_expr(v)))
                .collect();
            write!(f, " [{}]", parts.join(", "))?;
        }
        Ok(())
    }
}

pub type Binding = BTreeMap<String, Expr>;

/// One way a rule's trigger matches the current wff set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerMatch {
    pub binding: Binding,
    /// Index of the matched wff in the canonically ordered state.
    pub wff_index: usize,
    /// Index of the matched conjunct inside that wff (0 for the whole
    /// wff when it is not a conjunction).
    pub conjunct_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AntiRandomPolicy {
    /// Reject theories containing a trivial-context rule.
    #[default]
    Reject,
    /// Proceed; callers surface violations as warnings.
    Warn,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Rule-application budget for the exhaustive search.
    pub max_steps: usize,
    pub anti_random: AntiRandomPolicy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_steps: 10_000,
            anti_random: AntiRandomPolicy::Reject,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("rule application blocked: {0} is present")]
    Blocked(String),
    #[error("rule {0} violates the anti-random hypothesis (trivial context)")]
    AntiRandom(String),
    #[error("application budget of {0} steps exceeded")]
    NonTermination(usize),
    #[error("anchor target is an unanchored parameter: {0}")]
    UnanchoredAnchor(String),
    #[error("anchor target must have type e, found {0}")]
    AnchorType(String),
    #[error("trigger instance not present in the wff set")]
    NoSuchTrigger,
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("scope machinery failed: {0}")]
    Cooper(#[from] CooperError),
}

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid rules json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("rules schema violation: {0}")]
    Schema(String),
    #[error("rule {name}: {field}: {source}")]
    Pattern {
        name: String,
        field: String,
        source: ParseError,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    rules: Vec<RuleFileEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFileEntry {
    name: String,
    trigger: String,
    #[serde(default)]
    context: Option<String>,
    just: String,
    rewrite: String,
    #[serde(default)]
    add: Vec<String>,
}

/// Load a rule file; patterns use the textual expression syntax with
/// `?x` metavariables.
pub fn load_rules(path: impl AsRef<Path>, sig: &Signature) -> Result<Vec<DiPrinciple>, RulesError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| RulesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    rules_from_json(&text, sig)
}

pub fn rules_from_json(text: &str, sig: &Signature) -> Result<Vec<DiPrinciple>, RulesError> {
    let file: RulesFile = serde_json::from_str(text)?;
    let mut names = BTreeSet::new();
    let mut out = Vec::new();
    for r in file.rules {
        if !names.insert(r.name.clone()) {
            return Err(RulesError::Schema(format!("duplicate rule name {}", r.name)));
        }
        let parse_field = |field: &str, src: &str| -> Result<Expr, RulesError> {
            parse_expr(src, sig).map_err(|source| RulesError::Pattern {
                name: r.name.clone(),
                field: field.to_string(),
                source,
            })
        };
        let trigger = parse_field("trigger", &r.trigger)?;
        let context = match &r.context {
            None => None,
            Some(c) if c.trim().is_empty() => None,
            Some(c) => Some(parse_field("context", c)?),
        };
        let justification = parse_field("just", &r.just)?;
        let rewrite = parse_field("rewrite", &r.rewrite)?;
        let mut additions = Vec::new();
        for (i, a) in r.add.iter().enumerate() {
            additions.push(parse_field(&format!("add[{i}]"), a)?);
        }
        let rule = DiPrinciple {
            name: r.name,
            trigger,
            context,
            justification,
            rewrite,
            additions,
        };
        rule.validate()?;
        out.push(rule);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pattern matching and instantiation
// ---------------------------------------------------------------------------

fn match_pattern(
    pattern: &Expr,
    target: &Expr,
    binding: &mut Binding,
    pairs: &mut Vec<(String, String)>,
) -> bool {
    match (pattern, target) {
        (Expr::Meta(name), t) => {
            // A capture across the pattern's binders would be unsound.
            let scope: BTreeSet<&String> = pairs.iter().map(|(_, y)| y).collect();
            if t.free_vars().keys().any(|v| scope.contains(v)) {
                return false;
            }
            match binding.get(name) {
                Some(prev) => alpha_eq(prev, t),
                None => {
                    binding.insert(name.clone(), t.clone());
                    true
                }
            }
        }
        (
            Expr::Const {
                name: n1,
                ty: t1,
                underspecified: u1,
            },
            Expr::Const {
                name: n2,
                ty: t2,
                underspecified: u2,
            },
        ) => n1 == n2 && t1 == t2 && u1 == u2,
        (Expr::Var { name: n1, ty: t1 }, Expr::Var { name: n2, ty: t2 }) => {
            if t1 != t2 {
                return false;
            }
            for (x, y) in pairs.iter().rev() {
                let lx = x == n1;
                let ly = y == n2;
                if lx || ly {
                    return lx && ly;
                }
            }
            n1 == n2
        }
        (
            Expr::Param {
                name: n1,
                anchor: a1,
            },
            Expr::Param {
                name: n2,
                anchor: a2,
            },
        ) => {
            n1 == n2
                && match (a1, a2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => match_pattern(x, y, binding, pairs),
                    _ => false,
                }
        }
        (Expr::App { fun: f1, arg: a1 }, Expr::App { fun: f2, arg: a2 }) => {
            match_pattern(f1, f2, binding, pairs) && match_pattern(a1, a2, binding, pairs)
        }
        (
            Expr::Lambda {
                var: v1,
                var_ty: t1,
                body: b1,
            },
            Expr::Lambda {
                var: v2,
                var_ty: t2,
                body: b2,
            },
        ) => {
            if t1 != t2 {
                return false;
            }
            pairs.push((v1.clone(), v2.clone()));
            let r = match_pattern(b1, b2, binding, pairs);
            pairs.pop();
            r
        }
        (Expr::Not(x), Expr::Not(y)) => match_pattern(x, y, binding, pairs),
        (Expr::And(x1, y1), Expr::And(x2, y2)) | (Expr::Eq(x1, y1), Expr::Eq(x2, y2)) => {
            match_pattern(x1, x2, binding, pairs) && match_pattern(y1, y2, binding, pairs)
        }
        (
            Expr::Quant {
                det: d1,
                var: v1,
                restrictor: r1,
                scope: s1,
            },
            Expr::Quant {
                det: d2,
                var: v2,
                restrictor: r2,
                scope: s2,
            },
        ) => {
            if d1 != d2 {
                return false;
            }
            pairs.push((v1.clone(), v2.clone()));
            let r = match_pattern(r1, r2, binding, pairs)
                && match_pattern(s1, s2, binding, pairs);
            pairs.pop();
            r
        }
        (
            Expr::LfNode {
                cat: c1,
                children: k1,
            },
            Expr::LfNode {
                cat: c2,
                children: k2,
            },
        ) => {
            c1 == c2
                && k1.len() == k2.len()
                && k1
                    .iter()
                    .zip(k2.iter())
                    .all(|(p, t)| match_pattern(p, t, binding, pairs))
        }
        _ => false,
    }
}

/// Substitute a binding into a pattern, renaming the pattern's binders
/// away from the bound subtrees' free variables.
fn instantiate(pattern: &Expr, binding: &Binding) -> Expr {
    let mut avoid: BTreeSet<String> = BTreeSet::new();
    for v in binding.values() {
        avoid.extend(v.free_vars().keys().cloned());
    }
    inst_inner(pattern, binding, &avoid, &BTreeMap::new())
}

fn inst_inner(
    pattern: &Expr,
    binding: &Binding,
    avoid: &BTreeSet<String>,
    ren: &BTreeMap<String, String>,
) -> Expr {
    match pattern {
        Expr::Meta(name) => binding
            .get(name)
            .cloned()
            .unwrap_or_else(|| Expr::Meta(name.clone())),
        Expr::Const { .. } => pattern.clone(),
        Expr::Var { name, ty } => match ren.get(name) {
            Some(n) => Expr::Var {
                name: n.clone(),
                ty: ty.clone(),
            },
            None => pattern.clone(),
        },
        Expr::Param { name, anchor } => Expr::Param {
            name: name.clone(),
            anchor: anchor
                .as_ref()
                .map(|a| Box::new(inst_inner(a, binding, avoid, ren))),
        },
        Expr::App { fun, arg } => expr::app(
            inst_inner(fun, binding, avoid, ren),
            inst_inner(arg, binding, avoid, ren),
        ),
        Expr::Lambda { var, var_ty, body } => {
            let (nv, ren2) = rebind(var, avoid, ren);
            expr::lam(&nv, var_ty.clone(), inst_inner(body, binding, avoid, &ren2))
        }
        Expr::Not(x) => expr::not(inst_inner(x, binding, avoid, ren)),
        Expr::And(a, b) => expr::and(
            inst_inner(a, binding, avoid, ren),
            inst_inner(b, binding, avoid, ren),
        ),
        Expr::Eq(a, b) => expr::eq(
            inst_inner(a, binding, avoid, ren),
            inst_inner(b, binding, avoid, ren),
        ),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => {
            let (nv, ren2) = rebind(var, avoid, ren);
            expr::quant(
                *det,
                &nv,
                inst_inner(restrictor, binding, avoid, &ren2),
                inst_inner(scope, binding, avoid, &ren2),
            )
        }
        Expr::LfNode { cat, children } => expr::lf(
            *cat,
            children
                .iter()
                .map(|c| inst_inner(c, binding, avoid, ren))
                .collect(),
        ),
    }
}

fn rebind(
    var: &str,
    avoid: &BTreeSet<String>,
    ren: &BTreeMap<String, String>,
) -> (String, BTreeMap<String, String>) {
    let mut ren2 = ren.clone();
    if avoid.contains(var) {
        let mut all: BTreeSet<String> = avoid.clone();
        all.extend(ren.values().cloned());
        let nv = fresh_name(var, &all);
        ren2.insert(var.to_string(), nv.clone());
        (nv, ren2)
    } else {
        ren2.remove(var);
        (var.to_string(), ren2)
    }
}

// ---------------------------------------------------------------------------
// State handling
// ---------------------------------------------------------------------------

/// Canonically ordered wff-set state.
#[derive(Debug, Clone, PartialEq, Eq)]
struct State {
    wffs: Vec<Wff>,
}

impl State {
    fn from_set(ws: &BTreeSet<Wff>) -> Result<State, EngineError> {
        let mut wffs = Vec::new();
        for w in ws {
            wffs.push(normalize_wff(w)?);
        }
        Ok(State::from_vec(wffs))
    }

    fn from_vec(mut wffs: Vec<Wff>) -> State {
        wffs.sort_by_key(canonical_key);
        wffs.dedup_by(|a, b| alpha_eq(a, b));
        State { wffs }
    }

    fn key(&self) -> String {
        let parts: Vec<String> = self.wffs.iter().map(canonical_key).collect();
        parts.join("\u{2}")
    }

    fn to_set(&self) -> BTreeSet<Wff> {
        self.wffs.iter().cloned().collect()
    }

    /// Membership up to alpha-equivalence, at top level or as a
    /// conjunct of a top-level conjunction.
    fn holds(&self, w: &Expr) -> bool {
        self.wffs.iter().any(|member| {
            alpha_eq(member, w) || expr::conjuncts(member).iter().any(|c| alpha_eq(c, w))
        })
    }
}

/// Normalize a wff: beta-reduce, collapse applied determiner constants
/// back into restricted-quantifier form, replace every maximal embedded
/// sentence-level logical form that has exactly one reading with that
/// reading (no choice is left there), and re-associate conjunctions to
/// the right.
fn normalize_wff(w: &Wff) -> Result<Wff, EngineError> {
    let sugared = expr::normalize_determiners(&expr::resugar_quant(&beta_reduce(w)));
    let resolved = resolve_unique_lfs(&beta_reduce(&sugared))?;
    Ok(reassoc_conj(&resolved))
}

fn resolve_unique_lfs(e: &Expr) -> Result<Expr, EngineError> {
    match e {
        Expr::LfNode { cat: LfCat::S, .. } => {
            let rs = cooper::readings(e)?;
            if rs.len() == 1 {
                let r = beta_reduce(&rs[0]);
                // The reading is built from leaf translations and
                // contains no logical form, but normalize again in case
                // sugar interacted.
                resolve_unique_lfs(&r)
            } else {
                Ok(e.clone())
            }
        }
        Expr::LfNode { .. } => Ok(e.clone()),
        Expr::Const { .. } | Expr::Var { .. } | Expr::Param { .. } | Expr::Meta(_) => {
            Ok(e.clone())
        }
        Expr::App { fun, arg } => Ok(expr::app(
            resolve_unique_lfs(fun)?,
            resolve_unique_lfs(arg)?,
        )),
        Expr::Lambda { var, var_ty, body } => Ok(expr::lam(
            var,
            var_ty.clone(),
            resolve_unique_lfs(body)?,
        )),
        Expr::Not(x) => Ok(expr::not(resolve_unique_lfs(x)?)),
        Expr::And(a, b) => Ok(expr::and(
            resolve_unique_lfs(a)?,
            resolve_unique_lfs(b)?,
        )),
        Expr::Eq(a, b) => Ok(expr::eq(resolve_unique_lfs(a)?, resolve_unique_lfs(b)?)),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => Ok(expr::quant(
            *det,
            var,
            resolve_unique_lfs(restrictor)?,
            resolve_unique_lfs(scope)?,
        )),
    }
}

fn reassoc_conj(e: &Expr) -> Expr {
    match e {
        Expr::And(_, _) => {
            let parts: Vec<Expr> = expr::conjuncts(e).into_iter().cloned().collect();
            let mut acc = parts.last().expect("conjunction has parts").clone();
            for p in parts.iter().rev().skip(1) {
                acc = expr::and(p.clone(), acc);
            }
            acc
        }
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------------
// Engine operations
// ---------------------------------------------------------------------------

/// All bindings under which the rule's trigger matches a member of the
/// set (or a conjunct of one) and the instantiated context is present.
pub fn match_trigger(rule: &DiPrinciple, ws: &BTreeSet<Wff>) -> Vec<TriggerMatch> {
    let state = match State::from_set(ws) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    match_trigger_state(rule, &state)
}

/// Matchable components of a wff: the wff itself (index 0), then each
/// conjunct of a top-level conjunction (indices 1..).
fn components(w: &Expr) -> Vec<&Expr> {
    let mut out = vec![w];
    if matches!(w, Expr::And(_, _)) {
        out.extend(expr::conjuncts(w));
    }
    out
}

fn match_trigger_state(rule: &DiPrinciple, state: &State) -> Vec<TriggerMatch> {
    let mut out = Vec::new();
    for (wff_index, w) in state.wffs.iter().enumerate() {
        let components = components(w);
        for (conjunct_index, component) in components.iter().enumerate() {
            let mut binding = Binding::new();
            let mut pairs = Vec::new();
            if !match_pattern(&rule.trigger, component, &mut binding, &mut pairs) {
                continue;
            }
            if let Some(ctx) = &rule.context {
                let ctx_inst = instantiate(ctx, &binding);
                if ctx_inst.has_meta() || !state.holds(&ctx_inst) {
                    continue;
                }
            }
            let tm = TriggerMatch {
                binding,
                wff_index,
                conjunct_index,
            };
            if !out.contains(&tm) {
                out.push(tm);
            }
        }
    }
    out.sort_by(|a, b| {
        let ka = (a.wff_index, a.conjunct_index, binding_key(&a.binding));
        let kb = (b.wff_index, b.conjunct_index, binding_key(&b.binding));
        ka.cmp(&kb)
    });
    out
}

fn binding_key(b: &Binding) -> String {
    b.iter()
        .map(|(k, v)| format!("{k}={}", canonical_key(v)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Apply one rule under a trigger match: the matched component is
/// replaced by the instantiated rewrite result, and the additions are
/// inserted. Blocked if the negated justification is present.
pub fn apply_rule(
    rule: &DiPrinciple,
    tm: &TriggerMatch,
    ws: &BTreeSet<Wff>,
) -> Result<BTreeSet<Wff>, EngineError> {
    let state = State::from_set(ws)?;
    Ok(apply_rule_state(rule, tm, &state)?.to_set())
}

fn apply_rule_state(
    rule: &DiPrinciple,
    tm: &TriggerMatch,
    state: &State,
) -> Result<State, EngineError> {
    let neg_just = expr::not(instantiate(&rule.justification, &tm.binding));
    if state.holds(&neg_just) {
        return Err(EngineError::Blocked(print_expr(&neg_just)));
    }
    let w = state
        .wffs
        .get(tm.wff_index)
        .ok_or(EngineError::NoSuchTrigger)?;
    let comps = components(w);
    let target = comps
        .get(tm.conjunct_index)
        .copied()
        .ok_or(EngineError::NoSuchTrigger)?;
    // Verify the match still holds at this occurrence.
    {
        let mut b = Binding::new();
        let mut pairs = Vec::new();
        if !match_pattern(&rule.trigger, target, &mut b, &mut pairs) || b != tm.binding {
            return Err(EngineError::NoSuchTrigger);
        }
    }
    let sigma = normalize_wff(&instantiate(&rule.rewrite, &tm.binding))?;
    let replaced = if tm.conjunct_index == 0 {
        sigma
    } else {
        let mut parts: Vec<Expr> = expr::conjuncts(w).into_iter().cloned().collect();
        parts[tm.conjunct_index - 1] = sigma;
        let mut acc = parts.pop().expect("nonempty");
        for c in parts.into_iter().rev() {
            acc = expr::and(c, acc);
        }
        acc
    };
    let mut wffs: Vec<Wff> = state.wffs.clone();
    wffs[tm.wff_index] = normalize_wff(&replaced)?;
    for t in &rule.additions {
        wffs.push(normalize_wff(&instantiate(t, &tm.binding))?);
    }
    Ok(State::from_vec(wffs))
}

/// The condition on discourse interpretation: no member may be H-type
/// ambiguous.
pub fn check_cdi(ws: &BTreeSet<Wff>) -> bool {
    ws.iter().all(|w| !is_h_ambiguous(w))
}

/// The anti-random validator: true iff the rule's contextual
/// requirement is non-trivial, i.e. not satisfied by every sense at
/// every discourse situation under every entity instantiation. An
/// empty context is immediately trivial.
pub fn is_anti_random(
    rule: &DiPrinciple,
    m: &Model,
    d: &DiscourseSituation,
) -> Result<bool, EngineError> {
    let ctx = match &rule.context {
        None => return Ok(false),
        Some(c) => c,
    };
    let mut metas = BTreeSet::new();
    DiPrinciple::metas(ctx, &mut metas);
    let metas: Vec<String> = metas.into_iter().collect();

    // Instantiate entity metavariables with fresh constants, one per
    // universe entity.
    let mut probe = m.clone();
    let mut entity_consts = Vec::new();
    for e in m.universe.iter() {
        let name = format!("_probe_{e}");
        probe.add_entity_constant(&name, e);
        entity_consts.push(expr::con(&name, SemType::E));
    }

    let mut bindings: Vec<Binding> = vec![Binding::new()];
    for mv in &metas {
        let mut next = Vec::new();
        for b in &bindings {
            for c in &entity_consts {
                let mut b2 = b.clone();
                b2.insert(mv.clone(), c.clone());
                next.push(b2);
            }
        }
        bindings = next;
    }

    let mut saw_evaluable = false;
    for b in &bindings {
        let inst = beta_reduce(&instantiate(ctx, b));
        if inst.has_meta() {
            continue;
        }
        let env = inst.free_vars();
        match crate::expr::type_of(&inst, &env) {
            Ok(SemType::T) => {}
            _ => continue,
        }
        if !env.is_empty() {
            continue;
        }
        let den = match crate::model::denote(&inst, &probe, d) {
            Ok(den) => den,
            Err(_) => continue,
        };
        saw_evaluable = true;
        for sense in &den.senses {
            for sid in &d.situations {
                if sense.at(sid) != Value::Truth(true) {
                    return Ok(true);
                }
            }
        }
    }
    if !saw_evaluable {
        // Contexts with non-entity metavariables cannot be probed over
        // a finite universe; give them the benefit of the doubt.
        return Ok(true);
    }
    Ok(false)
}

struct Search<'a> {
    theory: &'a Theory,
    memo: BTreeMap<String, Vec<Quiescent>>,
    /// States on the current path: a rewrite loop revisits one, and
    /// any fixed point reachable through the loop is reachable without
    /// it (with fewer justification obligations), so loop edges are
    /// skipped.
    on_stack: BTreeSet<String>,
    steps: usize,
    max_steps: usize,
}

#[derive(Debug, Clone)]
struct Quiescent {
    state: State,
    suffix_trace: Vec<TraceStep>,
    neg_justs: Vec<Expr>,
}

impl<'a> Search<'a> {
    /// Explore from a state. The second component marks results
    /// computed under a skipped loop edge; those are correct for the
    /// current path but must not be memoized, since another path could
    /// reach this state with the loop target off the stack.
    fn run(&mut self, state: &State) -> Result<(Vec<Quiescent>, bool), EngineError> {
        let key = state.key();
        if let Some(found) = self.memo.get(&key) {
            return Ok((found.clone(), false));
        }
        let mut applications = Vec::new();
        for rule in &self.theory.rules {
            for tm in match_trigger_state(rule, state) {
                let neg_just = expr::not(instantiate(&rule.justification, &tm.binding));
                if state.holds(&neg_just) {
                    continue;
                }
                let next = apply_rule_state(rule, &tm, state)?;
                if next == *state {
                    continue;
                }
                applications.push((rule, tm, neg_just, next));
            }
        }
        let mut results: Vec<Quiescent> = Vec::new();
        let mut tainted = false;
        if applications.is_empty() {
            results.push(Quiescent {
                state: state.clone(),
                suffix_trace: Vec::new(),
                neg_justs: Vec::new(),
            });
        } else {
            self.on_stack.insert(key.clone());
            let mut walked = Ok(());
            for (rule, tm, neg_just, next) in applications {
                self.steps += 1;
                if self.steps > self.max_steps {
                    walked = Err(EngineError::NonTermination(self.max_steps));
                    break;
                }
                if self.on_stack.contains(&next.key()) {
                    // A rewrite loop: anything reachable through it is
                    // reachable from the looped ancestor directly.
                    tainted = true;
                    continue;
                }
                let step = TraceStep {
                    rule: rule.name.clone(),
                    binding: tm.binding.clone(),
                };
                let (sub, sub_tainted) = match self.run(&next) {
                    Ok(r) => r,
                    Err(e) => {
                        walked = Err(e);
                        break;
                    }
                };
                tainted |= sub_tainted;
                for q in sub {
                    let mut suffix_trace = vec![step.clone()];
                    suffix_trace.extend(q.suffix_trace);
                    let mut neg_justs = vec![neg_just.clone()];
                    neg_justs.extend(q.neg_justs);
                    results.push(Quiescent {
                        state: q.state,
                        suffix_trace,
                        neg_justs,
                    });
                }
            }
            self.on_stack.remove(&key);
            walked?;
        }
        if !tainted {
            self.memo.insert(key, results.clone());
        }
        Ok((results, tainted))
    }
}

impl Theory {
    /// The underspecified wffs must be closed, of type t, and built
    /// from constants the model interprets.
    pub fn validate(&self) -> Result<(), EngineError> {
        for w in &self.uf {
            let w = normalize_wff(w)?;
            let env = std::collections::BTreeMap::new();
            let t = crate::expr::type_of(&w, &env)?;
            if t != SemType::T {
                return Err(EngineError::Type(TypeError::TypeMismatch {
                    expected: "t".into(),
                    found: t.to_string(),
                    context: "theory wff".into(),
                }));
            }
            let mut names = BTreeSet::new();
            collect_constants(&w, &mut names);
            for name in names {
                let known = self.model.entity_of(&name).is_some()
                    || self.model.predicate_senses(&name).is_some();
                if !known {
                    return Err(EngineError::Eval(EvalError::UninterpretedConstant(name)));
                }
            }
        }
        Ok(())
    }
}

fn collect_constants(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Const { name, .. } => {
            out.insert(name.clone());
        }
        Expr::Var { .. } | Expr::Meta(_) => {}
        Expr::Param { anchor, .. } => {
            if let Some(a) = anchor {
                collect_constants(a, out);
            }
        }
        Expr::App { fun, arg } => {
            collect_constants(fun, out);
            collect_constants(arg, out);
        }
        Expr::Lambda { body, .. } => collect_constants(body, out),
        Expr::Not(x) => collect_constants(x, out),
        Expr::And(a, b) | Expr::Eq(a, b) => {
            collect_constants(a, out);
            collect_constants(b, out);
        }
        Expr::Quant {
            restrictor, scope, ..
        } => {
            collect_constants(restrictor, out);
            collect_constants(scope, out);
        }
        Expr::LfNode { children, .. } => {
            for c in children {
                collect_constants(c, out);
            }
        }
    }
}

/// Enumerate the extensions of a discourse interpretation theory:
/// exhaustive depth-first search over rule-application orders, each
/// branch run to quiescence; fixed points violating the condition on
/// discourse interpretation are discarded, justifications are
/// re-verified against the final set, and each surviving extension is
/// flagged (not discarded) if inconsistent on the model.
pub fn extensions(theory: &Theory, config: &EngineConfig) -> Result<Vec<Extension>, EngineError> {
    theory.validate()?;
    for rule in &theory.rules {
        if !is_anti_random(rule, &theory.model, &theory.discourse)? {
            match config.anti_random {
                AntiRandomPolicy::Reject => {
                    return Err(EngineError::AntiRandom(rule.name.clone()))
                }
                AntiRandomPolicy::Warn => {}
            }
        }
    }
    let start = State::from_set(&theory.uf)?;
    let mut search = Search {
        theory,
        memo: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        steps: 0,
        max_steps: config.max_steps,
    };
    let (quiescents, _) = search.run(&start)?;

    let mut by_state: BTreeMap<String, Extension> = BTreeMap::new();
    for q in quiescents {
        let ws = q.state.to_set();
        if !check_cdi(&ws) {
            continue;
        }
        // Post-hoc justification check against the final set.
        if q.neg_justs.iter().any(|nj| q.state.holds(nj)) {
            continue;
        }
        let key = q.state.key();
        if by_state.contains_key(&key) {
            continue;
        }
        let consistent =
            crate::model::is_consistent(&ws, &theory.model, &theory.discourse)?;
        by_state.insert(
            key,
            Extension {
                wffs: ws,
                trace: q.suffix_trace,
                consistent,
            },
        );
    }
    Ok(by_state.into_values().collect())
}

/// The number of extensions: more than one signals a perceived
/// ambiguity, zero an interpretation failure.
pub fn perceived_ambiguity(theory: &Theory, config: &EngineConfig) -> Result<usize, EngineError> {
    Ok(extensions(theory, config)?.len())
}

/// Outcome of anchoring a parameter: the rewritten set plus the
/// equality record kept for the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorOutcome {
    pub wffs: BTreeSet<Wff>,
    pub record: Wff,
}

/// Anchor a parameter: replace every occurrence of the parameter in
/// the set by the target term. The target must not be an unanchored
/// parameter.
pub fn anchor_param(
    ws: &BTreeSet<Wff>,
    param_name: &str,
    target: &Expr,
) -> Result<AnchorOutcome, EngineError> {
    if let Expr::Param { name, anchor: None } = target {
        return Err(EngineError::UnanchoredAnchor(name.clone()));
    }
    let t_ty = crate::expr::type_of(target, &target.free_vars())?;
    if t_ty != SemType::E {
        return Err(EngineError::AnchorType(t_ty.to_string()));
    }
    let mut out = BTreeSet::new();
    for w in ws {
        out.insert(replace_param(w, param_name, target));
    }
    let record = expr::eq(
        expr::anchored_param(param_name, target.clone()),
        target.clone(),
    );
    Ok(AnchorOutcome { wffs: out, record })
}

fn replace_param(e: &Expr, param_name: &str, target: &Expr) -> Expr {
    match e {
        Expr::Param { name, .. } if name == param_name => target.clone(),
        Expr::Param { name, anchor } => Expr::Param {
            name: name.clone(),
            anchor: anchor
                .as_ref()
                .map(|a| Box::new(replace_param(a, param_name, target))),
        },
        Expr::Const { .. } | Expr::Var { .. } | Expr::Meta(_) => e.clone(),
        Expr::App { fun, arg } => expr::app(
            replace_param(fun, param_name, target),
            replace_param(arg, param_name, target),
        ),
        Expr::Lambda { var, var_ty, body } => {
            expr::lam(var, var_ty.clone(), replace_param(body, param_name, target))
        }
        Expr::Not(x) => expr::not(replace_param(x, param_name, target)),
        Expr::And(a, b) => expr::and(
            replace_param(a, param_name, target),
            replace_param(b, param_name, target),
        ),
        Expr::Eq(a, b) => expr::eq(
            replace_param(a, param_name, target),
            replace_param(b, param_name, target),
        ),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => expr::quant(
            *det,
            var,
            replace_param(restrictor, param_name, target),
            replace_param(scope, param_name, target),
        ),
        Expr::LfNode { cat, children } => expr::lf(
            *cat,
            children
                .iter()
                .map(|c| replace_param(c, param_name, target))
                .collect(),
        ),
    }
}

/// Normalize a user-supplied wff the way the engine does before
/// matching (exposed for the front end).
pub fn normalize_input_wff(w: &Wff) -> Result<Wff, EngineError> {
    normalize_wff(w)
}
