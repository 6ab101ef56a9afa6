//! Cooper storage: the value of a logical form is a set of sequences,
//! each a head expression plus stored generalized quantifiers. Scope
//! readings come from choosing, per quantifier, between immediate
//! application and storage; stored operators are applied back at the
//! sentence level (complete discharge enforces the scope constraint).
//!
//! Construct-specific application (`tapply`) buries the differences in
//! storage manipulation. The clauses for the frog fragment (one
//! subject, at most one object) are exact; heads of higher arity from
//! ditransitive verbs extend them slot by slot: an in-place quantifier
//! binds the next open argument position, the subject binds the last,
//! and a stored quantifier at discharge binds the second remaining one.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::expr::{
    alpha_eq, app, beta_reduce, fresh_name, is_h_ambiguous, lam, type_of, Expr, LfCat, SemType,
    TypeError,
};
use crate::sexpr::canonical_key;

/// Application context for `tapply`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cat {
    /// Sentence level: subject meets VP.
    S,
    /// Verb meets its first object.
    Vp,
    /// Ditransitive verb value meets its second object.
    Vp2,
    /// A stored operator is applied back onto a head.
    Discharge,
    /// Any other phrase category: plain typed application.
    Xp,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CooperError {
    #[error("tapply undefined at {cat:?} for types {alpha} and {beta}")]
    Undefined {
        cat: String,
        alpha: String,
        beta: String,
    },
    #[error("combine produced no sequences: every pair was undefined")]
    EmptyResult,
    #[error("storeaway precondition violated: {0}")]
    BadShape(String),
    #[error("malformed logical form: {0}")]
    MalformedLf(String),
    #[error("readings require a sentence-level logical form, found {0}")]
    NotSentential(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// A head expression plus stored operators, all generalized
/// quantifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub head: Expr,
    pub store: Vec<Expr>,
}

impl Sequence {
    pub fn unit(head: Expr) -> Sequence {
        Sequence {
            head,
            store: Vec::new(),
        }
    }

    fn key(&self) -> String {
        let mut k = canonical_key(&self.head);
        for op in &self.store {
            k.push('\u{1}');
            k.push_str(&canonical_key(op));
        }
        k
    }
}

impl std::fmt::Display for Sequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<{}", self.head)?;
        for op in &self.store {
            write!(f, ", {op}")?;
        }
        write!(f, ">")
    }
}

/// A set of sequences (a Cooper value), deduplicated by
/// alpha-equivalence of heads and stores, in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreSet {
    sequences: Vec<Sequence>,
}

impl StoreSet {
    pub fn new() -> StoreSet {
        StoreSet::default()
    }

    pub fn singleton(head: Expr) -> StoreSet {
        let mut s = StoreSet::new();
        s.insert(Sequence::unit(head));
        s
    }

    pub fn insert(&mut self, seq: Sequence) {
        let key = seq.key();
        let pos = self
            .sequences
            .binary_search_by(|probe| probe.key().cmp(&key));
        if let Err(idx) = pos {
            self.sequences.insert(idx, seq);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sequence> {
        self.sequences.iter()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn contains_alpha(&self, seq: &Sequence) -> bool {
        self.sequences.iter().any(|s| {
            alpha_eq(&s.head, &seq.head)
                && s.store.len() == seq.store.len()
                && s.store
                    .iter()
                    .zip(seq.store.iter())
                    .all(|(a, b)| alpha_eq(a, b))
        })
    }
}

impl FromIterator<Sequence> for StoreSet {
    fn from_iter<T: IntoIterator<Item = Sequence>>(iter: T) -> StoreSet {
        let mut s = StoreSet::new();
        for seq in iter {
            s.insert(seq);
        }
        s
    }
}

fn ty_of(e: &Expr) -> Result<SemType, CooperError> {
    let env = e.free_vars();
    Ok(type_of(e, &env)?)
}

fn is_gq(t: &SemType) -> bool {
    *t == SemType::gq()
}

fn is_ph(t: &SemType) -> bool {
    *t == SemType::placeholder()
}

fn undef(cat: Cat, a: &SemType, b: &SemType) -> CooperError {
    CooperError::Undefined {
        cat: format!("{cat:?}"),
        alpha: a.to_string(),
        beta: b.to_string(),
    }
}

fn fresh_vars(n: usize, avoid: &mut BTreeSet<String>, base: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v = fresh_name(base, avoid);
        avoid.insert(v.clone());
        out.push(v);
    }
    out
}

fn evar(name: &str) -> Expr {
    Expr::Var {
        name: name.to_string(),
        ty: SemType::E,
    }
}

fn apply_chain(head: Expr, args: &[Expr]) -> Expr {
    let mut acc = head;
    for a in args {
        acc = app(acc, a.clone());
    }
    acc
}

fn wrap_lambdas(vars: &[String], body: Expr) -> Expr {
    let mut acc = body;
    for v in vars.iter().rev() {
        acc = lam(v, SemType::E, acc);
    }
    acc
}

/// Construct-specific application. Returns the clause result,
/// beta-reduced; an unmatched type pair is `Undefined`.
pub fn tapply(alpha: &Expr, beta: &Expr, cat: Cat) -> Result<Expr, CooperError> {
    let ta = ty_of(alpha)?;
    let tb = ty_of(beta)?;
    let mut avoid: BTreeSet<String> = alpha.all_var_names();
    avoid.extend(beta.all_var_names());
    let result = match cat {
        Cat::S => s_clauses(alpha, beta, &ta, &tb, &mut avoid)?,
        Cat::Discharge => discharge_clauses(alpha, beta, &ta, &tb, &mut avoid)?,
        Cat::Vp => vp_clauses(alpha, beta, &ta, &tb, &mut avoid, false)?,
        Cat::Vp2 => vp_clauses(alpha, beta, &ta, &tb, &mut avoid, true)?,
        Cat::Xp => {
            if let SemType::Fn(dom, _) = &ta {
                if **dom == tb {
                    app(alpha.clone(), beta.clone())
                } else if matches!(&tb, SemType::Fn(d2, _) if **d2 == ta) {
                    app(beta.clone(), alpha.clone())
                } else {
                    return Err(undef(cat, &ta, &tb));
                }
            } else if matches!(&tb, SemType::Fn(d2, _) if **d2 == ta) {
                app(beta.clone(), alpha.clone())
            } else {
                return Err(undef(cat, &ta, &tb));
            }
        }
    };
    Ok(beta_reduce(&result))
}

/// Sentence-level clauses: alpha is the subject value, beta the VP
/// value.
fn s_clauses(
    alpha: &Expr,
    beta: &Expr,
    ta: &SemType,
    tb: &SemType,
    avoid: &mut BTreeSet<String>,
) -> Result<Expr, CooperError> {
    if (is_gq(ta) || is_ph(ta)) && *tb == SemType::et() {
        return Ok(app(alpha.clone(), beta.clone()));
    }
    if *ta == SemType::E && *tb == SemType::et() {
        return Ok(app(beta.clone(), alpha.clone()));
    }
    let arity = tb.entity_arity().unwrap_or(0);
    if arity >= 2 && is_gq(ta) {
        // The subject quantifier binds the last argument slot; the
        // still-open object slots stay abstracted in order.
        let ws = fresh_vars(arity - 1, avoid, "w");
        let z = fresh_vars(1, avoid, "z").pop().unwrap();
        let mut args: Vec<Expr> = ws.iter().map(|w| evar(w)).collect();
        args.push(evar(&z));
        let inner = apply_chain(beta.clone(), &args);
        let body = app(alpha.clone(), lam(&z, SemType::E, inner));
        return Ok(wrap_lambdas(&ws, body));
    }
    if arity >= 2 && is_ph(ta) {
        // Stored subject: reverse the slot order so discharge finds
        // each stored operator's slot in second position.
        let ws = fresh_vars(arity - 1, avoid, "w");
        let z = fresh_vars(1, avoid, "z").pop().unwrap();
        let mut args: Vec<Expr> = vec![evar(&z)];
        for w in ws.iter().rev() {
            args.push(evar(w));
        }
        let inner = apply_chain(beta.clone(), &args);
        let body = app(alpha.clone(), lam(&z, SemType::E, inner));
        return Ok(wrap_lambdas(&ws, body));
    }
    Err(undef(Cat::S, ta, tb))
}

/// Discharge clauses: alpha is a stored generalized quantifier, beta
/// the current head.
fn discharge_clauses(
    alpha: &Expr,
    beta: &Expr,
    ta: &SemType,
    tb: &SemType,
    avoid: &mut BTreeSet<String>,
) -> Result<Expr, CooperError> {
    if !is_gq(ta) {
        return Err(undef(Cat::Discharge, ta, tb));
    }
    if *tb == SemType::et() {
        return Ok(app(alpha.clone(), beta.clone()));
    }
    let arity = tb.entity_arity().unwrap_or(0);
    if arity >= 2 {
        // Bind the second remaining slot.
        let w1 = fresh_vars(1, avoid, "w").pop().unwrap();
        let rest = fresh_vars(arity - 2, avoid, "w");
        let z = fresh_vars(1, avoid, "z").pop().unwrap();
        let mut args: Vec<Expr> = vec![evar(&w1), evar(&z)];
        for w in &rest {
            args.push(evar(w));
        }
        let inner = apply_chain(beta.clone(), &args);
        let body = app(alpha.clone(), lam(&z, SemType::E, inner));
        let mut binders = vec![w1];
        binders.extend(rest);
        return Ok(wrap_lambdas(&binders, body));
    }
    Err(undef(Cat::Discharge, ta, tb))
}

/// Verb-object clauses: alpha is the verb-side value, beta the object
/// value. `second_object` switches to the slot discipline for the
/// second NP of a ditransitive.
fn vp_clauses(
    alpha: &Expr,
    beta: &Expr,
    ta: &SemType,
    tb: &SemType,
    avoid: &mut BTreeSet<String>,
    second_object: bool,
) -> Result<Expr, CooperError> {
    let cat = if second_object { Cat::Vp2 } else { Cat::Vp };
    let arity = match ta.entity_arity() {
        Some(n) if n >= 1 => n,
        _ => return Err(undef(cat, ta, tb)),
    };
    if *tb == SemType::E {
        if !second_object || arity == 2 {
            return Ok(app(alpha.clone(), beta.clone()));
        }
        if arity == 3 {
            let w1 = fresh_vars(1, avoid, "w").pop().unwrap();
            let body = app(app(alpha.clone(), evar(&w1)), beta.clone());
            return Ok(wrap_lambdas(&[w1], body));
        }
        return Err(undef(cat, ta, tb));
    }
    if is_ph(tb) && arity >= 2 {
        // The placeholder head leaves the verb as is (eta-expanded);
        // the quantifier itself sits in the store.
        let ws = fresh_vars(arity - 1, avoid, "w");
        let args: Vec<Expr> = ws.iter().map(|w| evar(w)).collect();
        let partial = apply_chain(alpha.clone(), &args);
        let body = app(beta.clone(), partial);
        return Ok(wrap_lambdas(&ws, body));
    }
    if is_gq(tb) {
        if !second_object || arity == 2 {
            // Immediate application: the quantifier binds the next open
            // slot (the first).
            let ws = fresh_vars(arity - 1, avoid, "r");
            let z = fresh_vars(1, avoid, "z").pop().unwrap();
            let mut args: Vec<Expr> = vec![evar(&z)];
            for w in &ws {
                args.push(evar(w));
            }
            let inner = apply_chain(alpha.clone(), &args);
            let body = app(beta.clone(), lam(&z, SemType::E, inner));
            return Ok(wrap_lambdas(&ws, body));
        }
        if arity == 3 {
            // First object is in store, so the second object binds the
            // second slot.
            let w1 = fresh_vars(1, avoid, "w").pop().unwrap();
            let w3 = fresh_vars(1, avoid, "w").pop().unwrap();
            let z = fresh_vars(1, avoid, "z").pop().unwrap();
            let inner = apply_chain(
                alpha.clone(),
                &[evar(&w1), evar(&z), evar(&w3)],
            );
            let body = app(beta.clone(), lam(&z, SemType::E, inner));
            return Ok(wrap_lambdas(&[w1, w3], body));
        }
    }
    Err(undef(cat, ta, tb))
}

/// Combine two sets of sequences: typed application of head to head,
/// stores merged with the right-hand remainder first. Pairs whose
/// application is undefined are dropped; if every pair is undefined the
/// result is an error.
pub fn combine(x: &StoreSet, y: &StoreSet, cat: Cat) -> Result<StoreSet, CooperError> {
    let mut out = StoreSet::new();
    let mut saw_pair = false;
    for xs in x.iter() {
        for ys in y.iter() {
            saw_pair = true;
            match tapply(&xs.head, &ys.head, cat) {
                Ok(head) => {
                    let mut store = ys.store.clone();
                    store.extend(xs.store.iter().cloned());
                    out.insert(Sequence { head, store });
                }
                Err(CooperError::Undefined { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if saw_pair && out.is_empty() {
        return Err(CooperError::EmptyResult);
    }
    Ok(out)
}

/// Store an operator: from {⟨β⟩} produce {⟨β⟩, ⟨binder, β⟩} with the
/// binder as the new head and β moved into the store.
pub fn storeaway(binder: &Expr, x: &StoreSet) -> Result<StoreSet, CooperError> {
    if x.len() != 1 {
        return Err(CooperError::BadShape(format!(
            "expected a single sequence, found {}",
            x.len()
        )));
    }
    let seq = x.iter().next().expect("singleton");
    if !seq.store.is_empty() {
        return Err(CooperError::BadShape(
            "expected a single-element sequence".into(),
        ));
    }
    let bt = ty_of(binder)?;
    if !is_ph(&bt) {
        return Err(CooperError::BadShape(format!(
            "binder must have the placeholder type, found {bt}"
        )));
    }
    let mut out = StoreSet::new();
    out.insert(seq.clone());
    out.insert(Sequence {
        head: binder.clone(),
        store: vec![seq.head.clone()],
    });
    Ok(out)
}

/// Apply all stored operators back onto the head; the last-stored
/// operator ends up outermost.
pub fn discharge(seq: &Sequence) -> Result<Expr, CooperError> {
    let mut acc = seq.head.clone();
    for op in &seq.store {
        acc = tapply(op, &acc, Cat::Discharge)?;
    }
    Ok(beta_reduce(&acc))
}

fn discharge_star(x: &StoreSet) -> Result<StoreSet, CooperError> {
    let mut out = StoreSet::new();
    for seq in x.iter() {
        out.insert(Sequence::unit(discharge(seq)?));
    }
    Ok(out)
}

fn lf_parts(e: &Expr) -> Result<(LfCat, &[Expr]), CooperError> {
    match e {
        Expr::LfNode { cat, children } => Ok((*cat, children)),
        other => Err(CooperError::MalformedLf(format!(
            "expected a logical-form node, found {}",
            crate::sexpr::print_expr(other)
        ))),
    }
}

/// The Cooper value of a logical form: the clause-directed recursive
/// computation, with complete discharge at the sentence level.
pub fn cooper_value(lf: &Expr) -> Result<StoreSet, CooperError> {
    let (cat, children) = lf_parts(lf)?;
    match cat {
        LfCat::S => match children {
            [np, vp] => discharge_star(&sentence_sequences_inner(np, vp)?),
            _ => Err(CooperError::MalformedLf("S needs [NP VP]".into())),
        },
        LfCat::Np => match children {
            [only] => match only {
                Expr::LfNode {
                    cat: LfCat::Pn | LfCat::Pro,
                    ..
                } => cooper_value(only),
                Expr::Var { ty, .. } if *ty == SemType::E => {
                    Ok(StoreSet::singleton(only.clone()))
                }
                _ => Err(CooperError::MalformedLf(
                    "NP child must be PN, PRO, or an entity variable".into(),
                )),
            },
            [det, n] => {
                let base = combine(&cooper_value(det)?, &cooper_value(n)?, Cat::Xp)?;
                storeaway(&crate::expr::placeholder_binder(), &base)
            }
            _ => Err(CooperError::MalformedLf("NP arity".into())),
        },
        LfCat::Vp => match children {
            [iv] => cooper_value(iv),
            [tv, np] => combine(&cooper_value(tv)?, &cooper_value(np)?, Cat::Vp),
            [dtv, np1, np2] => {
                let first = combine(&cooper_value(dtv)?, &cooper_value(np1)?, Cat::Vp)?;
                combine(&first, &cooper_value(np2)?, Cat::Vp2)
            }
            _ => Err(CooperError::MalformedLf("VP arity".into())),
        },
        LfCat::Det | LfCat::N | LfCat::Pn | LfCat::Iv | LfCat::Tv | LfCat::Dtv | LfCat::Pro => {
            match children {
                [translation] => Ok(StoreSet::singleton(beta_reduce(translation))),
                _ => Err(CooperError::MalformedLf(
                    "lexical node needs exactly one translation".into(),
                )),
            }
        }
    }
}

/// The sentence-level Cooper value before discharge: the raw result of
/// combining the subject and VP values.
pub fn sentence_sequences(lf: &Expr) -> Result<StoreSet, CooperError> {
    let (cat, children) = lf_parts(lf)?;
    if cat != LfCat::S {
        return Err(CooperError::NotSentential(cat.name().to_string()));
    }
    match children {
        [np, vp] => sentence_sequences_inner(np, vp),
        _ => Err(CooperError::MalformedLf("S needs [NP VP]".into())),
    }
}

fn sentence_sequences_inner(np: &Expr, vp: &Expr) -> Result<StoreSet, CooperError> {
    combine(&cooper_value(np)?, &cooper_value(vp)?, Cat::S)
}

/// The scope readings of a sentence-level logical form: the heads of
/// its Cooper value, store-free by construction, deduplicated by
/// alpha-equivalence.
pub fn readings(lf: &Expr) -> Result<Vec<Expr>, CooperError> {
    let (cat, _) = lf_parts(lf)?;
    if cat != LfCat::S {
        return Err(CooperError::NotSentential(cat.name().to_string()));
    }
    let cv = cooper_value(lf)?;
    let mut out = Vec::new();
    for seq in cv.iter() {
        debug_assert!(seq.store.is_empty(), "discharge left a stored operator");
        out.push(seq.head.clone());
    }
    Ok(out)
}

/// True when every reading is a store-free sentential expression: type
/// `t`, no logical-form node inside.
pub fn reading_is_closed_sentential(r: &Expr) -> bool {
    fn no_lf(e: &Expr) -> bool {
        match e {
            Expr::LfNode { .. } => false,
            Expr::Const { .. } | Expr::Var { .. } | Expr::Param { .. } | Expr::Meta(_) => true,
            Expr::App { fun, arg } => no_lf(fun) && no_lf(arg),
            Expr::Lambda { body, .. } => no_lf(body),
            Expr::Not(x) => no_lf(x),
            Expr::And(a, b) | Expr::Eq(a, b) => no_lf(a) && no_lf(b),
            Expr::Quant {
                restrictor, scope, ..
            } => no_lf(restrictor) && no_lf(scope),
        }
    }
    no_lf(r) && ty_of(r).map(|t| t == SemType::T).unwrap_or(false)
}

/// Readings filtered down to those that remain H-type ambiguous only
/// through lexical material (no scope left); exposed for diagnostics.
pub fn lexical_ambiguity_only(r: &Expr) -> bool {
    reading_is_closed_sentential(r) && is_h_ambiguous(r)
}
