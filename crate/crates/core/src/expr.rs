//! The typed expression language: types, terms, logical-form nodes,
//! capture-avoiding substitution, beta reduction, and syntactic
//! detection of homonym-style (H-type) ambiguity markers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Semantic types: entities, truth values, and function types.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemType {
    E,
    T,
    Fn(Box<SemType>, Box<SemType>),
}

impl SemType {
    pub fn func(arg: SemType, res: SemType) -> SemType {
        SemType::Fn(Box::new(arg), Box::new(res))
    }

    /// One-place predicate type ⟨e,t⟩.
    pub fn et() -> SemType {
        SemType::func(SemType::E, SemType::T)
    }

    /// Two-place relation type ⟨e,⟨e,t⟩⟩.
    pub fn eet() -> SemType {
        SemType::func(SemType::E, SemType::et())
    }

    /// Three-place relation type ⟨e,⟨e,⟨e,t⟩⟩⟩.
    pub fn eeet() -> SemType {
        SemType::func(SemType::E, SemType::eet())
    }

    /// Generalized quantifier type ⟨⟨e,t⟩,t⟩.
    pub fn gq() -> SemType {
        SemType::func(SemType::et(), SemType::T)
    }

    /// Placeholder binder type ⟨⟨e,t⟩,⟨e,t⟩⟩.
    pub fn placeholder() -> SemType {
        SemType::func(SemType::et(), SemType::et())
    }

    /// Determiner type ⟨⟨e,t⟩,⟨⟨e,t⟩,t⟩⟩.
    pub fn det() -> SemType {
        SemType::func(SemType::et(), SemType::gq())
    }

    /// True for ⟨e,ρ⟩ types: predicates awaiting one or more entity
    /// arguments. Returns the number of entity arguments until `t`.
    pub fn entity_arity(&self) -> Option<usize> {
        match self {
            SemType::T => Some(0),
            SemType::Fn(a, r) if **a == SemType::E => r.entity_arity().map(|n| n + 1),
            _ => None,
        }
    }
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemType::E => write!(f, "e"),
            SemType::T => write!(f, "t"),
            SemType::Fn(a, r) => write!(f, "(fn {} {})", a, r),
        }
    }
}

/// The two determiners of the fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Det {
    Every,
    A,
}

impl Det {
    pub fn name(self) -> &'static str {
        match self {
            Det::Every => "every",
            Det::A => "a",
        }
    }
}

/// Logical-form categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LfCat {
    S,
    Np,
    Vp,
    Det,
    N,
    Pn,
    Iv,
    Tv,
    Dtv,
    Pro,
}

impl LfCat {
    pub fn name(self) -> &'static str {
        match self {
            LfCat::S => "S",
            LfCat::Np => "NP",
            LfCat::Vp => "VP",
            LfCat::Det => "Det",
            LfCat::N => "N",
            LfCat::Pn => "PN",
            LfCat::Iv => "IV",
            LfCat::Tv => "TV",
            LfCat::Dtv => "DTV",
            LfCat::Pro => "PRO",
        }
    }

    pub fn parse(s: &str) -> Option<LfCat> {
        match s {
            "S" => Some(LfCat::S),
            "NP" => Some(LfCat::Np),
            "VP" => Some(LfCat::Vp),
            "Det" => Some(LfCat::Det),
            "N" => Some(LfCat::N),
            "PN" => Some(LfCat::Pn),
            "IV" => Some(LfCat::Iv),
            "TV" => Some(LfCat::Tv),
            "DTV" => Some(LfCat::Dtv),
            "PRO" => Some(LfCat::Pro),
            _ => None,
        }
    }

    /// Expected translation type for lexical (leaf) categories.
    pub fn lexical_type(self) -> Option<SemType> {
        match self {
            LfCat::Pn => Some(SemType::E),
            LfCat::Det => Some(SemType::det()),
            LfCat::N | LfCat::Iv => Some(SemType::et()),
            LfCat::Tv => Some(SemType::eet()),
            LfCat::Dtv => Some(SemType::eeet()),
            LfCat::Pro => Some(SemType::E),
            _ => None,
        }
    }
}

/// A term of the underspecified language, including logical-form nodes.
///
/// `Meta` is a pattern metavariable; it occurs only in rule patterns,
/// never in evaluable expressions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const {
        name: String,
        ty: SemType,
        underspecified: bool,
    },
    Var {
        name: String,
        ty: SemType,
    },
    Param {
        name: String,
        anchor: Option<Box<Expr>>,
    },
    App {
        fun: Box<Expr>,
        arg: Box<Expr>,
    },
    Lambda {
        var: String,
        var_ty: SemType,
        body: Box<Expr>,
    },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Quant {
        det: Det,
        var: String,
        restrictor: Box<Expr>,
        scope: Box<Expr>,
    },
    Eq(Box<Expr>, Box<Expr>),
    LfNode {
        cat: LfCat,
        children: Vec<Expr>,
    },
    Meta(String),
}

/// A well-formed formula: an expression of type `t`. The alias keeps
/// signatures readable; theories are sets of these.
pub type Wff = Expr;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("type mismatch: expected {expected}, found {found} in {context}")]
    TypeMismatch {
        expected: String,
        found: String,
        context: String,
    },
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("logical form [{cat} ...] has malformed children: {detail}")]
    MalformedLf { cat: String, detail: String },
    #[error("pattern metavariable ?{0} cannot be typed")]
    UntypedMeta(String),
}

pub fn con(name: &str, ty: SemType) -> Expr {
    Expr::Const {
        name: name.into(),
        ty,
        underspecified: false,
    }
}

pub fn ucon(name: &str, ty: SemType) -> Expr {
    Expr::Const {
        name: name.into(),
        ty,
        underspecified: true,
    }
}

pub fn var(name: &str, ty: SemType) -> Expr {
    Expr::Var {
        name: name.into(),
        ty,
    }
}

pub fn evar(name: &str) -> Expr {
    var(name, SemType::E)
}

pub fn param(name: &str) -> Expr {
    Expr::Param {
        name: name.into(),
        anchor: None,
    }
}

pub fn anchored_param(name: &str, anchor: Expr) -> Expr {
    Expr::Param {
        name: name.into(),
        anchor: Some(Box::new(anchor)),
    }
}

pub fn app(fun: Expr, arg: Expr) -> Expr {
    Expr::App {
        fun: Box::new(fun),
        arg: Box::new(arg),
    }
}

pub fn app2(fun: Expr, a: Expr, b: Expr) -> Expr {
    app(app(fun, a), b)
}

pub fn lam(var: &str, var_ty: SemType, body: Expr) -> Expr {
    Expr::Lambda {
        var: var.into(),
        var_ty,
        body: Box::new(body),
    }
}

pub fn not(e: Expr) -> Expr {
    Expr::Not(Box::new(e))
}

pub fn and(a: Expr, b: Expr) -> Expr {
    Expr::And(Box::new(a), Box::new(b))
}

pub fn quant(det: Det, var: &str, restrictor: Expr, scope: Expr) -> Expr {
    Expr::Quant {
        det,
        var: var.into(),
        restrictor: Box::new(restrictor),
        scope: Box::new(scope),
    }
}

pub fn forall(var: &str, restrictor: Expr, scope: Expr) -> Expr {
    quant(Det::Every, var, restrictor, scope)
}

pub fn exists(var: &str, restrictor: Expr, scope: Expr) -> Expr {
    quant(Det::A, var, restrictor, scope)
}

pub fn eq(a: Expr, b: Expr) -> Expr {
    Expr::Eq(Box::new(a), Box::new(b))
}

pub fn lf(cat: LfCat, children: Vec<Expr>) -> Expr {
    Expr::LfNode { cat, children }
}

pub fn meta(name: &str) -> Expr {
    Expr::Meta(name.into())
}

/// The placeholder binder λQ.λz.Q(z) placed at the head of a stored
/// sequence.
pub fn placeholder_binder() -> Expr {
    lam(
        "Q",
        SemType::et(),
        lam("z", SemType::E, app(var("Q", SemType::et()), evar("z"))),
    )
}

impl Expr {
    /// Free variables of the expression with their types.
    pub fn free_vars(&self) -> BTreeMap<String, SemType> {
        let mut out = BTreeMap::new();
        self.collect_free(&mut BTreeSet::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut BTreeSet<String>, out: &mut BTreeMap<String, SemType>) {
        match self {
            Expr::Const { .. } | Expr::Meta(_) => {}
            Expr::Param { anchor, .. } => {
                if let Some(a) = anchor {
                    a.collect_free(bound, out);
                }
            }
            Expr::Var { name, ty } => {
                if !bound.contains(name) {
                    out.insert(name.clone(), ty.clone());
                }
            }
            Expr::App { fun, arg } => {
                fun.collect_free(bound, out);
                arg.collect_free(bound, out);
            }
            Expr::Lambda { var, body, .. } => {
                let fresh = bound.insert(var.clone());
                body.collect_free(bound, out);
                if fresh {
                    bound.remove(var);
                }
            }
            Expr::Not(e) => e.collect_free(bound, out),
            Expr::And(a, b) | Expr::Eq(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Quant {
                var,
                restrictor,
                scope,
                ..
            } => {
                let fresh = bound.insert(var.clone());
                restrictor.collect_free(bound, out);
                scope.collect_free(bound, out);
                if fresh {
                    bound.remove(var);
                }
            }
            Expr::LfNode { children, .. } => {
                for c in children {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    /// All variable names occurring anywhere (free or bound); used to
    /// steer fresh-name generation away from collisions.
    pub fn all_var_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const { .. } | Expr::Meta(_) => {}
            Expr::Param { anchor, .. } => {
                if let Some(a) = anchor {
                    a.collect_names(out);
                }
            }
            Expr::Var { name, .. } => {
                out.insert(name.clone());
            }
            Expr::App { fun, arg } => {
                fun.collect_names(out);
                arg.collect_names(out);
            }
            Expr::Lambda { var, body, .. } => {
                out.insert(var.clone());
                body.collect_names(out);
            }
            Expr::Not(e) => e.collect_names(out),
            Expr::And(a, b) | Expr::Eq(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            Expr::Quant {
                var,
                restrictor,
                scope,
                ..
            } => {
                out.insert(var.clone());
                restrictor.collect_names(out);
                scope.collect_names(out);
            }
            Expr::LfNode { children, .. } => {
                for c in children {
                    c.collect_names(out);
                }
            }
        }
    }

    /// True if the expression contains a pattern metavariable.
    pub fn has_meta(&self) -> bool {
        match self {
            Expr::Meta(_) => true,
            Expr::Const { .. } | Expr::Var { .. } => false,
            Expr::Param { anchor, .. } => {
                anchor.as_ref().map(|a| a.has_meta()).unwrap_or(false)
            }
            Expr::App { fun, arg } => fun.has_meta() || arg.has_meta(),
            Expr::Lambda { body, .. } => body.has_meta(),
            Expr::Not(e) => e.has_meta(),
            Expr::And(a, b) | Expr::Eq(a, b) => a.has_meta() || b.has_meta(),
            Expr::Quant {
                restrictor, scope, ..
            } => restrictor.has_meta() || scope.has_meta(),
            Expr::LfNode { children, .. } => children.iter().any(Expr::has_meta),
        }
    }
}

/// Deterministic fresh name: `base` itself if unused, else `base1`,
/// `base2`, ... in order.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let stem: String = base
        .trim_end_matches(|c: char| c.is_ascii_digit())
        .to_string();
    let stem = if stem.is_empty() { "v".to_string() } else { stem };
    for i in 1u64.. {
        let cand = format!("{stem}{i}");
        if !avoid.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// Capture-avoiding substitution of `t` for free occurrences of the
/// variable `v` in `e`. Bound variables are renamed deterministically
/// when they would capture a free variable of `t`.
pub fn substitute(e: &Expr, v: &str, t: &Expr) -> Result<Expr, TypeError> {
    let t_fv: BTreeSet<String> = t.free_vars().keys().cloned().collect();
    Ok(subst_inner(e, v, t, &t_fv))
}

fn subst_inner(e: &Expr, v: &str, t: &Expr, t_fv: &BTreeSet<String>) -> Expr {
    match e {
        Expr::Var { name, .. } if name == v => t.clone(),
        Expr::Var { .. } | Expr::Const { .. } | Expr::Meta(_) => e.clone(),
        Expr::Param { name, anchor } => Expr::Param {
            name: name.clone(),
            anchor: anchor
                .as_ref()
                .map(|a| Box::new(subst_inner(a, v, t, t_fv))),
        },
        Expr::App { fun, arg } => app(
            subst_inner(fun, v, t, t_fv),
            subst_inner(arg, v, t, t_fv),
        ),
        Expr::Lambda { var, var_ty, body } => {
            if var == v {
                e.clone()
            } else if t_fv.contains(var) {
                // Rename the binder away from the incoming free variables.
                let mut avoid: BTreeSet<String> = t_fv.clone();
                avoid.extend(body.all_var_names());
                avoid.insert(v.to_string());
                let new_name = fresh_name(var, &avoid);
                let renamed = subst_inner(body, var, &Expr::Var { name: new_name.clone(), ty: var_ty.clone() }, &BTreeSet::new());
                lam(&new_name, var_ty.clone(), subst_inner(&renamed, v, t, t_fv))
            } else {
                lam(var, var_ty.clone(), subst_inner(body, v, t, t_fv))
            }
        }
        Expr::Not(inner) => not(subst_inner(inner, v, t, t_fv)),
        Expr::And(a, b) => and(subst_inner(a, v, t, t_fv), subst_inner(b, v, t, t_fv)),
        Expr::Eq(a, b) => eq(subst_inner(a, v, t, t_fv), subst_inner(b, v, t, t_fv)),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => {
            if var == v {
                e.clone()
            } else if t_fv.contains(var) {
                let mut avoid: BTreeSet<String> = t_fv.clone();
                avoid.extend(restrictor.all_var_names());
                avoid.extend(scope.all_var_names());
                avoid.insert(v.to_string());
                let new_name = fresh_name(var, &avoid);
                let nv = Expr::Var { name: new_name.clone(), ty: SemType::E };
                let r2 = subst_inner(restrictor, var, &nv, &BTreeSet::new());
                let s2 = subst_inner(scope, var, &nv, &BTreeSet::new());
                quant(
                    *det,
                    &new_name,
                    subst_inner(&r2, v, t, t_fv),
                    subst_inner(&s2, v, t, t_fv),
                )
            } else {
                quant(
                    *det,
                    var,
                    subst_inner(restrictor, v, t, t_fv),
                    subst_inner(scope, v, t, t_fv),
                )
            }
        }
        Expr::LfNode { cat, children } => lf(
            *cat,
            children
                .iter()
                .map(|c| subst_inner(c, v, t, t_fv))
                .collect(),
        ),
    }
}

/// Reduce to beta-normal form (leftmost-outermost). Terminates on the
/// simply-typed fragment.
pub fn beta_reduce(e: &Expr) -> Expr {
    let mut cur = e.clone();
    loop {
        match reduce_once(&cur) {
            Some(next) => cur = next,
            None => return cur,
        }
    }
}

fn reduce_once(e: &Expr) -> Option<Expr> {
    match e {
        Expr::App { fun, arg } => {
            if let Expr::Lambda { var, body, .. } = &**fun {
                return Some(substitute(body, var, arg).expect("substitution is total"));
            }
            if let Some(f2) = reduce_once(fun) {
                return Some(app(f2, (**arg).clone()));
            }
            reduce_once(arg).map(|a2| app((**fun).clone(), a2))
        }
        Expr::Lambda { var, var_ty, body } => {
            reduce_once(body).map(|b2| lam(var, var_ty.clone(), b2))
        }
        Expr::Not(inner) => reduce_once(inner).map(not),
        Expr::And(a, b) => {
            if let Some(a2) = reduce_once(a) {
                return Some(and(a2, (**b).clone()));
            }
            reduce_once(b).map(|b2| and((**a).clone(), b2))
        }
        Expr::Eq(a, b) => {
            if let Some(a2) = reduce_once(a) {
                return Some(eq(a2, (**b).clone()));
            }
            reduce_once(b).map(|b2| eq((**a).clone(), b2))
        }
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => {
            if let Some(r2) = reduce_once(restrictor) {
                return Some(quant(*det, var, r2, (**scope).clone()));
            }
            reduce_once(scope).map(|s2| quant(*det, var, (**restrictor).clone(), s2))
        }
        Expr::LfNode { cat, children } => {
            for (i, c) in children.iter().enumerate() {
                if let Some(c2) = reduce_once(c) {
                    let mut ch = children.clone();
                    ch[i] = c2;
                    return Some(lf(*cat, ch));
                }
            }
            None
        }
        Expr::Param { name, anchor } => anchor.as_ref().and_then(|a| {
            reduce_once(a).map(|a2| Expr::Param {
                name: name.clone(),
                anchor: Some(Box::new(a2)),
            })
        }),
        Expr::Const { .. } | Expr::Var { .. } | Expr::Meta(_) => None,
    }
}

/// Alpha-equivalence: identical up to consistent renaming of bound
/// variables.
pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    alpha_eq_inner(a, b, &mut Vec::new())
}

fn alpha_eq_inner(a: &Expr, b: &Expr, pairs: &mut Vec<(String, String)>) -> bool {
    match (a, b) {
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
            // Last binding wins (shadowing).
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
                    (Some(x), Some(y)) => alpha_eq_inner(x, y, pairs),
                    _ => false,
                }
        }
        (Expr::App { fun: f1, arg: a1 }, Expr::App { fun: f2, arg: a2 }) => {
            alpha_eq_inner(f1, f2, pairs) && alpha_eq_inner(a1, a2, pairs)
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
            let r = alpha_eq_inner(b1, b2, pairs);
            pairs.pop();
            r
        }
        (Expr::Not(x), Expr::Not(y)) => alpha_eq_inner(x, y, pairs),
        (Expr::And(x1, y1), Expr::And(x2, y2)) | (Expr::Eq(x1, y1), Expr::Eq(x2, y2)) => {
            alpha_eq_inner(x1, x2, pairs) && alpha_eq_inner(y1, y2, pairs)
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
            let r = alpha_eq_inner(r1, r2, pairs) && alpha_eq_inner(s1, s2, pairs);
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
                    .all(|(x, y)| alpha_eq_inner(x, y, pairs))
        }
        (Expr::Meta(m1), Expr::Meta(m2)) => m1 == m2,
        _ => false,
    }
}

/// Canonical form under alpha-equivalence: binders renamed to
/// `_v1, _v2, ...` in traversal order. Two expressions are
/// alpha-equivalent iff their normal forms are structurally equal.
pub fn alpha_normalize(e: &Expr) -> Expr {
    let mut counter = 0usize;
    norm_inner(e, &mut counter, &BTreeMap::new())
}

fn norm_inner(e: &Expr, counter: &mut usize, ren: &BTreeMap<String, String>) -> Expr {
    match e {
        Expr::Const { .. } | Expr::Meta(_) => e.clone(),
        Expr::Param { name, anchor } => Expr::Param {
            name: name.clone(),
            anchor: anchor
                .as_ref()
                .map(|a| Box::new(norm_inner(a, counter, ren))),
        },
        Expr::Var { name, ty } => match ren.get(name) {
            Some(n) => Expr::Var {
                name: n.clone(),
                ty: ty.clone(),
            },
            None => e.clone(),
        },
        Expr::App { fun, arg } => app(
            norm_inner(fun, counter, ren),
            norm_inner(arg, counter, ren),
        ),
        Expr::Lambda { var, var_ty, body } => {
            *counter += 1;
            let nv = format!("_v{counter}");
            let mut ren2 = ren.clone();
            ren2.insert(var.clone(), nv.clone());
            lam(&nv, var_ty.clone(), norm_inner(body, counter, &ren2))
        }
        Expr::Not(x) => not(norm_inner(x, counter, ren)),
        Expr::And(a, b) => and(norm_inner(a, counter, ren), norm_inner(b, counter, ren)),
        Expr::Eq(a, b) => eq(norm_inner(a, counter, ren), norm_inner(b, counter, ren)),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => {
            *counter += 1;
            let nv = format!("_v{counter}");
            let mut ren2 = ren.clone();
            ren2.insert(var.clone(), nv.clone());
            quant(
                *det,
                &nv,
                norm_inner(restrictor, counter, &ren2),
                norm_inner(scope, counter, &ren2),
            )
        }
        Expr::LfNode { cat, children } => lf(
            *cat,
            children.iter().map(|c| norm_inner(c, counter, ren)).collect(),
        ),
    }
}

/// The unique type of a well-formed expression, with free variables
/// supplied by `env`.
pub fn type_of(e: &Expr, env: &BTreeMap<String, SemType>) -> Result<SemType, TypeError> {
    match e {
        Expr::Const { ty, .. } => Ok(ty.clone()),
        Expr::Var { name, ty } => match env.get(name) {
            Some(t) if t == ty => Ok(ty.clone()),
            Some(t) => Err(TypeError::TypeMismatch {
                expected: t.to_string(),
                found: ty.to_string(),
                context: format!("variable {name}"),
            }),
            None => Err(TypeError::UnboundVariable(name.clone())),
        },
        Expr::Param { .. } => Ok(SemType::E),
        Expr::App { fun, arg } => {
            let ft = type_of(fun, env)?;
            let at = type_of(arg, env)?;
            match ft {
                SemType::Fn(a, r) if *a == at => Ok(*r),
                SemType::Fn(a, _) => Err(TypeError::TypeMismatch {
                    expected: a.to_string(),
                    found: at.to_string(),
                    context: "application argument".into(),
                }),
                other => Err(TypeError::TypeMismatch {
                    expected: "function type".into(),
                    found: other.to_string(),
                    context: "application head".into(),
                }),
            }
        }
        Expr::Lambda { var, var_ty, body } => {
            let mut env2 = env.clone();
            env2.insert(var.clone(), var_ty.clone());
            let bt = type_of(body, &env2)?;
            Ok(SemType::func(var_ty.clone(), bt))
        }
        Expr::Not(x) => {
            expect_t(x, env, "negand")?;
            Ok(SemType::T)
        }
        Expr::And(a, b) => {
            expect_t(a, env, "conjunct")?;
            expect_t(b, env, "conjunct")?;
            Ok(SemType::T)
        }
        Expr::Eq(a, b) => {
            let ta = type_of(a, env)?;
            let tb = type_of(b, env)?;
            if ta == SemType::E && tb == SemType::E {
                Ok(SemType::T)
            } else {
                Err(TypeError::TypeMismatch {
                    expected: "e".into(),
                    found: format!("{ta} = {tb}"),
                    context: "equality".into(),
                })
            }
        }
        Expr::Quant {
            var,
            restrictor,
            scope,
            ..
        } => {
            let mut env2 = env.clone();
            env2.insert(var.clone(), SemType::E);
            expect_t_in(restrictor, &env2, "quantifier restrictor")?;
            expect_t_in(scope, &env2, "quantifier scope")?;
            Ok(SemType::T)
        }
        Expr::LfNode { cat, children } => lf_type(*cat, children, env),
        Expr::Meta(name) => Err(TypeError::UntypedMeta(name.clone())),
    }
}

fn expect_t(e: &Expr, env: &BTreeMap<String, SemType>, context: &str) -> Result<(), TypeError> {
    expect_t_in(e, env, context)
}

fn expect_t_in(
    e: &Expr,
    env: &BTreeMap<String, SemType>,
    context: &str,
) -> Result<(), TypeError> {
    let t = type_of(e, env)?;
    if t == SemType::T {
        Ok(())
    } else {
        Err(TypeError::TypeMismatch {
            expected: "t".into(),
            found: t.to_string(),
            context: context.into(),
        })
    }
}

fn lf_type(
    cat: LfCat,
    children: &[Expr],
    env: &BTreeMap<String, SemType>,
) -> Result<SemType, TypeError> {
    let bad = |detail: &str| TypeError::MalformedLf {
        cat: cat.name().into(),
        detail: detail.into(),
    };
    let child_cat = |c: &Expr| -> Option<LfCat> {
        match c {
            Expr::LfNode { cat, .. } => Some(*cat),
            _ => None,
        }
    };
    match cat {
        LfCat::Det | LfCat::N | LfCat::Pn | LfCat::Iv | LfCat::Tv | LfCat::Dtv | LfCat::Pro => {
            if children.len() != 1 {
                return Err(bad("lexical node needs exactly one translation child"));
            }
            let want = cat.lexical_type().expect("lexical category");
            let got = type_of(&children[0], env)?;
            if got != want {
                return Err(TypeError::TypeMismatch {
                    expected: want.to_string(),
                    found: got.to_string(),
                    context: format!("translation under {}", cat.name()),
                });
            }
            if cat == LfCat::Pro && !matches!(children[0], Expr::Param { .. }) {
                return Err(bad("PRO translation must be a parameter"));
            }
            Ok(want)
        }
        LfCat::Np => match children {
            [only] => match child_cat(only) {
                Some(LfCat::Pn) | Some(LfCat::Pro) => {
                    lf_type(child_cat(only).unwrap(), lf_children(only), env)?;
                    Ok(SemType::E)
                }
                Some(_) => Err(bad("NP unary child must be PN or PRO")),
                None => {
                    // Bare variable of type e (a scope-extraction residue).
                    let t = type_of(only, env)?;
                    if t == SemType::E && matches!(only, Expr::Var { .. }) {
                        Ok(SemType::E)
                    } else {
                        Err(bad("NP leaf child must be a variable of type e"))
                    }
                }
            },
            [d, n] => {
                match (child_cat(d), child_cat(n)) {
                    (Some(LfCat::Det), Some(LfCat::N)) => {}
                    _ => return Err(bad("binary NP must be [Det N]")),
                }
                lf_type(LfCat::Det, lf_children(d), env)?;
                lf_type(LfCat::N, lf_children(n), env)?;
                Ok(SemType::gq())
            }
            _ => Err(bad("NP arity")),
        },
        LfCat::Vp => match children {
            [only] => match child_cat(only) {
                Some(LfCat::Iv) => {
                    lf_type(LfCat::Iv, lf_children(only), env)?;
                    Ok(SemType::et())
                }
                _ => Err(bad("unary VP child must be IV")),
            },
            [v, np] => {
                match (child_cat(v), child_cat(np)) {
                    (Some(LfCat::Tv), Some(LfCat::Np)) => {}
                    _ => return Err(bad("binary VP must be [TV NP]")),
                }
                lf_type(LfCat::Tv, lf_children(v), env)?;
                lf_type(LfCat::Np, lf_children(np), env)?;
                Ok(SemType::et())
            }
            [v, np1, np2] => {
                match (child_cat(v), child_cat(np1), child_cat(np2)) {
                    (Some(LfCat::Dtv), Some(LfCat::Np), Some(LfCat::Np)) => {}
                    _ => return Err(bad("ternary VP must be [DTV NP NP]")),
                }
                lf_type(LfCat::Dtv, lf_children(v), env)?;
                lf_type(LfCat::Np, lf_children(np1), env)?;
                lf_type(LfCat::Np, lf_children(np2), env)?;
                Ok(SemType::et())
            }
            _ => Err(bad("VP arity")),
        },
        LfCat::S => match children {
            [np, vp] => {
                match (child_cat(np), child_cat(vp)) {
                    (Some(LfCat::Np), Some(LfCat::Vp)) => {}
                    _ => return Err(bad("S must be [NP VP]")),
                }
                lf_type(LfCat::Np, lf_children(np), env)?;
                lf_type(LfCat::Vp, lf_children(vp), env)?;
                Ok(SemType::T)
            }
            _ => Err(bad("S arity")),
        },
    }
}

fn lf_children(e: &Expr) -> &[Expr] {
    match e {
        Expr::LfNode { children, .. } => children,
        _ => &[],
    }
}

/// Syntactic H-type ambiguity: true iff the expression contains an
/// underspecified constant, an unanchored parameter, or a logical-form
/// node (undischarged scope).
pub fn is_h_ambiguous(e: &Expr) -> bool {
    match e {
        Expr::Const { underspecified, .. } => *underspecified,
        Expr::Var { .. } | Expr::Meta(_) => false,
        Expr::Param { anchor, .. } => anchor.is_none(),
        Expr::App { fun, arg } => is_h_ambiguous(fun) || is_h_ambiguous(arg),
        Expr::Lambda { body, .. } => is_h_ambiguous(body),
        Expr::Not(x) => is_h_ambiguous(x),
        Expr::And(a, b) | Expr::Eq(a, b) => is_h_ambiguous(a) || is_h_ambiguous(b),
        Expr::Quant {
            restrictor, scope, ..
        } => is_h_ambiguous(restrictor) || is_h_ambiguous(scope),
        Expr::LfNode { .. } => true,
    }
}

/// Expand the restricted-quantifier sugar: ∀x[Φ;Ψ] becomes
/// every(λx.Φ, λx.Ψ) with `every` an ordinary determiner constant.
pub fn desugar_quant(e: &Expr) -> Expr {
    match e {
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => {
            let d = con(det.name(), SemType::det());
            app2(
                d,
                lam(var, SemType::E, desugar_quant(restrictor)),
                lam(var, SemType::E, desugar_quant(scope)),
            )
        }
        Expr::Const { .. } | Expr::Var { .. } | Expr::Meta(_) => e.clone(),
        Expr::Param { name, anchor } => Expr::Param {
            name: name.clone(),
            anchor: anchor.as_ref().map(|a| Box::new(desugar_quant(a))),
        },
        Expr::App { fun, arg } => app(desugar_quant(fun), desugar_quant(arg)),
        Expr::Lambda { var, var_ty, body } => lam(var, var_ty.clone(), desugar_quant(body)),
        Expr::Not(x) => not(desugar_quant(x)),
        Expr::And(a, b) => and(desugar_quant(a), desugar_quant(b)),
        Expr::Eq(a, b) => eq(desugar_quant(a), desugar_quant(b)),
        Expr::LfNode { cat, children } => {
            lf(*cat, children.iter().map(desugar_quant).collect())
        }
    }
}

/// Inverse of [`desugar_quant`]: collapse every(λx.Φ, λx.Ψ) patterns
/// back into the restricted-quantifier form.
pub fn resugar_quant(e: &Expr) -> Expr {
    if let Expr::App { fun, arg } = e {
        if let Expr::App {
            fun: det_head,
            arg: restr,
        } = &**fun
        {
            if let Expr::Const { name, ty, .. } = &**det_head {
                let det = match name.as_str() {
                    "every" => Some(Det::Every),
                    "a" => Some(Det::A),
                    _ => None,
                };
                if let (Some(det), true) = (det, *ty == SemType::det()) {
                    if let (
                        Expr::Lambda {
                            var: v1, body: b1, ..
                        },
                        Expr::Lambda {
                            var: v2, body: b2, ..
                        },
                    ) = (&**restr, &**arg)
                    {
                        let r = resugar_quant(b1);
                        let s0 = resugar_quant(b2);
                        // Align the two binders on v1.
                        let s = if v1 == v2 {
                            s0
                        } else {
                            substitute(&s0, v2, &evar(v1)).expect("rename")
                        };
                        return quant(det, v1, r, s);
                    }
                }
            }
        }
    }
    match e {
        Expr::Const { .. } | Expr::Var { .. } | Expr::Meta(_) => e.clone(),
        Expr::Param { name, anchor } => Expr::Param {
            name: name.clone(),
            anchor: anchor.as_ref().map(|a| Box::new(resugar_quant(a))),
        },
        Expr::App { fun, arg } => app(resugar_quant(fun), resugar_quant(arg)),
        Expr::Lambda { var, var_ty, body } => lam(var, var_ty.clone(), resugar_quant(body)),
        Expr::Not(x) => not(resugar_quant(x)),
        Expr::And(a, b) => and(resugar_quant(a), resugar_quant(b)),
        Expr::Eq(a, b) => eq(resugar_quant(a), resugar_quant(b)),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => quant(*det, var, resugar_quant(restrictor), resugar_quant(scope)),
        Expr::LfNode { cat, children } => {
            lf(*cat, children.iter().map(resugar_quant).collect())
        }
    }
}

/// Rewrite fully applied determiner constants into the restricted
/// quantifier form so evaluation has a single quantifier clause.
pub fn normalize_determiners(e: &Expr) -> Expr {
    if let Expr::App { fun, arg } = e {
        if let Expr::App { fun: head, arg: restr } = &**fun {
            if let Expr::Const { name, ty, .. } = &**head {
                let det = match name.as_str() {
                    "every" => Some(Det::Every),
                    "a" => Some(Det::A),
                    _ => None,
                };
                if let (Some(det), true) = (det, *ty == SemType::det()) {
                    let restr = normalize_determiners(restr);
                    let scope = normalize_determiners(arg);
                    let mut avoid = restr.all_var_names();
                    avoid.extend(scope.all_var_names());
                    let v = fresh_name("x", &avoid);
                    let vx = evar(&v);
                    return quant(
                        det,
                        &v,
                        app(restr, vx.clone()),
                        app(scope, vx),
                    );
                }
            }
        }
    }
    match e {
        Expr::Const { .. } | Expr::Var { .. } | Expr::Param { .. } | Expr::Meta(_) => e.clone(),
        Expr::App { fun, arg } => app(normalize_determiners(fun), normalize_determiners(arg)),
        Expr::Lambda { var, var_ty, body } => lam(var, var_ty.clone(), normalize_determiners(body)),
        Expr::Not(x) => not(normalize_determiners(x)),
        Expr::And(a, b) => and(normalize_determiners(a), normalize_determiners(b)),
        Expr::Eq(a, b) => eq(normalize_determiners(a), normalize_determiners(b)),
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => quant(*det, var, normalize_determiners(restrictor), normalize_determiners(scope)),
        Expr::LfNode { cat, children } => lf(
            *cat,
            children.iter().map(normalize_determiners).collect(),
        ),
    }
}

/// Flatten a conjunction tree into its conjunct leaves.
pub fn conjuncts(e: &Expr) -> Vec<&Expr> {
    let mut out = Vec::new();
    fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
        match e {
            Expr::And(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            other => out.push(other),
        }
    }
    walk(e, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> Expr {
        con("k", SemType::E)
    }

    fn croak_u() -> Expr {
        ucon("croak_U", SemType::et())
    }

    fn croak_1() -> Expr {
        con("croak_1", SemType::et())
    }

    fn saw() -> Expr {
        con("saw", SemType::eet())
    }

    fn frog() -> Expr {
        con("frog", SemType::et())
    }

    fn dog() -> Expr {
        con("dog", SemType::et())
    }

    #[test]
    fn types_of_leaves_and_application() {
        let env = BTreeMap::new();
        assert_eq!(type_of(&croak_u(), &env), Ok(SemType::et()));
        let mut env_x = BTreeMap::new();
        env_x.insert("x".to_string(), SemType::E);
        assert_eq!(type_of(&evar("x"), &env_x), Ok(SemType::E));
        assert_eq!(type_of(&app(croak_u(), k()), &env), Ok(SemType::T));
    }

    #[test]
    fn application_type_errors() {
        let env = BTreeMap::new();
        let r = type_of(&app(croak_u(), croak_1()), &env);
        assert!(matches!(r, Err(TypeError::TypeMismatch { .. })));
        let r = type_of(&evar("x"), &env);
        assert_eq!(r, Err(TypeError::UnboundVariable("x".into())));
    }

    #[test]
    fn substitute_replaces_free_occurrences() {
        let e = app(croak_u(), evar("x"));
        let got = substitute(&e, "x", &k()).unwrap();
        assert_eq!(got, app(croak_u(), k()));
    }

    #[test]
    fn substitute_avoids_capture() {
        // (lam x. saw(x)(y))[y := x]  ->  lam x1. saw(x1)(x)
        let e = lam("x", SemType::E, app2(saw(), evar("x"), evar("y")));
        let got = substitute(&e, "y", &evar("x")).unwrap();
        let want = lam("x1", SemType::E, app2(saw(), evar("x1"), evar("x")));
        assert_eq!(got, want);
        // And the result is not alpha-equal to the captured version.
        let captured = lam("x", SemType::E, app2(saw(), evar("x"), evar("x")));
        assert!(!alpha_eq(&got, &captured));
    }

    #[test]
    fn substitute_under_quantifier_then_reduce() {
        // (forall x (dog x) (P x))[P := lam z. croak_1 z] beta-reduces to
        // forall x (dog x) (croak_1 x)
        let e = forall(
            "x",
            app(dog(), evar("x")),
            app(var("P", SemType::et()), evar("x")),
        );
        let p = lam("z", SemType::E, app(croak_1(), evar("z")));
        let got = beta_reduce(&substitute(&e, "P", &p).unwrap());
        let want = forall("x", app(dog(), evar("x")), app(croak_1(), evar("x")));
        assert!(alpha_eq(&got, &want));
    }

    #[test]
    fn beta_reduces_determiner_application() {
        // (lam P. lam Q. exists y (P y) (Q y))(frog)(lam w. saw(w)(x))
        //   ->  exists y (frog y) (saw y x)
        let det_a = lam(
            "P",
            SemType::et(),
            lam(
                "Q",
                SemType::et(),
                exists(
                    "y",
                    app(var("P", SemType::et()), evar("y")),
                    app(var("Q", SemType::et()), evar("y")),
                ),
            ),
        );
        let arg = lam("w", SemType::E, app2(saw(), evar("w"), evar("x")));
        let got = beta_reduce(&app2(det_a, frog(), arg));
        let want = exists(
            "y",
            app(frog(), evar("y")),
            app2(saw(), evar("y"), evar("x")),
        );
        assert!(alpha_eq(&got, &want));
    }

    #[test]
    fn beta_identity_and_placeholder() {
        let got = beta_reduce(&app(lam("x", SemType::E, evar("x")), k()));
        assert_eq!(got, k());
        // (lam Q. lam z. Q z)(croak_1) -> lam z. croak_1 z
        let got = beta_reduce(&app(placeholder_binder(), croak_1()));
        let want = lam("z", SemType::E, app(croak_1(), evar("z")));
        assert!(alpha_eq(&got, &want));
    }

    #[test]
    fn alpha_equivalence_cases() {
        let a = forall("x", app(dog(), evar("x")), app(croak_1(), evar("x")));
        let b = forall("y", app(dog(), evar("y")), app(croak_1(), evar("y")));
        assert!(alpha_eq(&a, &b));
        assert!(!alpha_eq(
            &app(croak_1(), k()),
            &app(con("croak_2", SemType::et()), k())
        ));
        // Shadowing must be respected.
        let c = lam("x", SemType::E, lam("x", SemType::E, evar("x")));
        let d = lam("x", SemType::E, lam("y", SemType::E, evar("y")));
        let e2 = lam("x", SemType::E, lam("y", SemType::E, evar("x")));
        assert!(alpha_eq(&c, &d));
        assert!(!alpha_eq(&c, &e2));
    }

    #[test]
    fn alpha_normalize_agrees_with_alpha_eq() {
        let a = forall("x", app(dog(), evar("x")), app(croak_1(), evar("x")));
        let b = forall("q", app(dog(), evar("q")), app(croak_1(), evar("q")));
        assert_eq!(alpha_normalize(&a), alpha_normalize(&b));
    }

    #[test]
    fn h_ambiguity_detection() {
        assert!(is_h_ambiguous(&app(croak_u(), k())));
        assert!(!is_h_ambiguous(&and(
            app(croak_1(), k()),
            app(frog(), k())
        )));
        assert!(is_h_ambiguous(&param("p1")));
        assert!(!is_h_ambiguous(&anchored_param("p1", k())));
        let lf_s = lf(
            LfCat::S,
            vec![
                lf(LfCat::Np, vec![lf(LfCat::Pn, vec![k()])]),
                lf(LfCat::Vp, vec![lf(LfCat::Iv, vec![croak_u()])]),
            ],
        );
        assert!(is_h_ambiguous(&lf_s));
    }

    #[test]
    fn h_ambiguity_monotone_under_embedding() {
        let w = app(croak_u(), k());
        let w2 = app(frog(), k());
        assert!(is_h_ambiguous(&and(w.clone(), w2.clone())));
        assert!(is_h_ambiguous(&and(w2, w)));
    }

    #[test]
    fn quant_desugar_roundtrip() {
        let e = forall(
            "x",
            app(dog(), evar("x")),
            exists(
                "y",
                app(frog(), evar("y")),
                app2(saw(), evar("y"), evar("x")),
            ),
        );
        let back = resugar_quant(&desugar_quant(&e));
        assert!(alpha_eq(&e, &back));
    }

    #[test]
    fn lf_typing_follows_category_signature() {
        let env = BTreeMap::new();
        let s = lf(
            LfCat::S,
            vec![
                lf(LfCat::Np, vec![lf(LfCat::Pn, vec![k()])]),
                lf(LfCat::Vp, vec![lf(LfCat::Iv, vec![croak_u()])]),
            ],
        );
        assert_eq!(type_of(&s, &env), Ok(SemType::T));
        let bad = lf(LfCat::S, vec![lf(LfCat::Np, vec![lf(LfCat::Pn, vec![k()])])]);
        assert!(type_of(&bad, &env).is_err());
        // NP over a bare entity variable (scope-extraction residue).
        let mut env_y = BTreeMap::new();
        env_y.insert("y".to_string(), SemType::E);
        let np_var = lf(LfCat::Np, vec![evar("y")]);
        assert_eq!(type_of(&np_var, &env_y), Ok(SemType::E));
    }

    #[test]
    fn conjunct_flattening() {
        let w = and(
            app(croak_u(), k()),
            and(app(frog(), k()), app(croak_1(), k())),
        );
        let parts = conjuncts(&w);
        assert_eq!(parts.len(), 3);
    }

    #[test]
    fn fresh_names_are_deterministic() {
        let mut avoid = BTreeSet::new();
        avoid.insert("x".to_string());
        avoid.insert("x1".to_string());
        assert_eq!(fresh_name("x", &avoid), "x2");
        assert_eq!(fresh_name("y", &avoid), "y");
    }
}
