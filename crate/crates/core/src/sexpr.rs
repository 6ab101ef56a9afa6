//! Textual expression syntax, s-expression style:
//! `(app croak_U k)`, `(lam x e (app saw x))`,
//! `(forall x (dog x) (croak_1 x))`, `(param p1)`,
//! `(lf S (lf NP ...) (lf VP ...))`, with `?x` metavariables in rule
//! patterns. Application may also be written implicitly, as in
//! `(dog x)` or `(saw y x)` (curried, left to right).
//!
//! Constants are typed by a [`Signature`]; binder types come from
//! annotations or are pushed down from an expected type.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{
    self, anchored_param, app, lam, lf, meta, not, param, quant, type_of, Det, Expr, LfCat,
    SemType, TypeError,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("empty input")]
    Empty,
    #[error("trailing input after expression")]
    Trailing,
    #[error("unknown constant {0}")]
    UnknownConstant(String),
    #[error("reserved word {0} used as a term")]
    ReservedWord(String),
    #[error("{form}: expected {expected} arguments")]
    Arity { form: String, expected: String },
    #[error("unknown logical-form category {0}")]
    UnknownCategory(String),
    #[error("binder {0} needs a type annotation here")]
    AnnotationRequired(String),
    #[error("malformed type {0}")]
    BadType(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

const KEYWORDS: &[&str] = &[
    "app", "lam", "forall", "exists", "not", "and", "eq", "param", "lf", "fn",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Sym(String),
    List(Vec<Sexp>),
}

fn tokenize(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in src.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn read_sexp(tokens: &[String], pos: &mut usize) -> Result<Sexp, ParseError> {
    match tokens.get(*pos) {
        None => Err(ParseError::Empty),
        Some(t) if t == "(" => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err(ParseError::Unbalanced),
                    Some(t) if t == ")" => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(read_sexp(tokens, pos)?),
                }
            }
        }
        Some(t) if t == ")" => Err(ParseError::Unbalanced),
        Some(t) => {
            *pos += 1;
            Ok(Sexp::Sym(t.clone()))
        }
    }
}

/// Constant signature: maps constant names onto their types and
/// underspecified flags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    map: BTreeMap<String, (SemType, bool)>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn declare(&mut self, name: &str, ty: SemType, underspecified: bool) {
        self.map.insert(name.to_string(), (ty, underspecified));
    }

    pub fn lookup(&self, name: &str) -> Option<(&SemType, bool)> {
        self.map.get(name).map(|(t, u)| (t, *u))
    }

    pub fn merge(&mut self, other: &Signature) {
        for (k, v) in &other.map {
            self.map.insert(k.clone(), v.clone());
        }
    }

    /// The constants of the frog-world fragment; tests and examples
    /// build on this.
    pub fn frog_fragment() -> Signature {
        let mut s = Signature::new();
        s.declare("k", SemType::E, false);
        s.declare("dog", SemType::et(), false);
        s.declare("frog", SemType::et(), false);
        s.declare("cat", SemType::et(), false);
        s.declare("croak_U", SemType::et(), true);
        s.declare("croak_1", SemType::et(), false);
        s.declare("croak_2", SemType::et(), false);
        s.declare("human-like", SemType::et(), false);
        s.declare("saw", SemType::eet(), false);
        s.declare("every", SemType::det(), false);
        s.declare("a", SemType::det(), false);
        s
    }
}

/// Parse one expression with no expected type.
pub fn parse_expr(src: &str, sig: &Signature) -> Result<Expr, ParseError> {
    parse_expr_expecting(src, sig, None)
}

/// Parse one expression, pushing an expected type into unannotated
/// binders. A wff parse passes `Some(&SemType::T)`.
pub fn parse_expr_expecting(
    src: &str,
    sig: &Signature,
    expected: Option<&SemType>,
) -> Result<Expr, ParseError> {
    let tokens = tokenize(src);
    let mut pos = 0;
    let sx = read_sexp(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ParseError::Trailing);
    }
    let env = BTreeMap::new();
    elab(&sx, expected, &env, sig)
}

/// Extend a signature by scanning an expression source: an unknown
/// symbol heading an application is taken to be a predicate of the
/// observed arity, an unknown symbol in argument position an entity
/// constant. Used to sanity-check rule files without a model.
pub fn infer_signature(src: &str, base: &Signature) -> Result<Signature, ParseError> {
    let tokens = tokenize(src);
    let mut pos = 0;
    let sx = read_sexp(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ParseError::Trailing);
    }
    let mut sig = base.clone();
    let mut bound = Vec::new();
    infer_walk(&sx, &mut sig, &mut bound, None);
    Ok(sig)
}

fn pred_type_of_arity(n: usize) -> SemType {
    let mut t = SemType::T;
    for _ in 0..n {
        t = SemType::func(SemType::E, t);
    }
    t
}

fn infer_declare(sig: &mut Signature, bound: &[String], name: &str, ty: SemType) {
    if name.starts_with('?')
        || KEYWORDS.contains(&name)
        || name == "e"
        || name == "t"
        || bound.iter().any(|b| b == name)
        || sig.lookup(name).is_some()
    {
        return;
    }
    sig.declare(name, ty, false);
}

fn infer_walk(sx: &Sexp, sig: &mut Signature, bound: &mut Vec<String>, arity: Option<usize>) {
    match sx {
        Sexp::Sym(s) => {
            let ty = match arity {
                Some(n) if n > 0 => pred_type_of_arity(n),
                _ => SemType::E,
            };
            infer_declare(sig, bound, s, ty);
        }
        Sexp::List(items) => {
            let head = match items.first() {
                Some(Sexp::Sym(h)) => Some(h.as_str()),
                _ => None,
            };
            match head {
                Some("app") if items.len() >= 3 => {
                    infer_walk(&items[1], sig, bound, Some(items.len() - 2));
                    for a in &items[2..] {
                        infer_walk(a, sig, bound, None);
                    }
                }
                Some("lam") => {
                    let (var, body) = match items.as_slice() {
                        [_, Sexp::Sym(v), _, b] => (Some(v.clone()), Some(b)),
                        [_, Sexp::Sym(v), b] => (Some(v.clone()), Some(b)),
                        _ => (None, None),
                    };
                    if let (Some(v), Some(b)) = (var, body) {
                        bound.push(v);
                        infer_walk(b, sig, bound, None);
                        bound.pop();
                    }
                }
                Some("forall" | "exists") => {
                    if let [_, Sexp::Sym(v), r, s] = items.as_slice() {
                        bound.push(v.clone());
                        infer_walk(r, sig, bound, None);
                        infer_walk(s, sig, bound, None);
                        bound.pop();
                    }
                }
                Some("not" | "and" | "eq" | "param" | "lf") => {
                    for a in &items[1..] {
                        infer_walk(a, sig, bound, None);
                    }
                }
                Some(_) if items.len() >= 2 => {
                    infer_walk(&items[0], sig, bound, Some(items.len() - 1));
                    for a in &items[1..] {
                        infer_walk(a, sig, bound, None);
                    }
                }
                _ => {
                    for a in items {
                        infer_walk(a, sig, bound, None);
                    }
                }
            }
        }
    }
}

fn parse_type(sx: &Sexp) -> Result<SemType, ParseError> {
    match sx {
        Sexp::Sym(s) if s == "e" => Ok(SemType::E),
        Sexp::Sym(s) if s == "t" => Ok(SemType::T),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Sym(f), a, b] if f == "fn" => {
                Ok(SemType::func(parse_type(a)?, parse_type(b)?))
            }
            _ => Err(ParseError::BadType(print_sexp(sx))),
        },
        Sexp::Sym(s) => Err(ParseError::BadType(s.clone())),
    }
}

fn elab(
    sx: &Sexp,
    expected: Option<&SemType>,
    env: &BTreeMap<String, SemType>,
    sig: &Signature,
) -> Result<Expr, ParseError> {
    match sx {
        Sexp::Sym(s) => elab_sym(s, env, sig),
        Sexp::List(items) => {
            let head = match items.first() {
                Some(Sexp::Sym(h)) => Some(h.as_str()),
                _ => None,
            };
            match head {
                Some("app") => {
                    if items.len() < 3 {
                        return Err(ParseError::Arity {
                            form: "app".into(),
                            expected: "a head and at least one argument".into(),
                        });
                    }
                    elab_application(&items[1], &items[2..], env, sig)
                }
                Some("lam") => match items.as_slice() {
                    [_, Sexp::Sym(v), ty_sx, body] => {
                        let vt = parse_type(ty_sx)?;
                        let mut env2 = env.clone();
                        env2.insert(v.clone(), vt.clone());
                        let inner_expected = match expected {
                            Some(SemType::Fn(a, r)) if **a == vt => Some((**r).clone()),
                            _ => None,
                        };
                        let body = elab(body, inner_expected.as_ref(), &env2, sig)?;
                        Ok(lam(v, vt, body))
                    }
                    [_, Sexp::Sym(v), body] => {
                        let vt = match expected {
                            Some(SemType::Fn(a, _)) => (**a).clone(),
                            _ => return Err(ParseError::AnnotationRequired(v.clone())),
                        };
                        let inner_expected = match expected {
                            Some(SemType::Fn(_, r)) => Some((**r).clone()),
                            _ => None,
                        };
                        let mut env2 = env.clone();
                        env2.insert(v.clone(), vt.clone());
                        let body = elab(body, inner_expected.as_ref(), &env2, sig)?;
                        Ok(lam(v, vt, body))
                    }
                    _ => Err(ParseError::Arity {
                        form: "lam".into(),
                        expected: "(lam var [type] body)".into(),
                    }),
                },
                Some(q @ ("forall" | "exists")) => match items.as_slice() {
                    [_, Sexp::Sym(v), r, s] => {
                        let det = if q == "forall" { Det::Every } else { Det::A };
                        let mut env2 = env.clone();
                        env2.insert(v.clone(), SemType::E);
                        let r = elab(r, Some(&SemType::T), &env2, sig)?;
                        let s = elab(s, Some(&SemType::T), &env2, sig)?;
                        Ok(quant(det, v, r, s))
                    }
                    _ => Err(ParseError::Arity {
                        form: q.into(),
                        expected: "(forall var restrictor scope)".into(),
                    }),
                },
                Some("not") => match items.as_slice() {
                    [_, x] => Ok(not(elab(x, Some(&SemType::T), env, sig)?)),
                    _ => Err(ParseError::Arity {
                        form: "not".into(),
                        expected: "one argument".into(),
                    }),
                },
                Some("and") => {
                    if items.len() < 3 {
                        return Err(ParseError::Arity {
                            form: "and".into(),
                            expected: "at least two conjuncts".into(),
                        });
                    }
                    let mut parts = Vec::new();
                    for it in &items[1..] {
                        parts.push(elab(it, Some(&SemType::T), env, sig)?);
                    }
                    let mut acc = parts.pop().expect("nonempty");
                    while let Some(p) = parts.pop() {
                        acc = expr::and(p, acc);
                    }
                    Ok(acc)
                }
                Some("eq") => match items.as_slice() {
                    [_, a, b] => Ok(expr::eq(
                        elab(a, Some(&SemType::E), env, sig)?,
                        elab(b, Some(&SemType::E), env, sig)?,
                    )),
                    _ => Err(ParseError::Arity {
                        form: "eq".into(),
                        expected: "two arguments".into(),
                    }),
                },
                Some("param") => match items.as_slice() {
                    [_, Sexp::Sym(p)] => Ok(param(p)),
                    [_, Sexp::Sym(p), anchor] => Ok(anchored_param(
                        p,
                        elab(anchor, Some(&SemType::E), env, sig)?,
                    )),
                    _ => Err(ParseError::Arity {
                        form: "param".into(),
                        expected: "(param name [anchor])".into(),
                    }),
                },
                Some("lf") => match items.as_slice() {
                    [_, Sexp::Sym(c), rest @ ..] if !rest.is_empty() => {
                        let cat = LfCat::parse(c)
                            .ok_or_else(|| ParseError::UnknownCategory(c.clone()))?;
                        let child_expected = cat.lexical_type();
                        let mut children = Vec::new();
                        for r in rest {
                            children.push(elab(r, child_expected.as_ref(), env, sig)?);
                        }
                        Ok(lf(cat, children))
                    }
                    _ => Err(ParseError::Arity {
                        form: "lf".into(),
                        expected: "(lf CAT child...)".into(),
                    }),
                },
                Some("fn") => Err(ParseError::ReservedWord("fn".into())),
                _ => {
                    // Implicit application: (head arg...)
                    if items.len() < 2 {
                        return Err(ParseError::Arity {
                            form: print_sexp(sx),
                            expected: "a head and arguments".into(),
                        });
                    }
                    elab_application(&items[0], &items[1..], env, sig)
                }
            }
        }
    }
}

fn elab_sym(
    s: &str,
    env: &BTreeMap<String, SemType>,
    sig: &Signature,
) -> Result<Expr, ParseError> {
    if let Some(name) = s.strip_prefix('?') {
        return Ok(meta(name));
    }
    if KEYWORDS.contains(&s) || s == "e" || s == "t" {
        return Err(ParseError::ReservedWord(s.to_string()));
    }
    if let Some(ty) = env.get(s) {
        return Ok(Expr::Var {
            name: s.to_string(),
            ty: ty.clone(),
        });
    }
    if let Some((ty, u)) = sig.lookup(s) {
        return Ok(Expr::Const {
            name: s.to_string(),
            ty: ty.clone(),
            underspecified: u,
        });
    }
    Err(ParseError::UnknownConstant(s.to_string()))
}

fn elab_application(
    head: &Sexp,
    args: &[Sexp],
    env: &BTreeMap<String, SemType>,
    sig: &Signature,
) -> Result<Expr, ParseError> {
    let mut acc = elab(head, None, env, sig)?;
    for a in args {
        // Push the head's domain type into the argument when known.
        let head_ty = if acc.has_meta() {
            None
        } else {
            type_of(&acc, env).ok()
        };
        let arg_expected = match &head_ty {
            Some(SemType::Fn(dom, _)) => Some((**dom).clone()),
            _ => None,
        };
        let arg = elab(a, arg_expected.as_ref(), env, sig)?;
        acc = app(acc, arg);
    }
    Ok(acc)
}

fn print_sexp(sx: &Sexp) -> String {
    match sx {
        Sexp::Sym(s) => s.clone(),
        Sexp::List(items) => {
            let inner: Vec<String> = items.iter().map(print_sexp).collect();
            format!("({})", inner.join(" "))
        }
    }
}

/// Render an expression in the textual syntax. `parse_expr` of the
/// result reproduces the expression (alpha-equivalent in general,
/// structurally identical when binder names carry no markers).
pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Const { name, .. } => out.push_str(name),
        Expr::Var { name, .. } => out.push_str(name),
        Expr::Param { name, anchor } => match anchor {
            None => {
                let _ = write!(out, "(param {name})");
            }
            Some(a) => {
                let _ = write!(out, "(param {name} ");
                write_expr(a, out);
                out.push(')');
            }
        },
        Expr::App { .. } => {
            let mut spine = Vec::new();
            let mut head = e;
            while let Expr::App { fun, arg } = head {
                spine.push(&**arg);
                head = fun;
            }
            spine.reverse();
            let implicit = matches!(
                head,
                Expr::Const { .. } | Expr::Var { .. } | Expr::Param { .. } | Expr::Meta(_)
            );
            out.push('(');
            if !implicit {
                out.push_str("app ");
            }
            write_expr(head, out);
            for a in spine {
                out.push(' ');
                write_expr(a, out);
            }
            out.push(')');
        }
        Expr::Lambda { var, var_ty, body } => {
            let _ = write!(out, "(lam {var} {var_ty} ");
            write_expr(body, out);
            out.push(')');
        }
        Expr::Not(x) => {
            out.push_str("(not ");
            write_expr(x, out);
            out.push(')');
        }
        Expr::And(a, b) => {
            out.push_str("(and ");
            write_expr(a, out);
            out.push(' ');
            write_expr(b, out);
            out.push(')');
        }
        Expr::Quant {
            det,
            var,
            restrictor,
            scope,
        } => {
            let kw = match det {
                Det::Every => "forall",
                Det::A => "exists",
            };
            let _ = write!(out, "({kw} {var} ");
            write_expr(restrictor, out);
            out.push(' ');
            write_expr(scope, out);
            out.push(')');
        }
        Expr::Eq(a, b) => {
            out.push_str("(eq ");
            write_expr(a, out);
            out.push(' ');
            write_expr(b, out);
            out.push(')');
        }
        Expr::LfNode { cat, children } => {
            let _ = write!(out, "(lf {}", cat.name());
            for c in children {
                out.push(' ');
                write_expr(c, out);
            }
            out.push(')');
        }
        Expr::Meta(name) => {
            let _ = write!(out, "?{name}");
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_expr(self))
    }
}

/// Canonical printed key for an expression modulo alpha-equivalence.
pub fn canonical_key(e: &Expr) -> String {
    print_expr(&expr::alpha_normalize(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{app2, con, evar, exists, forall, ucon};

    fn sig() -> Signature {
        Signature::frog_fragment()
    }

    #[test]
    fn parses_application_both_ways() {
        let a = parse_expr("(app croak_U k)", &sig()).unwrap();
        let b = parse_expr("(croak_U k)", &sig()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a,
            app(ucon("croak_U", SemType::et()), con("k", SemType::E))
        );
    }

    #[test]
    fn parses_quantifier_sugar() {
        let e = parse_expr("(forall x (dog x) (croak_1 x))", &sig()).unwrap();
        let want = forall(
            "x",
            app(con("dog", SemType::et()), evar("x")),
            app(con("croak_1", SemType::et()), evar("x")),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn parses_annotated_lambda() {
        let e = parse_expr("(lam x e (app saw x))", &sig()).unwrap();
        assert_eq!(
            e,
            lam("x", SemType::E, app(con("saw", SemType::eet()), evar("x")))
        );
    }

    #[test]
    fn pushes_expected_type_into_bare_lambda() {
        let e = parse_expr_expecting(
            "(lam P (lam Q (forall x (P x) (Q x))))",
            &sig(),
            Some(&SemType::det()),
        )
        .unwrap();
        let want = lam(
            "P",
            SemType::et(),
            lam(
                "Q",
                SemType::et(),
                forall(
                    "x",
                    app(var_et("P"), evar("x")),
                    app(var_et("Q"), evar("x")),
                ),
            ),
        );
        assert_eq!(e, want);
    }

    fn var_et(n: &str) -> Expr {
        Expr::Var {
            name: n.into(),
            ty: SemType::et(),
        }
    }

    #[test]
    fn bare_lambda_without_context_errors() {
        let r = parse_expr("(lam P (P k))", &sig());
        assert!(matches!(r, Err(ParseError::AnnotationRequired(_))));
    }

    #[test]
    fn unknown_constant_errors() {
        let r = parse_expr("(blorp k)", &sig());
        assert!(matches!(r, Err(ParseError::UnknownConstant(_))));
    }

    #[test]
    fn round_trips_structures() {
        let cases = [
            "(croak_U k)",
            "(and (croak_1 k) (frog k))",
            "(not (croak_2 k))",
            "(forall x (dog x) (exists y (frog y) (saw y x)))",
            "(param p1)",
            "(param p1 k)",
            "(eq (param p1 k) k)",
            "(lf S (lf NP (lf PN k)) (lf VP (lf IV croak_U)))",
            "(lam x e (saw x))",
        ];
        for src in cases {
            let e = parse_expr(src, &sig()).unwrap();
            let printed = print_expr(&e);
            let back = parse_expr(&printed, &sig()).unwrap();
            assert_eq!(e, back, "round trip failed for {src} -> {printed}");
        }
    }

    #[test]
    fn round_trips_metavariables() {
        let e = parse_expr("(and (croak_U ?x) (frog ?x))", &sig()).unwrap();
        assert!(e.has_meta());
        let back = parse_expr(&print_expr(&e), &sig()).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn nary_and_folds_right() {
        let e = parse_expr("(and (frog k) (croak_1 k) (human-like k))", &sig()).unwrap();
        let frog = app(con("frog", SemType::et()), con("k", SemType::E));
        let c1 = app(con("croak_1", SemType::et()), con("k", SemType::E));
        let hl = app(con("human-like", SemType::et()), con("k", SemType::E));
        assert_eq!(e, expr::and(frog, expr::and(c1, hl)));
    }

    #[test]
    fn desugared_quantifier_parses_and_resugars() {
        let s = sig();
        let desugared = parse_expr(
            "(app (app every (lam x e (dog x))) (lam x e (croak_1 x)))",
            &s,
        )
        .unwrap();
        let sugar = parse_expr("(forall x (dog x) (croak_1 x))", &s).unwrap();
        assert_eq!(
            app2(
                con("every", SemType::det()),
                lam("x", SemType::E, app(con("dog", SemType::et()), evar("x"))),
                lam("x", SemType::E, app(con("croak_1", SemType::et()), evar("x"))),
            ),
            desugared
        );
        assert!(crate::expr::alpha_eq(&expr::resugar_quant(&desugared), &sugar));
    }

    #[test]
    fn existential_round_trip() {
        let e = parse_expr("(exists y (frog y) (croak_2 y))", &sig()).unwrap();
        assert_eq!(e, exists(
            "y",
            app(con("frog", SemType::et()), evar("y")),
            app(con("croak_2", SemType::et()), evar("y")),
        ));
    }
}
