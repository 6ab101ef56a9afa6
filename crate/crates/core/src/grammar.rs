//! The fragment grammar and lexicon: parses token strings into
//! logical-form trees whose leaves carry semantic translations.
//!
//! The parser is a bottom-up chart over the fixed CFG; rules build
//! exactly the logical-form node shapes of the grammar. Tokenization is
//! whitespace-split and case-folded. Each pronoun occurrence mints a
//! fresh parameter id (deterministic left-to-right counter).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::expr::{lf, type_of, Expr, LfCat, SemType, TypeError, Wff};
use crate::sexpr::{parse_expr_expecting, ParseError, Signature};

/// One lexical entry: a surface token, its category, and its
/// translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexEntry {
    pub surface: String,
    pub cat: LfCat,
    pub translation: Expr,
}

/// A phrase structure rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarRule {
    pub lhs: LfCat,
    pub rhs: Vec<LfCat>,
}

/// Lexicon plus grammar, ready to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub entries: Vec<LexEntry>,
    pub rules: Vec<GrammarRule>,
    signature: Signature,
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid lexicon json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("lexicon schema violation: {0}")]
    Schema(String),
    #[error("entry {surface}: {source}")]
    Translation {
        surface: String,
        source: ParseError,
    },
    #[error("entry {surface}: translation type {found} does not match category {cat} ({want})")]
    CategoryType {
        surface: String,
        cat: String,
        want: String,
        found: String,
    },
    #[error("unknown token {0}")]
    UnknownToken(String),
    #[error("expected a sentence-level logical form, found {0}")]
    WrongCategory(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    #[serde(default)]
    lexicon: Vec<LexEntryFile>,
    #[serde(default)]
    rules: Vec<RuleFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexEntryFile {
    surface: String,
    cat: String,
    sem: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    lhs: String,
    rhs: Vec<String>,
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>, base: &Signature) -> Result<Lexicon, GrammarError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| GrammarError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::from_json(&text, base)
    }

    /// Parse a lexicon file. Constants named by bare-symbol
    /// translations are given their category's type unless the base
    /// signature already declares them (the model signature supplies
    /// underspecified flags).
    pub fn from_json(text: &str, base: &Signature) -> Result<Lexicon, GrammarError> {
        let file: LexiconFile = serde_json::from_str(text)?;
        let mut sig = base.clone();
        for e in &file.lexicon {
            let cat = LfCat::parse(&e.cat)
                .ok_or_else(|| GrammarError::Schema(format!("unknown category {}", e.cat)))?;
            let want = cat.lexical_type().ok_or_else(|| {
                GrammarError::Schema(format!("{} is not a lexical category", e.cat))
            })?;
            let sym = e.sem.trim();
            let is_bare = !sym.is_empty()
                && !sym.contains('(')
                && !sym.contains(')')
                && !sym.contains(char::is_whitespace)
                && !sym.starts_with('?');
            if is_bare && sig.lookup(sym).is_none() {
                sig.declare(sym, want, false);
            }
        }
        let mut entries = Vec::new();
        for e in file.lexicon {
            let cat = LfCat::parse(&e.cat).expect("validated above");
            let want = cat.lexical_type().expect("validated above");
            let translation = parse_expr_expecting(&e.sem, &sig, Some(&want)).map_err(
                |source| GrammarError::Translation {
                    surface: e.surface.clone(),
                    source,
                },
            )?;
            let found = type_of(&translation, &BTreeMap::new())?;
            if found != want {
                return Err(GrammarError::CategoryType {
                    surface: e.surface,
                    cat: cat.name().into(),
                    want: want.to_string(),
                    found: found.to_string(),
                });
            }
            if cat == LfCat::Pro && !matches!(translation, Expr::Param { .. }) {
                return Err(GrammarError::Schema(format!(
                    "PRO entry {} must translate to a parameter",
                    e.surface
                )));
            }
            entries.push(LexEntry {
                surface: e.surface.to_lowercase(),
                cat,
                translation,
            });
        }
        let mut rules = Vec::new();
        for r in file.rules {
            let lhs = LfCat::parse(&r.lhs)
                .ok_or_else(|| GrammarError::Schema(format!("unknown category {}", r.lhs)))?;
            if r.rhs.is_empty() {
                return Err(GrammarError::Schema(format!("rule {} has empty rhs", r.lhs)));
            }
            let mut rhs = Vec::new();
            for c in r.rhs {
                rhs.push(
                    LfCat::parse(&c)
                        .ok_or_else(|| GrammarError::Schema(format!("unknown category {c}")))?,
                );
            }
            rules.push(GrammarRule { lhs, rhs });
        }
        Ok(Lexicon {
            entries,
            rules,
            signature: sig,
        })
    }

    /// The grammar of the frog fragment, built in code; the same data
    /// ships as `data/lexicon.json`.
    pub fn frog_fragment(base: &Signature) -> Lexicon {
        let text = r#"{
          "lexicon": [
            {"surface": "Kermit", "cat": "PN", "sem": "k"},
            {"surface": "every", "cat": "Det",
             "sem": "(lam P (lam Q (forall x (P x) (Q x))))"},
            {"surface": "a", "cat": "Det",
             "sem": "(lam P (lam Q (exists x (P x) (Q x))))"},
            {"surface": "dog", "cat": "N", "sem": "dog"},
            {"surface": "frog", "cat": "N", "sem": "frog"},
            {"surface": "croaked", "cat": "IV", "sem": "croak_U"},
            {"surface": "saw", "cat": "TV", "sem": "saw"},
            {"surface": "it", "cat": "PRO", "sem": "(param x)"}
          ],
          "rules": [
            {"lhs": "S", "rhs": ["NP", "VP"]},
            {"lhs": "NP", "rhs": ["PN"]},
            {"lhs": "NP", "rhs": ["Det", "N"]},
            {"lhs": "NP", "rhs": ["PRO"]},
            {"lhs": "VP", "rhs": ["IV"]},
            {"lhs": "VP", "rhs": ["TV", "NP"]}
          ]
        }"#;
        Lexicon::from_json(text, base).expect("fragment lexicon is well-formed")
    }

    /// The constant signature induced by the lexicon (plus its base).
    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    fn lexical_items(&self, token: &str, pro_counter: &mut usize) -> Vec<Expr> {
        let mut out = Vec::new();
        for e in &self.entries {
            if e.surface == token {
                let translation = if e.cat == LfCat::Pro {
                    *pro_counter += 1;
                    match &e.translation {
                        Expr::Param { name, .. } => Expr::Param {
                            name: format!("{name}{pro_counter}"),
                            anchor: None,
                        },
                        other => other.clone(),
                    }
                } else {
                    e.translation.clone()
                };
                out.push(lf(e.cat, vec![translation]));
            }
        }
        out
    }
}

/// Tokenize a sentence: whitespace split, case-folded.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|t| t.to_lowercase())
        .collect()
}

/// All complete sentence parses of the token string, as logical-form
/// trees with translations at the leaves. Ungrammatical input yields an
/// empty list; a token missing from the lexicon is an error.
pub fn parse(tokens: &[String], lexicon: &Lexicon) -> Result<Vec<Expr>, GrammarError> {
    let n = tokens.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    // chart[(start, end, cat)] -> distinct trees
    let mut chart: BTreeMap<(usize, usize, LfCat), Vec<Expr>> = BTreeMap::new();
    let mut pro_counter = 0usize;
    for (i, tok) in tokens.iter().enumerate() {
        let items = lexicon.lexical_items(tok, &mut pro_counter);
        if items.is_empty() {
            return Err(GrammarError::UnknownToken(tok.clone()));
        }
        for item in items {
            let cat = match &item {
                Expr::LfNode { cat, .. } => *cat,
                _ => unreachable!(),
            };
            chart.entry((i, i + 1, cat)).or_default().push(item);
        }
        unary_closure(&mut chart, i, i + 1, lexicon);
    }
    for width in 2..=n {
        for start in 0..=(n - width) {
            let end = start + width;
            for rule in &lexicon.rules {
                if rule.rhs.len() < 2 {
                    continue;
                }
                let mut found = Vec::new();
                collect_splits(
                    &chart,
                    &rule.rhs,
                    start,
                    end,
                    &mut Vec::new(),
                    &mut found,
                );
                for children in found {
                    let tree = lf(rule.lhs, children);
                    let cell = chart.entry((start, end, rule.lhs)).or_default();
                    if !cell.contains(&tree) {
                        cell.push(tree);
                    }
                }
            }
            unary_closure(&mut chart, start, end, lexicon);
        }
    }
    let mut parses = chart
        .remove(&(0, n, LfCat::S))
        .unwrap_or_default();
    parses.sort_by_key(crate::sexpr::canonical_key);
    parses.dedup();
    Ok(parses)
}

fn unary_closure(
    chart: &mut BTreeMap<(usize, usize, LfCat), Vec<Expr>>,
    start: usize,
    end: usize,
    lexicon: &Lexicon,
) {
    loop {
        let mut additions: Vec<(LfCat, Expr)> = Vec::new();
        for rule in &lexicon.rules {
            if rule.rhs.len() != 1 {
                continue;
            }
            if let Some(items) = chart.get(&(start, end, rule.rhs[0])) {
                for item in items {
                    let tree = lf(rule.lhs, vec![item.clone()]);
                    let exists = chart
                        .get(&(start, end, rule.lhs))
                        .map(|cell| cell.contains(&tree))
                        .unwrap_or(false);
                    if !exists {
                        additions.push((rule.lhs, tree));
                    }
                }
            }
        }
        if additions.is_empty() {
            return;
        }
        for (cat, tree) in additions {
            chart.entry((start, end, cat)).or_default().push(tree);
        }
    }
}

fn collect_splits(
    chart: &BTreeMap<(usize, usize, LfCat), Vec<Expr>>,
    rhs: &[LfCat],
    start: usize,
    end: usize,
    acc: &mut Vec<Expr>,
    out: &mut Vec<Vec<Expr>>,
) {
    if rhs.len() == 1 {
        if let Some(items) = chart.get(&(start, end, rhs[0])) {
            for item in items {
                let mut children = acc.clone();
                children.push(item.clone());
                out.push(children);
            }
        }
        return;
    }
    for mid in (start + 1)..end {
        if let Some(items) = chart.get(&(start, mid, rhs[0])) {
            for item in items {
                acc.push(item.clone());
                collect_splits(chart, &rhs[1..], mid, end, acc, out);
                acc.pop();
            }
        }
    }
}

/// Wrap a sentence-level logical form as a theory wff. The result is
/// H-type ambiguous by construction (it contains a logical-form node).
pub fn sentence_wff(lf_tree: &Expr) -> Result<Wff, GrammarError> {
    match lf_tree {
        Expr::LfNode { cat: LfCat::S, .. } => {
            let ty = type_of(lf_tree, &BTreeMap::new())?;
            debug_assert_eq!(ty, SemType::T);
            Ok(lf_tree.clone())
        }
        Expr::LfNode { cat, .. } => Err(GrammarError::WrongCategory(cat.name().to_string())),
        other => Err(GrammarError::WrongCategory(crate::sexpr::print_expr(
            other,
        ))),
    }
}

/// The lexical categories of a parse tree's leaves, left to right.
pub fn leaf_categories(tree: &Expr) -> Vec<LfCat> {
    let mut out = Vec::new();
    fn walk(e: &Expr, out: &mut Vec<LfCat>) {
        if let Expr::LfNode { cat, children } = e {
            if cat.lexical_type().is_some() {
                out.push(*cat);
            } else {
                for c in children {
                    walk(c, out);
                }
            }
        }
    }
    walk(tree, &mut out);
    out
}
