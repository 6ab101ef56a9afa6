//! Command line for the ambiguity toolkit: parse sentences of the
//! fragment, enumerate scope readings, and run discourse interpretation
//! to extensions. Exit codes encode the outcome so pipelines can branch
//! on ambiguity: for `extensions`, 0 means a unique interpretation, 3
//! means perceived ambiguity (ask for clarification), 4 means no
//! interpretation, 2 means bad input or an anti-random violation under
//! `--strict-anti-random`.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use ambigua_core::defaults::{
    self, AntiRandomPolicy, EngineConfig, EngineError, Theory,
};
use ambigua_core::expr::{Expr, SemType};
use ambigua_core::grammar::{self, Lexicon};
use ambigua_core::model::{self, Model};
use ambigua_core::sexpr::{parse_expr_expecting, print_expr, Signature};
use ambigua_core::cooper;

const EXIT_OK: u8 = 0;
const EXIT_NO_PARSE: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_AMBIGUOUS: u8 = 3;
const EXIT_NO_EXTENSION: u8 = 4;

#[derive(Parser)]
#[command(name = "ambigua", version, about = "Underspecified semantics toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a sentence into logical-form trees.
    Parse(ParseArgs),
    /// Enumerate the scope readings of a sentence.
    Readings(ReadingsArgs),
    /// Run discourse interpretation and list the extensions.
    Extensions(ExtensionsArgs),
    /// Validate a rule file (schema, normal form, anti-random).
    CheckRules(CheckRulesArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Lexicon/grammar file (defaults to the built-in fragment).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Model file (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Emit a JSON report instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// The sentence to parse.
    sentence: String,
}

#[derive(Args)]
struct ReadingsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Deduplicate readings by denotation on the model.
    #[arg(long = "denotational-dedup")]
    denotational_dedup: bool,
    sentence: String,
}

#[derive(Args)]
struct ExtensionsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Rule file (JSON).
    #[arg(long)]
    rules: PathBuf,
    /// Take the underspecified wffs from a file (JSON array of
    /// expressions) instead of a sentence.
    #[arg(long)]
    wffs: Option<PathBuf>,
    /// Rule-application budget.
    #[arg(long = "max-steps", default_value_t = 10_000)]
    max_steps: usize,
    /// Reject theories containing a trivial-context rule.
    #[arg(long = "strict-anti-random")]
    strict_anti_random: bool,
    /// Deduplicate sentence readings by denotation before building the
    /// theory.
    #[arg(long = "denotational-dedup")]
    denotational_dedup: bool,
    /// The sentence to interpret (omit when using --wffs).
    sentence: Option<String>,
}

#[derive(Args)]
struct CheckRulesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Rule file (JSON).
    #[arg(long)]
    rules: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn bad(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_BAD_INPUT,
            message: message.into(),
        }
    }
}

impl<E: std::fmt::Display> From<E> for Failure
where
    E: std::error::Error,
{
    fn from(e: E) -> Failure {
        Failure::bad(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Parse(args) => cmd_parse(args),
        Cmd::Readings(args) => cmd_readings(args),
        Cmd::Extensions(args) => cmd_extensions(args),
        Cmd::CheckRules(args) => cmd_check_rules(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

struct Inputs {
    entries: Vec<(String, String)>,
}

impl Inputs {
    fn new() -> Inputs {
        Inputs {
            entries: vec![("version".into(), env!("CARGO_PKG_VERSION").into())],
        }
    }

    fn file(&mut self, label: &str, path: &PathBuf) -> Result<String, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::bad(format!("cannot read {}: {e}", path.display())))?;
        self.entries
            .push((label.to_string(), sha256_hex(text.as_bytes())));
        Ok(text)
    }

    fn value(&mut self, label: &str, text: &str) {
        self.entries
            .push((label.to_string(), sha256_hex(text.as_bytes())));
    }

    fn header(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("# {k}: {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn json(&self) -> Json {
        Json::Object(
            self.entries
                .iter()
                .map(|(k, v)| (k.clone(), Json::String(v.clone())))
                .collect(),
        )
    }
}

struct Loaded {
    lexicon: Lexicon,
    model: Option<Model>,
    inputs: Inputs,
}

fn base_signature() -> Signature {
    let mut sig = Signature::new();
    sig.declare("every", SemType::det(), false);
    sig.declare("a", SemType::det(), false);
    sig
}

fn load_common(common: &CommonArgs) -> Result<Loaded, Failure> {
    let mut inputs = Inputs::new();
    let mut sig = base_signature();
    let model = match &common.model {
        Some(path) => {
            let text = inputs.file("model", path)?;
            let m = Model::from_json(&text)?;
            sig.merge(&m.signature());
            Some(m)
        }
        None => None,
    };
    let lexicon = match &common.lexicon {
        Some(path) => {
            let text = inputs.file("lexicon", path)?;
            Lexicon::from_json(&text, &sig)?
        }
        None => Lexicon::frog_fragment(&sig),
    };
    Ok(Loaded {
        lexicon,
        model,
        inputs,
    })
}

fn parse_sentence(
    sentence: &str,
    lexicon: &Lexicon,
) -> Result<Vec<Expr>, Failure> {
    let tokens = grammar::tokenize(sentence);
    grammar::parse(&tokens, lexicon).map_err(|e| match e {
        grammar::GrammarError::UnknownToken(_) => Failure::bad(e.to_string()),
        other => Failure::bad(other.to_string()),
    })
}

fn cmd_parse(args: ParseArgs) -> Result<u8, Failure> {
    let mut loaded = load_common(&args.common)?;
    loaded.inputs.value("sentence", &args.sentence);
    let trees = parse_sentence(&args.sentence, &loaded.lexicon)?;
    if args.common.json {
        let report = json!({
            "inputs": loaded.inputs.json(),
            "trees": trees.iter().map(print_expr).collect::<Vec<_>>(),
            "count": trees.len(),
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        println!("{}", loaded.inputs.header());
        for t in &trees {
            println!("{}", print_expr(t));
        }
        println!("# parses: {}", trees.len());
    }
    Ok(if trees.is_empty() { EXIT_NO_PARSE } else { EXIT_OK })
}

fn sentence_readings(
    sentence: &str,
    lexicon: &Lexicon,
    model: Option<&Model>,
    denotational_dedup: bool,
) -> Result<Vec<Expr>, Failure> {
    let trees = parse_sentence(sentence, lexicon)?;
    let mut readings: Vec<Expr> = Vec::new();
    for t in &trees {
        for r in cooper::readings(t)? {
            if !readings.iter().any(|prev| ambigua_core::expr::alpha_eq(prev, &r)) {
                readings.push(r);
            }
        }
    }
    if denotational_dedup {
        let m = model.ok_or_else(|| {
            Failure::bad("--denotational-dedup requires --model")
        })?;
        readings = model::dedup_by_denotation(readings, m, &m.discourse)?;
    }
    Ok(readings)
}

fn cmd_readings(args: ReadingsArgs) -> Result<u8, Failure> {
    let mut loaded = load_common(&args.common)?;
    loaded.inputs.value("sentence", &args.sentence);
    let readings = sentence_readings(
        &args.sentence,
        &loaded.lexicon,
        loaded.model.as_ref(),
        args.denotational_dedup,
    )?;
    let sense_count = |r: &Expr| -> Result<Option<usize>, Failure> {
        match &loaded.model {
            Some(m) => Ok(Some(model::denote(r, m, &m.discourse)?.len())),
            None => Ok(None),
        }
    };
    if args.common.json {
        let mut items = Vec::new();
        for r in &readings {
            let mut obj = serde_json::Map::new();
            obj.insert("expr".into(), Json::String(print_expr(r)));
            if let Some(n) = sense_count(r)? {
                obj.insert("senses".into(), Json::from(n));
            }
            items.push(Json::Object(obj));
        }
        let report = json!({
            "inputs": loaded.inputs.json(),
            "readings": items,
            "count": readings.len(),
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        println!("{}", loaded.inputs.header());
        for r in &readings {
            match sense_count(r)? {
                Some(n) => println!("{}  # senses: {n}", print_expr(r)),
                None => println!("{}", print_expr(r)),
            }
        }
        println!("# readings: {}", readings.len());
    }
    Ok(if readings.is_empty() {
        EXIT_NO_PARSE
    } else {
        EXIT_OK
    })
}

fn cmd_extensions(args: ExtensionsArgs) -> Result<u8, Failure> {
    let mut loaded = load_common(&args.common)?;
    let model = loaded
        .model
        .clone()
        .ok_or_else(|| Failure::bad("extensions requires --model"))?;
    let rules_text = loaded.inputs.file("rules", &args.rules)?;
    let mut sig = base_signature();
    sig.merge(&model.signature());
    sig.merge(loaded.lexicon.signature());
    let rules = defaults::rules_from_json(&rules_text, &sig)?;

    let mut uf: BTreeSet<Expr> = BTreeSet::new();
    match (&args.sentence, &args.wffs) {
        (Some(sentence), None) => {
            loaded.inputs.value("sentence", sentence);
            let trees = parse_sentence(sentence, &loaded.lexicon)?;
            if trees.is_empty() {
                return Err(Failure {
                    code: EXIT_NO_PARSE,
                    message: format!("no parse for {sentence:?}"),
                });
            }
            for t in &trees {
                uf.insert(grammar::sentence_wff(t)?);
            }
        }
        (None, Some(path)) => {
            let text = loaded.inputs.file("wffs", path)?;
            let items: Vec<String> = serde_json::from_str(&text)
                .map_err(|e| Failure::bad(format!("wffs file: {e}")))?;
            for item in items {
                let w = parse_expr_expecting(&item, &sig, Some(&SemType::T))?;
                uf.insert(defaults::normalize_input_wff(&w)?);
            }
        }
        (Some(_), Some(_)) => {
            return Err(Failure::bad("give a sentence or --wffs, not both"))
        }
        (None, None) => return Err(Failure::bad("give a sentence or --wffs")),
    }

    let theory = Theory {
        rules: rules.clone(),
        uf,
        model: model.clone(),
        discourse: model.discourse.clone(),
    };
    let config = EngineConfig {
        max_steps: args.max_steps,
        anti_random: if args.strict_anti_random {
            AntiRandomPolicy::Reject
        } else {
            AntiRandomPolicy::Warn
        },
    };
    if !args.strict_anti_random {
        for rule in &rules {
            if !defaults::is_anti_random(rule, &model, &model.discourse)? {
                eprintln!(
                    "warning: rule {} has a trivial contextual requirement",
                    rule.name
                );
            }
        }
    }
    let exts = match defaults::extensions(&theory, &config) {
        Ok(exts) => exts,
        Err(EngineError::AntiRandom(name)) => {
            return Err(Failure {
                code: EXIT_BAD_INPUT,
                message: format!("rule {name} violates the anti-random hypothesis"),
            })
        }
        Err(other) => return Err(other.into()),
    };

    if args.common.json {
        let items: Vec<Json> = exts
            .iter()
            .map(|e| {
                json!({
                    "wffs": e.wffs.iter().map(print_expr).collect::<Vec<_>>(),
                    "trace": e.trace.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                    "cdi": defaults::check_cdi(&e.wffs),
                    "consistent": e.consistent,
                })
            })
            .collect();
        let report = json!({
            "inputs": loaded.inputs.json(),
            "extensions": items,
            "count": exts.len(),
            "perceived_ambiguity": exts.len(),
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        println!("{}", loaded.inputs.header());
        for (i, e) in exts.iter().enumerate() {
            let status = if e.consistent {
                "consistent"
            } else {
                "inconsistent"
            };
            let cdi = if defaults::check_cdi(&e.wffs) {
                "cdi ok"
            } else {
                "cdi violated"
            };
            println!("extension {}: {cdi}, {status}", i + 1);
            for w in &e.wffs {
                println!("  {}", print_expr(w));
            }
            if !e.trace.is_empty() {
                let steps: Vec<String> =
                    e.trace.iter().map(|t| t.to_string()).collect();
                println!("  trace: {}", steps.join(" ; "));
            }
        }
        println!("# perceived ambiguity: {}", exts.len());
    }
    Ok(match exts.len() {
        0 => EXIT_NO_EXTENSION,
        1 => EXIT_OK,
        _ => EXIT_AMBIGUOUS,
    })
}

fn cmd_check_rules(args: CheckRulesArgs) -> Result<u8, Failure> {
    let mut loaded = load_common(&args.common)?;
    let rules_text = loaded.inputs.file("rules", &args.rules)?;
    let mut sig = base_signature();
    if let Some(m) = &loaded.model {
        sig.merge(&m.signature());
    }
    sig.merge(loaded.lexicon.signature());
    if loaded.model.is_none() {
        // Without a model the constants have no declared types; infer
        // predicate arities from the patterns so the file can still be
        // schema- and normal-form-checked.
        let file: serde_json::Value = serde_json::from_str(&rules_text)
            .map_err(|e| Failure::bad(format!("rules file: {e}")))?;
        if let Some(rules) = file.get("rules").and_then(|r| r.as_array()) {
            for rule in rules {
                for field in ["trigger", "context", "just", "rewrite"] {
                    if let Some(src) = rule.get(field).and_then(|v| v.as_str()) {
                        if !src.trim().is_empty() {
                            sig = ambigua_core::sexpr::infer_signature(src, &sig)?;
                        }
                    }
                }
                if let Some(adds) = rule.get("add").and_then(|v| v.as_array()) {
                    for a in adds {
                        if let Some(src) = a.as_str() {
                            sig = ambigua_core::sexpr::infer_signature(src, &sig)?;
                        }
                    }
                }
            }
        }
    }
    let rules = defaults::rules_from_json(&rules_text, &sig)?;
    let mut all_ok = true;
    let mut items = Vec::new();
    for rule in &rules {
        let anti_random = match &loaded.model {
            Some(m) => {
                let ok = defaults::is_anti_random(rule, m, &m.discourse)?;
                if !ok {
                    all_ok = false;
                }
                Some(ok)
            }
            None => {
                if rule.context.is_none() {
                    all_ok = false;
                    Some(false)
                } else {
                    None
                }
            }
        };
        items.push((rule.name.clone(), rule.is_normal(), anti_random));
    }
    if args.common.json {
        let rules_json: Vec<Json> = items
            .iter()
            .map(|(name, normal, ar)| {
                json!({
                    "name": name,
                    "normal": normal,
                    "anti_random": ar,
                })
            })
            .collect();
        let report = json!({
            "inputs": loaded.inputs.json(),
            "rules": rules_json,
            "ok": all_ok,
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        println!("{}", loaded.inputs.header());
        for (name, normal, ar) in &items {
            let ar_s = match ar {
                Some(true) => "anti-random ok",
                Some(false) => "ANTI-RANDOM VIOLATION",
                None => "anti-random unchecked (no model)",
            };
            let n_s = if *normal { "normal" } else { "non-normal" };
            println!("{name}: {n_s}, {ar_s}");
        }
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_BAD_INPUT })
}
