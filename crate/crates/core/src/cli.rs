//! Command-line front end: `check`, `update`, `diff` and `export`, plus a
//! hidden `oracle` subcommand for debugging.
//!
//! Exit codes: 0 satisfied (or success for `diff`/`export`), 1 violated
//! (`check`) or repaired (`update`), 2 input error, 3 unsatisfiable
//! formula, 4 no candidate within the caps.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::checker::{check, check_rooted, sat_states};
use crate::diff::{compute_diff, pointed_diff};
use crate::formula::{neg, parse, Formula, ParseError};
use crate::kripke::{export_dot, parse_model, parse_model_json, reachable_from, KripkeModel, ModelError, PointedModel, DUMMY};
use crate::oracle::{brute_force_admissible, brute_force_check, EditBudget, OracleError};
use crate::update::{ctl_update, ctl_update_rooted, unchanged_reachable, UpdateConfig, UpdateError, UpdateOutcome};

/// Exit code: formula satisfied, or a plain command succeeded.
pub const EXIT_OK: i32 = 0;
/// Exit code: formula violated (`check`) or repairs produced (`update`).
pub const EXIT_VIOLATED: i32 = 1;
/// Exit code: unreadable or malformed input.
pub const EXIT_INPUT: i32 = 2;
/// Exit code: the formula (with constraints) is unsatisfiable.
pub const EXIT_UNSAT: i32 = 3;
/// Exit code: no candidate within the configured caps.
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ctl-repair", version, about = "CTL model checking and minimal-change model repair")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Debug, clap::Args)]
struct Target {
    /// Model file (`.json` for JSON documents, anything else for text).
    model: PathBuf,
    /// CTL formula (alternatively use --formula-file).
    formula: Option<String>,
    /// Read the formula from a file.
    #[arg(long, value_name = "FILE", conflicts_with = "formula")]
    formula_file: Option<PathBuf>,
    /// Evaluate at this state instead of at every initial state.
    #[arg(long, value_name = "STATE")]
    start: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Model-check a formula.
    Check {
        #[command(flatten)]
        target: Target,
        /// Write the run report as JSON.
        #[arg(long, value_name = "FILE")]
        report_json: Option<PathBuf>,
    },
    /// Repair the model so that the formula holds.
    Update {
        #[command(flatten)]
        target: Target,
        /// Keep only committed repairs (maximal unchanged reachable states).
        #[arg(long)]
        committed: bool,
        /// File with one constraint formula per line that repairs must keep.
        #[arg(long, value_name = "FILE")]
        constraints: Option<PathBuf>,
        /// Maximum number of candidates kept.
        #[arg(long, value_name = "N", default_value_t = 256)]
        max_candidates: usize,
        /// Maximum number of new states per candidate.
        #[arg(long, value_name = "N", default_value_t = 2)]
        max_new_states: usize,
        /// Keep every candidate (no --max-candidates cap).
        #[arg(long)]
        enumerate_all: bool,
        /// Minimal labels tried per relabelling.
        #[arg(long, value_name = "N", default_value_t = 1)]
        max_assignments: usize,
        /// Branch over every edit touching the current counterexample
        /// instead of following the formula-specific characterizations.
        #[arg(long)]
        no_characterizations: bool,
        /// Directory for candidate files and the summary report.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Candidate output format.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write the run report as JSON.
        #[arg(long, value_name = "FILE")]
        report_json: Option<PathBuf>,
    },
    /// Print the difference between two models as JSON.
    Diff {
        /// The base model.
        base: PathBuf,
        /// The changed model.
        other: PathBuf,
    },
    /// Print a model as Graphviz DOT.
    Export {
        /// The model.
        model: PathBuf,
        /// Draw this changed model instead, highlighting its differences.
        #[arg(long, value_name = "OTHER")]
        diff: Option<PathBuf>,
    },
    /// Brute-force reference check and repair (small models only).
    #[command(hide = true)]
    Oracle {
        #[command(flatten)]
        target: Target,
        /// Edit budget (number of primitive operations).
        #[arg(long, value_name = "N", default_value_t = 2)]
        max_ops: usize,
    },
}

/// Input problems; all map to exit code 2.
#[derive(Debug, Error)]
pub enum InputError {
    /// A file could not be read.
    #[error("cannot read '{path}': {source}")]
    Read { path: String, source: std::io::Error },
    /// A file could not be written.
    #[error("cannot write '{path}': {source}")]
    Write { path: String, source: std::io::Error },
    /// A model document is malformed.
    #[error("{path}: {source}")]
    Model { path: String, source: ModelError },
    /// A formula is malformed.
    #[error("formula error at position {}: {}", .0.position, .0.message)]
    Formula(ParseError),
    /// No formula was given.
    #[error("no formula given (pass it as an argument or with --formula-file)")]
    MissingFormula,
    /// The start state does not exist.
    #[error("unknown start state '{0}'")]
    UnknownStart(String),
    /// The oracle refused the input.
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Outcome class of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// The formula already holds.
    Satisfied,
    /// The formula did not hold and repairs were produced.
    Repaired,
    /// The formula does not hold and no repair was produced.
    Failed,
}

/// Summary of one `check` or `update` invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Outcome class.
    pub verdict: Verdict,
    /// The formula, as printed by the parser.
    pub formula: String,
    /// Candidates generated.
    pub generated: usize,
    /// Candidates surviving the admissibility filter.
    pub admissible: usize,
    /// Candidates surviving the committed filter.
    pub committed: usize,
    /// Whether a cap cut the enumeration short.
    pub truncated: bool,
    /// Wall time per phase, in milliseconds.
    pub timings_ms: Vec<(String, f64)>,
    /// Files written.
    pub artifacts: Vec<String>,
}

impl RunReport {
    fn new(formula: &Formula) -> RunReport {
        RunReport {
            verdict: Verdict::Failed,
            formula: formula.to_string(),
            generated: 0,
            admissible: 0,
            committed: 0,
            truncated: false,
            timings_ms: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings_ms.push((phase.to_string(), t.elapsed().as_secs_f64() * 1000.0));
        out
    }

    /// Human-readable summary (timings omitted so output is reproducible).
    pub fn to_text(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Satisfied => "satisfied",
            Verdict::Repaired => "repaired",
            Verdict::Failed => "failed",
        };
        let mut s = format!(
            "verdict: {verdict}\nformula: {}\ncandidates: {} generated, {} admissible, {} committed\n",
            self.formula, self.generated, self.admissible, self.committed
        );
        if self.truncated {
            s.push_str("note: enumeration was truncated by a cap\n");
        }
        for a in &self.artifacts {
            s.push_str(&format!("wrote: {a}\n"));
        }
        s
    }
}

/// Parses the arguments and runs the command, writing to `out` and `err`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check { target, report_json } => cmd_check(&target, report_json.as_deref(), out),
        Command::Update {
            target,
            committed,
            constraints,
            max_candidates,
            max_new_states,
            enumerate_all,
            max_assignments,
            no_characterizations,
            out: dir,
            format,
            report_json,
        } => {
            let opts = UpdateOptions {
                committed,
                constraints,
                max_candidates: (!enumerate_all).then_some(max_candidates),
                max_new_states,
                max_assignments,
                characterizations: !no_characterizations,
                dir,
                format,
                report_json,
            };
            cmd_update(&target, &opts, out, err)
        }
        Command::Diff { base, other } => cmd_diff(&base, &other, out),
        Command::Export { model, diff } => cmd_export(&model, diff.as_deref(), out),
        Command::Oracle { target, max_ops } => cmd_oracle(&target, max_ops, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Read { path: path.display().to_string(), source })
}

fn write_file(path: &Path, text: &str) -> Result<(), InputError> {
    fs::write(path, text).map_err(|source| InputError::Write { path: path.display().to_string(), source })
}

/// Loads a model, choosing the JSON reader for `.json` files.
pub fn load_model(path: &Path) -> Result<KripkeModel, InputError> {
    let text = read(path)?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_model_json(&text)
    } else {
        parse_model(&text)
    };
    parsed.map_err(|source| InputError::Model { path: path.display().to_string(), source })
}

fn load_formula(target: &Target) -> Result<Formula, InputError> {
    let text = match (&target.formula, &target.formula_file) {
        (Some(f), _) => f.clone(),
        (None, Some(path)) => read(path)?,
        (None, None) => return Err(InputError::MissingFormula),
    };
    parse(text.trim()).map_err(InputError::Formula)
}

fn load_constraints(path: &Path) -> Result<Vec<Formula>, InputError> {
    read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse(l).map_err(InputError::Formula))
        .collect()
}

fn pointed(m: &KripkeModel, start: &str) -> Result<PointedModel, InputError> {
    PointedModel::new(m.clone(), start).map_err(|_| InputError::UnknownStart(start.to_string()))
}

/// SHA-256 of the canonical text of a model, as lowercase hex.
pub fn model_hash(m: &KripkeModel) -> String {
    hex::encode(Sha256::digest(m.to_text().as_bytes()))
}

/// For goals of the form `AG ψ`, `¬EF ¬ψ` or `¬E[⊤ U ¬ψ]`, the invariant `ψ`.
fn invariant_of(f: &Formula) -> Option<Formula> {
    match f {
        Formula::AG(psi) => Some((**psi).clone()),
        Formula::Not(inner) => match inner.as_ref() {
            Formula::EF(bad) => Some(neg((**bad).clone())),
            Formula::EU(a, bad) if **a == Formula::True => Some(neg((**bad).clone())),
            _ => None,
        },
        _ => None,
    }
}

/// States reachable from `starts` that violate the invariant `psi` and lie
/// on an infinite path (the states a counterexample can visit).
pub fn offending_states(m: &KripkeModel, starts: &[String], psi: &Formula) -> BTreeSet<String> {
    let good = sat_states(m, psi);
    let live = sat_states(m, &Formula::eg(Formula::True));
    let mut out = BTreeSet::new();
    for s in starts {
        for r in reachable_from(m, s) {
            if r != DUMMY && !good.contains(&r) && live.contains(&r) {
                out.insert(r);
            }
        }
    }
    out
}

fn set_text(set: &BTreeSet<String>) -> String {
    format!("{{{}}}", set.iter().cloned().collect::<Vec<_>>().join(", "))
}

fn cmd_check(target: &Target, report_json: Option<&Path>, out: &mut dyn Write) -> Result<i32, InputError> {
    let m = load_model(&target.model)?;
    let f = load_formula(target)?;
    let mut report = RunReport::new(&f);
    let (holds, starts) = match &target.start {
        Some(s) => {
            let pm = pointed(&m, s)?;
            (report.time("check", || check(&pm, &f)), vec![s.clone()])
        }
        None => (report.time("check", || check_rooted(&m, &f)), m.init().iter().cloned().collect()),
    };
    report.verdict = if holds { Verdict::Satisfied } else { Verdict::Failed };
    let sat = sat_states(&m, &f);
    let mut text = format!(
        "{}: {f}\nsatisfying states: {}\nstarting states: {}\n",
        if holds { "satisfied" } else { "violated" },
        set_text(&sat),
        set_text(&starts.iter().cloned().collect()),
    );
    if let Some(psi) = invariant_of(&f) {
        text.push_str(&format!("false states: {}\n", set_text(&offending_states(&m, &starts, &psi))));
    }
    let _ = write!(out, "{text}");
    if let Some(path) = report_json {
        write_file(path, &serde_json::to_string_pretty(&report).expect("reports serialize"))?;
    }
    Ok(if holds { EXIT_OK } else { EXIT_VIOLATED })
}

struct UpdateOptions {
    committed: bool,
    constraints: Option<PathBuf>,
    max_candidates: Option<usize>,
    max_new_states: usize,
    max_assignments: usize,
    characterizations: bool,
    dir: Option<PathBuf>,
    format: Format,
    report_json: Option<PathBuf>,
}

/// The candidate output document.
pub fn candidate_document(outcome: &UpdateOutcome, indices: &[usize]) -> Value {
    let admissible: BTreeSet<usize> = outcome.admissible().into_iter().collect();
    let committed: BTreeSet<usize> = outcome.committed().into_iter().collect();
    let candidates: Vec<Value> = indices
        .iter()
        .map(|&i| {
            let c = &outcome.candidates[i];
            json!({
                "start": c.start,
                "model": c.user_model().to_doc(),
                "trace": c.trace,
                "diff": c.diff,
                "unchanged_reachable": unchanged_reachable(&outcome.base, c),
                "admissible": admissible.contains(&i),
                "committed": committed.contains(&i),
            })
        })
        .collect();
    json!({
        "formula": outcome.formula.to_string(),
        "base_model_hash": model_hash(&outcome.base.model),
        "candidates": candidates,
    })
}

fn cmd_update(target: &Target, opts: &UpdateOptions, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, InputError> {
    let m = load_model(&target.model)?;
    let f = load_formula(target)?;
    let constraints = match &opts.constraints {
        Some(p) => load_constraints(p)?,
        None => Vec::new(),
    };
    let cfg = UpdateConfig {
        max_new_states: opts.max_new_states,
        max_candidates: opts.max_candidates,
        committed: opts.committed,
        constraints,
        min_assignments_cap: opts.max_assignments.max(1),
        characterizations: opts.characterizations,
        ..UpdateConfig::default()
    };
    let mut report = RunReport::new(&f);
    let result = match &target.start {
        Some(s) => {
            let pm = pointed(&m, s)?;
            report.time("update", || ctl_update(&pm, &f, &cfg))
        }
        None => report.time("update", || ctl_update_rooted(&m, &f, &cfg)),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return Ok(match e {
                UpdateError::Unsatisfiable(_) => EXIT_UNSAT,
                UpdateError::Budget(_) => EXIT_BUDGET,
                _ => EXIT_INPUT,
            });
        }
    };
    let (admissible, committed) = report.time("filter", || (outcome.admissible(), outcome.committed()));
    report.generated = outcome.candidates.len();
    report.admissible = admissible.len();
    report.committed = committed.len();
    report.truncated = outcome.truncated;
    let identity = outcome.candidates.len() == 1 && outcome.candidates[0].trace.is_empty();
    report.verdict = if identity { Verdict::Satisfied } else { Verdict::Repaired };
    let emitted: Vec<usize> = if opts.committed { committed } else { (0..outcome.candidates.len()).collect() };
    let doc = candidate_document(&outcome, &emitted);
    match &opts.dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| InputError::Write { path: dir.display().to_string(), source })?;
            let all = dir.join("candidates.json");
            write_file(&all, &serde_json::to_string_pretty(&doc).expect("documents serialize"))?;
            report.artifacts.push(all.display().to_string());
            for (k, &i) in emitted.iter().enumerate() {
                let c = &outcome.candidates[i];
                let (name, text) = match opts.format {
                    Format::Json => (format!("candidate_{:03}.json", k + 1), c.user_model().to_json()),
                    Format::Dot => (format!("candidate_{:03}.dot", k + 1), export_dot(&c.model, Some(&c.diff))),
                };
                let path = dir.join(name);
                write_file(&path, &text)?;
                report.artifacts.push(path.display().to_string());
            }
            let summary = dir.join("report.txt");
            report.artifacts.push(summary.display().to_string());
            write_file(&summary, &report.to_text())?;
            let _ = write!(out, "{}", report.to_text());
        }
        None => {
            match opts.format {
                Format::Json => {
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("documents serialize"));
                }
                Format::Dot => {
                    for &i in &emitted {
                        let c = &outcome.candidates[i];
                        let _ = write!(out, "{}", export_dot(&c.model, Some(&c.diff)));
                    }
                }
            }
            let _ = write!(err, "{}", report.to_text());
        }
    }
    if let Some(path) = &opts.report_json {
        write_file(path, &serde_json::to_string_pretty(&report).expect("reports serialize"))?;
    }
    Ok(if identity { EXIT_OK } else { EXIT_VIOLATED })
}

fn cmd_diff(base: &Path, other: &Path, out: &mut dyn Write) -> Result<i32, InputError> {
    let (a, b) = (load_model(base)?, load_model(other)?);
    let _ = writeln!(out, "{}", compute_diff(&a, &b).to_json());
    Ok(EXIT_OK)
}

fn cmd_export(model: &Path, other: Option<&Path>, out: &mut dyn Write) -> Result<i32, InputError> {
    let m = load_model(model)?;
    let text = match other {
        Some(p) => {
            let changed = load_model(p)?;
            export_dot(&changed, Some(&compute_diff(&m, &changed)))
        }
        None => export_dot(&m, None),
    };
    let _ = write!(out, "{text}");
    Ok(EXIT_OK)
}

fn cmd_oracle(target: &Target, max_ops: usize, out: &mut dyn Write) -> Result<i32, InputError> {
    let m = load_model(&target.model)?;
    let f = load_formula(target)?;
    let start = match &target.start {
        Some(s) => s.clone(),
        None => m.init().iter().next().cloned().ok_or(InputError::UnknownStart(String::new()))?,
    };
    let pm = pointed(&m, &start)?;
    let holds = brute_force_check(&pm, &f)?;
    let _ = writeln!(out, "{}: {f} at {start}", if holds { "satisfied" } else { "violated" });
    let budget = EditBudget { max_ops, ..EditBudget::default() };
    let models = brute_force_admissible(&pm, &f, budget)?;
    let _ = writeln!(out, "minimal models within {max_ops} edits: {}", models.len());
    for p in &models {
        let _ = writeln!(out, "start {}: {}", p.start, serde_json::to_string(&pointed_diff(&pm, p)).expect("diffs serialize"));
    }
    Ok(if holds { EXIT_OK } else { EXIT_VIOLATED })
}
