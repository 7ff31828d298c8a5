use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use chasekit::acyclic::forest_from_gcf;
use chasekit::analysis::{classify, normalize_heads};
use chasekit::chase::{restricted_gcf, run_chase, ChaseOptions, ChaseResult, ChaseStatus, Forest, Mode};
use chasekit::clouds::{blocked_saturate, SaturationOptions, SaturationStatus};
use chasekit::egd_sep::{egd_failure_check, monitor_innocuous, separated_answer, FailureVerdict};
use chasekit::model::{Program, Term, Tgd};
use chasekit::parser::parse_program;
use chasekit::query::{certain_answers, check_containment, AnswerOptions, AnswerReport, AnswerStatus, Strategy};
use chasekit::rulesets::{builtin, BUILTINS};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "chasekit", version, about = "Chase-based reasoning over TGDs and EGDs")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Oblivious,
    Restricted,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EgdArg {
    Interleave,
    Separate,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Program file.
    file: Option<PathBuf>,
    /// Built-in program name.
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args)]
struct ChaseArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Restricted)]
    mode: ModeArg,
    #[arg(long, default_value_t = 10_000, value_parser = positive)]
    max_steps: usize,
    #[arg(long, default_value_t = 64, value_parser = positive)]
    max_depth: usize,
    #[arg(long, value_enum, default_value_t = EgdArg::Interleave)]
    egd: EgdArg,
}

#[derive(Subcommand)]
enum Command {
    /// Per-rule guardedness, overall class and affected positions.
    Classify {
        #[command(flatten)]
        input: Input,
    },
    /// Run the chase and print the step log.
    Chase {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        chase: ChaseArgs,
    },
    /// Certain answers of a named query.
    Answer {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "bounded:16", value_parser = parse_strategy)]
        strategy: Strategy,
        #[arg(long, default_value_t = 10_000, value_parser = positive)]
        max_steps: usize,
        #[arg(long, value_enum, default_value_t = EgdArg::Interleave)]
        egd: EgdArg,
    },
    /// Containment of two named queries under the program's dependencies.
    Contain {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q2: String,
        #[arg(long, default_value_t = 10_000, value_parser = positive)]
        budget: usize,
    },
    /// Detect chase failure caused by the EGDs.
    EgdCheck {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 10_000, value_parser = positive)]
        budget: usize,
    },
    /// Print the guarded chase forest.
    Forest {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        chase: ChaseArgs,
        /// Keep only the first node per atom.
        #[arg(long)]
        restricted: bool,
        #[arg(long)]
        dot: bool,
    },
    /// Cloud-store saturation statistics.
    StoreStats {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 100_000, value_parser = positive)]
        max_steps: usize,
        #[arg(long, default_value_t = 8, value_parser = positive)]
        max_rounds: usize,
        #[arg(long, default_value_t = 100_000, value_parser = positive)]
        max_store: usize,
        /// Run even when the rules are not weakly guarded.
        #[arg(long)]
        force: bool,
    },
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: chasekit::query::QueryError| e.to_string())
}

/// A finished command: rendered output and exit code.
struct Outcome {
    text: String,
    json: Value,
    code: u8,
}

impl Outcome {
    fn ok(text: String, json: Value) -> Outcome {
        Outcome { text, json, code: 0 }
    }
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Usage {
        Usage(e.to_string())
    }
}

fn load(input: &Input) -> Result<Program, Usage> {
    match (&input.file, &input.builtin) {
        (_, Some(name)) => builtin(name)
            .ok_or_else(|| Usage(format!("unknown builtin `{name}`; expected one of {}", BUILTINS.join(", ")))),
        (Some(path), None) => {
            let src = std::fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            parse_program(&src).map_err(|e| Usage(format!("{}:{e}", path.display())))
        }
        (None, None) => Err(Usage("no input given".into())),
    }
}

fn memory_limit() -> Result<Option<u64>, Usage> {
    match std::env::var("CHASEKIT_MAX_MEMORY_MB") {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Usage(format!("CHASEKIT_MAX_MEMORY_MB must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn chase_options(a: &ChaseArgs, mem: Option<u64>) -> ChaseOptions {
    ChaseOptions {
        mode: match a.mode {
            ModeArg::Oblivious => Mode::Oblivious,
            ModeArg::Restricted => Mode::Restricted,
        },
        max_steps: a.max_steps,
        max_depth: a.max_depth,
        egd_interleave: a.egd == EgdArg::Interleave,
        memory_limit_mb: mem,
    }
}

fn terms(t: &[Term]) -> Vec<String> {
    t.iter().map(|x| x.to_string()).collect()
}

fn status_code(s: ChaseStatus) -> u8 {
    u8::from(s == ChaseStatus::Failed)
}

fn cmd_classify(p: &Program) -> Outcome {
    let c = classify(&p.tgds);
    let mut text = String::new();
    let mut rules = Vec::new();
    for (i, (t, r)) in p.tgds.iter().zip(&c.per_rule).enumerate() {
        let full = if r.full { " full" } else { "" };
        let guard = r.guard.map(|g| format!(" guard={}", t.body[g])).unwrap_or_default();
        let weak = r.weak_guard.map(|g| format!(" weak-guard={}", t.body[g])).unwrap_or_default();
        let _ = writeln!(text, "rule#{}: {}{full}{guard}{weak}", i + 1, r.class);
        rules.push(json!({
            "rule": i + 1,
            "class": r.class.to_string(),
            "full": r.full,
            "guard": r.guard.map(|g| t.body[g].to_string()),
            "weak_guard": r.weak_guard.map(|g| t.body[g].to_string()),
        }));
    }
    let affected: Vec<String> = c.affected.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(text, "overall: {}", c.overall);
    let _ = writeln!(text, "affected: {}", affected.join(" "));
    let json = json!({ "rules": rules, "overall": c.overall.to_string(), "affected": affected });
    Outcome::ok(text, json)
}

fn chase_json(r: &ChaseResult) -> Value {
    json!({
        "status": r.status.to_string(),
        "steps": r.steps.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "instance": r.instance.sorted().iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        "note": r.note,
        "failure": r.failure.as_ref().map(|f| json!({
            "egd": f.egd + 1,
            "left": f.left.to_string(),
            "right": f.right.to_string(),
        })),
    })
}

fn cmd_chase(p: &Program, tgds: &[Tgd], opts: &ChaseOptions) -> Result<Outcome, Usage> {
    let r = run_chase(&p.facts, tgds, &p.egds, opts)?;
    let mut text = r.step_log();
    let _ = writeln!(text, "status: {}", r.status);
    let _ = writeln!(text, "atoms: {}", r.instance.len());
    if let Some(n) = &r.note {
        let _ = writeln!(text, "note: {n}");
    }
    let mut json = chase_json(&r);
    let mut code = status_code(r.status);
    if !opts.egd_interleave && !p.egds.is_empty() {
        let v = egd_failure_check(&p.facts, tgds, &p.egds, opts.max_steps)?;
        let _ = writeln!(text, "egd-check: {}", v.verdict);
        json["egd_check"] = json!(v.verdict.to_string());
        if v.failed() {
            code = 1;
        }
    }
    Ok(Outcome { text, json, code })
}

fn answer_status(r: &AnswerReport) -> &'static str {
    match r.status {
        AnswerStatus::Failed => "failed",
        _ if !r.answers.is_empty() => "sat",
        AnswerStatus::Exact => "unsat",
        AnswerStatus::SoundLowerBound => "unknown",
    }
}

fn cmd_answer(
    p: &Program,
    tgds: &[Tgd],
    name: &str,
    strategy: Strategy,
    opts: &AnswerOptions,
    egd: EgdArg,
) -> Result<Outcome, Usage> {
    let q = p.query(name).ok_or_else(|| Usage(format!("no query named `{name}`")))?;
    let r = match egd {
        EgdArg::Interleave => certain_answers(&p.facts, tgds, &p.egds, q, strategy, opts)?,
        EgdArg::Separate => separated_answer(&p.facts, tgds, &p.egds, q, strategy, opts)?,
    };
    let status = answer_status(&r);
    let answers: Vec<Vec<String>> = r.answers.iter().map(|t| terms(t)).collect();
    let mut text = format!("query: {name}\nstatus: {status}\n");
    for a in &answers {
        let _ = writeln!(text, "({})", a.join(","));
    }
    if r.budget_exhausted {
        text.push_str("budget-exhausted\n");
    }
    if let Some(n) = &r.note {
        let _ = writeln!(text, "note: {n}");
    }
    let json = json!({
        "query": name,
        "status": status,
        "answers": answers,
        "budget_exhausted": r.budget_exhausted,
    });
    Ok(Outcome { text, json, code: u8::from(r.status == AnswerStatus::Failed) })
}

fn cmd_contain(p: &Program, tgds: &[Tgd], q1: &str, q2: &str, budget: usize) -> Result<Outcome, Usage> {
    let find = |n: &str| p.query(n).ok_or_else(|| Usage(format!("no query named `{n}`")));
    let c = check_containment(find(q1)?, find(q2)?, tgds, &p.egds, budget)?;
    Ok(Outcome::ok(format!("{q1} in {q2}: {c}\n"), json!({ "q1": q1, "q2": q2, "result": c.to_string() })))
}

fn cmd_egd_check(p: &Program, tgds: &[Tgd], budget: usize, mem: Option<u64>) -> Result<Outcome, Usage> {
    let v = egd_failure_check(&p.facts, tgds, &p.egds, budget)?;
    let mut text = format!("verdict: {}\n", v.verdict);
    let mut json = json!({ "verdict": v.verdict.to_string() });
    if let Some((i, h)) = &v.witness {
        let _ = writeln!(text, "witness: egd#{} WITH {h}", i + 1);
        json["witness"] = json!({ "egd": i + 1, "hom": h.to_string() });
    }
    if v.verdict != FailureVerdict::Failed && !p.egds.is_empty() {
        let opts = ChaseOptions { max_steps: budget, max_depth: usize::MAX, memory_limit_mb: mem, ..ChaseOptions::default() };
        let m = monitor_innocuous(&p.facts, tgds, &p.egds, &opts)?;
        let _ = writeln!(text, "egd applications: {} (all innocuous: {})", m.applications, m.all_innocuous);
        json["applications"] = json!(m.applications);
        json["all_innocuous"] = json!(m.all_innocuous);
    }
    Ok(Outcome { text, json, code: u8::from(v.failed()) })
}

fn forest_text(f: &Forest) -> String {
    let mut text = String::new();
    for (i, n) in f.nodes.iter().enumerate() {
        let indent = "  ".repeat(n.depth);
        let origin = match (n.parent, n.rule) {
            (Some(p), Some(r)) => format!(" <- n{p} BY rule#{}", r + 1),
            (None, Some(r)) => format!(" BY rule#{}", r + 1),
            _ => String::new(),
        };
        let dup = if n.duplicate { " dup" } else { "" };
        let _ = writeln!(text, "{indent}n{i} {}{origin}{dup}", n.atom);
    }
    text
}

fn cmd_forest(p: &Program, tgds: &[Tgd], opts: &ChaseOptions, restricted: bool, dot: bool) -> Result<Outcome, Usage> {
    let r = run_chase(&p.facts, tgds, &p.egds, opts)?;
    let f = if restricted { restricted_gcf(&r.forest) } else { r.forest.clone() };
    let mut text = if dot { f.to_dot() } else { forest_text(&f) };
    if !dot {
        let _ = writeln!(text, "status: {}", r.status);
    }
    let join_ok = p.egds.is_empty() && forest_from_gcf(&r.forest, &p.facts).validate(&r.instance.sorted().into_iter().cloned().collect::<Vec<_>>()).is_ok();
    let nodes: Vec<Value> = f
        .nodes
        .iter()
        .map(|n| {
            json!({
                "atom": n.atom.to_string(),
                "parent": n.parent,
                "rule": n.rule.map(|r| r + 1),
                "depth": n.depth,
                "duplicate": n.duplicate,
            })
        })
        .collect();
    let json = json!({
        "status": r.status.to_string(),
        "complete": f.complete,
        "max_depth": f.max_depth(),
        "join_forest": join_ok,
        "nodes": nodes,
    });
    Ok(Outcome { text, json, code: status_code(r.status) })
}

fn cmd_store_stats(p: &Program, tgds: &[Tgd], opts: &SaturationOptions) -> Result<Outcome, Usage> {
    let s = blocked_saturate(&p.facts, tgds, opts)?;
    let status = match s.status {
        SaturationStatus::Stabilized => "stabilized",
        SaturationStatus::BudgetExhausted => "budget-exhausted",
    };
    let text = format!(
        "entries: {}\nmax cloud size: {}\ncloud bound: {}\nrounds: {}\nground atoms: {}\nblocked: {}\nstatus: {status}\n",
        s.store.len(),
        s.max_cloud_size(),
        s.cloud_bound,
        s.rounds,
        s.ground.len(),
        s.blocked,
    );
    let json = json!({
        "entries": s.store.len(),
        "max_cloud_size": s.max_cloud_size(),
        "cloud_bound": s.cloud_bound,
        "rounds": s.rounds,
        "ground_atoms": s.ground.len(),
        "blocked": s.blocked,
        "status": status,
    });
    Ok(Outcome::ok(text, json))
}

fn run(cli: &Cli) -> Result<Outcome, Usage> {
    let mem = memory_limit()?;
    match &cli.command {
        Command::Classify { input } => Ok(cmd_classify(&load(input)?)),
        Command::Chase { input, chase } => {
            let p = load(input)?;
            cmd_chase(&p, &normalize_heads(&p.tgds), &chase_options(chase, mem))
        }
        Command::Answer { input, query, strategy, max_steps, egd } => {
            let p = load(input)?;
            let opts = AnswerOptions { max_steps: *max_steps, memory_limit_mb: mem };
            cmd_answer(&p, &normalize_heads(&p.tgds), query, *strategy, &opts, *egd)
        }
        Command::Contain { input, q1, q2, budget } => {
            let p = load(input)?;
            cmd_contain(&p, &normalize_heads(&p.tgds), q1, q2, *budget)
        }
        Command::EgdCheck { input, budget } => {
            let p = load(input)?;
            cmd_egd_check(&p, &normalize_heads(&p.tgds), *budget, mem)
        }
        Command::Forest { input, chase, restricted, dot } => {
            let p = load(input)?;
            cmd_forest(&p, &normalize_heads(&p.tgds), &chase_options(chase, mem), *restricted, *dot)
        }
        Command::StoreStats { input, max_steps, max_rounds, max_store, force } => {
            let p = load(input)?;
            let opts =
                SaturationOptions { max_steps: *max_steps, max_rounds: *max_rounds, max_store: *max_store, force: *force };
            cmd_store_stats(&p, &normalize_heads(&p.tgds), &opts)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            match cli.format {
                Format::Text => print!("{}", out.text),
                Format::Json => println!("{}", out.json),
            }
            ExitCode::from(out.code)
        }
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
