//! `qm-adapt`: validate, rank, tailor, work through tasks, audit and serve.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qm_adapt::audit::{audit, diff_models, AdaptationDelta};
use qm_adapt::canonical::to_canonical_string;
use qm_adapt::engine::{EngineError, Operation, Session, Task, TaskStatus};
use qm_adapt::goal::Parameter;
use qm_adapt::model::{validate, Purpose};
use qm_adapt::rational::{self, Rational};
use qm_adapt::store::{self, StoreError};
use qm_adapt::tailor::{apply_tailoring, plan_tailoring, TailorError, TailoringOptions};

#[derive(Parser)]
#[command(name = "qm-adapt", version, about = "Goal-driven adaptation of software quality models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a model against the validation rules.
    Validate {
        model: PathBuf,
        /// Rules depend on the purpose; defaults to the model's own goal.
        #[arg(long)]
        purpose: Option<Purpose>,
        #[arg(long)]
        json: bool,
    },
    /// Rank the reference models of a pool against a goal.
    Rank {
        goal: PathBuf,
        #[arg(long, env = "QM_ADAPT_POOL")]
        pool: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Tailor a reference model to a goal.
    Tailor {
        model: PathBuf,
        goal: PathBuf,
        /// Session directory to create.
        #[arg(long, required_unless_present = "dry_run")]
        out: Option<PathBuf>,
        /// Print the plan without applying it.
        #[arg(long)]
        dry_run: bool,
        /// Skip review items for context values the model does not state.
        #[arg(long)]
        no_tr10: bool,
        /// Goal of the reference model when it has none embedded.
        #[arg(long)]
        reference_goal: Option<PathBuf>,
    },
    /// List, complete or waive the tasks of a session directory.
    Tasks {
        session: PathBuf,
        #[command(subcommand)]
        action: Option<TaskCmd>,
    },
    /// Compare an adaptation against a gold delta.
    Audit {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        adapted: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Time spent, as a number or a fraction like 45/2.
        #[arg(long)]
        minutes: String,
        /// Count modifications per element instead of per field.
        #[arg(long)]
        element_level: bool,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "QM_ADAPT_POOL")]
        pool: PathBuf,
        /// Directory for session persistence; in memory when absent.
        #[arg(long)]
        sessions: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Subcommand)]
enum TaskCmd {
    List {
        /// Include closed tasks.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        json: bool,
    },
    Complete {
        task_id: String,
        /// JSON file with an array of operations.
        #[arg(long)]
        ops: Option<PathBuf>,
    },
    Waive {
        task_id: String,
        #[arg(long)]
        note: String,
    },
}

/// Exit 1 for domain failures, 2 for usage and I/O.
enum Failure {
    Domain(String),
    Usage(String),
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Engine(e) => e.into(),
            e => Failure::Usage(e.to_string()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<TailorError> for Failure {
    fn from(e: TailorError) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Validate { model, purpose, json } => cmd_validate(&model, purpose, json),
        Cmd::Rank { goal, pool, json } => cmd_rank(&goal, &pool, json),
        Cmd::Tailor { model, goal, out, dry_run, no_tr10, reference_goal } => {
            cmd_tailor(&model, &goal, out.as_deref(), dry_run, !no_tr10, reference_goal.as_deref())
        }
        Cmd::Tasks { session, action } => cmd_tasks(&session, action.unwrap_or(TaskCmd::List { all: false, json: false })),
        Cmd::Audit { base, adapted, gold, minutes, element_level, json } => {
            cmd_audit(&base, &adapted, &gold, &minutes, element_level, json)
        }
        Cmd::Serve { port, pool, sessions, host } => cmd_serve(SocketAddr::new(host, port), pool, sessions),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn print_json<T: serde::Serialize + ?Sized>(value: &T) {
    print!("{}", to_canonical_string(value));
}

fn cmd_validate(path: &Path, purpose: Option<Purpose>, json: bool) -> Outcome {
    let model = store::load_model(path)?;
    let purpose = purpose.or_else(|| model.meta.goal.as_ref().map(|g| g.purpose)).unwrap_or_default();
    let violations = validate(&model, purpose);
    if json {
        print_json(&serde_json::json!({"purpose": purpose, "violations": violations}));
    } else {
        for v in &violations {
            println!("{v}");
        }
        println!("{} violation(s) for purpose {purpose}", violations.len());
    }
    Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_rank(goal: &Path, pool: &Path, json: bool) -> Outcome {
    let ga = store::load_goal(goal)?;
    let pool = store::load_pool(pool)?;
    let ranking = pool.rank(&ga).map_err(|e| Failure::Domain(e.to_string()))?;
    if json {
        print_json(&ranking);
        return Ok(ExitCode::SUCCESS);
    }
    let params = [Parameter::Object, Parameter::Purpose, Parameter::Viewpoint, Parameter::Focus, Parameter::Context];
    print!("{:<24} {:>8}", "model", "total");
    for p in params {
        print!(" {:>10}", p.as_str());
    }
    println!();
    for r in &ranking.ranked {
        print!("{:<24} {:>8}", r.model_id, rational::format(&r.fitness.total));
        for p in params {
            let v = r.fitness.per_parameter.get(&p).map(rational::format).unwrap_or_default();
            print!(" {v:>10}");
        }
        println!();
    }
    for s in &ranking.skipped {
        println!("{:<24} skipped: {}", s.model_id, s.reason);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_tailor(
    model_path: &Path,
    goal: &Path,
    out: Option<&Path>,
    dry_run: bool,
    tr10: bool,
    reference_goal: Option<&Path>,
) -> Outcome {
    let model = store::load_model(model_path)?;
    let ga = store::load_goal(goal)?;
    let gr = match reference_goal {
        Some(p) => store::load_goal(p)?,
        None => model.meta.goal.clone().ok_or_else(|| {
            Failure::Usage(format!("{}: no embedded goal; pass --reference-goal", model_path.display()))
        })?,
    };
    let plan = plan_tailoring(&model, &ga, &gr, TailoringOptions { tr10 });
    if dry_run {
        print_json(&plan);
        return Ok(ExitCode::SUCCESS);
    }
    let dir = out.expect("clap requires --out without --dry-run");
    let mut session = Session::new(model, ga);
    let applied = apply_tailoring(&mut session, &plan)?;
    store::persist_session(&session, dir)?;
    store::save_report(&applied, dir.join(store::REPORT_FILE))?;
    print_json(&applied);
    Ok(ExitCode::SUCCESS)
}

fn print_tasks(tasks: &[&Task]) {
    for t in tasks {
        let target = t.target.as_ref().map(|t| t.as_str()).unwrap_or("-");
        println!("{:<5} {:<9} {:<28} {:<8} {}", t.task_id, t.status, t.template_id, target, t.text);
    }
}

fn cmd_tasks(dir: &Path, action: TaskCmd) -> Outcome {
    let mut session = store::restore_session(dir)?;
    match action {
        TaskCmd::List { all, json } => {
            let tasks: Vec<&Task> = session.tasks().iter().filter(|t| all || t.status == TaskStatus::Open).collect();
            if json {
                print_json(&tasks);
            } else {
                print_tasks(&tasks);
            }
            return Ok(ExitCode::SUCCESS);
        }
        TaskCmd::Complete { task_id, ops } => {
            let ops: Vec<Operation> = match ops {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
                }
                None => Vec::new(),
            };
            session.complete_task(&task_id, ops)?;
        }
        TaskCmd::Waive { task_id, note } => {
            session.waive_task(&task_id, &note)?;
        }
    }
    store::persist_session(&session, dir)?;
    let record = session.log().last().expect("a command was just executed");
    print_json(record);
    Ok(ExitCode::SUCCESS)
}

fn parse_minutes(text: &str) -> Result<Rational, Failure> {
    rational::parse_decimal(text)
        .or_else(|| rational::parse_fraction(text))
        .ok_or_else(|| Failure::Usage(format!("--minutes: `{text}` is not a number")))
}

fn cmd_audit(base: &Path, adapted: &Path, gold: &Path, minutes: &str, element_level: bool, json: bool) -> Outcome {
    let minutes = parse_minutes(minutes)?;
    let base = store::load_model(base)?;
    let adapted = store::load_model(adapted)?;
    let mut gold = store::load_delta(gold)?;
    let mut performed = diff_models(&base, &adapted);
    if element_level {
        let fold = |d: AdaptationDelta| AdaptationDelta::new(d.entries, true).map_err(|e| Failure::Domain(e.to_string()));
        gold = fold(gold)?;
        performed = fold(performed)?;
    }
    let result = audit(&performed, &gold, minutes).map_err(|e| Failure::Domain(e.to_string()))?;
    if json {
        print_json(&result);
    } else {
        println!("gold entries:  {}", result.gold_size);
        println!("completeness:  {}", rational::format(&result.completeness));
        println!("correctness:   {}", rational::format(&result.correctness));
        println!("efficiency:    {} per minute", rational::format(&result.efficiency));
        for k in &result.incorrect_entries {
            println!("incorrect: {k}");
        }
        for k in &result.missed_entries {
            println!("missed:    {k}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(addr: SocketAddr, pool: PathBuf, sessions: Option<PathBuf>) -> Outcome {
    let config = qm_adapt_service::Config { pool_dir: pool, session_root: sessions };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
    rt.block_on(qm_adapt_service::serve(config, addr)).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(ExitCode::SUCCESS)
}
