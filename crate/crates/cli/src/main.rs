use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use rarobj_core::assertion::eval_assertion;
use rarobj_core::explore::{explore, ExploreOptions, WitnessStep, DEFAULT_MAX_STEPS};
use rarobj_core::fifo::check_fifo;
use rarobj_core::litmus::{parse_litmus, LitmusError, LitmusFile};
use rarobj_core::outline::{check_hoare, check_outline, Verdict};
use rarobj_core::refinement::{check_simulation, check_trace_inclusion, Instance, LockImpl, RefinementError};
use rarobj_core::{ModelError, Value};

#[derive(Parser)]
#[command(name = "rarobj", version, about = "Explore and verify release-acquire litmus programs over abstract objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Bound {
    /// Maximum number of macro-steps explored from the initial state.
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    /// Worker threads for state-space construction.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl Bound {
    fn options(self) -> ExploreOptions {
        ExploreOptions {
            max_steps: self.max_steps,
            jobs: self.jobs.max(1),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate terminal outcomes; checks the final assertion if present.
    Explore {
        file: PathBuf,
        #[command(flatten)]
        bound: Bound,
        #[arg(long)]
        json: bool,
    },
    /// Check the proof outline (annotations, invariant, final assertion).
    Outline {
        file: PathBuf,
        #[command(flatten)]
        bound: Bound,
        #[arg(long)]
        json: bool,
    },
    /// Check the triple {pre} program {final}.
    Hoare {
        file: PathBuf,
        #[command(flatten)]
        bound: Bound,
        #[arg(long)]
        json: bool,
    },
    /// Check a lock implementation against the abstract lock under a client.
    Refine {
        /// seqlock, ticketlock, seqlock-relaxed or ticketlock-relaxed;
        /// defaults to the client's `impl=` declaration.
        #[arg(long = "impl")]
        implementation: Option<String>,
        #[arg(long)]
        client: PathBuf,
        #[command(flatten)]
        bound: Bound,
        #[arg(long)]
        json: bool,
    },
    /// Brute-force oracles.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Subcommand)]
enum Oracle {
    /// Compare the abstract queue with a sequential FIFO queue on every
    /// two-thread workload.
    Fifo {
        #[arg(long)]
        enqs: usize,
        /// Defaults to the number of enqueues.
        #[arg(long)]
        deqs: Option<usize>,
        #[command(flatten)]
        bound: Bound,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Litmus(PathBuf, LitmusError),
    #[error(transparent)]
    Invalid(#[from] LitmusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Refinement(#[from] RefinementError),
    #[error("{0}")]
    Usage(String),
}

const INPUT_ERROR: u8 = 3;

fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Valid => 0,
        Verdict::Violated => 1,
        Verdict::UnknownBeyondBound => 2,
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Valid => "valid",
        Verdict::Violated => "violated",
        Verdict::UnknownBeyondBound => "unknown beyond bound",
    }
}

fn load(path: &Path) -> Result<LitmusFile, CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_owned(), e))?;
    parse_litmus(&src).map_err(|e| CliError::Litmus(path.to_owned(), e))
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("reports serialise"));
}

fn print_witness(w: &[WitnessStep]) {
    for (i, s) in w.iter().enumerate() {
        println!("    {:>3}. thread {}: {}", i + 1, s.thread, s.label);
    }
}

fn show_outcome(o: &BTreeMap<String, Value>) -> String {
    if o.is_empty() {
        return "(no observed registers)".into();
    }
    o.iter().map(|(r, v)| format!("{r} = {v}")).collect::<Vec<_>>().join(", ")
}

#[derive(Serialize)]
struct ExploreJson<'a> {
    verdict: Verdict,
    states_explored: usize,
    outcomes: Vec<&'a BTreeMap<String, Value>>,
    witness: Vec<WitnessStep>,
    truncated: bool,
}

fn run_explore(file: &Path, bound: Bound, json: bool) -> Result<u8, CliError> {
    let f = load(file)?;
    let m = f.model()?;
    let opts = bound.options();
    let r = explore(&m.system, &m.init, &m.observe, opts)?;
    let mut witness = Vec::new();
    if let Some(post) = &f.post {
        for i in r.terminals() {
            if !eval_assertion(post, &r.graph.nodes[i])? {
                witness = r.graph.path_to(i);
                break;
            }
        }
    }
    let verdict = if !witness.is_empty() {
        Verdict::Violated
    } else if r.truncated {
        Verdict::UnknownBeyondBound
    } else {
        Verdict::Valid
    };
    if json {
        print_json(&ExploreJson {
            verdict,
            states_explored: r.states(),
            outcomes: r.outcomes.keys().collect(),
            witness,
            truncated: r.truncated,
        });
    } else {
        let n = r.outcomes.len();
        println!("{}: {} states, {n} outcome{}", m.name, r.states(), if n == 1 { "" } else { "s" });
        for o in r.outcomes.keys() {
            println!("  {}", show_outcome(o));
        }
        if !r.deadlocks.is_empty() {
            println!("  {} blocked states", r.deadlocks.len());
        }
        if r.truncated {
            println!("  exploration cut off at {} steps", opts.max_steps);
        }
        if f.post.is_some() {
            println!("final assertion: {}", verdict_name(verdict));
            print_witness(&witness);
        }
    }
    Ok(exit_code(verdict))
}

fn run_outline(file: &Path, bound: Bound, json: bool) -> Result<u8, CliError> {
    let m = load(file)?.model()?;
    let rep = check_outline(&m.system, &m.init, &m.outline, bound.options())?;
    if json {
        print_json(&rep);
    } else {
        println!("{}: {} states", m.name, rep.states_explored);
        for c in &rep.checks {
            println!("  {:<24} {}", c.check, if c.holds { "valid" } else { "violated" });
        }
        for v in &rep.violations {
            println!("{} ({:?}):", v.check, v.kind);
            print_witness(&v.witness);
        }
        println!("verdict: {}", verdict_name(rep.verdict));
    }
    Ok(exit_code(rep.verdict))
}

fn run_hoare(file: &Path, bound: Bound, json: bool) -> Result<u8, CliError> {
    let f = load(file)?;
    let pre = f.pre.clone().unwrap_or(rarobj_core::assertion::Assertion::Bool(true));
    let post = f
        .post
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{}: no final assertion", file.display())))?;
    let m = f.model()?;
    let rep = check_hoare(&m.system, &m.init, &pre, &post, bound.options())?;
    if json {
        print_json(&rep);
    } else {
        println!("{}: {} states", m.name, rep.states_explored);
        println!("{{{pre}}} program {{{post}}}: {}", verdict_name(rep.verdict));
        if let Some(w) = &rep.witness {
            print_witness(w);
        }
    }
    Ok(exit_code(rep.verdict))
}

#[derive(Serialize)]
struct RefineJson<'a> {
    implementation: &'a str,
    simulation: &'a rarobj_core::refinement::SimulationReport,
    trace_inclusion: &'a rarobj_core::refinement::TraceReport,
}

fn run_refine(implementation: Option<String>, client: &Path, bound: Bound, json: bool) -> Result<u8, CliError> {
    let f = load(client)?;
    let name = implementation
        .or_else(|| f.object.as_ref().and_then(|o| o.implementation.clone()))
        .ok_or_else(|| CliError::Usage("no implementation given (use --impl)".into()))?;
    let imp: LockImpl = name.parse()?;
    let inst = Instance::new(&f, &imp.implementation())?;
    let opts = bound.options();
    let sim = check_simulation(&inst, opts)?;
    let tr = check_trace_inclusion(&inst, opts)?;
    if json {
        print_json(&RefineJson {
            implementation: imp.name(),
            simulation: &sim,
            trace_inclusion: &tr,
        });
    } else {
        println!(
            "{imp} under {}: {} abstract, {} concrete states",
            f.name, sim.abstract_states, sim.concrete_states
        );
        match (&sim.verdict, &sim.counterexample) {
            (Verdict::Valid, _) => println!("simulation found ({} pairs)", sim.pairs),
            (Verdict::UnknownBeyondBound, _) => println!("simulation holds up to the bound ({} pairs)", sim.pairs),
            (Verdict::Violated, cex) => {
                println!("no simulation");
                if let Some(cex) = cex {
                    println!("  {}", cex.reason);
                    for (i, s) in cex.steps.iter().enumerate() {
                        let a = s
                            .abstract_
                            .as_ref()
                            .map_or("stutter".to_string(), |a| format!("thread {}: {}", a.thread, a.label));
                        println!("    {:>3}. thread {}: {}  ~  {a}", i + 1, s.concrete.thread, s.concrete.label);
                    }
                }
            }
        }
        println!("trace inclusion: {} ({} sets)", verdict_name(tr.verdict), tr.explored);
        if let Some(w) = &tr.witness {
            print_witness(w);
        }
    }
    Ok(combine(sim.verdict, tr.verdict))
}

/// A violation anywhere wins over an exhausted bound.
fn combine(a: Verdict, b: Verdict) -> u8 {
    if a == Verdict::Violated || b == Verdict::Violated {
        1
    } else {
        exit_code(a).max(exit_code(b))
    }
}

fn run_fifo(enqs: usize, deqs: Option<usize>, bound: Bound) -> Result<u8, CliError> {
    let deqs = deqs.unwrap_or(enqs);
    let rep = check_fifo(enqs, deqs, bound.options())?;
    println!(
        "{} workloads (up to {enqs} enqueues, {deqs} dequeues), {} states",
        rep.workloads, rep.states
    );
    for f in &rep.failures {
        println!("  disagrees: {}", f.workload);
        for o in &f.unexpected {
            println!("    model only: {o:?}");
        }
        for o in &f.missing {
            println!("    oracle only: {o:?}");
        }
        if f.disordered > 0 {
            println!("    {} states with crossing matched pairs", f.disordered);
        }
        if f.truncated {
            println!("    exploration cut off");
        }
    }
    if rep.failures.is_empty() {
        println!("all agree with the FIFO oracle");
        Ok(0)
    } else if rep.failures.iter().all(|f| f.truncated && f.unexpected.is_empty() && f.disordered == 0) {
        Ok(2)
    } else {
        Ok(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.command {
        Command::Explore { file, bound, json } => run_explore(&file, bound, json),
        Command::Outline { file, bound, json } => run_outline(&file, bound, json),
        Command::Hoare { file, bound, json } => run_hoare(&file, bound, json),
        Command::Refine {
            implementation,
            client,
            bound,
            json,
        } => run_refine(implementation, &client, bound, json),
        Command::Oracle(Oracle::Fifo { enqs, deqs, bound }) => run_fifo(enqs, deqs, bound),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
