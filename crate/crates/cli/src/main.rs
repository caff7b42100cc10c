//! `fragmon`: condition synthesis, fragment collection, trace reconstruction
//! and evaluation from the command line.
//!
//! Exit status is 0 on success, 1 when an input is invalid (bad flags,
//! unreadable or malformed files, mismatched condition sets) and 2 on
//! internal failures such as symbolic execution exceeding its limits.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fragmon::callgraph::{build_call_graph, relevant_set, to_dot, DEFAULT_DEPTH};
use fragmon::harness::{
    evaluate_report, generate_source, synthesize_conditions, EvalConfig, EvalReport,
    GeneratorParams, HarnessError,
};
use fragmon::ir::{parse_program, SubjectProgram};
use fragmon::monitor::{
    read_fragments, run_monitored_with, write_fragments, CompiledConditions, FragmentSet,
    RecordingPolicy, RunOptions, DEFAULT_INSTALLATION,
};
use fragmon::reconstruct::{
    build_event_automaton, reconstruct, write_traces, ChainBounds, FeasibilityChecker,
    DEFAULT_MAX_CHAIN_LENGTH, DEFAULT_MAX_OUTPUTS,
};
use fragmon::symexec::{ConditionSet, SymConfig, DEFAULT_LOOP_BOUND};
use fragmon::VEHICLE_PROGRAM;

#[derive(Parser)]
#[command(name = "fragmon", version, about = "Fragmented monitoring toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the condition set of a program.
    Synth(SynthArgs),
    /// Run a program under a recording policy and write its fragments.
    Monitor(MonitorArgs),
    /// Chain fragments into longer traces.
    Reconstruct(ReconstructArgs),
    /// Run the whole pipeline and print metrics as one JSON line.
    Eval(EvalArgs),
    /// Print a randomly generated subject program.
    Gen(GenArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Subject program (`.subj`), or `vehicle` for the bundled example.
    #[arg(long)]
    program: String,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long, default_value_t = DEFAULT_LOOP_BOUND)]
    loop_bound: usize,
    /// Condition file to write; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the call graph, with relevant methods highlighted, as DOT.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyName {
    Default,
    AlwaysOn,
    AlwaysOff,
}

#[derive(Args)]
struct PolicyArgs {
    /// Built-in recording policy.
    #[arg(long, value_enum, default_value = "default")]
    policy: PolicyName,
    /// JSON file with a full policy; overrides `--policy`.
    #[arg(long)]
    policy_file: Option<PathBuf>,
    /// Seed of the built-in default policy.
    #[arg(long, default_value_t = 0)]
    policy_seed: u64,
}

impl PolicyArgs {
    fn load(&self) -> Result<RecordingPolicy> {
        let policy = match &self.policy_file {
            Some(path) => {
                let text = read_text(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| invalid(format!("{}: {e}", path.display())))?
            }
            None => match self.policy {
                PolicyName::Default => RecordingPolicy::default_with_seed(self.policy_seed),
                PolicyName::AlwaysOn => RecordingPolicy::always_on(),
                PolicyName::AlwaysOff => RecordingPolicy::always_off(),
            },
        };
        policy.validate().map_err(invalid)?;
        Ok(policy)
    }
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long)]
    program: String,
    /// Condition file written by `synth`.
    #[arg(long)]
    conditions: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Number of runs; run `k` uses input seed `first_seed + k`.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value = DEFAULT_INSTALLATION)]
    installation: String,
    /// Omit the trace indices, as a production monitor would.
    #[arg(long)]
    no_indices: bool,
    /// Fragment file to write; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// One or more fragment files; they must share a condition set.
    #[arg(long, required = true, num_args = 1..)]
    fragments: Vec<PathBuf>,
    #[arg(long)]
    conditions: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_CHAIN_LENGTH)]
    max_chain: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_OUTPUTS)]
    max_outputs: usize,
    /// Program the fragments came from; adds a control-flow verdict to
    /// every trace.
    #[arg(long)]
    program: Option<String>,
    /// Trace file to write; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Seeds the generated program and the default policy.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    runs: u64,
    /// Evaluate this program instead of a generated one.
    #[arg(long)]
    program: Option<String>,
    /// Built-in policy; the default one is seeded with `--seed`.
    #[arg(long, value_enum, default_value = "default")]
    policy: PolicyName,
    #[arg(long)]
    policy_file: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long, default_value_t = DEFAULT_LOOP_BOUND)]
    loop_bound: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_CHAIN_LENGTH)]
    max_chain: usize,
    /// Generated programs may null out globals.
    #[arg(long)]
    allow_faults: bool,
    /// Also store program, fragments, traces and report under this
    /// directory.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    services: Option<usize>,
    #[arg(long)]
    methods: Option<usize>,
    #[arg(long)]
    allow_faults: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error caused by the user's input rather than by the tool.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(e: impl ToString) -> anyhow::Error {
    Invalid(e.to_string()).into()
}

fn harness_error(e: HarnessError) -> anyhow::Error {
    match e {
        HarnessError::SymExec(_) | HarnessError::Feasibility(_) => e.into(),
        _ => invalid(e),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_program(source: &str) -> Result<SubjectProgram> {
    let text = if source == "vehicle" && !Path::new(source).exists() {
        VEHICLE_PROGRAM.to_string()
    } else {
        read_text(Path::new(source))?
    };
    parse_program(&text).map_err(|e| invalid(format!("{source}: {e}")))
}

fn load_conditions(path: &Path, program: Option<&SubjectProgram>) -> Result<ConditionSet> {
    let (set, header) = ConditionSet::parse_file(&read_text(path)?)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if let (Some(p), Some(h)) = (program, &header.program_hash) {
        let actual = p.content_hash();
        if *h != actual {
            bail!(invalid(format!(
                "{}: written for program {h}, not {actual}",
                path.display()
            )));
        }
    }
    Ok(set)
}

fn write_output(
    out: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let program = load_program(&args.program)?;
    let sym = SymConfig {
        loop_bound: args.loop_bound,
        ..SymConfig::default()
    };
    let set = synthesize_conditions(&program, args.depth, &sym).map_err(harness_error)?;
    let text = set.to_file_string(Some(&program.content_hash()));
    write_output(args.out.as_deref(), |w| w.write_all(text.as_bytes()))?;
    if let Some(path) = &args.dot {
        let cg = build_call_graph(&program);
        let relevance =
            relevant_set(&program, &cg, &program.interfaces, args.depth).map_err(invalid)?;
        fs::write(path, to_dot(&program, &cg, Some(&relevance)))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn monitor(args: MonitorArgs) -> Result<()> {
    let program = load_program(&args.program)?;
    let set = load_conditions(&args.conditions, Some(&program))?;
    let policy = args.policy.load()?;
    let compiled = CompiledConditions::new(&program, set).map_err(invalid)?;
    let options = RunOptions {
        installation: args.installation.clone(),
        ..RunOptions::default()
    };
    let mut all = FragmentSet::new(compiled.hash());
    for k in 0..args.runs {
        let run = run_monitored_with(&program, &compiled, &policy, args.first_seed + k, &options);
        all.fragments.extend(run.fragments.fragments);
    }
    write_output(args.out.as_deref(), |w| {
        write_fragments(&all, w, !args.no_indices).map(|_| ())
    })
}

fn reconstruct_cmd(args: ReconstructArgs) -> Result<()> {
    let program = args.program.as_deref().map(load_program).transpose()?;
    let set = load_conditions(&args.conditions, program.as_ref())?;
    let mut fragments = FragmentSet::new(set.hash());
    for path in &args.fragments {
        let file = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let part = read_fragments(&mut BufReader::new(file), &set.hash(), set.len())
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        fragments.merge(part).map_err(invalid)?;
    }
    let bounds = ChainBounds {
        max_chain_length: args.max_chain,
        max_outputs: args.max_outputs,
    };
    if bounds.max_chain_length == 0 || bounds.max_outputs == 0 {
        bail!(invalid("--max-chain and --max-outputs must be positive"));
    }
    let traces = reconstruct(&fragments, &bounds);
    let verdicts = match &program {
        Some(p) => {
            let automaton = build_event_automaton(p);
            let mut checker = FeasibilityChecker::new(&automaton);
            let v = traces
                .iter()
                .map(|t| checker.feasible(&t.events))
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            Some(v)
        }
        None => None,
    };
    write_output(args.out.as_deref(), |w| {
        write_traces(&fragments.cshash, &traces, verdicts.as_deref(), w).map(|_| ())
    })
}

fn eval(args: EvalArgs) -> Result<()> {
    let (program, name) = match &args.program {
        Some(source) => {
            let stem = Path::new(source)
                .file_stem()
                .map_or_else(|| source.clone(), |s| s.to_string_lossy().into_owned());
            (load_program(source)?, stem)
        }
        None => {
            let params = GeneratorParams {
                allow_faults: args.allow_faults,
                ..GeneratorParams::with_seed(args.seed)
            };
            let source = generate_source(&params).map_err(invalid)?;
            (parse_program(&source)?, format!("gen_seed{}", args.seed))
        }
    };
    let policy = PolicyArgs {
        policy: args.policy,
        policy_file: args.policy_file.clone(),
        policy_seed: args.seed,
    }
    .load()?;
    let config = EvalConfig {
        depth: args.depth,
        loop_bound: args.loop_bound,
        max_chain_length: args.max_chain,
        ..EvalConfig::default()
    };
    let report = evaluate_report(&program, args.runs, &policy, &config).map_err(harness_error)?;
    let json = serde_json::to_string(&report.metrics)?;
    if let Some(dir) = &args.corpus {
        write_corpus(dir, &name, &program, &report, &json)?;
    }
    println!("{json}");
    Ok(())
}

/// Layout: `programs/<name>.subj`, `fragments/<name>.jsonl`,
/// `traces/<name>.jsonl` and `reports/<name>.json`.
fn write_corpus(
    dir: &Path,
    name: &str,
    program: &SubjectProgram,
    report: &EvalReport,
    metrics_json: &str,
) -> Result<()> {
    for sub in ["programs", "fragments", "traces", "reports"] {
        fs::create_dir_all(dir.join(sub)).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(
        dir.join("programs").join(format!("{name}.subj")),
        program.to_source(),
    )?;
    let mut w = BufWriter::new(File::create(
        dir.join("fragments").join(format!("{name}.jsonl")),
    )?);
    write_fragments(&report.fragments, &mut w, true)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(
        dir.join("traces").join(format!("{name}.jsonl")),
    )?);
    write_traces(&report.fragments.cshash, &report.traces, None, &mut w)?;
    w.flush()?;
    fs::write(
        dir.join("reports").join(format!("{name}.json")),
        format!("{metrics_json}\n"),
    )?;
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let defaults = GeneratorParams::with_seed(args.seed);
    let params = GeneratorParams {
        n_classes: args.classes.unwrap_or(defaults.n_classes),
        n_services: args.services.unwrap_or(defaults.n_services),
        n_methods_per_class: args.methods.unwrap_or(defaults.n_methods_per_class),
        allow_faults: args.allow_faults,
        ..defaults
    };
    let source = generate_source(&params).map_err(invalid)?;
    write_output(args.out.as_deref(), |w| w.write_all(source.as_bytes()))
}

/// A closed standard output (`fragmon ... | head`) is not an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Monitor(a) => monitor(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Gen(a) => gen(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Invalid>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
