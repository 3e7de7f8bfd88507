//! Command-line interface. Each command returns its process exit code:
//! 0 pass, 1 property failure, 2 usage or capability error, 3 unreadable
//! or unwritable file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engines::{make_engine, EdgePolicy, EngineConfig, EngineError, EngineKind, PairPolicy, SymBinEngine};
use crate::gen::{generate, pad_to_square, Dynamics, GeneratorKind, GeneratorSpec};
use crate::instance::Instance;
use crate::ledger::SimState;
use crate::market::Mode;
use crate::oracle::theorems::{max_weight_fixture, witness_sound, THEOREM5_HORIZON};
use crate::oracle::{
    exhaustive_sequence_search, theorem4_reproduce, theorem5_reproduce, verify_trace, SearchConstraint, SearchProperty,
    SequenceSearchResult,
};
use crate::rational::{parse_rational, Rational, PQ};
use crate::trace::{Trace, TraceRecord};
use crate::valuation::ValuationOracle;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fairmatch",
    version,
    about = "Envy-free repeated matching in two-sided markets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded random instance.
    Generate(GenerateArgs),
    /// Run an engine on an instance and write a trace.
    Run(RunArgs),
    /// Independently re-check a trace against its instance.
    Verify(VerifyArgs),
    /// Reproduce an impossibility result by exhaustive search.
    Counterexample(CounterexampleArgs),
    /// Time the symmetric binary engine and check its swap bound.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    SymmetricBinary,
    OnlySymmetricCycles,
    TwoAgentAdditive,
    GeneralBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DynamicsArg {
    Static,
    Redraw,
    FlipK,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub n: usize,
    /// Defaults to n.
    #[arg(long)]
    pub m: Option<usize>,
    /// Like density.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DynamicsArg::Static)]
    pub dynamics: DynamicsArg,
    /// Pairs toggled per step with `--dynamics flip-k`.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Scripted steps for dynamic instances.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, value_parser = parse_rational_arg, default_value = "0/1")]
    pub a: Rational,
    /// Pad the smaller side with zero-value agents.
    #[arg(long)]
    pub pad: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    SymBin,
    AsymCycles,
    RoundRobin,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::SymBin => EngineKind::SymBin,
            EngineArg::AsymCycles => EngineKind::AsymCycles,
            EngineArg::RoundRobin => EngineKind::RoundRobin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Lex,
    Dfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EdgePolicyArg {
    RoundRobin,
    Lex,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub engine: EngineArg,
    #[arg(long = "steps")]
    pub steps: u64,
    /// Low value used for reported weights and bounds.
    #[arg(long, value_parser = parse_rational_arg)]
    pub a: Option<Rational>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Lex)]
    pub policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = EdgePolicyArg::RoundRobin)]
    pub edge_policy: EdgePolicyArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rounds,
    Time,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rounds => Mode::Rounds,
            ModeArg::Time => Mode::Time,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    /// Defaults to the mode in the trace header.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    /// Dynamic binary values: no sequence of rounds stays EF1.
    Thm4,
    /// Static binary values: no sequence of maximum-weight rounds stays EF1.
    Thm5,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[arg(value_enum)]
    pub which: Which,
    /// Allow any perfect matching (thm5 only); a witness is then expected.
    #[arg(long)]
    pub no_maxweight: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Market sizes to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16, 32])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Base seed; seed k of a size uses `seed + k`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_PASS;
        }
    };
    run_command(&cli.command, out, err)
}

pub fn run_command(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match command {
        Command::Generate(a) => cmd_generate(a, out, err),
        Command::Run(a) => cmd_run(a, out, err),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Counterexample(a) => cmd_counterexample(a, out, err),
        Command::Bench(a) => cmd_bench(a, out, err),
    }
}

fn load_instance(path: &Path, err: &mut dyn Write) -> Result<Instance, i32> {
    Instance::load(path).map_err(|e| {
        let _ = writeln!(err, "error: {}: {e}", path.display());
        EXIT_IO
    })
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = GeneratorSpec {
        kind: match args.kind {
            KindArg::SymmetricBinary => GeneratorKind::SymmetricBinary,
            KindArg::OnlySymmetricCycles => GeneratorKind::OnlySymmetricCycles,
            KindArg::TwoAgentAdditive => GeneratorKind::TwoAgentAdditive,
            KindArg::GeneralBinary => GeneratorKind::GeneralBinary,
        },
        n: args.n,
        m: args.m.unwrap_or(args.n),
        p: args.p,
        seed: args.seed,
        dynamics: match args.dynamics {
            DynamicsArg::Static => Dynamics::Static,
            DynamicsArg::Redraw => Dynamics::Redraw,
            DynamicsArg::FlipK => Dynamics::FlipK(args.k),
        },
        steps: args.steps,
        a: args.a,
    };
    let mut instance = match generate(&spec) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    if args.pad {
        instance = pad_to_square(&instance);
    }
    if let Err(e) = instance.save(&args.out) {
        let _ = writeln!(err, "error: {}: {e}", args.out.display());
        return EXIT_IO;
    }
    let _ = writeln!(
        out,
        "wrote {}x{} instance to {}",
        instance.shape.n,
        instance.shape.m,
        args.out.display()
    );
    EXIT_PASS
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let instance = match load_instance(&args.instance, err) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let kind = EngineKind::from(args.engine);
    let config = EngineConfig {
        pair_policy: match args.policy {
            PolicyArg::Lex => PairPolicy::Lexicographic,
            PolicyArg::Dfs => PairPolicy::FirstFoundDfs,
        },
        edge_policy: match args.edge_policy {
            EdgePolicyArg::RoundRobin => EdgePolicy::RoundRobin,
            EdgePolicyArg::Lex => EdgePolicy::Lexicographic,
        },
        a: args.a,
    };
    let header_a = match kind {
        EngineKind::SymBin => Some(args.a.unwrap_or_else(|| instance.capabilities().low_value())),
        _ => None,
    };
    let mut trace = Trace::new(kind, instance.shape, header_a);
    let mut engine = match make_engine(kind, config, &instance) {
        Ok(e) => e,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return if e.is_capability() { EXIT_USAGE } else { EXIT_FAIL };
        }
    };
    let mut state = SimState::new(instance.shape, kind.mode());
    let mut failed_steps = Vec::new();
    let mut engine_error = None;
    for _ in 0..args.steps {
        match engine.step(&mut state, &instance) {
            Ok(report) => {
                if !report.passed() {
                    failed_steps.push(report.t);
                }
                trace.records.push(TraceRecord::from(&report));
            }
            Err(e) => {
                engine_error = Some(e);
                break;
            }
        }
    }
    if let Err(e) = trace.write(&args.out) {
        let _ = writeln!(err, "error: {}: {e}", args.out.display());
        return EXIT_IO;
    }
    let _ = writeln!(
        out,
        "{kind}: {} steps written to {}",
        trace.records.len(),
        args.out.display()
    );
    if let Some(e) = engine_error {
        let _ = writeln!(err, "error: {e}");
        return if e.is_capability() { EXIT_USAGE } else { EXIT_FAIL };
    }
    if failed_steps.is_empty() {
        let _ = writeln!(out, "all per-step verdicts hold");
        EXIT_PASS
    } else {
        let _ = writeln!(out, "verdicts failed at t = {failed_steps:?}");
        EXIT_FAIL
    }
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let instance = match load_instance(&args.instance, err) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let trace = match Trace::read(&args.trace) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", args.trace.display());
            return EXIT_IO;
        }
    };
    let mode = args.mode.map_or(trace.header.mode, Mode::from);
    match verify_trace(&instance, &trace, mode) {
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Ok(report) => match report.failure {
            None => {
                let _ = writeln!(out, "pass: {} steps verified", report.steps);
                EXIT_PASS
            }
            Some(f) => {
                let _ = writeln!(out, "fail: {f}");
                EXIT_FAIL
            }
        },
    }
}

fn print_search(out: &mut dyn Write, label: &str, r: &SequenceSearchResult) {
    let _ = writeln!(
        out,
        "{label}: exists = {}, horizon = {}, rounds explored = {}, full sequences = {}",
        r.exists, r.horizon, r.explored, r.sequences
    );
    if let Some(w) = &r.witness {
        for (k, x) in w.iter().enumerate() {
            let _ = writeln!(out, "  t = {}: {x}", k + 1);
        }
    }
}

pub fn cmd_counterexample(args: &CounterexampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let ok = match (args.which, args.no_maxweight) {
        (Which::Thm4, true) => {
            let _ = writeln!(err, "error: --no-maxweight applies to thm5 only");
            return EXIT_USAGE;
        }
        (Which::Thm4, false) => {
            let report = theorem4_reproduce();
            print_search(out, "dynamic 2x2, any perfect matching, a = 0", &report.result);
            for (a, r) in &report.sweep {
                print_search(out, &format!("  sweep a = {} (reported only)", PQ(a)), r);
            }
            report.matches_expected()
        }
        (Which::Thm5, false) => {
            let report = theorem5_reproduce();
            let _ = writeln!(out, "maximum round weight = {}", PQ(&report.max_weight));
            print_search(out, "static 3x3, maximum-weight rounds", &report.constrained);
            if let Some(h) = report.first_impossible_horizon {
                let _ = writeln!(out, "first horizon with no surviving sequence: {h}");
            }
            let _ = writeln!(
                out,
                "claims checked on {} surviving prefixes at t = 2 and {} at t = 4; {} failures",
                report.prefixes_checked[0],
                report.prefixes_checked[1],
                report.claim_failures.len()
            );
            for f in &report.claim_failures {
                let _ = writeln!(out, "  {}", f.detail);
            }
            report.max_weight == Rational::new(3, 2)
                && !report.constrained.exists
                && report.prefixes_checked[0] > 0
                && report.claim_failures.is_empty()
        }
        (Which::Thm5, true) => {
            let inst = max_weight_fixture();
            let r = exhaustive_sequence_search(
                &inst,
                THEOREM5_HORIZON,
                SearchConstraint::AnyPerfect,
                SearchProperty::Ef1EachRound,
            )
            .expect("fixture is within the search guard");
            print_search(out, "static 3x3, any perfect matching", &r);
            r.exists && witness_sound(&inst, &r)
        }
    };
    let _ = writeln!(out, "{}", if ok { "verdict matches" } else { "verdict differs" });
    if ok {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Per-size benchmark row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub mean_step_micros: f64,
    pub max_swaps: usize,
    pub bound: usize,
}

pub fn bench_size(n: usize, steps: usize, seeds: u64, p: f64, base_seed: u64) -> Result<BenchRow, EngineError> {
    let mut total = 0.0;
    let mut max_swaps = 0;
    for k in 0..seeds {
        let spec = GeneratorSpec {
            dynamics: Dynamics::Redraw,
            steps,
            ..GeneratorSpec::new(GeneratorKind::SymmetricBinary, n, n, p, base_seed + k)
        };
        let instance = generate(&spec).expect("bench specs are feasible");
        let mut engine = make_engine(EngineKind::SymBin, EngineConfig::default(), &instance)?;
        let mut state = SimState::new(instance.shape(), Mode::Rounds);
        let start = Instant::now();
        for _ in 0..steps {
            let report = engine.step(&mut state, &instance)?;
            max_swaps = max_swaps.max(report.iterations);
        }
        total += start.elapsed().as_secs_f64();
    }
    let step_count = (steps as u64 * seeds).max(1) as f64;
    Ok(BenchRow {
        n,
        mean_step_micros: total / step_count * 1e6,
        max_swaps,
        bound: SymBinEngine::swap_bound(n),
    })
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let _ = writeln!(
        out,
        "{:>5} {:>16} {:>10} {:>8}",
        "n", "mean step (us)", "max swaps", "2n^2"
    );
    let mut ok = true;
    for &n in &args.n {
        if n == 0 {
            let _ = writeln!(err, "error: n must be positive");
            return EXIT_USAGE;
        }
        match bench_size(n, args.steps, args.seeds, args.p, args.seed) {
            Ok(row) => {
                let _ = writeln!(
                    out,
                    "{:>5} {:>16.1} {:>10} {:>8}",
                    row.n, row.mean_step_micros, row.max_swaps, row.bound
                );
                ok &= row.max_swaps <= row.bound;
            }
            Err(e) => {
                let _ = writeln!(err, "error at n = {n}: {e}");
                ok = false;
            }
        }
    }
    if ok {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
