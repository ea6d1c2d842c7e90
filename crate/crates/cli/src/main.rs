mod bench;
mod render;
mod seeds;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pac_core::circuit::{generate_rand3reg, parse_circuit, serialize_circuit, Circuit, SubCircuit};
use pac_core::compiler::{compile, SolverOptions, Strategy};
use pac_core::division::DivisionOptions;
use pac_core::hardware::ArraySpec;
use pac_core::orchestrator::{pac_compile, PacOptions};
use pac_core::schedule::{PhaseInfo, Schedule, ScheduleFile};
use pac_core::verifier::{verify, verify_pac, VerifierReport};

use crate::seeds::Seeds;

#[derive(Parser)]
#[command(name = "pac", version, about = "Partitioned compiler for reconfigurable neutral-atom arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a circuit into a schedule file.
    Compile(CompileArgs),
    /// Check a schedule file against a circuit (exit 0 ok, 1 violations, 2 bad input).
    Verify(VerifyArgs),
    /// Compare PAC against the monolithic baseline on generated circuits, as CSV.
    Bench(BenchArgs),
    /// Write random 3-regular circuits as edge lists.
    Gen(GenArgs),
    /// Draw each stage of a schedule as an SVG file.
    Render(RenderArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Pac,
    Baseline,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Greedy,
    Deepening,
}

/// Options shared by everything that compiles.
#[derive(Args, Clone)]
struct SolveArgs {
    /// Array side length in sites.
    #[arg(long)]
    array: usize,
    /// Master seed; split into generator, partition and solver seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight of the active-qubit term in the division loss.
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    /// Maximum committed swaps during division (default 10 per qubit).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Solver backend: cadical, batsat, smtlib or smtlib:<command>.
    #[arg(long, default_value = "cadical")]
    solver: String,
    /// Stages per greedy window.
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Greedy)]
    strategy: StrategyArg,
    /// Seconds allowed per compile.
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    /// Run the two local phases one after the other.
    #[arg(long)]
    sequential: bool,
}

impl SolveArgs {
    fn array(&self) -> Result<ArraySpec> {
        Ok(ArraySpec::new(self.array)?)
    }

    fn solver_options(&self, seeds: &Seeds) -> SolverOptions {
        SolverOptions {
            timeout: self.timeout,
            window: self.window,
            backend: self.solver.clone(),
            strategy: match self.strategy {
                StrategyArg::Greedy => Strategy::Greedy,
                StrategyArg::Deepening => Strategy::Deepening,
            },
            seed: seeds.solver,
        }
    }

    fn pac_options(&self, c: &Circuit, seeds: &Seeds) -> PacOptions {
        PacOptions {
            division: DivisionOptions {
                k: self.k,
                max_iter: self.max_iter.unwrap_or(10 * c.num_qubits()),
                seed: seeds.partition,
            },
            solver: self.solver_options(seeds),
            parallel_local: !self.sequential,
        }
    }
}

#[derive(Args)]
struct CompileArgs {
    /// Edge-list circuit file.
    circuit: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Pac)]
    mode: Mode,
    /// Schedule file to write.
    #[arg(short, long, default_value = "schedule.json")]
    output: PathBuf,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct VerifyArgs {
    schedule: PathBuf,
    circuit: PathBuf,
    /// Array side length; must match the schedule file.
    #[arg(long)]
    array: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Qubit counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    qubits: Vec<usize>,
    /// Instances per qubit count.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Run up to this many instances at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Leave timing columns empty so output is reproducible.
    #[arg(long)]
    no_wall_time: bool,
    /// CSV file to write (stdout if absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    qubits: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    schedule: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(a) => cmd_compile(&a),
        Command::Verify(a) => return cmd_verify(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Gen(a) => cmd_gen(&a),
        Command::Render(a) => return cmd_render(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let c = parse_circuit(&text).with_context(|| format!("parsing {}", path.display()))?;
    if c.name().is_empty() {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(c.with_name(stem));
    }
    Ok(c)
}

/// A compiled schedule, with phase boundaries for PAC output.
struct Compiled {
    schedule: Schedule,
    phases: Option<PhaseInfo>,
    wall_time: f64,
}

fn compile_with(c: &Circuit, mode: Mode, solve: &SolveArgs, seeds: &Seeds) -> Result<Compiled> {
    let a = solve.array()?;
    match mode {
        Mode::Baseline => {
            let opts = solve.solver_options(seeds);
            let r = compile(&SubCircuit::whole(c), &a.full(), None, &Default::default(), &Default::default(), &opts)?;
            Ok(Compiled { schedule: r.schedule, phases: None, wall_time: r.wall_time })
        }
        Mode::Pac => {
            let out = pac_compile(c, &a, &solve.pac_options(c, seeds))?;
            Ok(Compiled { schedule: out.schedule, phases: Some(out.phase_info), wall_time: out.wall_time })
        }
    }
}

fn check(file: &ScheduleFile, c: &Circuit, a: &ArraySpec) -> VerifierReport {
    let s = file.schedule();
    match &file.phases {
        Some(info) => verify_pac(&s, c, a, info),
        None => verify(&s, c, a, &a.full()),
    }
}

fn cmd_compile(args: &CompileArgs) -> Result<()> {
    let c = read_circuit(&args.circuit)?;
    let a = args.solve.array()?;
    let seeds = Seeds::split(args.solve.seed);
    let out = compile_with(&c, args.mode, &args.solve, &seeds)?;
    let file = ScheduleFile::new(&out.schedule, c.digest(), a.n(), out.phases);
    fs::write(&args.output, file.to_json()).with_context(|| format!("writing {}", args.output.display()))?;

    // Self-check: read back what was written and verify it.
    let back = ScheduleFile::from_json(&fs::read_to_string(&args.output)?)?;
    let report = check(&back, &c, &a);
    if !report.ok {
        for v in &report.violations {
            eprintln!("{v}");
        }
        bail!("compiled schedule failed verification ({} violations)", report.violations.len());
    }
    println!("depth {} stages {} wall time {:.2} s", out.schedule.depth(), out.schedule.stages.len(), out.wall_time);
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> ExitCode {
    let load = || -> Result<(ScheduleFile, Circuit, ArraySpec)> {
        let file = ScheduleFile::from_json(&fs::read_to_string(&args.schedule)?)?;
        let c = read_circuit(&args.circuit)?;
        let a = ArraySpec::new(args.array)?;
        if file.array != a.n() {
            bail!("schedule is for a {0}x{0} array, not {1}x{1}", file.array, a.n());
        }
        if file.circuit_digest != c.digest() {
            bail!("schedule was compiled from a different circuit");
        }
        Ok((file, c, a))
    };
    let (file, c, a) = match load() {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let report = check(&file, &c, &a);
    for v in &report.violations {
        println!("{v}");
    }
    if report.ok {
        println!("ok: depth {}, {} gates fired", report.depth, report.gates_fired);
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Circuit `i` of the `n`-qubit family under a generator seed.
fn family_member(n: usize, i: usize, generator_seed: u64) -> Result<Circuit> {
    let c = generate_rand3reg(n, seeds::derive(generator_seed, (n as u64) << 32 | i as u64))?;
    Ok(c.with_name(format!("rand3reg_{n}_{i}")))
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    if !args.qubits.is_multiple_of(2) {
        bail!("no 3-regular graph on an odd number ({}) of vertices", args.qubits);
    }
    fs::create_dir_all(&args.out_dir)?;
    let seeds = Seeds::split(args.seed);
    for i in 0..args.count {
        let c = family_member(args.qubits, i, seeds.generator)?;
        let path = args.out_dir.join(format!("{}.edges", c.name()));
        fs::write(&path, serialize_circuit(&c)).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> ExitCode {
    let file = match fs::read_to_string(&args.schedule).map_err(anyhow::Error::from).and_then(|t| Ok(ScheduleFile::from_json(&t)?)) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match render::write_all(&file, &args.out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
