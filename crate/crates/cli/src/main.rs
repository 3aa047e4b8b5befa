use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use skillbench_core::bench::{
    attach_improvements, raw_csv, render_scenario, render_table, resolve_setup, run_benchmark_traced, summary_csv, BenchError,
    MeasurementReport, Scenario,
};
use skillbench_core::motion::ExecutionType;
use skillbench_core::planner::text::{write_plan, write_process};

const EXIT_SIM: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "skillbench", version, about = "Pick & place benchmark for PLC-triggered robot motion skills")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark and report execution times.
    Run(RunArgs),
    /// Print the planned scenario.
    Plan(PlanArgs),
}

#[derive(Parser)]
struct RunArgs {
    /// Setup name (`a`, `b`) or scenario file; repeat to run several.
    #[arg(long, default_values_t = [String::from("a")])]
    setup: Vec<String>,
    #[arg(long, value_enum, default_value_t = EtypeArg::All)]
    etype: EtypeArg,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write every repetition's event trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write per-repetition times as CSV to this file.
    #[arg(long)]
    raw: Option<PathBuf>,
}

#[derive(Parser)]
struct PlanArgs {
    #[arg(long, default_value = "a")]
    setup: String,
    #[arg(long, value_enum, default_value_t = Emit::Plan)]
    emit: Emit,
}

#[derive(Clone, Copy, ValueEnum)]
enum EtypeArg {
    Rc,
    Sm,
    Cm,
    All,
}

impl EtypeArg {
    fn types(self) -> Vec<ExecutionType> {
        match self {
            EtypeArg::Rc => vec![ExecutionType::Rc],
            EtypeArg::Sm => vec![ExecutionType::Sm],
            EtypeArg::Cm => vec![ExecutionType::Cm],
            EtypeArg::All => ExecutionType::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Plan,
    Process,
    Scenario,
}

enum Failure {
    Usage(String),
    Sim(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::UnknownSetup(_) | BenchError::InvalidScenario(_) => Failure::Usage(e.to_string()),
            other => Failure::Sim(other.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Sim(format!("{}: {e}", path.display()))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let scenarios = args
        .setup
        .iter()
        .map(|s| resolve_setup(s).and_then(Scenario::build))
        .collect::<Result<Vec<_>, _>>()?;
    let mut trace_out = match &args.trace {
        Some(path) => Some((BufWriter::new(File::create(path).map_err(io_failure(path))?), path)),
        None => None,
    };

    let mut reports: Vec<MeasurementReport> = Vec::new();
    for scenario in &scenarios {
        for etype in args.etype.types() {
            let mut write_err = None;
            let report = run_benchmark_traced(scenario, etype, args.reps as usize, args.seed, |rep, trace| {
                if let Some((w, _)) = trace_out.as_mut() {
                    let res = writeln!(w, "# setup={} etype={} rep={}", scenario.config.name, etype, rep).and_then(|_| trace.write_to(&mut *w));
                    if let Err(e) = res {
                        write_err.get_or_insert(e);
                    }
                }
            })?;
            if let (Some(e), Some((_, path))) = (write_err, trace_out.as_ref()) {
                return Err(io_failure(path)(e));
            }
            reports.push(report);
        }
    }
    attach_improvements(&mut reports)?;
    if let Some((mut w, path)) = trace_out {
        w.flush().map_err(io_failure(path))?;
    }
    if let Some(path) = &args.raw {
        std::fs::write(path, raw_csv(&reports)).map_err(io_failure(path))?;
    }
    let text = match args.format {
        Format::Table => render_table(&reports),
        Format::Csv => summary_csv(&reports),
    };
    print!("{text}");
    Ok(())
}

fn plan(args: PlanArgs) -> Result<(), Failure> {
    let scenario = Scenario::build(resolve_setup(&args.setup)?)?;
    let text = match args.emit {
        Emit::Plan => write_plan(&scenario.groups),
        Emit::Process => write_process(&scenario.process),
        Emit::Scenario => render_scenario(&scenario.config),
    };
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Plan(args) => plan(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Sim(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_SIM)
        }
    }
}
