use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faultalm::bench::{
    convergence_study, error_table, infsup_study, infsup_table, inclined_fault_level, run_case, state_counts,
    vertical_fault_level, BenchCase, ErrorReport, InclinedFaultParams, VerticalFaultParams,
};
use faultalm::config::parse_config;
use faultalm::driver::{profile_records, run};
use faultalm::fem::CellKind;
use faultalm::output::{profile_table, CsvTable};
use faultalm::solver::{Algorithm, SolverConfig};

#[derive(Parser)]
#[command(name = "faultalm", version, about = "Frictional contact on faults: runs, benchmarks and studies")]
struct Cli {
    /// Worker threads. The solver is sequential so results stay bit-identical;
    /// the value is accepted for interface compatibility.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Seed for randomized checks; runs and benchmarks are deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the problem described by a TOML config.
    Run {
        config: PathBuf,
        /// Print the effective configuration and exit.
        #[arg(long)]
        echo: bool,
    },
    /// Run one benchmark case.
    Bench {
        case: String,
        #[arg(long, default_value = "hex8")]
        kind: String,
        /// Single refinement level (analytic cases); default runs levels 0..3.
        #[arg(long)]
        level: Option<usize>,
        /// Cells per edge for t-crack (default 40, full size 300) and constant-slip (default 6).
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long, value_parser = parse_algorithm, default_value = "uzawa")]
        algorithm: Algorithm,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the final fault profile here.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Error table and rates over refinement levels.
    Convergence {
        case: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_delimiter = ',', default_value = "hex8")]
        kinds: Vec<String>,
        #[arg(long, value_parser = parse_algorithm, default_value = "uzawa")]
        algorithm: Algorithm,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrete inf-sup constants with and without bubbles.
    Infsup {
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value = "hex8")]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    match s {
        "uzawa" | "1" => Ok(Algorithm::Uzawa),
        "interleaved" | "2" => Ok(Algorithm::Interleaved),
        _ => Err(format!("unknown algorithm `{s}` (uzawa, interleaved)")),
    }
}

fn emit(table: &CsvTable, out: Option<&Path>) -> faultalm::Result<()> {
    match out {
        Some(p) => table.write(p),
        None => {
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn solver_config(algorithm: Algorithm) -> SolverConfig {
    SolverConfig { algorithm, ..SolverConfig::default() }
}

fn execute(cli: Cli) -> faultalm::Result<()> {
    match cli.cmd {
        Cmd::Run { config, echo } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = parse_config(&text)?;
            if echo {
                print!("{}", faultalm::config::echo(&cfg));
                return Ok(());
            }
            let outcome = run(&cfg)?;
            let [stick, slip, open] = state_counts(&outcome.faces);
            eprintln!(
                "{} steps, {} Newton iterations; final states stick={stick} slip={slip} open={open}",
                outcome.report.steps.len(),
                outcome.report.total_newton()
            );
            Ok(())
        }
        Cmd::Bench { case, kind, level, cells, algorithm, out, profile } => {
            let case = BenchCase::parse(&case)?;
            let kind = CellKind::parse(&kind)?;
            let cfg = solver_config(algorithm);
            match case {
                BenchCase::InclinedFault | BenchCase::VerticalFault => {
                    let levels: Vec<usize> = level.map_or((0..3).collect(), |l| vec![l]);
                    let mut lv = Vec::new();
                    for l in levels {
                        lv.push(match case {
                            BenchCase::InclinedFault => inclined_fault_level(&InclinedFaultParams::default(), kind, l, &cfg)?,
                            _ => vertical_fault_level(&VerticalFaultParams::default(), kind, l, &cfg)?,
                        });
                    }
                    if let (Some(p), Some(last)) = (&profile, lv.last()) {
                        profile_table(&last.profile).write(p)?;
                    }
                    let rep = ErrorReport::new(case, kind, lv);
                    emit(&error_table(&[rep]), out.as_deref())
                }
                _ => {
                    let (prob, sol) = run_case(case, kind, cells, &cfg)?;
                    if let Some(p) = &profile {
                        profile_table(&profile_records(&prob.mesh, &sol.faces, 0)).write(p)?;
                    }
                    emit(&sol.report.table(), out.as_deref())
                }
            }
        }
        Cmd::Convergence { case, levels, kinds, algorithm, out } => {
            let case = BenchCase::parse(&case)?;
            let kinds = kinds.iter().map(|k| CellKind::parse(k)).collect::<faultalm::Result<Vec<_>>>()?;
            let reports = convergence_study(case, levels, &kinds, &solver_config(algorithm))?;
            emit(&error_table(&reports), out.as_deref())
        }
        Cmd::Infsup { levels, kind, out } => {
            let kind = CellKind::parse(&kind)?;
            let rows = infsup_study(kind, levels)?;
            emit(&infsup_table(kind, &rows), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = (cli.threads, cli.seed);
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

