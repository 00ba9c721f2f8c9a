use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpkin_cli::{json, suites, CliError, RunConfig, Suite};
use lpkin_core::collision::eval_q;
use lpkin_core::snapshot;
use lpkin_core::state::Distribution;

/// Weighted Lp estimates for the spatially homogeneous Boltzmann equation.
#[derive(Debug, Parser)]
#[command(name = "lpkin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured flow and write its trajectory as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trajectory path (default: output.trajectory, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a report suite and write the reports as a JSON array.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
        /// Report path (default: output.report, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the ensemble and sampling seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate Q(g, f) and its gain and loss parts on two snapshots.
    Collide {
        #[arg(long)]
        config: PathBuf,
        f: PathBuf,
        g: PathBuf,
        /// Prefix of the `_gain`, `_loss` and `_q` outputs; the extension of
        /// `f` picks the format.
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => lpkin_cli::write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Result<bool, CliError> {
    let cfg = RunConfig::load(config)?;
    let run = suites::flow_run(&cfg, &[])?;
    let out = out.or(cfg.output.trajectory.clone());
    emit(out.as_deref(), &run.trajectory.to_csv())?;
    Ok(true)
}

fn check(
    config: &Path,
    suite: Suite,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<bool, CliError> {
    let cfg = RunConfig::load(config)?;
    let reports = suites::run_suite(&cfg, suite, seed)?;
    let text = json::to_string(&reports).map_err(|e| CliError::Usage(e.to_string()))?;
    let out = out.or(cfg.output.report.clone());
    emit(out.as_deref(), &text)?;
    for r in reports.iter().filter(|r| !r.pass) {
        eprintln!(
            "FAIL {} {}: lhs {:e} rhs {:e}",
            r.name, r.case, r.lhs, r.rhs
        );
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn collide(config: &Path, f: &Path, g: &Path, out: &Path) -> Result<bool, CliError> {
    let cfg = RunConfig::load(config)?;
    let kernel = cfg.flow_kernel()?;
    let fd = snapshot::load(f)?;
    let gd = snapshot::load(g)?;
    let q = eval_q(&gd, &fd, &kernel, &cfg.quadrature)?;
    let ext = f.extension().and_then(|e| e.to_str()).unwrap_or("csv");
    for (part, values) in [("gain", q.gain), ("loss", q.loss), ("q", q.q_values)] {
        let mut name = out.as_os_str().to_owned();
        name.push(format!("_{part}.{ext}"));
        snapshot::save(
            &Distribution {
                grid: fd.grid,
                values,
            },
            Path::new(&name),
        )?;
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Check {
            config,
            suite,
            out,
            seed,
        } => check(&config, suite, out, seed),
        Command::Collide { config, f, g, out } => collide(&config, &f, &g, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
