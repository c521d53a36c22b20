use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracspline_cli::{load_config, run_basis, run_converge, run_ml, run_solve, CliError};

#[derive(Parser)]
#[command(name = "fracspline", version, about = "B-spline collocation for linear fractional ODE systems")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV output; file names come from the [output] block.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `grid_level` from the configuration.
    #[arg(long)]
    grid_level: Option<u32>,
    /// Print the parsed configuration with defaults filled in and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem and write the solution table.
    Solve(RunArgs),
    /// Sweep the level j and report errors and observed orders.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 2)]
        j_min: u32,
        #[arg(long, default_value_t = 6)]
        j_max: u32,
    },
    /// Tabulate edge basis functions and their Caputo derivatives.
    Basis {
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        levels: Vec<u32>,
        #[arg(long, default_value_t = 1.0 / 64.0)]
        grid_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the Mittag-Leffler function on a range of real arguments.
    Ml {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        z_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        z_max: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fmt_errors(errs: &[f64]) -> String {
    errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Solve(args) => {
            let cfg = load_config(&args.config)?;
            if args.dump_config {
                print!("{}", cfg.dump());
                return Ok(());
            }
            let summary = run_solve(&cfg, args.out.as_deref(), args.grid_level)?;
            if !summary.stable {
                eprintln!("note: A has an eigenvalue with non-negative real part; the solution may grow");
            }
            println!("residual_norm {:.3e}", summary.residual_norm);
            if let Some(err) = &summary.error {
                println!("linf_error {} (grid level {})", fmt_errors(&err.per_component_linf), err.sample_grid_level);
            }
            println!("wrote {} rows to {}", summary.rows, summary.csv.display());
        }
        Command::Converge { run, j_min, j_max } => {
            let cfg = load_config(&run.config)?;
            if run.dump_config {
                print!("{}", cfg.dump());
                return Ok(());
            }
            let summary = run_converge(&cfg, j_min, j_max, run.out.as_deref(), run.grid_level)?;
            let report = &summary.report;
            for (k, e) in report.errors.iter().enumerate() {
                let rho = match k.checked_sub(1) {
                    Some(p) => report.rho[p]
                        .iter()
                        .map(|r| r.map_or_else(|| "-".to_string(), |v| format!("{v:.3}")))
                        .collect::<Vec<_>>()
                        .join(" "),
                    None => String::new(),
                };
                println!("j {:>2}  err {}  rho {}", e.j, fmt_errors(&e.per_component_linf), rho);
            }
            println!("wrote {}", summary.csv.display());
        }
        Command::Basis { n, gamma, levels, grid_step, out } => {
            let path = run_basis(n, &gamma, &levels, grid_step, out.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Ml { gamma, beta, z_min, z_max, step, out } => {
            let (path, count) = run_ml(gamma, beta, z_min, z_max, step, out.as_deref())?;
            println!("wrote {count} values to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
