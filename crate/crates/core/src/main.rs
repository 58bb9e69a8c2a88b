use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use fracblowup::config::Params;
use fracblowup::report::{self, Scenario, Status};
use fracblowup::Result;

#[derive(Parser)]
#[command(name = "fracblowup", version, about = "Large solutions of (-Δ)^s u = -f(u) on the interval and the radial ball")]
struct Cli {
    /// TOML file with run parameters; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// -v info, -vv debug, -vvv trace.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integral tests and growth inequalities for f.
    Check(Params),
    /// Solve one approximating problem (trace k or exterior data g).
    Solve(Params),
    /// Solve for each k of --k-list and classify the behaviour.
    Sweep(Params),
    /// (-Δ)^s u + f(u) at the admissible nodes of a solution CSV.
    Residual {
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Singular trace, boundary exponent and φ(u)/δ^s of a solution CSV.
    Analyze {
        #[arg(long)]
        solution: PathBuf,
        /// Lower bound required of φ(u)/δ^s.
        #[arg(long, default_value_t = 0.2)]
        c0: f64,
        #[command(flatten)]
        params: Params,
    },
    /// Run a replication pipeline and write its verdict bundle.
    Replicate {
        #[arg(long, value_enum)]
        scenario: Scenario,
    },
    /// Kernel constants for (N, s).
    Info(Params),
}

fn params(cli_file: &Option<PathBuf>, flags: Params) -> Result<Params> {
    let base = match cli_file {
        Some(p) => Params::from_toml_file(p)?,
        None => Params::default(),
    };
    Ok(flags.over(base))
}

fn out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Check(p) => report::run_check(&params(&cli.config, p)?.resolve()?, cli.out.as_deref()),
        Command::Solve(p) => report::run_solve(&params(&cli.config, p)?.resolve()?, &out_dir(&cli.out)),
        Command::Sweep(p) => report::run_sweep(&params(&cli.config, p)?.resolve()?, &out_dir(&cli.out)),
        Command::Residual { solution, params: p } => {
            report::run_residual(&solution, &params(&cli.config, p)?, cli.out.as_deref())
        }
        Command::Analyze { solution, c0, params: p } => {
            report::run_analyze(&solution, &params(&cli.config, p)?, c0, cli.out.as_deref())
        }
        Command::Replicate { scenario } => {
            let r = report::replicate(scenario, &out_dir(&cli.out))?;
            for name in r.failing() {
                error!("{}: failed criterion: {name}", scenario.name());
                eprintln!("FAILED: {name}");
            }
            println!("{}: {:?} ({})", scenario.name(), r.status, r.verdict_path.display());
            Ok(r.status)
        }
        Command::Info(p) => {
            let p = params(&cli.config, p)?;
            let s = p.s.ok_or_else(|| fracblowup::Error::Config("s is required".into()))?;
            let v = report::run_info(p.dim.unwrap_or(1), s, p.seed.unwrap_or(0))?;
            print!("{}", String::from_utf8_lossy(&report::to_json_bytes(&v)));
            Ok(Status::Pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = std::env::var("FRACBLOWUP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            error!("could not set thread count: {e}");
        }
    }
    match run(cli) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
