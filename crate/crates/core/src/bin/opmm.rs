use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use opmm::harness::{self, RunConfig, AUDIT_SAMPLES};
use opmm::opmm::Route;

#[derive(Parser)]
#[command(name = "opmm", version, about = "Online proximal method of multipliers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write the per-round CSV plus a summary.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several horizons and fit log-log regret slopes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the structural assumptions for the selected route.
    Check {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    route: Option<RouteArg>,
    /// Abort on inner-solver failure.
    #[arg(long)]
    strict: bool,
    /// Overrides the stream seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Primal,
    Dual,
}

impl Common {
    fn load(&self) -> opmm::Result<(RunConfig, Option<Route>)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        cfg.strict |= self.strict;
        let route = self.route.map(|r| match r {
            RouteArg::Primal => Route::Primal,
            RouteArg::Dual => Route::Dual,
        });
        Ok((cfg, route))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> opmm::Result<ExitCode> {
    match cli.command {
        Command::Run { common, out } => {
            let (cfg, route) = common.load()?;
            let out = out
                .or_else(|| cfg.output.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("opmm_run.csv"));
            let output = harness::run(&cfg, route)?;
            for t in &output.summary.failed_rounds {
                eprintln!("warning: inner solver hit its iteration cap in round {t}");
            }
            let summary = harness::write_run(&out, &output)?;
            print!("{}", output.report.to_toml()?);
            eprintln!("wrote {} and {}", out.display(), summary.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { common, horizons, out } => {
            let (cfg, route) = common.load()?;
            let result = harness::sweep(&cfg, &horizons, route)?;
            let csv = result.to_csv();
            match out {
                Some(path) => std::fs::write(&path, &csv)?,
                None => print!("{csv}"),
            }
            print!("{}", result.slopes);
            println!("lagrangian non-increasing: {}", result.lagrangian_nonincreasing);
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { common } => {
            let (cfg, route) = common.load()?;
            let report = harness::check(&cfg, route, AUDIT_SAMPLES, 0)?;
            print!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
