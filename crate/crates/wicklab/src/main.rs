//! Command-line front end: configuration-driven experiment suites with CSV
//! tables and a JSON manifest per run.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wicklab::config::{RunConfig, TolProfile};
use wicklab::suites::{run_suites, SuiteContext, SUITE_NAMES};
use wicklab::{Result, WicklabError};

#[derive(Parser)]
#[command(name = "wicklab", version, about = "Rotated-family operator laboratory on metric tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// output directory for CSV tables and the JSON report
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// random seed override
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// grid override, e.g. 24x24
    #[arg(long, global = true)]
    grid: Option<String>,

    /// comma-separated angle list override, e.g. 0.5236,0.7854,1.5708
    #[arg(long, global = true)]
    theta: Option<String>,

    /// expansion truncation order override
    #[arg(long, global = true)]
    order: Option<usize>,

    /// tolerance profile
    #[arg(long, global = true, value_enum)]
    tol_profile: Option<TolArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TolArg {
    Default,
    Strict,
}

#[derive(Subcommand)]
enum Command {
    /// Dense spectrum, wedge containment, numerical range, resolvent bounds
    Spectrum,
    /// Short-time expansion coefficients and closed-form oracles
    Coefficients,
    /// Kernel laws, diagonal asymptotics fit, smoothing rates
    Kernel,
    /// Small-angle trace-gap scan on both branches
    Limit,
    /// All suites in order
    All,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = &cli.grid {
        let sizes: std::result::Result<Vec<usize>, _> =
            grid.split('x').map(str::parse::<usize>).collect();
        cfg.grid = sizes
            .map_err(|_| WicklabError::Config(format!("grid '{grid}' is not like 24x24")))?;
    }
    if let Some(theta) = &cli.theta {
        let list: std::result::Result<Vec<f64>, _> =
            theta.split(',').map(str::parse::<f64>).collect();
        cfg.theta = list
            .map_err(|_| WicklabError::Config(format!("theta '{theta}' is not a float list")))?;
    }
    if let Some(order) = cli.order {
        cfg.order = order;
    }
    if let Some(profile) = cli.tol_profile {
        cfg.tol_profile = match profile {
            TolArg::Default => TolProfile::Default,
            TolArg::Strict => TolProfile::Strict,
        };
        cfg.tolerances = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let names: Vec<&str> = match cli.command {
        Command::Spectrum => vec!["spectrum"],
        Command::Coefficients => vec!["coefficients"],
        Command::Kernel => vec!["kernel"],
        Command::Limit => vec!["limit"],
        Command::All => SUITE_NAMES.to_vec(),
    };
    let ctx = match SuiteContext::new(cfg) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_suites(&ctx, &names) {
        Ok((report, path)) => {
            for suite in &report.suites {
                for v in &suite.verdicts {
                    println!(
                        "[{}] {}/{}: measured {:.3e} vs threshold {:.3e}",
                        if v.pass { "PASS" } else { "FAIL" },
                        suite.name,
                        v.check,
                        v.measured,
                        v.threshold
                    );
                }
                println!(
                    "suite {}: {} in {} ms",
                    suite.name,
                    if suite.all_pass() { "PASS" } else { "FAIL" },
                    suite.runtime_ms
                );
            }
            println!("report: {}", path.display());
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("suite error: {e}");
            ExitCode::from(3)
        }
    }
}
