use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dyadic_bellman_cli::commands::{self, DirectionArg, Experiment, McArgs, Output, Problem, Suite};
use dyadic_bellman_cli::config::{Format, GridTarget, Overrides, SuiteConfig, SEED_ENV};
use dyadic_bellman_cli::{CliError, Result};

/// Closed forms, grid envelopes, dyadic oracles and Monte Carlo checks for
/// the Davis and Bollobás Bellman functions.
#[derive(Parser)]
#[command(name = "bellman", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Start from a saved config instead of the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Exponent, or a comma-separated list for `verify` and `constant`.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Vec<f64>,
    /// Envelope lattice, e.g. `--grid p:-3,3,401 q:0,3,401`.
    #[arg(long, global = true, num_args = 1..=2, value_name = "AXIS:MIN,MAX,N", allow_hyphen_values = true)]
    grid: Vec<String>,
    /// Number of log-spaced step magnitudes for the envelope solver.
    #[arg(long = "a-set", global = true, value_name = "N")]
    a_set: Option<usize>,
    /// Root tolerance for `constant`, stopping tolerance for `envelope`,
    /// check tolerance for `verify`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// RNG seed; `BELLMAN_SEED` is used when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Oracle depth.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Monte Carlo path count.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Monte Carlo time step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Directory for result files and the resolved config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// c_α and κ_α.
    Constant,
    /// Closed-form value at one point.
    Eval {
        #[arg(value_enum)]
        function: Problem,
        #[arg(allow_negative_numbers = true)]
        p: f64,
        #[arg(allow_negative_numbers = true)]
        q: f64,
    },
    /// Value iteration on a lattice; writes the grid dump under --out.
    Envelope {
        #[arg(value_enum)]
        problem: Problem,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        /// Multiply the Davis constant in the obstacle by this factor.
        #[arg(long, default_value_t = 1.0)]
        inflate: f64,
        /// Point whose value is reported and watched for divergence.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0], allow_negative_numbers = true, value_name = "P,Q")]
        probe: Vec<f64>,
    },
    /// Run a verification suite; exits nonzero if any check fails.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Dyadic DP oracle value and its bound direction.
    Oracle {
        #[arg(value_enum)]
        problem: Problem,
        #[arg(allow_negative_numbers = true)]
        p: f64,
        #[arg(allow_negative_numbers = true)]
        q: f64,
    },
    /// Monte Carlo experiments.
    Mc {
        #[arg(value_enum)]
        experiment: Experiment,
        /// Boundary parameters (comma-separated).
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        /// Checkpoint times for `supermartingale`.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<f64>,
        /// Start point `p,q` for `jensen`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "P,Q")]
        point: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constant => "constant",
            Command::Eval { .. } => "eval",
            Command::Envelope { .. } => "envelope",
            Command::Verify { .. } => "verify",
            Command::Oracle { .. } => "oracle",
            Command::Mc { .. } => "mc",
        }
    }
}

fn resolve(cli: &Cli) -> Result<SuiteConfig> {
    let c = &cli.common;
    let base = match &c.config {
        Some(path) => SuiteConfig::load(path)?,
        None => SuiteConfig::defaults(),
    };
    let overrides = Overrides {
        alpha: c.alpha.clone(),
        grid: c.grid.clone(),
        a_set: c.a_set,
        seed: c.seed,
        depth: c.depth,
        paths: c.paths,
        dt: c.dt,
        out: c.out.clone(),
        format: c.format,
    };
    let target = match &cli.command {
        Command::Envelope { problem: Problem::Bollobas, .. } => GridTarget::Bollobas,
        _ => GridTarget::Davis,
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut cfg = base.resolve(&overrides, env_seed.as_deref(), target)?;
    cfg.command = Some(cli.command.name().into());
    if let Some(tol) = c.tol {
        match cli.command {
            Command::Constant => cfg.tol.root = tol,
            Command::Envelope { .. } => cfg.tol.solver = tol,
            _ => cfg.tol.check = tol,
        }
    }
    let single = !matches!(cli.command, Command::Constant | Command::Verify { .. });
    if single && c.alpha.len() > 1 {
        return Err(CliError::Usage(format!("{} takes a single --alpha", cli.command.name())));
    }
    Ok(cfg)
}

fn pair(name: &str, v: &[f64]) -> Result<Option<(f64, f64)>> {
    match v {
        [] => Ok(None),
        [p, q] => Ok(Some((*p, *q))),
        _ => Err(CliError::Usage(format!("--{name} takes two comma-separated numbers"))),
    }
}

fn run(cli: &Cli, cfg: &SuiteConfig) -> Result<Output> {
    match &cli.command {
        Command::Constant => commands::constant(cfg),
        Command::Eval { function, p, q } => commands::eval(cfg, *function, *p, *q),
        Command::Envelope { problem, direction, inflate, probe } => {
            let probe = pair("probe", probe)?.unwrap_or((0.0, 1.0));
            commands::envelope(cfg, *problem, *direction, *inflate, probe)
        }
        Command::Verify { suite } => commands::verify(cfg, *suite),
        Command::Oracle { problem, p, q } => commands::oracle(cfg, *problem, *p, *q),
        Command::Mc { experiment, a, checkpoints, point } => {
            let args = McArgs { a: a.clone(), checkpoints: checkpoints.clone(), point: pair("point", point)? };
            commands::mc(cfg, *experiment, &args)
        }
    }
}

fn write_out(cfg: &SuiteConfig, out: &Output) -> Result<()> {
    let Some(dir) = &cfg.out else {
        // no output directory: the resolved config goes to stderr
        eprint!("# resolved config\n{}", cfg.to_toml());
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    };
    write("config.toml", &cfg.to_toml())?;
    for (name, text) in &out.files {
        write(name, text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|cfg| {
        let out = run(&cli, &cfg)?;
        write_out(&cfg, &out)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
