//! `slotplace`: generate instances, solve them and run parameter sweeps.
//!
//! Exit codes: 0 success, 1 `verify` found an infeasible placement,
//! 2 a guarantee check failed, 3 invalid input or usage, 4 solver or oracle failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::json;
use slotplace::experiment::{run_algorithm, run_sweep, write_csv, Algorithm, Prepared, RunOptions, SweepConfig};
use slotplace::model::{read_placement, write_placement};
use slotplace::simgen::{generate, GenParams};
use slotplace::{check_feasible, gsp_to_spsc, AnyInstance, Error, InstanceFile, DEFAULT_FEASIBILITY_TOLERANCE};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_GUARANTEE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser)]
#[command(name = "slotplace", version, about = "Service placement on heterogeneous edge nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance (general per-node rewards).
    Generate(GenerateArgs),
    /// Convert a general instance to set-constraint form.
    Convert {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve an instance with one algorithm.
    Solve(SolveArgs),
    /// Run a parameter sweep described by a key = value config file.
    Sweep {
        config: PathBuf,
        /// CSV output; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check that a placement file fits an instance and report its reward.
    Verify { instance: PathBuf, placement: PathBuf },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    services: usize,
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    #[arg(long, default_value_t = 1000)]
    users: usize,
    /// Zipf exponent of service popularity.
    #[arg(long, default_value_t = 1.3)]
    kappa: f64,
    /// Service size scale.
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    /// Half-width of the per-node reward noise.
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Random seed; drawn and recorded in the file if omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// rsa, csa, sa1, sa2, greedy, lp-round or brute.
    #[arg(short, long, default_value = "rsa")]
    algorithm: String,
    /// Where to write the placement.
    #[arg(short, long)]
    placement: Option<PathBuf>,
    /// Where to write the metrics JSON; stdout if omitted.
    #[arg(short, long)]
    metrics: Option<PathBuf>,
    /// Seed for lp-round.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure that maps to a specific exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(Exit(code, _)) = err.downcast_ref::<Exit>() {
        return *code;
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_input_error() => EXIT_INPUT,
        Some(Error::Generation(_)) => EXIT_INPUT,
        Some(_) => EXIT_SOLVER,
        None if err.downcast_ref::<io::Error>().is_some() => EXIT_INPUT,
        None => EXIT_SOLVER,
    }
}

fn load(path: &Path) -> Result<AnyInstance> {
    let file = InstanceFile::read(path).with_context(|| format!("reading instance {}", path.display()))?;
    file.into_instance().with_context(|| format!("invalid instance {}", path.display()))
}

fn to_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let params = GenParams {
        n_services: a.services,
        n_nodes: a.nodes,
        n_users: a.users,
        kappa: a.kappa,
        phi: a.phi,
        d: a.d,
        seed: a.seed,
    };
    let g = generate(&params)?;
    let mut file = InstanceFile::from_gsp(&g.instance);
    file.provenance = Some(json!({ "generator": g.params }));
    file.write(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    info!("wrote {} with seed {}", a.output.display(), g.params.seed.unwrap_or_default());
    Ok(())
}

fn cmd_convert(input: &Path, output: &Path) -> Result<()> {
    let AnyInstance::Gsp(g) = load(input)? else {
        return Err(Error::Input(format!("{} is already in set-constraint form", input.display())).into());
    };
    let (s, map) = gsp_to_spsc(&g);
    let mut file = InstanceFile::from_spsc(&s);
    let origins: Vec<[usize; 2]> = map.restricted.iter().map(|r| [r.origin, r.rank]).collect();
    file.provenance = Some(json!({ "converted_from": input.display().to_string(), "user_origins": origins }));
    file.write(output).with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let alg: Algorithm = a.algorithm.parse()?;
    let prep = Prepared::new(load(&a.instance)?)?;
    let m = run_algorithm(&prep, alg, &RunOptions { seed: a.seed, ..RunOptions::default() })?;
    if let Some(path) = &a.placement {
        write_placement(path, &m.placement).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut out = to_writer(a.metrics.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&m)?)?;
    out.flush()?;
    if m.guarantee_met == Some(false) {
        return Err(Exit(
            EXIT_GUARANTEE,
            format!(
                "{alg} reward {} is below {} x R̂ = {}",
                m.reward,
                m.guarantee.unwrap_or_default(),
                m.guarantee.unwrap_or_default() * m.r_hat
            ),
        )
        .into());
    }
    Ok(())
}

fn cmd_sweep(config: &Path, output: Option<&Path>, workers: Option<usize>) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = SweepConfig::parse(&text).with_context(|| format!("invalid sweep config {}", config.display()))?;
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Input("--workers must be positive".into()).into());
        }
        cfg.workers = Some(w);
    }
    let rows = run_sweep(&cfg)?;
    write_csv(&rows, to_writer(output)?)?;
    let violated = rows.iter().filter(|r| r.row_type == "run" && r.guarantee_met == Some(false)).count();
    if violated > 0 {
        return Err(Exit(EXIT_GUARANTEE, format!("{violated} runs fell below their guarantee")).into());
    }
    Ok(())
}

fn cmd_verify(instance: &Path, placement: &Path) -> Result<()> {
    let prep = Prepared::new(load(instance)?)?;
    let p = read_placement(placement, prep.spsc.services.len())
        .with_context(|| format!("reading placement {}", placement.display()))?;
    let feasible = check_feasible(&p, &prep.spsc, DEFAULT_FEASIBILITY_TOLERANCE)?;
    let (reward, satisfied, users) = prep.evaluate(&p);
    let loads = p.loads(&prep.spsc);
    let report = json!({
        "feasible": feasible,
        "reward": reward,
        "satisfied": satisfied,
        "users": users,
        "r_hat": prep.lp.r_hat,
        "loads": loads,
    });
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&report)?)?;
    if !feasible {
        return Err(Exit(EXIT_INFEASIBLE, "placement exceeds a node capacity".into()).into());
    }
    if reward > prep.lp.r_hat + 1e-6 {
        warn!("reward {reward} exceeds the LP bound {}", prep.lp.r_hat);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Convert { input, output } => cmd_convert(&input, &output),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep { config, output, workers } => cmd_sweep(&config, output.as_deref(), workers),
        Command::Verify { instance, placement } => cmd_verify(&instance, &placement),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (e.g. `| head`) is not a failure.
        Err(e)
            if e.chain()
                .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
