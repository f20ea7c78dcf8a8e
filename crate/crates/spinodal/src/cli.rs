//! Command-line interface; the `spinodal` binary calls [`main_with`].

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spinodal_core::dataset::{DesignParams, Direction};

use crate::backend::{resolve_threads, thread_pool};
use crate::error::{exit, write_bytes, Result};
use crate::formats::csv::{parse_direction, parse_theta};
use crate::formats::manifest::Split;
use crate::{pipeline, RunConfig};

/// Spinodoid metamaterials: morphology generation, surrogate training and
/// inverse design.
#[derive(Debug, Parser)]
#[command(name = "spinodal", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (falls back to SPNF_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Phase field, shell mesh and geometric descriptors for one or more designs.
    Generate(GenerateArgs),
    /// Synthetic teacher dataset with a train/test split.
    MakeDataset(MakeDatasetArgs),
    /// Train a model registry on a dataset manifest.
    Train(TrainArgs),
    /// Metrics and predicted curves of a registry on a dataset split.
    Eval(EvalArgs),
    /// Predicted stress-strain curve for one design and direction.
    Predict(PredictArgs),
    /// Inverse design against a target curve.
    Design(DesignArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Cone angles in degrees, `a,b,c`; repeat for a batch.
    #[arg(long, required = true, value_parser = theta_arg)]
    theta: Vec<DesignParams>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    domain_size: Option<f64>,
    #[arg(long)]
    thickness: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MakeDatasetArgs {
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset manifest or its directory.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Stop after this many epochs without improvement.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    no_transfer: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Registry manifest or its directory.
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long, value_parser = theta_arg)]
    theta: DesignParams,
    /// Loading direction 1, 2 or 3.
    #[arg(long, value_parser = direction_arg)]
    direction: Direction,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    registry: PathBuf,
    /// Target curve CSV.
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn theta_arg(s: &str) -> std::result::Result<DesignParams, String> {
    parse_theta(s)
}

fn direction_arg(s: &str) -> std::result::Result<Direction, String> {
    parse_direction(s)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    match &cli.command {
        Command::Generate(a) => {
            set(&mut cfg.field.resolution, a.resolution);
            set(&mut cfg.field.domain_size, a.domain_size);
            set(&mut cfg.field.thickness, a.thickness);
        }
        Command::MakeDataset(a) => {
            set(&mut cfg.dataset.n_per_class, a.n_per_class);
            set(&mut cfg.dataset.noise, a.noise);
            set(&mut cfg.dataset.test_fraction, a.test_fraction);
        }
        Command::Train(a) => {
            set(&mut cfg.train.epochs, a.epochs);
            set(&mut cfg.train.learning_rate, a.learning_rate);
            set(&mut cfg.train.batch_size, a.batch_size);
            if a.patience.is_some() {
                cfg.train.patience = a.patience;
            }
            if a.no_transfer {
                cfg.transfer = false;
            }
        }
        Command::Design(a) => {
            set(&mut cfg.design.kappa, a.kappa);
            set(&mut cfg.design.starts, a.starts);
            set(&mut cfg.design.epochs, a.epochs);
        }
        Command::Eval(_) | Command::Predict(_) => {}
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    let pool = thread_pool(resolve_threads(cli.threads, cfg.threads)?)?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => pipeline::cmd_generate(&cfg, &a.theta, &a.out),
        Command::MakeDataset(a) => pipeline::cmd_make_dataset(&cfg, &a.out).map(drop),
        Command::Train(a) => pipeline::cmd_train(&cfg, &a.manifest, &a.out).map(drop),
        Command::Eval(a) => {
            let split = match a.split {
                SplitArg::Train => Some(Split::Train),
                SplitArg::Test => Some(Split::Test),
                SplitArg::All => None,
            };
            let m = pipeline::cmd_eval(&a.registry, &a.manifest, split, &a.out)?;
            println!("R2 stress {:.4}  energy {:.4}  stiffness {:.4}  MAPE {:.4}", m.r2_stress, m.r2_energy, m.r2_stiffness, m.mape);
            Ok(())
        }
        Command::Predict(a) => {
            let text = pipeline::cmd_predict(&a.registry, a.theta, a.direction)?;
            match &a.out {
                Some(p) => write_bytes(p, text.as_bytes()),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Design(a) => {
            let r = pipeline::cmd_design(&cfg, &a.registry, &a.target, &a.out)?;
            let [t1, t2, t3] = r.theta_star.angles();
            println!("theta* = [{t1:.3}, {t2:.3}, {t3:.3}]  direction e{}  loss {:.5}", r.direction_star.number(), r.best_loss);
            Ok(())
        }
    })
}

/// Parse `args` (program name first), run the command and return the
/// process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USER as u8 } else { exit::OK as u8 };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK as u8,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}
