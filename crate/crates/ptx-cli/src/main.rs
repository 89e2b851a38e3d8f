//! `ptx`: command-line harness for the two-phase transfer pipeline.
//!
//! Exit codes: 0 on success, 2 on configuration or input errors, 3 when a
//! grid run completed but some cells failed (their rows carry the error).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ptx_core::accountant::{calibrate_noise, epsilon_for, MechanismSchedule, PrivacyBudget};
use ptx_core::attack::{dpsgd_mechanism_for_budget, membership_experiment, AttackInstance, AttackMechanism};
use ptx_core::dpsgd::{dpsgd_fit, DpSgdConfig};
use ptx_core::experiment::{
    read_feature_matrix, run_eigspec, run_figure4, run_gamma_sweep, write_results_csv,
    ExperimentConfig, RunManifest, TrialResult,
};
use ptx_core::linalg::perturbed_basis;
use ptx_core::model::{random_instance, LabeledDataset};
use ptx_core::two_phase::{two_phase_transfer, SubspaceSource};
use ptx_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ptx", version, about = "Two-phase private transfer learning harness")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the RNG seed (the config's base_seed for grid commands).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulated transfer study grid from a JSON config.
    Figure4(GridArgs),
    /// Run the oracle-subspace bias sweep from a JSON config.
    GammaSweep(GridArgs),
    /// Eigenvalues of a feature CSV's sample covariance.
    Eigspec(EigspecArgs),
    /// Tracing-attack membership experiment on synthetic data.
    Attack(AttackArgs),
    /// RDP accounting for a subsampled Gaussian schedule.
    Accountant(AccountantArgs),
    /// One end-to-end two-phase transfer run on synthetic data.
    TwoPhase(TwoPhaseArgs),
    /// DP-SGD linear regression on a CSV dataset (last column is the label).
    PrivateRegress(PrivateRegressArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Experiment config JSON (schema documented in the README).
    #[arg(long)]
    config: PathBuf,
    /// Results CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Manifest JSON path (default: <out>.manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EigspecArgs {
    /// Input features CSV (rows = samples, columns = dimensions).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output CSV of `index,eigenvalue` rows.
    #[arg(long)]
    out: PathBuf,
    /// Treat the first row as data even if it looks like a header.
    #[arg(long)]
    no_header: bool,
    /// Use the uncentered second-moment matrix instead of the covariance.
    #[arg(long)]
    no_center: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MechanismArg {
    Oracle,
    Ols,
    Dpsgd,
}

#[derive(Args)]
struct AttackArgs {
    /// Subspace dimension of the attacked regression (k >= 2).
    #[arg(long)]
    k: usize,
    /// Ambient dimension (default: k).
    #[arg(long)]
    d: Option<usize>,
    /// Norm of the true private task vector, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Label noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Private sample size per trial.
    #[arg(long)]
    n2: usize,
    /// Number of membership trials.
    #[arg(long)]
    trials: usize,
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    /// Privacy budget for the dpsgd mechanism.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long, default_value_t = 0.3)]
    clip: f64,
    #[arg(long, default_value_t = 0.4)]
    lr: f64,
    #[arg(long, default_value_t = 7)]
    epochs: u32,
    #[arg(long, default_value_t = 10)]
    batch: usize,
}

#[derive(Args)]
struct AccountantArgs {
    /// Number of noisy steps (0 means nothing is released; epsilon = 0).
    #[arg(long)]
    steps: u64,
    /// Per-step sampling rate in (0, 1].
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Noise multiplier to account for.
    #[arg(long, conflicts_with = "target_eps")]
    noise_multiplier: Option<f64>,
    /// Calibrate the noise multiplier to this epsilon instead.
    #[arg(long)]
    target_eps: Option<f64>,
}

#[derive(Args)]
struct TwoPhaseArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    /// Number of public tasks.
    #[arg(long, default_value_t = 100)]
    t: usize,
    /// Public sample count (pooled across tasks).
    #[arg(long)]
    n1: usize,
    /// Private sample count.
    #[arg(long)]
    n2: usize,
    #[arg(long, default_value_t = 0.5)]
    noise_std: f64,
    #[arg(long, default_value_t = 1.0)]
    task_norm: f64,
    /// Privacy budget; omit for a nonprivate second phase.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    clip: f64,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 50)]
    epochs: u32,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    /// Skip subspace estimation: use the true basis perturbed by this angle
    /// (sin theta) instead of the method of moments.
    #[arg(long)]
    oracle_gamma: Option<f64>,
}

#[derive(Args)]
struct PrivateRegressArgs {
    /// Input CSV: feature columns followed by one label column.
    #[arg(long)]
    data: PathBuf,
    /// Treat the first row as data even if it looks like a header.
    #[arg(long)]
    no_header: bool,
    /// Privacy budget; omit (with no --noise-multiplier) for nonprivate SGD.
    #[arg(long, conflicts_with = "noise_multiplier")]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Fixed noise multiplier instead of a calibrated budget.
    #[arg(long)]
    noise_multiplier: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    epochs: u32,
    #[arg(long, default_value_t = 10)]
    batch: usize,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("ptx: could not size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ptx: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match cli.command {
        Command::Figure4(args) => grid_command("figure4", &args, seed, run_figure4),
        Command::GammaSweep(args) => grid_command("gamma-sweep", &args, seed, run_gamma_sweep),
        Command::Eigspec(args) => {
            let has_header = if args.no_header { Some(false) } else { None };
            let eig = run_eigspec(&args.input, &args.out, has_header, !args.no_center)?;
            eprintln!("eigspec: wrote {} eigenvalues to {}", eig.len(), args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack(args) => attack_command(&args, seed.unwrap_or(0)),
        Command::Accountant(args) => accountant_command(&args),
        Command::TwoPhase(args) => two_phase_command(&args, seed.unwrap_or(0)),
        Command::PrivateRegress(args) => private_regress_command(&args, seed.unwrap_or(0)),
    }
}

fn grid_command(
    name: &str,
    args: &GridArgs,
    seed: Option<u64>,
    runner: fn(&ExperimentConfig) -> Result<Vec<TrialResult>>,
) -> Result<ExitCode> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let rows = runner(&cfg)?;
    write_results_csv(BufWriter::new(File::create(&args.out)?), &rows)?;
    let manifest = RunManifest::new(name, &cfg, &rows, start.elapsed().as_millis() as u64);
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", args.out.display())));
    std::fs::write(&manifest_path, manifest.to_json()?)?;
    eprintln!(
        "{name}: {} rows ({} failed cells) in {} ms -> {}",
        manifest.total_cells,
        manifest.failed_cells,
        manifest.wall_ms,
        args.out.display()
    );
    Ok(if manifest.failed_cells > 0 {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn attack_command(args: &AttackArgs, seed: u64) -> Result<ExitCode> {
    let d = args.d.unwrap_or(args.k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = AttackInstance::synthetic(d, args.k, args.rho, args.sigma, &mut rng)?;
    let mechanism = match args.mechanism {
        MechanismArg::Oracle => AttackMechanism::Oracle,
        MechanismArg::Ols => AttackMechanism::Ols,
        MechanismArg::Dpsgd => {
            let eps = args.eps.ok_or_else(|| {
                Error::InvalidArgs("the dpsgd mechanism needs --eps".into())
            })?;
            let cfg = DpSgdConfig {
                clip_norm: args.clip,
                learning_rate: args.lr,
                epochs: args.epochs,
                batch_size: args.batch,
                noise_multiplier: 0.0,
                lr_schedule: Default::default(),
                init: Default::default(),
            };
            let budget = PrivacyBudget::new(eps, args.delta)?;
            dpsgd_mechanism_for_budget(cfg, &budget, args.n2)?
        }
    };
    let report = membership_experiment(&inst, &mechanism, args.n2, args.trials, &mut rng)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn accountant_command(args: &AccountantArgs) -> Result<ExitCode> {
    let (epsilon, noise_multiplier) = match (args.noise_multiplier, args.target_eps) {
        (Some(nm), None) => {
            if args.steps == 0 {
                (0.0, nm)
            } else {
                let sched = MechanismSchedule::new(args.steps, args.q, nm)?;
                (epsilon_for(&sched, args.delta)?, nm)
            }
        }
        (None, Some(target)) => {
            let budget = PrivacyBudget::new(target, args.delta)?;
            if args.steps == 0 {
                // Nothing is released, so any noise level meets the target.
                (0.0, 0.0)
            } else {
                let nm = calibrate_noise(&budget, args.steps, args.q)?;
                let sched = MechanismSchedule::new(args.steps, args.q, nm)?;
                (epsilon_for(&sched, args.delta)?, nm)
            }
        }
        _ => {
            return Err(Error::InvalidArgs(
                "pass exactly one of --noise-multiplier or --target-eps".into(),
            ))
        }
    };
    let out = serde_json::json!({
        "epsilon": epsilon,
        "delta": args.delta,
        "noise_multiplier": noise_multiplier,
        "steps": args.steps,
        "q": args.q,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn two_phase_command(args: &TwoPhaseArgs, seed: u64) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dp = DpSgdConfig {
        clip_norm: args.clip,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        noise_multiplier: 0.0,
        lr_schedule: Default::default(),
        init: Default::default(),
    };
    let budget = match args.eps {
        Some(e) => Some(PrivacyBudget::new(e, args.delta)?),
        None => None,
    };
    let inst = random_instance(args.d, args.k, args.t, args.noise_std, args.task_norm, &mut rng)?;
    let (inst, result) = match args.oracle_gamma {
        Some(gamma) => {
            // Same geometry as the gamma sweep: align the private task with
            // the first basis column, then tilt that column by gamma.
            let inst = inst.with_private_task_on_first_axis()?;
            let bhat = perturbed_basis(inst.basis(), gamma, &mut rng)?;
            let private = inst.sample_private(args.n2, &mut rng);
            let source = SubspaceSource::Oracle(bhat);
            let res = two_phase_transfer(
                &source,
                &private,
                args.k,
                &dp,
                budget.as_ref(),
                Some(&inst),
                &mut rng,
            )?;
            (inst, res)
        }
        None => {
            let public = inst.sample_public(args.n1, &mut rng);
            let private = inst.sample_private(args.n2, &mut rng);
            let source = SubspaceSource::PublicMom(&public);
            let res = two_phase_transfer(
                &source,
                &private,
                args.k,
                &dp,
                budget.as_ref(),
                Some(&inst),
                &mut rng,
            )?;
            (inst, res)
        }
    };
    let mut json = result.to_json();
    let l2 = (&result.lifted - inst.private_parameter()).norm();
    if let serde_json::Value::Object(ref mut map) = json {
        map.insert("l2_param_error".into(), serde_json::json!(l2));
    }
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(ExitCode::SUCCESS)
}

fn private_regress_command(args: &PrivateRegressArgs, seed: u64) -> Result<ExitCode> {
    let file = File::open(&args.data)?;
    let has_header = if args.no_header { Some(false) } else { None };
    let table = read_feature_matrix(BufReader::new(file), has_header)?;
    if table.ncols() < 2 {
        return Err(Error::InvalidArgs(
            "need at least one feature column and one label column".into(),
        ));
    }
    let p = table.ncols() - 1;
    let inputs = table.columns(0, p).into_owned();
    let labels = table.column(p).into_owned();
    let n = inputs.nrows();
    let data = LabeledDataset::new(inputs, labels, vec![1; n])?;

    let mut cfg = DpSgdConfig {
        clip_norm: args.clip,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        noise_multiplier: 0.0,
        lr_schedule: Default::default(),
        init: Default::default(),
    };
    let budget = match args.eps {
        Some(e) => Some(PrivacyBudget::new(e, args.delta)?),
        None => None,
    };
    if let Some(nm) = args.noise_multiplier {
        cfg.noise_multiplier = nm;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fit = dpsgd_fit(&data, &cfg, budget.as_ref(), &mut rng)?;
    println!("{}", serde_json::to_string_pretty(&fit.to_json())?);
    Ok(ExitCode::SUCCESS)
}
