//! `kfrelax` — experiment CLI for the RELAX/KF-RELAX gradient estimators.
//!
//! Exit codes: 0 success, 2 usage/configuration error, 1 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kfrelax::estimators::{ToyConfig, ToyEstimatorKind};
use kfrelax::mlp::Activation;
use kfrelax::rl::{RlConfig, RlEstimatorKind};
use kfrelax_cli::config::ConfigFile;
use kfrelax_cli::csvout::parse_csv;
use kfrelax_cli::runs::{
    lax_estimator_name, rl_estimator_name, run_lax, run_lemmas, run_rl, run_toy,
    toy_estimator_name, EnvKind, LaxEstimatorKind, LaxRunSpec, RlRunSpec, ToyRunSpec,
};
use kfrelax_cli::svg::{render_line_chart, Series};

#[derive(Parser)]
#[command(
    name = "kfrelax",
    about = "RELAX / KF-RELAX gradient-estimation experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic Bernoulli problem: minimize E[(b − t)²] over the logit θ.
    Toy(ToyArgs),
    /// Discrete-control RL training (CartPole or Acrobot).
    Rl(RlArgs),
    /// Continuous demo: minimize E[(x − t)²], x ~ N(θ, 1), with LAX.
    Lax(LaxArgs),
    /// Numeric checks of the compatible-approximation lemmas on random MDPs.
    Lemmas(LemmasArgs),
    /// Render CSV logs as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ToyEstimatorArg {
    Reinforce,
    Relax,
    #[value(name = "kf-relax")]
    KfRelax,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RlEstimatorArg {
    Relax,
    #[value(name = "kf-relax")]
    KfRelax,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LaxEstimatorArg {
    Reinforce,
    Lax,
    #[value(name = "kf-lax")]
    KfLax,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnvArg {
    Cartpole,
    Acrobot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ActivationArg {
    Tanh,
    Sigmoid,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Seed for the run's generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flat `key = value` config file; CLI flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV log.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, value_enum)]
    estimator: ToyEstimatorArg,
    /// Target constant t in (0, 1).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[command(flatten)]
    common: CommonRunArgs,
    /// Adam rate on θ.
    #[arg(long)]
    lr_theta: Option<f64>,
    /// Surrogate rate (Adam for relax, natural step for kf-relax).
    #[arg(long)]
    lr_phi: Option<f64>,
    /// Surrogate hidden width.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Tikhonov damping λ for the factor inverses.
    #[arg(long)]
    damping: Option<f64>,
    /// EMA decay ρ for the factor statistics.
    #[arg(long)]
    decay: Option<f64>,
    /// Statistics updates between factor re-inversions.
    #[arg(long)]
    inverse_period: Option<usize>,
    /// Trust-region cap on each layer's update norm (inf disables).
    #[arg(long)]
    trust_bound: Option<f64>,
    /// Steps between variance measurements (0 disables).
    #[arg(long)]
    variance_period: Option<u64>,
    /// Single-sample estimates per variance measurement.
    #[arg(long)]
    variance_samples: Option<usize>,
}

#[derive(Args)]
struct RlArgs {
    #[arg(long, value_enum)]
    env: EnvArg,
    #[arg(long, value_enum)]
    estimator: RlEstimatorArg,
    #[arg(long)]
    episodes: Option<u64>,
    #[command(flatten)]
    common: CommonRunArgs,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    entropy_weight: Option<f64>,
    #[arg(long)]
    lr_policy: Option<f64>,
    #[arg(long)]
    lr_phi: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    trust_bound: Option<f64>,
    /// Episodes per update.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    policy_hidden: Option<usize>,
    #[arg(long)]
    surrogate_hidden: Option<usize>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    inverse_period: Option<usize>,
    /// Episodes between variance measurements (0 disables).
    #[arg(long)]
    variance_period: Option<u64>,
    #[arg(long)]
    variance_samples: Option<usize>,
    /// Stop early once the 100-episode mean return reaches this value.
    #[arg(long)]
    stop_return: Option<f64>,
}

#[derive(Args)]
struct LaxArgs {
    #[arg(long, value_enum)]
    estimator: LaxEstimatorArg,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[command(flatten)]
    common: CommonRunArgs,
    #[arg(long)]
    lr_theta: Option<f64>,
    #[arg(long)]
    lr_phi: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    inverse_period: Option<usize>,
    #[arg(long)]
    variance_period: Option<u64>,
    #[arg(long)]
    variance_samples: Option<usize>,
}

#[derive(Args)]
struct LemmasArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random MDPs to check.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Output directory for the report.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV files (one or more).
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Metric to plot (e.g. loss, return_mean100, log10_variance).
    #[arg(long, default_value = "loss")]
    metric: String,
    /// Plot log10 of the metric.
    #[arg(long, default_value_t = false)]
    log_y: bool,
    #[arg(long)]
    title: Option<String>,
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Toy(args) => cmd_toy(args),
        Command::Rl(args) => cmd_rl(args),
        Command::Lax(args) => cmd_lax(args),
        Command::Lemmas(args) => cmd_lemmas(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &Option<PathBuf>, known: &[&str]) -> Result<Result<ConfigFile, String>> {
    let cfg = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::empty(),
    };
    if let Err(e) = cfg.check_known_keys(known) {
        return Ok(Err(e.to_string()));
    }
    Ok(Ok(cfg))
}

const TOY_KEYS: &[&str] = &[
    "t", "steps", "lr_theta", "lr_phi", "hidden", "activation", "damping", "decay",
    "inverse_period", "trust_bound", "variance_period", "variance_samples",
];

fn cmd_toy(args: ToyArgs) -> Result<ExitCode> {
    let cfg = match load_config(&args.common.config, TOY_KEYS)? {
        Ok(c) => c,
        Err(msg) => return Ok(usage_error(msg)),
    };
    let defaults = ToyConfig::default();
    let activation = match args.activation {
        Some(ActivationArg::Tanh) => Some("tanh".to_owned()),
        Some(ActivationArg::Sigmoid) => Some("sigmoid".to_owned()),
        None => None,
    };
    let activation = match cfg
        .resolve("activation", activation, "tanh".to_owned())?
        .as_str()
    {
        "tanh" => Activation::Tanh,
        "sigmoid" => Activation::Sigmoid,
        other => return Ok(usage_error(format!("unknown activation `{other}`"))),
    };
    let toy = ToyConfig {
        t: cfg.resolve("t", args.t, 0.499)?,
        lr_theta: cfg.resolve("lr_theta", args.lr_theta, defaults.lr_theta)?,
        lr_surrogate: cfg.resolve("lr_phi", args.lr_phi, defaults.lr_surrogate)?,
        hidden: cfg.resolve("hidden", args.hidden, defaults.hidden)?,
        activation,
        decay: cfg.resolve("decay", args.decay, defaults.decay)?,
        damping: cfg.resolve("damping", args.damping, defaults.damping)?,
        inverse_period: cfg.resolve("inverse_period", args.inverse_period, defaults.inverse_period)?,
        trust_bound: cfg.resolve("trust_bound", args.trust_bound, defaults.trust_bound)?,
    };
    if !(toy.t > 0.0 && toy.t < 1.0) {
        return Ok(usage_error("t must lie strictly inside (0, 1)"));
    }
    if toy.lr_theta <= 0.0 || toy.lr_surrogate <= 0.0 {
        return Ok(usage_error("learning rates must be positive"));
    }
    let spec = ToyRunSpec {
        estimator: match args.estimator {
            ToyEstimatorArg::Reinforce => ToyEstimatorKind::Reinforce,
            ToyEstimatorArg::Relax => ToyEstimatorKind::Relax,
            ToyEstimatorArg::KfRelax => ToyEstimatorKind::KfRelax,
        },
        steps: cfg.resolve("steps", args.steps, 5000)?,
        seed: args.common.seed,
        variance_period: cfg.resolve("variance_period", args.variance_period, 100)?,
        variance_samples: cfg.resolve("variance_samples", args.variance_samples, 1000)?,
        toy,
    };
    let record = run_toy(&spec)?;
    let name = format!(
        "toy_{}_t{}_s{}.csv",
        toy_estimator_name(spec.estimator),
        spec.toy.t,
        spec.seed
    );
    let path = args.common.out.join(name);
    record.write_csv(&path)?;
    let final_loss = record
        .rows
        .iter()
        .rev()
        .find(|r| r.metric == "loss")
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    eprintln!(
        "toy {}: {} steps in {:.2}s, final expected loss {:.6}, wrote {}",
        toy_estimator_name(spec.estimator),
        spec.steps,
        record.elapsed_secs,
        final_loss,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

const RL_KEYS: &[&str] = &[
    "episodes", "gamma", "entropy_weight", "lr_policy", "lr_phi", "damping", "trust_bound",
    "batch", "policy_hidden", "surrogate_hidden", "decay", "inverse_period", "variance_period",
    "variance_samples", "stop_return",
];

fn cmd_rl(args: RlArgs) -> Result<ExitCode> {
    let cfg = match load_config(&args.common.config, RL_KEYS)? {
        Ok(c) => c,
        Err(msg) => return Ok(usage_error(msg)),
    };
    let defaults = RlConfig::default();
    let rl_cfg = RlConfig {
        gamma: cfg.resolve("gamma", args.gamma, defaults.gamma)?,
        entropy_weight: cfg.resolve("entropy_weight", args.entropy_weight, defaults.entropy_weight)?,
        lr_policy: cfg.resolve("lr_policy", args.lr_policy, defaults.lr_policy)?,
        lr_surrogate: cfg.resolve("lr_phi", args.lr_phi, defaults.lr_surrogate)?,
        damping: cfg.resolve("damping", args.damping, defaults.damping)?,
        trust_bound: cfg.resolve("trust_bound", args.trust_bound, defaults.trust_bound)?,
        batch_episodes: cfg.resolve("batch", args.batch, defaults.batch_episodes)?,
        decay: cfg.resolve("decay", args.decay, defaults.decay)?,
        inverse_period: cfg.resolve("inverse_period", args.inverse_period, defaults.inverse_period)?,
        policy_hidden: cfg.resolve("policy_hidden", args.policy_hidden, defaults.policy_hidden)?,
        surrogate_hidden: cfg.resolve(
            "surrogate_hidden",
            args.surrogate_hidden,
            defaults.surrogate_hidden,
        )?,
    };
    if !(0.0..=1.0).contains(&rl_cfg.gamma) {
        return Ok(usage_error("gamma must lie in [0, 1]"));
    }
    if rl_cfg.batch_episodes == 0 {
        return Ok(usage_error("batch must be at least 1"));
    }
    if rl_cfg.entropy_weight < 0.0 {
        return Ok(usage_error("entropy_weight must be non-negative"));
    }
    if rl_cfg.lr_policy <= 0.0 || rl_cfg.lr_surrogate <= 0.0 {
        return Ok(usage_error("learning rates must be positive"));
    }
    let spec = RlRunSpec {
        env: match args.env {
            EnvArg::Cartpole => EnvKind::CartPole,
            EnvArg::Acrobot => EnvKind::Acrobot,
        },
        estimator: match args.estimator {
            RlEstimatorArg::Relax => RlEstimatorKind::Relax,
            RlEstimatorArg::KfRelax => RlEstimatorKind::KfRelax,
        },
        episodes: cfg.resolve("episodes", args.episodes, 2000)?,
        seed: args.common.seed,
        variance_period: cfg.resolve("variance_period", args.variance_period, 500)?,
        variance_samples: cfg.resolve("variance_samples", args.variance_samples, 1000)?,
        stop_at_mean_return: match args.stop_return {
            Some(v) => Some(v),
            None => match cfg.resolve("stop_return", None::<f64>, f64::NAN)? {
                v if v.is_nan() => None,
                v => Some(v),
            },
        },
        cfg: rl_cfg,
    };
    let record = run_rl(&spec)?;
    let name = format!(
        "rl_{}_{}_s{}.csv",
        spec.env.name(),
        rl_estimator_name(spec.estimator),
        spec.seed
    );
    let path = args.common.out.join(name);
    record.write_csv(&path)?;
    let last_mean = record
        .rows
        .iter()
        .rev()
        .find(|r| r.metric == "return_mean100")
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    eprintln!(
        "rl {} {}: finished in {:.2}s, final 100-episode mean return {:.2}, wrote {}",
        spec.env.name(),
        rl_estimator_name(spec.estimator),
        record.elapsed_secs,
        last_mean,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

const LAX_KEYS: &[&str] = &[
    "t", "steps", "lr_theta", "lr_phi", "hidden", "damping", "decay", "inverse_period",
    "variance_period", "variance_samples",
];

fn cmd_lax(args: LaxArgs) -> Result<ExitCode> {
    let cfg = match load_config(&args.common.config, LAX_KEYS)? {
        Ok(c) => c,
        Err(msg) => return Ok(usage_error(msg)),
    };
    let spec = LaxRunSpec {
        estimator: match args.estimator {
            LaxEstimatorArg::Reinforce => LaxEstimatorKind::Reinforce,
            LaxEstimatorArg::Lax => LaxEstimatorKind::Lax,
            LaxEstimatorArg::KfLax => LaxEstimatorKind::KfLax,
        },
        t: cfg.resolve("t", args.t, 0.499)?,
        steps: cfg.resolve("steps", args.steps, 2000)?,
        seed: args.common.seed,
        lr_theta: cfg.resolve("lr_theta", args.lr_theta, 0.03)?,
        lr_surrogate: cfg.resolve("lr_phi", args.lr_phi, 0.01)?,
        hidden: cfg.resolve("hidden", args.hidden, 10)?,
        damping: cfg.resolve("damping", args.damping, 0.01)?,
        decay: cfg.resolve("decay", args.decay, 0.95)?,
        inverse_period: cfg.resolve("inverse_period", args.inverse_period, 20)?,
        variance_period: cfg.resolve("variance_period", args.variance_period, 100)?,
        variance_samples: cfg.resolve("variance_samples", args.variance_samples, 1000)?,
    };
    let record = run_lax(&spec)?;
    let name = format!(
        "lax_{}_t{}_s{}.csv",
        lax_estimator_name(spec.estimator),
        spec.t,
        spec.seed
    );
    let path = args.common.out.join(name);
    record.write_csv(&path)?;
    eprintln!(
        "lax {}: {} steps in {:.2}s, wrote {}",
        lax_estimator_name(spec.estimator),
        spec.steps,
        record.elapsed_secs,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_lemmas(args: LemmasArgs) -> Result<ExitCode> {
    if args.count == 0 {
        return Ok(usage_error("--count must be at least 1"));
    }
    let report = run_lemmas(args.seed, args.count)?;
    print!("{}", report.text);
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(format!("lemmas_s{}.txt", args.seed));
    std::fs::write(&path, &report.text)
        .with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    if report.all_passed {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(anyhow::anyhow!("lemma checks failed"))
    }
}

fn cmd_plot(args: PlotArgs) -> Result<ExitCode> {
    let mut series: Vec<Series> = Vec::new();
    for input in &args.inputs {
        let text = std::fs::read_to_string(input)
            .with_context(|| format!("reading {}", input.display()))?;
        let parsed = parse_csv(&text)?;
        let stem = Path::new(input)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.display().to_string());
        let points: Vec<(f64, f64)> = parsed
            .rows
            .iter()
            .filter(|(_, metric, ..)| *metric == args.metric)
            .map(|(step, _, value, ..)| (*step as f64, *value))
            .collect();
        if points.is_empty() {
            return Ok(usage_error(format!(
                "{}: no rows with metric `{}`",
                input.display(),
                args.metric
            )));
        }
        series.push(Series {
            label: stem,
            points,
        });
    }
    let title = args
        .title
        .unwrap_or_else(|| format!("{} vs step", args.metric));
    let svg = render_line_chart(&series, &title, "step", &args.metric, args.log_y)?;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&args.out, svg)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}
