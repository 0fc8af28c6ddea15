use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sntd::admm::{solve, AdmmConfig};
use sntd::bounds::{BoundReport, MinimaxConstants, ProblemSpec};
use sntd::config::{broadcast, parse_list, ConfigMap};
use sntd::io::{load_observations, load_tensor, save_observations, save_tensor};
use sntd::noise::{bernoulli_mask, observe, uniform_mask, NoiseModel};
use sntd::rng::{hash64, tag};
use sntd::sweep::{
    aggregate, aggregate_csv, initial_model, run_sweep, trials_csv, tuning_grid, EntryBound, SolverSettings, SweepSpec,
};
use sntd::synth::{generate_synthetic, SyntheticSpec};
use sntd::tensor::relative_error;
use sntd::TuckerModel;

#[derive(Parser)]
#[command(name = "sntd", version, about = "Sparse nonnegative Tucker decomposition and completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic sparse nonnegative Tucker tensor.
    Generate(GenerateArgs),
    /// Sample entries of a tensor and add noise.
    Observe(ObserveArgs),
    /// Complete a tensor from an observation file.
    Solve(SolveArgs),
    /// Run a relative-error-versus-sampling-ratio experiment.
    Sweep(SweepArgs),
    /// Evaluate the error bounds for a problem description.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Comma-separated dimensions, e.g. `100,100,100`.
    #[arg(long)]
    dims: String,
    #[arg(long)]
    ranks: String,
    /// Nonzero probability of factor entries; one value or one per mode.
    #[arg(long, default_value = "1")]
    sparsity: String,
    /// Factor amplitude bounds; one value or one per mode.
    #[arg(long, default_value = "1")]
    scale: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the model (core, factors, bounds) as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct ObserveArgs {
    #[arg(long)]
    input: PathBuf,
    /// `gaussian`, `laplace` or `poisson`.
    #[arg(long)]
    noise: String,
    /// σ² for Gaussian, τ for Laplace, the rate floor ϱ for Poisson.
    #[arg(long)]
    param: f64,
    /// Sampling ratio; each entry is observed with this probability.
    #[arg(long)]
    ratio: f64,
    /// Observe exactly `round(ratio·N)` entries instead.
    #[arg(long)]
    exact_m: bool,
    /// Constant added to the tensor before sampling. Defaults to ϱ for
    /// Poisson and 0 otherwise.
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    obs: PathBuf,
    #[arg(long)]
    ranks: String,
    /// Sparsity weights; one value or one per mode.
    #[arg(long, default_value = "1")]
    lambda: String,
    #[arg(long, default_value_t = 1000.0)]
    beta: f64,
    #[arg(long, default_value = "1000")]
    rho: String,
    #[arg(long, default_value = "1000")]
    alpha: String,
    /// Entry bound: a number or `auto` (twice the largest observation).
    /// Defaults to the model's bound with `--model`, `auto` otherwise.
    #[arg(long)]
    c: Option<String>,
    /// Factor amplitude bounds; defaults to the model's, or 1.
    #[arg(long)]
    a: Option<String>,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Ground-truth model JSON from `generate --model-out`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Ground-truth tensor; reports the relative error and enables `--tune`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Pick λ, β and ρ = α from the tuning grid by error against `--truth`.
    #[arg(long)]
    tune: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration diagnostics CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the fitted model as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-ratio mean and standard deviation.
    #[arg(long)]
    aggregate: Option<PathBuf>,
    /// Overrides `tune` in the spec.
    #[arg(long)]
    tune: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Print CSV instead of aligned text.
    #[arg(long)]
    csv: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Observe(a) => observe_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Bounds(a) => bounds_cmd(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn list<T: std::str::FromStr>(flag: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    parse_list(v).map_err(|e| anyhow::anyhow!("--{flag}: {e}"))
}

fn per_mode<T: std::str::FromStr + Clone>(flag: &'static str, v: &str, d: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    Ok(broadcast(flag, list(flag, v)?, d)?)
}

fn write_json(path: &Path, model: &TuckerModel) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(model)?).with_context(|| format!("writing {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let dims: Vec<usize> = list("dims", &a.dims)?;
    let d = dims.len();
    let spec = SyntheticSpec {
        ranks: list("ranks", &a.ranks)?,
        sparsity: per_mode("sparsity", &a.sparsity, d)?,
        scale: per_mode("scale", &a.scale, d)?,
        seed: a.seed,
        dims,
    };
    let (x, model) = generate_synthetic(&spec)?;
    save_tensor(&a.out, &x).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.model_out {
        write_json(p, &model)?;
    }
    let nnz: Vec<String> = model.factors.iter().map(|f| f.count_nonzero().to_string()).collect();
    eprintln!(
        "generated {:?} tensor, c = {:.6e}, factor nonzeros [{}]",
        x.dims(),
        model.entry_bound,
        nnz.join(", ")
    );
    Ok(())
}

fn observe_cmd(a: ObserveArgs) -> Result<()> {
    let model = NoiseModel::from_name(&a.noise, a.param)?;
    let mut x = load_tensor(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let shift = a.shift.unwrap_or(if model.is_poisson() { a.param } else { 0.0 });
    if !(shift >= 0.0 && shift.is_finite()) {
        bail!("--shift must be finite and nonnegative");
    }
    if shift > 0.0 {
        x = x.map(|v| v + shift);
    }
    if !(a.ratio > 0.0 && a.ratio <= 1.0) {
        bail!("--ratio must lie in (0, 1]");
    }
    let mask_seed = hash64(a.seed, &[tag::MASK]);
    let omega = if a.exact_m {
        let m = (a.ratio * x.len() as f64).round().max(1.0) as usize;
        uniform_mask(x.shape(), m, mask_seed)?
    } else {
        bernoulli_mask(x.shape(), a.ratio, mask_seed)?
    };
    let obs = observe(&x, &omega, model, hash64(a.seed, &[tag::NOISE]))?;
    save_observations(&a.out, &obs).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("observed {} of {} entries", obs.len(), x.len());
    Ok(())
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let obs = load_observations(&a.obs).with_context(|| format!("reading {}", a.obs.display()))?;
    let ranks: Vec<usize> = list("ranks", &a.ranks)?;
    let d = ranks.len();
    let truth_model: Option<TuckerModel> = match &a.model {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let m: TuckerModel = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            m.validate()?;
            Some(m)
        }
        None => None,
    };
    let truth = match &a.truth {
        Some(p) => Some(load_tensor(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut settings = SolverSettings::new(ranks);
    settings.lambda = per_mode("lambda", &a.lambda, d)?;
    settings.beta = a.beta;
    settings.rho = per_mode("rho", &a.rho, d)?;
    settings.alpha = per_mode("alpha", &a.alpha, d)?;
    settings.max_iters = a.max_iters;
    settings.tol = a.tol;
    settings.c = match (&a.c, &truth_model) {
        (Some(v), _) => v.parse::<EntryBound>().map_err(|e| anyhow::anyhow!("--c: {e}"))?,
        (None, Some(_)) => EntryBound::Truth,
        (None, None) => EntryBound::Auto,
    };
    if let Some(v) = &a.a {
        settings.amplitude = Some(per_mode("a", v, d)?);
    }
    let config = settings.admm_config(
        &obs,
        truth_model.as_ref().map(|m| m.entry_bound),
        truth_model.as_ref().map(|m| m.amplitude_bounds.as_slice()),
    )?;

    let candidates = if a.tune {
        if truth.is_none() {
            bail!("--tune needs --truth to score the grid");
        }
        tuning_grid(&config)
    } else {
        vec![config]
    };
    let init = initial_model(&obs, &candidates[0])?;
    let mut best: Option<(f64, AdmmConfig, sntd::admm::SolveOutput)> = None;
    for cfg in candidates {
        let out = solve(&obs, &cfg, &init)?;
        let score = match &truth {
            Some(t) => relative_error(&out.xhat, t)?,
            None => f64::NAN,
        };
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, cfg, out));
        }
    }
    let (score, cfg, out) = best.expect("at least one configuration");

    save_tensor(&a.out, &out.xhat).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.report {
        fs::write(p, out.report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.model_out {
        write_json(p, &out.model)?;
    }
    let last = out.report.last().map_or(f64::NAN, |r| r.rel_change);
    eprint!(
        "{} iterations, final relative change {last:.3e}, {:.2} s",
        out.report.iterations(),
        out.report.wall_time.as_secs_f64()
    );
    if truth.is_some() {
        eprint!(", relative error {score:.6e}");
    }
    if a.tune {
        eprint!(" (lambda {}, beta {}, rho = alpha {})", cfg.lambda[0], cfg.beta1, cfg.rho[0]);
    }
    eprintln!();
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let mut spec = SweepSpec::from_config(&text).with_context(|| format!("in {}", a.spec.display()))?;
    if let sntd::sweep::Source::Tensor(p) = &mut spec.source {
        // relative tensor paths resolve against the spec file's directory
        if p.is_relative() {
            if let Some(dir) = a.spec.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    spec.tune |= a.tune;
    let results = run_sweep(&spec)?;
    fs::write(&a.out, trials_csv(&results)).with_context(|| format!("writing {}", a.out.display()))?;
    let summary = aggregate(&results);
    if let Some(p) = &a.aggregate {
        fs::write(p, aggregate_csv(&summary)).with_context(|| format!("writing {}", p.display()))?;
    }
    for s in &summary {
        eprintln!("ratio {}: mean {:.6e}, std {:.6e}", s.ratio, s.mean_rel_error, s.std_rel_error);
    }
    Ok(())
}

const BOUNDS_KEYS: &[&str] = &[
    "dims", "ranks", "a", "c", "m", "noise", "param", "sparsity", "mu", "alpha_tilde", "gamma_m",
];

fn bounds_cmd(a: BoundsArgs) -> Result<()> {
    let text = fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let cfg = ConfigMap::parse(&text, BOUNDS_KEYS)?;
    let dims: Vec<usize> = cfg.require_list("dims")?;
    let d = dims.len();
    let spec = ProblemSpec {
        ranks: broadcast("ranks", cfg.require_list("ranks")?, d)?,
        amplitude_bounds: broadcast("a", cfg.get_list("a")?.unwrap_or(vec![1.0]), d)?,
        c: cfg.require("c")?,
        m: cfg.require("m")?,
        noise: NoiseModel::from_name(&cfg.require::<String>("noise")?, cfg.require("param")?)?,
        sparsity: broadcast("sparsity", cfg.require_list("sparsity")?, d)?,
        dims,
    };
    let minimax = match (cfg.get("mu")?, cfg.get("alpha_tilde")?, cfg.get("gamma_m")?) {
        (Some(mu), Some(alpha_tilde), Some(gamma_m)) => Some(MinimaxConstants { mu, alpha_tilde, gamma_m }),
        (None, None, None) => None,
        _ => bail!("the minimax bound needs all of mu, alpha_tilde and gamma_m"),
    };
    let report = BoundReport::evaluate(&spec, minimax)?;
    print!("{}", if a.csv { report.to_csv() } else { report.to_text() });
    Ok(())
}
