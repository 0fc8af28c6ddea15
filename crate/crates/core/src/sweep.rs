//! Relative-error-versus-sampling-ratio experiments.
//!
//! A sweep fixes one ground truth, then for every `(ratio, trial)` pair draws
//! a fresh mask and fresh noise from seeds derived from the base seed and the
//! pair's indices, initializes with ST-HOSVD on the zero-filled observations
//! and runs the chosen method. Trials share nothing, so results do not depend
//! on which other trials ran or in what order.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::admm::{format_exp12, solve, AdmmConfig, DEFAULT_POISSON_FLOOR};
use crate::config::{broadcast, ConfigMap};
use crate::error::{Error, Result};
use crate::hosvd::{st_hosvd, RankVector};
use crate::io::load_tensor;
use crate::noise::{bernoulli_mask, observe, uniform_mask, NoiseModel, ObservationSet};
use crate::prox::Box;
use crate::rng::{hash64, tag};
use crate::synth::{generate_synthetic, SyntheticSpec};
use crate::tensor::{relative_error, DenseTensor, TuckerModel};

/// Where the entry bound `c` handed to the solver comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryBound {
    /// `2‖𝒳*‖_∞` of the ground truth.
    Truth,
    /// `2·max` of the observed values.
    Auto,
    Value(f64),
}

impl std::str::FromStr for EntryBound {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "truth" => Ok(EntryBound::Truth),
            "auto" => Ok(EntryBound::Auto),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|c| *c > 0.0 && c.is_finite())
                .map(EntryBound::Value)
                .ok_or_else(|| format!("expected `auto`, `truth` or a positive number, got `{v}`")),
        }
    }
}

/// `c = 2·max observed value`.
pub fn auto_entry_bound(obs: &ObservationSet) -> Result<f64> {
    let c = 2.0 * obs.max_value();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", "cannot derive c from observations with no positive value"));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// The sparse solver.
    Sntdc,
    /// The same solver with every `λ_i = 0`.
    DenseNtd,
    /// Constant tensor at the observed mean.
    MeanFill,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sntdc" => Ok(Method::Sntdc),
            "dense_ntd" => Ok(Method::DenseNtd),
            "mean_fill" => Ok(Method::MeanFill),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Solver hyperparameters shared by every trial of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub ranks: Vec<usize>,
    pub lambda: Vec<f64>,
    pub beta: f64,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub c: EntryBound,
    /// Amplitude bounds `a_i`; `None` means 1 for every mode, or the ground
    /// truth's bounds when it has them.
    pub amplitude: Option<Vec<f64>>,
}

impl SolverSettings {
    pub fn new(ranks: Vec<usize>) -> Self {
        let d = ranks.len();
        SolverSettings {
            ranks,
            lambda: vec![1.0; d],
            beta: 1000.0,
            rho: vec![1000.0; d],
            alpha: vec![1000.0; d],
            max_iters: 300,
            tol: 1e-4,
            c: EntryBound::Truth,
            amplitude: None,
        }
    }

    /// Solver configuration for one observation set.
    pub fn admm_config(&self, obs: &ObservationSet, truth_c: Option<f64>, truth_a: Option<&[f64]>) -> Result<AdmmConfig> {
        let d = self.ranks.len();
        let c = match self.c {
            EntryBound::Value(c) => c,
            EntryBound::Truth => match truth_c {
                Some(c) => c,
                None => auto_entry_bound(obs)?,
            },
            EntryBound::Auto => auto_entry_bound(obs)?,
        };
        let a = match (&self.amplitude, truth_a) {
            (Some(a), _) => a.clone(),
            (None, Some(a)) => a.to_vec(),
            (None, None) => vec![1.0; d],
        };
        let poisson_floor = match obs.model() {
            NoiseModel::Poisson { floor } if floor > 0.0 => floor,
            _ => DEFAULT_POISSON_FLOOR,
        };
        let config = AdmmConfig {
            lambda: self.lambda.clone(),
            beta1: self.beta,
            beta2: self.beta,
            beta3: self.beta,
            rho: self.rho.clone(),
            alpha: self.alpha.clone(),
            max_iters: self.max_iters,
            tol: self.tol,
            c,
            a,
            ranks: self.ranks.clone(),
            poisson_floor,
        };
        config.validate()?;
        Ok(config)
    }
}

/// ST-HOSVD of `P_Ω(𝒴)` carrying the solver's bounds.
pub fn initial_model(obs: &ObservationSet, config: &AdmmConfig) -> Result<TuckerModel> {
    let ranks = RankVector::new(config.ranks.clone(), obs.shape())?;
    let mut init = st_hosvd(&obs.zero_filled(), &ranks)?;
    init.amplitude_bounds = config.a.clone();
    init.entry_bound = config.c;
    Ok(init)
}

/// Constant tensor at the observed mean, clamped to `[0, c]`.
pub fn mean_fill(obs: &ObservationSet, c: f64) -> Result<DenseTensor> {
    let b = Box::new(0.0, c)?;
    let v = if obs.is_empty() { 0.0 } else { b.clamp(obs.mean_value()) };
    Ok(DenseTensor::filled(obs.shape().clone(), v))
}

/// Both reference estimators for one observation set.
#[derive(Debug, Clone)]
pub struct Baselines {
    pub mean_fill: DenseTensor,
    pub dense_ntd: DenseTensor,
}

/// `mean_fill` and the solver with every `λ_i = 0`, from the same start.
pub fn baselines(obs: &ObservationSet, config: &AdmmConfig) -> Result<Baselines> {
    let dense = AdmmConfig {
        lambda: vec![0.0; config.order()],
        ..config.clone()
    };
    let init = initial_model(obs, &dense)?;
    Ok(Baselines {
        mean_fill: mean_fill(obs, config.c)?,
        dense_ntd: solve(obs, &dense, &init)?.xhat,
    })
}

/// Grid searched by `--tune`: `λ`, `β`, and `ρ = α`.
pub const TUNE_LAMBDA: [f64; 3] = [5.0, 10.0, 50.0];
pub const TUNE_BETA: [f64; 7] = [50.0, 70.0, 100.0, 250.0, 350.0, 450.0, 550.0];
pub const TUNE_RHO: [f64; 3] = [0.1, 0.01, 0.001];

/// Ground-truth source of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic(SyntheticSpec),
    Tensor(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub source: Source,
    pub noise: NoiseModel,
    /// Constant added to the ground truth before sampling (keeps Poisson
    /// rates away from zero).
    pub shift: f64,
    pub ratios: Vec<f64>,
    pub trials: usize,
    /// Observe exactly `round(ratio·N)` entries instead of Bernoulli(ratio).
    pub exact_m: bool,
    pub seed: u64,
    pub solver: SolverSettings,
    pub method: Method,
    /// Pick the best grid point per trial by relative error.
    pub tune: bool,
    /// Record wall-clock seconds; off writes 0 so outputs are reproducible
    /// byte for byte.
    pub timing: bool,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

/// Keys accepted in sweep config files.
pub const SWEEP_KEYS: &[&str] = &[
    "input", "dims", "ranks", "sparsity", "scale", "truth_seed", "noise", "param", "shift", "ratios", "trials",
    "exact_m", "seed", "lambda", "beta", "rho", "alpha", "max_iters", "tol", "c", "a", "method", "tune", "timing",
    "workers",
];

impl SweepSpec {
    /// Reads a sweep from a `key = value` config.
    ///
    /// Either `input` (a tensor file) or `dims` (a synthetic truth built from
    /// `dims`, `ranks`, `sparsity`, `scale`, `truth_seed`) selects the ground
    /// truth. `ranks` is also the solver's Tucker rank.
    pub fn from_config(text: &str) -> Result<Self> {
        let cfg = ConfigMap::parse(text, SWEEP_KEYS)?;
        let ranks: Vec<usize> = cfg.require_list("ranks")?;
        let d = ranks.len();
        let source = match (cfg.raw("input"), cfg.contains("dims")) {
            (Some(_), true) => return Err(Error::param("input", "give either `input` or `dims`, not both")),
            (Some(p), false) => Source::Tensor(PathBuf::from(p)),
            (None, true) => Source::Synthetic(SyntheticSpec {
                dims: cfg.require_list("dims")?,
                ranks: ranks.clone(),
                sparsity: broadcast("sparsity", cfg.get_list("sparsity")?.unwrap_or(vec![1.0]), d)?,
                scale: broadcast("scale", cfg.get_list("scale")?.unwrap_or(vec![1.0]), d)?,
                seed: cfg.get("truth_seed")?.unwrap_or(0),
            }),
            (None, false) => return Err(Error::param("input", "one of `input` or `dims` is required")),
        };
        let noise = NoiseModel::from_name(&cfg.require::<String>("noise")?, cfg.require("param")?)?;
        let default_shift = match noise {
            NoiseModel::Poisson { floor } => floor,
            _ => 0.0,
        };
        let mut solver = SolverSettings::new(ranks);
        if let Some(v) = cfg.get_list("lambda")? {
            solver.lambda = broadcast("lambda", v, d)?;
        }
        if let Some(v) = cfg.get("beta")? {
            solver.beta = v;
        }
        if let Some(v) = cfg.get_list("rho")? {
            solver.rho = broadcast("rho", v, d)?;
        }
        if let Some(v) = cfg.get_list("alpha")? {
            solver.alpha = broadcast("alpha", v, d)?;
        }
        if let Some(v) = cfg.get("max_iters")? {
            solver.max_iters = v;
        }
        if let Some(v) = cfg.get("tol")? {
            solver.tol = v;
        }
        if let Some(v) = cfg.get("c")? {
            solver.c = v;
        }
        if let Some(v) = cfg.get_list("a")? {
            solver.amplitude = Some(broadcast("a", v, d)?);
        }
        let spec = SweepSpec {
            source,
            noise,
            shift: cfg.get("shift")?.unwrap_or(default_shift),
            ratios: cfg.require_list("ratios")?,
            trials: cfg.get("trials")?.unwrap_or(10),
            exact_m: cfg.get("exact_m")?.unwrap_or(false),
            seed: cfg.get("seed")?.unwrap_or(0),
            solver,
            method: cfg.get("method")?.unwrap_or(Method::Sntdc),
            tune: cfg.get("tune")?.unwrap_or(false),
            timing: cfg.get("timing")?.unwrap_or(true),
            workers: cfg.get("workers")?.unwrap_or(0),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || !self.ratios.iter().all(|&r| r > 0.0 && r <= 1.0) {
            return Err(Error::param("ratios", "need at least one ratio, each in (0, 1]"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::param("shift", "must be finite and nonnegative"));
        }
        if let Source::Synthetic(s) = &self.source {
            s.validate()?;
        }
        self.noise.validate()
    }

    /// The ground truth (shifted) and its amplitude bounds, if known.
    pub fn ground_truth(&self) -> Result<(DenseTensor, Option<Vec<f64>>)> {
        let (x, a) = match &self.source {
            Source::Synthetic(s) => {
                let (x, model) = generate_synthetic(s)?;
                (x, Some(model.amplitude_bounds))
            }
            Source::Tensor(p) => (load_tensor(p)?, None),
        };
        let shift = self.shift;
        Ok((if shift > 0.0 { x.map(|v| v + shift) } else { x }, a))
    }
}

/// Outcome of one `(ratio, trial)` run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub ratio: f64,
    pub trial: usize,
    pub rel_error: f64,
    /// `‖x̂ − x*‖_F² / Π n_i`.
    pub mse: f64,
    /// Number of observed entries `m`.
    pub observed: usize,
    pub iters: usize,
    pub seconds: f64,
}

/// Runs one trial against a fixed ground truth.
pub fn run_trial(
    spec: &SweepSpec,
    truth: &DenseTensor,
    truth_a: Option<&[f64]>,
    ratio_index: usize,
    trial: usize,
) -> Result<TrialResult> {
    let ratio = spec.ratios[ratio_index];
    let seed = trial_seed(spec.seed, ratio_index, trial);
    let start = Instant::now();
    let (rel_error, mse, iters, observed) = (|| {
        let shape = truth.shape();
        let omega = if spec.exact_m {
            let m = (ratio * shape.total() as f64).round() as usize;
            uniform_mask(shape, m.max(1), hash64(seed, &[tag::MASK]))?
        } else {
            bernoulli_mask(shape, ratio, hash64(seed, &[tag::MASK]))?
        };
        let obs = observe(truth, &omega, spec.noise, hash64(seed, &[tag::NOISE]))?;
        let truth_c = 2.0 * truth.infinity_norm();
        let base = spec.solver.admm_config(&obs, Some(truth_c), truth_a)?;
        let score = |xhat: &DenseTensor| -> Result<(f64, f64)> {
            let rel = relative_error(xhat, truth)?;
            let mse = xhat.zip_map(truth, |a, b| (a - b) * (a - b))?.as_slice().iter().sum::<f64>()
                / truth.len() as f64;
            Ok((rel, mse))
        };
        match spec.method {
            Method::MeanFill => {
                let (rel, mse) = score(&mean_fill(&obs, base.c)?)?;
                Ok((rel, mse, 0, obs.len()))
            }
            Method::Sntdc | Method::DenseNtd => {
                let base = if spec.method == Method::DenseNtd {
                    AdmmConfig {
                        lambda: vec![0.0; base.order()],
                        ..base
                    }
                } else {
                    base
                };
                let init = initial_model(&obs, &base)?;
                let candidates = if spec.tune { tuning_grid(&base) } else { vec![base] };
                let mut best: Option<(f64, f64, usize)> = None;
                for config in &candidates {
                    let out = solve(&obs, config, &init)?;
                    let (rel, mse) = score(&out.xhat)?;
                    if best.is_none_or(|b| rel < b.0) {
                        best = Some((rel, mse, out.report.iterations()));
                    }
                }
                let (rel, mse, iters) = best.expect("at least one candidate");
                Ok((rel, mse, iters, obs.len()))
            }
        }
    })()
    .map_err(|e: Error| Error::Trial {
        ratio,
        trial,
        seed,
        source: std::boxed::Box::new(e),
    })?;
    Ok(TrialResult {
        ratio,
        trial,
        rel_error,
        mse,
        observed,
        iters,
        seconds: if spec.timing { start.elapsed().as_secs_f64() } else { 0.0 },
    })
}

/// `hash64(base, ratio index, trial index)`; purpose tags are mixed in by
/// the consumers.
pub fn trial_seed(base: u64, ratio_index: usize, trial: usize) -> u64 {
    hash64(base, &[ratio_index as u64, trial as u64])
}

/// Every `(λ, β, ρ = α)` combination of the tuning grid on top of `base`.
/// A base with all `λ_i = 0` keeps `λ = 0`.
pub fn tuning_grid(base: &AdmmConfig) -> Vec<AdmmConfig> {
    let d = base.order();
    let dense = base.lambda.iter().all(|&l| l == 0.0);
    let lambdas: &[f64] = if dense { &[0.0] } else { &TUNE_LAMBDA };
    let mut out = Vec::new();
    for &lambda in lambdas {
        for &beta in &TUNE_BETA {
            for &rho in &TUNE_RHO {
                out.push(AdmmConfig {
                    lambda: vec![lambda; d],
                    beta1: beta,
                    beta2: beta,
                    beta3: beta,
                    rho: vec![rho; d],
                    alpha: vec![rho; d],
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// Runs every `(ratio, trial)` pair, in parallel when `workers != 1`.
/// Results come back ordered by ratio, then trial.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    let (truth, truth_a) = spec.ground_truth()?;
    let jobs: Vec<(usize, usize)> = (0..spec.ratios.len())
        .flat_map(|r| (0..spec.trials).map(move |t| (r, t)))
        .collect();
    let workers = match spec.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len());
    let slots: Mutex<Vec<Option<Result<TrialResult>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(r, t)) = jobs.get(k) else { break };
                let res = run_trial(spec, &truth, truth_a.as_deref(), r, t);
                slots.lock().expect("result lock")[k] = Some(res);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Mean and sample standard deviation of the relative error per ratio, in
/// first-seen ratio order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSummary {
    pub ratio: f64,
    pub mean_rel_error: f64,
    pub std_rel_error: f64,
}

pub fn aggregate(results: &[TrialResult]) -> Vec<RatioSummary> {
    let mut ratios: Vec<f64> = Vec::new();
    for r in results {
        if !ratios.contains(&r.ratio) {
            ratios.push(r.ratio);
        }
    }
    ratios
        .into_iter()
        .map(|ratio| {
            let v: Vec<f64> = results.iter().filter(|r| r.ratio == ratio).map(|r| r.rel_error).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            RatioSummary {
                ratio,
                mean_rel_error: mean,
                std_rel_error: var.sqrt(),
            }
        })
        .collect()
}

/// `ratio,trial,rel_error,iters,seconds`.
pub fn trials_csv(results: &[TrialResult]) -> String {
    let mut out = String::from("ratio,trial,rel_error,iters,seconds\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.ratio,
            r.trial,
            format_exp12(r.rel_error),
            r.iters,
            r.seconds
        );
    }
    out
}

/// `ratio,mean_rel_error,std_rel_error`.
pub fn aggregate_csv(summary: &[RatioSummary]) -> String {
    let mut out = String::from("ratio,mean_rel_error,std_rel_error\n");
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{}",
            s.ratio,
            format_exp12(s.mean_rel_error),
            format_exp12(s.std_rel_error)
        );
    }
    out
}
