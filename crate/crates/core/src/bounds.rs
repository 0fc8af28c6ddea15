//! Closed-form quantities from the error analysis: discretization levels,
//! the exponent `β`, the theoretical `λ`, degrees of freedom, the per-noise
//! upper bounds on the normalized mean squared error, and the minimax lower
//! bound.
//!
//! Every constant is transcribed as printed; nothing is tightened.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::noise::{gamma_for, NoiseModel};
use crate::tensor::{DenseTensor, Matrix, TuckerModel};

/// Problem size and model class for the bound evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Factor amplitude bounds `a_i`.
    pub amplitude_bounds: Vec<f64>,
    /// Entry bound `c`.
    pub c: f64,
    /// Number of observed entries.
    pub m: usize,
    pub noise: NoiseModel,
    /// Nonzero counts `s_i` (or `‖A_i‖₀`) of the factors.
    pub sparsity: Vec<usize>,
}

impl ProblemSpec {
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// `n_m = max n_i`.
    pub fn n_max(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> f64 {
        self.dims.iter().map(|&n| n as f64).product()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.order();
        if d < 3 {
            return Err(Error::param("dims", format!("order must be at least 3, got {d}")));
        }
        if self.ranks.len() != d || self.amplitude_bounds.len() != d || self.sparsity.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{d} dims, {} ranks, {} amplitude bounds, {} sparsity counts",
                self.ranks.len(),
                self.amplitude_bounds.len(),
                self.sparsity.len()
            )));
        }
        if let Some(&n) = self.dims.iter().find(|&&n| n < 2) {
            return Err(Error::param("dims", format!("every dimension must be at least 2, got {n}")));
        }
        for (mode, (&r, &n)) in self.ranks.iter().zip(&self.dims).enumerate() {
            if r == 0 || r > n {
                return Err(Error::RankOutOfRange { mode, rank: r, max: n });
            }
        }
        if !self.amplitude_bounds.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return Err(Error::param("a", "amplitude bounds must be positive"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param("c", format!("must be positive, got {}", self.c)));
        }
        let lo = 2f64.powi(d as i32);
        if (self.m as f64) < lo || (self.m as f64) > self.total() {
            return Err(Error::param("m", format!("must lie in [2^d, Π n_i] = [{lo}, {}]", self.total())));
        }
        self.noise.validate()
    }
}

/// `β = 1 + log((2^{d+1}−1)·√d·Πr_i·Πa_i / (c·√n_m) + 1) / log n_m`.
pub fn beta_value(spec: &ProblemSpec) -> Result<f64> {
    spec.validate()?;
    let d = spec.order() as f64;
    let nm = spec.n_max() as f64;
    let r: f64 = spec.ranks.iter().map(|&r| r as f64).product();
    let a: f64 = spec.amplitude_bounds.iter().product();
    let frac = (2f64.powf(d + 1.0) - 1.0) * d.sqrt() * r * a / (spec.c * nm.sqrt());
    Ok(1.0 + frac.ln_1p() / nm.ln())
}

/// `τ = 2^⌈log₂(n_m^β)⌉`, the number of discretization levels.
pub fn tau_levels(n_m: usize, beta: f64) -> Result<u64> {
    if n_m < 2 {
        return Err(Error::param("n_m", format!("must be at least 2, got {n_m}")));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be at least 1, got {beta}")));
    }
    let e = (beta * (n_m as f64).log2()).ceil();
    if e >= 64.0 {
        return Err(Error::param("beta", format!("2^{e} levels overflow u64")));
    }
    Ok(1u64 << e as u32)
}

/// `λ = 4(β+2)(1 + 2γ/3)·log n_m`.
pub fn lambda_theoretical(beta: f64, gamma: f64, n_m: usize) -> Result<f64> {
    if !(beta > 0.0 && gamma >= 0.0 && n_m >= 2) {
        return Err(Error::param("lambda", "needs beta > 0, gamma ≥ 0, n_m ≥ 2"));
    }
    Ok(4.0 * (beta + 2.0) * (1.0 + 2.0 * gamma / 3.0) * (n_m as f64).ln())
}

/// `Π r_i + Σ s_i`.
pub fn degrees_of_freedom(spec: &ProblemSpec) -> usize {
    spec.ranks.iter().product::<usize>() + spec.sparsity.iter().sum::<usize>()
}

/// Upper bound on `E‖𝒳^λ − 𝒳*‖_F² / Π n_i` for the spec's noise model.
pub fn upper_bound(spec: &ProblemSpec) -> Result<f64> {
    let beta = beta_value(spec)?;
    let m = spec.m as f64;
    let c = spec.c;
    let log_m = m.ln();
    let log_nm = (spec.n_max() as f64).ln();
    let dof_ratio = degrees_of_freedom(spec) as f64 / m;
    Ok(match spec.noise {
        NoiseModel::Gaussian { sigma2 } => {
            22.0 * c * c * log_m / m + 16.0 * (beta + 2.0) * (2.0 * c * c + 3.0 * sigma2) * dof_ratio * log_nm
        }
        NoiseModel::Laplace { tau_noise: t } => {
            let w = (2.0 * t + c).powi(2);
            11.0 * c * c * w * log_m / (2.0 * t * t * m)
                + 12.0 * (1.0 + 2.0 * c * c / (3.0 * t * t)) * w * (beta + 2.0) * log_nm * dof_ratio
        }
        NoiseModel::Poisson { floor } => {
            if floor <= 0.0 {
                return Err(Error::param("floor", "the Poisson bound needs a positive rate floor"));
            }
            44.0 * c.powi(3) * log_m / (floor * m)
                + 48.0 * c * (1.0 + 4.0 * c * c / (3.0 * floor)) * (beta + 2.0) * dof_ratio * log_nm
        }
    })
}

/// `Δ(s, n) = min{1, s/n}`.
pub fn delta(s: usize, n: usize) -> f64 {
    (s as f64 / n as f64).min(1.0)
}

/// Constants of the minimax bound that the analysis only shows to exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxConstants {
    /// `μ` with `K(P_x, P_y) ≤ (x−y)²/(2μ)`.
    pub mu: f64,
    /// `α̃ ∈ (0, 1)`.
    pub alpha_tilde: f64,
    pub gamma_m: f64,
}

/// `α̃/(2^{d+5}(d+1)) · min{Π Δ_i a_i², γ_m² μ² (Πr_i + Σs_i)/m}`.
pub fn minimax_lower_bound(spec: &ProblemSpec, k: MinimaxConstants) -> Result<f64> {
    spec.validate()?;
    if !(k.mu > 0.0) {
        return Err(Error::param("mu", "must be positive"));
    }
    if !(k.alpha_tilde > 0.0 && k.alpha_tilde < 1.0) {
        return Err(Error::param("alpha_tilde", "must lie in (0, 1)"));
    }
    if !(k.gamma_m > 0.0) {
        return Err(Error::param("gamma_m", "must be positive"));
    }
    let d = spec.order() as i32;
    let first: f64 = spec
        .sparsity
        .iter()
        .zip(&spec.dims)
        .zip(&spec.amplitude_bounds)
        .map(|((&s, &n), &a)| delta(s, n) * a * a)
        .product();
    let second = k.gamma_m.powi(2) * k.mu.powi(2) * degrees_of_freedom(spec) as f64 / spec.m as f64;
    Ok(k.alpha_tilde / (2f64.powi(d + 5) * (d + 1) as f64) * first.min(second))
}

/// Right-hand side of the surrogate gap bound
/// `‖𝒳_s − 𝒳‖_∞ ≤ (2^{d+1}−1)/(τ−1) · Π a_i r_i`.
pub fn surrogate_gap_bound(model: &TuckerModel, tau: u64) -> f64 {
    let d = model.order() as i32;
    let prod: f64 = model
        .amplitude_bounds
        .iter()
        .zip(model.ranks())
        .map(|(&a, &r)| a * r as f64)
        .product();
    (2f64.powi(d + 1) - 1.0) / (tau as f64 - 1.0) * prod
}

/// Rounds the core to the nearest of `τ` uniform levels in `[0, 1]` and each
/// factor to the nearest of `τ` levels in `[0, a_i]`. Zeros stay zero.
pub fn discretize_surrogate(model: &TuckerModel, tau: u64) -> Result<TuckerModel> {
    if tau < 2 {
        return Err(Error::param("tau", format!("need at least 2 levels, got {tau}")));
    }
    model.validate()?;
    let tol = 1e-12;
    let in_box = |v: &[f64], hi: f64| v.iter().all(|&x| x >= 0.0 && x <= hi + tol);
    if !in_box(model.core.as_slice(), 1.0)
        || !model
            .factors
            .iter()
            .zip(&model.amplitude_bounds)
            .all(|(f, &a)| in_box(f.as_slice(), a))
    {
        return Err(Error::Domain("surrogate needs core in [0,1] and factors in [0,a_i]".into()));
    }
    let steps = (tau - 1) as f64;
    let snap = |v: f64, hi: f64| ((v / hi * steps).round() / steps * hi).min(hi);
    let core = DenseTensor::from_vec(
        model.core.shape().clone(),
        model.core.as_slice().iter().map(|&v| snap(v, 1.0)).collect(),
    )?;
    let factors = model
        .factors
        .iter()
        .zip(&model.amplitude_bounds)
        .map(|(f, &a)| f.map(|v| snap(v, a)))
        .collect::<Vec<Matrix>>();
    Ok(TuckerModel {
        core,
        factors,
        amplitude_bounds: model.amplitude_bounds.clone(),
        entry_bound: model.entry_bound,
    })
}

/// Everything the `bounds` command prints.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub beta: f64,
    pub tau: u64,
    pub gamma: f64,
    pub lambda_theoretical: f64,
    pub dof: usize,
    pub upper_bound: f64,
    pub lower_bound: Option<f64>,
}

impl BoundReport {
    pub fn evaluate(spec: &ProblemSpec, minimax: Option<MinimaxConstants>) -> Result<Self> {
        let beta = beta_value(spec)?;
        let gamma = gamma_for(spec.noise, spec.c)?;
        Ok(BoundReport {
            beta,
            tau: tau_levels(spec.n_max(), beta)?,
            gamma,
            lambda_theoretical: lambda_theoretical(beta, gamma, spec.n_max())?,
            dof: degrees_of_freedom(spec),
            upper_bound: upper_bound(spec)?,
            lower_bound: minimax.map(|k| minimax_lower_bound(spec, k)).transpose()?,
        })
    }

    fn rows(&self) -> Vec<(&'static str, String)> {
        let mut rows = vec![
            ("beta", format!("{:.12e}", self.beta)),
            ("tau", self.tau.to_string()),
            ("gamma", format!("{:.12e}", self.gamma)),
            ("lambda_theoretical", format!("{:.12e}", self.lambda_theoretical)),
            ("dof", self.dof.to_string()),
            ("upper_bound", format!("{:.12e}", self.upper_bound)),
        ];
        if let Some(lb) = self.lower_bound {
            rows.push(("lower_bound", format!("{lb:.12e}")));
        }
        rows
    }

    /// `key  value` lines with the values aligned.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }

    /// One header line and one value line.
    pub fn to_csv(&self) -> String {
        let rows = self.rows();
        let keys: Vec<&str> = rows.iter().map(|(k, _)| *k).collect();
        let vals: Vec<&str> = rows.iter().map(|(_, v)| v.as_str()).collect();
        format!("{}\n{}\n", keys.join(","), vals.join(","))
    }
}
