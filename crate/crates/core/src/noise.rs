//! Observation models: sampling, likelihoods, data-proximal maps and the
//! per-entry divergences that drive the error bounds.
//!
//! Negative log-likelihoods drop every term that does not depend on the
//! estimate `x`:
//!
//! | model    | per observed entry        |
//! |----------|---------------------------|
//! | Gaussian | `(y − x)² / (2σ²)`        |
//! | Laplace  | `|y − x| / τ`             |
//! | Poisson  | `x − y·ln x`              |
//!
//! Objective values are therefore only comparable between runs that share
//! the same observations and noise parameters.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::tensor::{DenseTensor, Shape};

/// Entrywise noise model of the observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// `y = x + N(0, σ²)`.
    Gaussian { sigma2: f64 },
    /// `y = x + Laplace(0, τ)`; the scale is called `tau_noise` to keep it
    /// apart from the discretization level count.
    Laplace { tau_noise: f64 },
    /// `y ~ Poisson(x)`; `floor` is the assumed lower bound `ϱ` on the rates.
    Poisson { floor: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                Err(Error::param("sigma2", format!("must be positive, got {sigma2}")))
            }
            NoiseModel::Laplace { tau_noise } if !(tau_noise > 0.0 && tau_noise.is_finite()) => {
                Err(Error::param("tau_noise", format!("must be positive, got {tau_noise}")))
            }
            NoiseModel::Poisson { floor } if !(floor >= 0.0 && floor.is_finite()) => {
                Err(Error::param("floor", format!("must be nonnegative, got {floor}")))
            }
            _ => Ok(()),
        }
    }

    /// Tag used by the OBS1 file format.
    pub fn tag(&self) -> u8 {
        match self {
            NoiseModel::Gaussian { .. } => 0,
            NoiseModel::Laplace { .. } => 1,
            NoiseModel::Poisson { .. } => 2,
        }
    }

    /// The single scalar parameter (σ², τ, or ϱ).
    pub fn parameter(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma2 } => sigma2,
            NoiseModel::Laplace { tau_noise } => tau_noise,
            NoiseModel::Poisson { floor } => floor,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::Laplace { .. } => "laplace",
            NoiseModel::Poisson { .. } => "poisson",
        }
    }

    /// Parses a model name plus its parameter (`gaussian 0.01`, ...).
    pub fn from_name(name: &str, param: f64) -> Result<Self> {
        let m = match name.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" | "normal" => NoiseModel::Gaussian { sigma2: param },
            "laplace" => NoiseModel::Laplace { tau_noise: param },
            "poisson" => NoiseModel::Poisson { floor: param },
            other => return Err(Error::param("noise", format!("unknown model `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self, NoiseModel::Poisson { .. })
    }
}

/// Observed entries `𝒴_Ω` of a tensor together with the noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    shape: Shape,
    indices: Vec<usize>,
    values: Vec<f64>,
    model: NoiseModel,
}

impl ObservationSet {
    pub fn new(shape: Shape, indices: Vec<usize>, values: Vec<f64>, model: NoiseModel) -> Result<Self> {
        model.validate()?;
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("indices", "must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last >= shape.total() {
                return Err(Error::param(
                    "indices",
                    format!("index {last} out of range for {} entries", shape.total()),
                ));
            }
        }
        if model.is_poisson() && values.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(Error::Domain("Poisson observations must be nonnegative integers".into()));
        }
        Ok(ObservationSet {
            shape,
            indices,
            values,
            model,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn model(&self) -> NoiseModel {
        self.model
    }

    /// Number of observations `m = |Ω|`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// `P_Ω(𝒴)`: observed values in place, zeros elsewhere.
    pub fn zero_filled(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(self.shape.clone());
        let data = t.as_mut_slice();
        for (i, y) in self.iter() {
            data[i] = y;
        }
        t
    }

    /// Same sample locations with the noise model replaced.
    pub fn with_model(&self, model: NoiseModel) -> Result<Self> {
        ObservationSet::new(self.shape.clone(), self.indices.clone(), self.values.clone(), model)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_value(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param("p", format!("sampling probability must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Bernoulli sampling: each linear index is kept independently with
/// probability `p`. Each decision is a pure function of `(seed, index)`.
pub fn bernoulli_mask(shape: &Shape, p: f64, seed: u64) -> Result<Vec<usize>> {
    check_probability(p)?;
    Ok((0..shape.total())
        .filter(|&i| rng::entry_uniform(seed, tag::MASK, i) < p)
        .collect())
}

/// Exactly `m` indices drawn uniformly without replacement, sorted.
pub fn uniform_mask(shape: &Shape, m: usize, seed: u64) -> Result<Vec<usize>> {
    let total = shape.total();
    if m == 0 || m > total {
        return Err(Error::param("m", format!("must lie in 1..={total}, got {m}")));
    }
    let mut r = rng::rng_from(rng::hash64(seed, &[tag::MASK]));
    let mut idx = rand::seq::index::sample(&mut r, total, m).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Draws noisy observations of `xstar` on `omega`. Entry `k` uses its own
/// generator derived from `(seed, k)`, so results do not depend on the
/// order in which entries are processed.
pub fn observe(xstar: &DenseTensor, omega: &[usize], model: NoiseModel, seed: u64) -> Result<ObservationSet> {
    model.validate()?;
    let mut indices = omega.to_vec();
    indices.sort_unstable();
    indices.dedup();
    let x = xstar.as_slice();
    if let Some(&last) = indices.last() {
        if last >= x.len() {
            return Err(Error::param("omega", format!("index {last} out of range")));
        }
    }
    let values = indices
        .iter()
        .map(|&i| {
            let mut r = rng::entry_rng(seed, tag::NOISE, i);
            let xi = x[i];
            match model {
                NoiseModel::Gaussian { sigma2 } => {
                    let z: f64 = r.sample(StandardNormal);
                    Ok(xi + sigma2.sqrt() * z)
                }
                NoiseModel::Laplace { tau_noise } => Ok(xi + rng::laplace(&mut r, tau_noise)),
                NoiseModel::Poisson { .. } => {
                    if !(xi > 0.0) {
                        return Err(Error::Domain(format!("Poisson rate {xi} at index {i} is not positive")));
                    }
                    Ok(rng::poisson(&mut r, xi) as f64)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(xstar.shape().clone(), indices, values, model)
}

/// `−log p_x(𝒴_Ω)` with x-independent constants dropped (see module docs).
///
/// For Poisson, an entry with `y = 0` and `x = 0` contributes 0 (the limit);
/// `x < 0`, or `x = 0` with `y > 0`, is a domain error.
pub fn neg_log_likelihood(obs: &ObservationSet, x: &DenseTensor) -> Result<f64> {
    if x.shape() != obs.shape() {
        return Err(Error::DimensionMismatch("estimate and observations differ in shape".into()));
    }
    let xs = x.as_slice();
    match obs.model {
        NoiseModel::Gaussian { sigma2 } => Ok(obs.iter().map(|(i, y)| (y - xs[i]).powi(2)).sum::<f64>() / (2.0 * sigma2)),
        NoiseModel::Laplace { tau_noise } => Ok(obs.iter().map(|(i, y)| (y - xs[i]).abs()).sum::<f64>() / tau_noise),
        NoiseModel::Poisson { .. } => obs.iter().try_fold(0.0, |acc, (i, y)| {
            let xi = xs[i];
            if xi < 0.0 || (xi == 0.0 && y > 0.0) {
                return Err(Error::Domain(format!("Poisson estimate {xi} at index {i} with count {y}")));
            }
            let term = if y == 0.0 { xi } else { xi - y * xi.ln() };
            Ok(acc + term)
        }),
    }
}

/// Scalar data-proximal map: `argmin_x −log p_x(y) + (beta_sum/2)(x − h)²`.
pub fn data_prox_scalar(model: NoiseModel, y: f64, h: f64, beta_sum: f64) -> f64 {
    match model {
        NoiseModel::Gaussian { sigma2 } => {
            let w = sigma2 * beta_sum;
            (y + w * h) / (1.0 + w)
        }
        NoiseModel::Laplace { tau_noise } => {
            let r = h - y;
            y + r.signum() * (r.abs() - 1.0 / (tau_noise * beta_sum)).max(0.0)
        }
        NoiseModel::Poisson { .. } => {
            let t = beta_sum * h - 1.0;
            (t + (t * t + 4.0 * beta_sum * y).sqrt()) / (2.0 * beta_sum)
        }
    }
}

/// Data-proximal step of the `𝒳` update, `Prox_{f/beta_sum}(h)`: the closed
/// form on observed entries, identity elsewhere.
pub fn data_prox(model: NoiseModel, h: &DenseTensor, obs: &ObservationSet, beta_sum: f64) -> Result<DenseTensor> {
    if !(beta_sum > 0.0 && beta_sum.is_finite()) {
        return Err(Error::param("beta_sum", format!("must be positive, got {beta_sum}")));
    }
    if h.shape() != obs.shape() {
        return Err(Error::DimensionMismatch("prox point and observations differ in shape".into()));
    }
    model.validate()?;
    let mut out = h.clone();
    let data = out.as_mut_slice();
    for (i, y) in obs.iter() {
        data[i] = data_prox_scalar(model, y, data[i], beta_sum);
    }
    Ok(out)
}

fn poisson_domain(a: f64, b: f64, strict: bool) -> Result<()> {
    let ok = |v: f64| if strict { v > 0.0 } else { v >= 0.0 };
    if !(ok(a) && ok(b) && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("Poisson rates ({a}, {b}) out of domain")));
    }
    Ok(())
}

/// `K(p_{x_true} ‖ p_x)` for a single entry.
pub fn kl_per_entry(model: NoiseModel, x_true: f64, x: f64) -> Result<f64> {
    model.validate()?;
    let d = x - x_true;
    Ok(match model {
        NoiseModel::Gaussian { sigma2 } => d * d / (2.0 * sigma2),
        NoiseModel::Laplace { tau_noise } => {
            let t = d.abs() / tau_noise;
            // t − 1 + e^{−t}; expm1 keeps small t accurate
            t + (-t).exp_m1()
        }
        NoiseModel::Poisson { .. } => {
            poisson_domain(x_true, x, true)?;
            x - x_true + x_true * (x_true / x).ln()
        }
    })
}

/// `−2 log H(p_{x1}, p_{x2})` for a single entry.
pub fn neg2_log_hellinger_per_entry(model: NoiseModel, x1: f64, x2: f64) -> Result<f64> {
    model.validate()?;
    let d = x1 - x2;
    Ok(match model {
        NoiseModel::Gaussian { sigma2 } => d * d / (4.0 * sigma2),
        NoiseModel::Laplace { tau_noise } => {
            let a = d.abs();
            a / tau_noise - 2.0 * (a / (2.0 * tau_noise)).ln_1p()
        }
        NoiseModel::Poisson { .. } => {
            poisson_domain(x1, x2, false)?;
            (x1.sqrt() - x2.sqrt()).powi(2)
        }
    })
}

/// Bound `γ` on the per-entry KL divergence over the feasible set:
/// `c²/(2σ²)`, `c²/(2τ²)` or `c²/ϱ`.
pub fn gamma_for(model: NoiseModel, c: f64) -> Result<f64> {
    model.validate()?;
    Ok(match model {
        NoiseModel::Gaussian { sigma2 } => c * c / (2.0 * sigma2),
        NoiseModel::Laplace { tau_noise } => c * c / (2.0 * tau_noise * tau_noise),
        NoiseModel::Poisson { floor } => {
            if floor == 0.0 {
                return Err(Error::param("floor", "γ needs a positive Poisson floor"));
            }
            c * c / floor
        }
    })
}
