//! ADMM solver for sparse nonnegative Tucker completion.
//!
//! The estimate `𝒳` is split from its Tucker form and from its box
//! constraint, and each factor is split twice, once for the ℓ0 penalty and
//! once for the amplitude box:
//!
//! ```text
//! min  f(𝒳) + Σ λ_i ‖H_i‖₀ + δ_[0,c](𝒵) + δ_[0,1](ℬ) + Σ δ_[0,a_i](S_i)
//! s.t. 𝒳 = 𝒞 ×_1 A_1 ⋯ ×_d A_d,  𝒳 = 𝒵,  𝒞 = ℬ,  A_i = H_i,  A_i = S_i
//! ```
//!
//! with multipliers `𝒯_1, 𝒯_2, 𝒯_3, M_i, N_i` and penalties
//! `β_1, β_2, β_3, ρ_i, α_i`. One iteration updates, in order: `𝒳`, `𝒞`,
//! `A_1 … A_d` (Gauss–Seidel), `𝒵`, `ℬ`, `H_i` and `S_i`, then the
//! multipliers.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd_right, symmetric_eigen};
use crate::noise::{data_prox, neg_log_likelihood, ObservationSet};
use crate::prox::{hard_threshold_matrix, Box, BoxProject};
use crate::tensor::{multi_mode_product, unfold, DenseTensor, Matrix, Shape, TuckerModel};

/// Floor applied to Poisson estimates when no rate floor is given.
pub const DEFAULT_POISSON_FLOOR: f64 = 1e-8;

/// Solver parameters. Per-factor vectors have one entry per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// ℓ0 weights `λ_i` (0 disables the sparsity penalty for that factor).
    pub lambda: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Penalties `ρ_i` of the `A_i = H_i` splits.
    pub rho: Vec<f64>,
    /// Penalties `α_i` of the `A_i = S_i` splits.
    pub alpha: Vec<f64>,
    pub max_iters: usize,
    /// Stop once `‖𝒳ᵏ⁺¹ − 𝒳ᵏ‖_F / ‖𝒳ᵏ‖_F ≤ tol`.
    pub tol: f64,
    /// Entry bound `c`.
    pub c: f64,
    /// Factor amplitude bounds `a_i`.
    pub a: Vec<f64>,
    pub ranks: Vec<usize>,
    /// Lower end of the `𝒵` box under Poisson noise.
    pub poisson_floor: f64,
}

impl AdmmConfig {
    /// Same `λ`, `β`, `ρ`, `α` for every mode, `a_i = 1`, 300 iterations,
    /// tolerance `1e-4`.
    pub fn uniform(ranks: &[usize], c: f64, lambda: f64, beta: f64, rho: f64, alpha: f64) -> Self {
        let d = ranks.len();
        AdmmConfig {
            lambda: vec![lambda; d],
            beta1: beta,
            beta2: beta,
            beta3: beta,
            rho: vec![rho; d],
            alpha: vec![alpha; d],
            max_iters: 300,
            tol: 1e-4,
            c,
            a: vec![1.0; d],
            ranks: ranks.to_vec(),
            poisson_floor: DEFAULT_POISSON_FLOOR,
        }
    }

    pub fn order(&self) -> usize {
        self.ranks.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.order();
        if d == 0 {
            return Err(Error::param("ranks", "must not be empty"));
        }
        for (name, v) in [("lambda", &self.lambda), ("rho", &self.rho), ("alpha", &self.alpha), ("a", &self.a)] {
            if v.len() != d {
                return Err(Error::param(name, format!("{} entries for {d} modes", v.len())));
            }
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !self.lambda.iter().all(|&l| l >= 0.0 && l.is_finite()) {
            return Err(Error::param("lambda", "entries must be finite and nonnegative"));
        }
        if !(positive(self.beta1) && positive(self.beta2) && positive(self.beta3)) {
            return Err(Error::param("beta", "penalties must be positive"));
        }
        if !self.rho.iter().all(|&r| positive(r)) {
            return Err(Error::param("rho", "entries must be positive"));
        }
        if !self.alpha.iter().all(|&r| positive(r)) {
            return Err(Error::param("alpha", "entries must be positive"));
        }
        if !self.a.iter().all(|&r| positive(r)) {
            return Err(Error::param("a", "amplitude bounds must be positive"));
        }
        if !positive(self.c) {
            return Err(Error::param("c", format!("entry bound must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if !(self.poisson_floor >= 0.0 && self.poisson_floor < self.c) {
            return Err(Error::param("poisson_floor", "must lie in [0, c)"));
        }
        if self.ranks.contains(&0) {
            return Err(Error::param("ranks", "must be positive"));
        }
        Ok(())
    }
}

/// All primal blocks and multipliers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: DenseTensor,
    pub z: DenseTensor,
    pub core: DenseTensor,
    pub b: DenseTensor,
    pub factors: Vec<Matrix>,
    pub h: Vec<Matrix>,
    pub s: Vec<Matrix>,
    pub t1: DenseTensor,
    pub t2: DenseTensor,
    pub t3: DenseTensor,
    pub m: Vec<Matrix>,
    pub n: Vec<Matrix>,
    /// `𝒞 ×_1 A_1 ⋯ ×_d A_d` for the current core and factors.
    pub recon: DenseTensor,
}

impl AdmmState {
    /// Starting point: `𝒳⁰ = 𝒵⁰ = P_Ω(𝒴)`, `ℬ⁰ = 𝒞⁰`, `H_i⁰ = S_i⁰ = A_i⁰`,
    /// multipliers zero.
    pub fn initialize(obs: &ObservationSet, config: &AdmmConfig, init: &TuckerModel) -> Result<Self> {
        config.validate()?;
        check_model_shapes(obs.shape(), config, init)?;
        let y0 = obs.zero_filled();
        let recon = init.reconstruct()?;
        let zeros_x = DenseTensor::zeros(obs.shape().clone());
        let zeros_c = DenseTensor::zeros(init.core.shape().clone());
        let zero_f: Vec<Matrix> = init.factors.iter().map(|f| Matrix::zeros(f.rows(), f.cols())).collect();
        Ok(AdmmState {
            x: y0.clone(),
            z: y0,
            core: init.core.clone(),
            b: init.core.clone(),
            factors: init.factors.clone(),
            h: init.factors.clone(),
            s: init.factors.clone(),
            t1: zeros_x.clone(),
            t2: zeros_x,
            t3: zeros_c,
            m: zero_f.clone(),
            n: zero_f,
            recon,
        })
    }

    /// Box invariants that hold after every full iteration.
    pub fn auxiliaries_feasible(&self, config: &AdmmConfig, z_floor: f64) -> bool {
        let in_box = |v: &[f64], lo: f64, hi: f64| v.iter().all(|&x| x >= lo && x <= hi);
        in_box(self.z.as_slice(), z_floor, config.c)
            && in_box(self.b.as_slice(), 0.0, 1.0)
            && self.s.iter().zip(&config.a).all(|(s, &a)| in_box(s.as_slice(), 0.0, a))
    }
}

fn check_model_shapes(shape: &Shape, config: &AdmmConfig, init: &TuckerModel) -> Result<()> {
    let d = shape.order();
    if config.order() != d || init.order() != d {
        return Err(Error::DimensionMismatch(format!(
            "order {d} observations, {} ranks, order-{} initial model",
            config.order(),
            init.order()
        )));
    }
    if init.core.dims() != config.ranks.as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "initial core {:?} does not match ranks {:?}",
            init.core.dims(),
            config.ranks
        )));
    }
    for (i, f) in init.factors.iter().enumerate() {
        if f.rows() != shape.dims()[i] || f.cols() != config.ranks[i] {
            return Err(Error::DimensionMismatch(format!(
                "initial factor {i} is {}x{}, expected {}x{}",
                f.rows(),
                f.cols(),
                shape.dims()[i],
                config.ranks[i]
            )));
        }
    }
    Ok(())
}

/// Lower end of the `𝒵` box for this noise model.
pub fn z_floor(obs: &ObservationSet, config: &AdmmConfig) -> f64 {
    if obs.model().is_poisson() {
        config.poisson_floor
    } else {
        0.0
    }
}

/// `𝒳` step: data prox at
/// `(β_1·𝒞×A − 𝒯_1 + β_2·𝒵 − 𝒯_2) / (β_1 + β_2)`.
pub fn update_x(state: &AdmmState, obs: &ObservationSet, config: &AdmmConfig) -> Result<DenseTensor> {
    let (b1, b2) = (config.beta1, config.beta2);
    let sum = b1 + b2;
    let mut h = state.recon.clone();
    for (((hv, &t1), &z), &t2) in h
        .as_mut_slice()
        .iter_mut()
        .zip(state.t1.as_slice())
        .zip(state.z.as_slice())
        .zip(state.t2.as_slice())
    {
        *hv = (b1 * *hv - t1 + b2 * z - t2) / sum;
    }
    data_prox(obs.model(), &h, obs, sum)
}

/// `𝒞` step: solves
/// `(β_1 (⊗ A_iᵀA_i) + β_3 I) vec(𝒞) = (⊗A_i)ᵀ vec(β_1𝒳 + 𝒯_1) + vec(β_3ℬ − 𝒯_3)`
/// through the eigendecompositions of the small Gram matrices `A_iᵀA_i`.
pub fn update_core(state: &AdmmState, config: &AdmmConfig) -> Result<DenseTensor> {
    let w = state.x.zip_map(&state.t1, |x, t| config.beta1 * x + t)?;
    let at: Vec<Matrix> = state.factors.iter().map(Matrix::transpose).collect();
    let at_refs: Vec<&Matrix> = at.iter().collect();
    let mut rhs = multi_mode_product(&w, &at_refs, None)?;
    for ((r, &b), &t3) in rhs
        .as_mut_slice()
        .iter_mut()
        .zip(state.b.as_slice())
        .zip(state.t3.as_slice())
    {
        *r += config.beta3 * b - t3;
    }
    solve_kronecker_shifted(&state.factors, &rhs, config.beta1, config.beta3)
}

/// Solves `(scale·(G_d ⊗ ⋯ ⊗ G_1) + shift·I) vec(𝒞) = vec(rhs)` with
/// `G_i = A_iᵀA_i`, using `G_i = V_i Λ_i V_iᵀ`.
pub fn solve_kronecker_shifted(factors: &[Matrix], rhs: &DenseTensor, scale: f64, shift: f64) -> Result<DenseTensor> {
    let eigs = factors
        .iter()
        .map(|a| symmetric_eigen(&a.gram()))
        .collect::<Result<Vec<_>>>()?;
    let vt: Vec<Matrix> = eigs.iter().map(|e| e.vectors.transpose()).collect();
    let vt_refs: Vec<&Matrix> = vt.iter().collect();
    let mut rotated = multi_mode_product(rhs, &vt_refs, None)?;
    let shape = rotated.shape().clone();
    for (off, v) in rotated.as_mut_slice().iter_mut().enumerate() {
        let idx = shape.multi_index(off);
        let lam: f64 = idx
            .iter()
            .zip(&eigs)
            .map(|(&k, e)| e.values[k].max(0.0))
            .product();
        *v /= scale * lam + shift;
    }
    let v_refs: Vec<&Matrix> = eigs.iter().map(|e| &e.vectors).collect();
    multi_mode_product(&rotated, &v_refs, None)
}

/// `A_i` step with the current core and the factors currently held in
/// `state` (already-updated ones for modes `< i`):
///
/// ```text
/// A_i = ((β_1𝒳₍ᵢ₎ + 𝒯_1₍ᵢ₎)R_iᵀ + ρ_iH_i − M_i + α_iS_i − N_i)(β_1R_iR_iᵀ + (ρ_i + α_i)I)⁻¹
/// ```
///
/// where `R_i` is the mode-`i` unfolding of `𝒞 ×_{j≠i} A_j`. This is the
/// exact minimizer of the augmented Lagrangian over `A_i`, which also
/// contains the `A_i = S_i` split; dropping those terms leaves the factor
/// scale unanchored and the iterates drift.
pub fn update_factor(state: &AdmmState, config: &AdmmConfig, i: usize) -> Result<Matrix> {
    let d = state.factors.len();
    if i >= d {
        return Err(Error::ModeOutOfRange { mode: i, order: d });
    }
    let refs: Vec<&Matrix> = state.factors.iter().collect();
    let k = multi_mode_product(&state.core, &refs, Some(i))?;
    let r = unfold(&k, i)?;
    let w = state.x.zip_map(&state.t1, |x, t| config.beta1 * x + t)?;
    let lhs = unfold(&w, i)?.matmul(&r.transpose())?;
    let (rho, alpha) = (config.rho[i], config.alpha[i]);
    let lhs = Matrix::from_fn(lhs.rows(), lhs.cols(), |p, q| {
        lhs[(p, q)] + rho * state.h[i][(p, q)] - state.m[i][(p, q)] + alpha * state.s[i][(p, q)] - state.n[i][(p, q)]
    });
    let mut system = r.outer_gram().scale(config.beta1);
    for j in 0..system.rows() {
        system[(j, j)] += rho + alpha;
    }
    solve_spd_right(&lhs, &system)
}

/// Updated `(𝒵, ℬ, H, S)` from the current `𝒳, 𝒞, A_i` and multipliers.
pub fn update_auxiliaries(
    state: &AdmmState,
    config: &AdmmConfig,
    z_lo: f64,
) -> Result<(DenseTensor, DenseTensor, Vec<Matrix>, Vec<Matrix>)> {
    let z = state
        .x
        .zip_map(&state.t2, |x, t| x + t / config.beta2)?
        .box_project(Box::new(z_lo, config.c)?);
    let b = state
        .core
        .zip_map(&state.t3, |c, t| c + t / config.beta3)?
        .box_project(Box::new(0.0, 1.0)?);
    let mut h = Vec::with_capacity(state.factors.len());
    let mut s = Vec::with_capacity(state.factors.len());
    for (i, a) in state.factors.iter().enumerate() {
        let (rho, alpha) = (config.rho[i], config.alpha[i]);
        let shifted = Matrix::from_fn(a.rows(), a.cols(), |p, q| a[(p, q)] + state.m[i][(p, q)] / rho);
        h.push(hard_threshold_matrix(&shifted, config.lambda[i] / rho)?);
        let shifted = Matrix::from_fn(a.rows(), a.cols(), |p, q| a[(p, q)] + state.n[i][(p, q)] / alpha);
        s.push(shifted.box_project(Box::new(0.0, config.a[i])?));
    }
    Ok((z, b, h, s))
}

/// Dual ascent on every multiplier. `state.recon` must hold the
/// reconstruction of the current core and factors.
pub fn update_multipliers(state: &mut AdmmState, config: &AdmmConfig) {
    ascend(&mut state.t1, config.beta1, state.x.as_slice(), state.recon.as_slice());
    ascend(&mut state.t2, config.beta2, state.x.as_slice(), state.z.as_slice());
    ascend(&mut state.t3, config.beta3, state.core.as_slice(), state.b.as_slice());
    for i in 0..state.factors.len() {
        let a = state.factors[i].as_slice();
        ascend_slice(state.m[i].as_mut_slice(), config.rho[i], a, state.h[i].as_slice());
        ascend_slice(state.n[i].as_mut_slice(), config.alpha[i], a, state.s[i].as_slice());
    }
}

fn ascend(t: &mut DenseTensor, step: f64, lhs: &[f64], rhs: &[f64]) {
    ascend_slice(t.as_mut_slice(), step, lhs, rhs);
}

fn ascend_slice(t: &mut [f64], step: f64, lhs: &[f64], rhs: &[f64]) {
    for ((tv, &l), &r) in t.iter_mut().zip(lhs).zip(rhs) {
        *tv += step * (l - r);
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Negative log-likelihood at `𝒳` plus `Σ λ_i ‖H_i‖₀`.
    pub objective: f64,
    pub rel_change: f64,
    /// `‖𝒳 − 𝒞×A‖_F`.
    pub res_tucker: f64,
    /// `‖𝒳 − 𝒵‖_F`.
    pub res_z: f64,
    /// `‖𝒞 − ℬ‖_F`.
    pub res_b: f64,
    /// `max_i ‖A_i − H_i‖_F`.
    pub res_h: f64,
    /// `max_i ‖A_i − S_i‖_F`.
    pub res_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub history: Vec<IterationRecord>,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.history.last()
    }

    /// CSV with header `iter,objective,rel_change,res_tucker,res_z,res_b,res_h,res_s`,
    /// floats printed like C's `%.12e`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,objective,rel_change,res_tucker,res_z,res_b,res_h,res_s\n");
        for (k, r) in self.history.iter().enumerate() {
            let _ = write!(out, "{}", k + 1);
            for v in [r.objective, r.rel_change, r.res_tucker, r.res_z, r.res_b, r.res_h, r.res_s] {
                out.push(',');
                out.push_str(&format_exp12(v));
            }
            out.push('\n');
        }
        out
    }
}

/// Formats like C's `printf("%.12e")`: signed exponent with at least two digits.
pub fn format_exp12(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent marker");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mant}e{sign}{digits:0>2}")
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Final `𝒳`, clamped to `[floor, c]`.
    pub xhat: DenseTensor,
    /// Feasible model `(ℬ, S_1, …, S_d)`.
    pub model: TuckerModel,
    pub report: SolveReport,
    pub state: AdmmState,
}

/// One full iteration; returns its diagnostics.
pub fn iterate(state: &mut AdmmState, obs: &ObservationSet, config: &AdmmConfig) -> Result<IterationRecord> {
    let z_lo = z_floor(obs, config);
    let x_new = update_x(state, obs, config)?;
    let x_prev = std::mem::replace(&mut state.x, x_new);
    state.core = update_core(state, config)?;
    for i in 0..state.factors.len() {
        state.factors[i] = update_factor(state, config, i)?;
    }
    let refs: Vec<&Matrix> = state.factors.iter().collect();
    state.recon = multi_mode_product(&state.core, &refs, None)?;
    let (z, b, h, s) = update_auxiliaries(state, config, z_lo)?;
    state.z = z;
    state.b = b;
    state.h = h;
    state.s = s;
    update_multipliers(state, config);

    let prev_norm = x_prev.frobenius_norm();
    let diff = diff_norm(state.x.as_slice(), x_prev.as_slice());
    let rel_change = if diff == 0.0 { 0.0 } else { diff / prev_norm };
    let penalty: f64 = state
        .h
        .iter()
        .zip(&config.lambda)
        .map(|(h, &l)| l * h.count_nonzero() as f64)
        .sum();
    let record = IterationRecord {
        objective: neg_log_likelihood(obs, &state.x)? + penalty,
        rel_change,
        res_tucker: diff_norm(state.x.as_slice(), state.recon.as_slice()),
        res_z: diff_norm(state.x.as_slice(), state.z.as_slice()),
        res_b: diff_norm(state.core.as_slice(), state.b.as_slice()),
        res_h: max_pair_norm(&state.factors, &state.h),
        res_s: max_pair_norm(&state.factors, &state.s),
    };
    if !record.objective.is_finite() || !record.res_tucker.is_finite() {
        return Err(Error::Domain("solver iterates became non-finite".into()));
    }
    Ok(record)
}

/// Runs ADMM from `init` until the relative change of `𝒳` drops to `tol`
/// or `max_iters` iterations have run.
pub fn solve(obs: &ObservationSet, config: &AdmmConfig, init: &TuckerModel) -> Result<SolveOutput> {
    let start = Instant::now();
    let mut state = AdmmState::initialize(obs, config, init)?;
    let mut history = Vec::new();
    for _ in 0..config.max_iters {
        let record = iterate(&mut state, obs, config)?;
        history.push(record);
        if record.rel_change <= config.tol {
            break;
        }
    }
    let lo = z_floor(obs, config);
    let xhat = state.x.clone().box_project(Box::new(lo, config.c)?);
    let model = TuckerModel {
        core: state.b.clone(),
        factors: state.s.clone(),
        amplitude_bounds: config.a.clone(),
        entry_bound: config.c,
    };
    Ok(SolveOutput {
        xhat,
        model,
        report: SolveReport {
            history,
            wall_time: start.elapsed(),
        },
        state,
    })
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn max_pair_norm(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| diff_norm(x.as_slice(), y.as_slice()))
        .fold(0.0, f64::max)
}
