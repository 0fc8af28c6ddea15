//! Oracles and fixtures shared by the integration and acceptance tests.
//!
//! Everything here is written against materialized matrices and plain loops
//! so it shares no code path with the structured routines it checks.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sntd::admm::{AdmmConfig, AdmmState};
use sntd::noise::{neg_log_likelihood, NoiseModel, ObservationSet};
use sntd::tensor::{tucker_reconstruct, unfold, DenseTensor, Matrix, Shape, TuckerModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, dims: &[usize], lo: f64, hi: f64) -> DenseTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let data = (0..shape.total()).map(|_| rng.random_range(lo..hi)).collect();
    DenseTensor::from_vec(shape, data).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Gaussian elimination with partial pivoting on a dense row-major system.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `a ⊗ b` by the block definition.
pub fn kron_naive(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = (b.rows(), b.cols());
    Matrix::from_fn(a.rows() * p, a.cols() * q, |i, j| a[(i / p, j / q)] * b[(i % p, j % q)])
}

/// `A_d ⊗ ⋯ ⊗ A_1`, optionally leaving out one mode.
pub fn kron_chain_naive(mats: &[Matrix], skip: Option<usize>) -> Matrix {
    let mut out = Matrix::identity(1);
    for (i, m) in mats.iter().enumerate() {
        if Some(i) != skip {
            out = kron_naive(m, &out);
        }
    }
    out
}

/// Dense `Kᵀ v` for a column-major matrix.
pub fn mat_t_vec(k: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..k.cols()).map(|j| (0..k.rows()).map(|i| k[(i, j)] * v[i]).sum()).collect()
}

pub fn mat_vec(k: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..k.rows()).map(|i| (0..k.cols()).map(|j| k[(i, j)] * v[j]).sum()).collect()
}

/// A random solver state on a small problem with random multipliers and
/// auxiliaries, and a Gaussian observation set on roughly half the entries.
pub fn random_state(seed: u64, dims: &[usize], ranks: &[usize], model: NoiseModel) -> (ObservationSet, AdmmConfig, AdmmState) {
    let mut r = rng(seed);
    let shape = Shape::new(dims.to_vec()).unwrap();
    let indices: Vec<usize> = (0..shape.total()).filter(|_| r.random::<f64>() < 0.6).collect();
    let values = indices
        .iter()
        .map(|_| match model {
            NoiseModel::Poisson { .. } => f64::from(r.random_range(0u8..5)),
            _ => r.random_range(0.0..2.0),
        })
        .collect();
    let obs = ObservationSet::new(shape, indices, values, model).unwrap();
    let d = dims.len();
    let config = AdmmConfig {
        lambda: (0..d).map(|_| r.random_range(0.1..2.0)).collect(),
        beta1: r.random_range(0.5..3.0),
        beta2: r.random_range(0.5..3.0),
        beta3: r.random_range(0.5..3.0),
        rho: (0..d).map(|_| r.random_range(0.5..3.0)).collect(),
        alpha: (0..d).map(|_| r.random_range(0.5..3.0)).collect(),
        max_iters: 50,
        tol: 1e-6,
        c: 3.0,
        a: vec![1.5; d],
        ranks: ranks.to_vec(),
        poisson_floor: 1e-3,
    };
    let init = TuckerModel {
        core: random_tensor(&mut r, ranks, 0.0, 1.0),
        factors: (0..d).map(|i| random_matrix(&mut r, dims[i], ranks[i], -0.5, 1.0)).collect(),
        amplitude_bounds: config.a.clone(),
        entry_bound: config.c,
    };
    let mut st = AdmmState::initialize(&obs, &config, &init).unwrap();
    st.x = random_tensor(&mut r, dims, 0.1, 2.0);
    st.z = random_tensor(&mut r, dims, 0.1, 2.0);
    st.b = random_tensor(&mut r, ranks, 0.0, 1.0);
    st.t1 = random_tensor(&mut r, dims, -0.5, 0.5);
    st.t2 = random_tensor(&mut r, dims, -0.5, 0.5);
    st.t3 = random_tensor(&mut r, ranks, -0.5, 0.5);
    for i in 0..d {
        st.h[i] = random_matrix(&mut r, dims[i], ranks[i], -1.0, 1.0);
        st.s[i] = random_matrix(&mut r, dims[i], ranks[i], 0.0, 1.5);
        st.m[i] = random_matrix(&mut r, dims[i], ranks[i], -0.5, 0.5);
        st.n[i] = random_matrix(&mut r, dims[i], ranks[i], -0.5, 0.5);
    }
    (obs, config, st)
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smooth part of the augmented Lagrangian: everything except the ℓ0 and
/// box indicator terms, which do not involve `𝒳`, `𝒞` or `A_i`.
pub fn lagrangian(st: &AdmmState, obs: &ObservationSet, c: &AdmmConfig) -> f64 {
    let recon = tucker_reconstruct(&TuckerModel {
        core: st.core.clone(),
        factors: st.factors.clone(),
        amplitude_bounds: c.a.clone(),
        entry_bound: c.c,
    })
    .unwrap();
    let x = st.x.as_slice();
    let rv = recon.as_slice();
    let diff: Vec<f64> = x.iter().zip(rv).map(|(a, b)| a - b).collect();
    let xz: Vec<f64> = x.iter().zip(st.z.as_slice()).map(|(a, b)| a - b).collect();
    let cb: Vec<f64> = st.core.as_slice().iter().zip(st.b.as_slice()).map(|(a, b)| a - b).collect();
    let mut l = neg_log_likelihood(obs, &st.x).unwrap_or(f64::INFINITY)
        + inner(st.t1.as_slice(), &diff)
        + 0.5 * c.beta1 * inner(&diff, &diff)
        + inner(st.t2.as_slice(), &xz)
        + 0.5 * c.beta2 * inner(&xz, &xz)
        + inner(st.t3.as_slice(), &cb)
        + 0.5 * c.beta3 * inner(&cb, &cb);
    for i in 0..st.factors.len() {
        let a = st.factors[i].as_slice();
        let ah: Vec<f64> = a.iter().zip(st.h[i].as_slice()).map(|(p, q)| p - q).collect();
        let as_: Vec<f64> = a.iter().zip(st.s[i].as_slice()).map(|(p, q)| p - q).collect();
        l += inner(st.m[i].as_slice(), &ah)
            + 0.5 * c.rho[i] * sq_dist(a, st.h[i].as_slice())
            + inner(st.n[i].as_slice(), &as_)
            + 0.5 * c.alpha[i] * sq_dist(a, st.s[i].as_slice());
    }
    l
}

/// Core block minimizer from the materialized Kronecker matrix
/// `K = A_d ⊗ ⋯ ⊗ A_1` and a dense solve.
pub fn dense_core_update(st: &AdmmState, c: &AdmmConfig) -> Vec<f64> {
    let k = kron_chain_naive(&st.factors, None);
    let n = k.cols();
    let w: Vec<f64> = st
        .x
        .as_slice()
        .iter()
        .zip(st.t1.as_slice())
        .map(|(x, t)| c.beta1 * x + t)
        .collect();
    let mut rhs = mat_t_vec(&k, &w);
    for (j, r) in rhs.iter_mut().enumerate() {
        *r += c.beta3 * st.b.as_slice()[j] - st.t3.as_slice()[j];
    }
    let ktk = k.gram();
    let sys = (0..n)
        .map(|i| (0..n).map(|j| c.beta1 * ktk[(i, j)] + if i == j { c.beta3 } else { 0.0 }).collect())
        .collect();
    dense_solve(sys, rhs)
}

/// Factor block minimizer with `R_i = 𝒞₍ᵢ₎ (⊗_{j≠i} A_j)ᵀ` materialized,
/// solved row by row as dense systems.
pub fn dense_factor_update(st: &AdmmState, c: &AdmmConfig, i: usize) -> Matrix {
    let k = kron_chain_naive(&st.factors, Some(i));
    let ci = unfold(&st.core, i).unwrap();
    let r = ci.matmul(&k.transpose()).unwrap();
    let w = st.x.zip_map(&st.t1, |x, t| c.beta1 * x + t).unwrap();
    let wi = unfold(&w, i).unwrap();
    let g = wi.matmul(&r.transpose()).unwrap();
    let rr = r.matmul(&r.transpose()).unwrap();
    let ri = rr.rows();
    let sys: Vec<Vec<f64>> = (0..ri)
        .map(|p| {
            (0..ri)
                .map(|q| c.beta1 * rr[(p, q)] + if p == q { c.rho[i] + c.alpha[i] } else { 0.0 })
                .collect()
        })
        .collect();
    let n = st.factors[i].rows();
    let mut out = Matrix::zeros(n, ri);
    for row in 0..n {
        let rhs: Vec<f64> = (0..ri)
            .map(|q| g[(row, q)] + c.rho[i] * st.h[i][(row, q)] - st.m[i][(row, q)] + c.alpha[i] * st.s[i][(row, q)] - st.n[i][(row, q)])
            .collect();
        // the system matrix is symmetric, so rows of A solve it directly
        let sol = dense_solve(sys.clone(), rhs);
        for q in 0..ri {
            out[(row, q)] = sol[q];
        }
    }
    out
}

/// Minimizes a quadratic by one Newton step from `x0`, with gradient and
/// Hessian taken by central differences (exact for quadratics up to
/// rounding).
pub fn newton_minimize_quadratic(f: impl Fn(&[f64]) -> f64, x0: &[f64], h: f64) -> Vec<f64> {
    let n = x0.len();
    let at = |deltas: &[(usize, f64)]| {
        let mut x = x0.to_vec();
        for &(k, d) in deltas {
            x[k] += d;
        }
        f(&x)
    };
    let g: Vec<f64> = (0..n).map(|k| (at(&[(k, h)]) - at(&[(k, -h)])) / (2.0 * h)).collect();
    let mut hess = vec![vec![0.0; n]; n];
    for p in 0..n {
        for q in p..n {
            let v = if p == q {
                (at(&[(p, h)]) - 2.0 * f(x0) + at(&[(p, -h)])) / (h * h)
            } else {
                (at(&[(p, h), (q, h)]) - at(&[(p, h), (q, -h)]) - at(&[(p, -h), (q, h)]) + at(&[(p, -h), (q, -h)]))
                    / (4.0 * h * h)
            };
            hess[p][q] = v;
            hess[q][p] = v;
        }
    }
    let step = dense_solve(hess, g.iter().map(|v| -v).collect());
    x0.iter().zip(step).map(|(x, s)| x + s).collect()
}
