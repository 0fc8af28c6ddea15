mod common;

use common::*;
use rand::Rng;
use sntd::admm::{self, iterate, solve, update_core, update_factor, update_x, z_floor, AdmmConfig};
use sntd::noise::{bernoulli_mask, observe, NoiseModel};
use sntd::synth::{generate_synthetic, SyntheticSpec};
use sntd::sweep::initial_model;
use sntd::tensor::{DenseTensor, Matrix};

const DIMS: [usize; 3] = [4, 3, 2];
const RANKS: [usize; 3] = [2, 2, 2];

fn models() -> [NoiseModel; 3] {
    [
        NoiseModel::Gaussian { sigma2: 0.3 },
        NoiseModel::Laplace { tau_noise: 0.5 },
        NoiseModel::Poisson { floor: 1e-3 },
    ]
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn core_update_matches_dense_kronecker_solve() {
    for seed in 0..50 {
        let (_, cfg, st) = random_state(seed, &DIMS, &RANKS, NoiseModel::Gaussian { sigma2: 0.3 });
        let fast = update_core(&st, &cfg).unwrap();
        let dense = dense_core_update(&st, &cfg);
        assert!(max_diff(fast.as_slice(), &dense) < 1e-8, "seed {seed}");
    }
}

#[test]
fn factor_update_matches_dense_solve() {
    for seed in 0..50 {
        let (_, cfg, st) = random_state(100 + seed, &DIMS, &RANKS, NoiseModel::Gaussian { sigma2: 0.3 });
        for i in 0..3 {
            let fast = update_factor(&st, &cfg, i).unwrap();
            let dense = dense_factor_update(&st, &cfg, i);
            assert!(fast.max_abs_diff(&dense) < 1e-8, "seed {seed} mode {i}");
        }
    }
}

#[test]
fn core_update_minimizes_lagrangian_numerically() {
    for seed in 0..10 {
        let (obs, cfg, st) = random_state(200 + seed, &DIMS, &RANKS, NoiseModel::Gaussian { sigma2: 0.3 });
        let f = |c: &[f64]| {
            let mut s = st.clone();
            s.core.as_mut_slice().copy_from_slice(c);
            lagrangian(&s, &obs, &cfg)
        };
        let oracle = newton_minimize_quadratic(f, st.core.as_slice(), 0.5);
        let fast = update_core(&st, &cfg).unwrap();
        assert!(max_diff(fast.as_slice(), &oracle) < 1e-6, "seed {seed}");
    }
}

#[test]
fn factor_update_minimizes_lagrangian_numerically() {
    for seed in 0..10 {
        let (obs, cfg, st) = random_state(300 + seed, &DIMS, &RANKS, NoiseModel::Laplace { tau_noise: 0.5 });
        for i in 0..3 {
            let f = |a: &[f64]| {
                let mut s = st.clone();
                s.factors[i].as_mut_slice().copy_from_slice(a);
                lagrangian(&s, &obs, &cfg)
            };
            let oracle = newton_minimize_quadratic(f, st.factors[i].as_slice(), 0.5);
            let fast = update_factor(&st, &cfg, i).unwrap();
            assert!(max_diff(fast.as_slice(), &oracle) < 1e-6, "seed {seed} mode {i}");
        }
    }
}

#[test]
fn gaussian_x_update_minimizes_lagrangian_numerically() {
    for seed in 0..5 {
        let (obs, cfg, st) = random_state(400 + seed, &DIMS, &RANKS, NoiseModel::Gaussian { sigma2: 0.3 });
        let f = |x: &[f64]| {
            let mut s = st.clone();
            s.x.as_mut_slice().copy_from_slice(x);
            lagrangian(&s, &obs, &cfg)
        };
        let oracle = newton_minimize_quadratic(f, st.x.as_slice(), 0.5);
        let fast = update_x(&st, &obs, &cfg).unwrap();
        assert!(max_diff(fast.as_slice(), &oracle) < 1e-6, "seed {seed}");
    }
}

/// Each block update must beat 200 random perturbations of size 1e-3 on
/// its own block of the augmented Lagrangian.
#[test]
fn block_updates_beat_random_perturbations() {
    let mut r = rng(7);
    for (k, model) in models().into_iter().enumerate() {
        let (obs, cfg, st) = random_state(500 + k as u64, &DIMS, &RANKS, model);

        let mut sx = st.clone();
        sx.x = update_x(&st, &obs, &cfg).unwrap();
        check_perturbations(&mut r, &sx, &obs, &cfg, |s| s.x.as_mut_slice());

        let mut sc = st.clone();
        sc.core = update_core(&st, &cfg).unwrap();
        check_perturbations(&mut r, &sc, &obs, &cfg, |s| s.core.as_mut_slice());

        for i in 0..3 {
            let mut sf = st.clone();
            sf.factors[i] = update_factor(&st, &cfg, i).unwrap();
            check_perturbations(&mut r, &sf, &obs, &cfg, |s| s.factors[i].as_mut_slice());
        }
    }
}

fn check_perturbations(
    r: &mut impl Rng,
    st: &sntd::admm::AdmmState,
    obs: &sntd::ObservationSet,
    cfg: &AdmmConfig,
    block: impl Fn(&mut sntd::admm::AdmmState) -> &mut [f64],
) {
    let base = lagrangian(st, obs, cfg);
    assert!(base.is_finite());
    for _ in 0..200 {
        let mut p = st.clone();
        for v in block(&mut p).iter_mut() {
            *v += r.random_range(-1e-3..1e-3);
        }
        let l = lagrangian(&p, obs, cfg);
        assert!(base <= l + 1e-12 * base.abs().max(1.0), "{base} > {l}");
    }
}

fn small_problem(model: NoiseModel, seed: u64) -> (DenseTensor, sntd::ObservationSet, AdmmConfig, sntd::TuckerModel) {
    let spec = SyntheticSpec {
        dims: vec![8, 7, 6],
        ranks: vec![2, 2, 2],
        sparsity: vec![0.6; 3],
        scale: vec![1.0; 3],
        seed,
    };
    let (mut x, truth) = generate_synthetic(&spec).unwrap();
    if model.is_poisson() {
        x = x.map(|v| v + 0.1);
    }
    let omega = bernoulli_mask(x.shape(), 0.6, seed + 1).unwrap();
    let obs = observe(&x, &omega, model, seed + 2).unwrap();
    let mut cfg = AdmmConfig::uniform(&spec.ranks, truth.entry_bound + 0.2, 1.0, 100.0, 100.0, 100.0);
    cfg.a = spec.scale.clone();
    cfg.max_iters = 60;
    if model.is_poisson() {
        cfg.poisson_floor = 0.1;
    }
    let init = initial_model(&obs, &cfg).unwrap();
    (x, obs, cfg, init)
}

#[test]
fn auxiliaries_stay_feasible_every_iteration() {
    for (k, model) in models().into_iter().enumerate() {
        let (_, obs, cfg, init) = small_problem(model, 10 + k as u64);
        let mut st = sntd::admm::AdmmState::initialize(&obs, &cfg, &init).unwrap();
        let lo = z_floor(&obs, &cfg);
        for it in 0..40 {
            iterate(&mut st, &obs, &cfg).unwrap();
            assert!(st.auxiliaries_feasible(&cfg, lo), "{} iteration {it}", model.name());
        }
    }
}

#[test]
fn solve_is_deterministic_and_clamped() {
    for (k, model) in models().into_iter().enumerate() {
        let (_, obs, cfg, init) = small_problem(model, 20 + k as u64);
        let a = solve(&obs, &cfg, &init).unwrap();
        let b = solve(&obs, &cfg, &init).unwrap();
        assert_eq!(a.xhat, b.xhat);
        assert_eq!(a.report.history, b.report.history);
        assert_eq!(a.state, b.state);
        let lo = z_floor(&obs, &cfg);
        assert!(a.xhat.as_slice().iter().all(|&v| v >= lo && v <= cfg.c));
    }
}

#[test]
fn stops_at_tolerance_or_iteration_cap() {
    let (_, obs, mut cfg, init) = small_problem(NoiseModel::Gaussian { sigma2: 0.01 }, 30);
    for (tol, cap) in [(1e-2, 300), (1e-12, 15), (1e-4, 300)] {
        cfg.tol = tol;
        cfg.max_iters = cap;
        let out = solve(&obs, &cfg, &init).unwrap();
        let n = out.report.iterations();
        let last = out.report.last().unwrap();
        assert!(n <= cap);
        assert!(last.rel_change <= tol || n == cap, "tol {tol}: {} after {n}", last.rel_change);
        if n < cap {
            // stopping happens at the first iterate below tolerance
            assert!(out.report.history[..n - 1].iter().all(|r| r.rel_change > tol));
        }
    }
}

#[test]
fn zero_lambda_never_thresholds() {
    let (_, obs, mut cfg, init) = small_problem(NoiseModel::Gaussian { sigma2: 0.01 }, 40);
    cfg.lambda = vec![0.0; 3];
    let mut st = sntd::admm::AdmmState::initialize(&obs, &cfg, &init).unwrap();
    for _ in 0..10 {
        let mut probe = st.clone();
        probe.x = update_x(&probe, &obs, &cfg).unwrap();
        probe.core = update_core(&probe, &cfg).unwrap();
        for i in 0..3 {
            probe.factors[i] = update_factor(&probe, &cfg, i).unwrap();
        }
        let (_, _, h, _) = admm::update_auxiliaries(&probe, &cfg, 0.0).unwrap();
        iterate(&mut st, &obs, &cfg).unwrap();
        for i in 0..3 {
            let expect = Matrix::from_fn(h[i].rows(), h[i].cols(), |p, q| {
                probe.factors[i][(p, q)] + probe.m[i][(p, q)] / cfg.rho[i]
            });
            assert_eq!(h[i], expect);
            assert_eq!(st.h[i], expect);
        }
    }
}

#[test]
fn noiseless_full_observation_recovers_small_tensor() {
    let (x, obs, mut cfg, init) = small_problem(NoiseModel::Gaussian { sigma2: 1e-8 }, 50);
    let full = sntd::ObservationSet::new(
        obs.shape().clone(),
        (0..x.len()).collect(),
        x.as_slice().to_vec(),
        obs.model(),
    )
    .unwrap();
    cfg.lambda = vec![0.0; 3];
    cfg.beta1 = 1000.0;
    cfg.beta2 = 1000.0;
    cfg.beta3 = 1000.0;
    cfg.rho = vec![1000.0; 3];
    cfg.alpha = vec![1000.0; 3];
    cfg.max_iters = 300;
    let init = initial_model(&full, &cfg).unwrap_or(init);
    let out = solve(&full, &cfg, &init).unwrap();
    let rel = sntd::tensor::relative_error(&out.xhat, &x).unwrap();
    assert!(rel < 1e-2, "relative error {rel}");
}
