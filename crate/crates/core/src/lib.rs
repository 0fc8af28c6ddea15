//! Sparse nonnegative Tucker decomposition for tensor completion from
//! partial, noisy observations.
//!
//! The estimator fits `𝒳 = 𝒞 ×_1 A_1 ⋯ ×_d A_d` with a nonnegative core in
//! `[0, 1]`, nonnegative factors bounded by `a_i` and penalized by their
//! number of nonzeros, and entries bounded by `c`, by maximizing the
//! likelihood of the observed entries under Gaussian, Laplace or Poisson
//! noise. [`admm::solve`] is the solver; [`bounds`] evaluates the error
//! bounds that go with the estimator.
//!
//! ```
//! use sntd::{admm, noise, sweep, synth};
//!
//! let spec = synth::SyntheticSpec {
//!     dims: vec![10, 10, 10],
//!     ranks: vec![2, 2, 2],
//!     sparsity: vec![0.5; 3],
//!     scale: vec![1.0; 3],
//!     seed: 1,
//! };
//! let (truth, model) = synth::generate_synthetic(&spec)?;
//! let omega = noise::bernoulli_mask(truth.shape(), 0.5, 2)?;
//! let obs = noise::observe(&truth, &omega, noise::NoiseModel::Gaussian { sigma2: 1e-4 }, 3)?;
//!
//! let mut config = admm::AdmmConfig::uniform(&[2, 2, 2], model.entry_bound, 1.0, 100.0, 0.1, 0.1);
//! config.max_iters = 20;
//! let init = sweep::initial_model(&obs, &config)?;
//! let out = admm::solve(&obs, &config, &init)?;
//! assert!(out.report.iterations() <= 20);
//! # Ok::<(), sntd::Error>(())
//! ```

pub mod admm;
pub mod bounds;
pub mod config;
mod error;
pub mod hosvd;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod prox;
pub mod rng;
pub mod sweep;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use noise::{NoiseModel, ObservationSet};
pub use tensor::{DenseTensor, Matrix, Shape, TuckerModel};
