//! Synthetic sparse nonnegative Tucker ground truths.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, hash64, tag};
use crate::tensor::{DenseTensor, Matrix, Shape, TuckerModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Probability `υ_i ∈ (0, 1]` that a factor entry is nonzero.
    pub sparsity: Vec<f64>,
    /// Amplitude bounds `a_i`.
    pub scale: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<Shape> {
        let shape = Shape::new(self.dims.clone())?;
        let d = shape.order();
        if self.ranks.len() != d || self.sparsity.len() != d || self.scale.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{d} dims, {} ranks, {} sparsity ratios, {} scales",
                self.ranks.len(),
                self.sparsity.len(),
                self.scale.len()
            )));
        }
        for (mode, (&r, &n)) in self.ranks.iter().zip(&self.dims).enumerate() {
            if r == 0 || r > n {
                return Err(Error::RankOutOfRange { mode, rank: r, max: n });
            }
        }
        if !self.sparsity.iter().all(|&u| u > 0.0 && u <= 1.0) {
            return Err(Error::param("sparsity", "ratios must lie in (0, 1]"));
        }
        if !self.scale.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return Err(Error::param("scale", "amplitudes must be positive"));
        }
        Ok(shape)
    }
}

/// Core entries i.i.d. uniform on `(0, 1)`; factor `i` entries nonzero with
/// probability `υ_i`, nonzero values uniform on `(0, a_i)`. The entry bound
/// is set to `c = 2‖𝒳*‖_∞`.
///
/// A factor that comes out entirely zero is redrawn once from a fresh
/// stream; a second all-zero draw is an error.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(DenseTensor, TuckerModel)> {
    spec.validate()?;
    let core_shape = Shape::new(spec.ranks.clone())?;
    let mut rng = rng::rng_from(hash64(spec.seed, &[tag::CORE]));
    let core_data = (0..core_shape.total()).map(|_| open_unit(&mut rng)).collect();
    let core = DenseTensor::from_vec(core_shape, core_data)?;

    let mut factors = Vec::with_capacity(spec.dims.len());
    for i in 0..spec.dims.len() {
        let draw = |attempt: u64| {
            let mut rng = rng::rng_from(hash64(spec.seed, &[tag::FACTOR, i as u64, attempt]));
            Matrix::from_fn(spec.dims[i], spec.ranks[i], |_, _| {
                let keep = rng.random::<f64>() < spec.sparsity[i];
                let v = open_unit(&mut rng) * spec.scale[i];
                if keep {
                    v
                } else {
                    0.0
                }
            })
        };
        let mut f = draw(0);
        if f.count_nonzero() == 0 {
            f = draw(1);
        }
        if f.count_nonzero() == 0 {
            return Err(Error::DegenerateFactor(format!("factor {i} is all zero after a redraw")));
        }
        factors.push(f);
    }

    let mut model = TuckerModel::new(core, factors, spec.scale.clone(), 1.0)?;
    let x = model.reconstruct()?;
    model.entry_bound = 2.0 * x.infinity_norm();
    Ok((x, model))
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
