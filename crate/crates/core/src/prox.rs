//! Elementwise proximal maps and box projections.

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box {
    lo: f64,
    hi: f64,
}

impl Box {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::param("box", format!("lo {lo} exceeds hi {hi}")));
        }
        Ok(Box { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Anything made of a flat run of scalars that can be clamped in place.
pub trait BoxProject: Sized {
    fn values_mut(&mut self) -> &mut [f64];

    fn box_project(mut self, b: Box) -> Self {
        for v in self.values_mut() {
            *v = b.clamp(*v);
        }
        self
    }
}

impl BoxProject for DenseTensor {
    fn values_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }
}

impl BoxProject for Matrix {
    fn values_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }
}

/// Elementwise clamp of `t` onto `b`.
pub fn box_project<T: BoxProject + Clone>(t: &T, b: Box) -> T {
    t.clone().box_project(b)
}

/// Proximal map of `lam·‖·‖₀` at a scalar.
///
/// Keeps `y` when `|y| > √(2·lam)` and returns 0 otherwise; the tie
/// `|y| = √(2·lam)` resolves to 0.
pub fn hard_threshold(y: f64, lam: f64) -> Result<f64> {
    check_lambda(lam)?;
    Ok(threshold_unchecked(y, (2.0 * lam).sqrt()))
}

/// Entrywise [`hard_threshold`] with `λ = lam_over_rho`.
///
/// `lam_over_rho == 0` is accepted and is the identity map, which is what a
/// solve without the sparsity penalty needs.
pub fn hard_threshold_matrix(m: &Matrix, lam_over_rho: f64) -> Result<Matrix> {
    if !(lam_over_rho >= 0.0) || !lam_over_rho.is_finite() {
        return Err(Error::param(
            "lam_over_rho",
            format!("must be a finite nonnegative number, got {lam_over_rho}"),
        ));
    }
    let t = (2.0 * lam_over_rho).sqrt();
    Ok(m.map(|v| threshold_unchecked(v, t)))
}

#[inline]
fn threshold_unchecked(y: f64, t: f64) -> f64 {
    if y.abs() > t {
        y
    } else {
        0.0
    }
}

fn check_lambda(lam: f64) -> Result<()> {
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::param("lambda", format!("must be positive and finite, got {lam}")));
    }
    Ok(())
}
