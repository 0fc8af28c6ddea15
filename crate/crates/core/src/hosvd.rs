//! Sequentially truncated HOSVD, used to initialize the solver.

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::tensor::{mode_product, unfold, DenseTensor, Matrix, Shape, TuckerModel};

/// Tucker rank `(r_1, …, r_d)`, each `1 ≤ r_i ≤ n_i` for the target shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn new(ranks: impl Into<Vec<usize>>, shape: &Shape) -> Result<Self> {
        let ranks = ranks.into();
        if ranks.len() != shape.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} ranks for an order-{} tensor",
                ranks.len(),
                shape.order()
            )));
        }
        for (mode, (&r, &n)) in ranks.iter().zip(shape.dims()).enumerate() {
            if r == 0 || r > n {
                return Err(Error::RankOutOfRange { mode, rank: r, max: n });
            }
        }
        Ok(RankVector(ranks))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn product(&self) -> usize {
        self.0.iter().product()
    }
}

/// Top-`r` left singular vectors of `m`, from the eigenvectors of `m mᵀ`.
///
/// Columns are orthonormal, ordered by decreasing singular value, with each
/// column's largest-magnitude entry nonnegative.
pub fn leading_left_singular_vectors(m: &Matrix, r: usize) -> Result<Matrix> {
    let max = m.rows().min(m.cols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { mode: 0, rank: r, max });
    }
    let eig = symmetric_eigen(&m.outer_gram())?;
    Ok(Matrix::from_fn(m.rows(), r, |i, j| eig.vectors[(i, j)]))
}

/// ST-HOSVD with truncation order `0..d`: for each mode, take the leading
/// left singular vectors `U_n` of the current tensor's unfolding, then
/// replace the tensor by its product with `U_nᵀ`.
///
/// The returned model carries placeholder bounds (`a_i = 1`, `c = 2‖x‖_∞`);
/// callers set the real ones.
pub fn st_hosvd(x: &DenseTensor, ranks: &RankVector) -> Result<TuckerModel> {
    let r = ranks.as_slice();
    if r.len() != x.order() {
        return Err(Error::DimensionMismatch("rank vector order differs from tensor order".into()));
    }
    let mut core = x.clone();
    let mut factors = Vec::with_capacity(x.order());
    for (mode, &rank) in r.iter().enumerate() {
        let n = x.dims()[mode];
        if rank == 0 || rank > n {
            return Err(Error::RankOutOfRange { mode, rank, max: n });
        }
        let unfolded = unfold(&core, mode)?;
        // the unfolding may have fewer columns than rows once earlier modes
        // are truncated; pad the missing directions from the identity
        let u = if rank <= unfolded.cols() {
            leading_left_singular_vectors(&unfolded, rank)?
        } else {
            let eig = symmetric_eigen(&unfolded.outer_gram())?;
            Matrix::from_fn(n, rank, |i, j| eig.vectors[(i, j)])
        };
        core = mode_product(&core, &u.transpose(), mode)?;
        factors.push(u);
    }
    let d = x.order();
    let c = 2.0 * x.infinity_norm();
    Ok(TuckerModel {
        core,
        factors,
        amplitude_bounds: vec![1.0; d],
        entry_bound: if c > 0.0 { c } else { 1.0 },
    })
}
