//! Dense order-d tensors and the Tucker algebra.
//!
//! Entries are stored in *vectorization order*: the first index varies
//! fastest, so the flat vector is the concatenation of all mode-1 fibers.
//! With 0-based indices, entry `(i_0, …, i_{d-1})` lives at
//!
//! ```text
//! offset = i_0 + i_1·n_0 + i_2·n_0·n_1 + …
//! ```
//!
//! Matrices use the same convention (column-major), so a [`Matrix`] is
//! bit-for-bit an order-2 tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions `n_1 × … × n_d` of a dense tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidShape("order must be at least 1".into()));
        }
        if let Some(pos) = dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidShape(format!("dimension {pos} is zero")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidShape("total size overflows usize".into()))?;
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Largest dimension, `n_m` in the bound formulas.
    pub fn max_dim(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(1)
    }

    /// Linear offset of a 0-based multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut stride = 1;
        let mut off = 0;
        for (&i, &n) in index.iter().zip(&self.dims) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    /// Inverse of [`Shape::offset`].
    pub fn multi_index(&self, mut offset: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&n| {
                let i = offset % n;
                offset /= n;
                i
            })
            .collect()
    }

    fn with_dim(&self, mode: usize, n: usize) -> Shape {
        let mut dims = self.dims.clone();
        dims[mode] = n;
        Shape { dims }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// `(Π_{k<mode} n_k, n_mode, Π_{k>mode} n_k)`.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.dims[..mode].iter().product();
        let right = self.dims[mode + 1..].iter().product();
        (left, self.dims[mode], right)
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.dims
    }
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices; convenient in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut m = Matrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = rhs[(k, j)];
                if b == 0.0 {
                    continue;
                }
                for (d, &a) in dst.iter_mut().zip(self.column(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for a in 0..self.cols {
            for b in a..self.cols {
                let v = dot(self.column(a), self.column(b));
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    }

    /// `self · selfᵀ`.
    pub fn outer_gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.rows, self.rows);
        for k in 0..self.cols {
            let col = self.column(k);
            for b in 0..self.rows {
                let cb = col[b];
                if cb == 0.0 {
                    continue;
                }
                for a in b..self.rows {
                    g.data[a + b * self.rows] += col[a] * cb;
                }
            }
        }
        for b in 0..self.rows {
            for a in 0..b {
                g.data[a + b * self.rows] = g.data[b + a * self.rows];
            }
        }
        g
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Number of nonzero entries, `‖·‖₀`.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    /// Views the matrix as an order-2 tensor without copying.
    pub fn into_tensor(self) -> DenseTensor {
        DenseTensor {
            shape: Shape {
                dims: vec![self.rows, self.cols],
            },
            data: self.data,
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

/// Dense tensor with values in vectorization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.total()];
        DenseTensor { shape, data }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let data = vec![value; shape.total()];
        DenseTensor { shape, data }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.total() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for shape {:?} (expected {})",
                data.len(),
                shape.dims(),
                shape.total()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.offset(index)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn infinity_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn norms(&self) -> Norms {
        Norms {
            frobenius: self.frobenius_norm(),
            infinity: self.infinity_norm(),
        }
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "shapes {:?} and {:?} differ",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub infinity: f64,
}

/// `⟨x, y⟩ = Σ x·y` over all entries.
pub fn inner(x: &DenseTensor, y: &DenseTensor) -> Result<f64> {
    x.check_same_shape(y)?;
    Ok(dot(&x.data, &y.data))
}

/// `‖x̂ − x*‖_F / ‖x*‖_F`.
pub fn relative_error(xhat: &DenseTensor, xstar: &DenseTensor) -> Result<f64> {
    xhat.check_same_shape(xstar)?;
    let denom = xstar.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let num: f64 = xhat
        .data
        .iter()
        .zip(&xstar.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num.sqrt() / denom)
}

/// Mode-`mode` unfolding (0-based): an `n_mode × Π_{k≠mode} n_k` matrix whose
/// columns are the mode fibers, ordered with the remaining indices in
/// vectorization order.
pub fn unfold(x: &DenseTensor, mode: usize) -> Result<Matrix> {
    x.shape.check_mode(mode)?;
    let (left, n, right) = x.shape.split(mode);
    let mut out = vec![0.0; x.len()];
    for b in 0..right {
        for i in 0..n {
            let src = &x.data[(b * n + i) * left..(b * n + i + 1) * left];
            for (a, &v) in src.iter().enumerate() {
                out[i + (a + b * left) * n] = v;
            }
        }
    }
    Ok(Matrix {
        rows: n,
        cols: left * right,
        data: out,
    })
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, shape: &Shape) -> Result<DenseTensor> {
    shape.check_mode(mode)?;
    let (left, n, right) = shape.split(mode);
    if m.rows != n || m.cols != left * right {
        return Err(Error::DimensionMismatch(format!(
            "a {}x{} matrix cannot fold into mode {mode} of shape {:?}",
            m.rows,
            m.cols,
            shape.dims()
        )));
    }
    let mut out = vec![0.0; shape.total()];
    for b in 0..right {
        for i in 0..n {
            let dst = &mut out[(b * n + i) * left..(b * n + i + 1) * left];
            for (a, d) in dst.iter_mut().enumerate() {
                *d = m.data[i + (a + b * left) * n];
            }
        }
    }
    Ok(DenseTensor {
        shape: shape.clone(),
        data: out,
    })
}

/// n-mode product `c ×_mode a`: contracts index `mode` of `c` with the column
/// index of `a`.
pub fn mode_product(c: &DenseTensor, a: &Matrix, mode: usize) -> Result<DenseTensor> {
    c.shape.check_mode(mode)?;
    let (left, n, right) = c.shape.split(mode);
    if a.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "mode-{mode} product needs {n} columns, matrix has {}",
            a.cols
        )));
    }
    let out_n = a.rows;
    let mut out = vec![0.0; left * out_n * right];
    for b in 0..right {
        for i in 0..n {
            let src = &c.data[(b * n + i) * left..(b * n + i + 1) * left];
            for k in 0..out_n {
                let w = a.data[k + i * out_n];
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[(b * out_n + k) * left..(b * out_n + k + 1) * left];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    Ok(DenseTensor {
        shape: c.shape.with_dim(mode, out_n),
        data: out,
    })
}

/// Applies `c ×_k mats[k]` for every mode, in order `0..d`, skipping the mode
/// listed in `skip`.
pub fn multi_mode_product(c: &DenseTensor, mats: &[&Matrix], skip: Option<usize>) -> Result<DenseTensor> {
    if mats.len() != c.order() {
        return Err(Error::DimensionMismatch(format!(
            "{} matrices for an order-{} tensor",
            mats.len(),
            c.order()
        )));
    }
    let mut out = c.clone();
    for (k, m) in mats.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        out = mode_product(&out, m, k)?;
    }
    Ok(out)
}

/// `y ×_1 A_1ᵀ ⋯ ×_d A_dᵀ`, i.e. `(A_d ⊗ ⋯ ⊗ A_1)ᵀ vec(y)` reshaped to the core shape.
pub fn multi_mode_product_transposed(y: &DenseTensor, mats: &[Matrix]) -> Result<DenseTensor> {
    let ts: Vec<Matrix> = mats.iter().map(Matrix::transpose).collect();
    let refs: Vec<&Matrix> = ts.iter().collect();
    multi_mode_product(y, &refs, None)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (br, bc) = (b.rows, b.cols);
    Matrix::from_fn(a.rows * br, a.cols * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// `A_d ⊗ A_{d-1} ⊗ ⋯ ⊗ A_1` over the given factors (skipping `skip`).
/// Materializes the full product; meant for oracles on tiny dimensions.
pub fn kron_chain_reversed(mats: &[Matrix], skip: Option<usize>) -> Matrix {
    let mut acc = Matrix::identity(1);
    for (k, m) in mats.iter().enumerate().rev() {
        if Some(k) == skip {
            continue;
        }
        acc = kron(&acc, m);
    }
    acc
}

/// Tucker model `𝒳 = 𝒞 ×_1 A_1 ⋯ ×_d A_d` with its amplitude bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerModel {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
    /// `a_i`: bound on the entries of factor `i`.
    pub amplitude_bounds: Vec<f64>,
    /// `c`: bound on the entries of the reconstruction.
    pub entry_bound: f64,
}

impl TuckerModel {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>, amplitude_bounds: Vec<f64>, entry_bound: f64) -> Result<Self> {
        let model = TuckerModel {
            core,
            factors,
            amplitude_bounds,
            entry_bound,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.core.order();
        if self.factors.len() != d || self.amplitude_bounds.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "order-{d} core with {} factors and {} amplitude bounds",
                self.factors.len(),
                self.amplitude_bounds.len()
            )));
        }
        for (i, f) in self.factors.iter().enumerate() {
            let r = self.core.dims()[i];
            if f.cols() != r {
                return Err(Error::DimensionMismatch(format!(
                    "factor {i} has {} columns, core dim is {r}",
                    f.cols()
                )));
            }
            if r > f.rows() {
                return Err(Error::RankOutOfRange {
                    mode: i,
                    rank: r,
                    max: f.rows(),
                });
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.core.order()
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    /// `𝒞 ×_1 A_1 ⋯ ×_d A_d` by successive mode products.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        tucker_reconstruct(self)
    }

    /// Checks the box constraints `0 ≤ 𝒞 ≤ 1`, `0 ≤ A_i ≤ a_i` and
    /// `0 ≤ 𝒳 ≤ c`, allowing slack `tol`.
    pub fn is_feasible(&self, tol: f64) -> Result<bool> {
        let in_box = |v: f64, hi: f64| v >= -tol && v <= hi + tol;
        if !self.core.as_slice().iter().all(|&v| in_box(v, 1.0)) {
            return Ok(false);
        }
        for (f, &a) in self.factors.iter().zip(&self.amplitude_bounds) {
            if !f.as_slice().iter().all(|&v| in_box(v, a)) {
                return Ok(false);
            }
        }
        let x = self.reconstruct()?;
        Ok(x.as_slice().iter().all(|&v| in_box(v, self.entry_bound)))
    }
}

pub fn tucker_reconstruct(model: &TuckerModel) -> Result<DenseTensor> {
    let refs: Vec<&Matrix> = model.factors.iter().collect();
    multi_mode_product(&model.core, &refs, None)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "max_abs_diff on different lengths");
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
