//! Small dense and circulant linear algebra.
//!
//! Everything here is sized for degree matrices, Gram matrices of a handful
//! of invariants, Newton systems of implicit collocation and the dense
//! `(I - D_xx)` factorisation of a 128-point grid.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Pivots with magnitude at or below this are treated as exact zeros.
pub const PIVOT_THRESHOLD: f64 = 1e-300;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Dense matrix of the periodic convolution with `row` (see [`circulant_apply`]).
    pub fn circulant(row: &CirculantRow, n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for (offset, c) in row.taps() {
                let j = (i as isize + offset).rem_euclid(n as isize) as usize;
                m[(i, j)] += c;
            }
        }
        m
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factors with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(format!("LU needs a square matrix, got {}x{}", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > PIVOT_THRESHOLD) {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= l * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `Aᵀ x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        // Uᵀ z = b
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s / self.lu[i * n + i];
        }
        // Lᵀ w = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in (i + 1)..n {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows {
        return Err(Error::Dimension { expected: a.rows, got: b.len() });
    }
    Ok(LuFactors::new(a)?.solve(b))
}

/// Cholesky factor of the symmetric 2×2 matrix `[[a, b], [b, c]]`, returned as
/// `(λ11, λ21, λ22)` of the lower-triangular `L` with `L Lᵀ = M`.
///
/// The factor is built from the bottom-right corner, `λ22 = √c`,
/// `λ21 = b/√c`, `λ11 = √(Δ/c)` with `Δ = ac - b²`, which keeps the
/// first row of `L p` a pure multiple of `p₁`.
pub fn cholesky_2x2(a: f64, b: f64, c: f64) -> Result<(f64, f64, f64)> {
    let det = a * c - b * b;
    if !(a > 0.0 && c > 0.0 && det > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let l22 = c.sqrt();
    let l21 = b / l22;
    let l11 = (det / c).sqrt();
    Ok((l11, l21, l22))
}

/// 1-norm condition number estimate `‖A‖₁ ‖A⁻¹‖₁`, with `‖A⁻¹‖₁` from
/// Hager's estimator. Singular matrices give `+∞`.
pub fn condition_estimate(a: &DenseMatrix) -> f64 {
    let lu = match LuFactors::new(a) {
        Ok(lu) => lu,
        Err(_) => return f64::INFINITY,
    };
    let n = lu.dim();
    if n == 0 {
        return 0.0;
    }
    let inv_norm = if n <= 4 {
        // exact for tiny matrices
        let mut best: f64 = 0.0;
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = lu.solve(&e);
            best = best.max(col.iter().map(|v| v.abs()).sum());
        }
        best
    } else {
        hager_inverse_norm(&lu)
    };
    let kappa = a.norm_one() * inv_norm;
    if kappa.is_finite() {
        kappa
    } else {
        f64::INFINITY
    }
}

fn hager_inverse_norm(lu: &LuFactors) -> f64 {
    let n = lu.dim();
    let mut x = vec![1.0 / n as f64; n];
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x);
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = lu.solve_transpose(&xi);
        let (jmax, zmax) =
            z.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (j, v)| if v.abs() > b.1 { (j, v.abs()) } else { b });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        estimate = norm;
        if zmax <= ztx {
            break;
        }
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    // alternative lower bound guarding against the estimator's known traps
    let alt: Vec<f64> = (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
        })
        .collect();
    let y = lu.solve(&alt);
    let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
    estimate.max(alt_est)
}

/// Sparse description of one row of a circulant matrix: `(offset, coefficient)`
/// pairs, meaning `(C u)_i = Σ c · u_{(i + offset) mod N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantRow {
    taps: Vec<(isize, f64)>,
}

impl CirculantRow {
    pub fn new(taps: Vec<(isize, f64)>) -> Self {
        Self { taps }
    }

    pub fn identity() -> Self {
        Self::new(vec![(0, 1.0)])
    }

    pub fn taps(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.taps.iter().copied()
    }

    pub fn half_width(&self) -> usize {
        self.taps.iter().map(|(o, _)| o.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.taps.iter().map(|&(o, c)| (o, c * factor)).collect())
    }
}

/// Applies the circulant matrix described by `row` to `u` with periodic indexing.
pub fn circulant_apply(row: &CirculantRow, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    circulant_apply_into(row, u, &mut out);
    out
}

pub fn circulant_apply_into(row: &CirculantRow, u: &[f64], out: &mut [f64]) {
    let n = u.len() as isize;
    let hw = row.half_width() as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let mut acc = 0.0;
        if i >= hw && i + hw < n {
            for &(off, c) in &row.taps {
                acc += c * u[(i + off) as usize];
            }
        } else {
            for &(off, c) in &row.taps {
                acc += c * u[(i + off).rem_euclid(n) as usize];
            }
        }
        *o = acc;
    }
}
