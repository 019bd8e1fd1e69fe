//! Central finite differences on a uniform periodic grid.

use crate::error::{Error, Result};
use crate::linalg::{circulant_apply_into, CirculantRow, DenseMatrix};

/// `n` equispaced points `x_i = iΔx` on `[0, length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    length: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n == 0 || !(length > 0.0) || !length.is_finite() {
            return Err(Error::BadGrid(format!("{n} points on a period of {length}")));
        }
        Ok(Self { n, length })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|i| i as f64 * dx).collect()
    }
}

/// Antisymmetric stencil `Σ_k c_k (u_{i+k} − u_{i−k})` from one-sided weights.
fn antisymmetric(weights: &[f64], scale: f64) -> CirculantRow {
    let mut taps = Vec::with_capacity(2 * weights.len());
    for (k, &c) in weights.iter().enumerate() {
        let off = k as isize + 1;
        taps.push((-off, -c * scale));
        taps.push((off, c * scale));
    }
    CirculantRow::new(taps)
}

/// A circulant difference operator on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicDifference {
    row: CirculantRow,
    n: usize,
    order: usize,
}

impl PeriodicDifference {
    fn checked(row: CirculantRow, grid: &PeriodicGrid, order: usize) -> Result<Self> {
        let width = 2 * row.half_width() + 1;
        if grid.len() < width {
            return Err(Error::BadGrid(format!("{} points cannot hold a stencil of width {width}", grid.len())));
        }
        Ok(Self { row, n: grid.len(), order })
    }

    /// First derivative of order 4 or 8.
    pub fn first_derivative(grid: &PeriodicGrid, order: usize) -> Result<Self> {
        let weights: &[f64] = match order {
            2 => &[0.5],
            4 => &[2.0 / 3.0, -1.0 / 12.0],
            6 => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
            8 => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
            _ => return Err(Error::InvalidArgument(format!("no first-derivative stencil of order {order}"))),
        };
        Self::checked(antisymmetric(weights, 1.0 / grid.dx()), grid, order)
    }

    /// Second derivative of order 2 or 4.
    pub fn second_derivative(grid: &PeriodicGrid, order: usize) -> Result<Self> {
        let s = 1.0 / (grid.dx() * grid.dx());
        let taps = match order {
            2 => vec![(-1, s), (0, -2.0 * s), (1, s)],
            4 => vec![(-2, -s / 12.0), (-1, 4.0 * s / 3.0), (0, -2.5 * s), (1, 4.0 * s / 3.0), (2, -s / 12.0)],
            _ => return Err(Error::InvalidArgument(format!("no second-derivative stencil of order {order}"))),
        };
        Self::checked(CirculantRow::new(taps), grid, order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self) -> &CirculantRow {
        &self.row
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.n);
        circulant_apply_into(&self.row, u, out);
    }

    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::circulant(&self.row, self.n)
    }
}

/// `max |A + Aᵀ|` entrywise, relative to `max |A|`.
pub fn skew_defect(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] + a[(j, i)]).abs());
            scale = scale.max(a[(i, j)].abs());
        }
    }
    worst / scale.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sine_error(order: usize, n: usize, second: bool) -> f64 {
        let grid = PeriodicGrid::new(n, 1.0).unwrap();
        let x = grid.points();
        let u: Vec<f64> = x.iter().map(|x| (TAU * x).sin()).collect();
        let (op, exact): (_, Vec<f64>) = if second {
            (
                PeriodicDifference::second_derivative(&grid, order).unwrap(),
                x.iter().map(|x| -TAU * TAU * (TAU * x).sin()).collect(),
            )
        } else {
            (
                PeriodicDifference::first_derivative(&grid, order).unwrap(),
                x.iter().map(|x| TAU * (TAU * x).cos()).collect(),
            )
        };
        op.apply(&u).iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn observed_orders() {
        for (order, second, tol) in [(8, false, 0.5), (4, false, 0.3), (4, true, 0.3)] {
            let (e1, e2) = (sine_error(order, 16, second), sine_error(order, 32, second));
            let slope = (e1 / e2).log2();
            assert!((slope - order as f64).abs() < tol, "order {order} second {second}: {slope}");
        }
    }

    #[test]
    fn first_derivative_is_skew() {
        let grid = PeriodicGrid::new(64, 40.0).unwrap();
        let d = PeriodicDifference::first_derivative(&grid, 8).unwrap().matrix();
        assert!(skew_defect(&d) <= 1e-14);
    }

    #[test]
    fn grid_too_small_for_stencil() {
        let grid = PeriodicGrid::new(8, 1.0).unwrap();
        assert!(matches!(PeriodicDifference::first_derivative(&grid, 8), Err(Error::BadGrid(_))));
        assert!(PeriodicDifference::first_derivative(&grid, 4).is_ok());
        assert!(matches!(PeriodicGrid::new(10, 0.0), Err(Error::BadGrid(_))));
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = PeriodicGrid::new(20, 3.0).unwrap();
        let one = vec![1.0; 20];
        for op in [
            PeriodicDifference::first_derivative(&grid, 8).unwrap(),
            PeriodicDifference::second_derivative(&grid, 4).unwrap(),
        ] {
            assert!(op.apply(&one).iter().all(|v| v.abs() < 1e-12));
        }
    }
}
