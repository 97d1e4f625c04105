//! Dense helpers for the small (p ≤ ~25) normal-equation systems used by
//! calibration and regression fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(cols: usize) -> Self {
        Self { cols, data: Vec::new() }
    }

    pub fn with_capacity(cols: usize, rows: usize) -> Self {
        Self {
            cols,
            data: Vec::with_capacity(cols * rows),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut d = Self::with_capacity(cols, rows.len());
        for r in rows {
            d.push(r);
        }
        d
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width");
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Σ w_i x_i x_iᵀ.
    pub fn weighted_gram(&self, w: &[f64]) -> DMatrix<f64> {
        let p = self.cols;
        let mut g = vec![0.0; p * p];
        for (row, &wi) in self.iter_rows().zip(w) {
            if wi == 0.0 {
                continue;
            }
            for a in 0..p {
                let s = wi * row[a];
                if s == 0.0 {
                    continue;
                }
                for b in a..p {
                    g[a * p + b] += s * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[a * p + b] = g[b * p + a];
            }
        }
        DMatrix::from_row_slice(p, p, &g)
    }

    /// Σ w_i v_i x_i.
    pub fn weighted_cross(&self, w: &[f64], v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.cols);
        for ((row, &wi), &vi) in self.iter_rows().zip(w).zip(v) {
            let s = wi * vi;
            if s == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(row) {
                *o += s * x;
            }
        }
        out
    }

    #[inline]
    pub fn dot_row(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum()
    }
}

/// Relative pivot threshold below which a column counts as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Solves the symmetric positive semi-definite system `a x = b` by LU with
/// partial pivoting after diagonal equilibration. A pivot below
/// [`RANK_TOL`] reports the offending dimension.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let p = a.nrows();
    if p == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut scale = DVector::zeros(p);
    for j in 0..p {
        let d = a[(j, j)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Singular { dimension: j });
        }
        scale[j] = 1.0 / d.sqrt();
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| a[(i, j)] * scale[i] * scale[j]);
    let lu = scaled.clone().lu();
    // Cholesky pivots of the equilibrated matrix flag the first column that
    // earlier columns explain
    let mut l = DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        let mut d = scaled[(k, k)];
        for m in 0..k {
            d -= l[(k, m)] * l[(k, m)];
        }
        if !(d > RANK_TOL) {
            return Err(Error::Singular { dimension: k });
        }
        let dk = d.sqrt();
        l[(k, k)] = dk;
        for i in k + 1..p {
            let mut v = scaled[(i, k)];
            for m in 0..k {
                v -= l[(i, m)] * l[(k, m)];
            }
            l[(i, k)] = v / dk;
        }
    }
    let rhs = b.component_mul(&scale);
    let x = lu.solve(&rhs).ok_or(Error::Singular { dimension: p - 1 })?;
    Ok(x.component_mul(&scale))
}

/// Weighted least squares of `y` on the design; returns the coefficients.
pub fn weighted_least_squares(x: &Design, y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let g = x.weighted_gram(w);
    let c = x.weighted_cross(w, y);
    Ok(solve_symmetric(&g, &c)?.iter().copied().collect())
}

/// Indices of columns that vary across the rows with positive weight;
/// column 0 (the intercept) is always kept.
pub fn varying_columns(rows: &[Vec<f64>], w: &[f64]) -> Vec<usize> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width)
        .filter(|&c| {
            c == 0 || {
                let mut vals = rows.iter().zip(w).filter(|(_, wi)| **wi > 0.0).map(|(r, _)| r[c]);
                let first = vals.next();
                first.is_some_and(|f| vals.any(|v| v != f))
            }
        })
        .collect()
}

/// Design restricted to the given columns of full-width rows.
pub fn select_columns(rows: &[Vec<f64>], columns: &[usize]) -> Design {
    let mut x = Design::with_capacity(columns.len(), rows.len());
    let mut buf = vec![0.0; columns.len()];
    for r in rows {
        for (b, &c) in buf.iter_mut().zip(columns) {
            *b = r[c];
        }
        x.push(&buf);
    }
    x
}
