//! Small dense linear algebra kernels: LU solve with partial pivoting and a
//! column-pivoted Householder QR for rank-deficient least squares.
//!
//! Desk-scale only; everything is row-major `Vec<f64>`.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    /// `self * x` for a column vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[r] = acc;
        }
        y
    }
}

/// Solve `A x = b` in place by LU with partial pivoting. `a` is destroyed.
pub(crate) fn lu_solve(a: &mut Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return Err(Error::DimensionMismatch(
            "LU solve requires a square system".into(),
        ));
    }
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // Pivot search in column k.
        let mut piv = k;
        let mut best = a.at(k, k).abs();
        for r in k + 1..n {
            let v = a.at(r, k).abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Err(Error::SolveFailed(format!(
                "singular matrix at elimination step {k}"
            )));
        }
        if piv != k {
            for c in 0..n {
                let tmp = a.at(k, c);
                a.set(k, c, a.at(piv, c));
                a.set(piv, c, tmp);
            }
            x.swap(k, piv);
            perm.swap(k, piv);
        }
        let diag = a.at(k, k);
        for r in k + 1..n {
            let factor = a.at(r, k) / diag;
            if factor == 0.0 {
                continue;
            }
            a.set(r, k, 0.0);
            for c in k + 1..n {
                let v = a.at(r, c) - factor * a.at(k, c);
                a.set(r, c, v);
            }
            x[r] -= factor * x[k];
        }
    }

    // Back substitution.
    for k in (0..n).rev() {
        let mut acc = x[k];
        for c in k + 1..n {
            acc -= a.at(k, c) * x[c];
        }
        x[k] = acc / a.at(k, k);
    }
    Ok(x)
}

/// Least-squares solution of `A x ~ b` via Householder QR with column
/// pivoting; handles rank deficiency by truncating at the numerical rank.
///
/// Returns the basic solution together with the residual vector `b - A x`
/// computed against the untouched input matrix.
pub(crate) fn least_squares(a: &Mat, b: &[f64]) -> Result<LeastSquares> {
    let m = a.rows;
    let n = a.cols;
    if b.len() != m {
        return Err(Error::DimensionMismatch(
            "least squares rhs length mismatch".into(),
        ));
    }
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut colperm: Vec<usize> = (0..n).collect();
    // Squared column norms, updated as elimination proceeds.
    let mut colnorm: Vec<f64> = (0..n)
        .map(|c| (0..m).map(|row| r.at(row, c).powi(2)).sum())
        .collect();

    let steps = m.min(n);
    let mut rank = steps;
    let mut first_diag: f64 = 0.0;

    for k in 0..steps {
        // Column pivot: largest remaining norm.
        let (piv, _) = colnorm
            .iter()
            .enumerate()
            .skip(k)
            .fold((k, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if piv != k {
            for row in 0..m {
                let tmp = r.at(row, k);
                r.set(row, k, r.at(row, piv));
                r.set(row, piv, tmp);
            }
            colnorm.swap(k, piv);
            colperm.swap(k, piv);
        }

        // Householder vector for column k below row k.
        let norm: f64 = (k..m).map(|row| r.at(row, k).powi(2)).sum::<f64>().sqrt();
        if k == 0 {
            first_diag = norm;
        }
        if norm <= 1e-14 * first_diag.max(1e-300) {
            rank = k;
            break;
        }
        let alpha = if r.at(k, k) >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|row| r.at(row, k)).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in k..n {
                let dot: f64 = (k..m).map(|row| v[row - k] * r.at(row, c)).sum();
                let scale = 2.0 * dot / vnorm2;
                for row in k..m {
                    let val = r.at(row, c) - scale * v[row - k];
                    r.set(row, c, val);
                }
            }
            let dot: f64 = (k..m).map(|row| v[row - k] * qtb[row]).sum();
            let scale = 2.0 * dot / vnorm2;
            for row in k..m {
                qtb[row] -= scale * v[row - k];
            }
        }
        r.set(k, k, alpha);
        for row in k + 1..m {
            r.set(row, k, 0.0);
        }
        for c in k + 1..n {
            colnorm[c] -= r.at(k, c).powi(2);
            if colnorm[c] < 0.0 {
                colnorm[c] = 0.0;
            }
        }
        // Rank decision on the diagonal magnitude.
        if r.at(k, k).abs() <= 1e-12 * first_diag {
            rank = k;
            break;
        }
    }

    // Back substitution on the leading rank x rank block; free variables 0.
    let mut y = vec![0.0; n];
    for k in (0..rank).rev() {
        let mut acc = qtb[k];
        for c in k + 1..rank {
            acc -= r.at(k, c) * y[c];
        }
        y[k] = acc / r.at(k, k);
    }
    let mut x = vec![0.0; n];
    for (pos, &col) in colperm.iter().enumerate() {
        x[col] = y[pos];
    }

    let ax = a.mul_vec(&x);
    let residual: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    Ok(LeastSquares { x, residual, rank })
}

pub(crate) struct LeastSquares {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub rank: usize,
}
