//! Thin QR helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative size of `|R_jj|` against the column norm below which a column is
/// treated as lying in the span of its predecessors.
const RANK_TOL: f64 = 1e-10;

/// Thin QR factorisation `X = Q R` of a full-column-rank matrix.
pub(crate) struct ThinQr {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl ThinQr {
    /// Factorises `x`; `names` labels the columns for rank errors.
    pub fn new(x: &DMatrix<f64>, names: &[String]) -> Result<Self> {
        let (n, k) = x.shape();
        if k == 0 {
            return Ok(Self {
                q: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
            });
        }
        if n < k {
            return Err(Error::Degenerate(format!(
                "{n} rows cannot identify {k} columns"
            )));
        }
        let qr = x.clone().qr();
        let r = qr.r();
        for j in 0..k {
            let norm = x.column(j).norm();
            if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
                return Err(Error::Singular {
                    column: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
                });
            }
        }
        Ok(Self { q: qr.q(), r })
    }

    /// Least-squares coefficients for `y` (back substitution on `R`).
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .expect("R has a non-zero diagonal")
    }

    /// `(X'X)^{-1} = R^{-1} R^{-T}`.
    pub fn xtx_inv(&self) -> DMatrix<f64> {
        let k = self.r.ncols();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("R has a non-zero diagonal");
        &r_inv * r_inv.transpose()
    }

    /// Orthogonal projection of each column of `m` onto the column space.
    pub fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.q * self.q.tr_mul(m)
    }

    /// Residuals of each column of `m` after projection.
    pub fn annihilate(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m - self.project(m)
    }
}

/// `[a | b]`.
pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let (n, ka, kb) = (a.nrows(), a.ncols(), b.ncols());
    DMatrix::from_fn(
        n,
        ka + kb,
        |i, j| if j < ka { a[(i, j)] } else { b[(i, j - ka)] },
    )
}

pub(crate) fn column_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// `bread · (Σ e_i² x_i x_i') · bread · n / (n − k)`.
pub(crate) fn hc1_covariance(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    bread: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let mut scaled = x.clone();
    for (mut row, e) in scaled.row_iter_mut().zip(resid.iter()) {
        row *= *e;
    }
    let meat = scaled.tr_mul(&scaled);
    bread * meat * bread * (n as f64 / (n - k) as f64)
}
