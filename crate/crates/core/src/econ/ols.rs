use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chisq::two_sided_normal_p;
use super::linalg::{hc1_covariance, ThinQr};
use super::panel::Robust;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    /// Two-sided, normal reference distribution.
    pub p_value: f64,
}

impl Coefficient {
    pub(crate) fn new(name: String, estimate: f64, variance: f64) -> Self {
        let std_error = variance.max(0.0).sqrt();
        let t_stat = estimate / std_error;
        Self {
            name,
            estimate,
            std_error,
            t_stat,
            p_value: two_sided_normal_p(t_stat),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<Coefficient>,
    pub n_obs: usize,
    pub rss: f64,
    /// `rss / (n − k)`.
    pub sigma2: f64,
    pub robust: Robust,
}

impl OlsFit {
    pub fn get(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

/// Least squares of `y` on `x` through a thin QR factorisation.
pub fn fit_ols(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    robust: Robust,
) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "y has {} rows, X has {n}",
            y.len()
        )));
    }
    if n <= k {
        return Err(Error::Degenerate(format!(
            "{n} observations for {k} regressors"
        )));
    }
    let qr = ThinQr::new(x, names)?;
    let beta = qr.solve(y);
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    let sigma2 = rss / (n - k) as f64;
    let bread = qr.xtx_inv();
    let cov = match robust {
        Robust::Classical => bread * sigma2,
        Robust::Hc1 => hc1_covariance(x, &resid, &bread),
    };
    let coefficients = (0..k)
        .map(|j| {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
            Coefficient::new(name, beta[j], cov[(j, j)])
        })
        .collect();
    Ok(OlsFit {
        coefficients,
        n_obs: n,
        rss,
        sigma2,
        robust,
    })
}
