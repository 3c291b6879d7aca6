//! Two-stage least squares with weak-instrument diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize, Serializer};

use super::chisq::chi_square_sf;
use super::linalg::{column_matrix, hc1_covariance, hcat, ThinQr};
use super::ols::{fit_ols, Coefficient, OlsFit};
use super::panel::{Design, Robust};
use crate::error::{Error, Result};

/// `1 − r²` at or below this is treated as a perfect first stage.
const PERFECT_FIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmStatistic {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(if *v > 0.0 { "inf" } else { "nan" })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TslsResult {
    pub outcome: String,
    pub endogenous: String,
    pub robust: Robust,
    /// Excluded-instrument coefficients from the regression of `A` on `[X Z]`.
    pub first_stage: Vec<Coefficient>,
    /// Homoskedastic F on the excluded instruments in the first stage.
    #[serde(serialize_with = "finite_or_inf")]
    pub first_stage_f: f64,
    pub second_stage: Coefficient,
    /// Coefficients on the exogenous regressors in the structural equation.
    pub controls: Vec<Coefficient>,
    pub n_obs: usize,
    pub n_dropped: usize,
    pub anderson_lm: LmStatistic,
    #[serde(serialize_with = "finite_or_inf")]
    pub cragg_donald_f: f64,
    /// Structural error variance `e'e / (n − k)` with `e = B − [A X] β̂`.
    pub sigma2: f64,
    pub notes: Vec<String>,
}

/// First-stage partial `r²` of `A` on the excluded instruments after
/// partialling out `X`. For one endogenous regressor this is the squared
/// canonical correlation between the residualised `A` and `Z`.
fn partial_r2(
    a: &DVector<f64>,
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    z_names: &[String],
    x_names: &[String],
) -> Result<f64> {
    let n = a.len();
    if z.nrows() != n || x.nrows() != n {
        return Err(Error::InvalidArgument(
            "A, Z and X must have the same number of rows".into(),
        ));
    }
    if z.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "at least one instrument is required".into(),
        ));
    }
    // Checks the joint rank of [X Z] so an instrument spanned by X is named.
    let names: Vec<String> = x_names.iter().chain(z_names).cloned().collect();
    ThinQr::new(&hcat(x, z), &names)?;

    let qx = ThinQr::new(x, x_names)?;
    let a_res = qx.annihilate(&column_matrix(a));
    let z_res = qx.annihilate(z);
    let ss = a_res.norm_squared();
    if ss <= 1e-24 * a.norm_squared().max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "endogenous regressor has no variation left after partialling out exogenous regressors"
                .into(),
        ));
    }
    let qz = ThinQr::new(&z_res, z_names)?;
    let explained = qz.project(&a_res).norm_squared();
    Ok((explained / ss).clamp(0.0, 1.0))
}

fn default_names(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|j| format!("{prefix}{j}")).collect()
}

/// Anderson canonical-correlation LM statistic `n · r²`, χ² with `L` df.
pub fn anderson_lm(a: &DVector<f64>, z: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<LmStatistic> {
    let r2 = partial_r2(
        a,
        z,
        x,
        &default_names("z", z.ncols()),
        &default_names("x", x.ncols()),
    )?;
    lm_from_r2(r2, a.len(), z.ncols())
}

fn lm_from_r2(r2: f64, n: usize, l: usize) -> Result<LmStatistic> {
    let statistic = n as f64 * r2;
    let df = l as u32;
    Ok(LmStatistic {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df)?,
    })
}

/// Cragg-Donald Wald F: `r² / (1 − r²) · (n − k_X − L) / L`.
///
/// A perfect first stage yields `+inf`.
pub fn cragg_donald_f(a: &DVector<f64>, z: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let r2 = partial_r2(
        a,
        z,
        x,
        &default_names("z", z.ncols()),
        &default_names("x", x.ncols()),
    )?;
    cd_from_r2(r2, a.len(), x.ncols(), z.ncols())
}

fn cd_from_r2(r2: f64, n: usize, kx: usize, l: usize) -> Result<f64> {
    if n <= kx + l {
        return Err(Error::Degenerate(format!(
            "{n} observations for {} first-stage regressors",
            kx + l
        )));
    }
    if 1.0 - r2 <= PERFECT_FIT_TOL {
        return Ok(f64::INFINITY);
    }
    Ok(r2 / (1.0 - r2) * (n - kx - l) as f64 / l as f64)
}

/// Homoskedastic first-stage F for the excluded instruments, from the
/// restricted (`A` on `X`) and unrestricted (`A` on `[X Z]`) residual sums of
/// squares.
pub fn first_stage_f(a: &DVector<f64>, z: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let (n, kx, l) = (a.len(), x.ncols(), z.ncols());
    let restricted = fit_ols(a, x, &default_names("x", kx), Robust::Classical)?;
    let w = hcat(x, z);
    let names: Vec<String> = default_names("x", kx)
        .into_iter()
        .chain(default_names("z", l))
        .collect();
    let unrestricted = fit_ols(a, &w, &names, Robust::Classical)?;
    if unrestricted.rss <= PERFECT_FIT_TOL * restricted.rss {
        return Ok(f64::INFINITY);
    }
    Ok(((restricted.rss - unrestricted.rss) / l as f64) / (unrestricted.rss / (n - kx - l) as f64))
}

/// OLS of the outcome on `[A X]`, the naive estimate 2SLS is compared to.
pub fn fit_ols_design(design: &Design, robust: Robust) -> Result<OlsFit> {
    let d = hcat(&column_matrix(&design.endogenous), &design.exog);
    let names: Vec<String> = std::iter::once(design.endogenous_name.clone())
        .chain(design.exog_names.iter().cloned())
        .collect();
    fit_ols(&design.outcome, &d, &names, robust)
}

/// Fits `B = β A + X γ + ε` instrumenting `A` with `Z`.
pub fn fit_2sls(design: &Design, robust: Robust) -> Result<TslsResult> {
    let n = design.n_obs();
    let (z, x) = (&design.instruments, &design.exog);
    let (kx, l) = (x.ncols(), z.ncols());
    if l == 0 {
        return Err(Error::InvalidArgument(
            "at least one instrument is required".into(),
        ));
    }
    let k = 1 + kx;
    if n <= kx + l || n <= k {
        return Err(Error::Degenerate(format!(
            "{n} observations for {} instruments and regressors",
            kx + l
        )));
    }

    let w = hcat(x, z);
    let w_names: Vec<String> = design
        .exog_names
        .iter()
        .chain(&design.instrument_names)
        .cloned()
        .collect();
    let qw = ThinQr::new(&w, &w_names)?;

    let d = hcat(&column_matrix(&design.endogenous), x);
    let d_names: Vec<String> = std::iter::once(design.endogenous_name.clone())
        .chain(design.exog_names.iter().cloned())
        .collect();
    let d_hat = qw.project(&d);
    let qd = ThinQr::new(&d_hat, &d_names)?;
    let beta = qd.solve(&design.outcome);
    // Structural residuals use the observed A, not the fitted one.
    let resid = &design.outcome - &d * &beta;
    let sigma2 = resid.norm_squared() / (n - k) as f64;
    let bread = qd.xtx_inv();
    let cov = match robust {
        Robust::Classical => &bread * sigma2,
        Robust::Hc1 => hc1_covariance(&d_hat, &resid, &bread),
    };
    let mut coefs = (0..k).map(|j| Coefficient::new(d_names[j].clone(), beta[j], cov[(j, j)]));
    let second_stage = coefs.next().expect("k >= 1");
    let controls: Vec<Coefficient> = coefs.collect();

    let first = fit_ols(&design.endogenous, &w, &w_names, robust)?;
    let first_stage: Vec<Coefficient> = first.coefficients[kx..].to_vec();

    let r2 = partial_r2(
        &design.endogenous,
        z,
        x,
        &design.instrument_names,
        &design.exog_names,
    )?;
    let anderson = lm_from_r2(r2, n, l)?;
    let cd = cd_from_r2(r2, n, kx, l)?;
    let fs_f = first_stage_f(&design.endogenous, z, x)?;

    let mut notes = Vec::new();
    for (j, name) in design.instrument_names.iter().enumerate() {
        if z.column(j) == design.endogenous.column(0) {
            notes.push(format!(
                "instrument `{name}` is identical to `{}`; the 2SLS estimate coincides with OLS",
                design.endogenous_name
            ));
        }
    }
    if cd.is_infinite() {
        notes.push("first stage fits perfectly; Cragg-Donald F reported as +inf".into());
    } else if cd < 10.0 {
        notes.push(format!(
            "Cragg-Donald F {cd:.3} is below 10; instruments may be weak"
        ));
    }

    Ok(TslsResult {
        outcome: design.outcome_name.clone(),
        endogenous: design.endogenous_name.clone(),
        robust,
        first_stage,
        first_stage_f: fs_f,
        second_stage,
        controls,
        n_obs: n,
        n_dropped: design.n_dropped,
        anderson_lm: anderson,
        cragg_donald_f: cd,
        sigma2,
        notes,
    })
}
