//! OLS and 2SLS on panel data with fixed effects, robust standard errors,
//! and weak-instrument diagnostics.

pub mod chisq;
mod linalg;
pub mod ols;
pub mod panel;
pub mod report;
pub mod tsls;

pub use chisq::chi_square_sf;
pub use ols::{fit_ols, Coefficient, OlsFit};
pub use panel::{build_design, Column, Design, PanelTable, RegressionSpec, Robust};
pub use tsls::{
    anderson_lm, cragg_donald_f, first_stage_f, fit_2sls, fit_ols_design, LmStatistic, TslsResult,
};
