//! Plain-text regression table: stage columns, coefficients with robust t in
//! parentheses, and the weak-instrument diagnostics.

use std::fmt::Write as _;

use super::tsls::TslsResult;

/// `***` p<0.01, `**` p<0.05, `*` p<0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.4}")
    }
}

const LABEL: usize = 36;
const COL: usize = 18;

fn row(out: &mut String, label: &str, first: &str, second: &str) {
    let _ = writeln!(out, "{label:<LABEL$}{first:>COL$}{second:>COL$}");
}

pub fn render_table(r: &TslsResult) -> String {
    let mut out = String::new();
    let rule = "-".repeat(LABEL + 2 * COL);
    let _ = writeln!(out, "{rule}");
    row(&mut out, "", "2SLS 1st stage", "2SLS 2nd stage");
    row(&mut out, "Dependent variable", &r.endogenous, &r.outcome);
    let _ = writeln!(out, "{rule}");
    for c in &r.first_stage {
        row(
            &mut out,
            &c.name,
            &format!("{}{}", num(c.estimate), stars(c.p_value)),
            "",
        );
        row(&mut out, "", &format!("({})", num(c.t_stat)), "");
    }
    let s = &r.second_stage;
    row(
        &mut out,
        &s.name,
        "",
        &format!("{}{}", num(s.estimate), stars(s.p_value)),
    );
    row(&mut out, "", "", &format!("({})", num(s.t_stat)));
    for c in r.controls.iter().filter(|c| !c.name.contains('=')) {
        row(
            &mut out,
            &c.name,
            "",
            &format!("{}{}", num(c.estimate), stars(c.p_value)),
        );
        row(&mut out, "", "", &format!("({})", num(c.t_stat)));
    }
    let mut factors: Vec<&str> = r
        .controls
        .iter()
        .filter_map(|c| c.name.split_once('=').map(|(f, _)| f))
        .collect();
    factors.dedup();
    for f in factors {
        row(&mut out, &format!("{f} fixed effects"), "yes", "yes");
    }
    let _ = writeln!(out, "{rule}");
    row(
        &mut out,
        "Observations",
        &r.n_obs.to_string(),
        &r.n_obs.to_string(),
    );
    row(
        &mut out,
        "Anderson canon. corr. LM statistic",
        "",
        &format!(
            "{}{}",
            num(r.anderson_lm.statistic),
            stars(r.anderson_lm.p_value)
        ),
    );
    row(
        &mut out,
        "Cragg-Donald Wald F statistic",
        "",
        &num(r.cragg_donald_f),
    );
    let _ = writeln!(out, "{rule}");
    let flavour = match r.robust {
        super::Robust::Hc1 => "Robust (HC1)",
        super::Robust::Classical => "Classical",
    };
    let _ = writeln!(
        out,
        "{flavour} t-statistics in parentheses. *** p<0.01, ** p<0.05, * p<0.1"
    );
    for n in &r.notes {
        let _ = writeln!(out, "Note: {n}");
    }
    out
}
