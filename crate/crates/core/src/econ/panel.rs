//! Panel data tables, regression specs, and design-matrix construction.

use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    /// Missing cells are `NaN`.
    Numeric(Vec<f64>),
    /// Missing cells are empty strings.
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell_string(&self, row: usize) -> Option<String> {
        match self {
            Column::Numeric(v) => v[row].is_finite().then(|| v[row].to_string()),
            Column::Text(v) => (!v[row].is_empty()).then(|| v[row].clone()),
        }
    }
}

/// Rectangular table of named columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PanelTable {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "NaN" | "nan" | "." | "null")
}

impl PanelTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_column(mut self, name: impl Into<String>, column: Column) -> Result<Self> {
        self.push_column(name, column)?;
        Ok(self)
    }

    pub fn push_column(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::InvalidArgument(format!("duplicate column `{name}`")));
        }
        if !self.names.is_empty() && column.len() != self.n_rows {
            return Err(Error::InvalidArgument(format!(
                "column `{name}` has {} rows, table has {}",
                column.len(),
                self.n_rows
            )));
        }
        self.n_rows = column.len();
        self.names.push(name);
        self.columns.push(column);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Reads a CSV with a header row. A column is numeric when every
    /// non-missing cell parses as a number; non-finite numbers count as
    /// missing.
    pub fn read_csv<R: Read>(input: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(source, 1, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::parse(source, line, e.to_string())
            })?;
            for (col, cell) in raw.iter_mut().zip(rec.iter()) {
                col.push(cell.trim().to_string());
            }
        }
        let mut table = PanelTable::new();
        for (name, cells) in headers.into_iter().zip(raw) {
            let parsed: Option<Vec<f64>> = cells
                .iter()
                .map(|c| {
                    if is_missing_token(c) {
                        Some(f64::NAN)
                    } else {
                        c.parse::<f64>()
                            .ok()
                            .map(|v| if v.is_finite() { v } else { f64::NAN })
                    }
                })
                .collect();
            let column = match parsed {
                Some(v) => Column::Numeric(v),
                None => Column::Text(
                    cells
                        .into_iter()
                        .map(|c| {
                            if is_missing_token(&c) {
                                String::new()
                            } else {
                                c
                            }
                        })
                        .collect(),
                ),
            };
            table.push_column(name, column)?;
        }
        Ok(table)
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        Self::read_csv(
            std::fs::File::open(p).map_err(Error::io_at(p))?,
            &p.display().to_string(),
        )
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names).map_err(csv_io)?;
        for row in 0..self.n_rows {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|c| c.cell_string(row).unwrap_or_default())
                .collect();
            w.write_record(&cells).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Robust {
    #[serde(rename = "none")]
    Classical,
    #[default]
    #[serde(rename = "HC1", alias = "hc1")]
    Hc1,
}

impl std::str::FromStr for Robust {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "classical" => Ok(Robust::Classical),
            "HC1" | "hc1" => Ok(Robust::Hc1),
            other => Err(Error::InvalidArgument(format!(
                "unknown covariance flavour `{other}`"
            ))),
        }
    }
}

/// Column roles for a single-endogenous-regressor IV model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub outcome: String,
    pub endogenous: String,
    pub instruments: Vec<String>,
    #[serde(default)]
    pub controls: Vec<String>,
    #[serde(default)]
    pub fixed_effects: Vec<String>,
    #[serde(default)]
    pub robust: Robust,
}

impl RegressionSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn validate(&self, panel: &PanelTable) -> Result<()> {
        if self.instruments.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one instrument is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        // An instrument equal to the endogenous column is allowed: 2SLS then
        // reproduces OLS, which the result notes.
        let all = [&self.outcome, &self.endogenous]
            .into_iter()
            .chain(self.instruments.iter().filter(|z| **z != self.endogenous))
            .chain(&self.controls)
            .chain(&self.fixed_effects);
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "column `{name}` is used twice in the spec"
                )));
            }
            panel.column(name)?;
        }
        Ok(())
    }
}

/// Matrices for one fit, after listwise deletion.
#[derive(Clone, Debug)]
pub struct Design {
    pub outcome: DVector<f64>,
    pub endogenous: DVector<f64>,
    /// Excluded instruments, one column each.
    pub instruments: DMatrix<f64>,
    /// Intercept, controls, then fixed-effect dummies.
    pub exog: DMatrix<f64>,
    pub outcome_name: String,
    pub endogenous_name: String,
    pub instrument_names: Vec<String>,
    pub exog_names: Vec<String>,
    pub n_dropped: usize,
}

impl Design {
    pub fn n_obs(&self) -> usize {
        self.outcome.len()
    }

    /// Design without fixed effects or controls beyond an intercept.
    pub fn from_vectors(
        outcome: Vec<f64>,
        endogenous: Vec<f64>,
        instruments: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = outcome.len();
        if endogenous.len() != n || instruments.iter().any(|z| z.len() != n) {
            return Err(Error::InvalidArgument(
                "vectors must have equal length".into(),
            ));
        }
        let l = instruments.len();
        Ok(Self {
            outcome: DVector::from_vec(outcome),
            endogenous: DVector::from_vec(endogenous),
            instruments: DMatrix::from_fn(n, l, |i, j| instruments[j][i]),
            exog: DMatrix::from_element(n, 1, 1.0),
            outcome_name: "b".into(),
            endogenous_name: "a".into(),
            instrument_names: (0..l)
                .map(|j| {
                    if l == 1 {
                        "z".into()
                    } else {
                        format!("z{}", j + 1)
                    }
                })
                .collect(),
            exog_names: vec!["const".into()],
            n_dropped: 0,
        })
    }
}

fn numeric<'a>(panel: &'a PanelTable, name: &str) -> Result<&'a [f64]> {
    match panel.column(name)? {
        Column::Numeric(v) => Ok(v),
        Column::Text(_) => Err(Error::InvalidArgument(format!(
            "column `{name}` is not numeric"
        ))),
    }
}

/// Distinct levels in deterministic order: numeric order when every level is
/// a number, lexicographic otherwise.
fn sorted_levels(cells: &[Option<String>]) -> Vec<String> {
    let distinct: BTreeSet<&String> = cells.iter().flatten().collect();
    let mut levels: Vec<String> = distinct.into_iter().cloned().collect();
    let as_num: Option<Vec<f64>> = levels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if let Some(nums) = as_num {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(levels).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels = paired.into_iter().map(|(_, l)| l).collect();
    }
    levels
}

/// Builds `[B, A, Z, X]` with `X = [const, controls, dummies]`; the first
/// level of each factor is the omitted base. Rows missing any required value
/// are dropped and counted.
pub fn build_design(panel: &PanelTable, spec: &RegressionSpec) -> Result<Design> {
    spec.validate(panel)?;
    let n = panel.n_rows();

    let b = numeric(panel, &spec.outcome)?;
    let a = numeric(panel, &spec.endogenous)?;
    let zs: Vec<&[f64]> = spec
        .instruments
        .iter()
        .map(|c| numeric(panel, c))
        .collect::<Result<_>>()?;
    let cs: Vec<&[f64]> = spec
        .controls
        .iter()
        .map(|c| numeric(panel, c))
        .collect::<Result<_>>()?;
    let fes: Vec<Vec<Option<String>>> = spec
        .fixed_effects
        .iter()
        .map(|c| {
            let col = panel.column(c)?;
            Ok((0..n).map(|r| col.cell_string(r)).collect())
        })
        .collect::<Result<_>>()?;

    let keep: Vec<usize> = (0..n)
        .filter(|&r| {
            b[r].is_finite()
                && a[r].is_finite()
                && zs.iter().chain(&cs).all(|c| c[r].is_finite())
                && fes.iter().all(|f| f[r].is_some())
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "no complete rows remain after dropping missing values".into(),
        ));
    }

    let mut exog_names = vec!["const".to_string()];
    let mut exog_cols: Vec<Vec<f64>> = vec![vec![1.0; keep.len()]];
    for (name, c) in spec.controls.iter().zip(&cs) {
        exog_names.push(name.clone());
        exog_cols.push(keep.iter().map(|&r| c[r]).collect());
    }
    for (name, cells) in spec.fixed_effects.iter().zip(&fes) {
        let kept: Vec<Option<String>> = keep.iter().map(|&r| cells[r].clone()).collect();
        let levels = sorted_levels(&kept);
        if levels.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "fixed effect `{name}` has a single level; its dummies would be empty"
            )));
        }
        for level in &levels[1..] {
            exog_names.push(format!("{name}={level}"));
            exog_cols.push(
                kept.iter()
                    .map(|c| {
                        if c.as_deref() == Some(level.as_str()) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
        }
    }

    let m = keep.len();
    let take = |v: &[f64]| DVector::from_iterator(m, keep.iter().map(|&r| v[r]));
    Ok(Design {
        outcome: take(b),
        endogenous: take(a),
        instruments: DMatrix::from_fn(m, zs.len(), |i, j| zs[j][keep[i]]),
        exog: DMatrix::from_fn(m, exog_cols.len(), |i, j| exog_cols[j][i]),
        outcome_name: spec.outcome.clone(),
        endogenous_name: spec.endogenous.clone(),
        instrument_names: spec.instruments.clone(),
        exog_names,
        n_dropped: n - m,
    })
}
