//! Two-period panel data: the dataset model, CSV ingestion, the covariate
//! specification language and design-matrix construction.

mod covariates;
mod csv_io;
mod design;
mod overlap;

pub use covariates::{CovariateSpec, Term};
pub use csv_io::{load_csv, read_csv, write_csv, ColumnMap};
pub use design::{build_design, DesignMatrix, RANK_TOLERANCE};
pub use overlap::{overlap_report, OverlapReport, EXTREME_PROPENSITY};

use crate::error::{DidError, Result};

/// Per-unit pre/post outcomes, treatment indicator and raw covariates.
///
/// Construction checks lengths and finiteness. Both treatment groups being
/// non-empty is checked separately by [`PanelDataset::check_groups`] because
/// loading a file and estimating on it are separate steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    y0: Vec<f64>,
    y1: Vec<f64>,
    d: Vec<bool>,
    covariates: Vec<(String, Vec<f64>)>,
}

impl PanelDataset {
    pub fn new(
        y0: Vec<f64>,
        y1: Vec<f64>,
        d: Vec<bool>,
        covariates: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let n = y0.len();
        if n < 2 {
            return Err(DidError::InvalidPanel(format!("need at least 2 units, got {n}")));
        }
        if y1.len() != n || d.len() != n {
            return Err(DidError::InvalidPanel(format!(
                "length mismatch: y0 has {n}, y1 has {}, d has {}",
                y1.len(),
                d.len()
            )));
        }
        check_finite("y0", &y0)?;
        check_finite("y1", &y1)?;
        for (idx, (name, col)) in covariates.iter().enumerate() {
            if col.len() != n {
                return Err(DidError::InvalidPanel(format!(
                    "covariate `{name}` has {} values, expected {n}",
                    col.len()
                )));
            }
            if covariates[..idx].iter().any(|(other, _)| other == name) {
                return Err(DidError::InvalidPanel(format!("duplicate covariate `{name}`")));
            }
            check_finite(name, col)?;
        }
        Ok(PanelDataset { y0, y1, d, covariates })
    }

    pub fn n(&self) -> usize {
        self.y0.len()
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn d(&self) -> &[bool] {
        &self.d
    }

    /// Outcome evolution `y1 - y0`.
    pub fn delta_y(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect()
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    pub fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.iter().map(|(n, _)| n.as_str())
    }

    pub fn covariates(&self) -> &[(String, Vec<f64>)] {
        &self.covariates
    }

    pub fn n_treated(&self) -> usize {
        self.d.iter().filter(|&&t| t).count()
    }

    /// Fails unless both the treated and the comparison group are non-empty.
    pub fn check_groups(&self) -> Result<()> {
        check_groups(&self.d)
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        PanelDataset::new(
            pick(&self.y0),
            pick(&self.y1),
            order.iter().map(|&i| self.d[i]).collect(),
            self.covariates
                .iter()
                .map(|(n, c)| (n.clone(), pick(c)))
                .collect(),
        )
    }
}

pub(crate) fn check_groups(d: &[bool]) -> Result<()> {
    if !d.iter().any(|&t| t) {
        return Err(DidError::EmptyGroup("treated"));
    }
    if d.iter().all(|&t| t) {
        return Err(DidError::EmptyGroup("control"));
    }
    Ok(())
}

fn check_finite(name: &str, col: &[f64]) -> Result<()> {
    match col.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(DidError::NonFiniteValue {
            column: name.to_string(),
            row: row + 1,
            value: col[row].to_string(),
        }),
        None => Ok(()),
    }
}
