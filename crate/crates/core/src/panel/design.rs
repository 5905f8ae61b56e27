use nalgebra::DMatrix;

use crate::error::{DidError, Result};
use crate::numopt::first_dependent_column;

use super::{CovariateSpec, PanelDataset, Term};

/// Relative pivot tolerance for the full-rank check.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Intercept-first covariate matrix with column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    column_names: Vec<String>,
}

impl DesignMatrix {
    /// Wraps a raw matrix after checking the intercept column and rank.
    pub fn from_matrix(x: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, k) = x.shape();
        if k == 0 || column_names.len() != k {
            return Err(DidError::InvalidPanel(format!(
                "design needs k >= 1 columns with one label each (k = {k}, labels = {})",
                column_names.len()
            )));
        }
        if n < k {
            return Err(DidError::TooFewRows { n, k });
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return Err(DidError::InvalidPanel("column 0 must be the all-ones intercept".into()));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(DidError::OutOfDomain(format!("non-finite design entry {v}")));
        }
        if let Some(dependent) = first_dependent_column(&x, RANK_TOLERANCE) {
            return Err(DidError::RankDeficient { column: column_names[dependent].clone() });
        }
        Ok(DesignMatrix { x, column_names })
    }

    /// Intercept-only design for `n` units.
    pub fn intercept(n: usize) -> Self {
        DesignMatrix { x: DMatrix::from_element(n, 1, 1.0), column_names: vec!["(intercept)".into()] }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// `1 + max_j |mean of column j|`, the scale used by convergence tolerances.
    pub fn scale(&self) -> f64 {
        let n = self.nrows() as f64;
        1.0 + self
            .x
            .column_iter()
            .map(|c| (c.sum() / n).abs())
            .fold(0.0, f64::max)
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        DesignMatrix { x: self.x.select_rows(order), column_names: self.column_names.clone() }
    }
}

pub fn build_design(ds: &PanelDataset, spec: &CovariateSpec) -> Result<DesignMatrix> {
    for term in spec.terms() {
        for name in term.names() {
            if ds.covariate(name).is_none() {
                return Err(DidError::UnknownTerm { term: term.to_string(), name: name.to_string() });
            }
        }
    }
    let n = ds.n();
    let k = spec.n_columns();
    if n < k {
        return Err(DidError::TooFewRows { n, k });
    }

    let col = |name: &str| ds.covariate(name).expect("resolved above");
    let mut x = DMatrix::from_element(n, k, 1.0);
    for (j, term) in spec.terms().iter().enumerate() {
        let mut dst = x.column_mut(j + 1);
        match term {
            Term::Raw(a) => dst.iter_mut().zip(col(a)).for_each(|(o, v)| *o = *v),
            Term::Square(a) => dst.iter_mut().zip(col(a)).for_each(|(o, v)| *o = v * v),
            Term::Interaction(a, b) => dst
                .iter_mut()
                .zip(col(a).iter().zip(col(b)))
                .for_each(|(o, (u, v))| *o = u * v),
        }
    }
    let mut names = vec!["(intercept)".to_string()];
    names.extend(spec.terms().iter().map(Term::label));
    DesignMatrix::from_matrix(x, names)
}
