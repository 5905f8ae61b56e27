use std::fmt;
use std::path::Path;

use crate::error::{DidError, Result};

/// One non-intercept column of a design matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Raw(String),
    Square(String),
    Interaction(String, String),
}

impl Term {
    pub fn label(&self) -> String {
        match self {
            Term::Raw(a) => a.clone(),
            Term::Square(a) => format!("{a}^2"),
            Term::Interaction(a, b) => format!("{a}*{b}"),
        }
    }

    pub(crate) fn names(&self) -> Vec<&str> {
        match self {
            Term::Raw(a) | Term::Square(a) => vec![a],
            Term::Interaction(a, b) => vec![a, b],
        }
    }

    /// `a*b` and `b*a` are the same column, as are `a*a` and `a^2`.
    fn same_column(&self, other: &Term) -> bool {
        fn canon(t: &Term) -> (u8, &str, &str) {
            match t {
                Term::Raw(a) => (0, a, ""),
                Term::Square(a) => (1, a, a),
                Term::Interaction(a, b) if a == b => (1, a, a),
                Term::Interaction(a, b) if a <= b => (1, a, b),
                Term::Interaction(a, b) => (1, b, a),
            }
        }
        canon(self) == canon(other)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Raw(a) => write!(f, "raw {a}"),
            Term::Square(a) => write!(f, "square {a}"),
            Term::Interaction(a, b) => write!(f, "interact {a} {b}"),
        }
    }
}

/// Ordered list of covariate terms. The intercept is implicit and always
/// occupies column 0 of the resulting design.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CovariateSpec {
    terms: Vec<Term>,
}

impl CovariateSpec {
    pub fn intercept_only() -> Self {
        CovariateSpec::default()
    }

    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let mut spec = CovariateSpec::default();
        for t in terms {
            spec.push(t)?;
        }
        Ok(spec)
    }

    /// Raw linear terms for each name, in order.
    pub fn linear<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(names.iter().map(|n| Term::Raw(n.as_ref().to_string())).collect())
    }

    pub fn push(&mut self, term: Term) -> Result<()> {
        if self.terms.iter().any(|t| t.same_column(&term)) {
            return Err(DidError::DuplicateTerm(term.label()));
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn with(mut self, term: Term) -> Result<Self> {
        self.push(term)?;
        Ok(self)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Number of design columns including the intercept.
    pub fn n_columns(&self) -> usize {
        self.terms.len() + 1
    }

    /// Parses the line-oriented spec format:
    ///
    /// ```text
    /// # comment
    /// raw age
    /// square age
    /// interact age educ
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = CovariateSpec::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| DidError::SpecSyntax { line: idx + 1, message };
            let words: Vec<&str> = line.split_whitespace().collect();
            let term = match words.as_slice() {
                ["raw", a] => Term::Raw(a.to_string()),
                ["square", a] => Term::Square(a.to_string()),
                ["interact" | "interaction", a, b] => Term::Interaction(a.to_string(), b.to_string()),
                [kw, ..] if matches!(*kw, "raw" | "square" | "interact" | "interaction") => {
                    return Err(err(format!("wrong number of arguments for `{kw}`")))
                }
                [kw, ..] => return Err(err(format!("unknown term kind `{kw}`"))),
                [] => unreachable!(),
            };
            spec.push(term).map_err(|e| err(e.to_string()))?;
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DidError::io(path, e))?;
        Self::parse(&text)
    }
}

impl fmt::Display for CovariateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}
