//! Product terms over named variables, e.g. `C`, `T*C`, `T*C1*C2`.
//!
//! The name `T` is reserved for the treatment indicator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};

pub const TREATMENT: &str = "T";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Monomial {
    factors: Vec<String>,
}

impl Monomial {
    pub fn new<I, S>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let factors: Vec<String> = factors.into_iter().map(Into::into).collect();
        if factors.is_empty() {
            return Err(Error::InvalidArgument("empty product term".into()));
        }
        if let Some(bad) = factors.iter().find(|f| !is_identifier(f)) {
            return Err(Error::InvalidArgument(format!("bad variable name `{bad}` in term")));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[String] {
        &self.factors
    }

    pub fn involves_treatment(&self) -> bool {
        self.factors.iter().any(|f| f == TREATMENT)
    }

    /// The covariate factors, with the treatment removed.
    pub fn covariate_factors(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(String::as_str).filter(|f| *f != TREATMENT)
    }

    /// Evaluate the term on every row of `d`, substituting `treatment` for `T`
    /// when given and the observed treatment otherwise.
    pub fn evaluate_column(&self, d: &TabularDataset, treatment: Option<f64>) -> Result<Vec<f64>> {
        let mut out = vec![1.0; d.n_rows()];
        for factor in &self.factors {
            if factor == TREATMENT {
                match treatment {
                    Some(t) => out.iter_mut().for_each(|v| *v *= t),
                    None => out.iter_mut().zip(d.treatment()).for_each(|(v, &t)| *v *= f64::from(t)),
                }
            } else {
                let col = d.covariate(factor)?;
                out.iter_mut().zip(col).for_each(|(v, &x)| *v *= x);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.factors.join("*"))
    }
}

impl FromStr for Monomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.split(['*', '·', ':']).map(str::trim))
    }
}

impl TryFrom<String> for Monomial {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Monomial> for String {
    fn from(m: Monomial) -> String {
        m.to_string()
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}
