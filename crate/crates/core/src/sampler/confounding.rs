use serde::{Deserialize, Serialize};

use crate::data::{CovariateRow, TabularDataset};
use crate::error::{Error, Result};

/// A designer-chosen treatment assignment rule `P*(T = 1 | C)`.
///
/// Serialized with a `kind` tag, e.g.
/// `{"kind": "piecewise", "covariate": "C", "zeta0": 0.85, "zeta1": 0.15}` or
/// `{"kind": "logistic", "intercept": -1.0, "terms": [{"vars": ["C"], "coef": 2.5}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConfoundingFunction {
    /// `zeta0` when the binary `covariate` is 0, `zeta1` when it is 1.
    Piecewise { covariate: String, zeta0: f64, zeta1: f64 },
    /// `expit(intercept + sum_k coef_k * prod(vars_k))`.
    Logistic {
        intercept: f64,
        #[serde(default)]
        terms: Vec<LogisticTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticTerm {
    pub vars: Vec<String>,
    pub coef: f64,
}

impl LogisticTerm {
    pub fn new(vars: &[&str], coef: f64) -> Self {
        Self {
            vars: vars.iter().map(|v| v.to_string()).collect(),
            coef,
        }
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ConfoundingFunction {
    pub fn piecewise(covariate: &str, zeta0: f64, zeta1: f64) -> Self {
        Self::Piecewise {
            covariate: covariate.to_string(),
            zeta0,
            zeta1,
        }
    }

    pub fn logistic(intercept: f64, terms: Vec<LogisticTerm>) -> Self {
        Self::Logistic { intercept, terms }
    }

    /// A function that ignores the covariates and returns `p` everywhere.
    pub fn constant(p: f64) -> Self {
        Self::Logistic {
            intercept: (p / (1.0 - p)).ln(),
            terms: Vec::new(),
        }
    }

    /// Structural checks that do not need data: parameters finite, piecewise
    /// levels strictly inside (0, 1), no treatment factor in any term.
    pub fn check(&self) -> Result<()> {
        match self {
            Self::Piecewise { zeta0, zeta1, .. } => {
                for z in [*zeta0, *zeta1] {
                    if !(z > 0.0 && z < 1.0) {
                        return Err(Error::Positivity {
                            value: z,
                            context: " (piecewise level)".into(),
                        });
                    }
                }
            }
            Self::Logistic { intercept, terms } => {
                if !intercept.is_finite() || terms.iter().any(|t| !t.coef.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite logistic coefficient".into()));
                }
                if let Some(t) = terms.iter().find(|t| t.vars.is_empty()) {
                    return Err(Error::InvalidArgument(format!(
                        "logistic term with coefficient {} has no variables",
                        t.coef
                    )));
                }
                if terms.iter().flat_map(|t| &t.vars).any(|v| v == crate::terms::TREATMENT) {
                    return Err(Error::InvalidArgument(
                        "a confounding function cannot depend on the treatment".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// True when the function does not depend on the covariates, so sampling
    /// with it induces no dependence between treatment and covariates.
    pub fn is_trivial(&self) -> bool {
        match self {
            Self::Piecewise { zeta0, zeta1, .. } => zeta0 == zeta1,
            Self::Logistic { terms, .. } => terms.iter().all(|t| t.coef == 0.0),
        }
    }

    /// Covariate names the function reads.
    pub fn covariates(&self) -> Vec<&str> {
        let mut names: Vec<&str> = match self {
            Self::Piecewise { covariate, .. } => vec![covariate.as_str()],
            Self::Logistic { terms, .. } => terms.iter().flat_map(|t| t.vars.iter().map(String::as_str)).collect(),
        };
        names.sort_unstable();
        names.dedup();
        names
    }

    /// `P*(T = 1 | C = row)`, strictly inside (0, 1).
    pub fn evaluate<R: CovariateRow + ?Sized>(&self, row: &R) -> Result<f64> {
        let lookup = |name: &str| row.value(name).ok_or_else(|| Error::MissingCovariate(name.to_string()));
        let p = match self {
            Self::Piecewise {
                covariate,
                zeta0,
                zeta1,
            } => piecewise_level(lookup(covariate)?, *zeta0, *zeta1, covariate)?,
            Self::Logistic { intercept, terms } => {
                let mut eta = *intercept;
                for term in terms {
                    let mut prod = term.coef;
                    for v in &term.vars {
                        prod *= lookup(v)?;
                    }
                    eta += prod;
                }
                expit(eta)
            }
        };
        positive(p, "")
    }

    /// `P*(T = 1 | C_i)` for every row of `d`.
    pub fn evaluate_column(&self, d: &TabularDataset) -> Result<Vec<f64>> {
        self.check()?;
        let n = d.n_rows();
        let out = match self {
            Self::Piecewise {
                covariate,
                zeta0,
                zeta1,
            } => d
                .covariate(covariate)?
                .iter()
                .map(|&c| piecewise_level(c, *zeta0, *zeta1, covariate))
                .collect::<Result<Vec<_>>>()?,
            Self::Logistic { intercept, terms } => {
                let mut eta = vec![*intercept; n];
                for term in terms {
                    let mut prod = vec![term.coef; n];
                    for v in &term.vars {
                        let col = d.covariate(v)?;
                        prod.iter_mut().zip(col).for_each(|(p, &x)| *p *= x);
                    }
                    eta.iter_mut().zip(&prod).for_each(|(e, p)| *e += p);
                }
                eta.into_iter().map(expit).collect()
            }
        };
        for (i, &p) in out.iter().enumerate() {
            positive(p, &format!(" at row {i}"))?;
        }
        Ok(out)
    }
}

fn piecewise_level(c: f64, zeta0: f64, zeta1: f64, name: &str) -> Result<f64> {
    if c == 0.0 {
        Ok(zeta0)
    } else if c == 1.0 {
        Ok(zeta1)
    } else {
        Err(Error::InvalidArgument(format!(
            "piecewise covariate `{name}` must be binary, found {c}"
        )))
    }
}

fn positive(p: f64, context: &str) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(Error::Positivity {
            value: p,
            context: context.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_levels() {
        let f = ConfoundingFunction::piecewise("C", 0.85, 0.15);
        assert_eq!(f.evaluate(&[("C", 1.0)]).unwrap(), 0.15);
        assert_eq!(f.evaluate(&[("C", 0.0)]).unwrap(), 0.85);
        assert!(!f.is_trivial());
        let flat = ConfoundingFunction::piecewise("C", 0.5, 0.5);
        assert_eq!(flat.evaluate(&[("C", 1.0)]).unwrap(), 0.5);
        assert!(flat.is_trivial());
    }

    #[test]
    fn logistic_values() {
        let f = ConfoundingFunction::logistic(-1.0, vec![LogisticTerm::new(&["C"], 2.5)]);
        assert!((f.evaluate(&[("C", 0.0)]).unwrap() - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((f.evaluate(&[("C", 1.0)]).unwrap() - 0.817_574_476_193_643_7).abs() < 1e-12);
        let zero = ConfoundingFunction::logistic(0.0, vec![LogisticTerm::new(&["C"], 0.0)]);
        assert_eq!(zero.evaluate(&[("C", 3.7)]).unwrap(), 0.5);
        assert!(zero.is_trivial());
    }

    #[test]
    fn missing_covariate_faults() {
        let f = ConfoundingFunction::piecewise("C", 0.85, 0.15);
        assert_eq!(f.evaluate(&[("D", 1.0)]), Err(Error::MissingCovariate("C".into())));
    }

    #[test]
    fn positivity_faults() {
        let f = ConfoundingFunction::logistic(0.0, vec![LogisticTerm::new(&["C"], 100.0)]);
        assert!(matches!(f.evaluate(&[("C", 1.0)]), Err(Error::Positivity { .. })));
        assert!(ConfoundingFunction::piecewise("C", 1.0, 0.2).check().is_err());
        assert!(ConfoundingFunction::piecewise("C", 0.0, 0.2).check().is_err());
    }

    #[test]
    fn constant_function() {
        let f = ConfoundingFunction::constant(0.3);
        assert!((f.evaluate(&[("C", 1.0)]).unwrap() - 0.3).abs() < 1e-15);
        assert!(f.is_trivial());
    }

    #[test]
    fn config_json_shapes() {
        let p: ConfoundingFunction =
            serde_json::from_str(r#"{"kind": "piecewise", "covariate": "C", "zeta0": 0.85, "zeta1": 0.15}"#).unwrap();
        assert_eq!(p, ConfoundingFunction::piecewise("C", 0.85, 0.15));
        let l: ConfoundingFunction =
            serde_json::from_str(r#"{"kind": "logistic", "intercept": -1.0, "terms": [{"vars": ["C"], "coef": 2.5}]}"#)
                .unwrap();
        assert_eq!(
            l,
            ConfoundingFunction::logistic(-1.0, vec![LogisticTerm::new(&["C"], 2.5)])
        );
    }

    #[test]
    fn expit_is_stable() {
        assert_eq!(expit(0.0), 0.5);
        assert!(expit(-800.0) >= 0.0 && expit(800.0) <= 1.0);
        assert!((expit(1.5) + expit(-1.5) - 1.0).abs() < 1e-15);
    }
}
