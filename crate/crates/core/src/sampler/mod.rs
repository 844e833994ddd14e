//! Subsampling an RCT into a confounded observational dataset.
//!
//! [`rct_rejection_sample`] keeps row `i` with probability
//! `P*(T = t_i | C_i) / (P̂(T = t_i) · M)`. The acceptance ratio is the
//! likelihood ratio between the target `P(C) P*(T|C) P(Y|T,C)` and the RCT
//! distribution `P(C) P(T) P(Y|T,C)`, so the retained rows keep the RCT's
//! covariate marginal and outcome mechanism while treatment now depends on
//! the covariates.
//!
//! [`selection_sample`] is the older selection scheme: draw `B_i ~
//! Bernoulli(f(C_i))` and keep the row when `B_i = t_i`. Its output is the
//! RCT conditioned on selection, which shifts `P(C)` whenever `P(T = 1) ≠ 1/2`.

mod confounding;

pub use confounding::{expit, ConfoundingFunction, LogisticTerm};

use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Slack allowed when checking that acceptance probabilities do not exceed 1.
pub const ACCEPTANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Rejection,
    /// Keep a row when a Bernoulli(f(c)) draw equals its treatment. The
    /// config name is fixed by the CLI interface.
    #[serde(rename = "gentzel")]
    Selection,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rejection => "rejection",
            Self::Selection => "gentzel",
        }
    }

    pub fn sample(self, rct: &TabularDataset, f: &ConfoundingFunction, rng: &mut SeededRng) -> Result<SamplerReport> {
        match self {
            Self::Rejection => rct_rejection_sample(rct, f, rng),
            Self::Selection => selection_sample(rct, f, rng),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerReport {
    pub output: TabularDataset,
    pub n_in: usize,
    pub n_out: usize,
    /// The likelihood-ratio bound; `None` for the selection sampler.
    pub m_bound: Option<f64>,
    pub acceptance_rate: f64,
    /// Probability with which each input row was kept.
    pub acceptance_probabilities: Vec<f64>,
    /// Input indices of the kept rows, ascending.
    pub retained: Vec<usize>,
}

/// Empirical `(P̂(T=0), P̂(T=1))`, failing if either arm is empty.
pub fn arm_fractions(d: &TabularDataset) -> Result<[f64; 2]> {
    d.require_both_arms()?;
    let [n0, n1] = d.arm_counts();
    let n = d.n_rows() as f64;
    Ok([n0 as f64 / n, n1 as f64 / n])
}

/// `P*(T = t_i | C_i)` for every row.
fn assignment_probabilities(rct: &TabularDataset, f: &ConfoundingFunction) -> Result<Vec<f64>> {
    let p1 = f.evaluate_column(rct)?;
    Ok(p1
        .into_iter()
        .zip(rct.treatment())
        .map(|(p, &t)| if t == 1 { p } else { 1.0 - p })
        .collect())
}

/// `max_i P*(T=t_i|C_i) / min_i P̂(T=t_i)` over the rows of `rct`.
pub fn estimate_m_bound(rct: &TabularDataset, f: &ConfoundingFunction) -> Result<f64> {
    let arms = arm_fractions(rct)?;
    let numerator = assignment_probabilities(rct, f)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(numerator / arms[0].min(arms[1]))
}

/// RCT rejection sampling with `M` estimated from the data.
pub fn rct_rejection_sample(
    rct: &TabularDataset,
    f: &ConfoundingFunction,
    rng: &mut SeededRng,
) -> Result<SamplerReport> {
    let m = estimate_m_bound(rct, f)?;
    rct_rejection_sample_with_bound(rct, f, m, rng)
}

/// RCT rejection sampling with a caller-supplied bound `M`. Fails if `M` is
/// too small for some row, i.e. an acceptance probability would exceed 1.
pub fn rct_rejection_sample_with_bound(
    rct: &TabularDataset,
    f: &ConfoundingFunction,
    m: f64,
    rng: &mut SeededRng,
) -> Result<SamplerReport> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidArgument(format!("bound M = {m} must be positive")));
    }
    let arms = arm_fractions(rct)?;
    let target = assignment_probabilities(rct, f)?;
    let acceptance: Vec<f64> = target
        .iter()
        .zip(rct.treatment())
        .map(|(&p, &t)| p / (arms[usize::from(t == 1)] * m))
        .collect();
    if let Some((i, &a)) = acceptance.iter().enumerate().find(|(_, &a)| a > 1.0 + ACCEPTANCE_SLACK) {
        return Err(Error::InvalidArgument(format!(
            "bound M = {m} is too small: acceptance probability {a} at row {i}"
        )));
    }

    let mut retained = Vec::new();
    for (i, &a) in acceptance.iter().enumerate() {
        let u: f64 = rng.sample(Open01);
        if u <= a {
            retained.push(i);
        }
    }
    finish(rct, Some(m), acceptance, retained)
}

/// Selection sampler: keep row `i` iff `Bernoulli(f(C_i)) = t_i`.
pub fn selection_sample(rct: &TabularDataset, f: &ConfoundingFunction, rng: &mut SeededRng) -> Result<SamplerReport> {
    rct.require_both_arms()?;
    let p1 = f.evaluate_column(rct)?;
    let mut retained = Vec::new();
    for (i, (&p, &t)) in p1.iter().zip(rct.treatment()).enumerate() {
        let u: f64 = rng.random();
        let b = u8::from(u < p);
        if b == t {
            retained.push(i);
        }
    }
    let acceptance = p1
        .into_iter()
        .zip(rct.treatment())
        .map(|(p, &t)| if t == 1 { p } else { 1.0 - p })
        .collect();
    finish(rct, None, acceptance, retained)
}

fn finish(
    rct: &TabularDataset,
    m_bound: Option<f64>,
    acceptance_probabilities: Vec<f64>,
    retained: Vec<usize>,
) -> Result<SamplerReport> {
    let n_in = rct.n_rows();
    if retained.is_empty() {
        let mean = acceptance_probabilities.iter().sum::<f64>() / n_in.max(1) as f64;
        return Err(Error::EmptySample {
            n_in,
            mean_acceptance: mean,
        });
    }
    let output = rct.take_rows(&retained);
    let n_out = retained.len();
    Ok(SamplerReport {
        output,
        n_in,
        n_out,
        m_bound,
        acceptance_rate: n_out as f64 / n_in as f64,
        acceptance_probabilities,
        retained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n_per_cell: usize) -> TabularDataset {
        let mut c = Vec::new();
        let mut t = Vec::new();
        for cell in 0..4u8 {
            for _ in 0..n_per_cell {
                c.push(f64::from(cell & 1));
                t.push(cell >> 1);
            }
        }
        let y = vec![0.0; c.len()];
        TabularDataset::new(vec!["C".into()], vec![c], t, y)
    }

    #[test]
    fn m_bound_piecewise() {
        let f = ConfoundingFunction::piecewise("C", 0.85, 0.15);
        let m = estimate_m_bound(&balanced(5), &f).unwrap();
        assert!((m - 1.7).abs() < 1e-12);
    }

    #[test]
    fn m_bound_trivial_is_one() {
        let f = ConfoundingFunction::piecewise("C", 0.5, 0.5);
        assert!((estimate_m_bound(&balanced(5), &f).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn m_bound_needs_both_arms() {
        let d = TabularDataset::new(vec!["C".into()], vec![vec![0.0, 1.0]], vec![1, 1], vec![0.0; 2]);
        let f = ConfoundingFunction::piecewise("C", 0.85, 0.15);
        assert_eq!(estimate_m_bound(&d, &f), Err(Error::EmptyArm(0)));
    }

    #[test]
    fn trivial_function_with_m_one_keeps_everything() {
        let d = balanced(10);
        let f = ConfoundingFunction::piecewise("C", 0.5, 0.5);
        let report = rct_rejection_sample(&d, &f, &mut SeededRng::new(3)).unwrap();
        assert_eq!(report.n_out, d.n_rows());
        assert_eq!(report.output, d);
    }

    #[test]
    fn too_small_bound_is_rejected() {
        let f = ConfoundingFunction::piecewise("C", 0.85, 0.15);
        let err = rct_rejection_sample_with_bound(&balanced(5), &f, 1.0, &mut SeededRng::new(0));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn empty_output_is_a_fault() {
        let d = TabularDataset::new(vec!["C".into()], vec![vec![0.0, 1.0]], vec![0, 1], vec![0.0; 2]);
        let f = ConfoundingFunction::piecewise("C", 0.5, 0.5);
        let err = rct_rejection_sample_with_bound(&d, &f, 1e15, &mut SeededRng::new(0)).unwrap_err();
        assert!(matches!(err, Error::EmptySample { n_in: 2, .. }));
    }

    #[test]
    fn rows_are_copied_unchanged() {
        let d = balanced(50);
        let f = ConfoundingFunction::piecewise("C", 0.8, 0.3);
        for kind in [SamplerKind::Rejection, SamplerKind::Selection] {
            let r = kind.sample(&d, &f, &mut SeededRng::new(9)).unwrap();
            assert_eq!(r.output, d.take_rows(&r.retained));
            assert!(r.n_out <= r.n_in);
            assert_eq!(r.acceptance_rate, r.n_out as f64 / r.n_in as f64);
        }
    }
}
