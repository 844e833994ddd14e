//! Logistic regression with an elastic-net penalty.
//!
//! Objective, with sample weights `s_i` (balanced: `n / (2 n_class)`) and
//! inverse regularization strength `C`:
//!
//! ```text
//! C * sum_i s_i * logloss_i(b0, beta) + l1_ratio * |beta|_1 + (1 - l1_ratio) / 2 * |beta|^2
//! ```
//!
//! The intercept is not penalized. Solved by proximal Newton: each outer step
//! forms the weighted least-squares approximation of the log-loss and
//! minimizes it plus the penalty by cyclic coordinate descent, followed by a
//! backtracking line search on the true objective.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FittedLearner, TrainedModel};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::sampler::expit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticNetSpec {
    pub l1_ratio: f64,
    /// Candidate inverse regularization strengths.
    pub c_grid: Vec<f64>,
    pub class_weight_balanced: bool,
    pub tol: f64,
    /// Cap on coordinate-descent sweeps per fit.
    pub max_iter: usize,
    pub inner_folds: usize,
}

impl Default for ElasticNetSpec {
    fn default() -> Self {
        Self {
            l1_ratio: 0.1,
            c_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1],
            class_weight_balanced: true,
            tol: 1e-6,
            max_iter: 5000,
            inner_folds: 5,
        }
    }
}

impl ElasticNetSpec {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidArgument(format!(
                "l1_ratio {} outside [0, 1]",
                self.l1_ratio
            )));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(
                "c_grid must be a nonempty list of positive values".into(),
            ));
        }
        if self.inner_folds < 2 && self.c_grid.len() > 1 {
            return Err(Error::InvalidArgument("inner_folds must be at least 2".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("tol and max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl ElasticNetModel {
    fn zeros(p: usize) -> Self {
        Self {
            intercept: 0.0,
            coefficients: vec![0.0; p],
        }
    }

    pub fn linear_predictor(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut eta = vec![self.intercept; x.n_rows()];
        for (j, &b) in self.coefficients.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let c = x.column(j);
            for (&i, &v) in c.rows.iter().zip(&c.values) {
                eta[i as usize] += b * v;
            }
        }
        eta
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Vec<f64> {
        self.linear_predictor(x).into_iter().map(expit).collect()
    }
}

/// Sample weights of the objective, normalized to sum to one.
pub(crate) fn sample_weights(labels: &[f64], balanced: bool) -> Vec<f64> {
    let n = labels.len() as f64;
    if !balanced {
        return vec![1.0 / n; labels.len()];
    }
    let pos = labels.iter().filter(|&&l| l == 1.0).count() as f64;
    let neg = n - pos;
    labels
        .iter()
        .map(|&l| {
            let s = if l == 1.0 { n / (2.0 * pos) } else { n / (2.0 * neg) };
            s / n
        })
        .collect()
}

/// `log(1 + exp(eta)) - y * eta`, computed without overflow.
fn logloss(eta: f64, y: f64) -> f64 {
    let softplus = if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    };
    softplus - y * eta
}

/// Penalized objective in normalized form: `sum_i w_i logloss_i + lambda * penalty`,
/// `w` summing to one and `lambda = 1 / (C * sum_i s_i)`.
pub(crate) struct Problem<'a> {
    pub x: &'a FeatureMatrix,
    pub y: &'a [f64],
    pub w: &'a [f64],
    pub lambda: f64,
    pub l1_ratio: f64,
}

impl Problem<'_> {
    fn penalty(&self, beta: &[f64]) -> f64 {
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        self.lambda * (self.l1_ratio * l1 + 0.5 * (1.0 - self.l1_ratio) * l2)
    }

    fn objective_at(&self, eta: &[f64], beta: &[f64]) -> f64 {
        let loss: f64 = eta
            .iter()
            .zip(self.y)
            .zip(self.w)
            .map(|((&e, &y), &w)| w * logloss(e, y))
            .sum();
        loss + self.penalty(beta)
    }

    #[cfg(test)]
    pub fn objective(&self, model: &ElasticNetModel) -> f64 {
        self.objective_at(&model.linear_predictor(self.x), &model.coefficients)
    }
}

pub(crate) struct Solution {
    pub model: ElasticNetModel,
    pub converged: bool,
}

pub(crate) fn solve(problem: &Problem<'_>, start: ElasticNetModel, tol: f64, max_sweeps: usize) -> Solution {
    let x = problem.x;
    let n = x.n_rows();
    let p = x.n_cols();
    let l1 = problem.lambda * problem.l1_ratio;
    let l2 = problem.lambda * (1.0 - problem.l1_ratio);

    let mut model = start;
    let mut eta = model.linear_predictor(x);
    let mut current = problem.objective_at(&eta, &model.coefficients);
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut hess = vec![0.0; n];
    let mut resid = vec![0.0; n];
    // Inexact Newton: early quadratic models are solved loosely, tightening
    // as the outer steps shrink.
    let mut inner_tol = 0.1f64.max(tol);

    for _outer in 0..200 {
        // Quadratic model of the loss around eta.
        for i in 0..n {
            let pr = expit(eta[i]);
            let v = (pr * (1.0 - pr)).max(1e-5);
            hess[i] = problem.w[i] * v;
            resid[i] = (problem.y[i] - pr) / v;
        }
        let hess_sum: f64 = hess.iter().sum();
        let col_curv: Vec<f64> = (0..p)
            .map(|j| {
                let c = x.column(j);
                c.rows
                    .iter()
                    .zip(&c.values)
                    .map(|(&i, &v)| hess[i as usize] * v * v)
                    .sum()
            })
            .collect();

        let mut b0 = model.intercept;
        let mut beta = model.coefficients.clone();
        // resid tracks z - eta_candidate
        loop {
            let mut max_change = 0.0f64;
            let delta = hess.iter().zip(&resid).map(|(h, r)| h * r).sum::<f64>() / hess_sum;
            b0 += delta;
            resid.iter_mut().for_each(|r| *r -= delta);
            max_change = max_change.max(delta.abs());
            for j in 0..p {
                if col_curv[j] == 0.0 {
                    continue;
                }
                let c = x.column(j);
                let old = beta[j];
                let grad: f64 = c
                    .rows
                    .iter()
                    .zip(&c.values)
                    .map(|(&i, &v)| hess[i as usize] * v * resid[i as usize])
                    .sum::<f64>()
                    + col_curv[j] * old;
                let new = soft_threshold(grad, l1) / (col_curv[j] + l2);
                if new != old {
                    let diff = new - old;
                    for (&i, &v) in c.rows.iter().zip(&c.values) {
                        resid[i as usize] -= diff * v;
                    }
                    beta[j] = new;
                    max_change = max_change.max(diff.abs() * col_curv[j].sqrt());
                }
            }
            sweeps += 1;
            if max_change < inner_tol || sweeps >= max_sweeps {
                break;
            }
        }

        // Backtracking line search along the Newton direction.
        let d_b0 = b0 - model.intercept;
        let d_beta: Vec<f64> = beta.iter().zip(&model.coefficients).map(|(a, b)| a - b).collect();
        let d_eta: Vec<f64> = {
            let step = ElasticNetModel {
                intercept: d_b0,
                coefficients: d_beta.clone(),
            };
            step.linear_predictor(x)
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand_beta: Vec<f64> = model.coefficients.iter().zip(&d_beta).map(|(b, d)| b + t * d).collect();
            let cand_eta: Vec<f64> = eta.iter().zip(&d_eta).map(|(e, d)| e + t * d).collect();
            let value = problem.objective_at(&cand_eta, &cand_beta);
            if value <= current {
                accepted = Some((cand_beta, cand_eta, value));
                break;
            }
            t *= 0.5;
        }
        let Some((cand_beta, cand_eta, value)) = accepted else {
            if inner_tol > tol {
                inner_tol = (0.1 * inner_tol).max(tol);
                continue;
            }
            converged = true;
            break;
        };
        let step_size = t * d_beta.iter().map(|d| d.abs()).fold(d_b0.abs(), f64::max);
        let decrease = current - value;
        let loose = inner_tol > tol;
        inner_tol = (0.1 * inner_tol).max(tol);
        model = ElasticNetModel {
            intercept: model.intercept + t * d_b0,
            coefficients: cand_beta,
        };
        eta = cand_eta;
        current = value;
        if !loose && (step_size < tol || decrease <= tol * tol * current.abs().max(1.0)) {
            converged = true;
            break;
        }
        if sweeps >= max_sweeps {
            break;
        }
    }
    Solution { model, converged }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Penalty weight of the normalized objective: `1 / (C * sum_i s_i)`. Both
/// weighting schemes have `sum_i s_i = n`.
fn lambda_for(c: f64, n: usize) -> f64 {
    1.0 / (c * n as f64)
}

/// Fit with a fixed `C`.
pub(crate) fn fit_fixed(
    spec: &ElasticNetSpec,
    x: &FeatureMatrix,
    labels: &[f64],
    c: f64,
    start: Option<ElasticNetModel>,
) -> Solution {
    let w = sample_weights(labels, spec.class_weight_balanced);
    let problem = Problem {
        x,
        y: labels,
        w: &w,
        lambda: lambda_for(c, labels.len()),
        l1_ratio: spec.l1_ratio,
    };
    let start = start.unwrap_or_else(|| ElasticNetModel::zeros(x.n_cols()));
    solve(&problem, start, spec.tol, spec.max_iter)
}

/// Stratified assignment of rows to `k` folds.
fn stratified_folds(labels: &[f64], k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    for class in [0.0, 1.0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    fold
}

fn mean_log_loss(probs: &[f64], labels: &[f64]) -> f64 {
    let eps = 1e-15;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / labels.len() as f64
}

/// Choose `C` by inner cross-validated log-loss, then refit on all rows.
pub(crate) fn fit_cv(
    spec: &ElasticNetSpec,
    x: &FeatureMatrix,
    labels: &[f64],
    rng: &mut SeededRng,
) -> Result<FittedLearner> {
    let mut grid = spec.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut warnings = Vec::new();

    let best_c = if grid.len() == 1 {
        grid[0]
    } else {
        let k = spec.inner_folds;
        let fold = stratified_folds(labels, k, rng);
        let mut losses = vec![0.0; grid.len()];
        for f in 0..k {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] == f).collect();
            if test.is_empty() {
                continue;
            }
            let x_train = x.select_rows(&train);
            let y_train: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
            let x_test = x.select_rows(&test);
            let y_test: Vec<f64> = test.iter().map(|&i| labels[i]).collect();
            let positives = y_train.iter().filter(|&&y| y == 1.0).count();
            let single_class = positives == 0 || positives == y_train.len();
            let mut warm = None;
            for (g, &c) in grid.iter().enumerate() {
                let probs = if single_class {
                    vec![positives as f64 / y_train.len() as f64; test.len()]
                } else {
                    let sol = fit_fixed(spec, &x_train, &y_train, c, warm.take());
                    let probs = sol.model.predict_proba(&x_test);
                    warm = Some(sol.model);
                    probs
                };
                losses[g] += mean_log_loss(&probs, &y_test) * test.len() as f64;
            }
        }
        let (best, _) = losses
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (g, &l)| if l < acc.1 { (g, l) } else { acc });
        grid[best]
    };

    let sol = fit_fixed(spec, x, labels, best_c, None);
    if !sol.converged {
        warnings.push(format!(
            "elastic net did not converge within {} sweeps (C = {best_c})",
            spec.max_iter
        ));
    }
    Ok(FittedLearner {
        model: TrainedModel::ElasticNet(sol.model),
        selected_c: Some(best_c),
        warnings,
    })
}
