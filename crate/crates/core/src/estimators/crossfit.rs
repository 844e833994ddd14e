use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;

use super::learners::{fit_base_learner, BaseLearnerSpec, FeatureMatrix, FittedLearner};
use super::NuisanceProvenance;
use crate::data::{is_binary, TabularDataset};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_CLIP_EPSILON: f64 = 0.01;
pub const DEFAULT_K_FOLDS: usize = 5;

/// Per-row nuisance predictions, each made by models that never saw the row.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceEstimates {
    /// `E[Y | T=0, X]`
    pub q0: Vec<f64>,
    /// `E[Y | T=1, X]`
    pub q1: Vec<f64>,
    /// `P(T=1 | X)`, clipped into `[clip_epsilon, 1 - clip_epsilon]`.
    pub g: Vec<f64>,
    /// `E[Y | X]`
    pub qx: Vec<f64>,
    /// Fold that predicted each row. Empty for oracle nuisances.
    pub fold_id: Vec<usize>,
    /// Training rows of each fold's models.
    pub fold_training_rows: Vec<Vec<usize>>,
    pub clip_epsilon: f64,
    pub provenance: NuisanceProvenance,
}

impl NuisanceEstimates {
    /// Wrap externally known nuisance functions evaluated at each row.
    pub fn from_oracle(q0: Vec<f64>, q1: Vec<f64>, g: Vec<f64>, qx: Vec<f64>, clip_epsilon: f64) -> Result<Self> {
        let n = g.len();
        if q0.len() != n || q1.len() != n || qx.len() != n {
            return Err(Error::InvalidArgument("nuisance vectors differ in length".into()));
        }
        check_epsilon(clip_epsilon)?;
        Ok(Self {
            q0,
            q1,
            g: clip(g, clip_epsilon),
            qx,
            fold_id: Vec::new(),
            fold_training_rows: Vec::new(),
            clip_epsilon,
            provenance: NuisanceProvenance {
                learner: None,
                k_folds: 0,
                clip_epsilon,
                warnings: Vec::new(),
            },
        })
    }

    pub fn n_rows(&self) -> usize {
        self.g.len()
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!("clip epsilon {eps} outside (0, 0.5)")));
    }
    Ok(())
}

fn clip(v: Vec<f64>, eps: f64) -> Vec<f64> {
    v.into_iter().map(|p| p.clamp(eps, 1.0 - eps)).collect()
}

/// Cross-fitted T-learner nuisances with the default clip.
pub fn crossfit_nuisances(
    d: &TabularDataset,
    spec: &BaseLearnerSpec,
    k_folds: usize,
    rng: &mut SeededRng,
) -> Result<NuisanceEstimates> {
    crossfit_nuisances_clipped(d, spec, k_folds, DEFAULT_CLIP_EPSILON, rng)
}

/// Fold assignment stratified by treatment arm.
fn assign_folds(treatment: &[u8], k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut fold = vec![0; treatment.len()];
    for arm in [0u8, 1] {
        let mut idx: Vec<usize> = (0..treatment.len()).filter(|&i| treatment[i] == arm).collect();
        idx.shuffle(rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    fold
}

struct FoldFit {
    g: FittedLearner,
    q0: FittedLearner,
    q1: FittedLearner,
    qx: FittedLearner,
}

pub fn crossfit_nuisances_clipped(
    d: &TabularDataset,
    spec: &BaseLearnerSpec,
    k_folds: usize,
    clip_epsilon: f64,
    rng: &mut SeededRng,
) -> Result<NuisanceEstimates> {
    spec.check()?;
    check_epsilon(clip_epsilon)?;
    if k_folds < 2 {
        return Err(Error::InvalidArgument("k_folds must be at least 2".into()));
    }
    let n = d.n_rows();
    if n < k_folds {
        return Err(Error::InvalidArgument(format!("{n} rows cannot fill {k_folds} folds")));
    }
    if !is_binary(d.outcome()) {
        return Err(Error::InvalidDataset(
            "learned outcome models are classifiers and need a binary outcome".into(),
        ));
    }

    let t = d.treatment();
    let fold_id = assign_folds(t, k_folds, rng);
    let training: Vec<Vec<usize>> = (0..k_folds)
        .map(|f| (0..n).filter(|&i| fold_id[i] != f).collect())
        .collect();
    for (f, rows) in training.iter().enumerate() {
        for arm in [0u8, 1] {
            if !rows.iter().any(|&i| t[i] == arm) {
                return Err(Error::FoldMissingArm { fold: f, arm });
            }
        }
    }
    let seeds: Vec<[u64; 4]> = (0..k_folds)
        .map(|_| [rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()])
        .collect();

    let features = FeatureMatrix::from_dataset(d);
    let y = d.outcome();
    let t_label: Vec<f64> = t.iter().map(|&v| v as f64).collect();

    let fit_on = |rows: &[usize], labels: &[f64], seed: u64| -> Result<FittedLearner> {
        let x = features.select_rows(rows);
        let lab: Vec<f64> = rows.iter().map(|&i| labels[i]).collect();
        fit_base_learner(spec, &x, &lab, &mut SeededRng::new(seed))
    };

    let fits: Vec<FoldFit> = (0..k_folds)
        .into_par_iter()
        .map(|f| {
            let rows = &training[f];
            let arm0: Vec<usize> = rows.iter().copied().filter(|&i| t[i] == 0).collect();
            let arm1: Vec<usize> = rows.iter().copied().filter(|&i| t[i] == 1).collect();
            Ok(FoldFit {
                g: fit_on(rows, &t_label, seeds[f][0])?,
                q0: fit_on(&arm0, y, seeds[f][1])?,
                q1: fit_on(&arm1, y, seeds[f][2])?,
                qx: fit_on(rows, y, seeds[f][3])?,
            })
        })
        .collect::<Result<_>>()?;

    let mut q0 = vec![0.0; n];
    let mut q1 = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut qx = vec![0.0; n];
    let mut warnings = Vec::new();
    for (f, fit) in fits.iter().enumerate() {
        let held_out: Vec<usize> = (0..n).filter(|&i| fold_id[i] == f).collect();
        let x = features.select_rows(&held_out);
        for (out, model) in [
            (&mut g, &fit.g),
            (&mut q0, &fit.q0),
            (&mut q1, &fit.q1),
            (&mut qx, &fit.qx),
        ] {
            for (&i, p) in held_out.iter().zip(model.model.predict_proba(&x)) {
                out[i] = p;
            }
        }
        for (name, model) in [("g", &fit.g), ("q0", &fit.q0), ("q1", &fit.q1), ("qx", &fit.qx)] {
            for w in &model.warnings {
                warnings.push(format!("fold {f} {name}: {w}"));
            }
        }
    }

    Ok(NuisanceEstimates {
        q0,
        q1,
        g: clip(g, clip_epsilon),
        qx,
        fold_id,
        fold_training_rows: training,
        clip_epsilon,
        provenance: NuisanceProvenance {
            learner: Some(spec.clone()),
            k_folds,
            clip_epsilon,
            warnings,
        },
    })
}
