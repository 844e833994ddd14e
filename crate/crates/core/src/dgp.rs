//! Synthetic RCT data-generating processes.
//!
//! Setting 1: `C ~ Bern(0.5)`, `T ~ Bern(0.3)`, `Y = 0.5 C + 1.5 T + 2 T C + N(0, 1)`.
//! Setting 2: as Setting 1 with `T ~ Bern(0.5)`.
//! Setting 3: five covariates with
//! `C1 ~ Bern(0.5)`, `C2 = C1 + U(-0.5, 1)`, `C3, C4 ~ N(0, 1)`,
//! `C5 = C3 + C4 + N(0, 1)`, `T ~ Bern(0.3)` and
//! `Y = 0.5 C4 + 2 T C1 C2 - 1.5 T + C2 C3 + C5 + N(0, 1)`.
//!
//! In every setting `T` is drawn independently of the covariates.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::sampler::{ConfoundingFunction, LogisticTerm};
use crate::terms::Monomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingId {
    Setting1,
    Setting2,
    Setting3,
}

impl SettingId {
    pub const ALL: [SettingId; 3] = [Self::Setting1, Self::Setting2, Self::Setting3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Setting1 => "setting1",
            Self::Setting2 => "setting2",
            Self::Setting3 => "setting3",
        }
    }
}

impl fmt::Display for SettingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SettingId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "setting1" => Ok(Self::Setting1),
            "setting2" => Ok(Self::Setting2),
            "setting3" => Ok(Self::Setting3),
            other => Err(Error::InvalidArgument(format!(
                "unknown setting `{other}` (expected setting1|setting2|setting3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DgpSetting {
    pub id: SettingId,
    pub n: usize,
}

impl DgpSetting {
    pub fn new(id: SettingId, n: usize) -> Self {
        Self { id, n }
    }

    pub fn treated_probability(&self) -> f64 {
        match self.id {
            SettingId::Setting2 => 0.5,
            SettingId::Setting1 | SettingId::Setting3 => 0.3,
        }
    }

    /// Population ATE.
    ///
    /// Settings 1 and 2: `1.5 + 2 E[C] = 2.5`. Setting 3:
    /// `-1.5 + 2 E[C1 C2] = -1.5 + 2 (E[C1] + E[C1] E[U]) = -0.25`.
    pub fn true_ate(&self) -> f64 {
        match self.id {
            SettingId::Setting1 | SettingId::Setting2 => 2.5,
            SettingId::Setting3 => -0.25,
        }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        match self.id {
            SettingId::Setting1 | SettingId::Setting2 => vec!["C".into()],
            SettingId::Setting3 => (1..=5).map(|k| format!("C{k}")).collect(),
        }
    }

    /// Regression terms (besides the intercept and `T`) of the correctly
    /// specified outcome model.
    pub fn oracle_adjustment_terms(&self) -> Vec<Monomial> {
        let terms: &[&str] = match self.id {
            SettingId::Setting1 | SettingId::Setting2 => &["C", "T*C"],
            SettingId::Setting3 => &["C4", "T*C1*C2", "C2*C3", "C5"],
        };
        terms.iter().map(|t| t.parse().expect("static term")).collect()
    }

    /// The confounding function used with this setting.
    pub fn confounding_function(&self) -> ConfoundingFunction {
        dgp_confounding_function(self.id)
    }

    pub fn generate(&self, rng: &mut SeededRng) -> Result<TabularDataset> {
        generate(self, rng)
    }
}

pub fn dgp_confounding_function(id: SettingId) -> ConfoundingFunction {
    match id {
        SettingId::Setting1 | SettingId::Setting2 => {
            ConfoundingFunction::logistic(-1.0, vec![LogisticTerm::new(&["C"], 2.5)])
        }
        SettingId::Setting3 => ConfoundingFunction::logistic(
            0.0,
            vec![
                LogisticTerm::new(&["C1"], 0.5),
                LogisticTerm::new(&["C2"], -0.7),
                LogisticTerm::new(&["C3"], 1.2),
                LogisticTerm::new(&["C4"], 1.5),
                LogisticTerm::new(&["C5"], -1.2),
                LogisticTerm::new(&["C1", "C2"], 0.5),
            ],
        ),
    }
}

/// Draw `setting.n` iid rows. Per row, draws are made in a fixed order so the
/// output is a pure function of the generator state.
pub fn generate(setting: &DgpSetting, rng: &mut SeededRng) -> Result<TabularDataset> {
    let n = setting.n;
    if n == 0 {
        return Err(Error::InvalidArgument("a DGP draw needs n >= 1".into()));
    }
    let p_treat = setting.treated_probability();
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    match setting.id {
        SettingId::Setting1 | SettingId::Setting2 => {
            let mut c = Vec::with_capacity(n);
            for _ in 0..n {
                let ci = f64::from(u8::from(rng.random_bool(0.5)));
                let ti = u8::from(rng.random_bool(p_treat));
                let noise: f64 = rng.sample(StandardNormal);
                let tf = f64::from(ti);
                c.push(ci);
                t.push(ti);
                y.push(0.5 * ci + 1.5 * tf + 2.0 * tf * ci + noise);
            }
            Ok(TabularDataset::new(setting.covariate_names(), vec![c], t, y))
        }
        SettingId::Setting3 => {
            let mut cols: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(n)).collect();
            for _ in 0..n {
                let c1 = f64::from(u8::from(rng.random_bool(0.5)));
                let c2 = c1 + rng.random_range(-0.5..1.0);
                let c3: f64 = rng.sample(StandardNormal);
                let c4: f64 = rng.sample(StandardNormal);
                let c5 = c3 + c4 + rng.sample::<f64, _>(StandardNormal);
                let ti = u8::from(rng.random_bool(p_treat));
                let noise: f64 = rng.sample(StandardNormal);
                let tf = f64::from(ti);
                for (col, v) in cols.iter_mut().zip([c1, c2, c3, c4, c5]) {
                    col.push(v);
                }
                t.push(ti);
                y.push(0.5 * c4 + 2.0 * tf * c1 * c2 - 1.5 * tf + c2 * c3 + c5 + noise);
            }
            Ok(TabularDataset::new(setting.covariate_names(), cols, t, y))
        }
    }
}

/// A fully discrete RCT over binary `C`, `T`, `Y` with a known joint table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRct {
    pub p_c: f64,
    pub p_t: f64,
    /// `p_y[t][c] = P(Y = 1 | T = t, C = c)`.
    pub p_y: [[f64; 2]; 2],
}

impl DiscreteRct {
    pub fn true_ate(&self) -> f64 {
        let pc = [1.0 - self.p_c, self.p_c];
        (0..2).map(|c| pc[c] * (self.p_y[1][c] - self.p_y[0][c])).sum()
    }

    /// `P(C = c, T = t, Y = y)` indexed `[c][t][y]`.
    pub fn joint(&self) -> [[[f64; 2]; 2]; 2] {
        let pc = [1.0 - self.p_c, self.p_c];
        let pt = [1.0 - self.p_t, self.p_t];
        let mut out = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for t in 0..2 {
                let py = self.p_y[t][c];
                out[c][t] = [pc[c] * pt[t] * (1.0 - py), pc[c] * pt[t] * py];
            }
        }
        out
    }

    /// Draw `n` rows with covariate column `C`.
    pub fn generate(&self, n: usize, rng: &mut SeededRng) -> Result<TabularDataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("a DGP draw needs n >= 1".into()));
        }
        let mut c = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let ci = usize::from(rng.random_bool(self.p_c));
            let ti = usize::from(rng.random_bool(self.p_t));
            let yi = rng.random_bool(self.p_y[ti][ci]);
            c.push(ci as f64);
            t.push(ti as u8);
            y.push(f64::from(u8::from(yi)));
        }
        Ok(TabularDataset::new(vec!["C".into()], vec![c], t, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::expit;

    #[test]
    fn setting_ids_parse() {
        assert_eq!("setting3".parse::<SettingId>().unwrap(), SettingId::Setting3);
        assert!("setting4".parse::<SettingId>().is_err());
    }

    #[test]
    fn discrete_table_sums_to_one() {
        let toy = DiscreteRct {
            p_c: 0.4,
            p_t: 0.3,
            p_y: [[0.2, 0.5], [0.35, 0.8]],
        };
        let total: f64 = toy.joint().iter().flatten().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((toy.true_ate() - (0.6 * 0.15 + 0.4 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn single_row() {
        let d = DgpSetting::new(SettingId::Setting1, 1)
            .generate(&mut SeededRng::new(0))
            .unwrap();
        assert_eq!(d.n_rows(), 1);
        assert!(d.treatment()[0] <= 1);
        assert!(d.validate().is_valid());
        assert!(DgpSetting::new(SettingId::Setting1, 0)
            .generate(&mut SeededRng::new(0))
            .is_err());
    }

    #[test]
    fn confounding_values() {
        let f = dgp_confounding_function(SettingId::Setting1);
        assert!((f.evaluate(&[("C", 0.0)]).unwrap() - expit(-1.0)).abs() < 1e-15);
        assert!((f.evaluate(&[("C", 1.0)]).unwrap() - 0.817_574_476_193_643_7).abs() < 1e-12);
        let f3 = dgp_confounding_function(SettingId::Setting3);
        let row = [("C1", 1.0), ("C2", 2.0), ("C3", 0.0), ("C4", 0.0), ("C5", 0.0)];
        // 0.5 - 1.4 + 0.5 * 2 = 0.1
        assert!((f3.evaluate(&row).unwrap() - expit(0.1)).abs() < 1e-15);
    }

    #[test]
    fn oracle_terms() {
        let s3: Vec<String> = DgpSetting::new(SettingId::Setting3, 1)
            .oracle_adjustment_terms()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(s3, ["C4", "T*C1*C2", "C2*C3", "C5"]);
    }

    #[test]
    fn same_seed_same_data() {
        for id in SettingId::ALL {
            let s = DgpSetting::new(id, 500);
            let a = s.generate(&mut SeededRng::new(11)).unwrap();
            let b = s.generate(&mut SeededRng::new(11)).unwrap();
            assert_eq!(a, b);
        }
    }
}
