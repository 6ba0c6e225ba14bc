//! The six compared methods and the sealed heldout set they score.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{FedaGrouping, ModelConfig};
use crate::data::{AgeGroup, Dataset, Gender, Observation, SymptomVocabulary};
use crate::error::{Error, Result};
use crate::hierarchy::Shape;
use crate::logreg::fit_logreg;
use crate::predictor::{fit_two_stage, predict_proba};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MethodId {
    TargetOnly,
    PooledLr,
    Feda,
    FedaP,
    Hier,
    HierP,
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        MethodId::TargetOnly,
        MethodId::PooledLr,
        MethodId::Feda,
        MethodId::FedaP,
        MethodId::Hier,
        MethodId::HierP,
    ];

    /// Identifier used in CSV output.
    pub fn code(self) -> &'static str {
        match self {
            MethodId::TargetOnly => "TARGET_ONLY",
            MethodId::PooledLr => "POOLED_LR",
            MethodId::Feda => "FEDA",
            MethodId::FedaP => "FEDA_P",
            MethodId::Hier => "HIER",
            MethodId::HierP => "HIER_P",
        }
    }

    /// Row label in the method-comparison table.
    pub fn long_name(self) -> &'static str {
        match self {
            MethodId::TargetOnly => "Target Only",
            MethodId::PooledLr => "Logistic Regression",
            MethodId::Feda => "FEDA (Only symptoms)",
            MethodId::FedaP => "FEDA+p (With demographics)",
            MethodId::Hier => "Hierarchical (Only symptoms)",
            MethodId::HierP => "Hierarchical+p (With demographics)",
        }
    }

    /// Column label in the proportion-sweep table.
    pub fn short_name(self) -> &'static str {
        match self {
            MethodId::TargetOnly => "Target",
            MethodId::PooledLr => "LR",
            MethodId::Feda => "FEDA",
            MethodId::FedaP => "FEDA+p",
            MethodId::Hier => "Hier",
            MethodId::HierP => "Hier+p",
        }
    }

    pub fn parse(token: &str) -> Option<MethodId> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.code().eq_ignore_ascii_case(token.trim()) || m.short_name() == token.trim())
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Grants read access to heldout labels. Only the evaluator can mint one.
pub struct EvaluatorKey {
    _private: (),
}

impl EvaluatorKey {
    pub(crate) fn new() -> Self {
        EvaluatorKey { _private: () }
    }
}

/// Heldout target rows with their labels removed from the observations and sealed.
#[derive(Clone, Debug)]
pub struct HeldoutSet {
    features: Dataset,
    labels: Vec<bool>,
}

impl HeldoutSet {
    pub fn seal(heldout: Dataset) -> Result<Self> {
        let labels = heldout.labels()?;
        let mut features = heldout;
        for o in &mut features.observations {
            o.label = None;
        }
        Ok(HeldoutSet { features, labels })
    }

    /// Observations without labels.
    pub fn observations(&self) -> &[Observation] {
        &self.features.observations
    }

    pub fn dataset(&self) -> &Dataset {
        &self.features
    }

    /// Label access from a training path always fails.
    pub fn try_labels(&self) -> Result<&[bool]> {
        Err(Error::SealedLabels)
    }

    pub fn labels(&self, _key: &EvaluatorKey) -> &[bool] {
        &self.labels
    }
}

/// Five-way age one-hot followed by two-way gender one-hot.
pub fn demographics_onehot(obs: &Observation) -> [f64; 7] {
    let mut v = [0.0; 7];
    v[obs.age_group.index()] = 1.0;
    v[AgeGroup::ALL.len() + obs.gender.index()] = 1.0;
    v
}

const _: () = assert!(AgeGroup::ALL.len() + Gender::ALL.len() == 7);

/// `[x, 0…, x (block domain_index + 1), …0]` with `k_domains + 1` blocks.
pub fn feda_augment(x: &[f64], domain_index: usize, k_domains: usize) -> Result<Vec<f64>> {
    if domain_index >= k_domains {
        return Err(Error::validation(format!(
            "domain index {domain_index} out of range for {k_domains} domains"
        )));
    }
    let w = x.len();
    let mut out = vec![0.0; (k_domains + 1) * w];
    out[..w].copy_from_slice(x);
    let start = (domain_index + 1) * w;
    out[start..start + w].copy_from_slice(x);
    Ok(out)
}

fn symptoms(o: &Observation) -> Vec<f64> {
    o.symptom_values().collect()
}

fn symptoms_and_demographics(o: &Observation) -> Vec<f64> {
    o.symptom_values().chain(demographics_onehot(o)).collect()
}

fn design<'a>(
    sets: impl IntoIterator<Item = &'a Dataset>,
    mut row: impl FnMut(&Dataset, &Observation) -> Result<Vec<f64>>,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for d in sets {
        for o in &d.observations {
            x.push(row(d, o)?);
            y.push(o.label.ok_or_else(|| Error::Unlabelled(o.obs_id.clone()))?);
        }
    }
    Ok((x, y))
}

/// Trains `method` on the sources and the labelled target slice; scores every heldout row.
pub fn run_method(
    method: MethodId,
    sources: &[Dataset],
    target_labelled: &Dataset,
    heldout: &HeldoutSet,
    vocab: &SymptomVocabulary,
    config: &ModelConfig,
) -> Result<Vec<(String, f64)>> {
    let l2 = config.l2_strength;
    let score_all = |f: &dyn Fn(&Observation) -> Result<f64>| -> Result<Vec<(String, f64)>> {
        heldout
            .observations()
            .iter()
            .map(|o| Ok((o.obs_id.clone(), f(o)?)))
            .collect()
    };
    let all_training = || sources.iter().chain(std::iter::once(target_labelled));

    match method {
        MethodId::TargetOnly | MethodId::PooledLr => {
            let (x, y) = if method == MethodId::TargetOnly {
                design([target_labelled], |_, o| Ok(symptoms(o)))?
            } else {
                design(all_training(), |_, o| Ok(symptoms(o)))?
            };
            let fit = fit_logreg(&x, &y, l2)?;
            score_all(&|o| Ok(fit.predict_proba(&symptoms(o))))
        }
        MethodId::Feda | MethodId::FedaP => {
            let base: fn(&Observation) -> Vec<f64> = if method == MethodId::Feda {
                symptoms
            } else {
                symptoms_and_demographics
            };
            let groups: Vec<String> = match config.feda_grouping {
                FedaGrouping::Domain => {
                    let mut g: Vec<String> = all_training().map(|d| d.domain.label().to_string()).collect();
                    g.sort();
                    g.dedup();
                    g
                }
                FedaGrouping::Dataset => all_training().map(|d| d.dataset_id.clone()).collect(),
            };
            let group_of = |d: &Dataset| -> Result<usize> {
                let key = match config.feda_grouping {
                    FedaGrouping::Domain => d.domain.label(),
                    FedaGrouping::Dataset => d.dataset_id.as_str(),
                };
                groups
                    .iter()
                    .position(|g| g == key)
                    .ok_or_else(|| Error::validation(format!("no FEDA block for `{key}`")))
            };
            let k = groups.len();
            let (x, y) = design(all_training(), |d, o| feda_augment(&base(o), group_of(d)?, k))?;
            let fit = fit_logreg(&x, &y, l2)?;
            let target_group = group_of(heldout.dataset())?;
            score_all(&|o| Ok(fit.predict_proba(&feda_augment(&base(o), target_group, k)?)))
        }
        MethodId::Hier | MethodId::HierP => {
            let shape = if method == MethodId::Hier {
                Shape::DomainOnly
            } else {
                Shape::PopulationAware
            };
            let (_, model) = fit_two_stage(sources, target_labelled, vocab, config, shape)?;
            score_all(&|o| predict_proba(o, &model))
        }
    }
}

/// `obs_id,method,score` rows for one method's heldout scores.
pub fn scores_csv(method: MethodId, scored: &[(String, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["obs_id", "method", "score"])?;
    for (id, score) in scored {
        w.write_record([id.as_str(), method.code(), &score.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::validation(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Domain, Gender};

    fn obs(id: usize, ds: &str, symptoms: Vec<bool>, label: bool) -> Observation {
        Observation {
            obs_id: format!("{ds}{id}"),
            symptoms,
            label: Some(label),
            age_group: AgeGroup::ALL[id % 5],
            gender: Gender::ALL[id % 2],
            dataset_id: ds.into(),
        }
    }

    fn pseudo_dataset(ds: &str, domain: Domain, n: usize, salt: usize) -> Dataset {
        let o = (0..n)
            .map(|i| {
                let h = (i * 7919 + salt * 104_729) % 1000;
                let s = vec![h % 3 == 0, h % 5 < 2, h % 7 < 3];
                let label = (h % 11 < 5) ^ s[0] ^ (h % 13 == 0);
                obs(i, ds, s, label)
            })
            .collect();
        Dataset::new(ds, domain, o).unwrap()
    }

    #[test]
    fn onehots() {
        let mut o = obs(0, "d", vec![], true);
        o.age_group = AgeGroup::A0_4;
        o.gender = Gender::Male;
        assert_eq!(demographics_onehot(&o), [1., 0., 0., 0., 0., 1., 0.]);
        o.age_group = AgeGroup::A65Plus;
        o.gender = Gender::Female;
        assert_eq!(demographics_onehot(&o), [0., 0., 0., 0., 1., 0., 1.]);
        for a in AgeGroup::ALL {
            for g in Gender::ALL {
                o.age_group = a;
                o.gender = g;
                assert_eq!(demographics_onehot(&o).iter().filter(|&&v| v == 1.0).count(), 2);
            }
        }
    }

    #[test]
    fn augmentation() {
        assert_eq!(feda_augment(&[1., 0.], 0, 2).unwrap(), vec![1., 0., 1., 0., 0., 0.]);
        assert_eq!(feda_augment(&[1., 0.], 1, 2).unwrap(), vec![1., 0., 0., 0., 1., 0.]);
        assert_eq!(feda_augment(&[3., 4.], 0, 1).unwrap(), vec![3., 4., 3., 4.]);
        assert!(feda_augment(&[1.], 2, 2).is_err());
        let x = [0.5, -1.0, 2.0];
        for k in 1..5 {
            for d in 0..k {
                let a = feda_augment(&x, d, k).unwrap();
                let nonzero_blocks = a.chunks(3).filter(|b| b.iter().any(|&v| v != 0.0)).count();
                assert_eq!(nonzero_blocks, 2);
            }
        }
    }

    #[test]
    fn heldout_labels_are_sealed() {
        let ds = pseudo_dataset("t", Domain::Healthworker, 12, 1);
        let held = HeldoutSet::seal(ds.clone()).unwrap();
        assert!(matches!(held.try_labels(), Err(Error::SealedLabels)));
        assert!(held.observations().iter().all(|o| o.label.is_none()));
        assert!(matches!(held.dataset().labels(), Err(Error::Unlabelled(_))));
        assert_eq!(held.labels(&EvaluatorKey::new()), ds.labels().unwrap().as_slice());
    }

    #[test]
    fn every_method_scores_every_heldout_row() {
        let vocab = SymptomVocabulary::new(["a", "b", "c"]).unwrap();
        let sources = vec![
            pseudo_dataset("s1", Domain::CitizenScience, 40, 2),
            pseudo_dataset("s2", Domain::Healthworker, 40, 3),
        ];
        let target = pseudo_dataset("t", Domain::CitizenScience, 30, 4);
        let (lab, held) = crate::data::split_labelled(&target, &crate::data::SplitSpec::new(0.4, 1).unwrap()).unwrap();
        let held = HeldoutSet::seal(held).unwrap();
        for m in MethodId::ALL {
            let scores = run_method(m, &sources, &lab, &held, &vocab, &ModelConfig::default()).unwrap();
            assert_eq!(scores.len(), held.observations().len(), "{m}");
            assert!(scores.iter().all(|(_, s)| *s > 0.0 && *s < 1.0));
        }
    }

    fn same_ranking(a: &[(String, f64)], b: &[f64]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i].1 - a[j].1).signum() == (b[i] - b[j]).signum() || a[i].1 == a[j].1 && b[i] == b[j]))
    }

    #[test]
    fn feda_with_one_domain_matches_pooled_lr() {
        let vocab = SymptomVocabulary::new(["a", "b", "c"]).unwrap();
        let sources = vec![pseudo_dataset("s", Domain::CitizenScience, 20, 5)];
        let target = pseudo_dataset("t", Domain::CitizenScience, 30, 6);
        let (lab, held) = crate::data::split_labelled(&target, &crate::data::SplitSpec::new(0.34, 2).unwrap()).unwrap();
        let held = HeldoutSet::seal(held).unwrap();
        let cfg = ModelConfig { l2_strength: 0.0, ..ModelConfig::default() };
        let pooled = run_method(MethodId::PooledLr, &sources, &lab, &held, &vocab, &cfg).unwrap();
        let feda = run_method(MethodId::Feda, &sources, &lab, &held, &vocab, &cfg).unwrap();
        let feda_scores: Vec<f64> = feda.iter().map(|s| s.1).collect();
        for (p, f) in pooled.iter().zip(&feda_scores) {
            assert!((p.1 - f).abs() < 1e-6);
        }
        assert!(same_ranking(&pooled, &feda_scores));
    }

    #[test]
    fn hier_single_dataset_ranks_by_smoothed_ppv_score() {
        let vocab = SymptomVocabulary::new(["a", "b", "c"]).unwrap();
        let target = pseudo_dataset("t", Domain::Healthworker, 40, 7);
        let (lab, held) = crate::data::split_labelled(&target, &crate::data::SplitSpec::new(0.5, 3).unwrap()).unwrap();
        let held = HeldoutSet::seal(held).unwrap();
        let cfg = ModelConfig { beta: 0.0, ..ModelConfig::default() };
        let hier = run_method(MethodId::Hier, &[], &lab, &held, &vocab, &cfg).unwrap();

        // Direct multinomial score from the labelled slice's own smoothed PPVs.
        let refs: Vec<&Observation> = lab.observations.iter().collect();
        let ppv = crate::hierarchy::empirical_ppv(&refs, &vocab).unwrap().ppv;
        let center = crate::hierarchy::log_simplex_center(&ppv, 1.0);
        let direct: Vec<f64> = held.observations().iter().map(|o| o.dot(&center)).collect();

        let (_, model) = fit_two_stage(&[], &lab, &vocab, &cfg, Shape::DomainOnly).unwrap();
        let orientation: f64 = model.weights.coefficients.iter().sum();
        let oriented: Vec<f64> = direct.iter().map(|s| s * orientation.signum()).collect();
        assert!(same_ranking(&hier, &oriented));
    }

    #[test]
    fn scores_csv_layout() {
        let csv = scores_csv(MethodId::HierP, &[("a,1".into(), 0.25), ("b".into(), -1.0)]).unwrap();
        assert_eq!(csv, "obs_id,method,score\n\"a,1\",HIER_P,0.25\nb,HIER_P,-1\n");
    }
}
