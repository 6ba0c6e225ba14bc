//! Synthetic multi-domain, multi-population symptom data with a known generating
//! model, and the Bayes-optimal scores that model implies.
//!
//! For a person with label `y`, collection mode `d` and demographic cell `c`,
//! symptom `j` is present with probability
//!
//! ```text
//! σ(background_j + domain_prevalence[d]_j + group_prevalence[c]_j
//!   + s_y · (base_j + domain_effect[d]_j + group_effect[c]_j) + ε[d, c, y, j])
//! ```
//!
//! where `s_y` is +1 for positives and −1 for negatives, and `ε ~ N(0, noise_sd²)` is
//! drawn once per truth entry. The `*_effect` maps change how predictive a symptom
//! is; the `*_prevalence` maps change how often it is reported regardless of label.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::{AgeGroup, Dataset, Domain, Gender, Observation, SymptomVocabulary};
use crate::error::{check_len, Error, Result};
use crate::logreg::sigmoid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDataset {
    pub dataset_id: String,
    pub domain: Domain,
    pub n_obs: usize,
    /// Probability of each (age group, gender) cell: rows in age-bin order, columns (male, female).
    pub mixture: [[f64; 2]; 5],
    pub positive_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_symptoms: usize,
    /// Column names; defaults to `symptom_01`, `symptom_02`, …
    #[serde(default)]
    pub symptom_names: Option<Vec<String>>,
    pub datasets: Vec<SynthDataset>,
    /// Label-independent prevalence logit per symptom; zeros when omitted.
    #[serde(default)]
    pub background: Option<Vec<f64>>,
    pub base_predictivity: Vec<f64>,
    #[serde(default)]
    pub domain_effect: BTreeMap<Domain, Vec<f64>>,
    /// Keys are an age group (`"65+"`), a gender (`"female"`) or a cell (`"65+/female"`);
    /// a cell's effect is the sum of every matching entry.
    #[serde(default)]
    pub group_effect: BTreeMap<String, Vec<f64>>,
    /// Label-independent logit shift per collection mode.
    #[serde(default)]
    pub domain_prevalence: BTreeMap<Domain, Vec<f64>>,
    /// Label-independent logit shift per demographic key, keyed like `group_effect`.
    #[serde(default)]
    pub group_prevalence: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub noise_sd: f64,
    pub seed: u64,
}

enum GroupKey {
    Age(AgeGroup),
    Gender(Gender),
    Cell(AgeGroup, Gender),
}

fn parse_group_key(key: &str) -> Option<GroupKey> {
    if let Some((a, g)) = key.split_once('/') {
        return Some(GroupKey::Cell(AgeGroup::parse(a)?, Gender::parse(g)?));
    }
    AgeGroup::parse(key)
        .map(GroupKey::Age)
        .or_else(|| Gender::parse(key).map(GroupKey::Gender))
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_symptoms;
        if k == 0 {
            return Err(Error::validation("n_symptoms must be >= 1"));
        }
        if self.datasets.is_empty() {
            return Err(Error::validation("spec has no datasets"));
        }
        let mut ids = BTreeSet::new();
        for d in &self.datasets {
            if !ids.insert(d.dataset_id.as_str()) {
                return Err(Error::validation(format!("duplicate dataset `{}`", d.dataset_id)));
            }
            let cells = d.mixture.iter().flatten();
            if cells.clone().any(|m| !(*m >= 0.0 && m.is_finite())) {
                return Err(Error::validation(format!("dataset `{}`: negative mixture weight", d.dataset_id)));
            }
            let total: f64 = cells.sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!(
                    "dataset `{}`: mixture sums to {total}, not 1",
                    d.dataset_id
                )));
            }
            if !(d.positive_rate > 0.0 && d.positive_rate < 1.0) {
                return Err(Error::validation(format!("dataset `{}`: positive_rate outside (0,1)", d.dataset_id)));
            }
            if d.n_obs == 0 {
                return Err(Error::validation(format!("dataset `{}`: n_obs is 0", d.dataset_id)));
            }
        }
        check_len(k, self.base_predictivity.len())?;
        if let Some(b) = &self.background {
            check_len(k, b.len())?;
        }
        if let Some(names) = &self.symptom_names {
            check_len(k, names.len())?;
            SymptomVocabulary::new(names)?;
        }
        for v in self.domain_effect.values().chain(self.domain_prevalence.values()) {
            check_len(k, v.len())?;
        }
        for (key, v) in self.group_effect.iter().chain(&self.group_prevalence) {
            if parse_group_key(key).is_none() {
                return Err(Error::validation(format!("unknown group key `{key}`")));
            }
            check_len(k, v.len())?;
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::validation("noise_sd must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Result<SymptomVocabulary> {
        match &self.symptom_names {
            Some(names) => SymptomVocabulary::new(names),
            None => SymptomVocabulary::new((1..=self.n_symptoms).map(|j| format!("symptom_{j:02}"))),
        }
    }

    fn cell_sum(&self, map: &BTreeMap<String, Vec<f64>>, age: AgeGroup, gender: Gender) -> Vec<f64> {
        let mut out = vec![0.0; self.n_symptoms];
        for (key, v) in map {
            let hit = match parse_group_key(key) {
                Some(GroupKey::Age(a)) => a == age,
                Some(GroupKey::Gender(g)) => g == gender,
                Some(GroupKey::Cell(a, g)) => a == age && g == gender,
                None => false,
            };
            if hit {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x;
                }
            }
        }
        out
    }

    /// Four datasets in two collection modes with skewed demographics; sizes and
    /// positive rates follow the published study counts, and the first dataset has
    /// no 5-15 year olds. Reporting propensity falls with age (young children have
    /// many symptoms reported for them, the elderly few) and is higher in the
    /// citizen-science mode. Predictivity shifts mildly by mode and age.
    pub fn benchmark() -> Self {
        const NAMES: [&str; 16] = [
            "fever",
            "cough",
            "sore_throat",
            "runny_nose",
            "muscle_ache",
            "fatigue",
            "headache",
            "chills",
            "sneezing",
            "nausea",
            "diarrhea",
            "shortness_of_breath",
            "ear_pain",
            "loss_of_appetite",
            "vomiting",
            "sweats",
        ];
        const CORE: [usize; 4] = [0, 1, 4, 7];
        let k = NAMES.len();
        let all = |v: f64| vec![v; k];
        let alternating = |v: f64| (0..k).map(|j| if j % 2 == 0 { v } else { -v }).collect::<Vec<_>>();
        // The first eight are common respiratory complaints, the rest rarer.
        let background = (0..k)
            .map(|j| if j < 8 { -0.2 } else { -1.2 } + 0.1 * ((j * 7 % 5) as f64 - 2.0))
            .collect();
        let base_predictivity = (0..k)
            .map(|j| {
                let scale = if CORE.contains(&j) {
                    1.6
                } else if j < 8 {
                    1.0
                } else {
                    0.5
                };
                0.25 * scale
            })
            .collect();
        let ds = |id: &str, domain, n_obs, mixture, positives: f64| SynthDataset {
            dataset_id: id.into(),
            domain,
            n_obs,
            mixture,
            positive_rate: positives / n_obs as f64,
        };
        SynthSpec {
            n_symptoms: k,
            symptom_names: Some(NAMES.iter().map(|s| s.to_string()).collect()),
            datasets: vec![
                ds(
                    "goviral",
                    Domain::CitizenScience,
                    520,
                    [[0.03, 0.03], [0.0, 0.0], [0.22, 0.38], [0.12, 0.16], [0.03, 0.03]],
                    291.0,
                ),
                ds(
                    "fluwatch",
                    Domain::CitizenScience,
                    915,
                    [[0.04, 0.04], [0.08, 0.08], [0.14, 0.2], [0.16, 0.18], [0.04, 0.04]],
                    567.0,
                ),
                ds(
                    "hongkong",
                    Domain::Healthworker,
                    4954,
                    [[0.05, 0.05], [0.12, 0.11], [0.12, 0.18], [0.1, 0.13], [0.06, 0.08]],
                    1471.0,
                ),
                ds(
                    "hutterite",
                    Domain::Healthworker,
                    1281,
                    [[0.12, 0.12], [0.2, 0.2], [0.1, 0.1], [0.05, 0.05], [0.03, 0.03]],
                    787.0,
                ),
            ],
            background: Some(background),
            base_predictivity,
            domain_effect: BTreeMap::from([
                (Domain::CitizenScience, all(-0.05)),
                (Domain::Healthworker, all(0.05)),
            ]),
            group_effect: BTreeMap::from([
                ("0-4".into(), alternating(0.1)),
                ("65+".into(), alternating(-0.1)),
                ("female".into(), all(0.03)),
                ("male".into(), all(-0.03)),
            ]),
            domain_prevalence: BTreeMap::from([
                (Domain::CitizenScience, all(0.3)),
                (Domain::Healthworker, all(-0.3)),
            ]),
            group_prevalence: BTreeMap::from([
                ("0-4".into(), all(1.0)),
                ("5-15".into(), all(0.5)),
                ("16-44".into(), all(0.0)),
                ("45-64".into(), all(-0.5)),
                ("65+".into(), all(-1.0)),
                ("female".into(), all(0.15)),
                ("male".into(), all(-0.15)),
            ]),
            noise_sd: 0.1,
            seed: 20_190_901,
        }
    }

    /// PPV of each symptom over a dataset's whole population under `truth`.
    pub fn analytic_dataset_ppv(&self, dataset_index: usize, truth: &GroundTruth) -> Result<Vec<f64>> {
        let d = self
            .datasets
            .get(dataset_index)
            .ok_or_else(|| Error::validation(format!("no dataset {dataset_index}")))?;
        let pi = d.positive_rate;
        let mut num = vec![0.0; self.n_symptoms];
        let mut den = vec![0.0; self.n_symptoms];
        for a in AgeGroup::ALL {
            for g in Gender::ALL {
                let m = d.mixture[a.index()][g.index()];
                if m == 0.0 {
                    continue;
                }
                let cell = truth.cell(d.domain, a, g)?;
                for j in 0..self.n_symptoms {
                    num[j] += m * pi * cell.p_pos[j];
                    den[j] += m * (pi * cell.p_pos[j] + (1.0 - pi) * cell.p_neg[j]);
                }
            }
        }
        Ok(num.iter().zip(&den).map(|(n, d)| if *d == 0.0 { 0.0 } else { n / d }).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthCell {
    pub domain: Domain,
    pub age_group: AgeGroup,
    pub gender: Gender,
    /// P(symptom present | positive)
    pub p_pos: Vec<f64>,
    /// P(symptom present | negative)
    pub p_neg: Vec<f64>,
}

/// Symptom emission probabilities per (domain, demographic cell) and label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub cells: Vec<TruthCell>,
}

impl GroundTruth {
    pub fn cell(&self, domain: Domain, age: AgeGroup, gender: Gender) -> Result<&TruthCell> {
        self.cells
            .iter()
            .find(|c| c.domain == domain && c.age_group == age && c.gender == gender)
            .ok_or_else(|| Error::validation(format!("truth has no cell for {domain}/{age}/{gender}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

const TRUTH_STREAM: u64 = 0;

/// Draws every dataset of `spec` and returns them with the generating truth.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<Dataset>, GroundTruth)> {
    spec.validate()?;
    let k = spec.n_symptoms;
    let background = spec.background.clone().unwrap_or_else(|| vec![0.0; k]);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::validation(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(TRUTH_STREAM);

    let domains: BTreeSet<Domain> = spec.datasets.iter().map(|d| d.domain).collect();
    let mut cells = Vec::new();
    for &domain in &domains {
        let zeros = vec![0.0; k];
        let dom = spec.domain_effect.get(&domain).unwrap_or(&zeros);
        let dom_prev = spec.domain_prevalence.get(&domain).unwrap_or(&zeros);
        for a in AgeGroup::ALL {
            for g in Gender::ALL {
                let grp = spec.cell_sum(&spec.group_effect, a, g);
                let grp_prev = spec.cell_sum(&spec.group_prevalence, a, g);
                let mut p_pos = Vec::with_capacity(k);
                let mut p_neg = Vec::with_capacity(k);
                for j in 0..k {
                    let signal = spec.base_predictivity[j] + dom[j] + grp[j];
                    let (e_pos, e_neg) = if spec.noise_sd > 0.0 {
                        (noise.sample(&mut rng), noise.sample(&mut rng))
                    } else {
                        (0.0, 0.0)
                    };
                    let shift = background[j] + dom_prev[j] + grp_prev[j];
                    p_pos.push(sigmoid(shift + signal + e_pos));
                    p_neg.push(sigmoid(shift - signal + e_neg));
                }
                cells.push(TruthCell {
                    domain,
                    age_group: a,
                    gender: g,
                    p_pos,
                    p_neg,
                });
            }
        }
    }
    let truth = GroundTruth { cells };

    let mut datasets = Vec::with_capacity(spec.datasets.len());
    for (i, d) in spec.datasets.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let weights: Vec<f64> = d.mixture.iter().flatten().copied().collect();
        let cell_dist = WeightedIndex::new(&weights).map_err(|e| Error::validation(e.to_string()))?;
        let mut observations = Vec::with_capacity(d.n_obs);
        for n in 0..d.n_obs {
            let c = cell_dist.sample(&mut rng);
            let (age, gender) = (AgeGroup::ALL[c / 2], Gender::ALL[c % 2]);
            let label = rng.random::<f64>() < d.positive_rate;
            let cell = truth.cell(d.domain, age, gender)?;
            let probs = if label { &cell.p_pos } else { &cell.p_neg };
            let symptoms = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
            observations.push(Observation {
                obs_id: format!("{}-{:05}", d.dataset_id, n),
                symptoms,
                label: Some(label),
                age_group: age,
                gender,
                dataset_id: d.dataset_id.clone(),
            });
        }
        datasets.push(Dataset::new(d.dataset_id.clone(), d.domain, observations)?);
    }
    Ok((datasets, truth))
}

/// Log-likelihood ratio of positive vs negative under the generating model.
pub fn oracle_scores(dataset: &Dataset, truth: &GroundTruth) -> Result<Vec<f64>> {
    dataset
        .observations
        .iter()
        .map(|o| {
            let cell = truth.cell(dataset.domain, o.age_group, o.gender)?;
            check_len(cell.p_pos.len(), o.symptoms.len())?;
            Ok(o.symptoms
                .iter()
                .zip(cell.p_pos.iter().zip(&cell.p_neg))
                .map(|(&s, (&p1, &p0))| if s { (p1 / p0).ln() } else { ((1.0 - p1) / (1.0 - p0)).ln() })
                .sum())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::auc;
    use crate::hierarchy::{build_hierarchy, compute_stats};

    fn small_spec() -> SynthSpec {
        SynthSpec {
            n_symptoms: 3,
            symptom_names: None,
            datasets: vec![SynthDataset {
                dataset_id: "a".into(),
                domain: Domain::CitizenScience,
                n_obs: 200,
                mixture: [[0.1, 0.1], [0.0, 0.0], [0.3, 0.3], [0.1, 0.0], [0.05, 0.05]],
                positive_rate: 0.4,
            }],
            background: None,
            base_predictivity: vec![1.0, 0.5, 0.0],
            domain_effect: BTreeMap::new(),
            group_effect: BTreeMap::new(),
            domain_prevalence: BTreeMap::new(),
            group_prevalence: BTreeMap::new(),
            noise_sd: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn null_generator_has_identical_cells() {
        let mut spec = small_spec();
        spec.datasets.push(SynthDataset {
            dataset_id: "b".into(),
            domain: Domain::Healthworker,
            ..spec.datasets[0].clone()
        });
        let (_, truth) = generate(&spec).unwrap();
        assert_eq!(truth.cells.len(), 20);
        for c in &truth.cells {
            assert_eq!(c.p_pos, truth.cells[0].p_pos);
            assert_eq!(c.p_neg, truth.cells[0].p_neg);
        }
    }

    #[test]
    fn zero_mass_cells_are_empty_and_generation_is_reproducible() {
        let spec = small_spec();
        let (ds, truth) = generate(&spec).unwrap();
        assert!(ds[0].observations.iter().all(|o| o.age_group != AgeGroup::A5_15));
        assert!(ds[0]
            .observations
            .iter()
            .all(|o| !(o.age_group == AgeGroup::A45_64 && o.gender == Gender::Female)));
        assert_eq!(generate(&spec).unwrap(), (ds.clone(), truth));
        let mut other = spec.clone();
        other.seed = 2;
        assert_ne!(generate(&other).unwrap().0, ds);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small_spec();
        spec.datasets[0].mixture[0][0] = 0.2;
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("`a`"), "{err}");
        let mut spec = small_spec();
        spec.base_predictivity.pop();
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.group_effect.insert("teenagers".into(), vec![0.0; 3]);
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.datasets[0].positive_rate = 1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn empirical_frequencies_match_truth() {
        let mut spec = small_spec();
        spec.datasets[0].n_obs = 50_000;
        spec.datasets[0].mixture = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        spec.noise_sd = 0.3;
        let (ds, truth) = generate(&spec).unwrap();
        let cell = truth.cell(Domain::CitizenScience, AgeGroup::A16_44, Gender::Male).unwrap();
        for (label, probs) in [(true, &cell.p_pos), (false, &cell.p_neg)] {
            let rows: Vec<_> = ds[0].observations.iter().filter(|o| o.label == Some(label)).collect();
            for j in 0..3 {
                let freq = rows.iter().filter(|o| o.symptoms[j]).count() as f64 / rows.len() as f64;
                assert!((freq - probs[j]).abs() < 0.01, "{label} {j}: {freq} vs {}", probs[j]);
            }
        }
    }

    #[test]
    fn uninformative_truth_gives_constant_oracle() {
        let mut spec = small_spec();
        spec.base_predictivity = vec![0.0; 3];
        let (ds, truth) = generate(&spec).unwrap();
        let s = oracle_scores(&ds[0], &truth).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
        assert_eq!(auc(&s, &ds[0].labels().unwrap()).unwrap(), 0.5);
    }

    #[test]
    fn perfectly_predictive_symptom_reaches_ceiling() {
        let mut spec = small_spec();
        spec.n_symptoms = 1;
        spec.base_predictivity = vec![12.0];
        spec.datasets[0].n_obs = 10_000;
        let (ds, truth) = generate(&spec).unwrap();
        let s = oracle_scores(&ds[0], &truth).unwrap();
        let a = auc(&s, &ds[0].labels().unwrap()).unwrap();
        // σ(12) ≈ 1 − 6e-6, so the generator's separability ceiling is ~1.
        assert!(a > 0.9999, "{a}");
    }

    #[test]
    fn oracle_requires_covered_cells() {
        let (ds, mut truth) = generate(&small_spec()).unwrap();
        truth.cells.retain(|c| c.age_group != AgeGroup::A16_44);
        assert!(oracle_scores(&ds[0], &truth).is_err());
    }

    #[test]
    fn hierarchy_ppvs_converge_to_analytic() {
        let mut spec = SynthSpec::benchmark();
        for d in &mut spec.datasets {
            d.n_obs = 10_000;
        }
        let (ds, truth) = generate(&spec).unwrap();
        let vocab = spec.vocabulary().unwrap();
        let h = build_hierarchy(&ds, &vocab).unwrap();
        let stats = compute_stats(&h, &ds).unwrap();
        for (i, d) in spec.datasets.iter().enumerate() {
            let analytic = spec.analytic_dataset_ppv(i, &truth).unwrap();
            let empirical = &stats[&format!("dataset:{}", d.dataset_id)].ppv;
            for (a, e) in analytic.iter().zip(empirical) {
                assert!((a - e).abs() < 0.02, "{}: {a} vs {e}", d.dataset_id);
            }
        }
    }

    #[test]
    fn benchmark_spec_is_valid_and_json_stable() {
        let b = SynthSpec::benchmark();
        b.validate().unwrap();
        assert_eq!(SynthSpec::from_json(&b.to_json()).unwrap(), b);
        assert!(b.datasets[0].mixture[1].iter().all(|&m| m == 0.0));
    }
}
