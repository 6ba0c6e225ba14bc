//! Observation and dataset types, CSV ingestion, vocabulary alignment,
//! demographic binning and labelled/heldout splitting.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oldest age accepted by [`bin_age`]; anything above is treated as corrupt input.
pub const MAX_AGE_YEARS: u32 = 130;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "0-4")]
    A0_4,
    #[serde(rename = "5-15")]
    A5_15,
    #[serde(rename = "16-44")]
    A16_44,
    #[serde(rename = "45-64")]
    A45_64,
    #[serde(rename = "65+")]
    A65Plus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 5] = [
        AgeGroup::A0_4,
        AgeGroup::A5_15,
        AgeGroup::A16_44,
        AgeGroup::A45_64,
        AgeGroup::A65Plus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::A0_4 => "0-4",
            AgeGroup::A5_15 => "5-15",
            AgeGroup::A16_44 => "16-44",
            AgeGroup::A45_64 => "45-64",
            AgeGroup::A65Plus => "65+",
        }
    }

    pub fn parse(token: &str) -> Option<AgeGroup> {
        let t = token.trim();
        AgeGroup::ALL.into_iter().find(|g| {
            g.label() == t || format!("{g:?}").eq_ignore_ascii_case(t) || (t == "A65_PLUS" && *g == AgeGroup::A65Plus)
        })
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Bins an age in years into one of the five closed age intervals.
pub fn bin_age(age_years: u32) -> Result<AgeGroup> {
    Ok(match age_years {
        0..=4 => AgeGroup::A0_4,
        5..=15 => AgeGroup::A5_15,
        16..=44 => AgeGroup::A16_44,
        45..=64 => AgeGroup::A45_64,
        65..=MAX_AGE_YEARS => AgeGroup::A65Plus,
        _ => {
            return Err(Error::validation(format!(
                "age {age_years} exceeds {MAX_AGE_YEARS} years"
            )))
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    pub fn parse(token: &str) -> Option<Gender> {
        match token.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Some(Gender::Male),
            "female" | "f" => Some(Gender::Female),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Data collection mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    CitizenScience,
    Healthworker,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::CitizenScience, Domain::Healthworker];

    pub fn label(self) -> &'static str {
        match self {
            Domain::CitizenScience => "citizen_science",
            Domain::Healthworker => "healthworker",
        }
    }

    pub fn parse(token: &str) -> Option<Domain> {
        match token.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "citizen_science" | "cs" => Some(Domain::CitizenScience),
            "healthworker" | "hw" => Some(Domain::Healthworker),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One person-episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub obs_id: String,
    pub symptoms: Vec<bool>,
    /// Lab-confirmed positive; `None` when unlabelled.
    pub label: Option<bool>,
    pub age_group: AgeGroup,
    pub gender: Gender,
    pub dataset_id: String,
}

impl Observation {
    /// Dot product of the symptom indicator vector with `weights`.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.symptoms
            .iter()
            .zip(weights)
            .filter(|(present, _)| **present)
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn symptom_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.symptoms.iter().map(|&s| if s { 1.0 } else { 0.0 })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub dataset_id: String,
    pub domain: Domain,
    pub observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(dataset_id: impl Into<String>, domain: Domain, observations: Vec<Observation>) -> Result<Self> {
        let dataset_id = dataset_id.into();
        if observations.is_empty() {
            return Err(Error::validation(format!("dataset `{dataset_id}` is empty")));
        }
        if let Some(o) = observations.iter().find(|o| o.dataset_id != dataset_id) {
            return Err(Error::validation(format!(
                "observation `{}` belongs to `{}`, not `{dataset_id}`",
                o.obs_id, o.dataset_id
            )));
        }
        Ok(Dataset {
            dataset_id,
            domain,
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Labels of every observation; errors on the first unlabelled one.
    pub fn labels(&self) -> Result<Vec<bool>> {
        self.observations
            .iter()
            .map(|o| o.label.ok_or_else(|| Error::Unlabelled(o.obs_id.clone())))
            .collect()
    }
}

/// Canonical, ordered symptom list shared by every dataset and parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct SymptomVocabulary {
    names: Vec<String>,
}

fn normalize_symptom(name: &str) -> String {
    name.trim().to_lowercase()
}

impl SymptomVocabulary {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(|n| normalize_symptom(n.as_ref())).collect();
        if names.is_empty() {
            return Err(Error::validation("symptom vocabulary is empty"));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::validation("empty symptom name"));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::validation(format!("duplicate symptom `{n}`")));
            }
        }
        Ok(SymptomVocabulary { names })
    }

    /// Reads a vocabulary file: a JSON array of strings, or one name per line.
    pub fn from_text(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('[') {
            let names: Vec<String> = serde_json::from_str(text)?;
            return Self::new(names);
        }
        Self::new(text.lines().filter(|l| !l.trim().is_empty()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let name = normalize_symptom(name);
        self.names.iter().position(|n| *n == name)
    }
}

impl TryFrom<Vec<String>> for SymptomVocabulary {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::new(names)
    }
}

impl From<SymptomVocabulary> for Vec<String> {
    fn from(v: SymptomVocabulary) -> Self {
        v.names
    }
}

/// Normalized union of symptom headers from several sources, sorted lexicographically.
pub fn align_vocabulary(raw_headers: &[Vec<String>]) -> Result<SymptomVocabulary> {
    let mut union = BTreeSet::new();
    for (i, header) in raw_headers.iter().enumerate() {
        if header.is_empty() {
            return Err(Error::validation(format!("header list {i} is empty")));
        }
        for name in header {
            let n = normalize_symptom(name);
            if n.is_empty() {
                return Err(Error::validation(format!("header list {i} has an empty name")));
            }
            union.insert(n);
        }
    }
    if union.is_empty() {
        return Err(Error::validation("no symptom names"));
    }
    SymptomVocabulary::new(union)
}

/// A parsed dataset plus non-fatal notes (vocabulary columns filled with zeros).
#[derive(Clone, Debug)]
pub struct ParsedDataset {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

const FIXED_COLUMNS: [&str; 5] = ["obs_id", "age_years", "age_group", "gender", "label"];

/// Parses a dataset CSV (header mandatory) against `vocab`.
pub fn parse_dataset(
    csv_text: &str,
    vocab: &SymptomVocabulary,
    dataset_id: &str,
    domain: Domain,
) -> Result<ParsedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::row(1, format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::row(1, "missing header row"));
    }

    let mut column_of: HashMap<String, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        let key = h.to_lowercase();
        if column_of.insert(key.clone(), i).is_some() {
            return Err(Error::row(1, format!("duplicate column `{h}`")));
        }
    }
    let required = |name: &str| -> Result<usize> {
        column_of
            .get(name)
            .copied()
            .ok_or_else(|| Error::row(1, format!("missing column `{name}`")))
    };
    let id_col = required("obs_id")?;
    let gender_col = required("gender")?;
    let label_col = required("label")?;
    let age_col = match (column_of.get("age_years"), column_of.get("age_group")) {
        (Some(_), Some(_)) => return Err(Error::row(1, "both age_years and age_group present")),
        (Some(&c), None) => AgeColumn::Years(c),
        (None, Some(&c)) => AgeColumn::Group(c),
        (None, None) => return Err(Error::row(1, "missing column `age_years` or `age_group`")),
    };

    // Symptom column index -> vocabulary position.
    let mut symptom_cols = Vec::new();
    let mut covered = vec![false; vocab.len()];
    for (i, h) in header.iter().enumerate() {
        if FIXED_COLUMNS.contains(&h.to_lowercase().as_str()) {
            continue;
        }
        let Some(j) = vocab.index_of(h) else {
            return Err(Error::row(1, format!("unknown symptom column `{h}`")));
        };
        covered[j] = true;
        symptom_cols.push((i, j));
    }
    let warnings: Vec<String> = vocab
        .names()
        .iter()
        .zip(&covered)
        .filter(|(_, c)| !**c)
        .map(|(n, _)| format!("{dataset_id}: symptom column `{n}` absent; filled with 0"))
        .collect();

    let mut observations = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::row(
                row,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let field = |c: usize| record.get(c).unwrap_or("").trim();

        let obs_id = field(id_col);
        if obs_id.is_empty() {
            return Err(Error::row(row, "empty obs_id"));
        }
        let age_group = match age_col {
            AgeColumn::Years(c) => {
                let years: u32 = field(c)
                    .parse()
                    .map_err(|_| Error::row(row, format!("bad age `{}`", field(c))))?;
                bin_age(years).map_err(|e| Error::row(row, e.to_string()))?
            }
            AgeColumn::Group(c) => AgeGroup::parse(field(c))
                .ok_or_else(|| Error::row(row, format!("unknown age group `{}`", field(c))))?,
        };
        let gender = Gender::parse(field(gender_col))
            .ok_or_else(|| Error::row(row, format!("unknown gender `{}`", field(gender_col))))?;
        let label = match field(label_col) {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(Error::row(row, format!("label `{other}` not in {{0,1,empty}}"))),
        };
        let mut symptoms = vec![false; vocab.len()];
        for &(c, j) in &symptom_cols {
            symptoms[j] = match field(c) {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::row(
                        row,
                        format!("symptom `{}` value `{other}` not in {{0,1}}", header[c]),
                    ))
                }
            };
        }
        observations.push(Observation {
            obs_id: obs_id.to_string(),
            symptoms,
            label,
            age_group,
            gender,
            dataset_id: dataset_id.to_string(),
        });
    }

    Ok(ParsedDataset {
        dataset: Dataset::new(dataset_id, domain, observations)?,
        warnings,
    })
}

#[derive(Clone, Copy)]
enum AgeColumn {
    Years(usize),
    Group(usize),
}

/// Writes a dataset in the CSV layout read by [`parse_dataset`] (binned ages).
pub fn serialize_dataset(dataset: &Dataset, vocab: &SymptomVocabulary) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["obs_id", "age_group", "gender", "label"];
    header.extend(vocab.names().iter().map(String::as_str));
    writer.write_record(&header)?;
    for o in &dataset.observations {
        crate::error::check_len(vocab.len(), o.symptoms.len())?;
        let mut rec = vec![
            o.obs_id.clone(),
            o.age_group.label().to_string(),
            o.gender.label().to_string(),
            match o.label {
                None => String::new(),
                Some(true) => "1".into(),
                Some(false) => "0".into(),
            },
        ];
        rec.extend(o.symptoms.iter().map(|&s| if s { "1" } else { "0" }.to_string()));
        writer.write_record(&rec)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::validation(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub proportion_labelled: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(proportion_labelled: f64, seed: u64) -> Result<Self> {
        if !(proportion_labelled > 0.0 && proportion_labelled < 1.0) {
            return Err(Error::validation(format!(
                "proportion {proportion_labelled} outside (0,1)"
            )));
        }
        Ok(SplitSpec {
            proportion_labelled,
            seed,
        })
    }
}

/// Minimum dataset size accepted by [`split_labelled`].
pub const MIN_SPLIT_SIZE: usize = 10;

/// Stratified, seeded split into a labelled slice of `round(p * n)` rows and a heldout remainder.
///
/// Both parts keep their original row order. Whenever a part has at least two rows
/// it receives at least one positive and one negative.
pub fn split_labelled(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let labels = dataset.labels()?;
    let n = labels.len();
    if n < MIN_SPLIT_SIZE {
        return Err(Error::validation(format!(
            "dataset `{}` has {n} labelled observations; need at least {MIN_SPLIT_SIZE}",
            dataset.dataset_id
        )));
    }
    let p = SplitSpec::new(spec.proportion_labelled, spec.seed)?.proportion_labelled;
    let n_lab = (p * n as f64).round() as usize;
    if n_lab == 0 || n_lab >= n {
        return Err(Error::validation(format!(
            "proportion {p} of {n} leaves an empty split"
        )));
    }

    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let (n_pos, n_neg, n_held) = (pos.len(), neg.len(), n - n_lab);
    let feasible_lo = n_lab.saturating_sub(n_neg);
    let feasible_hi = n_pos.min(n_lab);
    let mut lo = feasible_lo;
    let mut hi = feasible_hi;
    if n_lab >= 2 {
        lo = lo.max(1);
        hi = hi.min(n_lab - 1);
    }
    if n_held >= 2 {
        hi = hi.min(n_pos - 1);
        lo = lo.max((n_lab + 1).saturating_sub(n_neg));
    }
    if lo > hi {
        lo = feasible_lo;
        hi = feasible_hi;
    }
    let target = (n_lab as f64 * n_pos as f64 / n as f64).round() as usize;
    let k_pos = target.clamp(lo, hi);

    let mut in_labelled = vec![false; n];
    for &i in pos.iter().take(k_pos).chain(neg.iter().take(n_lab - k_pos)) {
        in_labelled[i] = true;
    }
    let (mut labelled, mut heldout) = (Vec::with_capacity(n_lab), Vec::with_capacity(n_held));
    for (obs, lab) in dataset.observations.iter().zip(in_labelled) {
        if lab {
            labelled.push(obs.clone());
        } else {
            heldout.push(obs.clone());
        }
    }
    Ok((
        Dataset::new(dataset.dataset_id.clone(), dataset.domain, labelled)?,
        Dataset::new(dataset.dataset_id.clone(), dataset.domain, heldout)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab3() -> SymptomVocabulary {
        SymptomVocabulary::new(["cough", "fever", "sore_throat"]).unwrap()
    }

    pub(crate) fn toy_dataset(id: &str, labels: &[bool]) -> Dataset {
        let obs = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Observation {
                obs_id: format!("{id}-{i}"),
                symptoms: vec![i % 2 == 0, i % 3 == 0],
                label: Some(l),
                age_group: AgeGroup::ALL[i % 5],
                gender: Gender::ALL[i % 2],
                dataset_id: id.to_string(),
            })
            .collect();
        Dataset::new(id, Domain::CitizenScience, obs).unwrap()
    }

    #[test]
    fn age_bins_at_stated_points() {
        assert_eq!(bin_age(3).unwrap(), AgeGroup::A0_4);
        assert_eq!(bin_age(15).unwrap(), AgeGroup::A5_15);
        assert_eq!(bin_age(65).unwrap(), AgeGroup::A65Plus);
        assert_eq!(bin_age(44).unwrap(), AgeGroup::A16_44);
        assert_eq!(bin_age(4).unwrap(), AgeGroup::A0_4);
        assert_eq!(bin_age(5).unwrap(), AgeGroup::A5_15);
        assert_eq!(bin_age(64).unwrap(), AgeGroup::A45_64);
        assert_eq!(bin_age(130).unwrap(), AgeGroup::A65Plus);
        assert!(bin_age(131).is_err());
    }

    #[test]
    fn age_bins_partition_range() {
        for age in 0..=MAX_AGE_YEARS {
            let g = bin_age(age).unwrap();
            let matching = AgeGroup::ALL
                .iter()
                .filter(|&&b| {
                    let (lo, hi) = match b {
                        AgeGroup::A0_4 => (0, 4),
                        AgeGroup::A5_15 => (5, 15),
                        AgeGroup::A16_44 => (16, 44),
                        AgeGroup::A45_64 => (45, 64),
                        AgeGroup::A65Plus => (65, u32::MAX),
                    };
                    (lo..=hi).contains(&age)
                })
                .count();
            assert_eq!(matching, 1);
            assert!((g.label()).len() > 0);
        }
    }

    #[test]
    fn parses_well_formed_csv() {
        let csv = "obs_id,age_years,gender,label,cough,fever,sore_throat\n\
                   a,3,male,1,1,0,1\n\
                   b,70,Female,0,0,1,0\n";
        let parsed = parse_dataset(csv, &vocab3(), "d1", Domain::Healthworker).unwrap();
        assert_eq!(parsed.dataset.len(), 2);
        assert!(parsed.warnings.is_empty());
        let b = &parsed.dataset.observations[1];
        assert_eq!(b.age_group, AgeGroup::A65Plus);
        assert_eq!(b.gender, Gender::Female);
        assert_eq!(b.label, Some(false));
        assert_eq!(b.symptoms, vec![false, true, false]);
    }

    #[test]
    fn missing_vocabulary_column_is_filled_and_reported() {
        let csv = "obs_id,age_group,gender,label,Fever,cough\na,16-44,m,,1,1\n";
        let parsed = parse_dataset(csv, &vocab3(), "d1", Domain::CitizenScience).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("sore_throat"));
        let o = &parsed.dataset.observations[0];
        assert_eq!(o.symptoms, vec![true, true, false]);
        assert_eq!(o.label, None);
    }

    #[test]
    fn rejects_bad_rows() {
        let bad_gender = "obs_id,age_years,gender,label,cough\na,3,male,1,1\nb,4,X,0,0\n";
        let err = parse_dataset(bad_gender, &vocab3(), "d", Domain::CitizenScience).unwrap_err();
        assert!(matches!(err, Error::Row { row: 3, .. }), "{err}");

        let bad_label = "obs_id,age_years,gender,label,cough\na,3,male,2,1\n";
        assert!(matches!(
            parse_dataset(bad_label, &vocab3(), "d", Domain::CitizenScience),
            Err(Error::Row { row: 2, .. })
        ));

        let short_row = "obs_id,age_years,gender,label,cough\na,3,male\n";
        assert!(matches!(
            parse_dataset(short_row, &vocab3(), "d", Domain::CitizenScience),
            Err(Error::Row { row: 2, .. })
        ));

        let unknown = "obs_id,age_years,gender,label,sneezing\na,3,male,1,1\n";
        assert!(parse_dataset(unknown, &vocab3(), "d", Domain::CitizenScience).is_err());

        let old = "obs_id,age_years,gender,label,cough\na,131,male,1,1\n";
        assert!(parse_dataset(old, &vocab3(), "d", Domain::CitizenScience).is_err());
    }

    #[test]
    fn vocabulary_alignment() {
        let v = align_vocabulary(&[
            vec!["Fever".into(), "cough".into()],
            vec!["fever".into(), " sore_throat".into()],
        ])
        .unwrap();
        assert_eq!(v.names(), ["cough", "fever", "sore_throat"]);
        assert_eq!(align_vocabulary(&[vec!["a".into()]]).unwrap().names(), ["a"]);
        assert!(align_vocabulary(&[vec![], vec!["a".into()]]).is_err());
        assert!(align_vocabulary(&[]).is_err());
    }

    #[test]
    fn vocabulary_file_formats() {
        let lines = SymptomVocabulary::from_text("fever\ncough\n\n").unwrap();
        let json = SymptomVocabulary::from_text(r#"["fever", "cough"]"#).unwrap();
        assert_eq!(lines, json);
        assert!(SymptomVocabulary::from_text("a\nA\n").is_err());
    }

    #[test]
    fn split_sizes() {
        let labels: Vec<bool> = (0..100).map(|i| i % 3 == 0).collect();
        let ds = toy_dataset("t", &labels);
        let (lab, held) = split_labelled(&ds, &SplitSpec::new(0.2, 7).unwrap()).unwrap();
        assert_eq!((lab.len(), held.len()), (20, 80));
        for part in [&lab, &held] {
            let l = part.labels().unwrap();
            assert!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
        }

        let ds10 = toy_dataset("t", &[true, false, true, false, true, false, true, false, true, false]);
        let (lab, held) = split_labelled(&ds10, &SplitSpec::new(0.1, 1).unwrap()).unwrap();
        assert_eq!((lab.len(), held.len()), (1, 9));
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let labels: Vec<bool> = (0..60).map(|i| i % 4 == 0).collect();
        let ds = toy_dataset("t", &labels);
        let spec = SplitSpec::new(0.25, 42).unwrap();
        assert_eq!(split_labelled(&ds, &spec).unwrap(), split_labelled(&ds, &spec).unwrap());
        let other = split_labelled(&ds, &SplitSpec::new(0.25, 43).unwrap()).unwrap();
        assert_ne!(split_labelled(&ds, &spec).unwrap().0, other.0);
    }

    #[test]
    fn split_rejects_single_class_and_small() {
        let ds = toy_dataset("t", &[true; 20]);
        assert!(matches!(
            split_labelled(&ds, &SplitSpec::new(0.2, 0).unwrap()),
            Err(Error::SingleClass)
        ));
        let small = toy_dataset("t", &[true, false, true]);
        assert!(split_labelled(&small, &SplitSpec::new(0.5, 0).unwrap()).is_err());
        assert!(SplitSpec::new(1.0, 0).is_err());
        assert!(SplitSpec::new(0.0, 0).is_err());
    }

    fn arb_observation(k: usize) -> impl Strategy<Value = Observation> {
        (
            "[a-z0-9]{1,8}",
            prop::collection::vec(any::<bool>(), k),
            prop::option::of(any::<bool>()),
            0usize..5,
            0usize..2,
        )
            .prop_map(|(id, symptoms, label, a, g)| Observation {
                obs_id: id,
                symptoms,
                label,
                age_group: AgeGroup::ALL[a],
                gender: Gender::ALL[g],
                dataset_id: "ds".into(),
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(obs in prop::collection::vec(arb_observation(3), 1..30)) {
            let ds = Dataset::new("ds", Domain::Healthworker, obs).unwrap();
            let text = serialize_dataset(&ds, &vocab3()).unwrap();
            let back = parse_dataset(&text, &vocab3(), "ds", Domain::Healthworker).unwrap();
            prop_assert_eq!(back.dataset, ds);
            prop_assert!(back.warnings.is_empty());
        }

        #[test]
        fn split_partitions(labels in prop::collection::vec(any::<bool>(), 10..120),
                            p in 0.05f64..0.95, seed in any::<u64>()) {
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let n = labels.len();
            let n_lab = (p * n as f64).round() as usize;
            prop_assume!(n_lab > 0 && n_lab < n);
            let ds = toy_dataset("t", &labels);
            let (lab, held) = split_labelled(&ds, &SplitSpec::new(p, seed).unwrap()).unwrap();
            prop_assert_eq!(lab.len(), n_lab);
            let mut ids: Vec<_> = lab.observations.iter().chain(&held.observations)
                .map(|o| o.obs_id.clone()).collect();
            ids.sort();
            let mut all: Vec<_> = ds.observations.iter().map(|o| o.obs_id.clone()).collect();
            all.sort();
            prop_assert_eq!(ids, all);
        }
    }
}
