//! Stage two: per-node score features for a target dataset and the logistic
//! regression that learns how much each node should count.

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::data::{AgeGroup, Dataset, Domain, Gender, Observation, SymptomVocabulary};
use crate::error::{Error, Result};
use crate::hierarchy::{build_hierarchy_with, center_priors, compute_stats, Hierarchy, NodeKey, Shape};
use crate::logreg::{fit_logreg, sigmoid};
use crate::mapfit::{fit_map, FittedParams};

/// Which observations a column is active for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ColumnKind {
    Root,
    Age(AgeGroup),
    Gender(Gender),
    Domain,
    Dataset,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelColumn {
    pub node_id: String,
    pub kind: ColumnKind,
}

/// Column layout of the level features: root, ages in bin order, genders
/// (male, female), the target's domain, the target dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelFeatureEncoding {
    pub columns: Vec<LevelColumn>,
}

impl LevelFeatureEncoding {
    pub fn new(shape: Shape, target_domain: Domain, target_dataset_id: &str) -> Self {
        let col = |key: NodeKey, kind| LevelColumn { node_id: key.id(), kind };
        let mut columns = vec![col(NodeKey::Root, ColumnKind::Root)];
        if shape == Shape::PopulationAware {
            columns.extend(AgeGroup::ALL.map(|a| col(NodeKey::Age(a), ColumnKind::Age(a))));
            columns.extend(Gender::ALL.map(|g| col(NodeKey::Gender(g), ColumnKind::Gender(g))));
        }
        columns.push(col(NodeKey::Domain(target_domain), ColumnKind::Domain));
        columns.push(col(NodeKey::Dataset(target_dataset_id.to_string()), ColumnKind::Dataset));
        LevelFeatureEncoding { columns }
    }

    /// Encoding for `target_dataset_id` matching the shape of `hierarchy`.
    pub fn for_hierarchy(hierarchy: &Hierarchy, target_dataset_id: &str) -> Result<Self> {
        let domain = hierarchy
            .dataset_domain(target_dataset_id)
            .ok_or_else(|| Error::UnknownNode(NodeKey::Dataset(target_dataset_id.into()).id()))?;
        Ok(Self::new(hierarchy.shape(), domain, target_dataset_id))
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn position(&self, kind: ColumnKind) -> Option<usize> {
        self.columns.iter().position(|c| c.kind == kind)
    }
}

/// Per-node scores `Σ_j x_j θ_j^n`; age and gender columns other than the observation's own are 0.
pub fn level_features(obs: &Observation, fitted: &FittedParams, encoding: &LevelFeatureEncoding) -> Result<Vec<f64>> {
    encoding
        .columns
        .iter()
        .map(|c| {
            let active = match c.kind {
                ColumnKind::Age(a) => obs.age_group == a,
                ColumnKind::Gender(g) => obs.gender == g,
                ColumnKind::Root | ColumnKind::Domain | ColumnKind::Dataset => true,
            };
            if !active {
                return Ok(0.0);
            }
            let theta = fitted.params(&c.node_id)?;
            crate::error::check_len(theta.len(), obs.symptoms.len())?;
            Ok(obs.dot(theta))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelWeights {
    #[serde(with = "crate::reals::vec")]
    pub coefficients: Vec<f64>,
    #[serde(with = "crate::reals::scalar")]
    pub intercept: f64,
    #[serde(with = "crate::reals::scalar")]
    pub l2_strength: f64,
}

/// Learns level weights on the labelled target slice.
pub fn fit_level_weights(
    target_labelled: &Dataset,
    fitted: &FittedParams,
    encoding: &LevelFeatureEncoding,
    l2_strength: f64,
) -> Result<LevelWeights> {
    let y = target_labelled.labels()?;
    let x = target_labelled
        .observations
        .iter()
        .map(|o| level_features(o, fitted, encoding))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_logreg(&x, &y, l2_strength)?;
    Ok(LevelWeights {
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        l2_strength,
    })
}

/// Both stages fitted for one target dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct HierPModel {
    pub fitted: FittedParams,
    pub weights: LevelWeights,
    pub encoding: LevelFeatureEncoding,
    pub target_dataset_id: String,
}

pub fn predict_proba(obs: &Observation, model: &HierPModel) -> Result<f64> {
    let x = level_features(obs, &model.fitted, &model.encoding)?;
    let z = model.weights.intercept
        + x.iter()
            .zip(&model.weights.coefficients)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    Ok(sigmoid(z))
}

/// Runs stage one on `sources` plus the labelled target slice, then stage two on that slice.
pub fn fit_two_stage(
    sources: &[Dataset],
    target_labelled: &Dataset,
    vocab: &SymptomVocabulary,
    config: &ModelConfig,
    shape: Shape,
) -> Result<(Hierarchy, HierPModel)> {
    let mut corpus: Vec<Dataset> = sources.to_vec();
    corpus.push(target_labelled.clone());
    let hierarchy = build_hierarchy_with(&corpus, vocab, shape)?;
    let stats = compute_stats(&hierarchy, &corpus)?;
    let mut hierarchy = center_priors(&hierarchy, &stats, config.lambda)?;
    let fitted = fit_map(&mut hierarchy, &stats, config)?;
    let encoding = LevelFeatureEncoding::for_hierarchy(&hierarchy, &target_labelled.dataset_id)?;
    let weights = fit_level_weights(target_labelled, &fitted, &encoding, config.l2_strength)?;
    let model = HierPModel {
        fitted,
        weights,
        encoding,
        target_dataset_id: target_labelled.dataset_id.clone(),
    };
    Ok((hierarchy, model))
}

/// On-disk model: stage-two weights plus a reference to the stage-one parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub fitted_params_ref: String,
    /// SHA-256 of the referenced parameter file.
    pub fitted_params_sha256: String,
    pub encoding: Vec<LevelColumn>,
    #[serde(with = "crate::reals::vec")]
    pub coefficients: Vec<f64>,
    #[serde(with = "crate::reals::scalar")]
    pub intercept: f64,
    #[serde(with = "crate::reals::scalar")]
    pub l2_strength: f64,
    pub target_dataset_id: String,
}

impl ModelFile {
    pub fn new(model: &HierPModel, fitted_params_ref: &str, fitted_params_sha256: &str) -> Self {
        ModelFile {
            fitted_params_ref: fitted_params_ref.to_string(),
            fitted_params_sha256: fitted_params_sha256.to_string(),
            encoding: model.encoding.columns.clone(),
            coefficients: model.weights.coefficients.clone(),
            intercept: model.weights.intercept,
            l2_strength: model.weights.l2_strength,
            target_dataset_id: model.target_dataset_id.clone(),
        }
    }

    /// Reassembles a model given the parameters the file refers to.
    pub fn into_model(self, fitted: FittedParams) -> Result<HierPModel> {
        if self.coefficients.len() != self.encoding.len() {
            return Err(Error::LengthMismatch {
                expected: self.encoding.len(),
                actual: self.coefficients.len(),
            });
        }
        for c in &self.encoding {
            fitted.params(&c.node_id)?;
        }
        Ok(HierPModel {
            fitted,
            weights: LevelWeights {
                coefficients: self.coefficients,
                intercept: self.intercept,
                l2_strength: self.l2_strength,
            },
            encoding: LevelFeatureEncoding { columns: self.encoding },
            target_dataset_id: self.target_dataset_id,
        })
    }
}
