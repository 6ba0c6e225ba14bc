use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::powell::PowellOptions;

/// Form of the child/parent divergence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// Σ (a - b)²
    #[default]
    SquaredL2,
    /// sqrt(Σ (a - b)²)
    L2,
}

/// How FEDA groups observations into augmentation blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FedaGrouping {
    /// One block per collection mode.
    #[default]
    Domain,
    /// One block per dataset.
    Dataset,
}

/// Hyperparameters for both fitting stages and the baselines.
///
/// Unknown keys are rejected when reading from JSON; missing keys take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Weight of the parent/child divergence.
    pub beta: f64,
    /// Additive smoothing on every PPV weight.
    pub lambda: f64,
    pub powell_tol: f64,
    pub powell_max_iters: usize,
    pub line_search_tol: f64,
    pub seed: u64,
    /// L2 penalty of every logistic regression (stage two and baselines).
    pub l2_strength: f64,
    pub divergence: DivergenceKind,
    pub feda_grouping: FedaGrouping,
    pub target_dataset_id: Option<String>,
    pub proportion_labelled: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            beta: 0.2,
            lambda: 1.0,
            powell_tol: 1e-6,
            powell_max_iters: 200,
            line_search_tol: 1e-8,
            seed: 0,
            l2_strength: 1.0,
            divergence: DivergenceKind::SquaredL2,
            feda_grouping: FedaGrouping::Domain,
            target_dataset_id: None,
            proportion_labelled: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::validation(format!("config: {what}")));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and >= 0");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and > 0");
        }
        if !(self.powell_tol > 0.0) || !(self.line_search_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if self.powell_max_iters == 0 {
            return bad("powell_max_iters must be >= 1");
        }
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return bad("l2_strength must be finite and >= 0");
        }
        if !(self.proportion_labelled > 0.0 && self.proportion_labelled < 1.0) {
            return bad("proportion_labelled must lie in (0,1)");
        }
        Ok(())
    }

    pub fn powell_options(&self) -> PowellOptions {
        PowellOptions {
            tol: self.powell_tol,
            max_iters: self.powell_max_iters,
            line_tol: self.line_search_tol,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ModelConfig::default();
        assert_eq!((c.beta, c.lambda, c.powell_tol, c.powell_max_iters, c.line_search_tol), (0.2, 1.0, 1e-6, 200, 1e-8));
        c.validate().unwrap();
    }

    #[test]
    fn json_partial_and_unknown_keys() {
        let c = ModelConfig::from_json(r#"{"beta": 0.5}"#).unwrap();
        assert_eq!(c.beta, 0.5);
        assert_eq!(c.lambda, 1.0);
        assert!(ModelConfig::from_json(r#"{"betta": 0.5}"#).is_err());
        assert!(ModelConfig::from_json(r#"{"lambda": 0}"#).is_err());
        assert_eq!(ModelConfig::from_json(&c.to_json()).unwrap(), c);
        assert_ne!(c.hash(), ModelConfig::default().hash());
    }
}
