//! AUC, the experiment runner, paired method comparison and result emitters.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_method, EvaluatorKey, HeldoutSet, MethodId};
use crate::config::ModelConfig;
use crate::data::{split_labelled, Dataset, SplitSpec, SymptomVocabulary};
use crate::error::{Error, Result};
use crate::synth::{oracle_scores, GroundTruth};

/// Mann-Whitney AUC with midranks for tied scores.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let midrank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += midrank * pos_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

fn default_methods() -> Vec<MethodId> {
    MethodId::ALL.to_vec()
}

fn default_proportions() -> Vec<f64> {
    vec![0.2]
}

fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub targets: Vec<String>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodId>,
    #[serde(default = "default_proportions")]
    pub proportions: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub config: ModelConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() || self.methods.is_empty() || self.proportions.is_empty() {
            return Err(Error::validation("experiment needs targets, methods and proportions"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("experiment needs at least one seed"));
        }
        if let Some(p) = self.proportions.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::validation(format!("proportion {p} outside (0,1)")));
        }
        self.config.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub target: String,
    pub method: MethodId,
    pub proportion: f64,
    pub seed: u64,
    pub auc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub target: String,
    pub method: MethodId,
    pub proportion: f64,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub n_errors: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Target order as given in the experiment.
    pub targets: Vec<String>,
    pub methods: Vec<MethodId>,
    pub proportions: Vec<f64>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl ResultTable {
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for t in &self.targets {
            for &p in &self.proportions {
                for &m in &self.methods {
                    let cell: Vec<&ResultRow> = self
                        .rows
                        .iter()
                        .filter(|r| &r.target == t && r.proportion == p && r.method == m)
                        .collect();
                    let aucs: Vec<f64> = cell.iter().filter_map(|r| r.auc).collect();
                    let (mean, sd) = mean_sd(&aucs);
                    out.push(Aggregate {
                        target: t.clone(),
                        method: m,
                        proportion: p,
                        mean,
                        sd,
                        n: aucs.len(),
                        n_errors: cell.len() - aucs.len(),
                    });
                }
            }
        }
        out
    }

    pub fn aggregate(&self, target: &str, method: MethodId, proportion: f64) -> Option<Aggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.target == target && a.method == method && a.proportion == proportion && a.n > 0)
    }

    /// AUC by seed for one (target, method, proportion) cell, successful runs only.
    pub fn aucs_by_seed(&self, target: &str, method: MethodId, proportion: f64) -> BTreeMap<u64, f64> {
        self.rows
            .iter()
            .filter(|r| r.target == target && r.method == method && r.proportion == proportion)
            .filter_map(|r| r.auc.map(|a| (r.seed, a)))
            .collect()
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn results_csv(&self) -> String {
        let mut s = String::from("target,method,proportion,seed,auc,error\n");
        for r in &self.rows {
            let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
            let err = r.error.as_deref().map(csv_quote).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{}", r.target, r.method, r.proportion, r.seed, auc, err);
        }
        s
    }

    pub fn aggregates_csv(&self) -> String {
        let mut s = String::from("target,method,proportion,mean_auc,sd_auc,n,n_errors\n");
        for a in self.aggregates() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                a.target, a.method, a.proportion, a.mean, a.sd, a.n, a.n_errors
            );
        }
        s
    }

    /// Methods × targets grid of mean AUC at one proportion.
    pub fn method_grid_markdown(&self, proportion: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| Method | {} |", self.targets.join(" | "));
        let _ = writeln!(s, "|---|{}", "---:|".repeat(self.targets.len()));
        for &m in &self.methods {
            let cells: Vec<String> = self
                .targets
                .iter()
                .map(|t| fmt_mean(self.aggregate(t, m, proportion)))
                .collect();
            let _ = writeln!(s, "| {} | {} |", m.long_name(), cells.join(" | "));
        }
        s
    }

    /// Targets × (proportion, method) grid of mean AUC.
    pub fn proportion_grid_markdown(&self) -> String {
        let mut s = String::new();
        let mut top = vec!["Proportion".to_string()];
        let mut second = vec!["Dataset".to_string()];
        for &p in &self.proportions {
            for &m in &self.methods {
                top.push(format!("{}%", (p * 100.0).round()));
                second.push(m.short_name().to_string());
            }
        }
        let _ = writeln!(s, "| {} |", top.join(" | "));
        let _ = writeln!(s, "|---|{}", "---:|".repeat(top.len() - 1));
        let _ = writeln!(s, "| {} |", second.join(" | "));
        for t in &self.targets {
            let mut row = vec![t.clone()];
            for &p in &self.proportions {
                for &m in &self.methods {
                    row.push(fmt_mean(self.aggregate(t, m, p)));
                }
            }
            let _ = writeln!(s, "| {} |", row.join(" | "));
        }
        s
    }
}

fn fmt_mean(a: Option<Aggregate>) -> String {
    a.map_or_else(|| "n/a".to_string(), |a| format!("{:.3}", a.mean))
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

/// Splits the target for one (proportion, seed) cell; returns (sources, labelled, heldout).
pub fn prepare_cell(
    datasets: &[Dataset],
    target: &str,
    proportion: f64,
    seed: u64,
) -> Result<(Vec<Dataset>, Dataset, Dataset)> {
    let target_ds = datasets
        .iter()
        .find(|d| d.dataset_id == target)
        .ok_or_else(|| Error::validation(format!("target `{target}` not among datasets")))?;
    let sources: Vec<Dataset> = datasets.iter().filter(|d| d.dataset_id != target).cloned().collect();
    let (labelled, heldout) = split_labelled(target_ds, &SplitSpec::new(proportion, seed)?)?;
    Ok((sources, labelled, heldout))
}

fn run_unit(
    datasets: &[Dataset],
    vocab: &SymptomVocabulary,
    spec: &ExperimentSpec,
    target: &str,
    proportion: f64,
    seed: u64,
) -> Vec<ResultRow> {
    let row = |method, result: Result<f64>| ResultRow {
        target: target.to_string(),
        method,
        proportion,
        seed,
        auc: result.as_ref().ok().copied(),
        error: result.err().map(|e| e.to_string()),
    };
    let prepared = prepare_cell(datasets, target, proportion, seed)
        .and_then(|(s, l, h)| Ok((s, l, HeldoutSet::seal(h)?)));
    let (sources, labelled, heldout) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return spec
                .methods
                .iter()
                .map(|&m| row(m, Err(Error::Validation(msg.clone()))))
                .collect();
        }
    };
    let key = EvaluatorKey::new();
    spec.methods
        .iter()
        .map(|&m| {
            let result = run_method(m, &sources, &labelled, &heldout, vocab, &spec.config).and_then(|scored| {
                let scores: Vec<f64> = scored.iter().map(|s| s.1).collect();
                auc(&scores, heldout.labels(&key))
            });
            row(m, result)
        })
        .collect()
}

/// Runs every (target, proportion, seed, method) cell. `jobs > 1` spreads cells over a
/// thread pool; row order is canonical regardless.
pub fn run_experiment(
    spec: &ExperimentSpec,
    datasets: &[Dataset],
    vocab: &SymptomVocabulary,
    jobs: usize,
) -> Result<ResultTable> {
    spec.validate()?;
    for t in &spec.targets {
        if !datasets.iter().any(|d| &d.dataset_id == t) {
            return Err(Error::validation(format!("target `{t}` not among datasets")));
        }
        if datasets.len() < 2 {
            return Err(Error::validation("need at least one source dataset besides the target"));
        }
    }
    let units: Vec<(&String, f64, u64)> = spec
        .targets
        .iter()
        .flat_map(|t| {
            spec.proportions
                .iter()
                .flat_map(move |&p| spec.seeds.iter().map(move |&s| (t, p, s)))
        })
        .collect();
    let run = |&(t, p, s): &(&String, f64, u64)| run_unit(datasets, vocab, spec, t, p, s);
    let nested: Vec<Vec<ResultRow>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::validation(e.to_string()))?;
        pool.install(|| units.par_iter().map(run).collect())
    } else {
        units.iter().map(run).collect()
    };
    Ok(ResultTable {
        rows: nested.into_iter().flatten().collect(),
        targets: spec.targets.clone(),
        methods: spec.methods.clone(),
        proportions: spec.proportions.clone(),
    })
}

/// AUC of the generating model's log-likelihood ratio on the heldout part of the
/// same split the methods see; the ceiling for that cell.
pub fn oracle_auc(datasets: &[Dataset], truth: &GroundTruth, target: &str, proportion: f64, seed: u64) -> Result<f64> {
    let (_, _, heldout) = prepare_cell(datasets, target, proportion, seed)?;
    auc(&oracle_scores(&heldout, truth)?, &heldout.labels()?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodComparison {
    pub target: String,
    /// mean(AUC_a) − mean(AUC_b)
    pub mean_difference: f64,
    /// (seed, AUC_a − AUC_b) for seeds where both succeeded.
    pub paired: Vec<(u64, f64)>,
}

impl MethodComparison {
    pub fn fraction_positive(&self) -> f64 {
        self.paired.iter().filter(|p| p.1 > 0.0).count() as f64 / self.paired.len() as f64
    }
}

/// Per-target paired comparison of two methods at one proportion.
pub fn compare_methods(table: &ResultTable, a: MethodId, b: MethodId, proportion: f64) -> Result<Vec<MethodComparison>> {
    table
        .targets
        .iter()
        .map(|t| {
            let ra = table.aucs_by_seed(t, a, proportion);
            let rb = table.aucs_by_seed(t, b, proportion);
            if ra.is_empty() || rb.is_empty() {
                return Err(Error::validation(format!("no results for {t} at proportion {proportion}")));
            }
            let mean = |m: &BTreeMap<u64, f64>| m.values().sum::<f64>() / m.len() as f64;
            let paired = ra
                .iter()
                .filter_map(|(s, x)| rb.get(s).map(|y| (*s, x - y)))
                .collect();
            Ok(MethodComparison {
                target: t.clone(),
                mean_difference: mean(&ra) - mean(&rb),
                paired,
            })
        })
        .collect()
}
