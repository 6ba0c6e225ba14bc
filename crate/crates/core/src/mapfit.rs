//! Stage one: the joint MAP objective over every node vector and its minimization.
//!
//! The objective is
//!
//! ```text
//! Σ_{dataset nodes d} −Σ_j (f_j^d + λ)(θ_j^d − logsumexp(θ^d))
//!   + β Σ_{non-root nodes n} Σ_{parents p of n} Div(θ^n, θ^p)
//! ```
//!
//! where `f^d` are the dataset's symptom PPVs. Only dataset nodes carry a data term;
//! the attribute, domain and root nodes are tied in through the divergence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{DivergenceKind, ModelConfig};
use crate::error::{check_len, Error, Result};
use crate::hierarchy::{Hierarchy, Level, StatsMap};
use crate::powell::powell_minimize;

/// `log Σ exp(v_k)` evaluated in max-shifted form.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::validation("log_sum_exp of an empty vector"));
    }
    Ok(lse(v))
}

#[inline]
fn lse(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Negative `(f + λ)`-weighted multinomial log-likelihood of `theta`.
pub fn data_term(theta: &[f64], f: &[f64], lambda: f64) -> Result<f64> {
    check_len(theta.len(), f.len())?;
    if theta.is_empty() {
        return Err(Error::validation("data_term of an empty vector"));
    }
    let z = lse(theta);
    Ok(-theta
        .iter()
        .zip(f)
        .map(|(t, fj)| (fj + lambda) * (t - z))
        .sum::<f64>())
}

/// Squared Euclidean distance.
pub fn divergence(child: &[f64], parent: &[f64]) -> Result<f64> {
    check_len(child.len(), parent.len())?;
    Ok(sq_dist(child, parent))
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn edge_term(kind: DivergenceKind, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        DivergenceKind::SquaredL2 => sq_dist(a, b),
        DivergenceKind::L2 => sq_dist(a, b).sqrt(),
    }
}

/// The objective with its structure resolved to flat offsets.
#[derive(Clone, Debug)]
pub struct Objective {
    k: usize,
    n_nodes: usize,
    /// (node position, f_j + λ weights)
    data: Vec<(usize, Vec<f64>)>,
    /// (child position, parent position)
    edges: Vec<(usize, usize)>,
    beta: f64,
    kind: DivergenceKind,
}

impl Objective {
    pub fn new(hierarchy: &Hierarchy, stats: &StatsMap, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let k = hierarchy.vocab().len();
        let mut data = Vec::new();
        let mut edges = Vec::new();
        for (i, node) in hierarchy.nodes().iter().enumerate() {
            if node.level == Level::Dataset {
                let s = stats
                    .get(&node.node_id)
                    .ok_or_else(|| Error::UnknownNode(node.node_id.clone()))?;
                check_len(k, s.ppv.len())?;
                data.push((i, s.ppv.iter().map(|f| f + config.lambda).collect()));
            }
            edges.extend(hierarchy.parent_positions(i).iter().map(|&p| (i, p)));
        }
        Ok(Objective {
            k,
            n_nodes: hierarchy.len(),
            data,
            edges,
            beta: config.beta,
            kind: config.divergence,
        })
    }

    pub fn dim(&self) -> usize {
        self.k * self.n_nodes
    }

    fn block<'a>(&self, flat: &'a [f64], i: usize) -> &'a [f64] {
        &flat[i * self.k..(i + 1) * self.k]
    }

    /// Sum of the dataset data terms.
    pub fn data_part(&self, flat: &[f64]) -> f64 {
        self.data
            .iter()
            .map(|(i, w)| {
                let theta = self.block(flat, *i);
                let z = lse(theta);
                -theta.iter().zip(w).map(|(t, wj)| wj * (t - z)).sum::<f64>()
            })
            .sum()
    }

    /// Unweighted sum of divergences over every child/parent edge.
    pub fn divergence_part(&self, flat: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(c, p)| edge_term(self.kind, self.block(flat, c), self.block(flat, p)))
            .sum()
    }

    /// Objective value without input checks.
    pub fn eval_unchecked(&self, flat: &[f64]) -> f64 {
        let div = if self.beta == 0.0 { 0.0 } else { self.beta * self.divergence_part(flat) };
        self.data_part(flat) + div
    }

    pub fn eval(&self, flat: &[f64]) -> Result<f64> {
        check_len(self.dim(), flat.len())?;
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { point: flat.to_vec() });
        }
        Ok(self.eval_unchecked(flat))
    }
}

/// Evaluates the objective at `flat_params` (canonical node order × vocabulary order).
pub fn objective(flat_params: &[f64], hierarchy: &Hierarchy, stats: &StatsMap, config: &ModelConfig) -> Result<f64> {
    Objective::new(hierarchy, stats, config)?.eval(flat_params)
}

/// Per-edge divergences `(child id, parent id, value)` of the hierarchy's current parameters.
pub fn edge_divergences(hierarchy: &Hierarchy, kind: DivergenceKind) -> Vec<(String, String, f64)> {
    let nodes = hierarchy.nodes();
    let mut out = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        for &p in hierarchy.parent_positions(i) {
            out.push((
                n.node_id.clone(),
                nodes[p].node_id.clone(),
                edge_term(kind, &n.params, &nodes[p].params),
            ));
        }
    }
    out
}

/// Stage-one result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedParams {
    #[serde(with = "crate::reals::map")]
    pub node_params: BTreeMap<String, Vec<f64>>,
    #[serde(with = "crate::reals::scalar")]
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub config: ModelConfig,
}

impl FittedParams {
    pub fn params(&self, node_id: &str) -> Result<&[f64]> {
        self.node_params
            .get(node_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownNode(node_id.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Minimizes the objective jointly over all node vectors, starting from the prior centers,
/// and writes the optimum back into `hierarchy`.
pub fn fit_map(hierarchy: &mut Hierarchy, stats: &StatsMap, config: &ModelConfig) -> Result<FittedParams> {
    let start: Vec<f64> = hierarchy
        .nodes()
        .iter()
        .flat_map(|n| n.prior_center.iter().copied())
        .collect();
    fit_map_from(hierarchy, stats, config, &start)
}

/// [`fit_map`] from an explicit starting point.
pub fn fit_map_from(
    hierarchy: &mut Hierarchy,
    stats: &StatsMap,
    config: &ModelConfig,
    start: &[f64],
) -> Result<FittedParams> {
    let obj = Objective::new(hierarchy, stats, config)?;
    obj.eval(start)?;
    let out = powell_minimize(|x| obj.eval_unchecked(x), start, &config.powell_options())?;
    hierarchy.set_flat_params(&out.x)?;
    let node_params = hierarchy
        .nodes()
        .iter()
        .map(|n| (n.node_id.clone(), n.params.clone()))
        .collect();
    Ok(FittedParams {
        node_params,
        final_objective: out.f,
        iterations: out.iterations,
        converged: out.converged,
        config: config.clone(),
    })
}
