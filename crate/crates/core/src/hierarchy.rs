//! The node hierarchy: root, age, gender, domain and dataset nodes, the data slice
//! informing each node, per-node symptom PPVs and log-simplex prior centers.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{AgeGroup, Dataset, Domain, Gender, Observation, SymptomVocabulary};
use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Root,
    Age,
    Gender,
    Domain,
    Dataset,
}

/// What a node stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NodeKey {
    Root,
    Age(AgeGroup),
    Gender(Gender),
    Domain(Domain),
    Dataset(String),
}

impl NodeKey {
    pub fn id(&self) -> String {
        match self {
            NodeKey::Root => "root".into(),
            NodeKey::Age(a) => format!("age:{a}"),
            NodeKey::Gender(g) => format!("gender:{g}"),
            NodeKey::Domain(d) => format!("domain:{d}"),
            NodeKey::Dataset(id) => format!("dataset:{id}"),
        }
    }

    pub fn level(&self) -> Level {
        match self {
            NodeKey::Root => Level::Root,
            NodeKey::Age(_) => Level::Age,
            NodeKey::Gender(_) => Level::Gender,
            NodeKey::Domain(_) => Level::Domain,
            NodeKey::Dataset(_) => Level::Dataset,
        }
    }

    fn parse(id: &str) -> Option<NodeKey> {
        if id == "root" {
            return Some(NodeKey::Root);
        }
        let (kind, rest) = id.split_once(':')?;
        match kind {
            "age" => AgeGroup::parse(rest).map(NodeKey::Age),
            "gender" => Gender::parse(rest).map(NodeKey::Gender),
            "domain" => Domain::parse(rest).map(NodeKey::Domain),
            "dataset" if !rest.is_empty() => Some(NodeKey::Dataset(rest.to_string())),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyNode {
    pub key: NodeKey,
    pub node_id: String,
    pub level: Level,
    pub parents: Vec<String>,
    pub params: Vec<f64>,
    pub prior_center: Vec<f64>,
}

/// Whether the attribute layer (age and gender nodes) is part of the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Shape {
    /// Root, age, gender, domain and dataset levels.
    #[default]
    PopulationAware,
    /// Root, domain and dataset levels only; domains hang directly off the root.
    DomainOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    nodes: Vec<HierarchyNode>,
    vocab: SymptomVocabulary,
    index: HashMap<String, usize>,
    parent_index: Vec<Vec<usize>>,
    dataset_domain: BTreeMap<String, Domain>,
}

impl Hierarchy {
    fn assemble(nodes: Vec<HierarchyNode>, vocab: SymptomVocabulary) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.node_id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate node `{}`", n.node_id)));
            }
            check_len(vocab.len(), n.params.len())?;
            check_len(vocab.len(), n.prior_center.len())?;
        }
        let mut parent_index = Vec::with_capacity(nodes.len());
        for n in &nodes {
            let ps = n
                .parents
                .iter()
                .map(|p| index.get(p).copied().ok_or_else(|| Error::UnknownNode(p.clone())))
                .collect::<Result<Vec<_>>>()?;
            parent_index.push(ps);
        }
        let mut dataset_domain = BTreeMap::new();
        for (n, ps) in nodes.iter().zip(&parent_index) {
            if let NodeKey::Dataset(id) = &n.key {
                let domain = match ps.as_slice() {
                    [p] => match nodes[*p].key {
                        NodeKey::Domain(d) => d,
                        _ => return Err(Error::validation(format!("dataset node `{id}` must have a domain parent"))),
                    },
                    _ => return Err(Error::validation(format!("dataset node `{id}` must have exactly one parent"))),
                };
                dataset_domain.insert(id.clone(), domain);
            }
        }
        let h = Hierarchy {
            nodes,
            vocab,
            index,
            parent_index,
            dataset_domain,
        };
        h.check_structure()?;
        Ok(h)
    }

    fn check_structure(&self) -> Result<()> {
        let count = |l: Level| self.nodes.iter().filter(|n| n.level == l).count();
        let (ages, genders) = (count(Level::Age), count(Level::Gender));
        if count(Level::Root) != 1 || self.nodes[0].level != Level::Root {
            return Err(Error::validation("hierarchy needs exactly one root, first"));
        }
        if !((ages == 5 && genders == 2) || (ages == 0 && genders == 0)) {
            return Err(Error::validation("hierarchy needs 5 age and 2 gender nodes, or none"));
        }
        let attribute_ids: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i].level, Level::Age | Level::Gender))
            .collect();
        for (i, n) in self.nodes.iter().enumerate() {
            let ps = &self.parent_index[i];
            let ok = match n.level {
                Level::Root => ps.is_empty(),
                Level::Age | Level::Gender => ps == &[0],
                Level::Domain if attribute_ids.is_empty() => ps == &[0],
                Level::Domain => ps == &attribute_ids,
                Level::Dataset => true,
            };
            if !ok {
                return Err(Error::validation(format!("node `{}` has the wrong parents", n.node_id)));
            }
        }
        for d in self.nodes.iter().filter(|n| n.level == Level::Domain) {
            let NodeKey::Domain(dom) = d.key else { unreachable!() };
            if !self.dataset_domain.values().any(|&x| x == dom) {
                return Err(Error::validation(format!("domain node `{}` has no datasets", d.node_id)));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn vocab(&self) -> &SymptomVocabulary {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, node_id: &str) -> Option<&HierarchyNode> {
        self.index.get(node_id).map(|&i| &self.nodes[i])
    }

    pub fn position(&self, node_id: &str) -> Option<usize> {
        self.index.get(node_id).copied()
    }

    /// Parent positions of the node at position `i`.
    pub fn parent_positions(&self, i: usize) -> &[usize] {
        &self.parent_index[i]
    }

    pub fn shape(&self) -> Shape {
        if self.nodes.iter().any(|n| n.level == Level::Age) {
            Shape::PopulationAware
        } else {
            Shape::DomainOnly
        }
    }

    pub fn dataset_domain(&self, dataset_id: &str) -> Option<Domain> {
        self.dataset_domain.get(dataset_id).copied()
    }

    /// All node parameter vectors concatenated in canonical node order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.nodes.iter().flat_map(|n| n.params.iter().copied()).collect()
    }

    /// Overwrites node parameters from a flat vector in canonical order.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let k = self.vocab.len();
        check_len(self.nodes.len() * k, flat.len())?;
        for (node, chunk) in self.nodes.iter_mut().zip(flat.chunks_exact(k)) {
            node.params.copy_from_slice(chunk);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HierarchyFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HierarchyFile = serde_json::from_str(text)?;
        let vocab = SymptomVocabulary::new(file.vocab)?;
        let nodes = file
            .nodes
            .into_iter()
            .map(|n| {
                let key = NodeKey::parse(&n.id).ok_or_else(|| Error::UnknownNode(n.id.clone()))?;
                if key.level() != n.level {
                    return Err(Error::validation(format!("node `{}` has level {:?}", n.id, n.level)));
                }
                Ok(HierarchyNode {
                    key,
                    node_id: n.id,
                    level: n.level,
                    parents: n.parents,
                    params: n.params,
                    prior_center: n.prior_center,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(nodes, vocab)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HierarchyFile {
    nodes: Vec<NodeFile>,
    vocab: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: String,
    level: Level,
    parents: Vec<String>,
    #[serde(with = "crate::reals::vec")]
    params: Vec<f64>,
    #[serde(with = "crate::reals::vec")]
    prior_center: Vec<f64>,
}

impl From<&Hierarchy> for HierarchyFile {
    fn from(h: &Hierarchy) -> Self {
        HierarchyFile {
            nodes: h
                .nodes
                .iter()
                .map(|n| NodeFile {
                    id: n.node_id.clone(),
                    level: n.level,
                    parents: n.parents.clone(),
                    params: n.params.clone(),
                    prior_center: n.prior_center.clone(),
                })
                .collect(),
            vocab: h.vocab.names().to_vec(),
        }
    }
}

/// Builds the population-aware hierarchy over `datasets`.
pub fn build_hierarchy(datasets: &[Dataset], vocab: &SymptomVocabulary) -> Result<Hierarchy> {
    build_hierarchy_with(datasets, vocab, Shape::PopulationAware)
}

/// Builds a hierarchy of the given shape. Parameters start at the uniform log-simplex
/// point, which is the prior center for an all-zero PPV vector.
pub fn build_hierarchy_with(datasets: &[Dataset], vocab: &SymptomVocabulary, shape: Shape) -> Result<Hierarchy> {
    if datasets.is_empty() {
        return Err(Error::validation("need at least one dataset"));
    }
    let k = vocab.len();
    let uniform = vec![-(k as f64).ln(); k];
    let node = |key: NodeKey, parents: Vec<String>| HierarchyNode {
        node_id: key.id(),
        level: key.level(),
        key,
        parents,
        params: uniform.clone(),
        prior_center: uniform.clone(),
    };

    let root_id = NodeKey::Root.id();
    let mut nodes = vec![node(NodeKey::Root, vec![])];
    let mut attribute_ids = Vec::new();
    if shape == Shape::PopulationAware {
        for a in AgeGroup::ALL {
            nodes.push(node(NodeKey::Age(a), vec![root_id.clone()]));
            attribute_ids.push(NodeKey::Age(a).id());
        }
        for g in Gender::ALL {
            nodes.push(node(NodeKey::Gender(g), vec![root_id.clone()]));
            attribute_ids.push(NodeKey::Gender(g).id());
        }
    } else {
        attribute_ids.push(root_id.clone());
    }
    for d in Domain::ALL {
        if datasets.iter().any(|ds| ds.domain == d) {
            nodes.push(node(NodeKey::Domain(d), attribute_ids.clone()));
        }
    }
    for d in Domain::ALL {
        for ds in datasets.iter().filter(|ds| ds.domain == d) {
            nodes.push(node(
                NodeKey::Dataset(ds.dataset_id.clone()),
                vec![NodeKey::Domain(d).id()],
            ));
        }
    }
    for ds in datasets {
        if let Some(o) = ds.observations.iter().find(|o| o.symptoms.len() != k) {
            return Err(Error::validation(format!(
                "observation `{}` has {} symptoms; vocabulary has {k}",
                o.obs_id,
                o.symptoms.len()
            )));
        }
    }
    Hierarchy::assemble(nodes, vocab.clone())
}

/// The labelled observations that inform a node's empirical statistics.
pub fn node_slice<'a>(node: &HierarchyNode, datasets: &'a [Dataset]) -> Vec<&'a Observation> {
    let labelled = datasets
        .iter()
        .flat_map(|d| d.observations.iter().map(move |o| (d, o)))
        .filter(|(_, o)| o.label.is_some());
    match &node.key {
        NodeKey::Root => labelled.map(|(_, o)| o).collect(),
        NodeKey::Age(a) => labelled.filter(|(_, o)| o.age_group == *a).map(|(_, o)| o).collect(),
        NodeKey::Gender(g) => labelled.filter(|(_, o)| o.gender == *g).map(|(_, o)| o).collect(),
        NodeKey::Domain(dom) => labelled.filter(|(d, _)| d.domain == *dom).map(|(_, o)| o).collect(),
        NodeKey::Dataset(id) => labelled.filter(|(d, _)| d.dataset_id == *id).map(|(_, o)| o).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeStats {
    /// Per-symptom positive predictive value.
    pub ppv: Vec<f64>,
    /// Number of observations with each symptom present.
    pub support: Vec<u64>,
}

pub type StatsMap = BTreeMap<String, NodeStats>;

/// Per-symptom PPV: positives among observations showing the symptom (0 if none show it).
pub fn empirical_ppv(slice: &[&Observation], vocab: &SymptomVocabulary) -> Result<NodeStats> {
    let k = vocab.len();
    let mut support = vec![0u64; k];
    let mut positive = vec![0u64; k];
    for o in slice {
        check_len(k, o.symptoms.len())?;
        let label = o.label.ok_or_else(|| Error::Unlabelled(o.obs_id.clone()))?;
        for (j, &s) in o.symptoms.iter().enumerate() {
            if s {
                support[j] += 1;
                positive[j] += u64::from(label);
            }
        }
    }
    let ppv = support
        .iter()
        .zip(&positive)
        .map(|(&n, &p)| if n == 0 { 0.0 } else { p as f64 / n as f64 })
        .collect();
    Ok(NodeStats { ppv, support })
}

/// Statistics for every node of `hierarchy` computed from its data slice.
pub fn compute_stats(hierarchy: &Hierarchy, datasets: &[Dataset]) -> Result<StatsMap> {
    hierarchy
        .nodes()
        .iter()
        .map(|n| {
            let slice = node_slice(n, datasets);
            Ok((n.node_id.clone(), empirical_ppv(&slice, hierarchy.vocab())?))
        })
        .collect()
}

/// Smoothed log-simplex center `log((f_j + λ) / Σ_k (f_k + λ))`.
pub fn log_simplex_center(ppv: &[f64], lambda: f64) -> Vec<f64> {
    let total: f64 = ppv.iter().map(|f| f + lambda).sum();
    ppv.iter().map(|f| ((f + lambda) / total).ln()).collect()
}

/// Centers each node's prior on its own smoothed PPVs and resets its parameters there.
pub fn center_priors(hierarchy: &Hierarchy, stats: &StatsMap, lambda: f64) -> Result<Hierarchy> {
    if !(lambda > 0.0) {
        return Err(Error::validation(format!("lambda must be positive, got {lambda}")));
    }
    let mut out = hierarchy.clone();
    for node in &mut out.nodes {
        let s = stats
            .get(&node.node_id)
            .ok_or_else(|| Error::UnknownNode(node.node_id.clone()))?;
        check_len(hierarchy.vocab.len(), s.ppv.len())?;
        node.prior_center = log_simplex_center(&s.ppv, lambda);
        node.params = node.prior_center.clone();
    }
    Ok(out)
}
