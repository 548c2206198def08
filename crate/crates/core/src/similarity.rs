//! Statistical Diversity Index: squared score differences summed over a set
//! of components, and nearest-profile rankings built on it.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pca::ScoreSet;

/// Non-empty, sorted, duplicate-free component indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ComponentSet(Vec<usize>);

impl ComponentSet {
    pub fn new<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Parameter("component set is empty".into()));
        }
        Ok(ComponentSet(v))
    }

    /// Components `0..k`.
    pub fn leading(k: usize) -> Result<Self> {
        Self::new(0..k)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn max_index(&self) -> usize {
        *self.0.last().expect("non-empty by construction")
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if self.max_index() >= len {
            return Err(Error::Parameter(format!(
                "component index {} out of range for {len} scores",
                self.max_index()
            )));
        }
        Ok(())
    }
}

impl Default for ComponentSet {
    fn default() -> Self {
        ComponentSet(vec![0, 1, 2, 3])
    }
}

/// `Σ_{k ∈ components} (a_k - b_k)²`.
pub fn sdi(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, components: &ComponentSet) -> Result<f64> {
    components.check_len(a.len().min(b.len()))?;
    Ok(components.0.iter().map(|&k| (a[k] - b[k]).powi(2)).sum())
}

/// SDI with a per-component weight; components missing from `weights` count
/// with weight 1. This is an extension: the unweighted form is [`sdi`].
pub fn weighted_sdi(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    components: &ComponentSet,
    weights: &BTreeMap<usize, f64>,
) -> Result<f64> {
    components.check_len(a.len().min(b.len()))?;
    if let Some((k, w)) = weights.iter().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::Parameter(format!("weight {w} for component {k} is negative")));
    }
    Ok(components
        .0
        .iter()
        .map(|&k| weights.get(&k).copied().unwrap_or(1.0) * (a[k] - b[k]).powi(2))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdiEntry {
    pub entity_id: String,
    pub entity_name: String,
    pub sdi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdiRanking {
    pub query_id: String,
    /// Ascending SDI, ties by entity id.
    pub entries: Vec<SdiEntry>,
    pub components_used: ComponentSet,
}

/// The `top` entities closest to `query_id`, excluding the query itself.
pub fn rank_similar(scores: &ScoreSet, query_id: &str, top: usize, components: &ComponentSet) -> Result<SdiRanking> {
    let q = scores
        .index_of(query_id)
        .ok_or_else(|| Error::Lookup(query_id.to_owned()))?;
    components.check_len(scores.n_components())?;
    let query = scores.scores.row(q);

    let mut entries = Vec::with_capacity(scores.entity_ids.len().saturating_sub(1));
    for (i, row) in scores.scores.rows().into_iter().enumerate() {
        if i == q {
            continue;
        }
        entries.push(SdiEntry {
            entity_id: scores.entity_ids[i].clone(),
            entity_name: scores.entity_names[i].clone(),
            sdi: sdi(query, row, components)?,
        });
    }
    entries.sort_by(|a, b| a.sdi.total_cmp(&b.sdi).then_with(|| a.entity_id.cmp(&b.entity_id)));
    entries.truncate(top);
    Ok(SdiRanking {
        query_id: query_id.to_owned(),
        entries,
        components_used: components.clone(),
    })
}

/// Symmetric `n × n` matrix of SDI values with a zero diagonal.
pub fn pairwise_sdi(scores: &ScoreSet, components: &ComponentSet) -> Result<Array2<f64>> {
    components.check_len(scores.n_components())?;
    let n = scores.scores.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sdi(scores.scores.row(i), scores.scores.row(j), components)?;
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    Ok(out)
}
