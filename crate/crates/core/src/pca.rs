//! Standardization and principal component fitting.
//!
//! Two solvers produce the same [`PcaModel`]:
//!
//! * [`PcaSolver::Eigen`] diagonalizes the `p × p` correlation matrix with a
//!   Jacobi sweep and keeps the leading `k` eigenvectors.
//! * [`PcaSolver::Deflation`] finds one loading vector at a time: the unit
//!   vector maximizing the variance of `X̂ w`, where `X̂` is the data with
//!   the projections onto all previously found loadings subtracted.
//!
//! Both use the sample (`n - 1`) covariance and orient every loading vector
//! so its largest-magnitude coefficient is positive.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::StatTable;
use crate::linalg::{gram_covariance, norm, orient_sign, symmetric_eigen};

pub const DEFAULT_COMPONENTS: usize = 4;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Column means and sample standard deviations used to standardize a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub stat_names: Vec<String>,
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl StandardizationParams {
    pub fn apply(&self, values: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = values.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.std_devs[j]);
            col.mapv_inplace(|x| (x - m) / s);
        }
        out
    }
}

/// What to do with a column whose sample variance is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstantColumns {
    #[default]
    Reject,
    Remove,
}

/// A standardized matrix with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub params: StandardizationParams,
    pub matrix: Array2<f64>,
    /// Zero-variance columns dropped before standardizing.
    pub removed: Vec<String>,
}

/// Centers every column and scales it to unit sample variance.
pub fn standardize(table: &StatTable, constant: ConstantColumns) -> Result<Standardized> {
    let values = table.values();
    let n = values.nrows();
    if n < 2 {
        return Err(Error::InsufficientData {
            observations: n,
            terms: values.ncols(),
        });
    }

    let mut keep = Vec::new();
    let mut removed = Vec::new();
    let mut means = Vec::new();
    let mut std_devs = Vec::new();
    for (j, col) in values.axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sd = var.sqrt();
        let scale = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if sd <= 1e-12 * scale || sd == 0.0 {
            let column = table.stat_names()[j].clone();
            match constant {
                ConstantColumns::Reject => return Err(Error::ZeroVariance { column }),
                ConstantColumns::Remove => {
                    removed.push(column);
                    continue;
                }
            }
        }
        keep.push(j);
        means.push(mean);
        std_devs.push(sd);
    }
    if keep.is_empty() {
        return Err(Error::InsufficientData {
            observations: n,
            terms: 0,
        });
    }

    let params = StandardizationParams {
        stat_names: keep.iter().map(|&j| table.stat_names()[j].clone()).collect(),
        means,
        std_devs,
    };
    let matrix = params.apply(values.select(Axis(1), &keep).view());
    Ok(Standardized {
        params,
        matrix,
        removed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaSolver {
    #[default]
    Eigen,
    Deflation,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub solver: PcaSolver,
    /// Power iteration budget per component.
    pub max_iterations: usize,
    /// Stop once successive iterates differ by less than this in norm.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            solver: PcaSolver::Eigen,
            max_iterations: 10_000,
            tolerance: 1e-12,
        }
    }
}

impl FitOptions {
    pub fn deflation() -> Self {
        FitOptions {
            solver: PcaSolver::Deflation,
            ..Self::default()
        }
    }
}

/// Loading vectors (one per row) and the variance of each component's scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub loadings: Array2<f64>,
    pub variances: Vec<f64>,
    /// Sum of the sample variances of all input columns.
    pub total_variance: f64,
}

/// Fits the leading `k` components of a column-centered matrix.
pub fn principal_components(x: ArrayView2<'_, f64>, k: usize, opts: &FitOptions) -> Result<Components> {
    let (n, p) = x.dim();
    let max_k = p.min(n.saturating_sub(1));
    if k < 1 || k > max_k {
        return Err(Error::Parameter(format!(
            "k = {k} is outside 1..={max_k} for a {n}x{p} matrix"
        )));
    }
    let total_variance = column_variance_sum(x);
    let (loadings, variances) = match opts.solver {
        PcaSolver::Eigen => eigen_components(x, k),
        PcaSolver::Deflation => deflation_components(x, k, opts)?,
    };
    Ok(Components {
        loadings,
        variances,
        total_variance,
    })
}

fn column_variance_sum(x: ArrayView2<'_, f64>) -> f64 {
    let n = x.nrows() as f64;
    x.axis_iter(Axis(1))
        .map(|col| {
            let mean = col.sum() / n;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}

fn eigen_components(x: ArrayView2<'_, f64>, k: usize) -> (Array2<f64>, Vec<f64>) {
    let eig = symmetric_eigen(gram_covariance(x).view());
    let p = x.ncols();
    let mut loadings = Array2::zeros((k, p));
    for c in 0..k {
        let mut w = eig.vectors.column(c).to_owned();
        orient_sign(&mut w);
        loadings.row_mut(c).assign(&w);
    }
    let variances = loadings.rows().into_iter().map(|w| projected_variance(x, w)).collect();
    (loadings, variances)
}

/// Sample variance of `X w`. More accurate for small components than a
/// quadratic form in the covariance matrix, whose rounding error scales with
/// the largest eigenvalue.
fn projected_variance(x: ArrayView2<'_, f64>, w: ArrayView1<'_, f64>) -> f64 {
    let t = x.dot(&w);
    t.dot(&t) / (x.nrows() as f64 - 1.0).max(1.0)
}

fn deflation_components(
    x: ArrayView2<'_, f64>,
    k: usize,
    opts: &FitOptions,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let p = x.ncols();
    let scale = column_variance_sum(x);
    let mut found: Vec<Array1<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);

    for c in 0..k {
        // X̂ = X - Σ (X w) wᵀ over the loadings found so far.
        let mut deflated = x.to_owned();
        for w in &found {
            let t = x.dot(w);
            for (mut row, ti) in deflated.rows_mut().into_iter().zip(t.iter()) {
                row.scaled_add(-ti, w);
            }
        }
        let g = gram_covariance(deflated.view());
        let trace = g.diag().sum();

        let mut w = if trace <= 1e-13 * scale {
            orthogonal_complement_vector(&found, p)
        } else {
            dominant_eigenvector(&g, opts, c)?
        };
        for prev in &found {
            let d = w.dot(prev);
            w.scaled_add(-d, prev);
        }
        let wn = norm(w.view());
        w /= wn;
        orient_sign(&mut w);

        variances.push(projected_variance(x, w.view()));
        found.push(w);
    }

    let mut loadings = Array2::zeros((k, p));
    for (c, w) in found.iter().enumerate() {
        loadings.row_mut(c).assign(w);
    }
    Ok((loadings, variances))
}

/// Power iteration on a positive semidefinite matrix, accelerated by
/// squaring the iteration operator after each step, so step `t` applies
/// `G^(2^t)`.
fn dominant_eigenvector(g: &Array2<f64>, opts: &FitOptions, component: usize) -> Result<Array1<f64>> {
    let start = g
        .axis_iter(Axis(1))
        .max_by(|a, b| norm(a.view()).total_cmp(&norm(b.view())))
        .expect("non-empty matrix");
    let mut v = start.to_owned();
    v /= norm(v.view());

    let mut op = g / g.diag().sum();
    for _ in 0..opts.max_iterations {
        let mut next = op.dot(&v);
        let len = norm(next.view());
        if len == 0.0 || !len.is_finite() {
            break;
        }
        next /= len;
        let diff = norm((&next - &v).view());
        v = next;
        if diff < opts.tolerance {
            return Ok(v);
        }
        let squared = op.dot(&op);
        let tr = squared.diag().sum();
        if tr > 0.0 && tr.is_finite() {
            op = squared / tr;
        }
    }

    let lambda = v.dot(&g.dot(&v));
    let residual = norm((g.dot(&v) - lambda * &v).view());
    Err(Error::Convergence {
        component,
        residual,
    })
}

/// Unit vector orthogonal to every vector in `basis`, built from the
/// coordinate axis with the largest residual.
fn orthogonal_complement_vector(basis: &[Array1<f64>], p: usize) -> Array1<f64> {
    let mut best = Array1::zeros(p);
    let mut best_norm = -1.0;
    for j in 0..p {
        let mut e = Array1::zeros(p);
        e[j] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let d = e.dot(b);
                e.scaled_add(-d, b);
            }
        }
        let len = norm(e.view());
        if len > best_norm + 1e-12 {
            best_norm = len;
            best = e / len;
        }
    }
    best
}

/// Fitted standardization plus the leading loading vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub standardization: StandardizationParams,
    /// `k × p`, one unit-norm loading vector per row.
    pub loadings: Array2<f64>,
    pub component_variances: Vec<f64>,
    pub total_variance: f64,
    pub n_samples: usize,
    /// Zero-variance columns removed before fitting.
    pub removed_columns: Vec<String>,
}

pub fn fit_pca(data: &Standardized, k: usize, opts: &FitOptions) -> Result<PcaModel> {
    let comps = principal_components(data.matrix.view(), k, opts)?;
    Ok(PcaModel {
        standardization: data.params.clone(),
        loadings: comps.loadings,
        component_variances: comps.variances,
        total_variance: comps.total_variance,
        n_samples: data.matrix.nrows(),
        removed_columns: data.removed.clone(),
    })
}

/// Every eigenvalue of the sample covariance, descending, for scree plots.
pub fn variance_spectrum(x: ArrayView2<'_, f64>) -> Vec<f64> {
    symmetric_eigen(gram_covariance(x).view())
        .values
        .into_iter()
        .map(|v| v.max(0.0))
        .collect()
}

pub fn explained_variance_ratio(model: &PcaModel) -> Vec<f64> {
    model
        .component_variances
        .iter()
        .map(|v| (v / model.total_variance).clamp(0.0, 1.0))
        .collect()
}

/// Per-entity component scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub entity_ids: Vec<String>,
    pub entity_names: Vec<String>,
    pub minutes: Vec<f64>,
    /// `n × k`.
    pub scores: Array2<f64>,
}

impl ScoreSet {
    pub fn n_components(&self) -> usize {
        self.scores.ncols()
    }

    pub fn index_of(&self, entity_id: &str) -> Option<usize> {
        self.entity_ids.iter().position(|id| id == entity_id)
    }
}

/// Standardizes `table` with the model's parameters and projects each row
/// onto the loading vectors.
pub fn transform(model: &PcaModel, table: &StatTable) -> Result<ScoreSet> {
    let expected = &model.standardization.stat_names;
    if table.stat_names() != expected.as_slice() {
        let want: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
        let got: BTreeSet<&str> = table.stat_names().iter().map(String::as_str).collect();
        let diff: Vec<&str> = want.symmetric_difference(&got).copied().collect();
        let msg = if diff.is_empty() {
            "statistic columns are in a different order than the model".to_owned()
        } else {
            format!("statistic columns differ from the model: {}", diff.join(", "))
        };
        return Err(Error::Schema(msg));
    }
    let z = model.standardization.apply(table.values().view());
    Ok(ScoreSet {
        entity_ids: table.entity_ids().to_vec(),
        entity_names: table.entity_names().to_vec(),
        minutes: table.minutes().to_vec(),
        scores: z.dot(&model.loadings.t()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopLoadings {
    /// Largest first; zero coefficients land here.
    pub positive: Vec<(String, f64)>,
    /// Most negative first.
    pub negative: Vec<(String, f64)>,
}

/// The `count` largest positive and most negative coefficients of one
/// component with `|coefficient| >= threshold`.
pub fn top_loadings(model: &PcaModel, component: usize, count: usize, threshold: f64) -> Result<TopLoadings> {
    if component >= model.loadings.nrows() {
        return Err(Error::Parameter(format!(
            "component {component} out of range (model has {})",
            model.loadings.nrows()
        )));
    }
    let row = model.loadings.row(component);
    let names = &model.standardization.stat_names;
    let mut pos: Vec<(usize, f64)> = Vec::new();
    let mut neg: Vec<(usize, f64)> = Vec::new();
    for (j, &c) in row.iter().enumerate() {
        if c.abs() < threshold {
            continue;
        }
        if c >= 0.0 {
            pos.push((j, c));
        } else {
            neg.push((j, c));
        }
    }
    // stable sorts keep column order among ties
    pos.sort_by(|a, b| b.1.total_cmp(&a.1));
    neg.sort_by(|a, b| a.1.total_cmp(&b.1));
    let label = |v: Vec<(usize, f64)>| {
        v.into_iter()
            .take(count)
            .map(|(j, c)| (names[j].clone(), c))
            .collect()
    };
    Ok(TopLoadings {
        positive: label(pos),
        negative: label(neg),
    })
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    standardization: StandardizationParams,
    loadings: Vec<Vec<f64>>,
    component_variances: Vec<f64>,
    total_variance: f64,
    n_samples: usize,
    #[serde(default)]
    removed_columns: Vec<String>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.loadings.nrows()
    }

    /// Pretty JSON with every float in shortest round-trip scientific notation.
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            standardization: self.standardization.clone(),
            loadings: self.loadings.rows().into_iter().map(|r| r.to_vec()).collect(),
            component_variances: self.component_variances.clone(),
            total_variance: self.total_variance,
            n_samples: self.n_samples,
            removed_columns: self.removed_columns.clone(),
        };
        let mut ser = serde_json::Serializer::with_formatter(writer, crate::report::ScientificFormatter::new());
        doc.serialize(&mut ser)?;
        ser.into_inner()
            .write_all(b"\n")
            .map_err(|e| Error::io("<model writer>", e))?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        let p = doc.standardization.stat_names.len();
        let k = doc.loadings.len();
        if doc.standardization.means.len() != p
            || doc.standardization.std_devs.len() != p
            || doc.loadings.iter().any(|r| r.len() != p)
            || doc.component_variances.len() != k
            || k == 0
        {
            return Err(Error::Schema("model dimensions are inconsistent".into()));
        }
        if doc.standardization.std_devs.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Schema("model has a non-positive standard deviation".into()));
        }
        let flat: Vec<f64> = doc.loadings.into_iter().flatten().collect();
        let loadings = Array2::from_shape_vec((k, p), flat).expect("shape checked above");
        Ok(PcaModel {
            standardization: doc.standardization,
            loadings,
            component_variances: doc.component_variances,
            total_variance: doc.total_variance,
            n_samples: doc.n_samples,
            removed_columns: doc.removed_columns,
        })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}
