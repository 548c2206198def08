//! Ordinary least squares with coefficient standard errors and t-test
//! p-values, solved through a Householder QR factorization.

use std::fmt::Write as _;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::distributions::t_two_sided_p;
use crate::error::{Error, Result};
use crate::linalg::{back_substitute, householder_qr, norm, upper_triangular_inverse};

pub const INTERCEPT: &str = "Intercept";

/// Relative size of an R diagonal entry below which a column is treated as
/// linearly dependent on the columns before it.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    /// Intercept first when present.
    pub term_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub df_residual: usize,
    pub n_observations: usize,
    pub intercept: bool,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `outcome` on the columns of `design`.
///
/// `predictor_names` labels the design columns; an empty slice gives
/// `x1, x2, …`.
pub fn fit_ols(
    design: ArrayView2<'_, f64>,
    predictor_names: &[String],
    outcome: ArrayView1<'_, f64>,
    include_intercept: bool,
) -> Result<RegressionFit> {
    let (n, q) = design.dim();
    if outcome.len() != n {
        return Err(Error::Schema(format!(
            "outcome has {} values but design has {n} rows",
            outcome.len()
        )));
    }
    if !predictor_names.is_empty() && predictor_names.len() != q {
        return Err(Error::Schema(format!(
            "{} predictor names for {q} design columns",
            predictor_names.len()
        )));
    }
    if design.iter().chain(outcome.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("regression inputs must be finite".into()));
    }
    let terms = q + usize::from(include_intercept);
    if n <= terms {
        return Err(Error::InsufficientData {
            observations: n,
            terms,
        });
    }

    let mut term_names = Vec::with_capacity(terms);
    if include_intercept {
        term_names.push(INTERCEPT.to_owned());
    }
    if predictor_names.is_empty() {
        term_names.extend((1..=q).map(|j| format!("x{j}")));
    } else {
        term_names.extend(predictor_names.iter().cloned());
    }

    let x = full_design(design, include_intercept);
    let qr = householder_qr(x.view(), outcome);
    let dependent: Vec<String> = (0..terms)
        .filter(|&j| {
            let col_norm = norm(x.column(j));
            col_norm == 0.0 || qr.r[[j, j]].abs() <= RANK_TOLERANCE * col_norm
        })
        .map(|j| term_names[j].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }

    let beta = back_substitute(qr.r.view(), qr.qty.slice(s![..terms]));
    let residuals = &outcome - &x.dot(&beta);
    let rss = residuals.dot(&residuals);
    let df_residual = n - terms;
    let sigma = (rss / df_residual as f64).sqrt();

    let r_inv = upper_triangular_inverse(qr.r.view());
    let std_errors: Vec<f64> = r_inv
        .rows()
        .into_iter()
        .map(|row| sigma * norm(row))
        .collect();
    let p_values = beta
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| {
            if se == 0.0 {
                Ok(if b == 0.0 { 1.0 } else { 0.0 })
            } else {
                t_two_sided_p(b / se, df_residual as f64)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let tss = if include_intercept {
        let mean = outcome.mean().unwrap_or(0.0);
        outcome.iter().map(|y| (y - mean).powi(2)).sum::<f64>()
    } else {
        outcome.dot(&outcome)
    };
    let r_squared = if tss == 0.0 {
        warnings.push("outcome has zero total variation; R² reported as 0".to_owned());
        0.0
    } else {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    };

    Ok(RegressionFit {
        term_names,
        coefficients: beta.to_vec(),
        std_errors,
        p_values,
        r_squared,
        df_residual,
        n_observations: n,
        intercept: include_intercept,
        warnings,
    })
}

fn full_design(design: ArrayView2<'_, f64>, include_intercept: bool) -> Array2<f64> {
    if !include_intercept {
        return design.to_owned();
    }
    let (n, q) = design.dim();
    let mut x = Array2::ones((n, q + 1));
    x.slice_mut(s![.., 1..]).assign(&design);
    x
}

impl RegressionFit {
    pub fn n_predictors(&self) -> usize {
        self.coefficients.len() - usize::from(self.intercept)
    }

    pub fn predict(&self, design: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let q = self.n_predictors();
        if design.ncols() != q {
            return Err(Error::Schema(format!(
                "design has {} columns, fit expects {q}",
                design.ncols()
            )));
        }
        let x = full_design(design, self.intercept);
        Ok(x.dot(&Array1::from(self.coefficients.clone())))
    }

    /// Fixed-width table of terms, three-decimal estimates and p-values.
    pub fn summary_table(&self) -> String {
        let width = self
            .term_names
            .iter()
            .map(String::len)
            .chain(std::iter::once(4))
            .max()
            .unwrap_or(4);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>11}  {:>9}  {:>7}",
            "Term", "Coefficient", "Std Error", "p-value"
        );
        for i in 0..self.term_names.len() {
            let p = if self.p_values[i] < 0.001 {
                "<0.001".to_owned()
            } else {
                fixed3(self.p_values[i])
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>11}  {:>9}  {:>7}",
                self.term_names[i],
                fixed3(self.coefficients[i]),
                fixed3(self.std_errors[i]),
                p
            );
        }
        let _ = writeln!(
            out,
            "R-squared: {}  (n = {}, residual df = {})",
            fixed3(self.r_squared),
            self.n_observations,
            self.df_residual
        );
        out
    }
}

/// Three decimals without a negative sign on values that round to zero.
fn fixed3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_owned()
    } else {
        s
    }
}

pub fn predict(fit: &RegressionFit, design: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    fit.predict(design)
}
