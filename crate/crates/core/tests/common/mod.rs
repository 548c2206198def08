//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box–Muller).
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random `n × p` matrix with correlated columns, centered and scaled to
/// unit sample variance column by column.
pub fn random_standardized(rng: &mut impl Rng, n: usize, p: usize) -> Array2<f64> {
    let mix = Array2::from_shape_fn((p, p), |_| normal(rng));
    let raw = Array2::from_shape_fn((n, p), |_| normal(rng)).dot(&mix);
    let mut out = raw.clone();
    for j in 0..p {
        let col = raw.column(j);
        let mean = col.sum() / n as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        out.column_mut(j).assign(&col.mapv(|x| (x - mean) / sd));
    }
    out
}

pub fn sample_covariance(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let means = x.mean_axis(ndarray::Axis(0)).unwrap();
    let c = x - &means;
    c.t().dot(&c) / (n - 1.0)
}

/// Eigenpairs from nalgebra, sorted by eigenvalue descending; vectors are
/// columns.
pub fn eigen_oracle(sym: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let p = sym.nrows();
    let m = nalgebra::DMatrix::from_fn(p, p, |i, j| sym[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((p, p), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        for k in 0..n {
            m.swap([col, k], [pivot, k]);
            inv.swap([col, k], [pivot, k]);
        }
        let d = m[[col, col]];
        for k in 0..n {
            m[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                for k in 0..n {
                    m[[r, k]] -= f * m[[col, k]];
                    inv[[r, k]] -= f * inv[[col, k]];
                }
            }
        }
    }
    inv
}

pub struct NormalEquationsFit {
    pub coefficients: Array1<f64>,
    pub std_errors: Array1<f64>,
    pub df: usize,
}

/// OLS with an intercept through `(XᵀX)⁻¹ Xᵀy`.
pub fn ols_oracle(design: &Array2<f64>, y: &Array1<f64>) -> NormalEquationsFit {
    let (n, q) = design.dim();
    let mut x = Array2::ones((n, q + 1));
    x.slice_mut(ndarray::s![.., 1..]).assign(design);
    let xtx_inv = invert(&x.t().dot(&x));
    let beta = xtx_inv.dot(&x.t().dot(y));
    let resid = y - &x.dot(&beta);
    let df = n - q - 1;
    let s2 = resid.dot(&resid) / df as f64;
    let se = xtx_inv.diag().mapv(|v| (s2 * v).sqrt());
    NormalEquationsFit {
        coefficients: beta,
        std_errors: se,
        df,
    }
}

/// `Γ((ν+1)/2) / Γ(ν/2)` for integer `ν` from the recurrence
/// `R(ν+2) = R(ν)·(ν+1)/ν`, seeded with `R(1) = 1/√π`, `R(2) = √π/2`.
fn gamma_ratio(df: u32) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let (mut r, mut nu) = if df % 2 == 1 { (1.0 / sqrt_pi, 1) } else { (sqrt_pi / 2.0, 2) };
    while nu < df {
        r *= (nu as f64 + 1.0) / nu as f64;
        nu += 2;
    }
    r
}

pub fn t_density(x: f64, df: u32) -> f64 {
    let nu = df as f64;
    gamma_ratio(df) / (nu * std::f64::consts::PI).sqrt() * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// Student t CDF by integrating the density from 0.
pub fn t_cdf_oracle(x: f64, df: u32) -> f64 {
    let f = |s: f64| t_density(s, df);
    // split the range so each piece is smooth on its own scale
    let mut acc = 0.0;
    let target = x.abs();
    let mut lo = 0.0;
    while lo < target {
        let hi = (lo + 1.0).min(target);
        acc += integrate(&f, lo, hi, 1e-15);
        lo = hi;
    }
    if x >= 0.0 {
        0.5 + acc
    } else {
        0.5 - acc
    }
}

/// Upper quantile `t` with `P(T <= t) = prob`, by bisection on the oracle CDF.
pub fn t_quantile_oracle(prob: f64, df: u32) -> f64 {
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if t_cdf_oracle(mid, df) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Synthetic season: player rows (with one traded player that has per-team
/// and combined rows, and a few short-season players), membership and
/// winning-percentage files.
pub struct Season {
    pub players_csv: String,
    pub membership_csv: String,
    pub membership: BTreeMap<String, String>,
    pub teams: Vec<String>,
}

pub const TEAMS: [&str; 10] = ["ATL", "BOS", "CHI", "DAL", "DEN", "MIA", "MIL", "NYK", "PHI", "SAS"];

pub const RATE_STATS: [&str; 9] = [
    "pts_per48",
    "reb_per48",
    "contested_reb_per48",
    "ast_per48",
    "passes_per48",
    "drives_per48",
    "cs_pts_per48",
    "pts_per_touch",
    "efg_pct",
];

pub fn season(seed: u64) -> Season {
    let mut rng = rng(seed);
    let mut csv = String::from("player_id,name,team,gp,min");
    for s in RATE_STATS {
        csv.push(',');
        csv.push_str(s);
    }
    csv.push_str(",season_total_pts,pts_per_game\n");

    let mut membership = BTreeMap::new();
    let loadings = [
        [2.0, 0.2, 0.1],
        [0.1, 3.0, 0.2],
        [0.0, 2.5, 0.4],
        [1.5, -0.5, 1.0],
        [0.8, -0.2, 2.0],
        [1.2, -0.8, 0.5],
        [0.9, -1.0, -1.2],
        [0.6, 0.3, -0.8],
        [0.1, 0.4, -0.5],
    ];
    let row = |rng: &mut ChaCha8Rng, id: &str, name: &str, team: &str, gp: u32| -> String {
        let f = [normal(rng), normal(rng), normal(rng)];
        let min = (gp as f64 * (18.0 + 8.0 * rng.random::<f64>())).round();
        let mut line = format!("{id},{name},{team},{gp},{min}");
        let mut pts = 0.0;
        for (j, l) in loadings.iter().enumerate() {
            let v = 10.0 + l[0] * f[0] + l[1] * f[1] + l[2] * f[2] + 0.5 * normal(rng);
            if j == 0 {
                pts = v;
            }
            let _ = write!(line, ",{v}");
        }
        let _ = write!(line, ",{},{}", pts * gp as f64, pts * 0.7);
        line.push('\n');
        line
    };

    for (t, team) in TEAMS.iter().enumerate() {
        for k in 0..7 {
            let id = format!("p{t:02}{k}");
            let gp = 41 + ((t * 7 + k) * 13 % 42) as u32;
            csv.push_str(&row(&mut rng, &id, &format!("Player {t}-{k}"), team, gp));
            membership.insert(id, team.to_string());
        }
        // short-season player, filtered out
        csv.push_str(&row(&mut rng, &format!("s{t:02}"), &format!("Bench {t}"), team, 12 + t as u32));
    }
    // traded player: two team rows plus the combined row
    csv.push_str(&row(&mut rng, "trade1", "Traded \"TJ\" One", "PHI", 30));
    csv.push_str(&row(&mut rng, "trade1", "Traded \"TJ\" One", "MIL", 35));
    csv.push_str(&row(&mut rng, "trade1", "Traded \"TJ\" One", "TOT", 65));
    membership.insert("trade1".into(), "MIL".into());

    // csv-quote names containing quotes
    let players_csv = csv
        .lines()
        .map(|l| {
            if l.contains('"') {
                let parts: Vec<&str> = l.splitn(3, ',').collect();
                format!("{},\"{}\",{}", parts[0], parts[1].replace('"', "\"\""), parts[2])
            } else {
                l.to_owned()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";

    let mut membership_csv = String::from("player_id,team_code\n");
    for (p, t) in &membership {
        let _ = writeln!(membership_csv, "{p},{t}");
    }
    Season {
        players_csv,
        membership_csv,
        membership,
        teams: TEAMS.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn win_pct_csv(teams: &[String], values: &[f64]) -> String {
    let mut s = String::from("team_code,win_pct\n");
    for (t, v) in teams.iter().zip(values) {
        let _ = writeln!(s, "{t},{v}");
    }
    s
}
