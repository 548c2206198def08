//! Principal component analysis of per-player tracking statistics, with
//! minutes-weighted team scores, squared-distance similarity rankings
//! (the Statistical Diversity Index) and an OLS regression of team
//! winning percentage on component scores.
//!
//! The typical pipeline:
//!
//! ```no_run
//! use court_pca::{ingest, pca, similarity};
//!
//! # fn main() -> court_pca::Result<()> {
//! let file = std::fs::File::open("players.csv").unwrap();
//! let records = ingest::parse_csv(file, &ingest::CsvSchema::default())?;
//! let records = ingest::apply_filter(records, &ingest::FilterPolicy::default());
//! let table = ingest::build_table(&records)?;
//! let data = pca::standardize(&table, pca::ConstantColumns::Reject)?;
//! let model = pca::fit_pca(&data, 4, &pca::FitOptions::default())?;
//! let scores = pca::transform(&model, &table)?;
//! let ranking = similarity::rank_similar(&scores, "Tony Parker", 5, &Default::default())?;
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod distributions;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod pca;
pub mod regression;
pub mod report;
pub mod scoring;
pub mod similarity;

pub use error::{Error, ErrorClass, Result};
pub use ingest::{FilterPolicy, RawRecord, StatTable};
pub use pca::{PcaModel, ScoreSet};
pub use regression::RegressionFit;
pub use scoring::TeamScoreSet;
pub use similarity::{ComponentSet, SdiRanking};
