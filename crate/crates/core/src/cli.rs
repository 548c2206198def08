//! Command-line pipeline: argument and config-file resolution plus the
//! `fit`, `scree`, `scores`, `teams`, `similar` and `regress` subcommands.
//!
//! Component numbers on the command line and in config files are 1-based
//! (`--components 1,2,3,4`, `--weights 2=0.17,4=0.09`) to match the `PC 1`
//! labels in reports. Internally everything is 0-based.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{apply_filter, build_table, parse_csv, CsvSchema, FilterPolicy, RawRecord, StatTable};
use crate::pca::{
    fit_pca, standardize, transform, variance_spectrum, ConstantColumns, FitOptions, PcaModel, PcaSolver,
    ScoreSet, DEFAULT_COMPONENTS,
};
use crate::regression::{fit_ols, RegressionFit};
use crate::report::{self, OutputFormat};
use crate::scoring::{membership_from_records, regression_weighted_score, team_scores, TeamScoreSet};
use crate::similarity::{rank_similar, ComponentSet, SdiRanking};

pub const SCREE_ROWS: usize = 10;
pub const DEFAULT_TOP: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "court-pca", version, about = "Principal components, player similarity and team regressions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit the model and write model.json plus scree data.
    Fit,
    /// Write scree data (variance per component) for the input table.
    Scree,
    /// Write per-player component scores.
    Scores,
    /// Write minutes-weighted team scores.
    Teams,
    /// Rank players by SDI against a query player.
    Similar,
    /// Regress winning percentage on team scores.
    Regress,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Player statistics CSV.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Model JSON (defaults to <out>/model.json).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub min_games: Option<u32>,
    /// Number of components to keep.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// 1-based components used for SDI, e.g. `1,2,3,4`.
    #[arg(long, global = true)]
    pub components: Option<String>,
    #[arg(long, global = true)]
    pub top: Option<usize>,
    /// Player id (or unique name) to compare against.
    #[arg(long, global = true)]
    pub query: Option<String>,
    /// Two-column CSV: player_id,team_code.
    #[arg(long, global = true)]
    pub membership: Option<PathBuf>,
    /// Two-column CSV: team_code,win_pct.
    #[arg(long, global = true)]
    pub winpct: Option<PathBuf>,
    /// 1-based component weights for the composite score, e.g. `2=0.17,4=0.09`.
    #[arg(long, global = true)]
    pub weights: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

/// Contents of a `--config` file. Any command-line flag may appear here.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub min_games: Option<u32>,
    pub k: Option<usize>,
    pub components: Option<Vec<usize>>,
    pub top: Option<usize>,
    pub query: Option<String>,
    pub membership: Option<PathBuf>,
    pub winpct: Option<PathBuf>,
    pub weights: Option<BTreeMap<String, f64>>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub filter: Option<FilterSource>,
    pub schema: Option<CsvSchema>,
    pub solver: Option<PcaSolver>,
}

/// A filter policy given inline or as a path to its own JSON file.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum FilterSource {
    Path(PathBuf),
    Inline(FilterPolicy),
}

#[derive(Debug, Clone)]
pub struct InputPaths {
    pub players: Option<PathBuf>,
    pub membership: Option<PathBuf>,
    pub win_pct: Option<PathBuf>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_paths: InputPaths,
    pub filter: FilterPolicy,
    pub schema: CsvSchema,
    pub k: usize,
    pub components_for_sdi: Option<ComponentSet>,
    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
    pub model_path: Option<PathBuf>,
    pub query: Option<String>,
    pub top: usize,
    pub weights: Option<BTreeMap<usize, f64>>,
    pub solver: PcaSolver,
}

fn parse_component(text: &str) -> Result<usize> {
    let c: usize = text
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("invalid component number '{text}'")))?;
    one_based(c)
}

fn one_based(c: usize) -> Result<usize> {
    c.checked_sub(1)
        .ok_or_else(|| Error::Parameter("component numbers start at 1".into()))
}

fn parse_components(text: &str) -> Result<ComponentSet> {
    ComponentSet::new(text.split(',').map(parse_component).collect::<Result<Vec<_>>>()?)
}

fn parse_weights(text: &str) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (c, w) = part
            .split_once(['=', ':'])
            .ok_or_else(|| Error::Parameter(format!("weight '{part}' is not of the form PC=VALUE")))?;
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("invalid weight value '{w}'")))?;
        out.insert(parse_component(c)?, w);
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };

        let mut filter = match file.filter {
            Some(FilterSource::Inline(p)) => p,
            Some(FilterSource::Path(p)) => FilterPolicy::from_json_file(p)?,
            None => FilterPolicy::default(),
        };
        if let Some(m) = flags.min_games.or(file.min_games) {
            filter.min_games = m;
        }

        let components_for_sdi = match (&flags.components, file.components) {
            (Some(text), _) => Some(parse_components(text)?),
            (None, Some(list)) => Some(ComponentSet::new(
                list.into_iter().map(one_based).collect::<Result<Vec<_>>>()?,
            )?),
            (None, None) => None,
        };
        let weights = match (&flags.weights, file.weights) {
            (Some(text), _) => Some(parse_weights(text)?),
            (None, Some(map)) => Some(
                map.into_iter()
                    .map(|(c, w)| Ok((parse_component(&c)?, w)))
                    .collect::<Result<BTreeMap<_, _>>>()?,
            ),
            (None, None) => None,
        };
        let k = flags.k.or(file.k).unwrap_or(DEFAULT_COMPONENTS);
        if k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }

        Ok(RunConfig {
            input_paths: InputPaths {
                players: flags.input.clone().or(file.input),
                membership: flags.membership.clone().or(file.membership),
                win_pct: flags.winpct.clone().or(file.winpct),
            },
            filter,
            schema: file.schema.unwrap_or_default(),
            k,
            components_for_sdi,
            output_dir: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            output_format: flags.format.or(file.format).unwrap_or_default(),
            model_path: flags.model.clone().or(file.model),
            query: flags.query.clone().or(file.query),
            top: flags.top.or(file.top).unwrap_or(DEFAULT_TOP),
            weights,
            solver: file.solver.unwrap_or_default(),
        })
    }

    fn model_path(&self) -> PathBuf {
        self.model_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.json"))
    }

    fn output_file(&self, stem: &str) -> PathBuf {
        self.output_dir
            .join(format!("{stem}.{}", self.output_format.extension()))
    }
}

/// Filtered records and the table assembled from them.
pub struct LoadedPlayers {
    pub records: Vec<RawRecord>,
    pub table: StatTable,
}

pub fn load_players(config: &RunConfig) -> Result<LoadedPlayers> {
    let path = config
        .input_paths
        .players
        .as_deref()
        .ok_or_else(|| Error::Parameter("--input is required".into()))?;
    let records = parse_csv(report::open(path)?, &config.schema)?;
    let records = apply_filter(records, &config.filter);
    let table = build_table(&records)?;
    Ok(LoadedPlayers { records, table })
}

pub fn load_model(config: &RunConfig) -> Result<PcaModel> {
    PcaModel::from_json_file(config.model_path())
}

/// Player scores under a fitted model, dropping columns the model removed.
pub fn player_scores(model: &PcaModel, table: &StatTable) -> Result<ScoreSet> {
    let table = table.drop_columns(&model.removed_columns)?;
    transform(model, &table)
}

/// Outcome of a subcommand: files written and non-fatal warnings.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub stdout: String,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_file<F>(path: PathBuf, out: &mut RunOutput, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(&path)?;
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    out.files.push(path);
    Ok(())
}

pub fn run(command: Command, config: &RunConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    match command {
        Command::Fit => cmd_fit(config, &mut out)?,
        Command::Scree => cmd_scree(config, &mut out)?,
        Command::Scores => cmd_scores(config, &mut out)?,
        Command::Teams => cmd_teams(config, &mut out)?,
        Command::Similar => cmd_similar(config, &mut out)?,
        Command::Regress => cmd_regress(config, &mut out)?,
    }
    Ok(out)
}

fn standardized_input(config: &RunConfig, out: &mut RunOutput) -> Result<crate::pca::Standardized> {
    let players = load_players(config)?;
    let data = standardize(&players.table, ConstantColumns::Remove)?;
    for col in &data.removed {
        out.warnings.push(format!("removed zero-variance column '{col}'"));
    }
    Ok(data)
}

fn write_scree_file(config: &RunConfig, data: &crate::pca::Standardized, out: &mut RunOutput) -> Result<()> {
    let spectrum = variance_spectrum(data.matrix.view());
    let total: f64 = data.matrix.ncols() as f64;
    let rows = report::scree_rows(&spectrum, total, SCREE_ROWS);
    write_file(config.output_file("scree"), out, |w| {
        report::write_scree(w, &rows, config.output_format)
    })
}

fn cmd_fit(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let data = standardized_input(config, out)?;
    let p = data.matrix.ncols();
    if config.k > p {
        return Err(Error::Parameter(format!(
            "k = {} exceeds the number of statistics ({p})",
            config.k
        )));
    }
    let opts = FitOptions {
        solver: config.solver,
        ..FitOptions::default()
    };
    let model = fit_pca(&data, config.k, &opts)?;
    write_file(config.model_path(), out, |w| model.write_json(w))?;
    write_scree_file(config, &data, out)
}

fn cmd_scree(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let data = standardized_input(config, out)?;
    write_scree_file(config, &data, out)
}

fn cmd_scores(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let model = load_model(config)?;
    let players = load_players(config)?;
    let scores = player_scores(&model, &players.table)?;
    write_file(config.output_file("scores"), out, |w| {
        report::write_scores(w, &scores, config.output_format)
    })
}

/// Team scores for the configured membership, with winning percentages
/// attached when a file is given.
pub fn compute_teams(config: &RunConfig, model: &PcaModel, warnings: &mut Vec<String>) -> Result<TeamScoreSet> {
    let players = load_players(config)?;
    let scores = player_scores(model, &players.table)?;
    let membership = match &config.input_paths.membership {
        Some(path) => report::read_membership(report::open(path)?)?,
        None => membership_from_records(&players.records),
    };
    let agg = team_scores(&scores, &membership)?;
    if !agg.unassigned.is_empty() {
        warnings.push(format!(
            "{} players without a team assignment were excluded: {}",
            agg.unassigned.len(),
            agg.unassigned.join(", ")
        ));
    }
    let mut teams = agg.teams;
    if let Some(path) = &config.input_paths.win_pct {
        teams = teams.with_win_pct(&report::read_win_pct(report::open(path)?)?)?;
    }
    Ok(teams)
}

fn cmd_teams(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let model = load_model(config)?;
    let teams = compute_teams(config, &model, &mut out.warnings)?;
    let weighted = config
        .weights
        .as_ref()
        .map(|w| regression_weighted_score(&teams, w))
        .transpose()?;
    write_file(config.output_file("teams"), out, |w| {
        report::write_teams(w, &teams, weighted.as_deref(), config.output_format)
    })
}

/// SDI ranking for the configured query. Falls back to matching a unique
/// player name when the query is not an id.
pub fn compute_similar(config: &RunConfig, model: &PcaModel) -> Result<SdiRanking> {
    let query = config
        .query
        .as_deref()
        .ok_or_else(|| Error::Parameter("--query is required".into()))?;
    let players = load_players(config)?;
    let scores = player_scores(model, &players.table)?;
    let id = if scores.index_of(query).is_some() {
        query.to_owned()
    } else {
        let hits: Vec<usize> = (0..scores.entity_names.len())
            .filter(|&i| scores.entity_names[i] == query)
            .collect();
        match hits.as_slice() {
            [i] => scores.entity_ids[*i].clone(),
            _ => return Err(Error::Lookup(query.to_owned())),
        }
    };
    let components = match &config.components_for_sdi {
        Some(c) => c.clone(),
        None => ComponentSet::leading(model.n_components().min(4))?,
    };
    rank_similar(&scores, &id, config.top, &components)
}

fn cmd_similar(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let model = load_model(config)?;
    let ranking = compute_similar(config, &model)?;
    write_file(config.output_file("similar"), out, |w| {
        report::write_ranking(w, &ranking, config.output_format)
    })
}

/// Winning percentage regressed on every team component score.
pub fn compute_regression(config: &RunConfig, model: &PcaModel, warnings: &mut Vec<String>) -> Result<RegressionFit> {
    if config.input_paths.win_pct.is_none() {
        return Err(Error::Parameter("--winpct is required for regress".into()));
    }
    let teams = compute_teams(config, model, warnings)?;
    let outcome = Array1::from(teams.win_pct.clone().expect("win_pct attached above"));
    let names: Vec<String> = (1..=teams.scores.ncols()).map(|c| format!("PC {c} Score")).collect();
    let fit = fit_ols(teams.scores.view(), &names, outcome.view(), true)?;
    warnings.extend(fit.warnings.iter().cloned());
    Ok(fit)
}

fn cmd_regress(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let model = load_model(config)?;
    let mut warnings = Vec::new();
    let fit = compute_regression(config, &model, &mut warnings)?;
    out.warnings.extend(warnings);
    let table = fit.summary_table();
    write_file(config.output_dir.join("regression.txt"), out, |w| {
        w.write_all(table.as_bytes())
            .map_err(|e| Error::io("regression.txt", e))
    })?;
    write_file(config.output_dir.join("regression.json"), out, |w| {
        serde_json::to_writer_pretty(&mut *w, &fit)?;
        w.write_all(b"\n").map_err(|e| Error::io("regression.json", e))
    })?;
    out.stdout = table;
    Ok(())
}

/// One-line JSON diagnostic for the error stream.
pub fn error_line(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "exit_code": err.class().exit_code(),
        "message": err.to_string(),
    })
    .to_string()
}
