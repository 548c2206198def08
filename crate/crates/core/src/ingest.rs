//! CSV ingestion, record filtering and assembly of the numeric statistic table.
//!
//! Rows are read into [`RawRecord`]s, passed through a [`FilterPolicy`]
//! (minimum games, combined multi-team rows, rate-only columns) and finally
//! assembled into a [`StatTable`], which rejects any missing value instead of
//! imputing it.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use ndarray::Array2;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Team code used for a player's combined record across all teams played for.
pub const COMBINED_TEAM_CODE: &str = "TOT";

/// Column roles in the player CSV. Every other column is a statistic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    /// Unique player identifier. When absent the player name is used.
    pub id_column: Option<String>,
    pub name_column: String,
    pub team_column: Option<String>,
    pub games_column: Option<String>,
    pub minutes_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            id_column: None,
            name_column: "name".into(),
            team_column: Some("team".into()),
            games_column: Some("gp".into()),
            minutes_column: "min".into(),
        }
    }
}

impl CsvSchema {
    /// Layout written by [`StatTable::write_csv`].
    pub fn stat_table() -> Self {
        CsvSchema {
            id_column: Some("player_id".into()),
            name_column: "name".into(),
            team_column: None,
            games_column: None,
            minutes_column: "min".into(),
        }
    }

    fn role_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.name_column.as_str(), self.minutes_column.as_str()];
        cols.extend(self.id_column.as_deref());
        cols.extend(self.team_column.as_deref());
        cols.extend(self.games_column.as_deref());
        cols
    }
}

/// One data row of the player CSV. `None` marks a missing statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub player_id: String,
    pub player_name: String,
    pub team_code: String,
    pub games_played: u32,
    pub minutes_total: f64,
    pub stats: IndexMap<String, Option<f64>>,
}

impl RawRecord {
    pub fn is_combined(&self) -> bool {
        self.team_code.eq_ignore_ascii_case(COMBINED_TEAM_CODE)
    }
}

/// Parses player records from CSV text with a header row.
///
/// Statistic cells that are empty, unparseable or non-finite become missing
/// markers. Games and minutes must parse; a bad value there is a parse error.
pub fn parse_csv<R: Read>(mut source: R, schema: &CsvSchema) -> Result<Vec<RawRecord>> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        Error::Parse {
            line: 1 + valid.iter().filter(|&&b| b == b'\n').count() as u64,
            message: "input is not valid UTF-8".into(),
        }
    })?;
    check_quoting(&text)?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::Fields)
        .from_reader(text.as_bytes());

    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_parse_error)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!("duplicate header name '{h}'")));
        }
    }
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("required column '{name}' not found in header")))
    };
    let name_idx = position(&schema.name_column)?;
    let minutes_idx = position(&schema.minutes_column)?;
    let id_idx = schema.id_column.as_deref().map(position).transpose()?;
    let team_idx = schema.team_column.as_deref().map(position).transpose()?;
    let games_idx = schema.games_column.as_deref().map(position).transpose()?;

    let roles = schema.role_columns();
    let stat_cols: Vec<(usize, &str)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !roles.contains(&h.as_str()))
        .map(|(i, h)| (i, h.as_str()))
        .collect();

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_parse_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = |i: usize| row.get(i).unwrap_or("");

        let player_name = cell(name_idx).to_owned();
        let player_id = id_idx.map_or_else(|| player_name.clone(), |i| cell(i).to_owned());
        let team_code = team_idx.map(|i| cell(i).to_owned()).unwrap_or_default();
        let games_played = match games_idx {
            Some(i) => parse_games(cell(i)).ok_or_else(|| Error::Parse {
                line,
                message: format!("invalid games-played value '{}'", cell(i)),
            })?,
            None => 0,
        };
        let minutes_total = cell(minutes_idx)
            .parse::<f64>()
            .ok()
            .filter(|m| m.is_finite() && *m >= 0.0)
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("invalid minutes value '{}'", cell(minutes_idx)),
            })?;
        let stats = stat_cols
            .iter()
            .map(|&(i, name)| (name.to_owned(), parse_stat(cell(i))))
            .collect();

        records.push(RawRecord {
            player_id,
            player_name,
            team_code,
            games_played,
            minutes_total,
            stats,
        });
    }
    Ok(records)
}

fn parse_stat(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_games(cell: &str) -> Option<u32> {
    cell.parse::<u32>().ok().or_else(|| {
        let v = cell.parse::<f64>().ok()?;
        (v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX)).then_some(v as u32)
    })
}

fn csv_parse_error(err: csv::Error) -> Error {
    let line = match err.kind() {
        csv::ErrorKind::UnequalLengths { pos: Some(pos), .. } => pos.line(),
        _ => err.position().map_or(0, |p| p.line()),
    };
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("row has {len} fields, header has {expected_len}"),
        _ => err.to_string(),
    };
    Error::Parse { line, message }
}

/// Rejects unterminated quoted fields and stray characters after a closing
/// quote, which the reader itself would silently accept.
fn check_quoting(text: &str) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        FieldStart,
        Unquoted,
        Quoted,
        QuoteInQuoted,
    }
    let mut state = State::FieldStart;
    let mut line = 1u64;
    let mut opened_at = 1u64;
    for c in text.chars() {
        state = match (state, c) {
            (State::FieldStart, '"') => {
                opened_at = line;
                State::Quoted
            }
            (State::FieldStart | State::Unquoted, ',' | '\n') => State::FieldStart,
            (State::FieldStart | State::Unquoted, _) => State::Unquoted,
            (State::Quoted, '"') => State::QuoteInQuoted,
            (State::Quoted, _) => State::Quoted,
            (State::QuoteInQuoted, '"') => State::Quoted,
            (State::QuoteInQuoted, ',' | '\n') => State::FieldStart,
            (State::QuoteInQuoted, '\r' | ' ' | '\t') => State::QuoteInQuoted,
            (State::QuoteInQuoted, other) => {
                return Err(Error::Parse {
                    line,
                    message: format!("unexpected '{other}' after closing quote"),
                })
            }
        };
        if c == '\n' {
            line += 1;
        }
    }
    if state == State::Quoted {
        return Err(Error::Parse {
            line: opened_at,
            message: "unbalanced quote".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnMode {
    /// Drop columns matching the excluded patterns (season totals, per-game).
    #[default]
    RateOnly,
    All,
}

/// Record and column filtering rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FilterPolicyRepr", into = "FilterPolicyRepr")]
pub struct FilterPolicy {
    pub min_games: u32,
    pub column_mode: ColumnMode,
    patterns: Vec<Regex>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FilterPolicyRepr {
    min_games: u32,
    column_mode: ColumnMode,
    excluded_column_patterns: Vec<String>,
}

impl Default for FilterPolicyRepr {
    fn default() -> Self {
        FilterPolicyRepr {
            min_games: FilterPolicy::DEFAULT_MIN_GAMES,
            column_mode: ColumnMode::RateOnly,
            excluded_column_patterns: FilterPolicy::DEFAULT_EXCLUDED_PATTERNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl TryFrom<FilterPolicyRepr> for FilterPolicy {
    type Error = Error;

    fn try_from(repr: FilterPolicyRepr) -> Result<Self> {
        FilterPolicy::new(repr.min_games, repr.column_mode, &repr.excluded_column_patterns)
    }
}

impl From<FilterPolicy> for FilterPolicyRepr {
    fn from(policy: FilterPolicy) -> Self {
        FilterPolicyRepr {
            min_games: policy.min_games,
            column_mode: policy.column_mode,
            excluded_column_patterns: policy.excluded_column_patterns(),
        }
    }
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicyRepr::default()
            .try_into()
            .expect("default patterns compile")
    }
}

impl FilterPolicy {
    /// Half of an 82-game regular season.
    pub const DEFAULT_MIN_GAMES: u32 = 41;

    /// Season-total and per-game column names.
    pub const DEFAULT_EXCLUDED_PATTERNS: &'static [&'static str] = &[
        r"(?i)season[ _-]?total",
        r"(?i)^total[ _-]?season",
        r"(?i)per[ _-]?game",
        r"(?i)(^|[ _-])pg$",
    ];

    pub fn new<S: AsRef<str>>(min_games: u32, column_mode: ColumnMode, patterns: &[S]) -> Result<Self> {
        let patterns = patterns
            .iter()
            .map(|p| {
                Regex::new(p.as_ref())
                    .map_err(|e| Error::Config(format!("bad column pattern '{}': {e}", p.as_ref())))
            })
            .collect::<Result<_>>()?;
        Ok(FilterPolicy {
            min_games,
            column_mode,
            patterns,
        })
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn excluded_column_patterns(&self) -> Vec<String> {
        self.patterns.iter().map(|r| r.as_str().to_owned()).collect()
    }

    pub fn excludes_column(&self, name: &str) -> bool {
        self.column_mode == ColumnMode::RateOnly && self.patterns.iter().any(|r| r.is_match(name))
    }
}

/// Applies the record and column policy.
///
/// Players with a combined (`TOT`) row keep only that row. Records below
/// `min_games` are then dropped, and in rate-only mode any statistic whose
/// name matches an excluded pattern is removed.
pub fn apply_filter(records: Vec<RawRecord>, policy: &FilterPolicy) -> Vec<RawRecord> {
    let has_combined: HashSet<String> = records
        .iter()
        .filter(|r| r.is_combined())
        .map(|r| r.player_id.clone())
        .collect();

    records
        .into_iter()
        .filter(|r| r.is_combined() || !has_combined.contains(&r.player_id))
        .filter(|r| r.games_played >= policy.min_games)
        .map(|mut r| {
            if policy.column_mode == ColumnMode::RateOnly {
                r.stats.retain(|name, _| !policy.excludes_column(name));
            }
            r
        })
        .collect()
}

/// Labeled entity × statistic matrix with only finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StatTable {
    entity_ids: Vec<String>,
    entity_names: Vec<String>,
    minutes: Vec<f64>,
    stat_names: Vec<String>,
    values: Array2<f64>,
}

impl StatTable {
    pub fn new(
        entity_ids: Vec<String>,
        entity_names: Vec<String>,
        minutes: Vec<f64>,
        stat_names: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self> {
        let (n, p) = values.dim();
        if entity_ids.len() != n || entity_names.len() != n || minutes.len() != n || stat_names.len() != p {
            return Err(Error::Schema(format!(
                "label lengths do not match a {n}x{p} value matrix"
            )));
        }
        if n < 2 || p < 1 {
            return Err(Error::InsufficientData {
                observations: n,
                terms: p,
            });
        }
        let mut ids = HashSet::new();
        if let Some(dup) = entity_ids.iter().find(|id| !ids.insert(id.as_str())) {
            return Err(Error::Schema(format!("duplicate entity id '{dup}'")));
        }
        let mut names = HashSet::new();
        if let Some(dup) = stat_names.iter().find(|s| !names.insert(s.as_str())) {
            return Err(Error::Schema(format!("duplicate statistic '{dup}'")));
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::MissingValues {
                missing: vec![(entity_ids[i].clone(), stat_names[j].clone())],
            });
        }
        Ok(StatTable {
            entity_ids,
            entity_names,
            minutes,
            stat_names,
            values,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_stats(&self) -> usize {
        self.values.ncols()
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn minutes(&self) -> &[f64] {
        &self.minutes
    }

    pub fn stat_names(&self) -> &[String] {
        &self.stat_names
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Keeps the named statistics, in the order given.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<StatTable> {
        let index: HashMap<&str, usize> = self
            .stat_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let cols = names
            .iter()
            .map(|n| {
                index
                    .get(n.as_ref())
                    .copied()
                    .ok_or_else(|| Error::Schema(format!("statistic '{}' not in table", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self.values.select(ndarray::Axis(1), &cols);
        StatTable::new(
            self.entity_ids.clone(),
            self.entity_names.clone(),
            self.minutes.clone(),
            names.iter().map(|n| n.as_ref().to_owned()).collect(),
            values,
        )
    }

    /// Removes the named statistics; names not present are ignored.
    pub fn drop_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<StatTable> {
        let drop: HashSet<&str> = names.iter().map(AsRef::as_ref).collect();
        let keep: Vec<&String> = self
            .stat_names
            .iter()
            .filter(|s| !drop.contains(s.as_str()))
            .collect();
        self.select_columns(&keep)
    }

    /// Writes the table using the [`CsvSchema::stat_table`] layout with
    /// shortest round-trip number formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["player_id".to_owned(), "name".into(), "min".into()];
        header.extend(self.stat_names.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut rec = vec![
                self.entity_ids[i].clone(),
                self.entity_names[i].clone(),
                self.minutes[i].to_string(),
            ];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<StatTable> {
        build_table(&parse_csv(source, &CsvSchema::stat_table())?)
    }
}

/// Assembles filtered records into a [`StatTable`], preserving row order and
/// the first record's column order.
pub fn build_table(records: &[RawRecord]) -> Result<StatTable> {
    let first = records.first().ok_or(Error::InsufficientData {
        observations: 0,
        terms: 0,
    })?;
    let stat_names: Vec<String> = first.stats.keys().cloned().collect();
    let expected: BTreeSet<&str> = stat_names.iter().map(String::as_str).collect();

    for r in records {
        let got: BTreeSet<&str> = r.stats.keys().map(String::as_str).collect();
        if got != expected {
            let missing: Vec<&str> = expected.difference(&got).copied().collect();
            let extra: Vec<&str> = got.difference(&expected).copied().collect();
            return Err(Error::Schema(format!(
                "record '{}' has a different statistic set (missing: [{}], extra: [{}])",
                r.player_id,
                missing.join(", "),
                extra.join(", ")
            )));
        }
    }

    let mut missing = Vec::new();
    let mut values = Array2::zeros((records.len(), stat_names.len()));
    for (i, r) in records.iter().enumerate() {
        for (j, name) in stat_names.iter().enumerate() {
            match r.stats[name.as_str()] {
                Some(v) => values[[i, j]] = v,
                None => missing.push((r.player_id.clone(), name.clone())),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingValues { missing });
    }

    StatTable::new(
        records.iter().map(|r| r.player_id.clone()).collect(),
        records.iter().map(|r| r.player_name.clone()).collect(),
        records.iter().map(|r| r.minutes_total).collect(),
        stat_names,
        values,
    )
}
