//! Plot-ready output files and the small two-column input maps.
//!
//! Numbers are written in shortest round-trip form so that identical inputs
//! give byte-identical files.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::pca::ScoreSet;
use crate::scoring::TeamScoreSet;
use crate::similarity::SdiRanking;

/// Pretty JSON formatter that writes floats as shortest round-trip
/// scientific notation (`1.5e-1`).
pub struct ScientificFormatter {
    inner: PrettyFormatter<'static>,
}

impl ScientificFormatter {
    pub fn new() -> Self {
        ScientificFormatter {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Default for ScientificFormatter {
    fn default() -> Self {
        Self::new()
    }
}

impl Formatter for ScientificFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeRow {
    /// 1-based component number.
    pub component: usize,
    pub variance: f64,
    pub explained_ratio: f64,
    pub cumulative_ratio: f64,
}

/// Scree rows for the first `min(max_rows, spectrum.len())` components.
pub fn scree_rows(spectrum: &[f64], total_variance: f64, max_rows: usize) -> Vec<ScreeRow> {
    let mut cumulative = 0.0;
    spectrum
        .iter()
        .take(max_rows)
        .enumerate()
        .map(|(i, &v)| {
            let ratio = v / total_variance;
            cumulative += ratio;
            ScreeRow {
                component: i + 1,
                variance: v,
                explained_ratio: ratio,
                cumulative_ratio: cumulative,
            }
        })
        .collect()
}

fn write_json<W: Write, T: Serialize>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::io("<output>", e))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<output>", e))
}

pub fn write_scree<W: Write>(writer: W, rows: &[ScreeRow], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => write_json(writer, &rows),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(["component", "variance", "explained_ratio", "cumulative_ratio"])?;
            for r in rows {
                w.write_record([
                    r.component.to_string(),
                    r.variance.to_string(),
                    r.explained_ratio.to_string(),
                    r.cumulative_ratio.to_string(),
                ])?;
            }
            finish(w)
        }
    }
}

fn pc_headers(k: usize) -> impl Iterator<Item = String> {
    (1..=k).map(|c| format!("pc{c}"))
}

#[derive(Serialize)]
struct EntityScores<'a> {
    entity_id: &'a str,
    entity_name: &'a str,
    minutes: f64,
    scores: Vec<f64>,
}

pub fn write_scores<W: Write>(writer: W, scores: &ScoreSet, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let rows: Vec<EntityScores<'_>> = (0..scores.entity_ids.len())
                .map(|i| EntityScores {
                    entity_id: &scores.entity_ids[i],
                    entity_name: &scores.entity_names[i],
                    minutes: scores.minutes[i],
                    scores: scores.scores.row(i).to_vec(),
                })
                .collect();
            write_json(writer, &rows)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let mut header = vec!["entity_id".to_owned(), "entity_name".into(), "minutes".into()];
            header.extend(pc_headers(scores.n_components()));
            w.write_record(&header)?;
            for i in 0..scores.entity_ids.len() {
                let mut rec = vec![
                    scores.entity_ids[i].clone(),
                    scores.entity_names[i].clone(),
                    scores.minutes[i].to_string(),
                ];
                rec.extend(scores.scores.row(i).iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
            finish(w)
        }
    }
}

#[derive(Serialize)]
struct TeamRow<'a> {
    team_code: &'a str,
    total_minutes: f64,
    scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    win_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weighted_score: Option<f64>,
}

/// Team scores with optional winning percentage and composite columns.
pub fn write_teams<W: Write>(
    writer: W,
    teams: &TeamScoreSet,
    weighted: Option<&[f64]>,
    format: OutputFormat,
) -> Result<()> {
    let n = teams.team_codes.len();
    match format {
        OutputFormat::Json => {
            let rows: Vec<TeamRow<'_>> = (0..n)
                .map(|t| TeamRow {
                    team_code: &teams.team_codes[t],
                    total_minutes: teams.total_minutes[t],
                    scores: teams.scores.row(t).to_vec(),
                    win_pct: teams.win_pct.as_ref().map(|w| w[t]),
                    weighted_score: weighted.map(|w| w[t]),
                })
                .collect();
            write_json(writer, &rows)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let mut header = vec!["team_code".to_owned(), "total_minutes".into()];
            header.extend(pc_headers(teams.scores.ncols()));
            if teams.win_pct.is_some() {
                header.push("win_pct".into());
            }
            if weighted.is_some() {
                header.push("weighted_score".into());
            }
            w.write_record(&header)?;
            for t in 0..n {
                let mut rec = vec![teams.team_codes[t].clone(), teams.total_minutes[t].to_string()];
                rec.extend(teams.scores.row(t).iter().map(f64::to_string));
                if let Some(win) = &teams.win_pct {
                    rec.push(win[t].to_string());
                }
                if let Some(ws) = weighted {
                    rec.push(ws[t].to_string());
                }
                w.write_record(&rec)?;
            }
            finish(w)
        }
    }
}

pub fn write_ranking<W: Write>(writer: W, ranking: &SdiRanking, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => write_json(writer, ranking),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(["rank", "entity_id", "entity_name", "sdi"])?;
            for (i, e) in ranking.entries.iter().enumerate() {
                w.write_record([(i + 1).to_string(), e.entity_id.clone(), e.entity_name.clone(), e.sdi.to_string()])?;
            }
            finish(w)
        }
    }
}

fn read_pairs<R: Read>(source: R, what: &str) -> Result<Vec<(String, String, u64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: format!("{what}: {e}"),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("{what}: expected 2 columns, found {}", row.len()),
            });
        }
        out.push((row[0].to_owned(), row[1].to_owned(), line));
    }
    Ok(out)
}

/// `player_id,team_code` pairs. A player listed twice is an error.
pub fn read_membership<R: Read>(source: R) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (player, team, line) in read_pairs(source, "membership")? {
        if map.insert(player.clone(), team).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("player '{player}' assigned twice"),
            });
        }
    }
    Ok(map)
}

/// `team_code,win_pct` pairs.
pub fn read_win_pct<R: Read>(source: R) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for (team, value, line) in read_pairs(source, "win_pct")? {
        let v: f64 = value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid winning percentage '{value}'"),
        })?;
        if map.insert(team.clone(), v).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("team '{team}' listed twice"),
            });
        }
    }
    Ok(map)
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}
