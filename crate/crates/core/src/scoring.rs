//! Team-level component scores as minutes-weighted averages of player scores.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pca::ScoreSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TeamScoreSet {
    /// Sorted ascending.
    pub team_codes: Vec<String>,
    /// `T × k`.
    pub scores: Array2<f64>,
    pub total_minutes: Vec<f64>,
    pub win_pct: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeamAggregation {
    pub teams: TeamScoreSet,
    /// Scored players with no team assignment; they are left out.
    pub unassigned: Vec<String>,
}

/// `t_k(team) = Σ m_i t_k(i) / Σ m_i` over the team's players.
pub fn team_scores(players: &ScoreSet, membership: &BTreeMap<String, String>) -> Result<TeamAggregation> {
    let index: HashMap<&str, usize> = players
        .entity_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let unknown: Vec<&str> = membership
        .keys()
        .map(String::as_str)
        .filter(|id| !index.contains_key(id))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Lookup(unknown.join(", ")));
    }

    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (player, team) in membership {
        members.entry(team.as_str()).or_default().push(index[player.as_str()]);
    }
    let unassigned = players
        .entity_ids
        .iter()
        .filter(|id| !membership.contains_key(id.as_str()))
        .cloned()
        .collect();

    let k = players.n_components();
    let mut scores = Array2::zeros((members.len(), k));
    let mut total_minutes = Vec::with_capacity(members.len());
    for (t, (team, rows)) in members.iter().enumerate() {
        let total: f64 = rows.iter().map(|&i| players.minutes[i]).sum();
        if !(total > 0.0) {
            return Err(Error::Aggregation {
                team: team.to_string(),
            });
        }
        for c in 0..k {
            let weighted: f64 = rows
                .iter()
                .map(|&i| players.minutes[i] * players.scores[[i, c]])
                .sum();
            // rounding can push the mean an ulp past the member range
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(players.scores[[i, c]]), hi.max(players.scores[[i, c]]))
            });
            scores[[t, c]] = (weighted / total).clamp(lo, hi);
        }
        total_minutes.push(total);
    }

    Ok(TeamAggregation {
        teams: TeamScoreSet {
            team_codes: members.keys().map(|s| s.to_string()).collect(),
            scores,
            total_minutes,
            win_pct: None,
        },
        unassigned,
    })
}

impl TeamScoreSet {
    /// Attaches winning percentages; every team needs one, each in `[0, 1]`.
    pub fn with_win_pct(mut self, win_pct: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = Vec::with_capacity(self.team_codes.len());
        for team in &self.team_codes {
            let w = *win_pct
                .get(team)
                .ok_or_else(|| Error::Lookup(format!("no winning percentage for team {team}")))?;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Schema(format!(
                    "winning percentage {w} for team {team} is outside [0, 1]"
                )));
            }
            out.push(w);
        }
        self.win_pct = Some(out);
        Ok(self)
    }
}

/// `Σ_j weights[j] · score[j]` per team; components without a weight
/// contribute nothing.
pub fn regression_weighted_score(team: &TeamScoreSet, weights: &BTreeMap<usize, f64>) -> Result<Vec<f64>> {
    let k = team.scores.ncols();
    if let Some(bad) = weights.keys().find(|&&c| c >= k) {
        return Err(Error::Parameter(format!(
            "weight for component index {bad} but only {k} components"
        )));
    }
    Ok(team
        .scores
        .rows()
        .into_iter()
        .map(|row| weights.iter().map(|(&c, w)| w * row[c]).sum())
        .collect())
}

/// Membership from player team codes, skipping combined multi-team rows.
pub fn membership_from_records<'a, I>(records: I) -> BTreeMap<String, String>
where
    I: IntoIterator<Item = &'a crate::ingest::RawRecord>,
{
    records
        .into_iter()
        .filter(|r| !r.is_combined() && !r.team_code.is_empty())
        .map(|r| (r.player_id.clone(), r.team_code.clone()))
        .collect()
}
