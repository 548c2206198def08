mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use court_pca::ingest::{apply_filter, build_table, parse_csv, CsvSchema, FilterPolicy};
use court_pca::pca::{fit_pca, standardize, transform, ConstantColumns, FitOptions, PcaModel};
use court_pca::report::{write_scores, write_teams, OutputFormat};
use court_pca::scoring::{team_scores, TeamScoreSet};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_court-pca");

struct Fixture {
    dir: TempDir,
    season: common::Season,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let season = common::season(seed);
        std::fs::write(dir.path().join("players.csv"), &season.players_csv).unwrap();
        std::fs::write(dir.path().join("membership.csv"), &season.membership_csv).unwrap();
        std::fs::write(
            dir.path().join("config.json"),
            r#"{"schema": {"id_column": "player_id"}}"#,
        )
        .unwrap();
        Fixture { dir, season }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .arg("--config")
            .arg(self.path("config.json"))
            .arg("--input")
            .arg(self.path("players.csv"))
            .arg("--out")
            .arg(self.path("out"))
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path("out").join(name)).unwrap()
    }
}

fn schema() -> CsvSchema {
    CsvSchema {
        id_column: Some("player_id".into()),
        ..CsvSchema::default()
    }
}

/// The same pipeline assembled from library calls.
fn library_teams(season: &common::Season) -> (PcaModel, TeamScoreSet, Vec<u8>) {
    let records = parse_csv(season.players_csv.as_bytes(), &schema()).unwrap();
    let table = build_table(&apply_filter(records, &FilterPolicy::default())).unwrap();
    let data = standardize(&table, ConstantColumns::Reject).unwrap();
    let model = fit_pca(&data, 4, &FitOptions::default()).unwrap();
    let scores = transform(&model, &table).unwrap();
    let mut scores_csv = Vec::new();
    write_scores(&mut scores_csv, &scores, OutputFormat::Csv).unwrap();
    let teams = team_scores(&scores, &season.membership).unwrap().teams;
    (model, teams, scores_csv)
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn exact_win_pct(teams: &TeamScoreSet) -> Vec<f64> {
    teams
        .scores
        .rows()
        .into_iter()
        .map(|s| 0.35 - 0.01 * s[0] + 0.17 * s[1] - 0.20 * s[2] + 0.09 * s[3])
        .collect()
}

#[test]
fn fit_writes_model_and_scree() {
    let fx = Fixture::new(1);
    let out = fx.run(&["fit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = PcaModel::from_json_file(fx.path("out/model.json")).unwrap();
    assert_eq!(model.n_components(), 4);
    let scree = fx.read("scree.csv");
    let p = common::RATE_STATS.len();
    assert_eq!(scree.lines().count(), 1 + 10.min(p));
    assert!(scree.starts_with("component,"));
}

#[test]
fn missing_input_names_the_path() {
    let fx = Fixture::new(1);
    let out = Command::new(BIN)
        .args(["fit", "--input"])
        .arg(fx.path("nope.csv"))
        .arg("--out")
        .arg(fx.path("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("nope.csv"));
    assert_eq!(err["exit_code"], out.status.code().unwrap());
}

#[test]
fn too_many_components_is_a_usage_error() {
    let fx = Fixture::new(1);
    let out = fx.run(&["fit", "--k", "20"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
}

#[test]
fn similar_returns_top_rows() {
    let fx = Fixture::new(2);
    assert!(fx.run(&["fit"]).status.success());
    let out = fx.run(&["similar", "--query", "p000", "--top", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fx.read("similar.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank,entity_id,entity_name,sdi");
    assert_eq!(lines.len(), 6);
    assert!(lines[1..].iter().all(|l| !l.contains(",p000,")));

    // query by unique name works too
    assert!(fx.run(&["similar", "--query", "Player 0-0", "--top", "5"]).status.success());
    assert_eq!(fx.read("similar.csv"), text);
}

#[test]
fn similar_on_small_table_caps_rows() {
    let fx = Fixture::new(2);
    let mut csv = String::from("player_id,name,team,gp,min,a,b,c\n");
    for (i, row) in [[1.0, 2.0, 0.5], [2.0, 1.0, 0.1], [0.3, 0.2, 0.9], [1.1, 1.9, 0.4], [3.0, 0.1, 0.2], [0.7, 0.8, 0.6]]
        .iter()
        .enumerate()
    {
        csv.push_str(&format!("q{i},Q {i},ATL,60,1500,{},{},{}\n", row[0], row[1], row[2]));
    }
    std::fs::write(fx.path("players.csv"), csv).unwrap();
    assert!(fx.run(&["fit", "--k", "3"]).status.success());
    let out = fx.run(&["similar", "--query", "q0", "--top", "5", "--components", "1,2,3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fx.read("similar.csv").lines().count(), 6);
}

#[test]
fn unknown_query_fails() {
    let fx = Fixture::new(2);
    assert!(fx.run(&["fit"]).status.success());
    let out = fx.run(&["similar", "--query", "nobody"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "lookup");
}

#[test]
fn teams_without_win_pct_has_no_win_column() {
    let fx = Fixture::new(3);
    assert!(fx.run(&["fit"]).status.success());
    let m = fx.path("membership.csv");
    let out = fx.run(&["teams", "--membership", m.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fx.read("teams.csv");
    assert_eq!(text.lines().next().unwrap(), "team_code,total_minutes,pc1,pc2,pc3,pc4");
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn regress_recovers_exact_linear_win_pct() {
    let fx = Fixture::new(4);
    let (_, teams, _) = library_teams(&fx.season);
    let win = exact_win_pct(&teams);
    assert!(win.iter().all(|w| (0.0..=1.0).contains(w)), "fixture win pct out of range: {win:?}");
    std::fs::write(fx.path("win.csv"), common::win_pct_csv(&teams.team_codes, &win)).unwrap();

    assert!(fx.run(&["fit"]).status.success());
    let m = fx.path("membership.csv");
    let w = fx.path("win.csv");
    let out = fx.run(&["regress", "--membership", m.to_str().unwrap(), "--winpct", w.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("R-squared: 1.000"), "{stdout}");
    assert!(stdout.contains("PC 4 Score"));

    let json: serde_json::Value = serde_json::from_str(&fx.read("regression.json")).unwrap();
    let coef: Vec<f64> = json["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (got, want) in coef.iter().zip([0.35, -0.01, 0.17, -0.20, 0.09]) {
        assert!((got - want).abs() < 1e-10, "{coef:?}");
    }
}

#[test]
fn regress_without_win_pct_is_a_usage_error() {
    let fx = Fixture::new(4);
    assert!(fx.run(&["fit"]).status.success());
    assert_eq!(fx.run(&["regress"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let fx = Fixture::new(5);
    let mut snapshots: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
    for _ in 0..2 {
        let _ = std::fs::remove_dir_all(fx.path("out"));
        assert!(fx.run(&["fit"]).status.success());
        assert!(fx.run(&["scores"]).status.success());
        assert!(fx.run(&["teams"]).status.success());
        assert!(fx.run(&["similar", "--query", "p010"]).status.success());
        snapshots.push(read_dir(&fx.path("out")));
    }
    assert_eq!(snapshots[0].len(), 5);
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn cli_output_matches_library_pipeline() {
    let fx = Fixture::new(6);
    let (model, teams, scores_csv) = library_teams(&fx.season);
    assert!(fx.run(&["fit"]).status.success());
    assert_eq!(fx.read("model.json"), model.to_json_string().unwrap());
    assert!(fx.run(&["scores"]).status.success());
    assert_eq!(fx.read("scores.csv").as_bytes(), scores_csv.as_slice());

    let m = fx.path("membership.csv");
    assert!(fx.run(&["teams", "--membership", m.to_str().unwrap()]).status.success());
    let mut teams_csv = Vec::new();
    write_teams(&mut teams_csv, &teams, None, OutputFormat::Csv).unwrap();
    assert_eq!(fx.read("teams.csv").as_bytes(), teams_csv.as_slice());
}

#[test]
fn json_output_format() {
    let fx = Fixture::new(7);
    assert!(fx.run(&["fit", "--format", "json"]).status.success());
    let scree: serde_json::Value = serde_json::from_str(&fx.read("scree.json")).unwrap();
    assert_eq!(scree.as_array().unwrap().len(), 9);
    assert!(fx.run(&["scores", "--format", "json"]).status.success());
    let scores: serde_json::Value = serde_json::from_str(&fx.read("scores.json")).unwrap();
    assert_eq!(scores.as_array().unwrap().len(), 71);
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}
