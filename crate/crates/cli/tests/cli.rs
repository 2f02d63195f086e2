use std::path::{Path, PathBuf};
use std::process::Command;

use clustervol::{find_scenario, first_difference, simulate_panel, ClusterTest, Panel};
use clustervol_cli::report::{estimate_with_interval, ClusterRow, ClusterTable, SeriesRow};
use clustervol_cli::{load_panel_csv, render_report, save_panel_csv, ClusterMap, Format, InputError, Report};
use ndarray::array;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clustervol"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn simulated(dir: &TempDir, id: &str, seed: u64) -> (PathBuf, PathBuf, Panel) {
    let mut cfg = find_scenario(id).unwrap();
    cfg.seed = seed;
    let sim = simulate_panel(&cfg).unwrap();
    let panel = dir.path().join("panel.csv");
    let map = dir.path().join("map.csv");
    save_panel_csv(&sim.panel, &panel).unwrap();
    ClusterMap::from_panel(&sim.panel).write(&map).unwrap();
    (panel, map, sim.panel)
}

#[test]
fn loads_small_wide_csv() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "p.csv", "time,a,b\n1,1.0,2.0\n2,1.5,2.5\n3,0.5,3.0\n4,1.0,2.0\n");
    let panel = load_panel_csv(&path, None).unwrap();
    assert_eq!((panel.n_series(), panel.n_times()), (2, 4));
    assert_eq!(panel.series_ids(), ["a", "b"]);
    assert_eq!(panel.values()[[1, 2]], 3.0);
}

#[test]
fn missing_cell_names_the_row() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "p.csv", "time,a,b\n1,1.0,2.0\n2,,2.5\n3,0.5,3.0\n4,1.0,2.0\n");
    let err = load_panel_csv(&path, None).unwrap_err();
    match &err {
        InputError::Row { row, .. } => assert_eq!(*row, 3),
        other => panic!("unexpected error {other:?}"),
    }
    assert!(err.to_string().contains("row 3"), "{err}");
}

#[test]
fn ragged_and_unparsable_rows_are_rejected() {
    let dir = TempDir::new().unwrap();
    let ragged = write(&dir, "r.csv", "time,a,b\n1,1.0,2.0\n2,1.5\n3,0.5,3.0\n4,1.0,2.0\n");
    assert!(matches!(
        load_panel_csv(&ragged, None),
        Err(InputError::Row { row: 3, .. })
    ));
    let text = write(&dir, "t.csv", "time,a,b\n1,1.0,2.0\n2,x,2.5\n3,0.5,3.0\n4,1.0,2.0\n");
    assert!(matches!(
        load_panel_csv(&text, None),
        Err(InputError::Row { row: 3, .. })
    ));
}

#[test]
fn cluster_map_must_cover_every_series_once() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "p.csv", "time,a,b\n1,1,2\n2,1.5,2.5\n3,0.5,3\n4,1,2\n");
    let ok = ClusterMap::parse_inline("a=EU,b=US").unwrap();
    let panel = load_panel_csv(&path, Some(&ok)).unwrap();
    assert_eq!(panel.cluster_names(), ["EU", "US"]);
    assert_eq!(panel.cluster_of(), [0, 1]);

    let missing = ClusterMap::parse_inline("a=EU").unwrap();
    assert!(matches!(load_panel_csv(&path, Some(&missing)), Err(InputError::Unassigned(s)) if s == "b"));
    let unknown = ClusterMap::parse_inline("a=EU,b=US,c=US").unwrap();
    assert!(matches!(load_panel_csv(&path, Some(&unknown)), Err(InputError::UnknownSeries(s)) if s == "c"));
    assert!(matches!(
        ClusterMap::parse_inline("a=EU,a=US"),
        Err(InputError::Duplicate(_))
    ));

    let file = write(&dir, "m.csv", "series_id,cluster_id\nb,2\na,1\n");
    let panel = load_panel_csv(&path, Some(&ClusterMap::from_arg(file.to_str().unwrap()).unwrap())).unwrap();
    assert_eq!(panel.cluster_names(), ["2", "1"]);
    assert_eq!(panel.cluster_of(), [1, 0]);
}

#[test]
fn save_then_load_is_identity() {
    let dir = TempDir::new().unwrap();
    let (panel_path, map_path, panel) = simulated(&dir, "5c-3vol/phi=0.95/vol", 9);
    let map = ClusterMap::read(&map_path).unwrap();
    let back = load_panel_csv(&panel_path, Some(&map)).unwrap();
    assert_eq!(back, panel);

    let tiny = Panel::single_cluster(array![[1.0, -2.5, 1e-300, 3.25], [0.1, 0.2, 0.3, 1e10]]).unwrap();
    let path = dir.path().join("tiny.csv");
    save_panel_csv(&tiny, &path).unwrap();
    assert_eq!(load_panel_csv(&path, None).unwrap().values(), tiny.values());
}

fn regional_rows() -> ClusterTable {
    ClusterTable {
        phi_hat: 0.1,
        alpha: 0.05,
        corrected_level: 0.025,
        replicates: 200,
        failed_replicates: 0,
        clusters: vec![
            ClusterRow {
                cluster: "Europe".into(),
                size: 19,
                alpha0: 1.0,
                alpha1: 2.98,
                ci_lower: 0.4245,
                ci_upper: 3.4143,
                reject: true,
            },
            ClusterRow {
                cluster: "US".into(),
                size: 11,
                alpha0: 1.0,
                alpha1: -0.021,
                ci_lower: -0.1476,
                ci_upper: 0.1731,
                reject: false,
            },
        ],
    }
}

#[test]
fn cluster_table_rows() {
    assert_eq!(
        estimate_with_interval(-0.021, -0.1476, 0.1731),
        "-0.021 (-0.1476, 0.1731)"
    );
    let text = render_report(&Report::Test(regional_rows()), Format::Human).unwrap();
    assert!(text.contains("corrected level 0.025"), "{text}");
    let us = text.lines().find(|l| l.starts_with("US")).unwrap();
    assert!(us.contains("-0.021 (-0.1476, 0.1731)"), "{us}");
    assert!(!us.contains("reject"), "{us}");
    let eu = text.lines().find(|l| l.starts_with("Europe")).unwrap();
    assert!(eu.ends_with("reject"), "{eu}");
}

#[test]
fn bootstrap_result_reports_corrected_level() {
    let dir = TempDir::new().unwrap();
    let (panel_path, _, _) = simulated(&dir, "single/phi=0.6/novol", 4);
    let panel = load_panel_csv(
        &panel_path,
        Some(
            &ClusterMap::parse_inline(
                &(1..=50)
                    .map(|i| format!("s{i}={}", if i <= 25 { "A" } else { "B" }))
                    .collect::<Vec<_>>()
                    .join(","),
            )
            .unwrap(),
        ),
    )
    .unwrap();
    let result = clustervol::bootstrap_test(
        &panel,
        &clustervol::BackfitOptions {
            resamples: 50,
            ..Default::default()
        },
        &clustervol::TestOptions {
            replicates: 40,
            ..Default::default()
        },
    )
    .unwrap();
    let table = ClusterTable::from(&result);
    assert_eq!(table.corrected_level, 0.025);
    assert_eq!(table.clusters.len(), 2);
    let first: &ClusterTest = &result.clusters[0];
    assert_eq!(table.clusters[0].ci_lower, first.ci_lower);
}

#[test]
fn json_round_trips() {
    let reports = [
        Report::Test(regional_rows()),
        Report::Baseline(vec![SeriesRow {
            series: "s1".into(),
            cluster: "1".into(),
            ar_phi: Some(1.0123),
            nonstationary: true,
            alpha0: Some(0.3),
            alpha1: Some(0.1 + 0.2),
            lr_statistic: Some(0.5),
            p_value: Some(0.47950012218695337),
            reject: false,
            error: None,
        }]),
    ];
    for report in reports {
        let text = render_report(&report, Format::Json).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }
}

#[test]
fn univariate_table_marks_nonstationary() {
    let row = |phi: f64, nonstationary| SeriesRow {
        series: "s".into(),
        cluster: "c".into(),
        ar_phi: Some(phi),
        nonstationary,
        alpha0: Some(1.0),
        alpha1: Some(0.0),
        lr_statistic: Some(0.0),
        p_value: Some(1.0),
        reject: false,
        error: None,
    };
    let text = render_report(
        &Report::Baseline(vec![row(1.002, true), row(0.937, false)]),
        Format::Human,
    )
    .unwrap();
    assert!(text.contains("1.002 nonstationary"), "{text}");
    assert!(!text
        .lines()
        .find(|l| l.contains("0.937"))
        .unwrap()
        .contains("nonstationary"));
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn diff_flag_commutes_with_predifferenced_input() {
    let dir = TempDir::new().unwrap();
    let (panel_path, map_path, panel) = simulated(&dir, "5c-1vol/phi=0.6/vol", 2);
    let diffed = dir.path().join("diffed.csv");
    let (code, _, err) = run(&["diff", s(&panel_path), "--out", s(&diffed)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        load_panel_csv(&diffed, None).unwrap().values(),
        first_difference(&panel).unwrap().values()
    );

    let common = ["--boot", "30", "--resamples", "30", "--seed", "5", "--format", "json"];
    let mut a = vec!["test", s(&panel_path), "--clusters", s(&map_path), "--diff"];
    a.extend(common);
    let mut b = vec!["test", s(&diffed), "--clusters", s(&map_path)];
    b.extend(common);
    let (ca, out_a, err_a) = run(&a);
    let (cb, out_b, _) = run(&b);
    assert_eq!((ca, cb), (0, 0), "{err_a}");
    assert_eq!(out_a, out_b);
}

#[test]
fn seeded_commands_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let (panel_path, map_path, _) = simulated(&dir, "5c-1vol/phi=0.6/vol", 8);
    let args = [
        "test",
        s(&panel_path),
        "--clusters",
        s(&map_path),
        "--boot",
        "25",
        "--resamples",
        "25",
        "--seed",
        "3",
    ];
    let first = run(&args);
    assert_eq!(first.0, 0, "{}", first.2);
    assert_eq!(first, run(&args));

    let sim = |seed: &str| run(&["simulate", "--scenario", "single/phi=0.6/vol", "--seed", seed]).1;
    assert_eq!(sim("4"), sim("4"));
    assert_ne!(sim("4"), sim("5"));
}

#[test]
fn subcommands_emit_each_format() {
    let dir = TempDir::new().unwrap();
    let (panel_path, map_path, _) = simulated(&dir, "5c-1vol/phi=0.6/vol", 1);
    for format in ["human", "csv", "json"] {
        for cmd in ["fit", "baseline"] {
            let (code, out, err) = run(&[cmd, s(&panel_path), "--clusters", s(&map_path), "--format", format]);
            assert_eq!(code, 0, "{cmd} {format}: {err}");
            assert!(!out.is_empty());
        }
    }
    let (code, out, _) = run(&["baseline", s(&panel_path), "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 51);

    let report = dir.path().join("bench.json");
    let (code, _, err) = run(&[
        "bench",
        "--scenario",
        "single/phi=0.6/novol",
        "--reps",
        "2",
        "--boot",
        "20",
        "--resamples",
        "20",
        "--format",
        "json",
        "--out",
        s(&report),
    ]);
    assert_eq!(code, 0, "{err}");
    let back: Report = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(matches!(back, Report::SizePower(rows) if rows.len() == 1));
}

#[test]
fn simulate_accepts_config_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "s.toml",
        r#"
id = "custom"
n_series = 6
n_times = 30
phi = 0.5
cluster_sizes = [3, 3]
arch_per_cluster = [{ alpha0 = 1.0, alpha1 = 0.5 }, { alpha0 = 1.0, alpha1 = 0.0 }]
seed = 12
"#,
    );
    let out = dir.path().join("p.csv");
    let map = dir.path().join("m.csv");
    let (code, _, err) = run(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--clusters-out",
        s(&map),
    ]);
    assert_eq!(code, 0, "{err}");
    let panel = load_panel_csv(&out, Some(&ClusterMap::read(&map).unwrap())).unwrap();
    assert_eq!((panel.n_series(), panel.n_times(), panel.n_clusters()), (6, 30, 2));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["fit", "does-not-exist.csv"]).0, 2);
    let bad = write(&dir, "bad.csv", "time,a\n1,1\n2,\n3,1\n4,1\n");
    assert_eq!(run(&["fit", s(&bad)]).0, 2);
    let good = write(&dir, "g.csv", "time,a,b\n1,1,2\n2,1.5,2.5\n3,0.5,3\n4,1,2\n5,2,1\n");
    assert_eq!(run(&["test", s(&good), "--alpha", "1.5"]).0, 2);
    assert_eq!(run(&["test", s(&good), "--clusters", "a=1"]).0, 2);
    assert_eq!(run(&["bench", "--scenario", "no-such-scenario"]).0, 2);

    // Constant series leave no usable AR regressor anywhere in the panel.
    let flat = write(&dir, "flat.csv", "time,a,b\n1,1,2\n2,1,2\n3,1,2\n4,1,2\n5,1,2\n");
    let (code, _, err) = run(&["fit", s(&flat)]);
    assert_eq!(code, 3, "{err}");
}
