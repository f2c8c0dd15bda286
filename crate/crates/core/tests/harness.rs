use std::fs;

use approx::assert_relative_eq;
use tempfile::tempdir;
use vicinal::harness::{
    load_config, parse_config, read_series_csv, run_experiment, write_series, write_snapshot,
    ExperimentKind, OutputFormat, SERIES_COLUMNS,
};
use vicinal::Error;

fn sine_config(out: &std::path::Path, extra: &str) -> String {
    format!(
        r#"{{"kind": "run", "initial": {{"sine_cubed": {{"A": 0.1, "M": 1.0}}}}, "n": 32,
            "epsilon": 1e-3, "t_end": 2e-5, "out_dir": {:?}{extra}}}"#,
        out.display().to_string()
    )
}

#[test]
fn series_survives_a_csv_round_trip() {
    let dir = tempdir().unwrap();
    let art = run_experiment(&parse_config(&sine_config(dir.path(), "")).unwrap()).unwrap();
    let path = &art.series[0];
    let text = fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().next().unwrap(), SERIES_COLUMNS.join(","));

    let back = read_series_csv(path).unwrap();
    let again = dir.path().join("again.csv");
    write_series(&back, &again, OutputFormat::Csv).unwrap();
    assert_eq!(text, fs::read_to_string(&again).unwrap());
    assert_eq!(back.len(), 101);
    assert_relative_eq!(back[0].t, 0.0);
    assert_relative_eq!(back[100].t, 2e-5, max_relative = 1e-12);
}

#[test]
fn identical_configurations_give_identical_files() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    for cfg in [sine_config(a.path(), ""), sine_config(b.path(), "")] {
        run_experiment(&parse_config(&cfg).unwrap()).unwrap();
    }
    for f in ["series.csv", "snapshot_final.csv", "verdicts.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn seeded_step_trains_are_reproducible_and_seed_sensitive() {
    let run = |seed: u64| {
        let dir = tempdir().unwrap();
        let cfg = format!(
            r#"{{"kind": "run", "initial": {{"steps_uniform_perturbed": {{"N": 16, "amplitude": 0.4}}}},
                "seed": {seed}, "t_end": 1e-5, "out_dir": {:?}}}"#,
            dir.path().display().to_string()
        );
        let art = run_experiment(&parse_config(&cfg).unwrap()).unwrap();
        assert!(art.all_satisfied());
        fs::read_to_string(&art.series[0]).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn snapshot_header_and_rows() {
    let dir = tempdir().unwrap();
    let g = vicinal::grid::PeriodicGrid::unit(8).unwrap();
    let u = vicinal::grid::PeriodicField::constant(g, 1.0).unwrap();
    let p = write_snapshot(0.5, &u, 1e-3, dir.path().join("s.csv"), OutputFormat::Csv).unwrap();
    let text = fs::read_to_string(p).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# t=0.5 n=8 epsilon=0.001");
    assert_eq!(lines[1], "h,u");
    assert_eq!(lines[2], "0,1");
    assert_eq!(lines[3], "0.125,1");
    assert_eq!(lines.len(), 10);
}

#[test]
fn metadata_records_the_configuration() {
    let dir = tempdir().unwrap();
    let art =
        run_experiment(&parse_config(&sine_config(dir.path(), r#", "format": "json""#)).unwrap())
            .unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&art.metadata_path).unwrap()).unwrap();
    assert_eq!(meta["config"]["n"], 32);
    assert_eq!(meta["config"]["format"], "json");
    assert_eq!(meta["all_satisfied"], true);
    let series: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&art.series[0]).unwrap()).unwrap();
    assert!(series[0]["F_eps"].is_number());
}

#[test]
fn shipped_configurations_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
    let mut kinds = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let cfg = load_config(entry.unwrap().path()).unwrap();
        kinds.push(cfg.kind);
    }
    for k in [
        ExperimentKind::Run,
        ExperimentKind::EpsSweep,
        ExperimentKind::Longtime,
    ] {
        assert!(kinds.contains(&k));
    }
}

#[test]
fn config_errors_are_typed() {
    for text in [
        r#"{"kind": "run", "t_end": 1}"#,
        r#"{"kind": "run", "initial": "degenerate_sine"}"#,
        r#"{"kind": "run", "initial": "degenerate_sine", "t_end": 1, "n": 4}"#,
        r#"{"kind": "teleport", "initial": "degenerate_sine", "t_end": 1}"#,
    ] {
        assert!(
            matches!(parse_config(text), Err(Error::Config(_))),
            "{text}"
        );
    }
}
