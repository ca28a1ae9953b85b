use std::path::Path;

use switchcost_core::io::read_json;
use switchcost_core::sweep::*;

fn committed_grid() -> GridSpec {
    read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/default_grid.json")).unwrap()
}

#[test]
fn committed_grid_file_is_the_standard_grid() {
    assert_eq!(committed_grid(), GridSpec::standard());
}

#[test]
fn standard_sweep_accounts_for_every_point() {
    let recs = run_sweep(&GridSpec::standard()).unwrap();
    assert_eq!(recs.len(), 4455);
    let summary = summarize(&recs);
    assert_eq!(summary.solved + summary.failed, summary.total);
    assert!(summary.max_candidates <= 6);
    let points = GridSpec::standard().points();
    for (r, p) in recs.iter().zip(&points) {
        assert_eq!(r.params(), *p);
    }
}

#[test]
fn exports_are_deterministic_across_runs_and_workers() {
    let g = GridSpec::standard();
    let a = records_to_csv(&run_sweep_with_workers(&g, 1).unwrap()).unwrap();
    let b = records_to_csv(&run_sweep_with_workers(&g, 4).unwrap()).unwrap();
    let c = records_to_csv(&run_sweep(&g).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.lines().count(), 4456);
}

#[test]
fn standard_sweep_round_trips_through_files() {
    let recs = run_sweep(&GridSpec::standard()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (fmt, name) in [(ExportFormat::Csv, "sweep.csv"), (ExportFormat::Json, "sweep.json")] {
        let path = dir.path().join(name);
        export(&recs, fmt, &path).unwrap();
        assert_eq!(import(fmt, &path).unwrap(), recs);
    }
}

#[test]
fn persisted_witnesses_reproduce() {
    let fixtures: Vec<SClassification> =
        read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/s_effect_witnesses.json")).unwrap();
    assert_eq!(fixtures.len(), 2);
    let classes = classify_effect_of_s(&run_sweep(&GridSpec::standard()).unwrap());
    for fx in &fixtures {
        let got = classes.iter().find(|c| c.combo == fx.combo).expect("combo in grid");
        assert_eq!(got.effect, fx.effect);
        assert_eq!(got.markups.len(), fx.markups.len());
        for (a, b) in got.markups.iter().zip(&fx.markups) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-9, "{:?}: {} vs {}", fx.combo, a.1, b.1);
        }
    }
    let labels: Vec<_> = fixtures.iter().map(|f| f.effect.label()).collect();
    assert_eq!(labels, ["increasing", "decreasing"]);
}
