use std::fs;
use std::path::Path;
use std::process::Command;

use tdeuler::euler::{self, Amplitude, BumpShape};
use tdeuler::grid::Grid;
use tdeuler::params::GasLaw;
use tdeuler_lab::config::{parse_override, ScenarioConfig, SnapshotFormat};
use tdeuler_lab::{io, run_scenario, LabError, RayonMap};

fn sets(items: &[&str]) -> Vec<(String, toml::Value)> {
    items.iter().map(|s| parse_override(s).unwrap()).collect()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdeuler"))
}

#[test]
fn file_values_sit_between_preset_and_overrides() {
    let text = r#"
        scenario = "mass-conservation"
        [damping]
        lambda = 0.3
        [solver]
        t_final = 50.0
    "#;
    let cfg = ScenarioConfig::from_toml_str(text, &sets(&["solver.t_final=20", "data.eps=2e-3"])).unwrap();
    assert_eq!(cfg.damping.lambda, 0.3);
    assert_eq!(cfg.damping.mu, 1.0);
    assert_eq!(cfg.solver.t_final, 20.0);
    assert_eq!(cfg.data.eps, 2e-3);
    assert_eq!(cfg.data.q0, Some(0.01));
    assert_eq!(cfg.grid.points, Some(512));
}

#[test]
fn bad_configs_are_rejected_with_the_field_named() {
    let err = ScenarioConfig::load("no-such-scenario", &[]).unwrap_err();
    assert!(matches!(err, LabError::UnknownScenario(_)));
    let err = ScenarioConfig::load("nonlinear-decay", &sets(&["damping.lambda=1.5"])).unwrap_err();
    assert!(err.to_string().contains("lambda"), "{err}");
    let err = ScenarioConfig::load("nonlinear-decay", &sets(&["grid.points=1000"])).unwrap_err();
    assert!(err.to_string().contains("grid.points"), "{err}");
    let err = ScenarioConfig::load("convolution-lemma", &sets(&["diagnostics=[\"mass-drift\"]"])).unwrap_err();
    assert!(matches!(err, LabError::Diagnostic { .. }), "{err}");
    assert!(parse_override("no-equals-sign").is_err());
}

#[test]
fn run_name_tracks_config_but_not_output_dir() {
    let a = ScenarioConfig::load("q-decay", &[]).unwrap();
    let b = ScenarioConfig::load("q-decay", &sets(&["output.dir=\"elsewhere\""])).unwrap();
    let c = ScenarioConfig::load("q-decay", &sets(&["data.eps=2e-3"])).unwrap();
    assert_eq!(a.run_name(), b.run_name());
    assert_ne!(a.run_name(), c.run_name());
    assert!(a.run_name().starts_with("q-decay-"));
}

#[test]
fn empty_selection_yields_no_verdicts_and_success() {
    let cfg = ScenarioConfig::load("nonlinear-decay", &sets(&["diagnostics=[]"])).unwrap();
    let out = run_scenario(&cfg, &RayonMap).unwrap();
    assert!(out.report.verdicts.is_empty());
    assert!(out.report.passed());

    let dir = tempfile::tempdir().unwrap();
    let status =
        bin().args(["run", "lower-bound", "--set", "diagnostics=[]", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn reports_round_trip_and_rerender() {
    let cfg = ScenarioConfig::load("convolution-lemma", &[]).unwrap();
    let mut out = run_scenario(&cfg, &RayonMap).unwrap();
    let root = tempfile::tempdir().unwrap();
    let dir = io::persist(root.path(), &mut out).unwrap();
    let loaded = io::load_report(&dir).unwrap();
    assert_eq!(loaded, out.report);
    for f in &loaded.files {
        assert!(dir.join(f).is_file(), "manifest lists missing file {f}");
    }
    let before = fs::read_to_string(dir.join("summary.txt")).unwrap();
    fs::remove_file(dir.join("summary.txt")).unwrap();
    let (_, text) = io::rerender(&dir).unwrap();
    assert_eq!(text, before);
    let echoed = fs::read_to_string(dir.join("config.toml")).unwrap();
    assert_eq!(ScenarioConfig::from_toml_str(&echoed, &[]).unwrap(), cfg);
}

fn run_into(root: &Path, args: &[&str]) -> std::process::Output {
    bin().arg("run").args(args).arg("--out").arg(root).output().unwrap()
}

#[test]
fn repeated_runs_write_identical_reports() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["mass-conservation", "--set", "solver.t_final=20", "--set", "fit.window=[2,20]"];
    let (oa, ob) = (run_into(a.path(), &args), run_into(b.path(), &args));
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    let name = ScenarioConfig::load("mass-conservation", &sets(&args[1..].chunks(2).map(|c| c[1]).collect::<Vec<_>>()))
        .unwrap()
        .run_name();
    for file in ["report.json", "energy.csv", "summary.txt"] {
        let x = fs::read(a.path().join(&name).join(file)).unwrap();
        let y = fs::read(b.path().join(&name).join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn exit_codes_follow_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let failing = run_into(dir.path(), &["zone-integrals", "--set", "diagnostics=[\"zone-integral-a0\"]"]);
    assert_eq!(failing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&failing.stdout).contains("FAIL  zone-integral-a0"));
    let error = run_into(dir.path(), &["zone-integrals", "--set", "damping.mu=-1"]);
    assert_eq!(error.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&error.stderr).starts_with("error:"));
    let listed = bin().arg("list-presets").output().unwrap();
    assert_eq!(listed.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&listed.stdout).lines().count(), 13);
    let shown = bin().args(["show-preset", "vorticity-2d"]).output().unwrap();
    let cfg = ScenarioConfig::from_toml_str(&String::from_utf8_lossy(&shown.stdout), &[]).unwrap();
    assert_eq!(cfg.n, 2);
}

#[test]
fn sweep_records_failures_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "convolution-lemma", "--axis", "mu=1,-1,2", "--jobs", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "mu");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][0], "1");
    assert_eq!(&rows[0][2], "pass");
    assert!(rows[1][2].starts_with("error"));
    assert_eq!(&rows[2][0], "2");
    assert_eq!(&rows[2][2], "pass");
}

#[test]
fn binary_snapshots_round_trip() {
    let grid = Grid::new(2, 8.0, 16).unwrap();
    let gas = GasLaw::new(2.0).unwrap();
    let shape = BumpShape { swirl: 1.0, ..BumpShape::default() };
    let mut s = euler::initial_bump(3.0, Amplitude::Sobolev { eps: 1e-2, order: 2 }, &shape, &grid, &gas).unwrap();
    s.t = 2.5;
    let bytes = io::snapshot_binary(&s, &grid);
    assert_eq!(&bytes[..8], io::SNAPSHOT_MAGIC);
    let (g2, back) = io::read_snapshot_binary(bytes.as_slice()).unwrap();
    assert_eq!((g2.dim(), g2.points(), g2.half_length()), (grid.dim(), grid.points(), grid.half_length()));
    assert_eq!(back, s);
    assert!(io::read_snapshot_binary(&bytes[..bytes.len() - 1]).is_err());

    let csv_bytes = io::snapshot_csv(&s, &grid).unwrap();
    let text = String::from_utf8(csv_bytes).unwrap();
    assert_eq!(text.lines().next(), Some("x0,x1,v,u0,u1"));
    assert_eq!(text.lines().count(), 1 + grid.len());
}

#[test]
fn persisted_snapshots_follow_the_configured_format() {
    let cfg = ScenarioConfig::load(
        "mass-conservation",
        &sets(&["solver.t_final=20", "fit.window=[2,20]", "output.snapshots=\"csv\"", "output.snapshot_count=3"]),
    )
    .unwrap();
    assert_eq!(cfg.output.snapshots, SnapshotFormat::Csv);
    let mut out = run_scenario(&cfg, &RayonMap).unwrap();
    let root = tempfile::tempdir().unwrap();
    let dir = io::persist(root.path(), &mut out).unwrap();
    let snaps: Vec<&String> = out.report.files.iter().filter(|f| f.starts_with("snapshots/")).collect();
    assert_eq!(snaps.len(), 3);
    assert!(snaps.iter().all(|f| f.ends_with(".csv") && dir.join(f).is_file()));
}
