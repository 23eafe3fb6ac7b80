//! Subcommands end to end on small synthetic runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use monsoon::{cmd_analyze, cmd_evaluate, cmd_fit, cmd_simulate, cmd_synth, RunConfig};

fn small(dir: &Path) -> RunConfig {
    RunConfig {
        out_dir: dir.to_path_buf(),
        synth_rows: 4,
        synth_cols: 4,
        synth_years: 2,
        synth_patterns: 3,
        max_clusters_u: 3,
        max_clusters_v: 4,
        n_sweeps: 20,
        burn_in: 4,
        prominence: "1".into(),
        sim_seasons: 3,
        seed: 5,
        ..RunConfig::default()
    }
}

/// Data lines of a stamped CSV (stamp and header removed).
fn data_lines(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config-sha256="));
    lines.skip(1).map(str::to_string).collect()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    out.sort();
    out.into_iter().map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap())).collect()
}

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_monsoon")).args(args).output().unwrap()
}

#[test]
fn synth_writes_every_location_day_and_repeats_exactly() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let summary = cmd_synth(&small(a.path())).unwrap();
    cmd_synth(&small(b.path())).unwrap();
    assert_eq!(data_lines(&a.path().join("rainfall.csv")).len(), 16 * 244);
    assert_eq!(summary.files.len(), 3);
    assert_eq!(files(a.path()), files(b.path()));
}

#[test]
fn bad_flip_noise_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "synth_flip_noise = 0.6\n").unwrap();
    let out = bin(&["synth", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("flip"));
}

#[test]
fn fit_outputs_are_reproducible_and_trace_every_sweep() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let cfg = small(dir.path());
        cmd_synth(&cfg).unwrap();
        cmd_fit(&cfg).unwrap();
    }
    assert_eq!(files(a.path()), files(b.path()));
    let sweeps: Vec<usize> =
        data_lines(&a.path().join("diagnostics.csv")).iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(sweeps, (1..=20).collect::<Vec<_>>());
}

#[test]
fn stamp_is_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let summary = cmd_synth(&cfg).unwrap();
    for f in summary.files {
        let first = fs::read_to_string(f).unwrap().lines().next().unwrap().to_string();
        assert_eq!(first, format!("# config-sha256={}", cfg.hash()));
    }
}

#[test]
fn missing_geometry_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(bin(&["synth", "--out", d]).status.success());
    fs::remove_file(dir.path().join("geometry.csv")).unwrap();
    let out = bin(&["fit", "--out", d]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry"));
}

#[test]
fn analyze_requires_fit_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_synth(&cfg).unwrap();
    let err = cmd_analyze(&cfg).unwrap_err();
    assert!(format!("{err:#}").contains("state_z.csv"));
}

#[test]
fn analyze_emits_stochastic_rows_and_disjoint_spells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_synth(&cfg).unwrap();
    cmd_fit(&cfg).unwrap();
    cmd_analyze(&cfg).unwrap();
    for row in data_lines(&dir.path().join("transitions.csv")) {
        let sum: f64 = row.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12, "{row}");
    }
    for row in data_lines(&dir.path().join("active_break_days.csv")) {
        let f: Vec<&str> = row.split(',').collect();
        assert!(!(f[2] == "1" && f[3] == "1") && !(f[4] == "1" && f[5] == "1"), "{row}");
    }
    let report = fs::read_to_string(dir.path().join("spell_comparison.txt")).unwrap();
    for key in ["act_0_days=", "act_1_days=", "act_intersection=", "brk_intersection="] {
        assert!(report.contains(key), "missing {key}");
    }
}

#[test]
fn evaluate_reports_every_method_on_both_axes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_synth(&cfg).unwrap();
    cmd_fit(&cfg).unwrap();
    cmd_evaluate(&cfg).unwrap();
    let rows = data_lines(&dir.path().join("evaluation.csv"));
    assert_eq!(rows.len(), 8);
    for axis in ["days", "locations"] {
        for method in ["mrf", "kmeans", "spect_euclid", "spect_hamming"] {
            let row = rows.iter().find(|r| r.starts_with(&format!("{axis},{method},"))).unwrap();
            let ari = row.rsplit(',').next().unwrap();
            assert!(ari.parse::<f64>().is_ok(), "{row}");
        }
    }
}

fn write_model(dir: &Path, matrix: &str) -> RunConfig {
    fs::write(dir.join("transitions.csv"), format!("from,1,2\n{matrix}")).unwrap();
    let mut patterns = String::from("label,location_id,crp_value,cdp_value\n");
    for (label, values) in [(1, [1.0, 2.0]), (2, [10.0, 30.0])] {
        for (s, v) in values.iter().enumerate() {
            patterns.push_str(&format!("{label},{s},{v},1\n"));
        }
    }
    fs::write(dir.join("patterns.csv"), patterns).unwrap();
    RunConfig { out_dir: dir.join("sim"), transitions: Some(dir.join("transitions.csv")), patterns: Some(dir.join("patterns.csv")), ..RunConfig::default() }
}

#[test]
fn identity_matrix_gives_constant_seasons_of_default_length() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_model(dir.path(), "1,1,0\n2,0,1\n");
    cmd_simulate(&cfg).unwrap();
    let rows = data_lines(&cfg.out_dir.join("simulated_days.csv"));
    assert_eq!(rows.len(), 10 * 122);
    for season in rows.chunks(122) {
        let labels: Vec<&str> = season.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
        assert!(labels.iter().all(|l| *l == labels[0]));
        assert_eq!(season.last().unwrap().split(',').nth(1), Some("122"));
    }
    let first = files(&cfg.out_dir);
    cmd_simulate(&cfg).unwrap();
    assert_eq!(first, files(&cfg.out_dir));
}

#[test]
fn non_stochastic_matrix_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_model(dir.path(), "1,0.7,0.2\n2,0.5,0.5\n");
    let err = cmd_simulate(&cfg).unwrap_err();
    assert!(format!("{err:#}").contains("transitions.csv"), "{err:#}");
}

#[test]
fn config_paths_resolve_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "out_dir = \"o\"\ndata = \"o/rainfall.csv\"\nseed = 3\n").unwrap();
    let loaded = RunConfig::load(&cfg).unwrap();
    assert_eq!(loaded.out_dir, dir.path().join("o"));
    assert_eq!(loaded.data, Some(dir.path().join("o/rainfall.csv")));
    let out = bin(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/truth.csv").is_file());
}
