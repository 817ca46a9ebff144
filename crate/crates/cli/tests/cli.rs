use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;
use translab::grid::Field;

fn translab(out: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_translab"));
    cmd.args(args).arg("--out").arg(out).env_remove("TRANSLAB_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("error record on stderr");
    serde_json::from_str(line).expect("error record is json")
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn only_run(out: &Path) -> PathBuf {
    let v = run_dirs(out);
    assert_eq!(v.len(), 1, "{v:?}");
    v.into_iter().next().unwrap()
}

/// Relative path to contents for every file under `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn spectrum_table_for_l4() {
    let tmp = tempfile::tempdir().unwrap();
    let o = translab(tmp.path(), &["spectrum", "--L", "4"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.split_whitespace().next() == Some("1")).expect("k=1 row");
    let cols: Vec<f64> = row.split_whitespace().map(|c| c.parse().unwrap()).collect();
    assert!((cols[1] - 1.650115).abs() < 1e-6 && (cols[2] - 0.187672).abs() < 1e-6, "{row}");

    let run = only_run(tmp.path());
    assert!(run.file_name().unwrap().to_str().unwrap().ends_with("-spectrum"));
    let csv = fs::read_to_string(run.join("tables/spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema: translab/spectrum/v1"));
    assert_eq!(lines.next(), Some("k,mu,sigma,lambda,eta,wavenumber,most_unstable"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert!((first[1].parse::<f64>().unwrap() - 1.650115).abs() < 1e-6);
    assert!(fs::read_to_string(run.join("tables/resolvent.csv"))
        .unwrap()
        .starts_with("# schema: translab/resolvent/v1"));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    assert_eq!(report["results"]["most_unstable"]["k"], 1);
    let field = Field::read_binary(fs::File::open(run.join("fields/seed_mode.bin")).unwrap()).unwrap();
    assert_eq!((field.grid.nx, field.grid.l), (512, 4.0));

    let config = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(config.contains("command = \"spectrum\"") && config.contains("L = 4.0"));
}

#[test]
fn spectrum_below_threshold_fails_with_record() {
    let tmp = tempfile::tempdir().unwrap();
    let o = translab(tmp.path(), &["spectrum", "--L", "2"], &[]);
    assert_eq!(o.status.code(), Some(1));
    let rec = error_record(&o);
    assert_eq!(rec["kind"], "NoUnstableMode");
    assert_eq!(rec["status"], "error");
    let run = only_run(tmp.path());
    let on_disk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("error.json")).unwrap()).unwrap();
    assert_eq!(on_disk, rec);
    assert!(run.join("config.toml").exists() && !run.join("report.json").exists());
}

#[test]
fn missing_l_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = translab(tmp.path(), &["spectrum"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["kind"], "ConfigError");
    assert_eq!(rec["field"], "L");
    assert!(run_dirs(tmp.path()).is_empty());
}

#[test]
fn file_settings_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "L = 3.0\n[grid]\nnx = 256\nx_half = 30.0\n").unwrap();
    let out = tmp.path().join("runs");
    let o = translab(&out, &["spectrum", "--config", cfg.to_str().unwrap(), "--L", "4", "--x-half", "40"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(only_run(&out).join("config.toml")).unwrap();
    assert!(text.contains("L = 4.0"));
    assert!(text.contains("nx = 256"));
    assert!(text.contains("x_half = 40.0"));
    assert!(text.contains("ny = 16"));
}

#[test]
fn emitted_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let o = translab(&a, &["sweep", "--equation", "nls", "--nx", "256", "--deltas", "1e-3,1e-4"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = only_run(&a);
    // Same parent directory so the emitted `output.dir` matches.
    let o = translab(&a, &["sweep", "--config", first.join("config.toml").to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = run_dirs(&a);
    assert_eq!(runs.len(), 2);
    assert_eq!(tree(&runs[0]), tree(&runs[1]));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["sweep", "--equation", "nls", "--nx", "256", "--deltas", "1e-3,3e-4,1e-4"];
    // One parent directory: `output.dir` is part of the emitted config.
    let out = tmp.path().join("sweep");
    for workers in ["1", "4", "4"] {
        let o = translab(&out, &args, &[("TRANSLAB_WORKERS", workers)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let trees: Vec<_> = run_dirs(&out).iter().map(|d| tree(d)).collect();
    assert_eq!(trees.len(), 3);
    assert!(trees[0].keys().any(|k| k.ends_with("escape_times.csv")));
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[1], trees[2]);

    let out = tmp.path().join("evolve");
    for _ in 0..2 {
        let o = translab(&out, &["evolve", "--t-max", "1", "--snapshot-stride", "2"], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let evolve: Vec<_> = run_dirs(&out).iter().map(|d| tree(d)).collect();
    assert!(evolve[0].keys().any(|k| k.starts_with("fields/snapshot_0000.bin")));
    assert_eq!(evolve[0], evolve[1]);
}

#[test]
fn bad_worker_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = translab(tmp.path(), &["spectrum", "--L", "4"], &[("TRANSLAB_WORKERS", "0")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["field"], "TRANSLAB_WORKERS");
}

#[test]
fn evolve_writes_diagnostics_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let o = translab(
        tmp.path(),
        &["evolve", "--equation", "nls", "--nx", "256", "--ny", "8", "--t-max", "0.5", "--snapshot-stride", "2"],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = only_run(tmp.path());
    let csv = fs::read_to_string(run.join("tables/diagnostics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# schema: translab/diagnostics/v1");
    assert_eq!(lines[1], "t,l2,integral,mass,hamiltonian,orbital_distance,sup");
    // Samples at t = 0, 0.1, ..., 0.5 with the default stride of 10 steps.
    assert_eq!(lines.len(), 2 + 6);
    let mass: Vec<f64> = lines[2..].iter().map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(mass.iter().all(|m| (m / mass[0] - 1.0).abs() < 1e-10));
    let snaps = fs::read_dir(run.join("fields")).unwrap().count();
    assert_eq!(snaps, 3 + 1);
    let last = Field::read_binary(fs::File::open(run.join("fields/final.bin")).unwrap()).unwrap();
    assert_eq!((last.grid.nx, last.grid.ny), (256, 8));
}

#[test]
fn expand_and_instability_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let o = translab(tmp.path(), &["expand", "--equation", "nls", "--nx", "256", "--M", "1", "--t-max", "3"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = only_run(tmp.path());
    let csv = fs::read_to_string(run.join("tables/iterate_modes.csv")).unwrap();
    assert!(csv.starts_with("# schema: translab/iterate_modes/v1\nk,mode,t,norm\n"));
    let modes: std::collections::BTreeSet<(String, String)> = csv
        .lines()
        .skip(2)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[1].to_string())
        })
        .collect();
    let expected: std::collections::BTreeSet<(String, String)> =
        [("0", "-1"), ("0", "1"), ("1", "-2"), ("1", "0"), ("1", "2")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
    assert_eq!(modes, expected);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let growth = report["results"]["growth"].as_array().unwrap();
    assert_eq!(growth.len(), 2);
    for g in growth {
        let (s, e) = (g["slope"].as_f64().unwrap(), g["expected"].as_f64().unwrap());
        assert!((s / e - 1.0).abs() < 0.03, "{g}");
    }
    assert!(run.join("fields/assembled_final.bin").exists());

    let out = tmp.path().join("inst");
    let o = translab(&out, &["instability", "--equation", "nls", "--nx", "256", "--delta", "1e-3"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = only_run(&out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let r = &report["results"];
    assert_eq!(r["escaped"], true);
    let t = r["t_escape"].as_f64().unwrap();
    let csv = fs::read_to_string(run.join("tables/distance.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert!(last[0] >= t && last[1] >= r["eta"].as_f64().unwrap());
    assert!(!run.join("tables/remainder.csv").exists());
}

#[test]
fn verify_quick_is_fast_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = translab(tmp.path(), &["verify", "--quick"], &[]);
    assert!(start.elapsed().as_secs() < 60);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 4);
    assert!(text.contains("4 of 4 criteria passed"));
    let csv = fs::read_to_string(only_run(tmp.path()).join("tables/acceptance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 4);
}
