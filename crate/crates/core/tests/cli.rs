mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use tsclust::io::{read_table, write_dataset};
use tsclust::Family;

fn tsclust(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tsclust")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_planted(dir: &Path, family: Family) -> String {
    let mut r = rng(42);
    let d = planted(&[-2.0, -2.0, -2.0, 2.0, 2.0, 2.0, 2.0], &[25; 7], &[1.0], family, 1.0, &mut r);
    let path = dir.join("data.csv");
    write_dataset(std::fs::File::create(&path).unwrap(), &d).unwrap();
    path.display().to_string()
}

#[test]
fn fit_writes_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_planted(dir.path(), Family::GaussianIdentity);
    let out = dir.path().join("out");
    let (code, stdout, stderr) = tsclust(&["fit", "--input", &input, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("2 clusters"), "{stdout}");

    let part = read_table(&out.join("partition.csv")).unwrap();
    assert_eq!(part.header, ["unit", "cluster"]);
    assert_eq!(part.rows.len(), 7);
    let clusters: Vec<&str> = part.rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(clusters, ["1", "1", "1", "2", "2", "2", "2"]);

    let summary = read_table(&out.join("summary.csv")).unwrap();
    assert_eq!(summary.header, ["item", "label", "value"]);
    let shared = summary.rows.iter().find(|r| r[0] == "shared").unwrap();
    assert_eq!(shared[1], "x1");
    assert!((shared[2].parse::<f64>().unwrap() - 1.0).abs() < 0.3);
    assert_eq!(summary.rows.iter().filter(|r| r[0] == "global_p").count(), 2);

    let path = read_table(&out.join("path.csv")).unwrap();
    assert_eq!(path.header, ["step", "unit", "intercept"]);
    assert_eq!(path.rows.len(), 14);
    let steps = read_table(&out.join("steps.csv")).unwrap();
    assert_eq!(steps.rows.len(), 2);
    assert_eq!(steps.rows[0][steps.column("accepted").unwrap()], "true");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_planted(dir.path(), Family::GaussianIdentity);
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("# options\nfamily=gaussian\nalpha=0.05\nmax_splits=0\ninput={input}\nout={}\n", out.display()),
    )
    .unwrap();
    let (code, stdout, _) = tsclust(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("1 clusters"), "{stdout}");
    let (code, stdout, _) = tsclust(&["fit", "--config", cfg.to_str().unwrap(), "--max-splits", "3"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("2 clusters"), "{stdout}");
}

#[test]
fn simulate_writes_cell_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let (code, stdout, stderr) = tsclust(&[
        "simulate", "--cell", "20,10,both,0.8,normal", "--reps", "3", "--seed", "5", "--threads", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("m0=10 TSC"));
    let table = read_table(&out.join("cell_table.csv")).unwrap();
    assert_eq!(table.header[0], "method");
    assert!(table.column("mse_intercepts_m0_5").is_some());
    assert!(table.column("n_clusters_m0_10").is_some());
    assert_eq!(table.rows.len(), 2);
    let raw = read_table(&out.join("raw_metrics.csv")).unwrap();
    assert_eq!(raw.rows.len(), 2 * 3 * 2);
    let spread = read_table(&out.join("cell_spread.csv")).unwrap();
    assert!(spread.column("p10").is_some() && spread.column("p90").is_some());
    let scenario = std::fs::read_to_string(out.join("scenario.txt")).unwrap();
    assert!(scenario.contains("rho=0.8"));

    // same seed, same numbers
    let out2 = dir.path().join("sim2");
    tsclust(&["simulate", "--cell", "20,10,both,0.8,normal", "--reps", "3", "--seed", "5", "--out", out2.to_str().unwrap()]);
    assert_eq!(
        std::fs::read_to_string(out.join("raw_metrics.csv")).unwrap(),
        std::fs::read_to_string(out2.join("raw_metrics.csv")).unwrap()
    );
}

#[test]
fn bootstrap_writes_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_planted(dir.path(), Family::GaussianIdentity);
    let out = dir.path().join("boot");
    let (code, _, stderr) = tsclust(&[
        "bootstrap", "--input", &input, "--bootstrap", "20", "--level", "0.9", "--seed", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let t = read_table(&out.join("intervals.csv")).unwrap();
    assert_eq!(t.header, ["parameter", "estimate", "lower", "upper"]);
    assert_eq!(t.rows[0][0], "x1");
    assert_eq!(t.rows.len(), 3);
    for row in &t.rows {
        let lo: f64 = row[2].parse().unwrap();
        let hi: f64 = row[3].parse().unwrap();
        assert!(lo <= hi);
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "unit,y\nA,1\nB,oops\n").unwrap();
    let (code, _, stderr) = tsclust(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 3"), "{stderr}");

    let nonbinary = dir.path().join("nb.csv");
    std::fs::write(&nonbinary, "unit,y\nA,1\nB,0.5\n").unwrap();
    assert_eq!(tsclust(&["fit", "--family", "binomial", "--input", nonbinary.to_str().unwrap()]).0, 2);

    let input = write_planted(dir.path(), Family::GaussianIdentity);
    assert_eq!(tsclust(&["bootstrap", "--input", &input, "--bootstrap", "1"]).0, 2);
    assert_eq!(tsclust(&["fit", "--input", &input, "--family", "poisson"]).0, 2);
    assert_eq!(tsclust(&["fit", "--input", &input, "--alpha", "1.5"]).0, 2);
    assert_eq!(tsclust(&["simulate", "--cell", "4,10,5,0,normal"]).0, 2);
    assert_eq!(tsclust(&["fit"]).0, 2);
    assert_eq!(tsclust(&["--help"]).0, 0);

    // A unit with only zeros separates; without a fallback ridge the full
    // model cannot be fitted.
    let sep = dir.path().join("sep.csv");
    let mut text = String::from("unit,y\n");
    for (u, ys) in [("a", [0, 0, 0, 0]), ("b", [0, 1, 1, 0]), ("c", [1, 0, 1, 0])] {
        for y in ys {
            text.push_str(&format!("{u},{y}\n"));
        }
    }
    std::fs::write(&sep, text).unwrap();
    let (code, _, stderr) = tsclust(&["fit", "--family", "binomial", "--ridge", "0", "--input", sep.to_str().unwrap()]);
    assert_eq!(code, 3, "{stderr}");
}
