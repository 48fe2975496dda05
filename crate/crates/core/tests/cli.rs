mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::fixture;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracdelay"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_cfg(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn scalar_text() -> String {
    std::fs::read_to_string(fixture("scalar_neutral.cfg")).unwrap()
}

/// Parses a trajectory CSV into (header, rows).
fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn solve_to(dir: &TempDir, cfg: &Path, method: &str, name: &str) -> (Output, PathBuf) {
    let out = dir.path().join(name);
    let o = run(&["solve", path_str(cfg), "--method", method, "--out", path_str(&out)]);
    (o, out)
}

fn state_sup(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flat_map(|r| r[1..].iter()).fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn solve_writes_csv_and_metadata() {
    let dir = TempDir::new().unwrap();
    let (o, out) = solve_to(&dir, &fixture("scalar_neutral.cfg"), "closed-form", "s.csv");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "w1"]);
    let meta = std::fs::read_to_string(dir.path().join("s.csv.meta")).unwrap();
    let points: usize = meta.lines().find_map(|l| l.strip_prefix("points = ")).unwrap().parse().unwrap();
    assert_eq!(rows.len(), points);
    assert!(meta.contains("method = closed-form"));
    let raw = std::fs::read(&out).unwrap();
    assert!(!raw.contains(&b'\r'));
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    assert!((rows[0][0] + 0.25).abs() < 1e-15 && (rows.last().unwrap()[0] - 1.0).abs() < 1e-15);
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("example3.cfg");
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let out = dir.path().join(format!("p{}.csv", outputs.len()));
        let o = bin()
            .env("FRACDELAY_THREADS", threads)
            .args(["solve", path_str(&cfg), "--method", "picard", "--out", path_str(&out)])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let o = bin()
        .env("FRACDELAY_THREADS", "zero")
        .args(["certify", path_str(&fixture("scalar_neutral.cfg"))])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn picard_on_the_two_dimensional_fixture() {
    let dir = TempDir::new().unwrap();
    let (o, out) = solve_to(&dir, &fixture("example3.cfg"), "picard", "p.csv");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "w1", "w2"]);
    assert!((rows[0][0] + 0.3).abs() < 1e-15);
    assert!((rows.last().unwrap()[0] - 0.6).abs() < 1e-15);
    assert!(rows.iter().all(|r| r.len() == 3 && r.iter().all(|v| v.is_finite())));
}

#[test]
fn oracle_agrees_with_picard_on_the_two_dimensional_fixture() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("example3.cfg");
    let (_, p) = solve_to(&dir, &cfg, "picard", "p.csv");
    let (o, q) = solve_to(&dir, &cfg, "oracle", "o.csv");
    assert_eq!(o.status.code(), Some(0));
    let (_, picard) = read_csv(&p);
    let (_, oracle) = read_csv(&q);
    // the oracle grid is much finer; interpolate it linearly at the picard nodes
    let mut diff = 0.0f64;
    for r in &picard {
        let j = oracle.partition_point(|o| o[0] < r[0]).clamp(1, oracle.len() - 1);
        let (a, b) = (&oracle[j - 1], &oracle[j]);
        let th = ((r[0] - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0);
        for k in 1..r.len() {
            diff = diff.max((r[k] - (a[k] + th * (b[k] - a[k]))).abs());
        }
    }
    let bound = 1e-3 * (1.0 + state_sup(&picard));
    assert!(diff <= bound, "sup difference {diff:.3e} exceeds {bound:.3e}");
}

#[test]
fn zero_data_gives_all_zero_trajectory() {
    let dir = TempDir::new().unwrap();
    let text = scalar_text().replace("\"cos(t)\"", "\"0\"").replace("1 + t + t^2", "0");
    let cfg = write_cfg(&dir, "zero.cfg", &text);
    for method in ["closed-form", "picard", "oracle"] {
        let (o, out) = solve_to(&dir, &cfg, method, &format!("{method}.csv"));
        assert_eq!(o.status.code(), Some(0));
        let (_, rows) = read_csv(&out);
        assert_eq!(state_sup(&rows), 0.0, "{method}");
    }
}

#[test]
fn config_errors_exit_one_with_field_path() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (scalar_text().replace("alpha = 0.7", "alpha = 1.5"), "system.alpha"),
        (scalar_text().replace("delays = [0.25]", "delays = [-0.25]"), "system.delays"),
        (scalar_text().replace("B = [-0.4]", "B = [-0.4, 1.0]"), "system.B"),
        (scalar_text().replace("1 + t + t^2", "1 + t +"), "history.phi"),
        (scalar_text().replace("preset = \"identity\"", "preset = \"cubic\""), "mu.preset"),
        (scalar_text() + "\n[solver]\nbogus = 1\n", "bogus"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let cfg = write_cfg(&dir, &format!("bad{i}.cfg"), text);
        let o = run(&["solve", path_str(&cfg)]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(1), "case {i}: {err}");
        assert!(err.contains(field), "case {i}: `{err}` lacks `{field}`");
    }
    assert_eq!(run(&["solve", "/nonexistent/problem.cfg"]).status.code(), Some(1));
}

#[test]
fn closed_form_refuses_state_dependent_forcing() {
    let o = run(&["solve", path_str(&fixture("example3.cfg")), "--method", "closed-form"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn truncation_failure_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "cap.cfg", &(scalar_text() + "\n[solver]\nlevel_cap = 2\n"));
    let (o, out) = solve_to(&dir, &cfg, "closed-form", "c.csv");
    assert_eq!(o.status.code(), Some(2));
    assert!(out.exists());
}

#[test]
fn certify_reports_every_key() {
    let o = run(&["certify", path_str(&fixture("example3.cfg"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for key in ["rho:", "unique:", "eta:", "xnorm_per_delay:", "xnorm_lumped:", "xnorm_matrix:", "lipschitz:"] {
        assert!(text.contains(key), "missing {key} in\n{text}");
    }
}

#[test]
fn certify_with_zero_lipschitz() {
    let o = run(&["certify", path_str(&fixture("example3.cfg")), "--lipschitz", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.trim() == "rho: 0.000000000e0"), "{text}");
    assert!(text.contains("unique: true"));
}

#[test]
fn certify_without_uniqueness_warns_but_succeeds() {
    let o = run(&["certify", path_str(&fixture("example3.cfg")), "--lipschitz", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("unique: false") && !text.contains("eta:"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

fn compare_rows(args: &[&str]) -> Vec<Vec<f64>> {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("resolution,points,sup_error,rel_error"));
    lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn compare_errors_decrease_on_the_scalar_fixture() {
    let rows = compare_rows(&["compare", path_str(&fixture("scalar_neutral.cfg")), "--resolutions", "128,256,512"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]), "{rows:?}");
}

#[test]
fn compare_method_with_itself_is_zero() {
    let rows = compare_rows(&[
        "compare",
        path_str(&fixture("example3_linear.cfg")),
        "--resolutions",
        "64,128",
        "--against",
        "closed-form",
    ]);
    assert!(rows.iter().all(|r| r[2] == 0.0 && r[3] == 0.0));
}

#[test]
fn compare_on_the_two_dimensional_fixture() {
    let rows = compare_rows(&["compare", path_str(&fixture("example3.cfg")), "--resolutions", "1024,4096"]);
    let last = rows.last().unwrap()[2];
    assert!(last <= 1e-3, "final-row error {last:.3e}");
}

#[test]
fn table_dumps_the_lattice() {
    let o = run(&["table", path_str(&fixture("scalar_neutral.cfg")), "--levels", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,i1,q11"));
    let q: Vec<(usize, usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let at = |k, i| q.iter().find(|e| e.0 == k && e.1 == i).unwrap().2;
    assert_eq!(at(1, 0), 1.0);
    assert_eq!(at(1, 2), 0.25);
    assert_eq!(at(2, 0), -0.4);
    assert!((at(2, 1) + 0.1).abs() < 1e-15);
}
