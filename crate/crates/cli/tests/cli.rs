use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roademd")).args(args).env_remove("ROADEMD_TOL").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value(args: &[&str]) -> f64 {
    let o = run(args);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o).lines().next().unwrap().trim().parse().unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const TWO_ROADS: &str = r#"{
  "vertices": ["a", "b", "c"],
  "roads": [
    {"id": "ab", "tail": "a", "head": "b", "length": 1},
    {"id": "bc", "tail": "b", "head": "c", "length": 2}
  ]"#;

#[test]
fn validate_accepts_the_fixture() {
    let o = run(&["validate", fixture("square.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("OK"));
}

#[test]
fn validate_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let neg = write(&dir, "neg.json", &(TWO_ROADS.replace("\"length\": 2", "\"length\": -2") + "}"));
    let o = run(&["validate", &neg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bc"), "{}", stderr(&o));

    let pmf = write(
        &dir,
        "pmf.json",
        &format!(r#"{TWO_ROADS}, "pmf": [{{"pickup": "ab", "delivery": "bc", "probability": "9/10"}}]}}"#),
    );
    assert_eq!(run(&["validate", &pmf]).status.code(), Some(1));

    let typo = write(&dir, "typo.json", &format!(r#"{TWO_ROADS}, "sauce": 1}}"#));
    let o = run(&["validate", &typo]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line"));

    assert_eq!(run(&["validate", "/nonexistent/file.json"]).status.code(), Some(1));
}

#[test]
fn exact_value_of_the_square() {
    let sq = fixture("square.json");
    let w = value(&["emd", sq.to_str().unwrap(), "--mode", "exact"]);
    assert!((w - 31.0 / 30.0).abs() < 1e-7);
    assert_eq!(stdout(&run(&["emd", sq.to_str().unwrap()])).lines().next(), Some("1.03333333"));
}

#[test]
fn identical_measures_give_zero() {
    assert_eq!(value(&["emd", fixture("square_same.json").to_str().unwrap()]), 0.0);
}

#[test]
fn bounds_bracket_the_exact_value() {
    let sq = fixture("square.json");
    let sq = sq.to_str().unwrap();
    let exact = value(&["emd", sq]);
    let lo = value(&["emd", sq, "--mode", "lower", "--epsilon", "0.1"]);
    let hi = value(&["emd", sq, "--mode", "upper", "--epsilon", "0.1"]);
    let path = value(&["emd", sq, "--mode", "path", "--epsilon", "0.1"]);
    assert!(lo <= exact && exact <= hi, "{lo} {exact} {hi}");
    assert!(hi - lo <= 0.2 + 1e-8);
    assert!((path - lo).abs() < 1e-8);
}

#[test]
fn flow_dump_matches_the_value() {
    let dir = tempfile::tempdir().unwrap();
    let sq = fixture("square.json");
    for mode in ["exact", "lower", "path"] {
        let out = dir.path().join(format!("{mode}.csv"));
        let w = value(&["emd", sq.to_str().unwrap(), "--mode", mode, "--dump-flow", out.to_str().unwrap()]);
        let (header, rows) = read_csv(&out);
        assert_eq!(header, ["edge", "tail", "head", "flow", "cost"]);
        let total: f64 = rows.iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
        assert!((total - w).abs() < 1e-6, "{mode}: {total} vs {w}");
        if mode == "exact" {
            assert_eq!(rows.len(), 16);
            assert!(rows
                .iter()
                .any(|r| r[1] == "E" && r[2] == "2" && (r[3].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-6));
        }
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unequal = write(
        &dir,
        "unequal.json",
        &format!(
            r#"{TWO_ROADS}, "source": {{"ab": {{"breakpoints": [0, 1], "values": [1]}}}},
                             "target": {{"bc": {{"breakpoints": [0, 2], "values": [1]}}}}}}"#
        ),
    );
    assert_eq!(run(&["emd", &unequal]).status.code(), Some(2));

    let sq = fixture("square.json");
    let sq = sq.to_str().unwrap();
    let o = run(&["emd", sq, "--tol", "1e-300", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(run(&["emd", sq, "--mode", "lower", "--epsilon", "0"]).status.code(), Some(1));
    assert_eq!(run(&["emd", fixture("square.json").parent().unwrap().to_str().unwrap()]).status.code(), Some(1));

    let o = Command::new(env!("CARGO_BIN_EXE_roademd")).args(["emd", sq]).env("ROADEMD_TOL", "-1").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let sq = fixture("square.json");
    let o = run(&["convergence", sq.to_str().unwrap(), "--epsilons", "0.5,0.1,0.02", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out);
    assert_eq!(header[..6], ["epsilon", "w_lower", "w_upper", "w_path", "exact", "gap"]);
    assert_eq!(rows.len(), 3);
    let col =
        |r: &Vec<String>, name: &str| -> f64 { r[header.iter().position(|h| h == name).unwrap()].parse().unwrap() };
    for r in &rows {
        let eps = col(r, "epsilon");
        assert!(col(r, "gap") <= 2.0 * eps + 1e-8);
        assert!(col(r, "w_lower") <= col(r, "exact") && col(r, "exact") <= col(r, "w_upper"));
        assert_eq!(col(r, "exact_vertices"), 8.0);
        assert_eq!(col(r, "exact_edges"), 16.0);
        let cells = 4.0 * (1.0 / eps).round();
        assert!(col(r, "path_edges") <= 2.0 * 4.0 + 2.0 * cells);
    }
}

#[test]
fn simulation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sq = fixture("square.json");
    let sq = sq.to_str().unwrap();

    let empty = dir.path().join("empty.csv");
    let o = run(&["simulate", sq, "--horizon", "0", "--out", empty.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("critical rate: 0.461538462"));
    let (header, rows) = read_csv(&empty);
    assert_eq!(header, ["time", "outstanding"]);
    assert!(rows.is_empty());

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &std::path::Path| {
        ["simulate", sq, "--lambda-offset", "0.1", "--horizon", "2000", "--seed", "3", "--out", p.to_str().unwrap()]
            .map(String::from)
    };
    let oa = Command::new(env!("CARGO_BIN_EXE_roademd")).args(args(&a)).output().unwrap();
    let ob = Command::new(env!("CARGO_BIN_EXE_roademd")).args(args(&b)).output().unwrap();
    assert_eq!(oa.stdout, ob.stdout);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let growth: f64 =
        stdout(&oa).lines().find_map(|l| l.strip_prefix("backlog growth (outstanding/T): ")).unwrap().parse().unwrap();
    assert!((0.05..=0.15).contains(&growth), "{growth}");

    let o = run(&["simulate", sq, "--lambda-mult", "0.99", "--horizon", "2000"]);
    let renewals: usize = stdout(&o).lines().find_map(|l| l.strip_prefix("renewals: ")).unwrap().parse().unwrap();
    assert!(renewals > 0);

    assert_eq!(run(&["simulate", sq, "--m", "0"]).status.code(), Some(1));
    assert_ne!(run(&["simulate", sq, "--lambda", "1", "--lambda-mult", "2"]).status.code(), Some(0));
    assert_eq!(run(&["simulate", fixture("square_same.json").to_str().unwrap()]).status.code(), Some(1));
}
