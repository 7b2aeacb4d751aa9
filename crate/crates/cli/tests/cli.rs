use std::process::{Command, Output};

use gl2modp::{make_field, GenericRho, RhoRecord};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gl2modp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o).lines().skip(1).map(|l| l.split('\t').map(String::from).collect()).collect()
}

#[test]
fn output_is_deterministic() {
    let args = ["xj", "--p", "5,7", "--f", "1,2", "--trials", "3", "--seed", "11"];
    let a = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, run(&args).stdout);
    assert_ne!(a.stdout, run(&["xj", "--p", "5,7", "--f", "1,2", "--trials", "3", "--seed", "12"]).stdout);
}

#[test]
fn weight_count_is_power_of_two_of_zero_set() {
    let o = run(&["rho", "--p", "5,7", "--f", "1,2", "--trials", "6", "--zero-prob", "0.5"]);
    assert!(o.status.success());
    let rs = rows(&o);
    assert_eq!(rs.len(), 24);
    for r in rs {
        let z = if r[9] == "-" { 0 } else { r[9].split(',').count() };
        assert_eq!(r[10].parse::<usize>().unwrap(), 1 << z, "{r:?}");
        assert_eq!(r[11].split(' ').count(), 1 << z);
    }
}

#[test]
fn malformed_parameters_are_usage_errors() {
    for args in [
        vec!["rho", "--p", "3"],
        vec!["rho", "--p", "9"],
        vec!["rho", "--p", "x"],
        vec!["xj", "--zero-prob", "2"],
        vec!["verify", "--suite", "bogus"],
        vec!["stickelberger", "--p", "4"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn single_embedding_rows() {
    let o = run(&["xj", "--p", "7", "--f", "1", "--trials", "4", "--format", "text", "--seed", "2"]);
    assert!(o.status.success());
    let ke = make_field(7, 2).unwrap();
    for line in stdout(&o).lines() {
        let rec: RhoRecord = line.parse().unwrap();
        let rho: GenericRho = rec.to_rho().unwrap();
        let sign = ke.neg(rho.theta_minus_one());
        let boundary = if rec.j.is_empty() { rho.lambda() } else { rho.mu() };
        assert_eq!(rec.xj, Some(ke.mul(sign, boundary)));
        assert_eq!(rec.get("frobenius_unit").unwrap(), boundary.to_string());
        assert_eq!(rec.get("product"), rec.get("lambda_mu"));
    }
}

#[test]
fn inadmissible_subsets_are_skipped() {
    let o = run(&["xj", "--p", "5", "--f", "2", "--trials", "8", "--zero-prob", "0.5", "--seed", "4"]);
    assert!(o.status.success());
    let rs = rows(&o);
    assert!(rs.iter().any(|r| r[12] == "skipped"));
    for r in &rs {
        match r[12].as_str() {
            "skipped" => assert_eq!(r[8], "-"),
            "ok" => assert_eq!(r[10], r[11]),
            s => panic!("unexpected status {s}"),
        }
    }
}

#[test]
fn stickelberger_table() {
    let o = run(&["stickelberger", "--p", "7", "--f", "1"]);
    assert!(o.status.success());
    let rs = rows(&o);
    assert_eq!(rs.len(), 30);
    assert!(rs.iter().all(|r| r[8] == "true"));
    let one = rs.iter().find(|r| r[2] == "1" && r[3] == "1").unwrap();
    assert_eq!((one[6].as_str(), one[7].as_str()), ("1", "3"));
    let s = run(&["stickelberger", "--p", "7", "--f", "3", "--trials", "20"]);
    assert!(s.status.success());
    assert_eq!(rows(&s).len(), 20);
}

#[test]
fn verify_passes_and_detects_flip() {
    let base = ["verify", "--suite", "oracle,roundtrip", "--p", "5", "--f", "2", "--trials", "2"];
    let ok = run(&base);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).ends_with("overall=pass\n"));
    let mut bad = base.to_vec();
    bad.extend(["--mutate", "x-sign"]);
    let o = run(&bad);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("suite=A1-oracle-xJ status=fail"));
    assert!(text.contains("tags=uniform-unit-discrepancy"));
    assert!(text.lines().any(|l| l.trim_start().starts_with("failure: p=5 f=2 r=")));
}

#[test]
fn ktype_reports_and_cap_policy() {
    let o = run(&["ktype", "--p", "3", "--n", "2", "--m", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    for name in ["lemma41-multiplicities", "prop42-recursion", "prop43-m2-table", "prop44", "quaternion"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
    let big = run(&["ktype", "--p", "5", "--f", "2", "--m", "3"]);
    assert_eq!(big.status.code(), Some(0));
    let text = stdout(&big);
    assert!(text.contains("skipped\tlemma41 decomposition"));
    assert!(text.contains("lemma41-theta-sum"));
}

#[test]
fn writes_to_file() {
    let dir = std::env::temp_dir().join(format!("gl2modp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rows.txt");
    let o = run(&["rho", "--trials", "2", "--format", "text", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let body = std::fs::read_to_string(&path).unwrap();
    assert_eq!(body.lines().count(), 2);
    assert!(body.lines().all(|l| l.parse::<RhoRecord>().is_ok()));
    std::fs::remove_dir_all(dir).unwrap();
}
