use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn helpkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helpkit"))
        .args(args)
        .env_remove("HELPKIT_BUDGET")
        .output()
        .expect("helpkit runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/golden")
}

fn tuple_lines(s: &str) -> Vec<&str> {
    s.lines().filter(|l| l.starts_with('(')).collect()
}

#[test]
fn validate_complete_and_partial_tables() {
    let o = helpkit(&["validate", data("a5.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("orthogonality"));
    let o = helpkit(&["validate", data("co3.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("partial table"));
}

#[test]
fn validate_rejects_broken_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    let text = std::fs::read_to_string(data("s3.json")).unwrap();
    std::fs::write(&p, &text[..text.len() / 2]).unwrap();
    let o = helpkit(&["validate", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&helpkit(&["validate", missing.to_str().unwrap()])), 1);
}

#[test]
fn validate_flags_an_orthogonality_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s3.json");
    let text = std::fs::read_to_string(data("s3.json")).unwrap();
    // chi2 on 3a: -1 becomes 1
    let bad = text.replacen("\"3a\": \"-1\"", "\"3a\": \"1\"", 1);
    assert_ne!(bad, text);
    std::fs::write(&p, bad).unwrap();
    let o = helpkit(&["validate", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("chi2"), "{}", stdout(&o));
}

#[test]
fn solve_co3_order_23() {
    let o = helpkit(&["solve", "--table", "co3", "--order", "23"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(tuple_lines(&s).len(), 12, "{s}");
    assert!(s.contains("classes 23a 23b"));
}

#[test]
fn solve_co1_order_7() {
    let o = helpkit(&["solve", "--table", "co1", "--order", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("count 47"));
    assert_eq!(tuple_lines(&s).len(), 47);
}

#[test]
fn solve_a5_involutions() {
    let o = helpkit(&[
        "solve",
        "--table",
        data("a5.json").to_str().unwrap(),
        "--order",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(tuple_lines(&s), vec!["(1)"]);
    assert!(s.contains("rational yes"));
}

#[test]
fn solve_modes_agree_and_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("joint.txt");
    let b = dir.path().join("split.txt");
    for (mode, p) in [("joint", &a), ("case-split", &b)] {
        let o = helpkit(&[
            "solve",
            "--table",
            "co3",
            "--order",
            "35",
            "--mode",
            mode,
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = std::fs::read_to_string(a).unwrap();
    assert_eq!(a, std::fs::read_to_string(b).unwrap());
    assert_eq!(tuple_lines(&a), vec!["(3,12,-14)", "(4,11,-14)"]);
}

#[test]
fn solve_with_selected_characters() {
    let o = helpkit(&["solve", "--table", "co3", "--order", "2", "--chars", "chi2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // one character alone leaves more candidates than the full system
    assert!(tuple_lines(&stdout(&o)).len() >= 6);
}

#[test]
fn solve_usage_errors() {
    // not a divisor of the exponent
    assert_eq!(
        code(&helpkit(&["solve", "--table", "a5", "--order", "7"])),
        2
    );
    assert_eq!(code(&helpkit(&["solve", "--table", "a5"])), 2);
    assert_eq!(
        code(&helpkit(&[
            "solve", "--table", "a5", "--order", "2", "--mode", "x"
        ])),
        2
    );
    assert_eq!(code(&helpkit(&["frobnicate"])), 2);
}

#[test]
fn budget_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_helpkit"))
        .args(["solve", "--table", "co3", "--order", "3"])
        .env("HELPKIT_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = helpkit(&["--budget", "10", "solve", "--table", "co3", "--order", "3"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn rule_out_verdicts() {
    let o = helpkit(&["rule-out", "--table", "co2", "--primes", "7,11"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("infeasible"), "{}", stdout(&o));

    let o = helpkit(&[
        "rule-out",
        "--table",
        "co3",
        "--primes",
        "2,23",
        "--rows",
        "chi23@0,1,23",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("{-22, 24}"), "{}", stdout(&o));

    let o = helpkit(&["rule-out", "--table", "co1", "--primes", "13,23", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["order"], 299);
}

#[test]
fn rule_out_usage_errors() {
    assert_eq!(
        code(&helpkit(&["rule-out", "--table", "co3", "--primes", "4,3"])),
        2
    );
    assert_eq!(
        code(&helpkit(&["rule-out", "--table", "co3", "--primes", "5"])),
        2
    );
    assert_eq!(
        code(&helpkit(&["rule-out", "--table", "co3", "--primes", "5,5"])),
        2
    );
    let o = helpkit(&[
        "rule-out", "--table", "co3", "--primes", "5,7", "--rows", "nochar@0",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_skipping_everything_passes() {
    let o = helpkit(&["report", "--skip", "co1,co2,co3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.lines().all(|l| !l.starts_with("FAIL")));
    assert!(s.contains("SKIPPED"));
}

#[test]
fn report_on_co3_passes() {
    let o = helpkit(&["report", "--skip", "co1,co2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS     co3 order 3: solution set"));
    assert!(stdout(&o).contains("SKIPPED  co3 order 4"));
}

#[test]
fn report_default_run_is_red_where_expected() {
    let o = helpkit(&["report"]);
    assert_eq!(code(&o), 1);
    let s = stdout(&o);
    assert!(s.contains("FAIL     co2 order 22: solution set"));
    assert!(s.contains("SKIPPED  co1 order 55"));
}

#[test]
fn report_names_a_removed_tuple() {
    let dir = tempfile::tempdir().unwrap();
    for e in std::fs::read_dir(golden_dir()).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), dir.path().join(e.file_name())).unwrap();
    }
    let f = dir.path().join("co2_3.txt");
    let text = std::fs::read_to_string(&f).unwrap();
    let victim = text
        .lines()
        .find(|l| l.starts_with('('))
        .unwrap()
        .to_string();
    let kept: String = text
        .lines()
        .filter(|l| *l != victim)
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&f, kept).unwrap();
    let o = helpkit(&[
        "report",
        "--golden",
        dir.path().to_str().unwrap(),
        "--skip",
        "co1,co3,mu,st-rows,rule-out",
    ]);
    assert_eq!(code(&o), 1);
    let s = stdout(&o);
    let line = s
        .lines()
        .find(|l| l.contains(&victim))
        .unwrap_or_else(|| panic!("{victim} not named in\n{s}"));
    assert!(line.contains("order 3"), "{line}");
}
