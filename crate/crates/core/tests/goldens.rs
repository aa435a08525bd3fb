use std::collections::BTreeSet;

use helpkit_core::report::{
    self, bundled_table, golden_names, GoldenSource, Outcome, ReportOptions, TupleGolden,
};
use helpkit_core::{chain_solve, ChainConfig, SolveMode};

/// Tuple goldens the bundled snippets can regenerate.
fn tuple_goldens() -> Vec<TupleGolden> {
    golden_names()
        .into_iter()
        .filter(|n| n.starts_with("co") && !n.contains("mu") && !n.starts_with("st"))
        .filter(|n| !matches!(*n, "co1_55.txt" | "co1_65.txt"))
        .map(|n| TupleGolden::parse(n, &GoldenSource::Bundled.read(n).unwrap()).unwrap())
        .collect()
}

#[test]
fn bundled_goldens_render_canonically() {
    for g in tuple_goldens() {
        let name = TupleGolden::file_name(&g.group, g.order);
        assert_eq!(
            g.render(),
            GoldenSource::Bundled.read(&name).unwrap(),
            "{name}"
        );
        assert_eq!(g.count, g.tuples.len(), "{name}");
    }
}

#[test]
fn joint_and_case_split_agree_on_goldens() {
    for g in tuple_goldens() {
        let t = bundled_table(&g.group).unwrap();
        let run = |mode| {
            let cfg = ChainConfig {
                mode,
                ..ChainConfig::default()
            };
            let r = chain_solve(&t, g.order, &cfg).unwrap();
            r.solutions.into_iter().collect::<BTreeSet<_>>()
        };
        let joint = run(SolveMode::Joint);
        let split = run(SolveMode::CaseSplit);
        assert_eq!(joint, split, "{} order {}", g.group, g.order);
    }
}

#[test]
fn spec_counts() {
    let want = [
        ("co3", 2, 6),
        ("co3", 3, 155),
        ("co3", 5, 6),
        ("co3", 11, 24),
        ("co3", 23, 12),
        ("co3", 35, 2),
        ("co2", 2, 48),
        ("co2", 3, 4),
        ("co2", 5, 6),
        ("co2", 23, 66),
        ("co2", 35, 2),
        ("co1", 7, 47),
        ("co1", 23, 58588),
        ("co1", 55, 36),
        ("co1", 65, 14),
    ];
    for (g, k, n) in want {
        let name = TupleGolden::file_name(g, k);
        let gold = TupleGolden::parse(&name, &GoldenSource::Bundled.read(&name).unwrap()).unwrap();
        assert_eq!(gold.tuples.len(), n, "{name}");
    }
    let co3 = TupleGolden::parse(
        "co3_35.txt",
        &GoldenSource::Bundled.read("co3_35.txt").unwrap(),
    )
    .unwrap();
    let expect: BTreeSet<Vec<i64>> = [vec![3, 12, -14], vec![4, 11, -14]].into_iter().collect();
    assert_eq!(co3.tuples, expect);
}

#[test]
fn a5_involutions_are_rational() {
    let t = bundled_table("a5").unwrap();
    let r = chain_solve(&t, 2, &ChainConfig::default()).unwrap();
    assert_eq!(r.top_tuples(), vec![vec![1]]);
    assert!(r.all_rational());
}

fn copy_goldens(dir: &std::path::Path) {
    for n in golden_names() {
        std::fs::write(dir.join(n), GoldenSource::Bundled.read(n).unwrap()).unwrap();
    }
}

#[test]
fn removing_a_tuple_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    copy_goldens(dir.path());
    let file = dir.path().join("co3_23.txt");
    let text = std::fs::read_to_string(&file).unwrap();
    let victim = text
        .lines()
        .find(|l| l.starts_with('('))
        .unwrap()
        .to_string();
    let edited: String = text
        .lines()
        .filter(|l| *l != victim)
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&file, edited).unwrap();

    let opts = ReportOptions {
        goldens: GoldenSource::Dir(dir.path().to_path_buf()),
        skip: ["co1", "co2", "mu", "st-rows", "rule-out", "search"]
            .into_iter()
            .map(String::from)
            .collect(),
        ..ReportOptions::default()
    };
    let r = report::run(&opts).unwrap();
    let c = r.find("co3 order 23: solution set").unwrap();
    let Outcome::Fail(lines) = &c.outcome else {
        panic!("expected a failure, got {:?}", c.outcome)
    };
    assert!(
        lines
            .iter()
            .any(|l| l.contains("order 23") && l.contains(&victim)),
        "{lines:?}"
    );
    // the other co3 orders are untouched
    assert_eq!(
        r.find("co3 order 3: solution set").unwrap().outcome,
        Outcome::Pass
    );
}

#[test]
fn skip_tags_select_checks() {
    let opts = ReportOptions {
        skip: ["co1", "co2", "co3"]
            .into_iter()
            .map(String::from)
            .collect(),
        ..ReportOptions::default()
    };
    let r = report::run(&opts).unwrap();
    assert!(!r.checks.is_empty());
    assert!(r
        .checks
        .iter()
        .all(|c| matches!(c.outcome, Outcome::Skipped(_))));
}

#[test]
fn complete_table_checks_are_skipped_by_default() {
    let opts = ReportOptions {
        skip: ["co2", "mu", "st-rows", "rule-out", "search"]
            .into_iter()
            .map(String::from)
            .collect(),
        ..ReportOptions::default()
    };
    let r = report::run(&opts).unwrap();
    for name in [
        "co1 order 55: solution set (complete table)",
        "co1 order 65: solution set (complete table)",
        "co3 order 4: 510 tuples (complete table)",
        "co3 order 14: 5 tuples (complete table)",
    ] {
        let c = r.find(name).unwrap_or_else(|| panic!("{name} missing"));
        assert!(
            matches!(c.outcome, Outcome::Skipped(_)),
            "{name}: {:?}",
            c.outcome
        );
    }
}
