//! One PASS/FAIL line per acceptance criterion. Every comparison is exact.

use std::collections::BTreeSet;
use std::io::Write;

use num_bigint::BigInt;

use helpkit_core::csp::{brute_force, solve, CspInstance};
use helpkit_core::cyclotomic::root_trace;
use helpkit_core::lp::{generate, mu_form, variable_layout, Chain, ChainEntry};
use helpkit_core::numtheory::{divisors, gcd};
use helpkit_core::report::{
    self, bundled_st_rows, bundled_table, printed_row_discrepancies, GoldenSource, Outcome, Report,
    ReportOptions, TupleGolden,
};
use helpkit_core::{chain_solve, ChainConfig, CharTable, CycInt, PaVar, Rational, SolveMode};

struct Line {
    name: &'static str,
    detail: Vec<String>,
}

impl Line {
    fn new(name: &'static str) -> Self {
        Line {
            name,
            detail: Vec::new(),
        }
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.detail.push(msg.into());
    }

    fn passed(&self) -> bool {
        self.detail.is_empty()
    }
}

fn outcome_of(r: &Report, name: &str, line: &mut Line) {
    match r.find(name).map(|c| &c.outcome) {
        Some(Outcome::Pass) => {}
        Some(Outcome::Fail(ls)) => {
            for l in ls {
                line.fail(format!("{name}: {l}"));
            }
        }
        Some(o) => line.fail(format!("{name}: {o:?}")),
        None => line.fail(format!("{name}: no such check")),
    }
}

fn golden(g: &str, k: u64) -> TupleGolden {
    let f = TupleGolden::file_name(g, k);
    TupleGolden::parse(&f, &GoldenSource::Bundled.read(&f).unwrap()).unwrap()
}

fn cyclotomic_oracle() -> Line {
    let mut line = Line::new("cyclotomic oracle, n <= 30, all j (exact)");
    for n in 1..=30u64 {
        for j in 0..n as i64 {
            let sum = (1..=n)
                .filter(|&t| gcd(t, n) == 1)
                .map(|t| CycInt::root(n, j * t as i64))
                .fold(CycInt::zero(), |a, b| a + b);
            match sum.to_integer() {
                Some(v) if v == BigInt::from(root_trace(n, j)) => {}
                other => line.fail(format!("n={n} j={j}: {} vs {other:?}", root_trace(n, j))),
            }
        }
    }
    line
}

fn mu_goldens(r: &Report) -> Line {
    let mut line = Line::new("displayed mu forms regenerate coefficient for coefficient (exact)");
    let want: &[(&str, &[u64])] = &[
        ("co3", &[2, 3, 5, 11, 23, 33, 35, 46]),
        ("co2", &[2, 3, 5, 21, 22, 23, 33, 35]),
        ("co1", &[7, 23, 77]),
    ];
    for (g, ks) in want {
        for k in *ks {
            outcome_of(r, &format!("{g} order {k}: displayed mu forms"), &mut line);
        }
    }
    line
}

fn solution_sets(r: &Report) -> Line {
    let mut line = Line::new("solution-set goldens (exact set equality)");
    let counts: &[(&str, u64, usize)] = &[
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
    ];
    for &(g, k, n) in counts {
        outcome_of(r, &format!("{g} order {k}: solution set"), &mut line);
        let got = golden(g, k).tuples.len();
        if got != n {
            line.fail(format!(
                "{g} order {k}: golden holds {got} tuples, expected {n}"
            ));
        }
    }
    for (g, k) in [
        ("co3", 7),
        ("co2", 7),
        ("co2", 11),
        ("co1", 11),
        ("co1", 13),
    ] {
        outcome_of(r, &format!("{g} order {k}: solution set"), &mut line);
        if !golden(g, k).rational {
            line.fail(format!("{g} order {k}: not rationally conjugate"));
        }
    }
    let both: BTreeSet<Vec<i64>> = [vec![3, 12, -14], vec![4, 11, -14]].into_iter().collect();
    for g in ["co3", "co2"] {
        if golden(g, 35).tuples != both {
            line.fail(format!("{g} order 35: final tuples differ"));
        }
    }
    // (nu5, nu7) = (15, -14) for the order-35 intermediate step
    outcome_of(r, "co3 (5,7) chi3_mod3@0,7: feasible {15}", &mut line);
    line
}

fn rule_outs(r: &Report) -> Line {
    let mut line = Line::new("rule-out goldens: infeasible orders and (m1, mp, mq) rows (exact)");
    let via_tuples = |g: &str, k: u64, line: &mut Line| {
        outcome_of(r, &format!("{g} order {k}: solution set"), line);
        if !golden(g, k).tuples.is_empty() {
            line.fail(format!("{g} order {k}: golden is not empty"));
        }
    };
    let orders: &[(&str, &[u64])] = &[
        ("co3", &[33, 46, 55, 69, 77, 115, 161, 253]),
        ("co2", &[21, 22, 33, 46, 55, 69, 77, 115, 161, 253]),
        ("co1", &[46, 69, 77, 91, 115, 143, 161, 253, 299]),
    ];
    for (g, ks) in orders {
        for &k in *ks {
            let has_golden = GoldenSource::Bundled
                .read(&TupleGolden::file_name(g, k))
                .is_ok();
            if has_golden {
                via_tuples(g, k, &mut line);
            }
            let ps: Vec<u64> = divisors(k)
                .into_iter()
                .filter(|&d| d > 1 && d < k)
                .collect();
            let prefix = format!("{g} ({},{}) ", ps[0], ps[ps.len() - 1]);
            let checks: Vec<_> = r
                .checks
                .iter()
                .filter(|c| c.name.starts_with(&prefix) && c.name.ends_with(": infeasible"))
                .collect();
            if checks.is_empty() && !has_golden {
                line.fail(format!("{g} order {k}: nothing rules it out"));
            }
            for c in checks {
                outcome_of(r, &c.name, &mut line);
            }
        }
    }
    for c in r
        .checks
        .iter()
        .filter(|c| c.tags.iter().any(|t| t == "st-rows"))
    {
        outcome_of(r, &c.name, &mut line);
    }
    outcome_of(r, "co3 (2,23) chi23@0,1,23: feasible {-22, 24}", &mut line);
    outcome_of(
        r,
        "co2 (5,7) chi7_mod3@0,7: feasible {-20, 15, 50, 85}",
        &mut line,
    );
    for d in printed_row_discrepancies(&bundled_st_rows()).unwrap() {
        line.fail(format!("printed row not reproduced: {d}"));
    }
    line
}

fn search(r: &Report) -> Line {
    let mut line = Line::new("(5,7)-irreducible search gives the 13 difference tuples (exact)");
    outcome_of(r, "co3 (5,7): irreducible difference tuples", &mut line);
    line
}

fn small_orders(t: &CharTable, max_vars: usize) -> Vec<u64> {
    t.spectrum()
        .into_iter()
        .filter(|&k| k > 1)
        .filter(|&k| {
            divisors(k)
                .into_iter()
                .filter(|&m| m > 1)
                .map(|m| variable_layout(t, m).len())
                .sum::<usize>()
                <= max_vars
        })
        .collect()
}

fn all_vars(t: &CharTable, k: u64) -> Vec<PaVar> {
    divisors(k)
        .into_iter()
        .rev()
        .filter(|&m| m > 1)
        .flat_map(|m| variable_layout(t, m))
        .collect()
}

fn properties() -> Line {
    let mut line = Line::new("property suites (exact)");
    let names = ["a5", "s3", "co3", "co2", "co1"];
    let tables: Vec<CharTable> = names.iter().map(|n| bundled_table(n).unwrap()).collect();

    // sum of all mu_l is the degree, at a few fixed assignments
    for (name, t) in names.iter().zip(&tables) {
        for k in small_orders(t, 24) {
            let vars = all_vars(t, k);
            for seed in 0..3i64 {
                let val = |v: &PaVar| {
                    let i = vars.iter().position(|w| w == v)? as i64;
                    Some(BigInt::from((i * 7 + seed * 13) % 23 - 11))
                };
                for ch in &t.characters {
                    let forms: Result<Vec<_>, _> = (0..k)
                        .map(|l| mu_form(t, ch, k, l, &Chain::new()))
                        .collect();
                    let Ok(forms) = forms else { continue };
                    let total: Rational = forms.iter().map(|c| c.mu().eval(val).unwrap()).sum();
                    if total != Rational::from_integer(BigInt::from(ch.degree)) {
                        line.fail(format!("{name} order {k} {}: sum of mu is {total}", ch.id));
                    }
                }
            }
        }
    }

    // additivity over pairs of characters
    for (name, t) in names.iter().zip(&tables).take(3) {
        for k in small_orders(t, 12) {
            for (i, x) in t.characters.iter().enumerate() {
                for y in &t.characters[i..] {
                    let Some(s) = x.sum(y, "sum") else { continue };
                    for l in 0..k {
                        let f = |c| mu_form(t, c, k, l, &Chain::new()).map(|m| m.form);
                        if let (Ok(a), Ok(b), Ok(c)) = (f(x), f(y), f(&s)) {
                            if c != a.add(&b) {
                                line.fail(format!("{name} order {k} {}+{} l={l}", x.id, y.id));
                            }
                        }
                    }
                }
            }
        }
    }

    // actual elements of the complete small tables
    for (name, t) in names.iter().zip(&tables).take(2) {
        for class in t.classes.iter().skip(1) {
            let k = class.order;
            let mut chain = Chain::new();
            for d in divisors(k).into_iter().filter(|&d| d > 1 && d < k) {
                let p = t.power_class(&class.name, d).unwrap();
                chain.insert(k / d, ChainEntry::Fixed(vec![(p, 1)]));
            }
            let at = |v: &PaVar| Some(BigInt::from((v.class == class.name) as i64));
            for ch in t.characters.iter().filter(|c| c.usable_for_order(k)) {
                for l in 0..k {
                    let c = mu_form(t, ch, k, l, &chain).unwrap();
                    if c.holds(at) != Some(true) {
                        line.fail(format!("{name} {} is not realisable: {c}", class.name));
                    }
                }
            }
        }
    }

    // solver against exhaustive enumeration on fixed boxes
    for (name, t) in names.iter().zip(&tables) {
        for k in small_orders(t, 6) {
            let vars = all_vars(t, k);
            let mut inst = CspInstance::new(vars.clone(), k);
            for m in divisors(k).into_iter().filter(|&m| m > 1) {
                inst.constraints
                    .extend(generate(t, m, &Chain::new(), None).constraints);
            }
            inst.add_augmentation_equalities();
            let side = (2e5f64.powf(1.0 / vars.len() as f64).floor() as i64).min(41);
            let lo = -(side / 2);
            let bx = vec![(lo, lo + side - 1); vars.len()];
            inst.bounds = bx.iter().map(|&b| Some(b)).collect();
            let mut want = brute_force(&inst, &bx);
            want.sort();
            let mut got: Vec<Vec<i64>> = solve(&inst)
                .unwrap()
                .into_iter()
                .map(|s| {
                    let mut x = s.values;
                    for v in s.chain.values().rev() {
                        x.extend(v);
                    }
                    x
                })
                .collect();
            got.sort();
            if got != want {
                line.fail(format!("{name} order {k}: solver and brute force disagree"));
            }
        }
    }

    // joint and case-split agree on every regenerable golden
    for n in report::golden_names() {
        let Ok(g) = TupleGolden::parse(n, &GoldenSource::Bundled.read(n).unwrap()) else {
            continue;
        };
        if matches!(n, "co1_55.txt" | "co1_65.txt") {
            continue;
        }
        let t = bundled_table(&g.group).unwrap();
        let run = |mode| {
            let cfg = ChainConfig {
                mode,
                ..ChainConfig::default()
            };
            chain_solve(&t, g.order, &cfg)
                .map(|r| r.solutions.into_iter().collect::<BTreeSet<_>>())
                .map_err(|e| e.to_string())
        };
        if run(SolveMode::Joint) != run(SolveMode::CaseSplit) {
            line.fail(format!("{n}: joint and case-split differ"));
        }
    }
    line
}

fn complete_table_checks(r: &Report) -> Line {
    let mut line = Line::new("complete-table checks are SKIPPED without a supplied table");
    for name in [
        "co1 order 55: solution set (complete table)",
        "co1 order 65: solution set (complete table)",
        "co3 order 4: 510 tuples (complete table)",
        "co3 order 14: 5 tuples (complete table)",
    ] {
        match r.find(name).map(|c| &c.outcome) {
            Some(Outcome::Skipped(_)) => {}
            other => line.fail(format!("{name}: {other:?}")),
        }
    }
    for (k, n) in [(55, 36), (65, 14)] {
        let got = golden("co1", k).tuples.len();
        if got != n {
            line.fail(format!(
                "co1 order {k}: golden holds {got} tuples, expected {n}"
            ));
        }
    }
    line
}

#[test]
fn acceptance() {
    let r = report::run(&ReportOptions::default()).unwrap();
    let lines = [
        cyclotomic_oracle(),
        mu_goldens(&r),
        solution_sets(&r),
        rule_outs(&r),
        search(&r),
        properties(),
        complete_table_checks(&r),
    ];
    // written past the test harness so the summary shows on success too
    let mut out = std::io::stderr().lock();
    for l in &lines {
        let tag = if l.passed() { "PASS" } else { "FAIL" };
        writeln!(out, "ACCEPTANCE {tag} {}", l.name).unwrap();
        for d in &l.detail {
            writeln!(out, "    {d}").unwrap();
        }
    }
    let failed: Vec<&str> = lines
        .iter()
        .filter(|l| !l.passed())
        .map(|l| l.name)
        .collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
