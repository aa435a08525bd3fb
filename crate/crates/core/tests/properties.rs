use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

use helpkit_core::csp::{brute_force, solve, CspInstance};
use helpkit_core::cyclotomic::root_trace;
use helpkit_core::lp::{generate, mu_form, variable_layout, Chain, ChainEntry};
use helpkit_core::numtheory::{divisors, gcd};
use helpkit_core::report::bundled_table;
use helpkit_core::{CharTable, CharacterKind, LinearForm, MuConstraint, PaVar, Rational};

fn galois_sum(n: u64, j: i64) -> f64 {
    (1..=n)
        .filter(|&t| gcd(t, n) == 1)
        .map(|t| {
            let a = 2.0 * std::f64::consts::PI * (j as f64) * (t as f64) / n as f64;
            Complex64::new(0.0, a).exp()
        })
        .sum::<Complex64>()
        .re
}

#[test]
fn root_trace_matches_conjugate_sum() {
    for n in 1..=30u64 {
        for j in 0..n as i64 {
            let want = galois_sum(n, j);
            let got = root_trace(n, j);
            assert!(
                (want - got as f64).abs() < 1e-9,
                "n={n} j={j}: {got} vs {want}"
            );
        }
    }
}

/// Orders whose layout (all divisors together) has at most `max_vars` variables.
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
    let mut v = Vec::new();
    for m in divisors(k).into_iter().rev().filter(|&m| m > 1) {
        v.extend(variable_layout(t, m));
    }
    v
}

fn eval(f: &LinearForm, vals: &BTreeMap<PaVar, i64>) -> Rational {
    f.eval(|v| vals.get(v).map(|&x| BigInt::from(x)))
        .expect("every variable assigned")
}

fn tables() -> Vec<(&'static str, CharTable)> {
    ["a5", "s3", "co3", "co2", "co1"]
        .into_iter()
        .map(|n| (n, bundled_table(n).unwrap()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mu_sums_to_degree(
        pick in 0usize..5,
        korder in 0usize..64,
        chi in 0usize..64,
        seed in prop::collection::vec(-40i64..40, 32),
    ) {
        let (_, t) = &tables()[pick];
        let orders = small_orders(t, 32);
        let k = orders[korder % orders.len()];
        let ch = &t.characters[chi % t.characters.len()];
        let vars = all_vars(t, k);
        let vals: BTreeMap<PaVar, i64> = vars.iter().cloned().zip(seed.iter().copied()).collect();
        let mut total = Rational::zero();
        for l in 0..k {
            match mu_form(t, ch, k, l, &Chain::new()) {
                Ok(c) => total += eval(&c.mu(), &vals),
                Err(_) => return Ok(()),
            }
        }
        prop_assert_eq!(total, Rational::from_integer(BigInt::from(ch.degree)));
    }

    #[test]
    fn mu_forms_are_additive(
        pick in 0usize..5,
        korder in 0usize..64,
        a in 0usize..64,
        b in 0usize..64,
        l in 0u64..1000,
    ) {
        let (_, t) = &tables()[pick];
        let orders = small_orders(t, 32);
        let k = orders[korder % orders.len()];
        let x = &t.characters[a % t.characters.len()];
        let y = &t.characters[b % t.characters.len()];
        let Some(s) = x.sum(y, "sum") else { return Ok(()) };
        let l = l % k;
        let (Ok(fx), Ok(fy), Ok(fs)) = (
            mu_form(t, x, k, l, &Chain::new()),
            mu_form(t, y, k, l, &Chain::new()),
            mu_form(t, &s, k, l, &Chain::new()),
        ) else {
            return Ok(());
        };
        prop_assert_eq!(fs.form, fx.form.add(&fy.form));
    }

    #[test]
    fn solver_agrees_with_brute_force_on_tables(
        pick in 0usize..5,
        korder in 0usize..64,
        lo in prop::collection::vec(-12i64..=1, 8),
        width in prop::collection::vec(0i64..14, 8),
    ) {
        let (_, t) = &tables()[pick];
        let orders = small_orders(t, 6);
        prop_assume!(!orders.is_empty());
        let k = orders[korder % orders.len()];
        let vars = all_vars(t, k);
        let mut inst = CspInstance::new(vars.clone(), k);
        for m in divisors(k).into_iter().filter(|&m| m > 1) {
            inst.constraints.extend(generate(t, m, &Chain::new(), None).constraints);
        }
        inst.add_augmentation_equalities();
        let bx: Vec<(i64, i64)> = (0..vars.len()).map(|i| (lo[i], lo[i] + width[i])).collect();
        let points: f64 = bx.iter().map(|(a, b)| (b - a + 1) as f64).product();
        prop_assume!(points <= 1e7);
        inst.bounds = bx.iter().map(|&b| Some(b)).collect();
        let mut want = brute_force(&inst, &bx);
        want.sort();
        let got: Vec<Vec<i64>> = solve(&inst)
            .unwrap()
            .into_iter()
            .map(|s| {
                let mut x = s.values.clone();
                for v in s.chain.values().rev() {
                    x.extend(v);
                }
                x
            })
            .collect();
        let mut got_sorted = got.clone();
        got_sorted.sort();
        prop_assert_eq!(got_sorted, want);
    }

    #[test]
    fn solver_agrees_with_brute_force_on_random_systems(
        n in 1usize..=4,
        rows in prop::collection::vec(
            (prop::collection::vec(-9i64..=9, 4), -30i64..30, 1u64..8, 0i64..60),
            1..5,
        ),
        lo in prop::collection::vec(-15i64..=0, 4),
        width in prop::collection::vec(0i64..30, 4),
        equality in any::<bool>(),
    ) {
        let vars: Vec<PaVar> = (0..n).map(|i| PaVar::new(7, format!("7{}", (b'a' + i as u8) as char))).collect();
        let mut inst = CspInstance::new(vars.clone(), 7);
        for (coef, c, m, span) in &rows {
            let mut f = LinearForm::constant(Rational::from_integer(BigInt::from(*c)));
            for (v, &a) in vars.iter().zip(coef) {
                f.add_term(v.clone(), Rational::from_integer(BigInt::from(a)));
            }
            inst.constraints.push(MuConstraint {
                form: f,
                modulus: *m,
                upper: BigInt::from(*span),
                character: "x".into(),
                kind: CharacterKind::Ordinary,
                l: 0,
            });
        }
        if equality {
            inst.add_augmentation_equalities();
        }
        let bx: Vec<(i64, i64)> = (0..n).map(|i| (lo[i], lo[i] + width[i])).collect();
        inst.bounds = bx.iter().map(|&b| Some(b)).collect();
        let want = brute_force(&inst, &bx);
        let mut got: Vec<Vec<i64>> = solve(&inst).unwrap().into_iter().map(|s| s.values).collect();
        got.sort();
        let mut want = want;
        want.sort();
        prop_assert_eq!(got, want);
    }
}

/// Every actual element satisfies its own constraints, with its class at `ν = 1`.
#[test]
fn group_elements_are_realisable() {
    for name in ["a5", "s3"] {
        let t = bundled_table(name).unwrap();
        assert!(t.is_complete());
        for class in t.classes.iter().skip(1) {
            let k = class.order;
            let mut chain = Chain::new();
            for d in divisors(k).into_iter().filter(|&d| d > 1 && d < k) {
                let p = t.power_class(&class.name, d).unwrap();
                chain.insert(k / d, ChainEntry::Fixed(vec![(p, 1)]));
            }
            let vars = variable_layout(&t, k);
            for ch in t.characters.iter().filter(|c| c.usable_for_order(k)) {
                for l in 0..k {
                    let c = mu_form(&t, ch, k, l, &chain).unwrap();
                    let ok = c.holds(|v| {
                        vars.contains(v)
                            .then(|| BigInt::from((v.class == class.name) as i64))
                    });
                    assert_eq!(ok, Some(true), "{name} {} {} l={l}: {c}", class.name, ch.id);
                    // the multiplicity is the actual eigenvalue count, so it is a whole number
                    let mu = c
                        .mu()
                        .eval(|v| Some(BigInt::from((v.class == class.name) as i64)));
                    assert!(mu.unwrap().is_integer());
                }
            }
        }
    }
}

#[test]
fn small_tables_round_trip_and_are_orthogonal() {
    for (name, t) in tables() {
        let back = CharTable::parse(&t.to_json()).unwrap();
        assert_eq!(back, t, "{name}");
        if t.is_complete() {
            let r = t.validate_orthogonality().unwrap();
            assert!(r.ok(), "{name}: {:?}", r.failures);
            let n = t
                .characters
                .iter()
                .filter(|c| c.kind == CharacterKind::Ordinary)
                .count();
            assert_eq!(r.checked, n * (n + 1) / 2);
        }
    }
}

#[test]
fn power_classes() {
    let t = bundled_table("a5").unwrap();
    assert_eq!(t.power_class("5a", 2).unwrap(), "5b");
    assert_eq!(t.power_class("5a", 4).unwrap(), "5a");
    assert_eq!(t.power_class("5b", 3).unwrap(), "5a");
    assert_eq!(t.power_class("3a", 3).unwrap(), "1a");
    assert_eq!(t.power_class("2a", 15).unwrap(), "2a");
    let s3 = bundled_table("s3").unwrap();
    assert_eq!(s3.power_class("3a", 2).unwrap(), "3a");
    assert_eq!(s3.power_class("2a", 2).unwrap(), "1a");
}

#[test]
fn orders_and_degrees_of_small_tables() {
    let a5 = bundled_table("a5").unwrap();
    assert_eq!(a5.group_order(), Some(60));
    assert_eq!(a5.exponent(), 30);
    let degrees: Vec<u64> = a5
        .characters
        .iter()
        .filter(|c| c.kind == CharacterKind::Ordinary)
        .map(|c| c.degree)
        .collect();
    let sq: u64 = degrees.iter().map(|d| d * d).sum();
    assert_eq!(sq, 60);
    // values of a character are algebraic integers whose traces are integers
    for ch in &a5.characters {
        for v in ch.values().iter().flatten() {
            assert!(v.trace().is_integer());
        }
    }
    assert_eq!(
        a5.characters[0]
            .value(0)
            .unwrap()
            .to_integer()
            .unwrap()
            .to_i64(),
        Some(1)
    );
}
