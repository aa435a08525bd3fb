//! Partial-augmentation variables and the `μ_l` linear forms.
//!
//! For a unit `u` of order `k`, the power `u^d` has order `m = k/d`. Its
//! partial augmentations are tracked as separate variables tagged with `m`,
//! so `χ(u^d) = Σ_h χ(h) ν_h^{[m]}` and the `d`-th trace term of `μ_l`
//! contributes `Tr_{Q(ζ_m)/Q}(χ(h) ζ_m^{-l})` to the coefficient of
//! `ν_h^{[m]}`. The `d = k` term is the constant `χ(1)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::chartable::{CharTable, Character, CharacterKind};
use crate::cyclotomic::{CycError, Rational};
use crate::numtheory::{divisors, isqrt};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("character {character} has no value on class {class}")]
    MissingValue { character: String, class: String },
    #[error("{p}-Brauer character {character} cannot be used for order {k}")]
    BrauerPrimeDividesOrder { character: String, p: u64, k: u64 },
    #[error("fixed value for unknown class {class} at order {tag}")]
    BadChainEntry { tag: u64, class: String },
    #[error(transparent)]
    Cyclotomic(#[from] CycError),
}

/// Partial augmentation of the power of `u` with order `order_tag`, on `class`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PaVar {
    pub order_tag: u64,
    pub class: String,
}

impl PaVar {
    pub fn new(order_tag: u64, class: impl Into<String>) -> Self {
        PaVar {
            order_tag,
            class: class.into(),
        }
    }
}

impl fmt::Display for PaVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.class, self.order_tag)
    }
}

/// `constant + Σ coeff · var` with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearForm {
    pub constant: Rational,
    terms: BTreeMap<PaVar, Rational>,
}

impl LinearForm {
    pub fn constant(c: Rational) -> Self {
        LinearForm {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(v: PaVar) -> Self {
        let mut f = LinearForm::default();
        f.add_term(v, Rational::one());
        f
    }

    pub fn terms(&self) -> &BTreeMap<PaVar, Rational> {
        &self.terms
    }

    pub fn coefficient(&self, v: &PaVar) -> Rational {
        self.terms.get(v).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, v: PaVar, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&v) {
            Some(e) => {
                *e += c;
                if e.is_zero() {
                    self.terms.remove(&v);
                }
            }
            None => {
                self.terms.insert(v, c);
            }
        }
    }

    pub fn add(&self, other: &LinearForm) -> LinearForm {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (v, c) in &other.terms {
            out.add_term(v.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, q: &Rational) -> LinearForm {
        if q.is_zero() {
            return LinearForm::default();
        }
        LinearForm {
            constant: &self.constant * q,
            terms: self.terms.iter().map(|(v, c)| (v.clone(), c * q)).collect(),
        }
    }

    /// Replace `v` by `f` everywhere.
    pub fn substitute(&self, v: &PaVar, f: &LinearForm) -> LinearForm {
        match self.terms.get(v) {
            None => self.clone(),
            Some(c) => {
                let mut rest = self.clone();
                rest.terms.remove(v);
                rest.add(&f.scale(c))
            }
        }
    }

    /// Value at an assignment; `None` if a variable is unassigned.
    pub fn eval<F>(&self, mut value: F) -> Option<Rational>
    where
        F: FnMut(&PaVar) -> Option<BigInt>,
    {
        let mut acc = self.constant.clone();
        for (v, c) in &self.terms {
            acc += c * Rational::from_integer(value(v)?);
        }
        Some(acc)
    }

    /// Use `Σ_{v ∈ group} v = 1` to eliminate the last variable of every group.
    pub fn eliminate_augmentation(&self, groups: &[Vec<PaVar>]) -> LinearForm {
        let mut out = self.clone();
        for g in groups {
            if let Some((last, rest)) = g.split_last() {
                let mut repl = LinearForm::constant(Rational::one());
                for v in rest {
                    repl.add_term(v.clone(), -Rational::one());
                }
                out = out.substitute(last, &repl);
            }
        }
        out
    }

    /// Least common multiple of all coefficient denominators.
    pub fn denominator(&self) -> BigInt {
        self.terms
            .values()
            .chain(std::iter::once(&self.constant))
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }
}

fn fmt_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            let (neg, abs) = (c.is_negative(), c.abs());
            match (first, neg) {
                (true, true) => f.write_str("-")?,
                (false, true) => f.write_str(" - ")?,
                (false, false) => f.write_str(" + ")?,
                (true, false) => {}
            }
            if abs.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{}*{v}", fmt_rational(&abs))?;
            }
            first = false;
        }
        if first {
            return f.write_str(&fmt_rational(&self.constant));
        }
        if !self.constant.is_zero() {
            let sign = if self.constant.is_negative() {
                " - "
            } else {
                " + "
            };
            write!(f, "{sign}{}", fmt_rational(&self.constant.abs()))?;
        }
        Ok(())
    }
}

/// `0 ≤ form ≤ upper` and `form ≡ 0 (mod modulus)`, where `form / modulus = μ_l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuConstraint {
    pub form: LinearForm,
    pub modulus: u64,
    pub upper: BigInt,
    pub character: String,
    pub kind: CharacterKind,
    pub l: u64,
}

impl MuConstraint {
    /// Exact check at a full assignment.
    pub fn holds<F>(&self, value: F) -> Option<bool>
    where
        F: FnMut(&PaVar) -> Option<BigInt>,
    {
        let v = self.form.eval(value)?;
        if !v.is_integer() {
            return Some(false);
        }
        let n = v.to_integer();
        Some(!n.is_negative() && n <= self.upper && n.is_multiple_of(&BigInt::from(self.modulus)))
    }

    /// `μ_l` itself, i.e. the form divided by the modulus.
    pub fn mu(&self) -> LinearForm {
        self.form
            .scale(&Rational::new(BigInt::one(), BigInt::from(self.modulus)))
    }
}

impl fmt::Display for MuConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mu_{}(u, {}, {}) = 1/{} ({}) in [0, {}]",
            self.l,
            self.character,
            self.kind.tag(),
            self.modulus,
            self.form,
            &self.upper / BigInt::from(self.modulus)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateOrder {
    pub order: u64,
    pub in_spectrum: bool,
}

/// Every divisor `> 1` of the exponent, flagged by membership in the spectrum.
pub fn candidate_orders(t: &CharTable) -> Vec<CandidateOrder> {
    let spec = t.spectrum();
    divisors(t.exponent())
        .into_iter()
        .filter(|&d| d > 1)
        .map(|order| CandidateOrder {
            order,
            in_spectrum: spec.contains(&order),
        })
        .collect()
}

/// Variables for a unit of order `k`: non-identity classes whose element order divides `k`.
pub fn variable_layout(t: &CharTable, k: u64) -> Vec<PaVar> {
    t.classes
        .iter()
        .skip(1)
        .filter(|c| k.is_multiple_of(c.order))
        .map(|c| PaVar::new(k, c.name.clone()))
        .collect()
}

/// The augmentation equation `Σ ν = 1` over a layout.
pub fn augmentation_form(vars: &[PaVar]) -> LinearForm {
    let mut f = LinearForm::constant(-Rational::one());
    for v in vars {
        f.add_term(v.clone(), Rational::one());
    }
    f
}

/// How the powers `u^d` of a unit enter its constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainEntry {
    /// Partial augmentations of the power are free variables.
    Vars,
    /// Partial augmentations of the power are known: `(class, value)`.
    Fixed(Vec<(String, i64)>),
}

pub type Chain = BTreeMap<u64, ChainEntry>;

fn check_usable(ch: &Character, k: u64) -> Result<(), LpError> {
    if let CharacterKind::Brauer(p) = ch.kind {
        if k.is_multiple_of(p) {
            return Err(LpError::BrauerPrimeDividesOrder {
                character: ch.id.clone(),
                p,
                k,
            });
        }
    }
    Ok(())
}

fn value_at<'a>(
    t: &CharTable,
    ch: &'a Character,
    class: &str,
) -> Result<&'a crate::CycInt, LpError> {
    let i = t.class_index(class).ok_or_else(|| LpError::MissingValue {
        character: ch.id.clone(),
        class: class.to_string(),
    })?;
    ch.value(i).ok_or_else(|| LpError::MissingValue {
        character: ch.id.clone(),
        class: class.to_string(),
    })
}

/// Numerator of `μ_l(u, χ)` for a unit of order `k`. Order tags missing
/// from `chain` are treated as [`ChainEntry::Vars`].
pub fn mu_form(
    t: &CharTable,
    ch: &Character,
    k: u64,
    l: u64,
    chain: &Chain,
) -> Result<MuConstraint, LpError> {
    check_usable(ch, k)?;
    let mut form = LinearForm::constant(Rational::from_integer(BigInt::from(ch.degree)));
    let neg_l = -((l % k) as i64);
    for d in divisors(k) {
        let m = k / d;
        if m == 1 {
            continue;
        }
        let entry = if m == k {
            &ChainEntry::Vars
        } else {
            chain.get(&m).unwrap_or(&ChainEntry::Vars)
        };
        match entry {
            ChainEntry::Vars => {
                for v in variable_layout(t, m) {
                    let x = value_at(t, ch, &v.class)?;
                    let c = x.trace_times_root(m, neg_l)?;
                    form.add_term(v, Rational::from_integer(c));
                }
            }
            ChainEntry::Fixed(vals) => {
                for (class, n) in vals {
                    match t.class(class) {
                        Some(c) if m.is_multiple_of(c.order) && c.order > 1 => {}
                        _ => {
                            return Err(LpError::BadChainEntry {
                                tag: m,
                                class: class.clone(),
                            })
                        }
                    }
                    if *n == 0 {
                        continue;
                    }
                    let x = value_at(t, ch, class)?;
                    let c = x.trace_times_root(m, neg_l)?;
                    form.constant += Rational::from_integer(c * BigInt::from(*n));
                }
            }
        }
    }
    Ok(MuConstraint {
        form,
        modulus: k,
        upper: BigInt::from(k) * BigInt::from(ch.degree),
        character: ch.id.clone(),
        kind: ch.kind,
        l,
    })
}

/// A character family left out of a generated system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipNotice {
    pub character: String,
    pub reason: LpError,
}

#[derive(Debug, Clone, Default)]
pub struct Generated {
    pub constraints: Vec<MuConstraint>,
    pub skipped: Vec<SkipNotice>,
}

/// All `μ_l`, `0 ≤ l < k`, for every usable character (optionally only the named ones).
///
/// Characters that lack a needed value or whose Brauer prime divides `k`
/// are skipped and reported, never an error.
pub fn generate(t: &CharTable, k: u64, chain: &Chain, only: Option<&[String]>) -> Generated {
    let mut out = Generated::default();
    for ch in &t.characters {
        if let Some(names) = only {
            if !names.iter().any(|n| n == &ch.id) {
                continue;
            }
        }
        for l in 0..k {
            match mu_form(t, ch, k, l, chain) {
                Ok(c) => out.constraints.push(c),
                Err(reason) => {
                    log::info!("skipping {} at order {k}: {reason}", ch.id);
                    out.skipped.push(SkipNotice {
                        character: ch.id.clone(),
                        reason,
                    });
                    break;
                }
            }
        }
    }
    out
}

/// Box bound from `ν² ≤ |C|`, or `None` when the class size is unknown.
pub fn hlp_bound(t: &CharTable, v: &PaVar) -> Option<(i64, i64)> {
    let size = t.class(&v.class)?.size?;
    let r = isqrt(size as u128).to_i64()?;
    Some((-r, r))
}

pub fn hlp_bounds(t: &CharTable, vars: &[PaVar]) -> Vec<Option<(i64, i64)>> {
    vars.iter().map(|v| hlp_bound(t, v)).collect()
}

/// `Σ ν²/|C| ≤ 1` over the top-order variables; `None` if some size is unknown.
pub fn hlp_quadratic_ok(t: &CharTable, vars: &[PaVar], values: &[i64]) -> Option<bool> {
    let mut acc = Rational::zero();
    for (v, &x) in vars.iter().zip(values) {
        let size = t.class(&v.class)?.size?;
        acc += Rational::new(BigInt::from(x) * BigInt::from(x), BigInt::from(size));
    }
    Some(acc <= Rational::one())
}

/// True when exactly one partial augmentation is nonzero for every power.
pub fn classify_rational<'a, I>(chain: I) -> bool
where
    I: IntoIterator<Item = &'a [i64]>,
{
    chain
        .into_iter()
        .all(|tuple| tuple.iter().filter(|&&x| x != 0).count() == 1)
}
