//! Characters constant on the elements of two prime orders `s` and `t`, and
//! the two-variable systems they give for a unit of order `st` that has no
//! counterpart in the group.
//!
//! For such a unit only `ν_s` and `ν_t` can be nonzero, `ν_s + ν_t = 1`, and
//! `st · μ_l = m1 + ν_s ms + ν_t mt` with
//!
//! ```text
//! m1 = ξ(1) + ξ(C_t) T_t(-l) + ξ(C_s) T_s(-l)
//! ms = ξ(C_s) T_st(-l)
//! mt = ξ(C_t) T_st(-l)
//! ```
//!
//! where `T_n(j)` is the trace of `ζ_n^j` over `Q(ζ_n)`.

use std::fmt;
use std::time::{Duration, Instant};

use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::chartable::{CharTable, Character, CharacterKind};
use crate::cyclotomic::{root_trace, CycInt};
use crate::numtheory::is_prime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StError {
    #[error("character {character} has no value on class {class}")]
    MissingValue { character: String, class: String },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("the primes must be distinct")]
    EqualPrimes,
    #[error("the group has no class of order {0}")]
    NoClassOfOrder(u64),
    #[error("character {0} is not constant on the classes of orders s and t")]
    NotConstant(String),
    #[error("character {0} takes a non-integral value on the classes of order s or t")]
    NotIntegral(String),
    #[error("the group has elements of order {0}; nothing to rule out")]
    SpectrumOrder(u64),
    #[error("no constraint rows")]
    EmptyConstraintSet,
}

/// One row of `(m1, ms, mt)` data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StConstraintRow {
    /// Character id, or summand ids joined by `+`.
    pub label: String,
    pub s: u64,
    pub t: u64,
    pub xi_s: i64,
    pub xi_t: i64,
    pub l: u64,
    pub m1: i64,
    pub ms: i64,
    pub mt: i64,
}

impl StConstraintRow {
    /// Row for a character of the given degree and constant values.
    pub fn from_values(
        label: impl Into<String>,
        degree: i64,
        xi_s: i64,
        xi_t: i64,
        s: u64,
        t: u64,
        l: u64,
    ) -> Self {
        let j = -((l % (s * t)) as i64);
        let tr_st = root_trace(s * t, j);
        StConstraintRow {
            label: label.into(),
            s,
            t,
            xi_s,
            xi_t,
            l,
            m1: degree + xi_t * root_trace(t, j) + xi_s * root_trace(s, j),
            ms: xi_s * tr_st,
            mt: xi_t * tr_st,
        }
    }

    /// `st · μ_l` at `ν_s = nu`, `ν_t = 1 - nu`.
    pub fn value_at(&self, nu: i64) -> i128 {
        self.m1 as i128 + nu as i128 * self.ms as i128 + (1 - nu as i128) * self.mt as i128
    }

    /// Whether the row admits `ν_s = nu`.
    pub fn admits(&self, nu: i64) -> bool {
        let v = self.value_at(nu);
        v >= 0 && v % (self.s * self.t) as i128 == 0
    }
}

fn classes_of(t: &CharTable, order: u64) -> Result<Vec<usize>, StError> {
    let idx: Vec<usize> = t
        .classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.order == order)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(StError::NoClassOfOrder(order));
    }
    Ok(idx)
}

fn values_on<'a>(
    t: &CharTable,
    ch: &'a Character,
    classes: &[usize],
) -> Result<Vec<&'a CycInt>, StError> {
    classes
        .iter()
        .map(|&i| {
            ch.value(i).ok_or_else(|| StError::MissingValue {
                character: ch.id.clone(),
                class: t.classes[i].name.clone(),
            })
        })
        .collect()
}

fn check_primes(s: u64, t: u64) -> Result<(), StError> {
    for p in [s, t] {
        if !is_prime(p) {
            return Err(StError::NotPrime(p));
        }
    }
    if s == t {
        return Err(StError::EqualPrimes);
    }
    Ok(())
}

/// True iff `ch` takes one value on all classes of order `s` and one on all of order `t`.
pub fn is_st_constant(t: &CharTable, ch: &Character, s: u64, tt: u64) -> Result<bool, StError> {
    check_primes(s, tt)?;
    for order in [s, tt] {
        let vals = values_on(t, ch, &classes_of(t, order)?)?;
        if vals.windows(2).any(|w| w[0] != w[1]) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn constant_value(t: &CharTable, ch: &Character, order: u64) -> Result<i64, StError> {
    let vals = values_on(t, ch, &classes_of(t, order)?)?;
    if vals.windows(2).any(|w| w[0] != w[1]) {
        return Err(StError::NotConstant(ch.id.clone()));
    }
    vals[0]
        .to_integer()
        .and_then(|v| v.to_i64())
        .ok_or_else(|| StError::NotIntegral(ch.id.clone()))
}

/// The `(m1, ms, mt)` row of an `(s,t)`-constant character.
pub fn st_row(
    t: &CharTable,
    ch: &Character,
    s: u64,
    tt: u64,
    l: u64,
) -> Result<StConstraintRow, StError> {
    check_primes(s, tt)?;
    let xs = constant_value(t, ch, s)?;
    let xt = constant_value(t, ch, tt)?;
    Ok(StConstraintRow::from_values(
        ch.id.clone(),
        ch.degree as i64,
        xs,
        xt,
        s,
        tt,
        l,
    ))
}

/// Minimal zero-sum multisets over `items` with at most `max` members.
///
/// A returned multiset (as nondecreasing indices) sums to zero and no proper
/// nonempty sub-multiset does. Zero items only ever appear as singletons.
pub fn minimal_zero_sum_tuples(items: &[Vec<CycInt>], max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if items.is_empty() || max == 0 {
        return out;
    }
    let dim = items[0].len();
    let zero = vec![CycInt::zero(); dim];
    let is_zero = |v: &[CycInt]| v.iter().all(|x| x.is_zero());
    for (i, it) in items.iter().enumerate() {
        if is_zero(it) {
            out.push(vec![i]);
        }
    }
    let live: Vec<usize> = (0..items.len()).filter(|&i| !is_zero(&items[i])).collect();
    let mut stack: Vec<usize> = Vec::new();
    fn add(a: &[CycInt], b: &[CycInt]) -> Vec<CycInt> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }
    fn rec(
        items: &[Vec<CycInt>],
        live: &[usize],
        from: usize,
        sum: &[CycInt],
        stack: &mut Vec<usize>,
        max: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        for p in from..live.len() {
            let i = live[p];
            let s = add(sum, &items[i]);
            stack.push(i);
            if s.iter().all(|x| x.is_zero()) {
                if stack.len() > 1 && is_minimal(items, stack) {
                    out.push(stack.clone());
                }
            } else if stack.len() < max {
                rec(items, live, p, &s, stack, max, out);
            }
            stack.pop();
        }
    }
    rec(items, &live, 0, &zero, &mut stack, max, &mut out);
    out
}

fn is_minimal(items: &[Vec<CycInt>], multiset: &[usize]) -> bool {
    let n = multiset.len();
    for mask in 1u32..(1 << n) - 1 {
        let mut s: Option<Vec<CycInt>> = None;
        for (b, &i) in multiset.iter().enumerate() {
            if mask & (1 << b) != 0 {
                s = Some(match s {
                    None => items[i].clone(),
                    Some(acc) => acc.iter().zip(&items[i]).map(|(x, y)| x + y).collect(),
                });
            }
        }
        if s.is_some_and(|v| v.iter().all(|x| x.is_zero())) {
            return false;
        }
    }
    true
}

/// The per-summand difference vectors of an `(s,t)`-constant sum.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiffTuple(pub Vec<Vec<CycInt>>);

impl DiffTuple {
    /// Entries sorted descending when they are integers, for set comparison.
    pub fn canonical(&self) -> String {
        if self.0.iter().all(|v| v.len() == 1 && v[0].is_rational()) {
            let mut ints: Vec<i64> = self
                .0
                .iter()
                .filter_map(|v| v[0].to_integer().and_then(|x| x.to_i64()))
                .collect();
            ints.sort_unstable_by(|a, b| b.cmp(a));
            crate::csp::fmt_tuple(&ints)
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for DiffTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|v| {
                if v.len() == 1 {
                    v[0].to_string()
                } else {
                    let inner: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    format!("[{}]", inner.join(","))
                }
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A character sum constant on the classes of orders `s` and `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StCombination {
    /// Summand ids with multiplicity, in table order.
    pub members: Vec<String>,
    pub diffs: DiffTuple,
    pub degree: u64,
    pub xi_s: CycInt,
    pub xi_t: CycInt,
}

impl StCombination {
    pub fn label(&self) -> String {
        self.members.join("+")
    }

    /// Rows at every `l` in `[0, st)`.
    pub fn rows(&self, s: u64, t: u64) -> Result<Vec<StConstraintRow>, StError> {
        let int = |x: &CycInt| {
            x.to_integer()
                .and_then(|v| v.to_i64())
                .ok_or_else(|| StError::NotIntegral(self.label()))
        };
        let (xs, xt) = (int(&self.xi_s)?, int(&self.xi_t)?);
        Ok((0..s * t)
            .map(|l| {
                StConstraintRow::from_values(self.label(), self.degree as i64, xs, xt, s, t, l)
            })
            .collect())
    }
}

fn usable(ch: &Character, n: u64) -> bool {
    match ch.kind {
        CharacterKind::Ordinary => true,
        CharacterKind::Brauer(p) => !n.is_multiple_of(p),
    }
}

/// All minimal `(s,t)`-constant sums of at most `max_summands` characters.
///
/// Characters lacking a value on some class of order `s` or `t`, and
/// Brauer characters whose prime divides `st`, are not scanned.
pub fn find_st_combinations(
    t: &CharTable,
    s: u64,
    tt: u64,
    max_summands: usize,
) -> Result<Vec<StCombination>, StError> {
    check_primes(s, tt)?;
    let cs = classes_of(t, s)?;
    let ct = classes_of(t, tt)?;
    let mut chars = Vec::new();
    let mut items = Vec::new();
    for ch in &t.characters {
        if !usable(ch, s * tt) {
            continue;
        }
        let (Ok(vs), Ok(vt)) = (values_on(t, ch, &cs), values_on(t, ch, &ct)) else {
            continue;
        };
        let mut d: Vec<CycInt> = vs[1..].iter().map(|&x| vs[0] - x).collect();
        d.extend(vt[1..].iter().map(|&x| vt[0] - x));
        chars.push((ch, vs[0].clone(), vt[0].clone()));
        items.push(d);
    }
    let tuples = minimal_zero_sum_tuples(&items, max_summands);
    Ok(tuples
        .into_iter()
        .map(|ix| {
            let mut xi_s = CycInt::zero();
            let mut xi_t = CycInt::zero();
            let mut degree = 0;
            for &i in &ix {
                xi_s = &xi_s + &chars[i].1;
                xi_t = &xi_t + &chars[i].2;
                degree += chars[i].0.degree;
            }
            StCombination {
                members: ix.iter().map(|&i| chars[i].0.id.clone()).collect(),
                diffs: DiffTuple(ix.iter().map(|&i| items[i].clone()).collect()),
                degree,
                xi_s,
                xi_t,
            }
        })
        .collect())
}

/// Admissible values of `ν_s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Survivors {
    Finite {
        values: Vec<i64>,
    },
    /// `ν_s ≡ residue (mod modulus)` within optional bounds.
    Progression {
        residue: i64,
        modulus: i64,
        lo: Option<i64>,
        hi: Option<i64>,
    },
}

impl fmt::Display for Survivors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Survivors::Finite { values } => {
                let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
                write!(f, "{{{}}}", v.join(", "))
            }
            Survivors::Progression {
                residue,
                modulus,
                lo,
                hi,
            } => {
                write!(f, "{residue} mod {modulus}")?;
                match (lo, hi) {
                    (None, None) => Ok(()),
                    (Some(a), None) => write!(f, ", >= {a}"),
                    (None, Some(b)) => write!(f, ", <= {b}"),
                    (Some(a), Some(b)) => write!(f, ", in [{a}, {b}]"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// No admissible `ν_s`; `witness` indexes an irreducible infeasible subset of the rows.
    Infeasible {
        witness: Vec<usize>,
    },
    Feasible {
        survivors: Survivors,
    },
}

impl Verdict {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Verdict::Infeasible { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Infeasible { .. } => f.write_str("infeasible"),
            Verdict::Feasible { survivors } => write!(f, "feasible {survivors}"),
        }
    }
}

/// `ν_s` range and residue implied by a set of rows, or `None` if empty.
fn survivors(rows: &[&StConstraintRow]) -> Option<Survivors> {
    let mut lo: Option<i128> = None;
    let mut hi: Option<i128> = None;
    let (mut r, mut m) = (0i128, 1i128);
    for row in rows {
        let n = (row.s * row.t) as i128;
        let a = row.ms as i128 - row.mt as i128;
        let b = row.m1 as i128 + row.mt as i128;
        if a == 0 {
            if b < 0 || b % n != 0 {
                return None;
            }
            continue;
        }
        // a ν + b ≥ 0
        if a > 0 {
            let bound = Integer::div_ceil(&-b, &a);
            lo = Some(lo.map_or(bound, |x| x.max(bound)));
        } else {
            let bound = Integer::div_floor(&b, &-a);
            hi = Some(hi.map_or(bound, |x| x.min(bound)));
        }
        // a ν ≡ -b (mod n)
        let g = a.gcd(&n);
        let rhs = (-b).rem_euclid(n);
        if rhs % g != 0 {
            return None;
        }
        let mi = n / g;
        let inv = if mi == 1 {
            0
        } else {
            (a / g).rem_euclid(mi).extended_gcd(&mi).x.rem_euclid(mi)
        };
        let ri = (rhs / g % mi * inv).rem_euclid(mi);
        let mn = m.lcm(&mi);
        let x = (0..mn / m)
            .map(|k| r + k * m)
            .find(|x| x.rem_euclid(mi) == ri)?;
        r = x.rem_euclid(mn);
        m = mn;
    }
    if let (Some(a), Some(b)) = (lo, hi) {
        if a > b {
            return None;
        }
        let first = a + (r - a).rem_euclid(m);
        let values: Vec<i64> = (0..)
            .map(|k| first + k * m)
            .take_while(|&v| v <= b)
            .map(|v| v as i64)
            .collect();
        if values.is_empty() {
            return None;
        }
        return Some(Survivors::Finite { values });
    }
    Some(Survivors::Progression {
        residue: r as i64,
        modulus: m as i64,
        lo: lo.map(|x| x as i64),
        hi: hi.map(|x| x as i64),
    })
}

/// Solve `{ st μ_l ∈ st Z≥0 for all rows, ν_s + ν_t = 1 }`.
pub fn solve_rows(rows: &[StConstraintRow]) -> Result<Verdict, StError> {
    if rows.is_empty() {
        return Err(StError::EmptyConstraintSet);
    }
    let all: Vec<&StConstraintRow> = rows.iter().collect();
    if let Some(s) = survivors(&all) {
        return Ok(Verdict::Feasible { survivors: s });
    }
    // deletion filter down to an irreducible infeasible subset
    let mut keep: Vec<usize> = (0..rows.len()).collect();
    let mut i = 0;
    while i < keep.len() {
        let trial: Vec<&StConstraintRow> = keep
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &k)| &rows[k])
            .collect();
        if survivors(&trial).is_none() {
            keep.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(Verdict::Infeasible { witness: keep })
}

/// Which rows a rule-out uses.
#[derive(Debug, Clone)]
pub enum RowSelection {
    /// Every constant character and every minimal constant sum, at all `l`.
    Auto {
        max_summands: usize,
    },
    Explicit(Vec<StConstraintRow>),
}

impl Default for RowSelection {
    fn default() -> Self {
        RowSelection::Auto { max_summands: 5 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleOutReport {
    pub order: u64,
    pub s: u64,
    pub t: u64,
    pub rows: Vec<StConstraintRow>,
    #[serde(flatten)]
    pub verdict: Verdict,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl RuleOutReport {
    /// Rows that justify the verdict: the witness when infeasible, else all.
    pub fn justifying_rows(&self) -> Vec<&StConstraintRow> {
        match &self.verdict {
            Verdict::Infeasible { witness } => witness.iter().map(|&i| &self.rows[i]).collect(),
            Verdict::Feasible { .. } => self.rows.iter().collect(),
        }
    }

    /// Re-derive the verdict from the attached rows.
    pub fn recheck(&self) -> bool {
        match &self.verdict {
            Verdict::Infeasible { witness } => {
                let w: Vec<&StConstraintRow> = witness.iter().map(|&i| &self.rows[i]).collect();
                survivors(&w).is_none()
            }
            Verdict::Feasible { survivors: sv } => {
                let all: Vec<&StConstraintRow> = self.rows.iter().collect();
                survivors(&all).as_ref() == Some(sv)
            }
        }
    }

    /// Tabular rendering; `*` marks witness rows.
    pub fn render_table(&self) -> String {
        let header = [
            "|u|", "p", "q", "xi/tau", "xi(Cp)", "xi(Cq)", "l", "m1", "mp", "mq", "verdict",
        ];
        let witness: Vec<usize> = match &self.verdict {
            Verdict::Infeasible { witness } => witness.clone(),
            _ => Vec::new(),
        };
        let shown: Vec<usize> = if witness.is_empty() {
            (0..self.rows.len()).collect()
        } else {
            witness.clone()
        };
        let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for &i in &shown {
            let r = &self.rows[i];
            lines.push(vec![
                self.order.to_string(),
                self.s.to_string(),
                self.t.to_string(),
                r.label.clone(),
                r.xi_s.to_string(),
                r.xi_t.to_string(),
                r.l.to_string(),
                r.m1.to_string(),
                r.ms.to_string(),
                r.mt.to_string(),
                if witness.contains(&i) {
                    "*".into()
                } else {
                    String::new()
                },
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                lines
                    .iter()
                    .map(|l| l[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        match &self.verdict {
            Verdict::Infeasible { .. } => out.push_str(&format!(
                "verdict: infeasible, no unit of order {}\n",
                self.order
            )),
            Verdict::Feasible { survivors } => out.push_str(&format!(
                "verdict: feasible, nu_{} in {survivors}\n",
                self.s
            )),
        }
        out
    }
}

/// Try to exclude units of order `st` using `(s,t)`-constant characters.
pub fn rule_out_order(
    t: &CharTable,
    s: u64,
    tt: u64,
    rows: RowSelection,
) -> Result<RuleOutReport, StError> {
    let start = Instant::now();
    check_primes(s, tt)?;
    if t.spectrum().contains(&(s * tt)) {
        return Err(StError::SpectrumOrder(s * tt));
    }
    let rows = match rows {
        RowSelection::Explicit(r) => r,
        RowSelection::Auto { max_summands } => {
            let mut out = Vec::new();
            for comb in find_st_combinations(t, s, tt, max_summands)? {
                if let Ok(r) = comb.rows(s, tt) {
                    out.extend(r);
                }
            }
            out
        }
    };
    let verdict = solve_rows(&rows)?;
    Ok(RuleOutReport {
        order: s * tt,
        s,
        t: tt,
        rows,
        verdict,
        elapsed: start.elapsed(),
    })
}
