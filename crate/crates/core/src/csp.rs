//! Complete integer enumeration for systems of `μ_l` constraints, plus the
//! divisor chaining that links a unit to its powers.
//!
//! Every constraint is compiled to an integer row
//! `lo ≤ Σ a_i x_i + c ≤ hi`, `Σ a_i x_i + c ≡ 0 (mod m)`.
//! Finite boxes come from given bounds and, failing those, from inverting a
//! full-rank set of rows. The search is depth-first with interval
//! propagation at every node.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::chartable::CharTable;
use crate::cyclotomic::Rational;
use crate::lp::{
    self, augmentation_form, variable_layout, Chain, LinearForm, MuConstraint, PaVar, SkipNotice,
};
use crate::numtheory::divisors;

pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("variable {0} has no finite bound")]
    UnboundedVariable(String),
    #[error("search budget of {0} nodes exceeded")]
    BudgetExceeded(u64),
    #[error("coefficient too large for the integer engine")]
    Overflow,
    #[error("solution {0} fails re-verification")]
    Verification(String),
    #[error("constraint refers to undeclared variable {0}")]
    UndeclaredVariable(String),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
}

/// A finite-domain integer feasibility problem over partial augmentations.
#[derive(Debug, Clone)]
pub struct CspInstance {
    pub vars: Vec<PaVar>,
    /// Known box per variable; `None` means derive it from the constraints.
    pub bounds: Vec<Option<(i64, i64)>>,
    pub constraints: Vec<MuConstraint>,
    /// Each form must vanish.
    pub equalities: Vec<LinearForm>,
    /// Class sizes for the `Σ ν²/|C| ≤ 1` filter on the top-order variables.
    pub class_sizes: Vec<Option<u64>>,
    pub top_tag: u64,
    pub budget: u64,
}

impl CspInstance {
    pub fn new(vars: Vec<PaVar>, top_tag: u64) -> Self {
        let n = vars.len();
        CspInstance {
            vars,
            bounds: vec![None; n],
            constraints: Vec::new(),
            equalities: Vec::new(),
            class_sizes: vec![None; n],
            top_tag,
            budget: DEFAULT_BUDGET,
        }
    }

    /// Add `Σ ν = 1` for every order tag present.
    pub fn add_augmentation_equalities(&mut self) {
        let mut groups: BTreeMap<u64, Vec<PaVar>> = BTreeMap::new();
        for v in &self.vars {
            groups.entry(v.order_tag).or_default().push(v.clone());
        }
        for g in groups.values() {
            self.equalities.push(augmentation_form(g));
        }
    }

    fn index(&self) -> HashMap<&PaVar, usize> {
        self.vars.iter().enumerate().map(|(i, v)| (v, i)).collect()
    }

    fn compile(&self) -> Result<Model, SolveError> {
        let idx = self.index();
        let mut rows = Vec::new();
        let convert = |f: &LinearForm,
                       scale: &BigInt|
         -> Result<(Vec<(usize, i128)>, i128), SolveError> {
            let mut terms = Vec::new();
            for (v, c) in f.terms() {
                let i = *idx
                    .get(v)
                    .ok_or_else(|| SolveError::UndeclaredVariable(v.to_string()))?;
                terms.push((
                    i,
                    to_i128(&(c * Rational::from_integer(scale.clone())).to_integer())?,
                ));
            }
            let c = to_i128(&(&f.constant * Rational::from_integer(scale.clone())).to_integer())?;
            Ok((terms, c))
        };
        for mc in &self.constraints {
            let d = mc.form.denominator();
            let (terms, c) = convert(&mc.form, &d)?;
            rows.push(Row {
                terms,
                c,
                lo: 0,
                hi: to_i128(&(&mc.upper * &d))?,
                m: to_i128(&(BigInt::from(mc.modulus) * &d))?,
            });
        }
        for eq in &self.equalities {
            let d = eq.denominator();
            let (terms, c) = convert(eq, &d)?;
            rows.push(Row {
                terms,
                c,
                lo: 0,
                hi: 0,
                m: 1,
            });
        }
        Ok(Model::new(self.vars.len(), rows))
    }

    /// Exact check of a full assignment against every constraint.
    pub fn check(&self, values: &[i64]) -> bool {
        let idx = self.index();
        let get = |v: &PaVar| idx.get(v).map(|&i| BigInt::from(values[i]));
        self.constraints.iter().all(|c| c.holds(get) == Some(true))
            && self
                .equalities
                .iter()
                .all(|e| e.eval(get).map(|x| x.is_zero()) == Some(true))
    }

    fn quadratic_ok(&self, values: &[i64]) -> bool {
        let top: Vec<(usize, u64)> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.order_tag == self.top_tag)
            .filter_map(|(i, _)| self.class_sizes[i].map(|s| (i, s)))
            .collect();
        let n_top = self
            .vars
            .iter()
            .filter(|v| v.order_tag == self.top_tag)
            .count();
        if top.len() < n_top || top.is_empty() {
            return true;
        }
        let mut acc = Rational::zero();
        for (i, s) in top {
            acc += Rational::new(BigInt::from(values[i]).pow(2), BigInt::from(s));
        }
        acc <= Rational::one()
    }

    fn split(&self, values: &[i64]) -> PaSolution {
        let mut top = Vec::new();
        let mut chain: BTreeMap<u64, Vec<i64>> = BTreeMap::new();
        for (v, &x) in self.vars.iter().zip(values) {
            if v.order_tag == self.top_tag {
                top.push(x);
            } else {
                chain.entry(v.order_tag).or_default().push(x);
            }
        }
        PaSolution { values: top, chain }
    }
}

fn to_i128(x: &BigInt) -> Result<i128, SolveError> {
    x.to_i128()
        .filter(|v| v.abs() < (1i128 << 100))
        .ok_or(SolveError::Overflow)
}

/// Terms, constant and modulus of a row; equal keys are merged.
type RowKey = (Vec<(usize, i128)>, i128, i128);
/// Terms, constant, modulus and upper bound; modulus 0 marks an equality.
type RationalRow = (Vec<(usize, Rational)>, Rational, BigInt, BigInt);
/// Tuple of each power, by order tag.
type ChainMap = BTreeMap<u64, Vec<i64>>;

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, i128)>,
    c: i128,
    lo: i128,
    hi: i128,
    m: i128,
}

#[derive(Debug, Clone)]
struct Model {
    n: usize,
    rows: Vec<Row>,
}

/// Result of bound propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Propagation {
    Tightened(Vec<(i64, i64)>),
    Contradiction,
}

fn floor_div(a: i128, b: i128) -> i128 {
    Integer::div_floor(&a, &b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -Integer::div_floor(&-a, &b)
}

fn mod_inv(a: i128, m: i128) -> i128 {
    let e = a.extended_gcd(&m);
    e.x.rem_euclid(m)
}

impl Model {
    /// Canonicalise signs and merge rows with the same linear part.
    fn new(n: usize, rows: Vec<Row>) -> Model {
        let mut merged: HashMap<RowKey, (i128, i128)> = HashMap::new();
        let mut order = Vec::new();
        let mut infeasible = false;
        for mut r in rows {
            r.terms.retain(|t| t.1 != 0);
            r.terms.sort_unstable();
            if r.terms.is_empty() {
                infeasible |= r.c < r.lo || r.c > r.hi || (r.m > 1 && r.c.rem_euclid(r.m) != 0);
                continue;
            }
            if r.terms[0].1 < 0 {
                for t in r.terms.iter_mut() {
                    t.1 = -t.1;
                }
                r.c = -r.c;
                (r.lo, r.hi) = (-r.hi, -r.lo);
            }
            let key = (r.terms, r.c, r.m.max(1));
            match merged.get_mut(&key) {
                Some(b) => *b = (b.0.max(r.lo), b.1.min(r.hi)),
                None => {
                    order.push(key.clone());
                    merged.insert(key, (r.lo, r.hi));
                }
            }
        }
        let mut rows: Vec<Row> = order
            .into_iter()
            .map(|key| {
                let (lo, hi) = merged[&key];
                Row {
                    terms: key.0,
                    c: key.1,
                    lo,
                    hi,
                    m: key.2,
                }
            })
            .collect();
        if infeasible {
            rows.push(Row {
                terms: Vec::new(),
                c: 1,
                lo: 0,
                hi: 0,
                m: 1,
            });
        }
        Model { n, rows }
    }

    /// Tighten `b` in place; `false` on contradiction.
    fn propagate(&self, b: &mut [(i128, i128)]) -> bool {
        let mut changed = true;
        let mut passes = 0;
        while changed && passes < 10_000 {
            changed = false;
            passes += 1;
            for r in &self.rows {
                let mut smin = r.c;
                let mut smax = r.c;
                let mut free = None;
                let mut n_free = 0;
                for &(i, a) in &r.terms {
                    let (l, u) = b[i];
                    if a > 0 {
                        smin += a * l;
                        smax += a * u;
                    } else {
                        smin += a * u;
                        smax += a * l;
                    }
                    if l < u {
                        n_free += 1;
                        free = Some((i, a));
                    }
                }
                if smin > r.hi || smax < r.lo {
                    return false;
                }
                if n_free == 0 {
                    if r.m > 1 && smin.rem_euclid(r.m) != 0 {
                        return false;
                    }
                    continue;
                }
                for &(i, a) in &r.terms {
                    let (l, u) = b[i];
                    if l == u {
                        continue;
                    }
                    let (mi, ma) = if a > 0 {
                        (a * l, a * u)
                    } else {
                        (a * u, a * l)
                    };
                    let lo = r.lo - (smax - ma);
                    let hi = r.hi - (smin - mi);
                    let (nl, nu) = if a > 0 {
                        (ceil_div(lo, a), floor_div(hi, a))
                    } else {
                        (ceil_div(hi, a), floor_div(lo, a))
                    };
                    let nl = nl.max(l);
                    let nu = nu.min(u);
                    if nl > nu {
                        return false;
                    }
                    if (nl, nu) != (l, u) {
                        b[i] = (nl, nu);
                        changed = true;
                    }
                }
                if n_free == 1 && r.m > 1 {
                    let (i, a) = free.unwrap();
                    let (l, u) = b[i];
                    if l == u {
                        continue;
                    }
                    let rest: i128 = r.c
                        + r.terms
                            .iter()
                            .filter(|&&(j, _)| j != i)
                            .map(|&(j, aj)| aj * b[j].0)
                            .sum::<i128>();
                    let rhs = (-rest).rem_euclid(r.m);
                    let g = a.gcd(&r.m);
                    if rhs % g != 0 {
                        return false;
                    }
                    let m2 = r.m / g;
                    let x0 = if m2 == 1 {
                        0
                    } else {
                        ((rhs / g) % m2 * mod_inv((a / g).rem_euclid(m2), m2)).rem_euclid(m2)
                    };
                    let nl = l + (x0 - l).rem_euclid(m2);
                    let nu = u - (u - x0).rem_euclid(m2);
                    if nl > nu {
                        return false;
                    }
                    if (nl, nu) != (l, u) {
                        b[i] = (nl, nu);
                        changed = true;
                    }
                }
            }
        }
        true
    }

    /// Raise each lower bound and lower each upper bound while the end value
    /// alone propagates to a contradiction; `false` if a domain empties.
    fn shave(&self, b: &mut [(i128, i128)]) -> bool {
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..b.len() {
                while b[i].0 < b[i].1 {
                    let mut probe = b.to_vec();
                    probe[i].1 = probe[i].0;
                    if self.propagate(&mut probe) {
                        break;
                    }
                    b[i].0 += 1;
                    changed = true;
                }
                while b[i].0 < b[i].1 {
                    let mut probe = b.to_vec();
                    probe[i].0 = probe[i].1;
                    if self.propagate(&mut probe) {
                        break;
                    }
                    b[i].1 -= 1;
                    changed = true;
                }
            }
            if changed && !self.propagate(b) {
                return false;
            }
        }
        true
    }

    fn satisfied(&self, x: &[i128]) -> bool {
        self.rows.iter().all(|r| {
            let s = r.c + r.terms.iter().map(|&(i, a)| a * x[i]).sum::<i128>();
            s >= r.lo && s <= r.hi && (r.m <= 1 || s.rem_euclid(r.m) == 0)
        })
    }
}

/// Derive a finite box from the rows alone, by inverting a full-rank subset
/// chosen greedily: equalities first, then rows with the narrowest range.
fn preliminary_box(
    model: &Model,
    given: &[Option<(i64, i64)>],
    names: &[PaVar],
) -> Result<Vec<(i128, i128)>, SolveError> {
    let n = model.n;
    struct Cand {
        coeffs: Vec<Rational>,
        lo: Rational,
        hi: Rational,
        range: i128,
    }
    let mut cands: Vec<Cand> = Vec::new();
    for r in &model.rows {
        if r.terms.is_empty() {
            continue;
        }
        let mut coeffs = vec![Rational::zero(); n];
        for &(i, a) in &r.terms {
            coeffs[i] += Rational::from_integer(BigInt::from(a));
        }
        cands.push(Cand {
            coeffs,
            lo: Rational::from_integer(BigInt::from(r.lo - r.c)),
            hi: Rational::from_integer(BigInt::from(r.hi - r.c)),
            range: r.hi - r.lo,
        });
    }
    for (i, g) in given.iter().enumerate() {
        if let Some((l, u)) = g {
            let mut coeffs = vec![Rational::zero(); n];
            coeffs[i] = Rational::one();
            cands.push(Cand {
                coeffs,
                lo: Rational::from_integer(BigInt::from(*l)),
                hi: Rational::from_integer(BigInt::from(*u)),
                range: (*u as i128) - (*l as i128),
            });
        }
    }
    cands.sort_by_key(|c| c.range);

    // incremental row echelon form to test independence
    let mut echelon: Vec<(usize, Vec<Rational>)> = Vec::new();
    let reduce = |ech: &[(usize, Vec<Rational>)], v: &[Rational]| -> Vec<Rational> {
        let mut v = v.to_vec();
        for (p, row) in ech {
            if !v[*p].is_zero() {
                let f = &v[*p] / &row[*p];
                for j in 0..v.len() {
                    let d = &f * &row[j];
                    v[j] -= d;
                }
            }
        }
        v
    };
    let mut chosen = Vec::new();
    for (ci, c) in cands.iter().enumerate() {
        if chosen.len() == n {
            break;
        }
        let v = reduce(&echelon, &c.coeffs);
        if let Some(p) = v.iter().position(|x| !x.is_zero()) {
            echelon.push((p, v));
            chosen.push(ci);
        }
    }
    if chosen.len() < n {
        for (j, name) in names.iter().enumerate() {
            let mut e = vec![Rational::zero(); n];
            e[j] = Rational::one();
            if reduce(&echelon, &e).iter().any(|x| !x.is_zero()) {
                return Err(SolveError::UnboundedVariable(name.to_string()));
            }
        }
        unreachable!("rank deficiency without an unbounded variable");
    }

    // invert the chosen n×n matrix by Gauss-Jordan
    let mut a: Vec<Vec<Rational>> = chosen.iter().map(|&i| cands[i].coeffs.clone()).collect();
    let mut inv: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero()).expect("full rank");
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    let (x, y) = (&f * &a[col][j], &f * &inv[col][j]);
                    a[r][j] -= x;
                    inv[r][j] -= y;
                }
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for row in inv.iter() {
        let mut lo = Rational::zero();
        let mut hi = Rational::zero();
        for (k, &ci) in chosen.iter().enumerate() {
            let w = &row[k];
            if w.is_positive() {
                lo += w * &cands[ci].lo;
                hi += w * &cands[ci].hi;
            } else if w.is_negative() {
                lo += w * &cands[ci].hi;
                hi += w * &cands[ci].lo;
            }
        }
        let l = to_i128(&lo.ceil().to_integer())?;
        let u = to_i128(&hi.floor().to_integer())?;
        out.push((l, u));
    }
    for (i, g) in given.iter().enumerate() {
        if let Some((l, u)) = g {
            out[i].0 = out[i].0.max(*l as i128);
            out[i].1 = out[i].1.min(*u as i128);
        }
    }
    Ok(out)
}

/// Tighten the box of an instance once, without search.
pub fn propagate(inst: &CspInstance, bounds: &[(i64, i64)]) -> Result<Propagation, SolveError> {
    if bounds.iter().any(|(l, u)| l > u) {
        return Ok(Propagation::Contradiction);
    }
    let mut boxed = inst.clone();
    boxed.bounds = bounds.iter().map(|&b| Some(b)).collect();
    // equalities are substituted first, so they tighten like any other row
    let Some(pre) = presolve(&boxed) else {
        return Ok(Propagation::Contradiction);
    };
    let model = pre.inst.compile()?;
    let mut b: Vec<(i128, i128)> = pre
        .inst
        .bounds
        .iter()
        .map(|x| {
            let (l, u) = x.expect("every variable is boxed");
            (l as i128, u as i128)
        })
        .collect();
    if !model.propagate(&mut b) {
        return Ok(Propagation::Contradiction);
    }
    let kept: HashMap<&PaVar, usize> = pre
        .inst
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let mut out = Vec::with_capacity(inst.vars.len());
    for (i, v) in inst.vars.iter().enumerate() {
        let (l, u) = match kept.get(v) {
            Some(&j) => (b[j].0 as i64, b[j].1 as i64),
            None => {
                let f = &pre.elim.iter().find(|(w, _)| w == v).expect("eliminated").1;
                let mut lo = f.constant.clone();
                let mut hi = f.constant.clone();
                for (w, c) in f.terms() {
                    let (wl, wu) = b[kept[w]];
                    let (a, z) = (
                        c * Rational::from_integer(BigInt::from(wl)),
                        c * Rational::from_integer(BigInt::from(wu)),
                    );
                    if c.is_positive() {
                        lo += a;
                        hi += z;
                    } else {
                        lo += z;
                        hi += a;
                    }
                }
                let l = lo
                    .ceil()
                    .to_integer()
                    .to_i64()
                    .ok_or(SolveError::Overflow)?;
                let u = hi
                    .floor()
                    .to_integer()
                    .to_i64()
                    .ok_or(SolveError::Overflow)?;
                (l.max(bounds[i].0), u.min(bounds[i].1))
            }
        };
        if l > u {
            return Ok(Propagation::Contradiction);
        }
        out.push((l, u));
    }
    Ok(Propagation::Tightened(out))
}

/// The finite search box of an instance after preliminary derivation and propagation.
pub fn search_box(inst: &CspInstance) -> Result<Option<Vec<(i64, i64)>>, SolveError> {
    let model = inst.compile()?;
    let mut b = preliminary_box(&model, &inst.bounds, &inst.vars)?;
    if b.iter().any(|(l, u)| l > u) || !model.propagate(&mut b) {
        return Ok(None);
    }
    Ok(Some(
        b.into_iter().map(|(l, u)| (l as i64, u as i64)).collect(),
    ))
}

const SHAVE_DEPTH: usize = usize::MAX;

struct Search<'a> {
    model: &'a Model,
    nodes: &'a AtomicU64,
    budget: u64,
    out: Vec<Vec<i128>>,
}

impl Search<'_> {
    fn run(&mut self, mut b: Vec<(i128, i128)>, depth: usize) -> Result<(), SolveError> {
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if n > self.budget {
            return Err(SolveError::BudgetExceeded(self.budget));
        }
        if !self.model.propagate(&mut b) || (depth < SHAVE_DEPTH && !self.model.shave(&mut b)) {
            return Ok(());
        }
        let pick = (0..b.len())
            .filter(|&i| b[i].0 < b[i].1)
            .min_by_key(|&i| (b[i].1 - b[i].0, i));
        match pick {
            None => {
                let x: Vec<i128> = b.iter().map(|p| p.0).collect();
                if self.model.satisfied(&x) {
                    self.out.push(x);
                }
            }
            Some(i) => {
                let (l, u) = b[i];
                for v in l..=u {
                    let mut c = b.clone();
                    c[i] = (v, v);
                    self.run(c, depth + 1)?;
                }
            }
        }
        Ok(())
    }
}

/// All integer solutions of an instance, sorted lexicographically in
/// declared variable order. Every solution is re-verified exactly.
pub fn solve(inst: &CspInstance) -> Result<Vec<PaSolution>, SolveError> {
    let nodes = AtomicU64::new(0);
    let raw = solve_raw(inst, &nodes)?;
    Ok(raw.iter().map(|x| inst.split(x)).collect())
}

/// An instance with one variable per unit-coefficient equality substituted away.
struct Presolved {
    inst: CspInstance,
    /// Eliminated variable and its value as a form over later survivors, in elimination order.
    elim: Vec<(PaVar, LinearForm)>,
}

fn presolve(inst: &CspInstance) -> Option<Presolved> {
    let mut constraints = inst.constraints.clone();
    let mut pending: Vec<LinearForm> = inst.equalities.clone();
    let mut kept_eq = Vec::new();
    let mut elim: Vec<(PaVar, LinearForm)> = Vec::new();
    while let Some(e) = pending.pop() {
        if e.terms().is_empty() {
            if e.constant.is_zero() {
                continue;
            }
            return None;
        }
        let pivot = e
            .terms()
            .iter()
            .rev()
            .find(|(_, c)| c.is_integer() && c.to_integer().abs().is_one())
            .map(|(v, c)| (v.clone(), c.clone()));
        let Some((v, c)) = pivot else {
            kept_eq.push(e);
            continue;
        };
        let mut rest = e.clone();
        rest.add_term(v.clone(), -c.clone());
        let expr = rest.scale(&(-Rational::one() / c));
        for f in pending.iter_mut().chain(kept_eq.iter_mut()) {
            *f = f.substitute(&v, &expr);
        }
        for mc in constraints.iter_mut() {
            mc.form = mc.form.substitute(&v, &expr);
        }
        for (_, f) in elim.iter_mut() {
            *f = f.substitute(&v, &expr);
        }
        elim.push((v, expr));
    }
    let gone: Vec<&PaVar> = elim.iter().map(|(v, _)| v).collect();
    let mut out = CspInstance::new(Vec::new(), inst.top_tag);
    out.budget = inst.budget;
    for (i, v) in inst.vars.iter().enumerate() {
        if gone.contains(&v) {
            if let Some((l, u)) = inst.bounds[i] {
                let expr = &elim.iter().find(|(w, _)| w == v).unwrap().1;
                constraints.push(MuConstraint {
                    form: expr.add(&LinearForm::constant(Rational::from_integer(BigInt::from(
                        -l,
                    )))),
                    modulus: 1,
                    upper: BigInt::from(u) - BigInt::from(l),
                    character: format!("bound on {v}"),
                    kind: crate::CharacterKind::Ordinary,
                    l: 0,
                });
            }
        } else {
            out.vars.push(v.clone());
            out.bounds.push(inst.bounds[i]);
            out.class_sizes.push(inst.class_sizes[i]);
        }
    }
    out.constraints = constraints;
    out.equalities = kept_eq;
    Some(Presolved { inst: out, elim })
}

/// Exact rational re-check of full assignments against the distinct constraints.
struct Verifier {
    rows: Vec<RationalRow>,
}

impl Verifier {
    fn new(inst: &CspInstance) -> Verifier {
        let idx = inst.index();
        let mut rows: Vec<RationalRow> = Vec::new();
        let lin = |f: &LinearForm| -> Vec<(usize, Rational)> {
            f.terms().iter().map(|(v, c)| (idx[v], c.clone())).collect()
        };
        for c in &inst.constraints {
            let r = (
                lin(&c.form),
                c.form.constant.clone(),
                BigInt::from(c.modulus),
                c.upper.clone(),
            );
            if !rows.contains(&r) {
                rows.push(r);
            }
        }
        for e in &inst.equalities {
            rows.push((lin(e), e.constant.clone(), BigInt::zero(), BigInt::zero()));
        }
        Verifier { rows }
    }

    /// Constraint rows need `0 ≤ v ≤ upper`, `modulus | v`; equalities (modulus 0) need `v = 0`.
    fn holds(&self, x: &[i64]) -> bool {
        self.rows.iter().all(|(terms, c, m, upper)| {
            let mut v = c.clone();
            for (i, a) in terms {
                v += a * Rational::from_integer(BigInt::from(x[*i]));
            }
            if !v.is_integer() {
                return false;
            }
            let v = v.to_integer();
            if m.is_zero() {
                v.is_zero()
            } else {
                !v.is_negative() && &v <= upper && v.is_multiple_of(m)
            }
        })
    }
}

fn solve_raw(inst: &CspInstance, nodes: &AtomicU64) -> Result<Vec<Vec<i64>>, SolveError> {
    let Some(pre) = presolve(inst) else {
        return Ok(Vec::new());
    };
    let verifier = Verifier::new(inst);
    let pos: HashMap<&PaVar, usize> = pre
        .inst
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let slot: HashMap<&PaVar, usize> = inst.vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    // every eliminated variable as (slot, D, Σ a_j x_j + c) with x_j surviving
    let mut rebuild = Vec::new();
    for (v, f) in &pre.elim {
        let d = f.denominator();
        let scale = Rational::from_integer(d.clone());
        let mut terms = Vec::new();
        for (w, c) in f.terms() {
            let j = *pos.get(w).ok_or_else(|| {
                SolveError::Verification(format!("{v} depends on eliminated {w}"))
            })?;
            terms.push((j, to_i128(&(c * &scale).to_integer())?));
        }
        let c = to_i128(&(&f.constant * &scale).to_integer())?;
        rebuild.push((slot[v], to_i128(&d)?, terms, c));
    }
    let reduced = solve_reduced(&pre.inst, nodes)?;
    let mut sols = Vec::with_capacity(reduced.len());
    'next: for x in reduced {
        let mut full = vec![0i128; inst.vars.len()];
        for (j, v) in pre.inst.vars.iter().enumerate() {
            full[slot[v]] = x[j] as i128;
        }
        for (at, d, terms, c) in &rebuild {
            let num = c + terms.iter().map(|&(j, a)| a * x[j] as i128).sum::<i128>();
            if num % d != 0 {
                continue 'next;
            }
            full[*at] = num / d;
        }
        let full64: Vec<i64> = full
            .iter()
            .map(|&v| i64::try_from(v).map_err(|_| SolveError::Overflow))
            .collect::<Result<_, _>>()?;
        if !verifier.holds(&full64) {
            return Err(SolveError::Verification(fmt_tuple(&full64)));
        }
        if inst.quadratic_ok(&full64) {
            sols.push(full64);
        }
    }
    sols.sort();
    sols.dedup();
    Ok(sols)
}

fn solve_reduced(inst: &CspInstance, nodes: &AtomicU64) -> Result<Vec<Vec<i64>>, SolveError> {
    if inst.vars.is_empty() {
        return Ok(if inst.check(&[]) {
            vec![vec![]]
        } else {
            vec![]
        });
    }
    let model = inst.compile()?;
    let b = preliminary_box(&model, &inst.bounds, &inst.vars)?;
    if b.iter().any(|(l, u)| l > u) {
        return Ok(Vec::new());
    }
    let mut s = Search {
        model: &model,
        nodes,
        budget: inst.budget,
        out: Vec::new(),
    };
    s.run(b, 0)?;
    let mut sols: Vec<Vec<i64>> = Vec::with_capacity(s.out.len());
    for x in s.out {
        let x: Vec<i64> = x
            .into_iter()
            .map(|v| i64::try_from(v).map_err(|_| SolveError::Overflow))
            .collect::<Result<_, _>>()?;
        sols.push(x);
    }
    Ok(sols)
}

/// Exhaustive enumeration of a box; the reference the solver is tested against.
pub fn brute_force(inst: &CspInstance, bx: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if bx.iter().any(|(l, u)| l > u) {
        return out;
    }
    let mut x: Vec<i64> = bx.iter().map(|p| p.0).collect();
    loop {
        if inst.check(&x) && inst.quadratic_ok(&x) {
            out.push(x.clone());
        }
        let mut i = x.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if x[i] < bx[i].1 {
                x[i] += 1;
                for j in i + 1..x.len() {
                    x[j] = bx[j].0;
                }
                break;
            }
        }
    }
}

/// Canonical text form of a tuple, e.g. `(-9,-3,13)`.
pub fn fmt_tuple(x: &[i64]) -> String {
    let inner: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("({})", inner.join(","))
}

/// Partial augmentations of the top-order unit together with those of its powers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PaSolution {
    pub values: Vec<i64>,
    /// Order tag of each power `→` its tuple, in that order's layout.
    pub chain: BTreeMap<u64, Vec<i64>>,
}

impl PaSolution {
    /// True when every power has exactly one nonzero partial augmentation.
    pub fn is_rational(&self) -> bool {
        lp::classify_rational(
            std::iter::once(self.values.as_slice())
                .chain(self.chain.values().map(|v| v.as_slice())),
        )
    }

    pub fn canonical(&self) -> String {
        fmt_tuple(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// Powers are solver variables constrained by their own systems.
    #[default]
    Joint,
    /// Every admissible tuple of the powers is substituted in turn.
    CaseSplit,
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub mode: SolveMode,
    /// Restrict to these character ids.
    pub characters: Option<Vec<String>>,
    pub budget: u64,
    /// Apply class-size bounds where sizes are known.
    pub use_class_sizes: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            mode: SolveMode::Joint,
            characters: None,
            budget: DEFAULT_BUDGET,
            use_class_sizes: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub order: u64,
    /// Top-order variables, in the order of every `PaSolution::values`.
    pub vars: Vec<PaVar>,
    /// Layout of each power's tuple.
    pub chain_vars: BTreeMap<u64, Vec<PaVar>>,
    pub solutions: Vec<PaSolution>,
    pub skipped: Vec<SkipNotice>,
    pub nodes: u64,
}

impl ChainResult {
    /// Distinct top-order tuples, sorted.
    pub fn top_tuples(&self) -> Vec<Vec<i64>> {
        let mut v: Vec<Vec<i64>> = self.solutions.iter().map(|s| s.values.clone()).collect();
        v.dedup();
        v
    }

    pub fn all_rational(&self) -> bool {
        !self.solutions.is_empty() && self.solutions.iter().all(PaSolution::is_rational)
    }
}

struct Chainer<'a> {
    t: &'a CharTable,
    cfg: &'a ChainConfig,
    nodes: AtomicU64,
    skipped: Mutex<Vec<SkipNotice>>,
    memo: Mutex<HashMap<u64, Arc<Vec<ChainMap>>>>,
}

impl Chainer<'_> {
    fn base_instance(&self, k: u64, vars: Vec<PaVar>) -> CspInstance {
        let mut inst = CspInstance::new(vars, k);
        inst.budget = self.cfg.budget;
        if self.cfg.use_class_sizes {
            for (i, v) in inst.vars.iter().enumerate() {
                inst.bounds[i] = lp::hlp_bound(self.t, v);
                inst.class_sizes[i] = self.t.class(&v.class).and_then(|c| c.size);
            }
        }
        inst
    }

    fn remaining_budget(&self) -> u64 {
        self.cfg
            .budget
            .saturating_sub(self.nodes.load(Ordering::Relaxed))
    }

    fn generate(&self, k: u64, chain: &Chain) -> Vec<MuConstraint> {
        let g = lp::generate(self.t, k, chain, self.cfg.characters.as_deref());
        let mut sk = self.skipped.lock().unwrap();
        for s in g.skipped {
            if !sk.contains(&s) {
                sk.push(s);
            }
        }
        g.constraints
    }

    fn joint(&self, k: u64) -> Result<Vec<PaSolution>, SolveError> {
        let mut vars = variable_layout(self.t, k);
        let tags: Vec<u64> = divisors(k)
            .into_iter()
            .rev()
            .filter(|&m| m > 1 && m < k)
            .collect();
        for &m in &tags {
            vars.extend(variable_layout(self.t, m));
        }
        let mut inst = self.base_instance(k, vars);
        inst.budget = self.remaining_budget();
        for m in std::iter::once(k).chain(tags.iter().copied()) {
            inst.constraints.extend(self.generate(m, &Chain::new()));
        }
        inst.add_augmentation_equalities();
        let raw = solve_raw(&inst, &self.nodes)?;
        Ok(raw.iter().map(|x| inst.split(x)).collect())
    }

    /// Admissible `(tag → tuple)` maps for a unit of order `k`, all powers included.
    fn chains(&self, k: u64) -> Result<Arc<Vec<ChainMap>>, SolveError> {
        if let Some(c) = self.memo.lock().unwrap().get(&k) {
            return Ok(Arc::clone(c));
        }
        let sols = self.case_split(k)?;
        let maps: Vec<BTreeMap<u64, Vec<i64>>> = sols
            .into_iter()
            .map(|s| {
                let mut m = s.chain;
                m.insert(k, s.values);
                m
            })
            .collect();
        let arc = Arc::new(maps);
        self.memo.lock().unwrap().insert(k, Arc::clone(&arc));
        Ok(arc)
    }

    fn case_split(&self, k: u64) -> Result<Vec<PaSolution>, SolveError> {
        let maximal: Vec<u64> = divisors(k)
            .into_iter()
            .filter(|&m| m > 1 && m < k)
            .filter(|&m| crate::numtheory::is_prime(k / m))
            .collect();
        let mut combos: Vec<BTreeMap<u64, Vec<i64>>> = vec![BTreeMap::new()];
        for m in maximal {
            let sub = self.chains(m)?;
            let mut next = Vec::new();
            for partial in &combos {
                for c in sub.iter() {
                    if c.iter()
                        .all(|(tag, v)| partial.get(tag).is_none_or(|w| w == v))
                    {
                        let mut merged = partial.clone();
                        merged.extend(c.iter().map(|(a, b)| (*a, b.clone())));
                        next.push(merged);
                    }
                }
            }
            combos = next;
            if combos.is_empty() {
                return Ok(Vec::new());
            }
        }
        let vars = variable_layout(self.t, k);
        // one generation with the powers as variables; each case substitutes its values
        let mut base: Vec<MuConstraint> = Vec::new();
        for c in self.generate(k, &Chain::new()) {
            if !base
                .iter()
                .any(|b| b.form == c.form && b.modulus == c.modulus && b.upper == c.upper)
            {
                base.push(c);
            }
        }
        let layouts: BTreeMap<u64, Vec<PaVar>> = combos[0]
            .keys()
            .map(|&tag| (tag, variable_layout(self.t, tag)))
            .collect();
        // a case only moves the constants of the top-order rows, so cases with
        // equal constants share one system
        let chain_vars: Vec<(&PaVar, u64, usize)> = layouts
            .iter()
            .flat_map(|(&tag, vs)| vs.iter().enumerate().map(move |(i, v)| (v, tag, i)))
            .collect();
        let split: Vec<(LinearForm, Vec<Rational>)> = base
            .iter()
            .map(|c| {
                let mut top = c.form.clone();
                let mut coeffs = Vec::with_capacity(chain_vars.len());
                for (v, _, _) in &chain_vars {
                    let a = top.coefficient(v);
                    top.add_term((*v).clone(), -a.clone());
                    coeffs.push(a);
                }
                (top, coeffs)
            })
            .collect();
        let mut groups: HashMap<Vec<Rational>, Vec<usize>> = HashMap::new();
        let mut group_order = Vec::new();
        for (ci, combo) in combos.iter().enumerate() {
            let key: Vec<Rational> = split
                .iter()
                .map(|(top, coeffs)| {
                    let mut c = top.constant.clone();
                    for (a, (_, tag, i)) in coeffs.iter().zip(&chain_vars) {
                        c += a * Rational::from_integer(BigInt::from(combo[tag][*i]));
                    }
                    c
                })
                .collect();
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    group_order.push(key);
                    Vec::new()
                })
                .push(ci);
        }
        let solve_case = |key: &Vec<Rational>| -> Result<Vec<Vec<i64>>, SolveError> {
            let constraints = base
                .iter()
                .zip(&split)
                .zip(key)
                .map(|((c, (top, _)), k0)| {
                    let mut c = c.clone();
                    c.form = top.clone();
                    c.form.constant = k0.clone();
                    c
                })
                .collect();
            let mut inst = self.base_instance(k, vars.clone());
            inst.budget = self.remaining_budget();
            inst.constraints = constraints;
            inst.add_augmentation_equalities();
            solve_raw(&inst, &self.nodes)
        };
        // the first case runs alone so that structural errors surface before the fan-out
        let first = solve_case(&group_order[0])?;
        let mut results: Vec<Result<Vec<Vec<i64>>, SolveError>> = vec![Ok(first)];
        results.extend(
            group_order[1..]
                .par_iter()
                .map(solve_case)
                .collect::<Vec<_>>(),
        );
        let mut out = Vec::new();
        for (key, r) in group_order.iter().zip(results) {
            let tops = r?;
            for &ci in &groups[key] {
                out.extend(tops.iter().map(|x| PaSolution {
                    values: x.clone(),
                    chain: combos[ci].clone(),
                }));
            }
        }
        Ok(out)
    }
}

/// Admissible partial augmentations for units of order `k` and all their powers.
pub fn chain_solve(t: &CharTable, k: u64, cfg: &ChainConfig) -> Result<ChainResult, SolveError> {
    let ch = Chainer {
        t,
        cfg,
        nodes: AtomicU64::new(0),
        skipped: Mutex::new(Vec::new()),
        memo: Mutex::new(HashMap::new()),
    };
    let mut solutions = match cfg.mode {
        SolveMode::Joint => ch.joint(k)?,
        SolveMode::CaseSplit => ch.case_split(k)?,
    };
    if ch.nodes.load(Ordering::Relaxed) > cfg.budget {
        return Err(SolveError::BudgetExceeded(cfg.budget));
    }
    solutions.sort();
    solutions.dedup();
    let chain_vars = divisors(k)
        .into_iter()
        .filter(|&m| m > 1 && m < k)
        .map(|m| (m, variable_layout(t, m)))
        .collect();
    let mut skipped = ch.skipped.into_inner().unwrap();
    // arrival order depends on the mode and on threads
    skipped.sort_by_cached_key(|n| (n.character.clone(), n.reason.to_string()));
    Ok(ChainResult {
        order: k,
        vars: variable_layout(t, k),
        chain_vars,
        solutions,
        skipped,
        nodes: ch.nodes.load(Ordering::Relaxed),
    })
}
