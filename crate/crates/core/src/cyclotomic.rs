//! Exact arithmetic in rings of cyclotomic integers `Z[ζ_n]`.
//!
//! A [`CycInt`] stores the residue of its exponent polynomial modulo the
//! `n`-th cyclotomic polynomial `Φ_n`, i.e. coordinates in the power basis
//! `1, ζ_n, …, ζ_n^{φ(n)-1}`. Every arithmetic result is brought down to its
//! minimal conductor, so rationality tests and equality are cheap.
//!
//! Values render and parse in the `E(n)^k` notation, e.g. `3*E(5)^2-E(5)`.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::{Arc, LazyLock, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numtheory::{factor, gcd, lcm, mobius, totient};

/// Exact rational numbers.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CycError {
    #[error("conductor {from} does not divide {to}")]
    NonDivisibleConductor { from: u64, to: u64 },
    #[error("{t} is not a unit modulo {n}")]
    NotAUnit { t: i64, n: u64 },
    #[error("invalid cyclotomic value {text:?} at offset {pos}: {msg}")]
    Parse {
        text: String,
        pos: usize,
        msg: String,
    },
}

static PHI_CACHE: LazyLock<Mutex<HashMap<u64, Arc<Vec<BigInt>>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Coefficients (constant term first) of the monic polynomial `Φ_n`, computed as
/// `(x^n - 1) / ∏_{d | n, d < n} Φ_d`.
pub fn cyclotomic_polynomial(n: u64) -> Arc<Vec<BigInt>> {
    assert!(n >= 1, "cyclotomic polynomial of order 0");
    if let Some(p) = PHI_CACHE.lock().unwrap().get(&n) {
        return Arc::clone(p);
    }
    let mut num = vec![BigInt::zero(); n as usize + 1];
    num[0] = BigInt::from(-1);
    num[n as usize] = BigInt::one();
    for d in crate::numtheory::divisors(n) {
        if d < n {
            num = poly_div_exact(&num, &cyclotomic_polynomial(d));
        }
    }
    let phi = Arc::new(num);
    PHI_CACHE.lock().unwrap().insert(n, Arc::clone(&phi));
    phi
}

fn poly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    // den is monic
    let dd = den.len() - 1;
    let mut rem = num.to_vec();
    let mut quot = vec![BigInt::zero(); num.len() - dd];
    for i in (dd..num.len()).rev() {
        let c = std::mem::take(&mut rem[i]);
        if c.is_zero() {
            continue;
        }
        for (j, dj) in den.iter().enumerate().take(dd) {
            rem[i - dd + j] -= &c * dj;
        }
        quot[i - dd] = c;
    }
    debug_assert!(rem.iter().all(Zero::is_zero));
    quot
}

/// Reduce `poly` (any length) modulo `Φ_n`, returning exactly `φ(n)` coefficients.
fn reduce_mod_phi(mut poly: Vec<BigInt>, n: u64) -> Vec<BigInt> {
    let phi = cyclotomic_polynomial(n);
    let deg = phi.len() - 1;
    for i in (deg..poly.len()).rev() {
        let c = std::mem::take(&mut poly[i]);
        if c.is_zero() {
            continue;
        }
        for j in 0..deg {
            if !phi[j].is_zero() {
                poly[i - deg + j] -= &c * &phi[j];
            }
        }
    }
    poly.resize(deg, BigInt::zero());
    poly
}

fn mod_inverse(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    (1..m)
        .find(|&x| (a % m) * x % m == 1)
        .expect("inverse of a unit")
}

/// Try to express a canonical element of `Q(ζ_n)` inside `Q(ζ_{n/p})`.
fn descend(coeffs: &[BigInt], n: u64, p: u64) -> Option<Vec<BigInt>> {
    let m = n / p;
    let phi_m = totient(m) as usize;
    if m.is_multiple_of(p) {
        // Φ_n(x) = Φ_m(x^p): basis 1, ζ_n, …, ζ_n^{p-1} over Q(ζ_m).
        let mut y = vec![BigInt::zero(); phi_m];
        for (e, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !(e as u64).is_multiple_of(p) {
                return None;
            }
            y[e / p as usize] = c.clone();
        }
        Some(y)
    } else {
        // ζ_n = ζ_m^u ζ_p^v; basis 1, ζ_p, …, ζ_p^{p-2} over Q(ζ_m).
        let u = mod_inverse(p % m.max(1), m);
        let v = mod_inverse(m % p, p);
        let mut buckets = vec![vec![BigInt::zero(); m as usize]; p as usize];
        for (e, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = e as u64;
            let a = if m == 1 { 0 } else { e * u % m };
            let b = e * v % p;
            buckets[b as usize][a as usize] += c;
        }
        let last = buckets.pop().unwrap();
        let mut reduced = Vec::with_capacity(buckets.len());
        for mut bucket in buckets {
            for (x, l) in bucket.iter_mut().zip(&last) {
                *x -= l;
            }
            reduced.push(reduce_mod_phi(bucket, m));
        }
        if reduced[1..].iter().any(|b| b.iter().any(|c| !c.is_zero())) {
            return None;
        }
        reduced.truncate(1);
        let mut y = reduced.pop().unwrap();
        y.resize(phi_m, BigInt::zero());
        Some(y)
    }
}

/// An element of `Z[ζ_n]` for some conductor `n`.
#[derive(Clone, Debug)]
pub struct CycInt {
    conductor: u64,
    coeffs: Vec<BigInt>,
}

impl CycInt {
    pub fn zero() -> Self {
        Self::from_integer(BigInt::zero())
    }

    pub fn one() -> Self {
        Self::from_integer(BigInt::one())
    }

    pub fn from_integer(v: impl Into<BigInt>) -> Self {
        CycInt {
            conductor: 1,
            coeffs: vec![v.into()],
        }
    }

    /// `ζ_n^e` for any integer `e`.
    pub fn root(n: u64, e: i64) -> Self {
        Self::from_terms(n, [(e, BigInt::one())])
    }

    /// `Σ c · ζ_n^e` over the given terms; exponents are taken modulo `n`.
    pub fn from_terms<I>(n: u64, terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, BigInt)>,
    {
        assert!(n >= 1);
        let mut dense = vec![BigInt::zero(); n as usize];
        for (e, c) in terms {
            dense[e.rem_euclid(n as i64) as usize] += c;
        }
        Self::from_dense(n, dense)
    }

    fn from_dense(n: u64, dense: Vec<BigInt>) -> Self {
        CycInt {
            conductor: n,
            coeffs: reduce_mod_phi(dense, n),
        }
        .minimize()
    }

    /// The conductor of the field this value is currently expressed in.
    /// After arithmetic this is the minimal conductor.
    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    /// Power-basis coordinates `1, ζ_n, …, ζ_n^{φ(n)-1}` at the current conductor.
    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    fn minimize(mut self) -> Self {
        'outer: loop {
            if self.conductor == 1 {
                break;
            }
            for (p, _) in factor(self.conductor) {
                if let Some(y) = descend(&self.coeffs, self.conductor, p) {
                    self.conductor /= p;
                    self.coeffs = y;
                    continue 'outer;
                }
            }
            break;
        }
        self
    }

    fn minimized(&self) -> std::borrow::Cow<'_, CycInt> {
        if self.conductor == 1 {
            std::borrow::Cow::Borrowed(self)
        } else {
            std::borrow::Cow::Owned(self.clone().minimize())
        }
    }

    /// Dense exponent vector of length `m`, `m` a multiple of the conductor.
    fn lift(&self, m: u64) -> Vec<BigInt> {
        let s = (m / self.conductor) as usize;
        let mut dense = vec![BigInt::zero(); m as usize];
        for (e, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                dense[e * s] = c.clone();
            }
        }
        dense
    }

    /// Re-express the value in `Q(ζ_m)`; the value is unchanged.
    pub fn embed(&self, m: u64) -> Result<CycInt, CycError> {
        if m == 0 || !m.is_multiple_of(self.conductor) {
            return Err(CycError::NonDivisibleConductor {
                from: self.conductor,
                to: m,
            });
        }
        Ok(CycInt {
            conductor: m,
            coeffs: reduce_mod_phi(self.lift(m), m),
        })
    }

    /// `Some(value)` when the element lies in `Q`.
    pub fn to_integer(&self) -> Option<BigInt> {
        let m = self.minimized();
        (m.conductor == 1).then(|| m.coeffs[0].clone())
    }

    pub fn is_rational(&self) -> bool {
        self.to_integer().is_some()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// The Galois automorphism `ζ_n ↦ ζ_n^t`.
    pub fn galois(&self, t: i64) -> Result<CycInt, CycError> {
        let n = self.conductor;
        let tm = t.rem_euclid(n as i64) as u64;
        if gcd(tm, n) != 1 && n > 1 {
            return Err(CycError::NotAUnit { t, n });
        }
        let mut dense = vec![BigInt::zero(); n as usize];
        for (e, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                dense[(e as u64 * tm % n) as usize] += c;
            }
        }
        Ok(Self::from_dense(n, dense))
    }

    /// Complex conjugation, `ζ ↦ ζ^{-1}`.
    pub fn conj(&self) -> CycInt {
        self.galois(-1).expect("-1 is always a unit")
    }

    /// Multiply by `ζ_n^e`; the result lives in `Q(ζ_lcm)`.
    pub fn mul_root(&self, n: u64, e: i64) -> CycInt {
        let l = lcm(self.conductor, n);
        let s = (l / self.conductor) as usize;
        let shift = (e.rem_euclid(n as i64) as u64 * (l / n)) as usize;
        let mut dense = vec![BigInt::zero(); l as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                dense[(i * s + shift) % l as usize] += c;
            }
        }
        Self::from_dense(l, dense)
    }

    /// Absolute trace `Tr_{Q(ζ_n)/Q}` at the current conductor.
    pub fn trace(&self) -> Rational {
        Rational::from_integer(self.trace_int())
    }

    pub fn trace_int(&self) -> BigInt {
        let n = self.conductor;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, c)| c * root_trace(n, e as i64))
            .sum()
    }

    /// `Tr_{Q(ζ_m)/Q}(self · ζ_m^e)` without building the product.
    ///
    /// `m` must be a multiple of the conductor.
    pub fn trace_times_root(&self, m: u64, e: i64) -> Result<BigInt, CycError> {
        if !m.is_multiple_of(self.conductor) {
            return Err(CycError::NonDivisibleConductor {
                from: self.conductor,
                to: m,
            });
        }
        let s = (m / self.conductor) as i64;
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| c * root_trace(m, i as i64 * s + e))
            .sum())
    }

    pub fn scale(&self, k: &BigInt) -> CycInt {
        if k.is_zero() {
            return CycInt::zero();
        }
        CycInt {
            conductor: self.conductor,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }
}

/// `Tr_{Q(ζ_n)/Q}(ζ_n^j) = μ(m) φ(n) / φ(m)` with `m = n / gcd(n, j)`.
pub fn root_trace(n: u64, j: i64) -> i64 {
    assert!(n >= 1);
    let r = j.rem_euclid(n as i64) as u64;
    let m = n / gcd(n, r);
    mobius(m) * (totient(n) / totient(m)) as i64
}

impl PartialEq for CycInt {
    fn eq(&self, other: &Self) -> bool {
        if self.conductor == other.conductor {
            return self.coeffs == other.coeffs;
        }
        let (a, b) = (self.minimized(), other.minimized());
        a.conductor == b.conductor && a.coeffs == b.coeffs
    }
}

impl Eq for CycInt {}

impl Hash for CycInt {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let m = self.minimized();
        m.conductor.hash(state);
        m.coeffs.hash(state);
    }
}

impl From<i64> for CycInt {
    fn from(v: i64) -> Self {
        CycInt::from_integer(v)
    }
}

impl<'a> Add<&'a CycInt> for &'a CycInt {
    type Output = CycInt;

    fn add(self, rhs: &CycInt) -> CycInt {
        if self.conductor == rhs.conductor {
            let coeffs = self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect();
            return CycInt {
                conductor: self.conductor,
                coeffs,
            }
            .minimize();
        }
        if rhs.conductor == 1 || self.conductor == 1 {
            let (big, q) = if rhs.conductor == 1 {
                (self, rhs)
            } else {
                (rhs, self)
            };
            let mut out = big.clone();
            out.coeffs[0] += &q.coeffs[0];
            return out;
        }
        let l = lcm(self.conductor, rhs.conductor);
        let mut dense = self.lift(l);
        for (x, y) in dense.iter_mut().zip(rhs.lift(l)) {
            *x += y;
        }
        CycInt::from_dense(l, dense)
    }
}

impl<'a> Sub<&'a CycInt> for &'a CycInt {
    type Output = CycInt;

    fn sub(self, rhs: &CycInt) -> CycInt {
        self + &(-rhs)
    }
}

impl Neg for &CycInt {
    type Output = CycInt;

    fn neg(self) -> CycInt {
        CycInt {
            conductor: self.conductor,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl<'a> Mul<&'a CycInt> for &'a CycInt {
    type Output = CycInt;

    fn mul(self, rhs: &CycInt) -> CycInt {
        if self.conductor == 1 {
            return rhs.scale(&self.coeffs[0]).minimize();
        }
        if rhs.conductor == 1 {
            return self.scale(&rhs.coeffs[0]).minimize();
        }
        let l = lcm(self.conductor, rhs.conductor);
        let (sa, sb) = (l / self.conductor, l / rhs.conductor);
        let mut dense = vec![BigInt::zero(); l as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let e = (i as u64 * sa + j as u64 * sb) % l;
                dense[e as usize] += a * b;
            }
        }
        CycInt::from_dense(l, dense)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<CycInt> for CycInt {
            type Output = CycInt;
            fn $m(self, rhs: CycInt) -> CycInt {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for CycInt {
    type Output = CycInt;
    fn neg(self) -> CycInt {
        -&self
    }
}

impl std::iter::Sum for CycInt {
    fn sum<I: Iterator<Item = CycInt>>(iter: I) -> CycInt {
        iter.fold(CycInt::zero(), |a, b| &a + &b)
    }
}

impl fmt::Display for CycInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.conductor;
        let mut first = true;
        for (e, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let abs = c.abs();
            if neg {
                f.write_str("-")?;
            } else if !first {
                f.write_str("+")?;
            }
            first = false;
            if e == 0 {
                write!(f, "{abs}")?;
                continue;
            }
            if !abs.is_one() {
                write!(f, "{abs}*")?;
            }
            if e == 1 {
                write!(f, "E({n})")?;
            } else {
                write!(f, "E({n})^{e}")?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> CycError {
        CycError::Parse {
            text: self.text.to_string(),
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), CycError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    fn integer(&mut self) -> Result<BigInt, CycError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        Ok(self.text[start..self.pos].parse().expect("ascii digits"))
    }

    fn signed_small(&mut self) -> Result<i64, CycError> {
        let neg = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let v: i64 = self
            .integer()?
            .try_into()
            .map_err(|_| self.err("exponent out of range"))?;
        Ok(if neg { -v } else { v })
    }

    /// `E(n)` or `E(n)^k`
    fn atom(&mut self) -> Result<(u64, i64), CycError> {
        self.expect(b'E')?;
        self.expect(b'(')?;
        let n: u64 = self
            .integer()?
            .try_into()
            .map_err(|_| self.err("conductor out of range"))?;
        if n == 0 {
            return Err(self.err("conductor must be positive"));
        }
        self.expect(b')')?;
        let k = if self.peek() == Some(b'^') {
            self.pos += 1;
            self.signed_small()?
        } else {
            1
        };
        Ok((n, k))
    }
}

impl FromStr for CycInt {
    type Err = CycError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lx = Lexer {
            text: s,
            bytes: s.as_bytes(),
            pos: 0,
        };
        let mut terms: Vec<(u64, i64, BigInt)> = Vec::new();
        let mut first = true;
        loop {
            let sign = match lx.peek() {
                None if !first => break,
                None => return Err(lx.err("empty value")),
                Some(b'+') if !first => {
                    lx.pos += 1;
                    1
                }
                Some(b'-') => {
                    lx.pos += 1;
                    -1
                }
                Some(_) if first => 1,
                Some(_) => return Err(lx.err("expected '+' or '-'")),
            };
            first = false;
            let term = match lx.peek() {
                Some(b'E') => {
                    let (n, k) = lx.atom()?;
                    let coeff = if lx.peek() == Some(b'*') {
                        lx.pos += 1;
                        lx.integer()?
                    } else {
                        BigInt::one()
                    };
                    (n, k, coeff)
                }
                Some(b) if b.is_ascii_digit() => {
                    let c = lx.integer()?;
                    if lx.peek() == Some(b'*') {
                        lx.pos += 1;
                        let (n, k) = lx.atom()?;
                        (n, k, c)
                    } else {
                        (1, 0, c)
                    }
                }
                _ => return Err(lx.err("expected integer or E(n)")),
            };
            terms.push((term.0, term.1, term.2 * sign));
        }
        let l = terms.iter().fold(1, |acc, t| lcm(acc, t.0));
        Ok(CycInt::from_terms(
            l,
            terms.into_iter().map(|(n, k, c)| (k * (l / n) as i64, c)),
        ))
    }
}

impl Serialize for CycInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CycInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
