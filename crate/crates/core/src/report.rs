//! Bundled tables, golden datasets and the reproduction report.
//!
//! Every golden file is plain text. Tuple files are written in the exact
//! form [`render_tuples`] produces, so a regenerated solution set can be
//! compared byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::One;
use rayon::prelude::*;
use thiserror::Error;

use crate::chartable::{CharTable, Character, TableError};
use crate::csp::{chain_solve, fmt_tuple, ChainConfig, SolveError, SolveMode, DEFAULT_BUDGET};
use crate::cyclotomic::{CycInt, Rational};
use crate::lp::{mu_form, variable_layout, Chain, ChainEntry, LinearForm, PaVar};
use crate::numtheory::divisors;
use crate::st::{self, RowSelection, StConstraintRow};

/// Tuple sets at least this large with two classes are stored as a range.
pub const RANGE_MIN: usize = 1000;

const TABLES: &[(&str, &str)] = &[
    ("a5", include_str!("../data/a5.json")),
    ("s3", include_str!("../data/s3.json")),
    ("co3", include_str!("../data/co3.json")),
    ("co2", include_str!("../data/co2.json")),
    ("co1", include_str!("../data/co1.json")),
];

macro_rules! golden_files {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../golden/", $name)))),*]
    };
}

const GOLDEN: &[(&str, &str)] = golden_files!(
    "co3_2.txt",
    "co3_3.txt",
    "co3_5.txt",
    "co3_7.txt",
    "co3_11.txt",
    "co3_23.txt",
    "co3_33.txt",
    "co3_35.txt",
    "co3_55.txt",
    "co3_77.txt",
    "co2_2.txt",
    "co2_3.txt",
    "co2_5.txt",
    "co2_7.txt",
    "co2_11.txt",
    "co2_21.txt",
    "co2_22.txt",
    "co2_23.txt",
    "co2_33.txt",
    "co2_35.txt",
    "co2_55.txt",
    "co2_77.txt",
    "co1_7.txt",
    "co1_11.txt",
    "co1_13.txt",
    "co1_23.txt",
    "co1_77.txt",
    "co1_55.txt",
    "co1_65.txt",
    "mu_forms.txt",
    "st_rows.txt",
    "st_verdicts.txt",
    "st_search.txt",
);

/// Solution-set goldens that need a complete table, with the tag that skips them.
const NEEDS_FULL_TABLE: &[(&str, u64, &str)] =
    &[("co1", 55, "co1-55-65"), ("co1", 65, "co1-55-65")];

/// Counts of order-4 and order-14 tuples for Co3, checkable only with a complete table.
const CO3_FULL_COUNTS: &[(u64, usize)] = &[(4, 510), (14, 5)];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown bundled table {0}")]
    UnknownTable(String),
    #[error("golden file {0} not found")]
    MissingGolden(String),
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
}

fn perr(file: &str, line: usize, msg: impl Into<String>) -> ReportError {
    ReportError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Names of the bundled tables.
pub fn bundled_table_names() -> Vec<&'static str> {
    TABLES.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_table_source(name: &str) -> Option<&'static str> {
    TABLES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled_table(name: &str) -> Result<CharTable, ReportError> {
    let src = bundled_table_source(name).ok_or_else(|| ReportError::UnknownTable(name.into()))?;
    Ok(CharTable::parse(src)?)
}

/// Where golden files are read from.
#[derive(Debug, Clone, Default)]
pub enum GoldenSource {
    #[default]
    Bundled,
    Dir(PathBuf),
}

impl GoldenSource {
    pub fn read(&self, name: &str) -> Result<String, ReportError> {
        match self {
            GoldenSource::Bundled => GOLDEN
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, s)| s.to_string())
                .ok_or_else(|| ReportError::MissingGolden(name.into())),
            GoldenSource::Dir(d) => {
                let p = d.join(name);
                std::fs::read_to_string(&p).map_err(|e| ReportError::Io(p.display().to_string(), e))
            }
        }
    }
}

/// Names of all bundled golden files.
pub fn golden_names() -> Vec<&'static str> {
    GOLDEN.iter().map(|(n, _)| *n).collect()
}

// ---------------------------------------------------------------- tuple sets

fn parse_tuple(s: &str) -> Option<Vec<i64>> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    inner.split(',').map(|x| x.trim().parse().ok()).collect()
}

/// A solution-set golden file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleGolden {
    pub group: String,
    pub order: u64,
    pub classes: Vec<String>,
    pub tuples: BTreeSet<Vec<i64>>,
    /// The `count` line, which may disagree with the listed tuples.
    pub count: usize,
    pub rational: bool,
}

impl TupleGolden {
    pub fn file_name(group: &str, order: u64) -> String {
        format!("{group}_{order}.txt")
    }

    pub fn parse(file: &str, text: &str) -> Result<Self, ReportError> {
        let stem = file.trim_end_matches(".txt");
        let (group, order) = stem
            .rsplit_once('_')
            .and_then(|(g, k)| Some((g.to_string(), k.parse().ok()?)))
            .ok_or_else(|| perr(file, 0, "file name is not <group>_<order>.txt"))?;
        let mut classes = None;
        let mut count = None;
        let mut rational = None;
        let mut tuples = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let n = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("classes") {
                classes = Some(
                    rest.split_whitespace()
                        .map(str::to_string)
                        .collect::<Vec<_>>(),
                );
            } else if let Some(rest) = line.strip_prefix("count ") {
                count = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|_| perr(file, n, "bad count"))?,
                );
            } else if let Some(rest) = line.strip_prefix("rational ") {
                rational = Some(match rest.trim() {
                    "yes" => true,
                    "no" => false,
                    _ => return Err(perr(file, n, "rational must be yes or no")),
                });
            } else if let Some(rest) = line.strip_prefix("range ") {
                let b: Vec<i64> = rest
                    .split_whitespace()
                    .map(|x| x.parse().map_err(|_| perr(file, n, "bad range bound")))
                    .collect::<Result<_, _>>()?;
                if b.len() != 2 || b[0] > b[1] {
                    return Err(perr(file, n, "range needs lo <= hi"));
                }
                for a in b[0]..=b[1] {
                    tuples.insert(vec![a, 1 - a]);
                }
            } else {
                let t =
                    parse_tuple(line).ok_or_else(|| perr(file, n, format!("bad tuple {line}")))?;
                tuples.insert(t);
            }
        }
        let classes = classes.ok_or_else(|| perr(file, 0, "missing classes line"))?;
        if let Some(t) = tuples.iter().find(|t| t.len() != classes.len()) {
            return Err(perr(
                file,
                0,
                format!("tuple {} has the wrong length", fmt_tuple(t)),
            ));
        }
        let count = count.ok_or_else(|| perr(file, 0, "missing count line"))?;
        Ok(TupleGolden {
            group,
            order,
            classes,
            tuples,
            count,
            rational: rational.ok_or_else(|| perr(file, 0, "missing rational line"))?,
        })
    }

    pub fn render(&self) -> String {
        let t: Vec<Vec<i64>> = self.tuples.iter().cloned().collect();
        render_tuples(&self.group, self.order, &self.classes, &t, self.rational)
    }
}

fn as_range(classes: &[String], tuples: &[Vec<i64>]) -> Option<(i64, i64)> {
    if classes.len() != 2 || tuples.len() < RANGE_MIN {
        return None;
    }
    let lo = tuples[0][0];
    for (i, t) in tuples.iter().enumerate() {
        if t[0] != lo + i as i64 || t[0] + t[1] != 1 {
            return None;
        }
    }
    Some((lo, lo + tuples.len() as i64 - 1))
}

/// Canonical text of a solution set. `tuples` must be sorted and distinct.
pub fn render_tuples(
    group: &str,
    order: u64,
    classes: &[String],
    tuples: &[Vec<i64>],
    rational: bool,
) -> String {
    let mut out = format!(
        "# {group}: partial augmentations of units of order {order}\nclasses {}\ncount {}\n",
        classes.join(" "),
        tuples.len()
    );
    match as_range(classes, tuples) {
        Some((lo, hi)) => out.push_str(&format!("range {lo} {hi}\n")),
        None => {
            for t in tuples {
                out.push_str(&fmt_tuple(t));
                out.push('\n');
            }
        }
    }
    out.push_str(if rational {
        "rational yes\n"
    } else {
        "rational no\n"
    });
    out
}

/// Differences between an expected and a regenerated solution set.
pub fn diff_tuples(expected: &TupleGolden, got: &TupleGolden) -> Vec<String> {
    let mut out = Vec::new();
    let what = format!("{} order {}", expected.group, expected.order);
    if expected.classes != got.classes {
        out.push(format!(
            "{what}: classes [{}] but regenerated [{}]",
            expected.classes.join(" "),
            got.classes.join(" ")
        ));
    }
    for t in expected.tuples.difference(&got.tuples) {
        out.push(format!(
            "{what}: golden tuple {} not regenerated",
            fmt_tuple(t)
        ));
    }
    for t in got.tuples.difference(&expected.tuples) {
        out.push(format!(
            "{what}: regenerated tuple {} missing from golden",
            fmt_tuple(t)
        ));
    }
    if expected.count != expected.tuples.len() {
        out.push(format!(
            "{what}: golden count line says {} but lists {} tuples",
            expected.count,
            expected.tuples.len()
        ));
    }
    if expected.rational != got.rational {
        out.push(format!(
            "{what}: rational conjugacy {} but regenerated {}",
            expected.rational, got.rational
        ));
    }
    out
}

// ---------------------------------------------------------------- characters

/// A character by id, or a `+`-separated sum of ids.
pub fn lookup_character(t: &CharTable, id: &str) -> Option<Character> {
    if let Some(c) = t.character(id) {
        return Some(c.clone());
    }
    let mut parts = id.split('+');
    let mut acc = t.character(parts.next()?)?.clone();
    for p in parts {
        acc = acc.sum(t.character(p)?, id)?;
    }
    Some(acc)
}

// ---------------------------------------------------------------- μ-form goldens

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
}

fn tokenize(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1
            }
            '*' => {
                out.push(Tok::Star);
                i += 1
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let st = i;
                while i < cs.len()
                    && (cs[i].is_ascii_alphanumeric() || cs[i] == '_' || cs[i] == '^')
                {
                    i += 1;
                }
                let w: String = cs[st..i].iter().collect();
                if w.bytes().all(|b| b.is_ascii_digit()) {
                    out.push(Tok::Num(w.parse().map_err(|_| format!("bad number {w}"))?));
                } else {
                    out.push(Tok::Ident(w));
                }
            }
            _ => return Err(format!("unexpected character {c:?}")),
        }
    }
    Ok(out)
}

/// `Σ coeff · atom`, an atom of `None` being the constant term.
type Expr = Vec<(BigInt, Option<String>)>;

fn parse_expr(s: &str) -> Result<Expr, String> {
    let toks = tokenize(s)?;
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut sign = BigInt::one();
        match &toks[i] {
            Tok::Plus => i += 1,
            Tok::Minus => {
                sign = -sign;
                i += 1
            }
            _ if !out.is_empty() => return Err("missing operator between terms".into()),
            _ => {}
        }
        match toks.get(i) {
            Some(Tok::Num(n)) => {
                i += 1;
                if toks.get(i) == Some(&Tok::Star) {
                    match toks.get(i + 1) {
                        Some(Tok::Ident(a)) => {
                            out.push((sign * n, Some(a.clone())));
                            i += 2;
                        }
                        _ => return Err("expected a name after '*'".into()),
                    }
                } else {
                    out.push((sign * n, None));
                }
            }
            Some(Tok::Ident(a)) => {
                out.push((sign, Some(a.clone())));
                i += 1;
            }
            _ => return Err("expected a term".into()),
        }
    }
    if out.is_empty() {
        return Err("empty expression".into());
    }
    Ok(out)
}

/// `3a` or `3a^11`: the class and the power of `u` it belongs to.
fn parse_var(name: &str, k: u64) -> Option<PaVar> {
    let (class, d) = match name.split_once('^') {
        Some((c, d)) => (c, d.parse::<u64>().ok()?),
        None => (name, 1),
    };
    let digits = class.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits == class.len() || d == 0 || !k.is_multiple_of(d) || d == k {
        return None;
    }
    Some(PaVar::new(k / d, class))
}

#[derive(Debug, Clone)]
struct MuCase {
    id: String,
    fixed: Vec<(PaVar, i64)>,
    params: BTreeMap<String, i64>,
}

#[derive(Debug, Clone)]
struct MuLine {
    line: usize,
    character: String,
    l: u64,
    only: Option<Vec<String>>,
    scale: Rational,
    expr: Expr,
    text: String,
}

#[derive(Debug, Clone)]
struct MuBlock {
    group: String,
    order: u64,
    lets: BTreeMap<String, Expr>,
    cases: Vec<MuCase>,
    lines: Vec<MuLine>,
}

fn parse_mu_golden(file: &str, text: &str) -> Result<Vec<MuBlock>, ReportError> {
    let mut blocks: Vec<MuBlock> = Vec::new();
    let mut group: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (kw, rest) = line.split_once(' ').unwrap_or((line, ""));
        let rest = rest.trim();
        match kw {
            "group" => group = Some(rest.to_string()),
            "order" => {
                let g = group
                    .clone()
                    .ok_or_else(|| perr(file, n, "order before group"))?;
                let k = rest.parse().map_err(|_| perr(file, n, "bad order"))?;
                blocks.push(MuBlock {
                    group: g,
                    order: k,
                    lets: BTreeMap::new(),
                    cases: Vec::new(),
                    lines: Vec::new(),
                });
            }
            "let" | "case" | "mu" => {
                let b = blocks
                    .last_mut()
                    .ok_or_else(|| perr(file, n, "no order block"))?;
                match kw {
                    "let" => {
                        let (name, e) = rest
                            .split_once('=')
                            .ok_or_else(|| perr(file, n, "let needs '='"))?;
                        let e = parse_expr(e).map_err(|m| perr(file, n, m))?;
                        b.lets.insert(name.trim().to_string(), e);
                    }
                    "case" => {
                        let (id, binds) = rest
                            .split_once(':')
                            .ok_or_else(|| perr(file, n, "case needs ':'"))?;
                        let mut c = MuCase {
                            id: id.trim().to_string(),
                            fixed: Vec::new(),
                            params: BTreeMap::new(),
                        };
                        for bind in binds.split_whitespace() {
                            let (x, v) = bind
                                .split_once('=')
                                .ok_or_else(|| perr(file, n, "binding needs '='"))?;
                            let v: i64 = v
                                .parse()
                                .map_err(|_| perr(file, n, format!("bad value in {bind}")))?;
                            if x.contains('^') {
                                let pv = parse_var(x, b.order).ok_or_else(|| {
                                    perr(file, n, format!("bad power variable {x}"))
                                })?;
                                c.fixed.push((pv, v));
                            } else {
                                c.params.insert(x.to_string(), v);
                            }
                        }
                        b.cases.push(c);
                    }
                    _ => {
                        let (lhs, rhs) = rest
                            .split_once('=')
                            .ok_or_else(|| perr(file, n, "mu needs '='"))?;
                        let mut words = lhs.split_whitespace();
                        let character = words
                            .next()
                            .ok_or_else(|| perr(file, n, "missing character"))?;
                        let l = words
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or_else(|| perr(file, n, "missing l"))?;
                        let only = words.next().map(|w| w.trim_matches(|c| c == '[' || c == ']')
                                    .split(',')
                                    .map(str::to_string)
                                    .collect());
                        let rhs = rhs.trim();
                        let open = rhs.find('(').ok_or_else(|| perr(file, n, "missing '('"))?;
                        let scale = Rational::from_str(rhs[..open].trim())
                            .map_err(|_| perr(file, n, "bad scale"))?;
                        let body = rhs[open + 1..]
                            .strip_suffix(')')
                            .ok_or_else(|| perr(file, n, "missing ')'"))?;
                        let expr = parse_expr(body).map_err(|m| perr(file, n, m))?;
                        b.lines.push(MuLine {
                            line: n,
                            character: character.to_string(),
                            l,
                            only,
                            scale,
                            expr,
                            text: line.to_string(),
                        });
                    }
                }
            }
            _ => return Err(perr(file, n, format!("unknown directive {kw}"))),
        }
    }
    Ok(blocks)
}

fn expand(e: &Expr, b: &MuBlock, case: &MuCase, depth: usize) -> Result<LinearForm, String> {
    if depth > 16 {
        return Err("let definitions are circular".into());
    }
    let mut out = LinearForm::default();
    for (c, atom) in e {
        let q = Rational::from_integer(c.clone());
        let part = match atom {
            None => LinearForm::constant(Rational::one()),
            Some(a) => {
                if let Some(v) = case.params.get(a) {
                    LinearForm::constant(Rational::from_integer(BigInt::from(*v)))
                } else if let Some(sub) = b.lets.get(a) {
                    expand(sub, b, case, depth + 1)?
                } else if let Some(v) = parse_var(a, b.order) {
                    match case.fixed.iter().find(|(f, _)| *f == v) {
                        Some((_, x)) => {
                            LinearForm::constant(Rational::from_integer(BigInt::from(*x)))
                        }
                        None => LinearForm::var(v),
                    }
                } else {
                    return Err(format!("unknown name {a}"));
                }
            }
        };
        out = out.add(&part.scale(&q));
    }
    Ok(out)
}

fn check_mu_block(t: &CharTable, b: &MuBlock) -> Vec<String> {
    let mut fails = Vec::new();
    let default_case = MuCase {
        id: String::new(),
        fixed: Vec::new(),
        params: BTreeMap::new(),
    };
    let cases: Vec<&MuCase> = if b.cases.is_empty() {
        vec![&default_case]
    } else {
        b.cases.iter().collect()
    };
    let k = b.order;
    for ml in &b.lines {
        let Some(ch) = lookup_character(t, &ml.character) else {
            fails.push(format!(
                "line {}: unknown character {}",
                ml.line, ml.character
            ));
            continue;
        };
        for case in &cases {
            if let Some(only) = &ml.only {
                if !only.contains(&case.id) {
                    continue;
                }
            }
            let mut chain = Chain::new();
            for (v, x) in &case.fixed {
                let e = chain
                    .entry(v.order_tag)
                    .or_insert_with(|| ChainEntry::Fixed(Vec::new()));
                if let ChainEntry::Fixed(list) = e {
                    list.push((v.class.clone(), *x));
                }
            }
            let groups: Vec<Vec<PaVar>> = divisors(k)
                .into_iter()
                .filter(|&m| m > 1 && !chain.contains_key(&m))
                .map(|m| variable_layout(t, m))
                .collect();
            let got = match mu_form(t, &ch, k, ml.l, &chain) {
                Ok(c) => c.mu().eliminate_augmentation(&groups),
                Err(e) => {
                    fails.push(format!("line {}: {e}", ml.line));
                    continue;
                }
            };
            let want = match expand(&ml.expr, b, case, 0) {
                Ok(f) => f.scale(&ml.scale).eliminate_augmentation(&groups),
                Err(e) => {
                    fails.push(format!("line {}: {e}", ml.line));
                    continue;
                }
            };
            if got != want {
                let at = if case.id.is_empty() {
                    String::new()
                } else {
                    format!(" case {}", case.id)
                };
                fails.push(format!(
                    "{} order {k}{at}, line {} `{}`: regenerated {got}, golden {want}",
                    b.group, ml.line, ml.text
                ));
            }
        }
    }
    fails
}

// ---------------------------------------------------------------- (s,t) goldens

/// One golden `(m1, mp, mq)` row, with any fields the published table prints differently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StRowGolden {
    pub line: usize,
    pub group: String,
    pub order: u64,
    pub p: u64,
    pub q: u64,
    pub character: String,
    pub xi_p: i64,
    pub xi_q: i64,
    pub l: u64,
    pub m1: i64,
    pub mp: i64,
    pub mq: i64,
    pub printed: Vec<(String, String)>,
}

impl StRowGolden {
    /// The row as published: golden values with the printed overrides applied.
    pub fn as_printed(&self) -> Result<StRowGolden, String> {
        let mut r = self.clone();
        for (k, v) in &self.printed {
            let bad = || format!("bad printed value {k}={v}");
            match k.as_str() {
                "l" => r.l = v.parse().map_err(|_| bad())?,
                "p" => r.p = v.parse().map_err(|_| bad())?,
                "q" => r.q = v.parse().map_err(|_| bad())?,
                "xi(Cp)" => r.xi_p = v.parse().map_err(|_| bad())?,
                "xi(Cq)" => r.xi_q = v.parse().map_err(|_| bad())?,
                "m1" => r.m1 = v.parse().map_err(|_| bad())?,
                "mp" => r.mp = v.parse().map_err(|_| bad())?,
                "mq" => r.mq = v.parse().map_err(|_| bad())?,
                _ => return Err(format!("unknown printed field {k}")),
            }
        }
        Ok(r)
    }

    pub fn describe(&self) -> String {
        format!(
            "{} |u|={} ({},{}) {} l={} -> ({}, {}, {})",
            self.group,
            self.order,
            self.p,
            self.q,
            self.character,
            self.l,
            self.m1,
            self.mp,
            self.mq
        )
    }

    /// Recompute the row from the table; `None` when everything matches.
    pub fn mismatch(&self, t: &CharTable) -> Option<String> {
        let ch = match lookup_character(t, &self.character) {
            Some(c) => c,
            None => return Some(format!("{}: unknown character", self.describe())),
        };
        if self.p * self.q != self.order {
            return Some(format!("{}: p*q is not the order", self.describe()));
        }
        match st::st_row(t, &ch, self.p, self.q, self.l) {
            Err(e) => Some(format!("{}: {e}", self.describe())),
            Ok(r) => {
                let got = (r.xi_s, r.xi_t, r.m1, r.ms, r.mt);
                let want = (self.xi_p, self.xi_q, self.m1, self.mp, self.mq);
                (got != want).then(|| {
                    format!(
                        "{}: regenerated xi=({}, {}) m=({}, {}, {}), golden xi=({}, {})",
                        self.describe(),
                        got.0,
                        got.1,
                        got.2,
                        got.3,
                        got.4,
                        want.0,
                        want.1
                    )
                })
            }
        }
    }
}

pub fn parse_st_rows(file: &str, text: &str) -> Result<Vec<StRowGolden>, ReportError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (main, printed) = match line.split_once(" printed ") {
            Some((a, b)) => (a, Some(b)),
            None => (line, None),
        };
        let w: Vec<&str> = main.split_whitespace().collect();
        if w.len() != 11 {
            return Err(perr(file, n, "expected 11 fields"));
        }
        let int = |s: &str| {
            s.parse::<i64>()
                .map_err(|_| perr(file, n, format!("bad integer {s}")))
        };
        let nat = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| perr(file, n, format!("bad integer {s}")))
        };
        let printed = printed
            .map(|p| {
                p.split_whitespace()
                    .map(|kv| {
                        kv.split_once('=')
                            .map(|(k, v)| (k.to_string(), v.to_string()))
                            .ok_or_else(|| perr(file, n, "printed fields are key=value"))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?
            .unwrap_or_default();
        out.push(StRowGolden {
            line: n,
            group: w[0].to_string(),
            order: nat(w[1])?,
            p: nat(w[2])?,
            q: nat(w[3])?,
            character: w[4].to_string(),
            xi_p: int(w[5])?,
            xi_q: int(w[6])?,
            l: nat(w[7])?,
            m1: int(w[8])?,
            mp: int(w[9])?,
            mq: int(w[10])?,
            printed,
        });
    }
    Ok(out)
}

/// A golden rule-out: primes, row selection and the expected verdict text.
#[derive(Debug, Clone)]
pub struct StVerdictGolden {
    pub line: usize,
    pub group: String,
    pub p: u64,
    pub q: u64,
    /// `None` for automatic row selection.
    pub rows: Option<Vec<(String, Vec<u64>)>>,
    pub verdict: String,
}

impl StVerdictGolden {
    pub fn describe(&self) -> String {
        let rows = match &self.rows {
            None => "auto".to_string(),
            Some(r) => r
                .iter()
                .map(|(c, ls)| {
                    let ls: Vec<String> = ls.iter().map(u64::to_string).collect();
                    format!("{c}@{}", ls.join(","))
                })
                .collect::<Vec<_>>()
                .join(" "),
        };
        format!("{} ({},{}) {rows}", self.group, self.p, self.q)
    }

    /// Run the rule-out and return the verdict text.
    pub fn run(&self, t: &CharTable) -> Result<String, String> {
        let sel = match &self.rows {
            None => RowSelection::default(),
            Some(spec) => {
                let mut rows: Vec<StConstraintRow> = Vec::new();
                for (c, ls) in spec {
                    let ch =
                        lookup_character(t, c).ok_or_else(|| format!("unknown character {c}"))?;
                    for &l in ls {
                        rows.push(
                            st::st_row(t, &ch, self.p, self.q, l).map_err(|e| e.to_string())?,
                        );
                    }
                }
                RowSelection::Explicit(rows)
            }
        };
        let r = st::rule_out_order(t, self.p, self.q, sel).map_err(|e| e.to_string())?;
        if !r.recheck() {
            return Err("verdict does not recheck against its rows".into());
        }
        Ok(r.verdict.to_string())
    }
}

pub fn parse_st_verdicts(file: &str, text: &str) -> Result<Vec<StVerdictGolden>, ReportError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (lhs, verdict) = line
            .split_once("=>")
            .ok_or_else(|| perr(file, n, "missing '=>'"))?;
        let w: Vec<&str> = lhs.split_whitespace().collect();
        if w.len() < 4 {
            return Err(perr(file, n, "expected group p q rows"));
        }
        let nat = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| perr(file, n, format!("bad integer {s}")))
        };
        let rows = if w[3] == "auto" {
            None
        } else {
            let mut v = Vec::new();
            for item in &w[3..] {
                let (c, ls) = item
                    .split_once('@')
                    .ok_or_else(|| perr(file, n, "rows are char@l,l"))?;
                let ls = ls.split(',').map(nat).collect::<Result<Vec<_>, _>>()?;
                v.push((c.to_string(), ls));
            }
            Some(v)
        };
        out.push(StVerdictGolden {
            line: n,
            group: w[0].to_string(),
            p: nat(w[1])?,
            q: nat(w[2])?,
            rows,
            verdict: verdict.trim().to_string(),
        });
    }
    Ok(out)
}

/// The difference-tuple search golden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchGolden {
    pub differences: Vec<i64>,
    pub max: usize,
    pub tuples: BTreeSet<Vec<i64>>,
}

impl SearchGolden {
    pub fn parse(file: &str, text: &str) -> Result<Self, ReportError> {
        let mut differences = None;
        let mut max = None;
        let mut tuples = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("differences ") {
                differences = Some(
                    rest.split_whitespace()
                        .map(|x| x.parse().map_err(|_| perr(file, n, "bad difference")))
                        .collect::<Result<Vec<i64>, _>>()?,
                );
            } else if let Some(rest) = line.strip_prefix("max ") {
                max = Some(rest.trim().parse().map_err(|_| perr(file, n, "bad max"))?);
            } else {
                tuples.insert(parse_tuple(line).ok_or_else(|| perr(file, n, "bad tuple"))?);
            }
        }
        Ok(SearchGolden {
            differences: differences.ok_or_else(|| perr(file, 0, "missing differences"))?,
            max: max.ok_or_else(|| perr(file, 0, "missing max"))?,
            tuples,
        })
    }

    /// Run the search; each tuple sorted descending.
    pub fn regenerate(&self) -> BTreeSet<Vec<i64>> {
        let items: Vec<Vec<CycInt>> = self
            .differences
            .iter()
            .map(|&d| vec![CycInt::from(d)])
            .collect();
        st::minimal_zero_sum_tuples(&items, self.max)
            .into_iter()
            .map(|ix| {
                let mut v: Vec<i64> = ix.iter().map(|&i| self.differences[i]).collect();
                v.sort_unstable_by(|a, b| b.cmp(a));
                v
            })
            .collect()
    }
}

// ---------------------------------------------------------------- the report

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail(Vec<String>),
    /// A solver hit its node budget.
    Budget(String),
    Skipped(String),
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub tags: Vec<String>,
    pub outcome: Outcome,
}

impl Check {
    fn new(name: impl Into<String>, tags: &[&str], outcome: Outcome) -> Self {
        Check {
            name: name.into(),
            tags: tags.iter().map(|s| s.to_string()).collect(),
            outcome,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Checks carrying any of these tags are skipped.
    pub skip: BTreeSet<String>,
    pub budget: u64,
    pub mode: SolveMode,
    pub goldens: GoldenSource,
    /// User-supplied complete tables, by group name.
    pub full_tables: BTreeMap<String, CharTable>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            skip: BTreeSet::new(),
            budget: DEFAULT_BUDGET,
            mode: SolveMode::Joint,
            goldens: GoldenSource::Bundled,
            full_tables: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn count(&self, f: impl Fn(&Outcome) -> bool) -> usize {
        self.checks.iter().filter(|c| f(&c.outcome)).count()
    }

    pub fn failed(&self) -> usize {
        self.count(|o| matches!(o, Outcome::Fail(_)))
    }

    pub fn budget_exceeded(&self) -> bool {
        self.count(|o| matches!(o, Outcome::Budget(_))) > 0
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match &c.outcome {
                Outcome::Pass => writeln!(f, "PASS     {}", c.name)?,
                Outcome::Skipped(why) => writeln!(f, "SKIPPED  {} ({why})", c.name)?,
                Outcome::Budget(why) => writeln!(f, "BUDGET   {} ({why})", c.name)?,
                Outcome::Fail(lines) => {
                    writeln!(f, "FAIL     {}", c.name)?;
                    for l in lines {
                        writeln!(f, "         {l}")?;
                    }
                }
            }
        }
        writeln!(
            f,
            "{} passed, {} failed, {} over budget, {} skipped",
            self.count(|o| *o == Outcome::Pass),
            self.failed(),
            self.count(|o| matches!(o, Outcome::Budget(_))),
            self.count(|o| matches!(o, Outcome::Skipped(_)))
        )
    }
}

/// Regenerate the solution set of units of order `k` in canonical form.
pub fn regenerate_tuples(
    group: &str,
    t: &CharTable,
    k: u64,
    cfg: &ChainConfig,
) -> Result<TupleGolden, SolveError> {
    let r = chain_solve(t, k, cfg)?;
    let tuples: BTreeSet<Vec<i64>> = r.top_tuples().into_iter().collect();
    Ok(TupleGolden {
        group: group.to_string(),
        order: k,
        classes: r.vars.iter().map(|v| v.class.clone()).collect(),
        count: tuples.len(),
        tuples,
        rational: r.all_rational(),
    })
}

fn solve_check(
    group: &str,
    t: &CharTable,
    file: &str,
    text: &str,
    opts: &ReportOptions,
) -> Outcome {
    let golden = match TupleGolden::parse(file, text) {
        Ok(g) => g,
        Err(e) => return Outcome::Fail(vec![e.to_string()]),
    };
    let cfg = ChainConfig {
        mode: opts.mode,
        budget: opts.budget,
        ..ChainConfig::default()
    };
    match regenerate_tuples(group, t, golden.order, &cfg) {
        Err(SolveError::BudgetExceeded(b)) => Outcome::Budget(format!("more than {b} nodes")),
        Err(e) => Outcome::Fail(vec![format!("{group} order {}: {e}", golden.order)]),
        Ok(got) => {
            let mut d = diff_tuples(&golden, &got);
            if d.is_empty() && got.render() != text {
                d.push(format!(
                    "{file}: contents agree but the serialization differs"
                ));
            }
            if d.is_empty() {
                Outcome::Pass
            } else {
                Outcome::Fail(d)
            }
        }
    }
}

enum Job {
    Tuples {
        group: String,
        file: String,
    },
    FullTuples {
        group: String,
        order: u64,
        tag: String,
    },
    FullCount {
        order: u64,
        count: usize,
    },
    Mu(usize),
    StRows {
        group: String,
        order: u64,
    },
    StVerdict(usize),
    Search,
}

/// Run every pinned computation against the golden datasets.
pub fn run(opts: &ReportOptions) -> Result<Report, ReportError> {
    let groups = ["co3", "co2", "co1"];
    let mut tables = BTreeMap::new();
    for g in groups {
        tables.insert(g, bundled_table(g)?);
    }
    let mu_text = opts.goldens.read("mu_forms.txt")?;
    let mu_blocks = parse_mu_golden("mu_forms.txt", &mu_text)?;
    let st_rows = parse_st_rows("st_rows.txt", &opts.goldens.read("st_rows.txt")?)?;
    let st_verdicts = parse_st_verdicts("st_verdicts.txt", &opts.goldens.read("st_verdicts.txt")?)?;
    let search = SearchGolden::parse("st_search.txt", &opts.goldens.read("st_search.txt")?)?;

    let mut jobs = Vec::new();
    for g in groups {
        let mut orders: Vec<u64> = golden_names()
            .iter()
            .filter_map(|n| {
                n.strip_prefix(&format!("{g}_"))?
                    .strip_suffix(".txt")?
                    .parse()
                    .ok()
            })
            .collect();
        orders.sort_unstable();
        for k in orders {
            if let Some((_, _, tag)) = NEEDS_FULL_TABLE
                .iter()
                .find(|(gg, kk, _)| *gg == g && *kk == k)
            {
                jobs.push(Job::FullTuples {
                    group: g.to_string(),
                    order: k,
                    tag: tag.to_string(),
                });
            } else {
                jobs.push(Job::Tuples {
                    group: g.to_string(),
                    file: TupleGolden::file_name(g, k),
                });
            }
        }
    }
    for &(order, count) in CO3_FULL_COUNTS {
        jobs.push(Job::FullCount { order, count });
    }
    jobs.extend((0..mu_blocks.len()).map(Job::Mu));
    let mut seen = BTreeSet::new();
    for r in &st_rows {
        if seen.insert((r.group.clone(), r.order)) {
            jobs.push(Job::StRows {
                group: r.group.clone(),
                order: r.order,
            });
        }
    }
    jobs.extend((0..st_verdicts.len()).map(Job::StVerdict));
    jobs.push(Job::Search);

    let skipped = |tags: &[&str]| tags.iter().any(|t| opts.skip.contains(*t));
    let checks: Vec<Check> = jobs
        .par_iter()
        .map(|job| match job {
            Job::Tuples { group, file } => {
                let k = file
                    .trim_end_matches(".txt")
                    .rsplit('_')
                    .next()
                    .unwrap_or("");
                let tag = format!("{group}-{k}");
                let tags = [group.as_str(), tag.as_str(), "tuples"];
                let name = format!("{group} order {k}: solution set");
                if skipped(&tags) {
                    return Check::new(name, &tags, Outcome::Skipped("by request".into()));
                }
                let outcome = match opts.goldens.read(file) {
                    Ok(text) => solve_check(group, &tables[group.as_str()], file, &text, opts),
                    Err(e) => Outcome::Fail(vec![e.to_string()]),
                };
                Check::new(name, &tags, outcome)
            }
            Job::FullTuples { group, order, tag } => {
                let otag = format!("{group}-{order}");
                let tags = [group.as_str(), otag.as_str(), tag.as_str(), "tuples"];
                let name = format!("{group} order {order}: solution set (complete table)");
                if skipped(&tags) {
                    return Check::new(name, &tags, Outcome::Skipped("by request".into()));
                }
                let outcome = match opts.full_tables.get(group.as_str()) {
                    None => Outcome::Skipped(format!("needs a complete {group} table")),
                    Some(t) => {
                        let file = TupleGolden::file_name(group, *order);
                        match opts.goldens.read(&file) {
                            Ok(text) => solve_check(group, t, &file, &text, opts),
                            Err(e) => Outcome::Fail(vec![e.to_string()]),
                        }
                    }
                };
                Check::new(name, &tags, outcome)
            }
            Job::FullCount { order, count } => {
                let otag = format!("co3-{order}");
                let tags = ["co3", otag.as_str(), "co3-4-14", "tuples"];
                let name = format!("co3 order {order}: {count} tuples (complete table)");
                if skipped(&tags) {
                    return Check::new(name, &tags, Outcome::Skipped("by request".into()));
                }
                let outcome = match opts.full_tables.get("co3") {
                    None => Outcome::Skipped("needs a complete co3 table".into()),
                    Some(t) => {
                        let cfg = ChainConfig {
                            mode: opts.mode,
                            budget: opts.budget,
                            ..ChainConfig::default()
                        };
                        match chain_solve(t, *order, &cfg) {
                            Err(SolveError::BudgetExceeded(b)) => {
                                Outcome::Budget(format!("more than {b} nodes"))
                            }
                            Err(e) => Outcome::Fail(vec![e.to_string()]),
                            Ok(r) if r.top_tuples().len() == *count => Outcome::Pass,
                            Ok(r) => Outcome::Fail(vec![format!(
                                "co3 order {order}: {} tuples, expected {count}",
                                r.top_tuples().len()
                            )]),
                        }
                    }
                };
                Check::new(name, &tags, outcome)
            }
            Job::Mu(i) => {
                let b = &mu_blocks[*i];
                let otag = format!("{}-{}", b.group, b.order);
                let tags = [b.group.as_str(), otag.as_str(), "mu"];
                let name = format!("{} order {}: displayed mu forms", b.group, b.order);
                if skipped(&tags) {
                    return Check::new(name, &tags, Outcome::Skipped("by request".into()));
                }
                let outcome = match tables.get(b.group.as_str()) {
                    None => Outcome::Fail(vec![format!("unknown group {}", b.group)]),
                    Some(t) => {
                        let f = check_mu_block(t, b);
                        if f.is_empty() {
                            Outcome::Pass
                        } else {
                            Outcome::Fail(f)
                        }
                    }
                };
                Check::new(name, &tags, outcome)
            }
            Job::StRows { group, order } => {
                let otag = format!("{group}-{order}");
                let tags = [group.as_str(), otag.as_str(), "st-rows"];
                let name = format!("{group} order {order}: (m1, mp, mq) rows");
                if skipped(&tags) {
                    return Check::new(name, &tags, Outcome::Skipped("by request".into()));
                }
                let outcome = match tables.get(group.as_str()) {
                    None => Outcome::Fail(vec![format!("unknown group {group}")]),
                    Some(t) => {
                        let f: Vec<String> = st_rows
                            .iter()
                            .filter(|r| &r.group == group && r.order == *order)
                            .filter_map(|r| r.mismatch(t))
                            .collect();
                        if f.is_empty() {
                            Outcome::Pass
                        } else {
                            Outcome::Fail(f)
                        }
                    }
                };
                Check::new(name, &tags, outcome)
            }
            Job::StVerdict(i) => {
                let v = &st_verdicts[*i];
                let otag = format!("{}-{}", v.group, v.p * v.q);
                let tags = [v.group.as_str(), otag.as_str(), "rule-out"];
                let name = format!("{}: {}", v.describe(), v.verdict);
                if skipped(&tags) {
                    return Check::new(name, &tags, Outcome::Skipped("by request".into()));
                }
                let outcome = match tables.get(v.group.as_str()) {
                    None => Outcome::Fail(vec![format!("unknown group {}", v.group)]),
                    Some(t) => match v.run(t) {
                        Ok(s) if s == v.verdict => Outcome::Pass,
                        Ok(s) => Outcome::Fail(vec![format!("{}: regenerated {s}", v.describe())]),
                        Err(e) => Outcome::Fail(vec![format!("{}: {e}", v.describe())]),
                    },
                };
                Check::new(name, &tags, outcome)
            }
            Job::Search => {
                let tags = ["co3", "co3-35", "search"];
                let name = "co3 (5,7): irreducible difference tuples".to_string();
                if skipped(&tags) {
                    return Check::new(name, &tags, Outcome::Skipped("by request".into()));
                }
                let got = search.regenerate();
                let mut f = Vec::new();
                for t in search.tuples.difference(&got) {
                    f.push(format!("golden tuple {} not regenerated", fmt_tuple(t)));
                }
                for t in got.difference(&search.tuples) {
                    f.push(format!(
                        "regenerated tuple {} missing from golden",
                        fmt_tuple(t)
                    ));
                }
                Check::new(
                    name,
                    &tags,
                    if f.is_empty() {
                        Outcome::Pass
                    } else {
                        Outcome::Fail(f)
                    },
                )
            }
        })
        .collect();
    Ok(Report { checks })
}

/// Rows whose published form disagrees with the recomputation.
pub fn printed_row_discrepancies(rows: &[StRowGolden]) -> Result<Vec<String>, ReportError> {
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| !r.printed.is_empty()) {
        let t = bundled_table(&r.group)?;
        let p = r.as_printed().map_err(|m| perr("st_rows.txt", r.line, m))?;
        if let Some(m) = p.mismatch(&t) {
            out.push(m);
        }
    }
    Ok(out)
}

/// The bundled `(m1, mp, mq)` golden rows.
pub fn bundled_st_rows() -> Vec<StRowGolden> {
    parse_st_rows(
        "st_rows.txt",
        &GoldenSource::Bundled.read("st_rows.txt").expect("bundled"),
    )
    .expect("bundled st_rows.txt parses")
}
