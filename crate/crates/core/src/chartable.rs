//! Conjugacy classes, power maps and (possibly partial) ordinary and
//! Brauer character data, plus the JSON interchange format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::cyclotomic::CycInt;
use crate::numtheory::{factor, from_factored, gcd, is_prime};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid table ({invariant}): {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },
    #[error("table is incomplete: {0}")]
    IncompleteTable(String),
    #[error("no power map for prime {prime} on class {class}")]
    MissingPowerMap { class: String, prime: u64 },
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn invalid(invariant: &'static str, detail: impl Into<String>) -> TableError {
    TableError::Validation {
        invariant,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharacterKind {
    Ordinary,
    Brauer(u64),
}

impl CharacterKind {
    /// Short tag as used in diagnostics: `*` for ordinary, the prime otherwise.
    pub fn tag(&self) -> String {
        match self {
            CharacterKind::Ordinary => "*".into(),
            CharacterKind::Brauer(p) => p.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjClass {
    pub name: String,
    pub order: u64,
    pub size: Option<u64>,
    pub power_map: BTreeMap<u64, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Character {
    pub id: String,
    pub kind: CharacterKind,
    pub degree: u64,
    /// Indexed like the table's classes; `None` where the value is unknown.
    values: Vec<Option<CycInt>>,
}

impl Character {
    pub fn new(
        id: impl Into<String>,
        kind: CharacterKind,
        degree: u64,
        values: Vec<Option<CycInt>>,
    ) -> Self {
        Character {
            id: id.into(),
            kind,
            degree,
            values,
        }
    }

    pub fn value(&self, class: usize) -> Option<&CycInt> {
        self.values.get(class).and_then(Option::as_ref)
    }

    pub fn values(&self) -> &[Option<CycInt>] {
        &self.values
    }

    /// The sum character; a value is known only where both summands are known.
    pub fn sum(&self, other: &Character, id: impl Into<String>) -> Option<Character> {
        if self.kind != other.kind || self.values.len() != other.values.len() {
            return None;
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            })
            .collect();
        Some(Character::new(
            id,
            self.kind,
            self.degree + other.degree,
            values,
        ))
    }

    /// Whether this character may be used for units of order `k`.
    pub fn usable_for_order(&self, k: u64) -> bool {
        match self.kind {
            CharacterKind::Ordinary => true,
            CharacterKind::Brauer(p) => gcd(p, k) == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharTable {
    pub group_name: String,
    pub order_factored: Vec<(u64, u32)>,
    pub exponent_factored: Vec<(u64, u32)>,
    pub source: Option<String>,
    pub classes: Vec<ConjClass>,
    pub characters: Vec<Character>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    order_factored: Vec<(u64, u32)>,
    exponent_factored: Vec<(u64, u32)>,
    classes: Vec<ClassDoc>,
    characters: Vec<CharDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDoc {
    name: String,
    order: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size: Option<u64>,
    #[serde(default)]
    powermap: BTreeMap<u64, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CharDoc {
    id: String,
    kind: CharacterKind,
    degree: u64,
    values: Map<String, Value>,
}

/// Leading decimal digits of a class label, e.g. 12 for "12c".
fn name_order(name: &str) -> Option<u64> {
    let digits: String = name.chars().take_while(char::is_ascii_digit).collect();
    let rest = &name[digits.len()..];
    if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_lowercase()) {
        return None;
    }
    digits.parse().ok()
}

fn divides_factored(a: &[(u64, u32)], b: &[(u64, u32)]) -> bool {
    a.iter()
        .all(|&(p, e)| b.iter().any(|&(q, f)| q == p && f >= e))
}

fn check_factored(what: &'static str, f: &[(u64, u32)]) -> Result<(), TableError> {
    let mut last = 1;
    for &(p, e) in f {
        if !is_prime(p) || e == 0 || p <= last {
            return Err(invalid(
                what,
                format!("entry [{p}, {e}] is not a strictly increasing prime power"),
            ));
        }
        last = p;
    }
    Ok(())
}

impl CharTable {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let doc: TableDoc = serde_json::from_str(text).map_err(|e| TableError::Syntax {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        Self::from_doc(doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn from_doc(doc: TableDoc) -> Result<Self, TableError> {
        check_factored("order_factored", &doc.order_factored)?;
        check_factored("exponent_factored", &doc.exponent_factored)?;
        if !divides_factored(&doc.exponent_factored, &doc.order_factored) {
            return Err(invalid(
                "exponent divides group order",
                "exponent does not divide the group order",
            ));
        }
        let exponent = from_factored(&doc.exponent_factored)
            .and_then(|e| u64::try_from(e).ok())
            .ok_or_else(|| invalid("exponent", "exponent does not fit in 64 bits"))?;

        let mut index = HashMap::new();
        let mut classes = Vec::with_capacity(doc.classes.len());
        for (i, c) in doc.classes.into_iter().enumerate() {
            if index.insert(c.name.clone(), i).is_some() {
                return Err(invalid(
                    "unique class names",
                    format!("class {} repeated", c.name),
                ));
            }
            if name_order(&c.name) != Some(c.order) {
                return Err(invalid(
                    "class name prefix equals element order",
                    format!("class {} has element order {}", c.name, c.order),
                ));
            }
            if c.order == 0 || exponent % c.order != 0 {
                return Err(invalid(
                    "element orders divide the exponent",
                    format!(
                        "class {} of order {} vs exponent {exponent}",
                        c.name, c.order
                    ),
                ));
            }
            if c.size == Some(0) {
                return Err(invalid(
                    "class sizes positive",
                    format!("class {} has size 0", c.name),
                ));
            }
            classes.push(ConjClass {
                name: c.name,
                order: c.order,
                size: c.size,
                power_map: c.powermap,
            });
        }
        match classes.first() {
            Some(c) if c.name == "1a" && c.order == 1 => {}
            _ => return Err(invalid("identity class first", "first class must be 1a")),
        }
        for c in &classes {
            for (&p, target) in &c.power_map {
                if !is_prime(p) {
                    return Err(invalid(
                        "power maps indexed by primes",
                        format!("class {} has power map key {p}", c.name),
                    ));
                }
                let t = index.get(target).ok_or_else(|| {
                    invalid(
                        "power map targets exist",
                        format!("{}^{p} -> unknown class {target}", c.name),
                    )
                })?;
                let want = c.order / gcd(c.order, p);
                if classes[*t].order != want {
                    return Err(invalid(
                        "power map orders",
                        format!(
                            "{}^{p} -> {target}, expected an element of order {want}",
                            c.name
                        ),
                    ));
                }
            }
        }
        if classes.iter().all(|c| c.size.is_some()) {
            let total: u128 = classes.iter().map(|c| c.size.unwrap() as u128).sum();
            if from_factored(&doc.order_factored) != Some(total) {
                return Err(invalid(
                    "class sizes sum to the group order",
                    format!("sizes sum to {total}"),
                ));
            }
        }

        let mut ids = BTreeSet::new();
        let mut characters = Vec::with_capacity(doc.characters.len());
        for ch in doc.characters {
            if !ids.insert(ch.id.clone()) {
                return Err(invalid(
                    "unique character ids",
                    format!("character {} repeated", ch.id),
                ));
            }
            if ch.degree == 0 {
                return Err(invalid(
                    "positive degree",
                    format!("character {} has degree 0", ch.id),
                ));
            }
            if let CharacterKind::Brauer(p) = ch.kind {
                if !is_prime(p) || !doc.order_factored.iter().any(|&(q, _)| q == p) {
                    return Err(invalid(
                        "Brauer prime divides the group order",
                        format!("character {} has p = {p}", ch.id),
                    ));
                }
            }
            let mut values = vec![None; classes.len()];
            for (name, v) in ch.values {
                let i = *index.get(&name).ok_or_else(|| {
                    invalid(
                        "character values on known classes",
                        format!("character {} names class {name}", ch.id),
                    )
                })?;
                let text = match &v {
                    Value::String(s) => s.clone(),
                    Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
                    other => {
                        return Err(invalid(
                            "cyclotomic values",
                            format!("character {} on {name}: {other}", ch.id),
                        ))
                    }
                };
                let value: CycInt = text.parse().map_err(|e| {
                    invalid(
                        "cyclotomic values",
                        format!("character {} on {name}: {e}", ch.id),
                    )
                })?;
                if let CharacterKind::Brauer(p) = ch.kind {
                    if classes[i].order % p == 0 {
                        return Err(invalid(
                            "Brauer characters live on p-regular classes",
                            format!("character {} has a value on {name}", ch.id),
                        ));
                    }
                }
                values[i] = Some(value);
            }
            if let Some(v) = &values[0] {
                if v.to_integer() != Some(BigInt::from(ch.degree)) {
                    return Err(invalid(
                        "value on 1a equals the degree",
                        format!(
                            "character {} has degree {} but value {v} on 1a",
                            ch.id, ch.degree
                        ),
                    ));
                }
            }
            characters.push(Character::new(ch.id, ch.kind, ch.degree, values));
        }

        Ok(CharTable {
            group_name: doc.group,
            order_factored: doc.order_factored,
            exponent_factored: doc.exponent_factored,
            source: doc.source,
            classes,
            characters,
            index,
        })
    }

    fn to_doc(&self) -> TableDoc {
        TableDoc {
            group: self.group_name.clone(),
            source: self.source.clone(),
            order_factored: self.order_factored.clone(),
            exponent_factored: self.exponent_factored.clone(),
            classes: self
                .classes
                .iter()
                .map(|c| ClassDoc {
                    name: c.name.clone(),
                    order: c.order,
                    size: c.size,
                    powermap: c.power_map.clone(),
                })
                .collect(),
            characters: self
                .characters
                .iter()
                .map(|ch| CharDoc {
                    id: ch.id.clone(),
                    kind: ch.kind,
                    degree: ch.degree,
                    values: ch
                        .values
                        .iter()
                        .enumerate()
                        .filter_map(|(i, v)| {
                            v.as_ref().map(|v| {
                                (self.classes[i].name.clone(), Value::String(v.to_string()))
                            })
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Serialise to the interchange format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("table serialises")
    }

    pub fn group_order(&self) -> Option<u128> {
        from_factored(&self.order_factored)
    }

    pub fn exponent(&self) -> u64 {
        from_factored(&self.exponent_factored).unwrap() as u64
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn class(&self, name: &str) -> Option<&ConjClass> {
        self.class_index(name).map(|i| &self.classes[i])
    }

    pub fn character(&self, id: &str) -> Option<&Character> {
        self.characters.iter().find(|c| c.id == id)
    }

    /// Element orders occurring in the table.
    pub fn spectrum(&self) -> BTreeSet<u64> {
        self.classes
            .iter()
            .map(|c| c.order)
            .filter(|&o| o > 1)
            .collect()
    }

    pub fn classes_of_order(&self, n: u64) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&i| self.classes[i].order == n)
            .collect()
    }

    /// Primes dividing the group order.
    pub fn primes(&self) -> Vec<u64> {
        self.order_factored.iter().map(|&(p, _)| p).collect()
    }

    /// True when every class has a size and every ordinary character every value.
    pub fn is_complete(&self) -> bool {
        self.classes.iter().all(|c| c.size.is_some())
            && self
                .characters
                .iter()
                .filter(|c| c.kind == CharacterKind::Ordinary)
                .all(|c| c.values.iter().all(Option::is_some))
    }

    /// The class of `g^d` for `g` in `class`.
    pub fn power_class(&self, class: &str, d: u64) -> Result<String, TableError> {
        let mut i = self
            .class_index(class)
            .ok_or_else(|| TableError::UnknownClass(class.to_string()))?;
        for (p, e) in factor(d) {
            for _ in 0..e {
                if i == 0 {
                    break;
                }
                let c = &self.classes[i];
                let target = c
                    .power_map
                    .get(&p)
                    .ok_or_else(|| TableError::MissingPowerMap {
                        class: c.name.clone(),
                        prime: p,
                    })?;
                i = self.index[target];
            }
        }
        Ok(self.classes[i].name.clone())
    }

    /// First orthogonality relation for all pairs of ordinary characters.
    pub fn validate_orthogonality(&self) -> Result<OrthogonalityReport, TableError> {
        let sizes: Vec<u64> = self
            .classes
            .iter()
            .map(|c| {
                c.size.ok_or_else(|| {
                    TableError::IncompleteTable(format!("class {} has no size", c.name))
                })
            })
            .collect::<Result<_, _>>()?;
        let ordinary: Vec<&Character> = self
            .characters
            .iter()
            .filter(|c| c.kind == CharacterKind::Ordinary)
            .collect();
        let mut full = Vec::with_capacity(ordinary.len());
        for ch in &ordinary {
            let vals: Vec<&CycInt> = ch
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_ref().ok_or_else(|| {
                        TableError::IncompleteTable(format!(
                            "character {} has no value on {}",
                            ch.id, self.classes[i].name
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            full.push(vals);
        }
        let order = CycInt::from_integer(BigInt::from(self.group_order().unwrap()));
        let mut failures = Vec::new();
        let mut checked = 0;
        for i in 0..full.len() {
            for j in i..full.len() {
                let s: CycInt = (0..sizes.len())
                    .map(|c| (full[i][c] * &full[j][c].conj()).scale(&BigInt::from(sizes[c])))
                    .sum();
                let want = if i == j {
                    order.clone()
                } else {
                    CycInt::zero()
                };
                checked += 1;
                if s != want {
                    failures.push((
                        ordinary[i].id.clone(),
                        ordinary[j].id.clone(),
                        s.to_string(),
                    ));
                }
            }
        }
        Ok(OrthogonalityReport { checked, failures })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalityReport {
    pub checked: usize,
    /// `(χ_i, χ_j, computed inner sum)` for every failing pair.
    pub failures: Vec<(String, String, String)>,
}

impl OrthogonalityReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}
