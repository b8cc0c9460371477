//! Couplings and their compatibility conditions.
//!
//! Both orientations of every pair are stored explicitly. Measured data can
//! violate antisymmetry, and the checks here report that instead of hiding it
//! behind a one-orientation representation.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nerve::Cover;
use crate::solver::Primitive;
use crate::DEFAULT_TOLERANCE;

/// Scalar values `d[U][V]` on ordered intersecting pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    values: BTreeMap<String, BTreeMap<String, f64>>,
    /// Absolute tolerance carried with the data (from the coupling file).
    pub tolerance: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Coupling::new(DEFAULT_TOLERANCE)
    }
}

impl Coupling {
    pub fn new(tolerance: f64) -> Self {
        Coupling {
            values: BTreeMap::new(),
            tolerance,
        }
    }

    /// Builds a coupling from oriented entries `(U, V, d_UV)`.
    ///
    /// Listing the same ordered pair twice is an error. Unless `strict`, a
    /// pair given in one orientation only is completed with `d_VU = -d_UV`;
    /// in strict mode the missing orientation is reported.
    pub fn from_entries<I>(tolerance: f64, entries: I, strict: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut d = Coupling::new(tolerance);
        for (u, v, x) in entries {
            if d.get(&u, &v).is_some() {
                return Err(Error::DuplicatePairValue(u, v));
            }
            d.insert(u, v, x);
        }
        let missing: Vec<(String, String, f64)> = d
            .iter()
            .filter(|(u, v, _)| d.get(v, u).is_none())
            .map(|(u, v, x)| (u.to_owned(), v.to_owned(), x))
            .collect();
        for (u, v, x) in missing {
            if strict {
                return Err(Error::MissingPairValue(v, u));
            }
            d.insert(v, u, -x);
        }
        Ok(d)
    }

    /// Sets `d[u][v]` only.
    pub fn insert(&mut self, u: impl Into<String>, v: impl Into<String>, value: f64) {
        self.values.entry(u.into()).or_default().insert(v.into(), value);
    }

    /// Sets `d[u][v] = value` and `d[v][u] = -value`.
    pub fn insert_antisymmetric(&mut self, u: &str, v: &str, value: f64) {
        self.insert(u, v, value);
        self.insert(v, u, -value);
    }

    pub fn get(&self, u: &str, v: &str) -> Option<f64> {
        self.values.get(u).and_then(|row| row.get(v)).copied()
    }

    /// Value of `d[u][v]`, or `MissingPairValue`.
    pub fn value(&self, u: &str, v: &str) -> Result<f64> {
        self.get(u, v)
            .ok_or_else(|| Error::MissingPairValue(u.to_owned(), v.to_owned()))
    }

    /// All oriented entries in `(U, V)` lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.values
            .iter()
            .flat_map(|(u, row)| row.iter().map(move |(v, &x)| (u.as_str(), v.as_str(), x)))
    }

    pub fn len(&self) -> usize {
        self.values.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that the entries are exactly both orientations of the cover's
    /// pairs.
    pub fn check_domain(&self, cover: &Cover) -> Result<()> {
        // With both orientations of every pair present, a matching count
        // leaves no room for stray entries.
        if self.len() != 2 * cover.pairs().len() {
            for (u, v, _) in self.iter() {
                if u == v || !cover.has_pair(u, v) {
                    return Err(Error::PairNotInNerve(u.to_owned(), v.to_owned()));
                }
            }
        }
        for (a, b) in cover.pairs() {
            self.value(a, b)?;
            self.value(b, a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairViolation {
    pub pair: (String, String),
    /// `|d_UV + d_VU|`
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleViolation {
    pub triple: (String, String, String),
    /// Largest `|d_UV + d_VW - d_UW|` over the three rotations of the triple.
    pub magnitude: f64,
}

/// Result of checking antisymmetry on every pair and additivity on every
/// declared triple. Violations are listed in identifier order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub tolerance: f64,
    pub antisymmetry_violations: Vec<PairViolation>,
    pub additivity_violations: Vec<TripleViolation>,
    pub max_residual: f64,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.antisymmetry_violations.is_empty() && self.additivity_violations.is_empty()
    }
}

/// Checks `|d_UV + d_VU| <= tol` on every pair and
/// `|d_UV + d_VW - d_UW| <= tol` on every rotation of every declared triple.
///
/// A missing value is an error, not a violation.
pub fn validate_compatibility(cover: &Cover, d: &Coupling, tol: f64) -> Result<ViolationReport> {
    d.check_domain(cover)?;
    let mut max_residual = 0.0f64;

    let mut antisymmetry_violations = Vec::new();
    for (a, b) in cover.pairs() {
        let r = (d.value(a, b)? + d.value(b, a)?).abs();
        max_residual = max_residual.max(r);
        if !(r <= tol) {
            antisymmetry_violations.push(PairViolation {
                pair: (a.clone(), b.clone()),
                magnitude: r,
            });
        }
    }

    let mut additivity_violations = Vec::new();
    for (a, b, c) in cover.triples() {
        let mut worst = 0.0f64;
        for (u, v, w) in [(a, b, c), (b, c, a), (c, a, b)] {
            let r = (d.value(u, v)? + d.value(v, w)? - d.value(u, w)?).abs();
            worst = if r.is_nan() { r } else { worst.max(r) };
        }
        max_residual = max_residual.max(worst);
        if !(worst <= tol) {
            additivity_violations.push(TripleViolation {
                triple: (a.clone(), b.clone(), c.clone()),
                magnitude: worst,
            });
        }
    }

    Ok(ViolationReport {
        tolerance: tol,
        antisymmetry_violations,
        additivity_violations,
        max_residual,
    })
}

/// The coupling `d_UV = C_V - C_U` of a primitive candidate.
pub fn induced_coupling(cover: &Cover, c: &Primitive) -> Result<Coupling> {
    let mut d = Coupling::default();
    for (a, b) in cover.pairs() {
        let ca = c.value(a)?;
        let cb = c.value(b)?;
        d.insert(a.as_str(), b.as_str(), cb - ca);
        d.insert(b.as_str(), a.as_str(), ca - cb);
    }
    Ok(d)
}

/// `max |d_UV - (C_V - C_U)|` over ordered pairs.
pub fn primitive_residual(cover: &Cover, d: &Coupling, c: &Primitive) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, b) in cover.pairs() {
        let (ca, cb) = (c.value(a)?, c.value(b)?);
        let r1 = (d.value(a, b)? - (cb - ca)).abs();
        let r2 = (d.value(b, a)? - (ca - cb)).abs();
        worst = worst.max(r1).max(r2);
    }
    Ok(worst)
}
