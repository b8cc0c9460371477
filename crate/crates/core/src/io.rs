//! File formats.
//!
//! JSON documents are written with every float printed to 17 significant
//! digits (see [`crate::numfmt`]); non-finite values become `null`. Grid
//! fields are CSV with one line per grid row, row 0 first, and empty cells
//! for nodes outside the mask.

use std::collections::BTreeMap;
use std::io;

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::cocycle::{Coupling, ViolationReport};
use crate::error::{Error, Result};
use crate::gluing::{GridDomain, LocalFunctionFamily, Patch, ScalarField, TileRect, VectorField};
use crate::numfmt::g17;
use crate::path_chain::Chain;
use crate::solver::{HolonomyReport, Primitive};
use crate::DEFAULT_TOLERANCE;

struct G17<F>(F);

macro_rules! delegate {
    ($($name:ident),*) => {$(
        fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        }
    )*};
}

impl<F: Formatter> Formatter for G17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(g17(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    delegate!(
        begin_array,
        end_array,
        end_array_value,
        begin_object,
        end_object,
        begin_object_value,
        end_object_value
    );
}

/// Serializes `value` as JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T, pretty: bool) -> Result<String> {
    let mut buf = Vec::new();
    if pretty {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17(PrettyFormatter::new()));
        value.serialize(&mut ser)?;
    } else {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17(CompactFormatter));
        value.serialize(&mut ser)?;
    }
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Deserialize)]
struct RawCoupling {
    #[serde(default)]
    tolerance: Option<f64>,
    values: Vec<(String, String, f64)>,
}

/// Parses `{"tolerance": t, "values": [[U, V, d], ...]}`. Without `strict`,
/// pairs listed in one orientation get `d_VU = -d_UV`.
pub fn parse_coupling(text: &str, strict: bool) -> Result<Coupling> {
    let raw: RawCoupling = serde_json::from_str(text)?;
    let tol = raw.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if !(tol >= 0.0) {
        return Err(Error::Parse("coupling tolerance must be non-negative".into()));
    }
    Coupling::from_entries(tol, raw.values, strict)
}

pub fn coupling_json(d: &Coupling) -> serde_json::Value {
    let values: Vec<serde_json::Value> = d.iter().map(|(u, v, x)| serde_json::json!([u, v, x])).collect();
    serde_json::json!({ "tolerance": d.tolerance, "values": values })
}

/// `{"base": U0, "values": {U: C_U}}`. Primitives spanning several
/// components also list every component base under `"bases"`.
pub fn primitive_json(c: &Primitive) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    obj.insert(
        "base".into(),
        c.base_set().map_or(serde_json::Value::Null, |b| b.into()),
    );
    if c.bases().len() > 1 {
        obj.insert("bases".into(), c.bases().into());
    }
    let values: serde_json::Map<String, serde_json::Value> =
        c.values().iter().map(|(k, v)| (k.clone(), (*v).into())).collect();
    obj.insert("values".into(), values.into());
    obj.into()
}

#[derive(Deserialize)]
struct RawPrimitive {
    base: Option<String>,
    #[serde(default)]
    bases: Vec<String>,
    values: BTreeMap<String, f64>,
}

pub fn parse_primitive(text: &str) -> Result<Primitive> {
    let raw: RawPrimitive = serde_json::from_str(text)?;
    let bases = if raw.bases.is_empty() {
        raw.base.into_iter().collect()
    } else {
        raw.bases
    };
    Ok(Primitive::from_values(raw.values, bases))
}

/// `{"cycles": [{"nodes": [...], "holonomy": h}], "max": m}`
pub fn holonomy_json(report: &HolonomyReport) -> serde_json::Value {
    let cycles: Vec<serde_json::Value> = report
        .entries
        .iter()
        .map(|e| serde_json::json!({ "nodes": e.cycle.nodes, "holonomy": e.holonomy }))
        .collect();
    serde_json::json!({ "cycles": cycles, "max": report.max_abs_holonomy })
}

pub fn violations_json(report: &ViolationReport) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["clean"] = report.is_clean().into();
    v
}

pub fn chain_json(chain: &Chain, start: &str, end: &str, sum: f64) -> serde_json::Value {
    serde_json::json!({
        "breakpoints": chain.breakpoints,
        "charts": chain.charts,
        "start": start,
        "end": end,
        "chain_sum": sum,
    })
}

/// Grid header `{"width": w, "height": h, "spacing": s}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
pub struct GridHeader {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
}

pub fn parse_header(text: &str) -> Result<GridHeader> {
    Ok(serde_json::from_str(text)?)
}

/// Reads a `width x height` CSV grid; empty cells are `None`.
pub fn parse_grid_csv(text: &str, width: usize, height: usize) -> Result<Vec<Option<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::with_capacity(width * height);
    let mut rows = 0;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != width {
            return Err(Error::Parse(format!(
                "row {r} has {} cells, expected {width}",
                rec.len()
            )));
        }
        for (c, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                out.push(None);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number `{cell}` at row {r}, column {c}")))?;
                out.push(Some(v));
            }
        }
        rows += 1;
    }
    if rows != height {
        return Err(Error::Parse(format!("grid has {rows} rows, expected {height}")));
    }
    Ok(out)
}

pub fn grid_csv(width: usize, values: &[Option<f64>]) -> String {
    let mut s = String::new();
    for row in values.chunks(width) {
        let cells: Vec<String> = row.iter().map(|v| v.map(g17).unwrap_or_default()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn scalar_field_csv(f: &ScalarField) -> String {
    grid_csv(f.width(), f.values())
}

/// Domain and vector field from a header and the two component CSVs. The
/// mask is the set of non-empty cells, which must agree between `gx` and `gy`.
pub fn parse_vector_field(header: &GridHeader, gx_csv: &str, gy_csv: &str) -> Result<(GridDomain, VectorField)> {
    let gx = parse_grid_csv(gx_csv, header.width, header.height)?;
    let gy = parse_grid_csv(gy_csv, header.width, header.height)?;
    let mask = gx.iter().map(Option::is_some).collect();
    let domain = GridDomain::new(header.width, header.height, header.spacing, mask)?;
    let g = VectorField::new(&domain, gx, gy)?;
    Ok((domain, g))
}

#[derive(serde::Serialize, Deserialize)]
struct RawPatch {
    rect: TileRect,
    values: Vec<Vec<Option<f64>>>,
}

#[derive(serde::Serialize, Deserialize)]
struct RawFamily {
    width: usize,
    height: usize,
    spacing: f64,
    patches: BTreeMap<String, RawPatch>,
}

/// Parses a patch family:
/// `{"width", "height", "spacing", "patches": {id: {"rect": [c0, r0, c1, r1],
/// "values": [[v | null, ...], ...]}}}`, where `values` has one row per grid
/// row of the half-open rectangle.
pub fn parse_family(text: &str) -> Result<LocalFunctionFamily> {
    let raw: RawFamily = serde_json::from_str(text)?;
    let mut patches = BTreeMap::new();
    for (id, p) in raw.patches {
        let r = p.rect;
        if r.col0 >= r.col1 || r.row0 >= r.row1 || r.col1 > raw.width || r.row1 > raw.height {
            return Err(Error::Parse(format!("patch `{id}` has an invalid rectangle")));
        }
        if p.values.len() != r.row1 - r.row0 || p.values.iter().any(|row| row.len() != r.col1 - r.col0) {
            return Err(Error::Parse(format!("patch `{id}` values do not match its rectangle")));
        }
        let mut samples = Vec::new();
        for (dr, row) in p.values.iter().enumerate() {
            for (dc, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    samples.push(((r.row0 + dr) * raw.width + r.col0 + dc, *v));
                }
            }
        }
        patches.insert(id, Patch::new(r, samples));
    }
    Ok(LocalFunctionFamily {
        width: raw.width,
        height: raw.height,
        spacing: raw.spacing,
        patches,
    })
}

pub fn family_json(family: &LocalFunctionFamily) -> Result<String> {
    let patches = family
        .patches
        .iter()
        .map(|(id, p)| {
            let r = p.rect;
            let values = (r.row0..r.row1)
                .map(|row| (r.col0..r.col1).map(|col| p.get(row * family.width + col)).collect())
                .collect();
            (id.clone(), RawPatch { rect: r, values })
        })
        .collect();
    to_json(
        &RawFamily {
            width: family.width,
            height: family.height,
            spacing: family.spacing,
            patches,
        },
        false,
    )
}
