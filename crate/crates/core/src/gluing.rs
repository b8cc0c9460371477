//! Local-to-global gluing on masked 2D grids.
//!
//! Two pipelines share the primitive solver:
//!
//! - [`glue_functions`]: patches of samples whose pairwise differences are
//!   constant on overlaps are shifted by a primitive of those constants and
//!   merged into one field.
//! - [`poincare_reconstruct`]: a curl-free vector field is integrated inside
//!   each rectangle of a cover, and the resulting local potentials are glued.
//!   If the mask has holes around which the field circulates, the solver
//!   reports the circulation as holonomy instead.
//!
//! Grid nodes are addressed by `(col, row)`; node `(i, j)` sits at
//! `(x, y) = (i * h, j * h)` for spacing `h`. Integration uses the trapezoid
//! rule along grid edges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{validate_compatibility, Coupling};
use crate::error::{Error, Result};
use crate::nerve::Cover;
use crate::solver::solve_primitive;

/// Default half-size `k` of the generated `2k x 2k` tiles.
pub const DEFAULT_TILE: usize = 8;

/// Rectangular node grid with a membership mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    width: usize,
    height: usize,
    spacing: f64,
    mask: Vec<bool>,
}

impl GridDomain {
    /// `width` columns by `height` rows of nodes; `mask` is row-major.
    pub fn new(width: usize, height: usize, spacing: f64, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid("width and height must be positive".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid("spacing must be positive".into()));
        }
        if mask.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                width * height
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidGrid("mask selects no nodes".into()));
        }
        Ok(GridDomain {
            width,
            height,
            spacing,
            mask,
        })
    }

    pub fn from_fn(width: usize, height: usize, spacing: f64, inside: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mask = (0..height)
            .flat_map(|r| (0..width).map(move |c| (c, r)))
            .map(|(c, r)| inside(c, r))
            .collect();
        GridDomain::new(width, height, spacing, mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn col_row(&self, node: usize) -> (usize, usize) {
        (node % self.width, node / self.width)
    }

    pub fn is_masked(&self, col: usize, row: usize) -> bool {
        col < self.width && row < self.height && self.mask[self.index(col, row)]
    }

    pub fn coords(&self, col: usize, row: usize) -> (f64, f64) {
        (col as f64 * self.spacing, row as f64 * self.spacing)
    }

    /// Masked nodes in row-major order.
    pub fn masked_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mask.len()).filter(|&i| self.mask[i])
    }

    /// Masked 4-neighbor edges `(a, b)` with `b` to the right of or above `a`.
    pub fn masked_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.masked_nodes().flat_map(move |a| {
            let (c, r) = self.col_row(a);
            let right = self.is_masked(c + 1, r).then(|| (a, self.index(c + 1, r)));
            let up = self.is_masked(c, r + 1).then(|| (a, self.index(c, r + 1)));
            right.into_iter().chain(up)
        })
    }
}

/// Half-open node rectangle `[col0, col1) x [row0, row1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct TileRect {
    pub col0: usize,
    pub row0: usize,
    pub col1: usize,
    pub row1: usize,
}

impl From<[usize; 4]> for TileRect {
    fn from([col0, row0, col1, row1]: [usize; 4]) -> Self {
        TileRect { col0, row0, col1, row1 }
    }
}

impl From<TileRect> for [usize; 4] {
    fn from(r: TileRect) -> Self {
        [r.col0, r.row0, r.col1, r.row1]
    }
}

impl TileRect {
    pub fn new(col0: usize, row0: usize, col1: usize, row1: usize) -> Self {
        TileRect { col0, row0, col1, row1 }
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        col >= self.col0 && col < self.col1 && row >= self.row0 && row < self.row1
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row0..self.row1).flat_map(move |r| (self.col0..self.col1).map(move |c| (c, r)))
    }
}

/// A named rectangle of a grid cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub id: String,
    pub rect: TileRect,
}

fn tile_starts(n: usize, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut s = 0;
    loop {
        let e = (s + 2 * k).min(n);
        out.push((s, e));
        if e == n {
            return out;
        }
        s += k;
    }
}

/// Overlapping `2k x 2k` tiles at stride `k` (50% overlap), clipped to the
/// grid. Tiles without masked nodes are dropped. Identifiers `tRRR_CCC` sort
/// in row-major tile order.
pub fn tile_cover(domain: &GridDomain, k: usize) -> Result<Vec<Tile>> {
    if k == 0 {
        return Err(Error::InvalidGrid("tile size must be positive".into()));
    }
    let mut tiles = Vec::new();
    for (ty, &(r0, r1)) in tile_starts(domain.height, k).iter().enumerate() {
        for (tx, &(c0, c1)) in tile_starts(domain.width, k).iter().enumerate() {
            let rect = TileRect::new(c0, r0, c1, r1);
            if rect.nodes().any(|(c, r)| domain.is_masked(c, r)) {
                tiles.push(Tile {
                    id: format!("t{ty:03}_{tx:03}"),
                    rect,
                });
            }
        }
    }
    Ok(tiles)
}

/// Vector field `(gx, gy)` sampled on the masked nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl VectorField {
    /// Samples must be present exactly on masked nodes.
    pub fn new(domain: &GridDomain, gx: Vec<Option<f64>>, gy: Vec<Option<f64>>) -> Result<Self> {
        let n = domain.mask.len();
        if gx.len() != n || gy.len() != n {
            return Err(Error::InvalidGrid("field size does not match the grid".into()));
        }
        let mut out = VectorField {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
        };
        for i in 0..n {
            match (domain.mask[i], gx[i], gy[i]) {
                (true, Some(a), Some(b)) => {
                    out.gx[i] = a;
                    out.gy[i] = b;
                }
                (false, None, None) => {}
                _ => {
                    let (c, r) = domain.col_row(i);
                    return Err(Error::FieldMaskMismatch(c, r));
                }
            }
        }
        Ok(out)
    }

    /// Samples `f(x, y) -> (gx, gy)` at every masked node.
    pub fn from_fn(domain: &GridDomain, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let n = domain.mask.len();
        let mut out = VectorField {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
        };
        for i in domain.masked_nodes() {
            let (c, r) = domain.col_row(i);
            let (x, y) = domain.coords(c, r);
            let (a, b) = f(x, y);
            out.gx[i] = a;
            out.gy[i] = b;
        }
        out
    }

    pub fn gx(&self, node: usize) -> f64 {
        self.gx[node]
    }

    pub fn gy(&self, node: usize) -> f64 {
        self.gy[node]
    }

    /// Trapezoid increment of the potential from node `a` to its 4-neighbor `b`.
    pub fn edge_increment(&self, domain: &GridDomain, a: usize, b: usize) -> f64 {
        let h = domain.spacing;
        let (ca, ra) = domain.col_row(a);
        let (cb, rb) = domain.col_row(b);
        if ra == rb {
            let s = if cb > ca { 1.0 } else { -1.0 };
            s * 0.5 * h * (self.gx[a] + self.gx[b])
        } else {
            let s = if rb > ra { 1.0 } else { -1.0 };
            s * 0.5 * h * (self.gy[a] + self.gy[b])
        }
    }

    /// Trapezoid circulation around the plaquette with lower-left node
    /// `(col, row)`, counter-clockwise.
    pub fn plaquette_circulation(&self, domain: &GridDomain, col: usize, row: usize) -> f64 {
        let n00 = domain.index(col, row);
        let n10 = domain.index(col + 1, row);
        let n11 = domain.index(col + 1, row + 1);
        let n01 = domain.index(col, row + 1);
        self.edge_increment(domain, n00, n10)
            + self.edge_increment(domain, n10, n11)
            + self.edge_increment(domain, n11, n01)
            + self.edge_increment(domain, n01, n00)
    }
}

/// Scalar samples on a grid; `None` off the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<Option<f64>>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidGrid("field size does not match the grid".into()));
        }
        Ok(ScalarField { width, height, values })
    }

    pub fn from_fn(domain: &GridDomain, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.mask.len())
            .map(|i| {
                domain.mask[i].then(|| {
                    let (c, r) = domain.col_row(i);
                    let (x, y) = domain.coords(c, r);
                    f(x, y)
                })
            })
            .collect();
        ScalarField {
            width: domain.width,
            height: domain.height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        if col < self.width && row < self.height {
            self.values[row * self.width + col]
        } else {
            None
        }
    }

    /// Largest `|self - other - shift|` over nodes defined in both, where
    /// `shift` is the mean difference.
    pub fn max_diff_after_alignment(&self, other: &ScalarField) -> f64 {
        let diffs: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some((*a)? - (*b)?))
            .collect();
        if diffs.is_empty() {
            return 0.0;
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max)
    }
}

/// Samples of one local function on the grid nodes of its rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub rect: TileRect,
    /// Sampled node indices, ascending.
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl Patch {
    /// `samples` are `(node index, value)`; order does not matter.
    pub fn new(rect: TileRect, mut samples: Vec<(usize, f64)>) -> Self {
        samples.sort_by_key(|s| s.0);
        let (nodes, values) = samples.into_iter().unzip();
        Patch { rect, nodes, values }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn samples(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, node: usize) -> Option<f64> {
        self.nodes.binary_search(&node).ok().map(|k| self.values[k])
    }
}

/// Locally defined functions `f_U`, one patch per chart.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFunctionFamily {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    pub patches: BTreeMap<String, Patch>,
}

/// Shared sample nodes of each intersecting pair, plus triples of patches
/// with a common node.
struct Overlaps {
    ids: Vec<String>,
    pairs: BTreeMap<(usize, usize), Vec<usize>>,
    triples: BTreeSet<(usize, usize, usize)>,
}

impl LocalFunctionFamily {
    fn overlaps(&self) -> Overlaps {
        let ids: Vec<String> = self.patches.keys().cloned().collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.width * self.height];
        for (p, patch) in self.patches.values().enumerate() {
            for &n in &patch.nodes {
                members[n].push(p);
            }
        }
        let mut pairs: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut triples = BTreeSet::new();
        for (node, m) in members.iter().enumerate() {
            for a in 0..m.len() {
                for b in a + 1..m.len() {
                    pairs.entry((m[a], m[b])).or_default().push(node);
                    for c in b + 1..m.len() {
                        triples.insert((m[a], m[b], m[c]));
                    }
                }
            }
        }
        Overlaps { ids, pairs, triples }
    }

    /// Cover whose pairs and triples are patches sharing at least one node.
    pub fn cover(&self) -> Result<Cover> {
        let o = self.overlaps();
        cover_of(&o)
    }

    fn domain_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        for p in self.patches.values() {
            for &n in &p.nodes {
                mask[n] = true;
            }
        }
        mask
    }
}

fn cover_of(o: &Overlaps) -> Result<Cover> {
    Cover::new(
        o.ids.clone(),
        o.pairs.keys().map(|&(a, b)| (o.ids[a].clone(), o.ids[b].clone())),
        o.triples
            .iter()
            .map(|&(a, b, c)| (o.ids[a].clone(), o.ids[b].clone(), o.ids[c].clone())),
    )
}

fn mean_and_deviation(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn pair_constant(family: &LocalFunctionFamily, u: &str, v: &str, nodes: &[usize], tol: f64) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyOverlapSamples(u.to_owned(), v.to_owned()));
    }
    let (pu, pv) = (&family.patches[u], &family.patches[v]);
    let diffs: Vec<f64> = nodes
        .iter()
        .map(|&n| pv.get(n).expect("shared node") - pu.get(n).expect("shared node"))
        .collect();
    let (mean, dev) = mean_and_deviation(&diffs);
    if !(dev <= tol) {
        return Err(Error::NotConstantOnOverlap(u.to_owned(), v.to_owned(), dev));
    }
    Ok(mean)
}

/// `d_UV` = mean of `f_V - f_U` over the shared nodes of each intersecting
/// pair. The standard deviation of that difference must not exceed `tol`.
pub fn extract_coupling(family: &LocalFunctionFamily, tol: f64) -> Result<Coupling> {
    let o = family.overlaps();
    extract_from_overlaps(family, &o, tol)
}

/// [`extract_coupling`] on an explicitly declared cover. A declared pair
/// whose patches share no node fails with `EmptyOverlapSamples`.
pub fn extract_coupling_on(cover: &Cover, family: &LocalFunctionFamily, tol: f64) -> Result<Coupling> {
    let pairs: Vec<(String, String, Vec<usize>)> = cover
        .pairs()
        .iter()
        .map(|(u, v)| {
            let pu = family.patches.get(u).ok_or_else(|| Error::UnknownChart(u.clone()))?;
            let pv = family.patches.get(v).ok_or_else(|| Error::UnknownChart(v.clone()))?;
            let shared = pu.nodes.iter().copied().filter(|&n| pv.get(n).is_some()).collect();
            Ok((u.clone(), v.clone(), shared))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|(u, v, nodes)| pair_constant(family, u, v, nodes, tol))
        .collect::<Result<_>>()?;
    let mut d = Coupling::new(tol);
    for ((u, v, _), x) in pairs.iter().zip(values) {
        d.insert_antisymmetric(u, v, x);
    }
    Ok(d)
}

fn extract_from_overlaps(family: &LocalFunctionFamily, o: &Overlaps, tol: f64) -> Result<Coupling> {
    let pairs: Vec<(&(usize, usize), &Vec<usize>)> = o.pairs.iter().collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|(&(a, b), nodes)| pair_constant(family, &o.ids[a], &o.ids[b], nodes, tol))
        .collect::<Result<_>>()?;
    let mut d = Coupling::new(tol);
    for ((&(a, b), _), x) in pairs.iter().zip(values) {
        d.insert_antisymmetric(&o.ids[a], &o.ids[b], x);
    }
    Ok(d)
}

/// Glues the patches into one field `f = f_U - C_U`, where `C` is a primitive
/// of the extracted coupling normalized at the smallest patch identifier.
pub fn glue_functions(family: &LocalFunctionFamily, tol: f64) -> Result<ScalarField> {
    glue_functions_with_base(family, tol, None)
}

/// [`glue_functions`] normalized at patch `base`.
pub fn glue_functions_with_base(family: &LocalFunctionFamily, tol: f64, base: Option<&str>) -> Result<ScalarField> {
    let o = family.overlaps();
    let cover = cover_of(&o)?;
    let d = extract_from_overlaps(family, &o, tol)?;
    let report = validate_compatibility(&cover, &d, tol)?;
    if !report.is_clean() {
        return Err(Error::Incompatible(Box::new(report)));
    }
    let c = solve_primitive(&cover, &d, base, tol)?;

    let n = family.width * family.height;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (id, patch) in &family.patches {
        let shift = c.value(id)?;
        for (node, f) in patch.samples() {
            let v = f - shift;
            sum[node] += v;
            count[node] += 1;
            lo[node] = lo[node].min(v);
            hi[node] = hi[node].max(v);
        }
    }
    let mut values = vec![None; n];
    for node in 0..n {
        if count[node] == 0 {
            continue;
        }
        let spread = hi[node] - lo[node];
        if !(spread <= tol) {
            return Err(Error::InconsistentGlue(
                node % family.width,
                node / family.width,
                spread,
            ));
        }
        values[node] = Some(sum[node] / count[node] as f64);
    }
    ScalarField::new(family.width, family.height, values)
}

/// Masked nodes of `rect`, and whether they are 4-connected.
fn rect_nodes(domain: &GridDomain, rect: &TileRect) -> (Vec<usize>, bool) {
    let nodes: Vec<usize> = rect
        .nodes()
        .filter(|&(c, r)| domain.is_masked(c, r))
        .map(|(c, r)| domain.index(c, r))
        .collect();
    let Some(&start) = nodes.first() else {
        return (nodes, true);
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        for b in neighbors_in(domain, rect, a) {
            if seen.insert(b) {
                queue.push_back(b);
            }
        }
    }
    let connected = seen.len() == nodes.len();
    (nodes, connected)
}

fn neighbors_in<'a>(domain: &'a GridDomain, rect: &'a TileRect, a: usize) -> impl Iterator<Item = usize> + 'a {
    let (c, r) = domain.col_row(a);
    let cand = [
        c.checked_sub(1).map(|c| (c, r)),
        Some((c + 1, r)),
        r.checked_sub(1).map(|r| (c, r)),
        Some((c, r + 1)),
    ];
    cand.into_iter()
        .flatten()
        .filter(move |&(c, r)| rect.contains(c, r) && domain.is_masked(c, r))
        .map(move |(c, r)| domain.index(c, r))
}

/// Potential of `g` inside one rectangle: zero at the first masked node in
/// row-major order, integrated along that node's row and then along columns.
/// Nodes not reached that way (masks with notches) are picked up by
/// alternating further row and column sweeps.
fn integrate_rect(domain: &GridDomain, g: &VectorField, rect: &TileRect, nodes: &[usize]) -> Vec<(usize, f64)> {
    let w = rect.col1 - rect.col0;
    let h = rect.row1 - rect.row0;
    let local = |node: usize| {
        let (c, r) = domain.col_row(node);
        (r - rect.row0) * w + (c - rect.col0)
    };
    let mut value: Vec<Option<f64>> = vec![None; w * h];
    let start = nodes[0];
    value[local(start)] = Some(0.0);
    let mut assigned = 1;

    let masked = |c: usize, r: usize| rect.contains(c, r) && domain.is_masked(c, r);
    // Extends assigned values along one line of nodes in both directions.
    let sweep_line = |value: &mut Vec<Option<f64>>, line: Vec<(usize, usize)>| -> usize {
        let mut added = 0;
        for dir in [1isize, -1] {
            let order: Vec<usize> = if dir > 0 {
                (0..line.len()).collect()
            } else {
                (0..line.len()).rev().collect()
            };
            for w2 in order.windows(2) {
                let (pa, pb) = (line[w2[0]], line[w2[1]]);
                if !masked(pa.0, pa.1) || !masked(pb.0, pb.1) {
                    continue;
                }
                let (a, b) = (domain.index(pa.0, pa.1), domain.index(pb.0, pb.1));
                if let (Some(fa), None) = (value[local(a)], value[local(b)]) {
                    value[local(b)] = Some(fa + g.edge_increment(domain, a, b));
                    added += 1;
                }
            }
        }
        added
    };

    let (_, start_row) = domain.col_row(start);
    assigned += sweep_line(&mut value, (rect.col0..rect.col1).map(|c| (c, start_row)).collect());
    let mut columns_next = true;
    let mut idle_passes = 0;
    while assigned < nodes.len() {
        let mut added = 0;
        if columns_next {
            for c in rect.col0..rect.col1 {
                added += sweep_line(&mut value, (rect.row0..rect.row1).map(|r| (c, r)).collect());
            }
        } else {
            for r in rect.row0..rect.row1 {
                added += sweep_line(&mut value, (rect.col0..rect.col1).map(|c| (c, r)).collect());
            }
        }
        idle_passes = if added == 0 { idle_passes + 1 } else { 0 };
        assert!(idle_passes < 2, "4-connected nodes are reachable by sweeps");
        assigned += added;
        columns_next = !columns_next;
    }
    nodes
        .iter()
        .map(|&n| (n, value[local(n)].expect("all connected nodes assigned")))
        .collect()
}

fn check_curl(domain: &GridDomain, g: &VectorField, rect: &TileRect, tol: f64) -> Result<()> {
    for r in rect.row0..rect.row1.saturating_sub(1) {
        for c in rect.col0..rect.col1.saturating_sub(1) {
            let corners = [(c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1)];
            if corners
                .iter()
                .all(|&(c, r)| rect.contains(c, r) && domain.is_masked(c, r))
            {
                let circ = g.plaquette_circulation(domain, c, r);
                if !(circ.abs() <= tol) {
                    return Err(Error::CurlNotZero(c, r, circ));
                }
            }
        }
    }
    Ok(())
}

/// Local potentials `F_U` of `g` on each rectangle.
///
/// Each rectangle's masked nodes must be 4-connected, and the trapezoid
/// circulation of `g` around every fully masked plaquette inside the
/// rectangle must be at most `tol` in magnitude.
pub fn local_potentials(domain: &GridDomain, g: &VectorField, tiles: &[Tile], tol: f64) -> Result<LocalFunctionFamily> {
    let patches: Vec<(String, Patch)> = tiles
        .par_iter()
        .map(|tile| {
            let (nodes, connected) = rect_nodes(domain, &tile.rect);
            if nodes.is_empty() {
                return Err(Error::EmptyRectangle(tile.id.clone()));
            }
            if !connected {
                return Err(Error::DisconnectedRectangle(tile.id.clone()));
            }
            check_curl(domain, g, &tile.rect, tol)?;
            let samples = integrate_rect(domain, g, &tile.rect, &nodes);
            Ok((tile.id.clone(), Patch::new(tile.rect, samples)))
        })
        .collect::<Result<_>>()?;
    let mut map = BTreeMap::new();
    for (id, p) in patches {
        if map.insert(id.clone(), p).is_some() {
            return Err(Error::DuplicateIdentifier(id));
        }
    }
    Ok(LocalFunctionFamily {
        width: domain.width,
        height: domain.height,
        spacing: domain.spacing,
        patches: map,
    })
}

/// Potential `F` with trapezoid gradient `g`, glued from rectangle-local
/// potentials. Fails with `Obstructed` when the field circulates around a
/// hole of the mask.
pub fn poincare_reconstruct(
    domain: &GridDomain,
    g: &VectorField,
    tiles: &[Tile],
    tol: f64,
    base: Option<&str>,
) -> Result<ScalarField> {
    for node in domain.masked_nodes() {
        let (c, r) = domain.col_row(node);
        if !tiles.iter().any(|t| t.rect.contains(c, r)) {
            return Err(Error::NodeNotCovered(c, r));
        }
    }
    let family = local_potentials(domain, g, tiles, tol)?;
    debug_assert_eq!(family.domain_mask(), domain.mask);
    glue_functions_with_base(&family, tol, base)
}

/// Largest `|(F_b - F_a)/h - (g_a + g_b)/2 . e|` over masked edges `a -> b`
/// with unit direction `e`.
pub fn gradient_mismatch(domain: &GridDomain, f: &ScalarField, g: &VectorField) -> f64 {
    let h = domain.spacing;
    domain
        .masked_edges()
        .filter_map(|(a, b)| {
            let fa = f.values[a]?;
            let fb = f.values[b]?;
            Some(((fb - fa) - g.edge_increment(domain, a, b)).abs() / h)
        })
        .fold(0.0, f64::max)
}
