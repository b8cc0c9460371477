//! Chains of charts along planar paths.
//!
//! A [`GeomCover`] realizes cover sets as open axis-aligned rectangles and
//! open disks; its pairs and triples come from exact intersection tests. A
//! [`Chain`] splits a polyline at breakpoints `0 = t0 < t1 < ... < tn = 1`
//! and assigns each piece a chart containing it. The chain sum over
//! `start, U1, ..., Un, end` is the transport of the coupling along the path.
//!
//! Because regions are convex, a polyline piece lies in a chart iff its two
//! end points and the polyline vertices between them do.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::Coupling;
use crate::error::{Error, Result};
use crate::nerve::Cover;

/// Smallest admissible advance of the chain construction, in path parameter.
pub const MIN_STEP: f64 = 1e-12;

pub type Point = [f64; 2];

/// Open planar region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion", into = "RawRegion")]
pub enum Region {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawRegion {
    Rect([f64; 4]),
    Disk([f64; 3]),
}

impl TryFrom<RawRegion> for Region {
    type Error = Error;

    fn try_from(raw: RawRegion) -> Result<Self> {
        let r = match raw {
            RawRegion::Rect([x0, y0, x1, y1]) => Region::Rect { x0, y0, x1, y1 },
            RawRegion::Disk([cx, cy, r]) => Region::Disk { cx, cy, r },
        };
        r.check()
            .map(|_| r)
            .map_err(|e| Error::InvalidRegion(format!("{r:?}"), e))
    }
}

impl From<Region> for RawRegion {
    fn from(r: Region) -> Self {
        match r {
            Region::Rect { x0, y0, x1, y1 } => RawRegion::Rect([x0, y0, x1, y1]),
            Region::Disk { cx, cy, r } => RawRegion::Disk([cx, cy, r]),
        }
    }
}

impl Region {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Region::Rect { x0, y0, x1, y1 }
    }

    pub fn disk(cx: f64, cy: f64, r: f64) -> Self {
        Region::Disk { cx, cy, r }
    }

    fn check(&self) -> std::result::Result<(), String> {
        let ok = match *self {
            Region::Rect { x0, y0, x1, y1 } => [x0, y0, x1, y1].iter().all(|v| v.is_finite()) && x1 > x0 && y1 > y0,
            Region::Disk { cx, cy, r } => [cx, cy, r].iter().all(|v| v.is_finite()) && r > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err("region must be finite with positive area".into())
        }
    }

    /// Strict (open-set) membership.
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Rect { x0, y0, x1, y1 } => p[0] > x0 && p[0] < x1 && p[1] > y0 && p[1] < y1,
            Region::Disk { cx, cy, r } => {
                let (dx, dy) = (p[0] - cx, p[1] - cy);
                dx * dx + dy * dy < r * r
            }
        }
    }

    /// Convex function that is negative exactly on the region.
    fn level(&self, p: Point) -> f64 {
        match *self {
            Region::Rect { x0, y0, x1, y1 } => (x0 - p[0]).max(p[0] - x1).max(y0 - p[1]).max(p[1] - y1),
            Region::Disk { cx, cy, r } => (p[0] - cx).hypot(p[1] - cy) - r,
        }
    }

    fn bbox(&self) -> [f64; 4] {
        match *self {
            Region::Rect { x0, y0, x1, y1 } => [x0, y0, x1, y1],
            Region::Disk { cx, cy, r } => [cx - r, cy - r, cx + r, cy + r],
        }
    }

    /// For a segment `a + u (b - a)` with `a` inside, the first `u > 0` at
    /// which it reaches the boundary (may exceed 1).
    fn leave_param(&self, a: Point, b: Point) -> f64 {
        let d = [b[0] - a[0], b[1] - a[1]];
        match *self {
            Region::Rect { x0, y0, x1, y1 } => {
                let mut u = f64::INFINITY;
                for (k, lo, hi) in [(0, x0, x1), (1, y0, y1)] {
                    if d[k] > 0.0 {
                        u = u.min((hi - a[k]) / d[k]);
                    } else if d[k] < 0.0 {
                        u = u.min((lo - a[k]) / d[k]);
                    }
                }
                u
            }
            Region::Disk { cx, cy, r } => {
                let f = [a[0] - cx, a[1] - cy];
                let qa = d[0] * d[0] + d[1] * d[1];
                let qb = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let qc = f[0] * f[0] + f[1] * f[1] - r * r;
                if qa == 0.0 {
                    return f64::INFINITY;
                }
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                (-qb + disc.sqrt()) / (2.0 * qa)
            }
        }
    }
}

fn dist_to_rect(p: Point, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let dx = (x0 - p[0]).max(0.0).max(p[0] - x1);
    let dy = (y0 - p[1]).max(0.0).max(p[1] - y1);
    dx.hypot(dy)
}

/// Minimizes a convex function over a box by nested golden-section search.
fn min_convex_2d(f: impl Fn(Point) -> f64, b: [f64; 4]) -> f64 {
    const ITERS: usize = 80;
    let golden = |lo: f64, hi: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (lo, hi);
        let mut m1 = hi - phi * (hi - lo);
        let mut m2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (g(m1), g(m2));
        for _ in 0..ITERS {
            if f1 <= f2 {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - phi * (hi - lo);
                f1 = g(m1);
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + phi * (hi - lo);
                f2 = g(m2);
            }
        }
        f1.min(f2)
    };
    let inner = |x: f64| golden(b[1], b[3], &|y| f([x, y]));
    golden(b[0], b[2], &inner)
}

/// Whether the open regions have a common point.
///
/// Exact for any number of rectangles combined with at most one disk. With
/// two or more disks the deepest common point is found by convex
/// minimization, and intersections thinner than about `1e-12` of the region
/// scale count as empty.
pub fn regions_intersect(regions: &[Region]) -> bool {
    let mut rect: Option<[f64; 4]> = None;
    let mut disks = Vec::new();
    for r in regions {
        match *r {
            Region::Rect { x0, y0, x1, y1 } => {
                rect = Some(match rect {
                    None => [x0, y0, x1, y1],
                    Some([a, b, c, d]) => [a.max(x0), b.max(y0), c.min(x1), d.min(y1)],
                });
            }
            Region::Disk { cx, cy, r } => disks.push((cx, cy, r)),
        }
    }
    if let Some([x0, y0, x1, y1]) = rect {
        if !(x0 < x1 && y0 < y1) {
            return false;
        }
    }
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            let (a, b) = (disks[i], disks[j]);
            if (a.0 - b.0).hypot(a.1 - b.1) >= a.2 + b.2 {
                return false;
            }
        }
    }
    match (disks.len(), rect) {
        (0, _) => true,
        (1, None) => true,
        (1, Some([x0, y0, x1, y1])) => {
            let (cx, cy, r) = disks[0];
            dist_to_rect([cx, cy], x0, y0, x1, y1) < r
        }
        _ => {
            let mut b = [f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY];
            for r in regions {
                let rb = r.bbox();
                b = [b[0].max(rb[0]), b[1].max(rb[1]), b[2].min(rb[2]), b[3].min(rb[3])];
            }
            if !(b[0] < b[2] && b[1] < b[3]) {
                return false;
            }
            let scale = (b[2] - b[0]).max(b[3] - b[1]);
            let depth = min_convex_2d(
                |p| regions.iter().map(|r| r.level(p)).fold(f64::NEG_INFINITY, f64::max),
                b,
            );
            depth < -1e-12 * scale
        }
    }
}

/// Charts realized as open planar regions, with the derived abstract cover.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomCover {
    charts: BTreeMap<String, Region>,
    cover: Cover,
}

impl GeomCover {
    pub fn new(charts: BTreeMap<String, Region>) -> Result<Self> {
        for (id, r) in &charts {
            r.check().map_err(|e| Error::InvalidRegion(id.clone(), e))?;
        }
        let ids: Vec<&String> = charts.keys().collect();
        let mut pairs = Vec::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                if regions_intersect(&[charts[ids[i]], charts[ids[j]]]) {
                    pairs.push((i, j));
                }
            }
        }
        let mut adjacent = vec![vec![false; ids.len()]; ids.len()];
        for &(i, j) in &pairs {
            adjacent[i][j] = true;
        }
        let mut triples = Vec::new();
        for &(i, j) in &pairs {
            for k in j + 1..ids.len() {
                if adjacent[i][k]
                    && adjacent[j][k]
                    && regions_intersect(&[charts[ids[i]], charts[ids[j]], charts[ids[k]]])
                {
                    triples.push((ids[i].clone(), ids[j].clone(), ids[k].clone()));
                }
            }
        }
        let cover = Cover::new(
            ids.iter().map(|s| (*s).clone()).collect(),
            pairs.iter().map(|&(i, j)| (ids[i].clone(), ids[j].clone())),
            triples,
        )?;
        Ok(GeomCover { charts, cover })
    }

    pub fn charts(&self) -> &BTreeMap<String, Region> {
        &self.charts
    }

    pub fn region(&self, id: &str) -> Result<&Region> {
        self.charts.get(id).ok_or_else(|| Error::UnknownChart(id.to_owned()))
    }

    /// The abstract cover with geometrically derived pairs and triples.
    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    /// Charts strictly containing `p`, in identifier order.
    pub fn charts_containing(&self, p: Point) -> impl Iterator<Item = (&str, &Region)> {
        self.charts
            .iter()
            .filter(move |(_, r)| r.contains(p))
            .map(|(id, r)| (id.as_str(), r))
    }
}

impl Serialize for GeomCover {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            charts: &'a BTreeMap<String, Region>,
        }
        Raw { charts: &self.charts }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeomCover {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            charts: BTreeMap<String, Region>,
        }
        let raw = Raw::deserialize(d)?;
        GeomCover::new(raw.charts).map_err(serde::de::Error::custom)
    }
}

/// Polyline parameterized by normalized arc length over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
    params: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidPolyline("need at least 2 vertices".into()));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolyline("non-finite coordinate".into()));
        }
        let mut params = vec![0.0];
        let mut total = 0.0;
        for w in vertices.windows(2) {
            let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            if len == 0.0 {
                return Err(Error::InvalidPolyline("consecutive vertices coincide".into()));
            }
            total += len;
            params.push(total);
        }
        for t in &mut params {
            *t /= total;
        }
        *params.last_mut().expect("nonempty") = 1.0;
        Ok(Polyline { vertices, params })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Parameter value of each vertex.
    pub fn vertex_params(&self) -> &[f64] {
        &self.params
    }

    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn end(&self) -> Point {
        *self.vertices.last().expect("nonempty")
    }

    fn segment_at(&self, t: f64) -> usize {
        let k = self.params.partition_point(|&p| p <= t);
        k.clamp(1, self.params.len() - 1) - 1
    }

    /// Point at parameter `t` (clamped to `[0, 1]`).
    pub fn point(&self, t: f64) -> Point {
        let t = t.clamp(0.0, 1.0);
        if t == 1.0 {
            return self.end();
        }
        let k = self.segment_at(t);
        let (t0, t1) = (self.params[k], self.params[k + 1]);
        let u = (t - t0) / (t1 - t0);
        let (a, b) = (self.vertices[k], self.vertices[k + 1]);
        [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
    }

    /// First parameter `s >= t` where the path leaves `region`, or `None` if
    /// it stays inside up to `t = 1`. `point(t)` must lie in the region.
    fn exit_param(&self, region: &Region, t: f64) -> Option<f64> {
        let mut k = self.segment_at(t);
        let mut from = self.point(t);
        let mut from_t = t;
        loop {
            let (t1, b) = (self.params[k + 1], self.vertices[k + 1]);
            let u = region.leave_param(from, b);
            if u <= 1.0 {
                return Some(from_t + u * (t1 - from_t));
            }
            if k + 2 == self.params.len() {
                return None;
            }
            k += 1;
            from = b;
            from_t = t1;
        }
    }

    /// Smallest parameter `a <= t` such that the path stays in `region` on
    /// `(a, t]`, or `None` if it stays inside back to `t = 0`.
    fn entry_param(&self, region: &Region, t: f64) -> Option<f64> {
        let mut k = self.segment_at(t);
        if t > 0.0 && self.params[k] == t {
            k -= 1;
        }
        let mut from = self.point(t);
        let mut from_t = t;
        loop {
            let (t0, a) = (self.params[k], self.vertices[k]);
            let u = region.leave_param(from, a);
            if u <= 1.0 {
                return Some(from_t - u * (from_t - t0));
            }
            if k == 0 {
                return None;
            }
            k -= 1;
            from = a;
            from_t = t0;
        }
    }
}

impl Serialize for Polyline {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            vertices: &'a [Point],
        }
        Raw {
            vertices: &self.vertices,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polyline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<Point>,
        }
        let raw = Raw::deserialize(d)?;
        Polyline::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

/// Breakpoints `t0 = 0 < ... < tn = 1` and one chart per piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub breakpoints: Vec<f64>,
    pub charts: Vec<String>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    /// Whether piece `k` (0-based) of `path` lies in chart `id`.
    pub fn piece_inside(&self, cover: &GeomCover, path: &Polyline, k: usize, id: &str) -> bool {
        let Ok(region) = cover.region(id) else {
            return false;
        };
        let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
        region.contains(path.point(a))
            && region.contains(path.point(b))
            && path
                .vertices()
                .iter()
                .zip(path.vertex_params())
                .filter(|(_, &t)| t > a && t < b)
                .all(|(v, _)| region.contains(*v))
    }

    /// Checks breakpoint ordering and that each piece lies in its chart.
    pub fn is_valid(&self, cover: &GeomCover, path: &Polyline) -> bool {
        let n = self.charts.len();
        n >= 1
            && self.breakpoints.len() == n + 1
            && self.breakpoints[0] == 0.0
            && self.breakpoints[n] == 1.0
            && self.breakpoints.windows(2).all(|w| w[0] < w[1])
            && (0..n).all(|k| self.piece_inside(cover, path, k, &self.charts[k]))
    }

    /// Adds a breakpoint at `s`, reusing the chart of the piece it splits.
    pub fn refine(&self, s: f64) -> Chain {
        let mut out = self.clone();
        let k = self.breakpoints.partition_point(|&t| t <= s);
        if k == 0 || k > self.charts.len() || self.breakpoints[k - 1] == s {
            return out;
        }
        out.breakpoints.insert(k, s);
        out.charts.insert(k, self.charts[k - 1].clone());
        out
    }

    /// Charts other than the current one that contain piece `k`.
    pub fn admissible_replacements(&self, cover: &GeomCover, path: &Polyline, k: usize) -> Vec<String> {
        cover
            .charts()
            .keys()
            .filter(|id| **id != self.charts[k] && self.piece_inside(cover, path, k, id))
            .cloned()
            .collect()
    }

    /// Same chain with piece `k` assigned to chart `id`.
    pub fn replace(&self, k: usize, id: &str) -> Chain {
        let mut out = self.clone();
        out.charts[k] = id.to_owned();
        out
    }
}

fn best_by_exit<'a>(
    path: &Polyline,
    from: f64,
    candidates: impl Iterator<Item = (&'a str, &'a Region)>,
) -> Option<(&'a str, &'a Region, Option<f64>)> {
    let mut best: Option<(&str, &Region, Option<f64>)> = None;
    for (id, r) in candidates {
        let e = path.exit_param(r, from);
        let better = match best {
            None => true,
            Some((_, _, None)) => false,
            Some((_, _, Some(cur))) => e.is_none_or(|e| e > cur),
        };
        if better {
            best = Some((id, r, e));
        }
    }
    best
}

/// Covers `path` by a chain of charts.
///
/// Greedy: from the current parameter, take the chart (smallest identifier
/// on ties) that keeps the path longest. At its exit point, pick the chart
/// that continues furthest and place the breakpoint halfway between where
/// that chart picks the path up and the exit.
pub fn build_chain(cover: &GeomCover, path: &Polyline) -> Result<Chain> {
    let mut t = 0.0;
    let mut breakpoints = vec![0.0];
    let mut charts = Vec::new();
    loop {
        let (id, _, exit) =
            best_by_exit(path, t, cover.charts_containing(path.point(t))).ok_or(Error::PathNotCovered(t))?;
        let Some(exit) = exit else {
            charts.push(id.to_owned());
            breakpoints.push(1.0);
            break;
        };
        let at_exit = path.point(exit);
        let (next_id, next_region, _) = best_by_exit(
            path,
            exit,
            cover.charts_containing(at_exit).filter(|(other, _)| *other != id),
        )
        .ok_or(Error::PathNotCovered(exit))?;
        let lo = path.entry_param(next_region, exit).unwrap_or(0.0).max(t);
        let next_t = lo + 0.5 * (exit - lo);
        if !(next_t - t >= MIN_STEP) || !next_region.contains(path.point(next_t)) {
            return Err(Error::NoProgress(t));
        }
        debug_assert_ne!(next_id, id);
        charts.push(id.to_owned());
        breakpoints.push(next_t);
        t = next_t;
    }
    Ok(Chain { breakpoints, charts })
}

/// Sum of `d` over consecutive charts of `start, U1, ..., Un, end`, with
/// `d[U][U] = 0`.
pub fn chain_sum(d: &Coupling, chain: &Chain, start: &str, end: &str) -> Result<f64> {
    let seq = std::iter::once(start)
        .chain(chain.charts.iter().map(String::as_str))
        .chain(std::iter::once(end));
    let seq: Vec<&str> = seq.collect();
    let mut sum = 0.0;
    for w in seq.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        sum += d
            .get(w[0], w[1])
            .ok_or_else(|| Error::NonAdjacentConsecutiveCharts(w[0].to_owned(), w[1].to_owned()))?;
    }
    Ok(sum)
}

/// Chain sums from chart `start` to chart `end` for each path of a family
/// sharing both endpoints.
pub fn homotopy_sweep(
    cover: &GeomCover,
    d: &Coupling,
    family: &[Polyline],
    start: &str,
    end: &str,
) -> Result<Vec<f64>> {
    let first = family.first().ok_or(Error::InvalidPathFamily)?;
    let same = |p: Point, q: Point| (p[0] - q[0]).abs() <= 1e-12 && (p[1] - q[1]).abs() <= 1e-12;
    if family
        .iter()
        .any(|p| !same(p.start(), first.start()) || !same(p.end(), first.end()))
    {
        return Err(Error::InvalidPathFamily);
    }
    if !cover.region(start)?.contains(first.start()) {
        return Err(Error::EndpointOutsideChart(start.to_owned(), 0.0));
    }
    if !cover.region(end)?.contains(first.end()) {
        return Err(Error::EndpointOutsideChart(end.to_owned(), 1.0));
    }
    family
        .par_iter()
        .map(|path| {
            let chain = build_chain(cover, path)?;
            chain_sum(d, &chain, start, end)
        })
        .collect()
}
