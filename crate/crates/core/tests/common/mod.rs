//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use cocycle::gluing::GridDomain;
use cocycle::path_chain::{GeomCover, Region};
use cocycle::{Coupling, Cover, Primitive};
use rand::seq::SliceRandom;
use rand::Rng;

/// A random connected nerve with a random primitive on it.
pub struct RandomNerve {
    pub cover: Cover,
    pub primitive: Primitive,
    /// Unordered edges as given to the cover.
    pub edges: Vec<(String, String)>,
}

/// Connected nerve with at most `max_nodes` nodes and `max_edges` edges:
/// a random tree plus random chords. About half of the triangles are
/// declared as triples. Identifiers are random so that their sort order
/// is unrelated to the construction order.
pub fn random_nerve<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> RandomNerve {
    let n = rng.gen_range(1..=max_nodes);
    let mut ids = BTreeSet::new();
    while ids.len() < n {
        ids.insert(format!("n{:08x}", rng.gen::<u32>()));
    }
    let mut ids: Vec<String> = ids.into_iter().collect();
    ids.shuffle(rng);

    let mut adj = vec![BTreeSet::new(); n];
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.insert((j.min(i), j.max(i)));
    }
    let cap = max_edges.min(n * (n - 1) / 2);
    let target = if cap > n - 1 { rng.gen_range(n - 1..=cap) } else { cap };
    while edges.len() < target {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    for &(a, b) in &edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut triples = Vec::new();
    for &(a, b) in &edges {
        for &c in adj[a].intersection(&adj[b]) {
            if c > b && rng.gen_bool(0.5) {
                triples.push((ids[a].clone(), ids[b].clone(), ids[c].clone()));
            }
        }
    }
    let named: Vec<(String, String)> = edges.iter().map(|&(a, b)| (ids[a].clone(), ids[b].clone())).collect();
    let cover = Cover::new(ids.clone(), named.clone(), triples).expect("generated cover is valid");
    let primitive = Primitive::from_values(
        ids.iter().map(|id| (id.clone(), rng.gen_range(-10.0..=10.0))),
        Vec::new(),
    );
    RandomNerve {
        cover,
        primitive,
        edges: named,
    }
}

/// Whether removing the edge `{u, v}` disconnects `u` from `v`.
pub fn is_bridge(edges: &[(String, String)], u: &str, v: &str) -> bool {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        if (a == u && b == v) || (a == v && b == u) {
            continue;
        }
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = BTreeSet::from([u]);
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        for &y in adj.get(x).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    !seen.contains(v)
}

/// Largest deviation of `a - b` from its value at the first shared key.
pub fn max_offset_deviation(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>, keys: &[String]) -> f64 {
    let offset = a[&keys[0]] - b[&keys[0]];
    keys.iter().map(|k| (a[k] - b[k] - offset).abs()).fold(0.0, f64::max)
}

/// Four charts around a hole with unit coupling on every cyclic pair.
pub fn annulus_cover() -> (Cover, Coupling) {
    let ids: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
    let pairs = [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")];
    let cover = Cover::new(
        ids,
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())),
        Vec::new(),
    )
    .unwrap();
    let mut d = Coupling::default();
    for (u, v) in pairs {
        d.insert_antisymmetric(u, v, 1.0);
    }
    (cover, d)
}

/// The same annulus realised by four rectangles around `[1, 2] x [1, 2]`.
pub fn annulus_geometry() -> (GeomCover, Coupling) {
    let charts = BTreeMap::from([
        ("A".to_string(), Region::rect(0.0, 0.0, 3.0, 1.0)),
        ("B".to_string(), Region::rect(2.0, 0.0, 3.0, 3.0)),
        ("C".to_string(), Region::rect(0.0, 2.0, 3.0, 3.0)),
        ("D".to_string(), Region::rect(0.0, 0.0, 1.0, 3.0)),
    ]);
    let (_, d) = annulus_cover();
    (GeomCover::new(charts).unwrap(), d)
}

/// `n x n` open squares of side 1.5 centred on the unit cells of `[0, n]^2`.
pub fn square_grid(n: usize) -> GeomCover {
    let mut charts = BTreeMap::new();
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (c as f64, r as f64);
            charts.insert(
                format!("s{r:02}_{c:02}"),
                Region::rect(x - 0.25, y - 0.25, x + 1.25, y + 1.25),
            );
        }
    }
    GeomCover::new(charts).unwrap()
}

/// Rectangles of size 2.2 at unit stride covering `[0, w] x [0, h]`, with a
/// few disks mixed in.
pub fn rectangle_cover(w: usize, h: usize) -> GeomCover {
    let mut charts = BTreeMap::new();
    for j in 0..=h - 2 {
        for i in 0..=w - 2 {
            let (x, y) = (i as f64, j as f64);
            charts.insert(format!("r{j}_{i}"), Region::rect(x - 0.1, y - 0.1, x + 2.1, y + 2.1));
        }
    }
    charts.insert("disk_a".into(), Region::disk(1.5, 1.5, 0.8));
    charts.insert("disk_b".into(), Region::disk(w as f64 - 1.2, h as f64 / 2.0, 1.0));
    GeomCover::new(charts).unwrap()
}

/// The primitive induced on every chart of `cover` by random values.
pub fn random_primitive<R: Rng>(rng: &mut R, cover: &Cover) -> Primitive {
    Primitive::from_values(
        cover.sets().iter().map(|id| (id.clone(), rng.gen_range(-10.0..=10.0))),
        Vec::new(),
    )
}

/// 64 x 64 mask with the upper-right quadrant removed.
pub fn l_shape(spacing: f64) -> GridDomain {
    GridDomain::from_fn(64, 64, spacing, |c, r| !(c >= 32 && r >= 32)).unwrap()
}

/// Breadth-first integration of the trapezoid increments of the analytic
/// gradient `grad` over the masked grid graph, starting at the first masked
/// node with value 0.
pub fn bfs_integrate(domain: &GridDomain, grad: impl Fn(f64, f64) -> (f64, f64)) -> Vec<Option<f64>> {
    let (w, hgt, h) = (domain.width(), domain.height(), domain.spacing());
    let mut out: Vec<Option<f64>> = vec![None; w * hgt];
    let start = (0..w * hgt).find(|&i| domain.mask()[i]).expect("non-empty mask");
    out[start] = Some(0.0);
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let (c, r) = (i % w, i / w);
        let (x, y) = (c as f64 * h, r as f64 * h);
        let mut step = |nc: isize, nr: isize| {
            if nc < 0 || nr < 0 || nc as usize >= w || nr as usize >= hgt {
                return;
            }
            let j = nr as usize * w + nc as usize;
            if !domain.mask()[j] || out[j].is_some() {
                return;
            }
            let (nx, ny) = (nc as f64 * h, nr as f64 * h);
            let (ax, ay) = grad(x, y);
            let (bx, by) = grad(nx, ny);
            let inc = 0.5 * (ax + bx) * (nx - x) + 0.5 * (ay + by) * (ny - y);
            out[j] = Some(out[i].unwrap() + inc);
            queue.push_back(j);
        };
        let (c, r) = (c as isize, r as isize);
        step(c + 1, r);
        step(c - 1, r);
        step(c, r + 1);
        step(c, r - 1);
    }
    out
}

/// Largest `|a - b - mean(a - b)|` over nodes where both are defined.
pub fn aligned_max_diff(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).filter_map(|(x, y)| Some((*x)? - (*y)?)).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max)
}
