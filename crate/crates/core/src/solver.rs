//! Primitive construction by chain sums along a spanning forest, and
//! holonomy reports certifying that no primitive exists.
//!
//! For a base set `U0`, `C[U]` is the sum of `d` along the tree path from
//! `U0` to `U`. This satisfies `d[U][V] = C[V] - C[U]` on tree edges by
//! construction; on a non-tree edge the mismatch equals the signed sum of
//! `d` around that edge's fundamental cycle. A primitive therefore exists
//! exactly when every fundamental cycle has zero holonomy.

use std::collections::BTreeMap;

use crate::cocycle::{Coupling, PairViolation, ViolationReport};
use crate::error::{Error, Result};
use crate::nerve::{build_nerve, Cover, Cycle, NeighborOrder, NerveGraph, SpanningForest};

/// Values `C[U]` per cover set, zero at the base set of each component.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    values: BTreeMap<String, f64>,
    bases: Vec<String>,
}

impl Primitive {
    /// Wraps raw values; `bases` lists one normalization set per component.
    pub fn from_values<I>(values: I, bases: Vec<String>) -> Self
    where
        I: IntoIterator<Item = (String, f64)>,
    {
        Primitive {
            values: values.into_iter().collect(),
            bases,
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn value(&self, id: &str) -> Result<f64> {
        self.get(id).ok_or_else(|| Error::MissingPrimitiveValue(id.to_owned()))
    }

    pub fn values(&self) -> &BTreeMap<String, f64> {
        &self.values
    }

    /// Base set of the first component (the requested base, if any).
    pub fn base_set(&self) -> Option<&str> {
        self.bases.first().map(String::as_str)
    }

    /// One base per connected component, in component order.
    pub fn bases(&self) -> &[String] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyEntry {
    pub cycle: Cycle,
    /// Signed sum of `d` along the cycle's oriented edges.
    pub holonomy: f64,
}

/// Holonomy of each fundamental cycle of a cycle basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyReport {
    pub entries: Vec<HolonomyEntry>,
    pub max_abs_holonomy: f64,
}

impl HolonomyReport {
    fn from_entries(entries: Vec<HolonomyEntry>) -> Self {
        let max_abs_holonomy = entries.iter().map(|e| e.holonomy.abs()).fold(0.0, f64::max);
        HolonomyReport {
            entries,
            max_abs_holonomy,
        }
    }
}

/// Coupling values on the oriented edges of a nerve, indexed by node.
struct EdgeValues {
    /// `out[i]` holds `(j, d[i][j])` sorted by `j`.
    out: Vec<Vec<(usize, f64)>>,
}

impl EdgeValues {
    fn new(nerve: &NerveGraph, d: &Coupling) -> Result<Self> {
        let mut out = Vec::with_capacity(nerve.node_count());
        for i in 0..nerve.node_count() {
            let row = nerve
                .neighbors(i)
                .iter()
                .map(|&j| Ok((j, d.value(nerve.name(i), nerve.name(j))?)))
                .collect::<Result<Vec<_>>>()?;
            out.push(row);
        }
        Ok(EdgeValues { out })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.out[i];
        let k = row.binary_search_by_key(&j, |e| e.0).expect("edge of the nerve");
        row[k].1
    }
}

/// Signed sum around a closed walk and the obstruction threshold for it:
/// `max(tol, L * 4 ulps of the largest summand)` for a walk of length `L`.
fn cycle_sum(walk: &[usize], values: &EdgeValues, tol: f64) -> (f64, f64) {
    let n = walk.len();
    let mut sum = 0.0;
    let mut largest = 0.0f64;
    for k in 0..n {
        let x = values.get(walk[k], walk[(k + 1) % n]);
        sum += x;
        largest = largest.max(x.abs());
    }
    let rounding = n as f64 * 4.0 * f64::EPSILON * largest;
    (sum, tol.max(rounding))
}

/// One fundamental cycle as node indices, its holonomy, and whether it
/// exceeds the obstruction threshold.
struct WalkSum {
    walk: Vec<usize>,
    holonomy: f64,
    obstructed: bool,
}

/// Forest, edge values, and per-cycle holonomies.
struct Analysis {
    nerve: NerveGraph,
    forest: SpanningForest,
    values: EdgeValues,
    cycles: Vec<WalkSum>,
}

impl Analysis {
    fn entry(&self, w: &WalkSum) -> HolonomyEntry {
        HolonomyEntry {
            cycle: Cycle {
                nodes: w.walk.iter().map(|&i| self.nerve.name(i).to_owned()).collect(),
            },
            holonomy: w.holonomy,
        }
    }

    fn report<'a>(&self, cycles: impl IntoIterator<Item = &'a WalkSum>) -> HolonomyReport {
        HolonomyReport::from_entries(cycles.into_iter().map(|w| self.entry(w)).collect())
    }

    /// `C` along the forest, zero at each root.
    fn tree_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.nerve.node_count()];
        for &v in &self.forest.order {
            if let Some(p) = self.forest.parent[v] {
                c[v] = c[p] + self.values.get(p, v);
            }
        }
        c
    }
}

fn analyze(cover: &Cover, d: &Coupling, base: Option<&str>, tol: f64, order: NeighborOrder) -> Result<Analysis> {
    d.check_domain(cover)?;
    let nerve = build_nerve(cover);
    let roots = match base {
        Some(b) => vec![nerve
            .index_of(b)
            .ok_or_else(|| Error::UnknownBaseIdentifier(b.to_owned()))?],
        None => Vec::new(),
    };
    let values = EdgeValues::new(&nerve, d)?;

    let mut bad = Vec::new();
    let mut max_residual = 0.0f64;
    for &(a, b) in nerve.edges() {
        let r = (values.get(a, b) + values.get(b, a)).abs();
        max_residual = max_residual.max(r);
        if !(r <= tol) {
            bad.push(PairViolation {
                pair: (nerve.name(a).to_owned(), nerve.name(b).to_owned()),
                magnitude: r,
            });
        }
    }
    if !bad.is_empty() {
        return Err(Error::Incompatible(Box::new(ViolationReport {
            tolerance: tol,
            antisymmetry_violations: bad,
            additivity_violations: Vec::new(),
            max_residual,
        })));
    }

    let forest = SpanningForest::new(&nerve, &roots, order);
    let cycles = nerve
        .edges()
        .iter()
        .filter(|&&(u, v)| !forest.is_tree_edge(u, v))
        .map(|&(u, v)| {
            let walk = forest.fundamental_cycle(u, v);
            let (holonomy, threshold) = cycle_sum(&walk, &values, tol);
            WalkSum {
                walk,
                holonomy,
                obstructed: !(holonomy.abs() <= threshold),
            }
        })
        .collect();
    Ok(Analysis {
        nerve,
        forest,
        values,
        cycles,
    })
}

/// Computes a primitive of `d`, or the holonomy report proving there is none.
///
/// `base` selects the normalization set of its component (default: the
/// smallest identifier of each component). Compatibility on triples is the
/// caller's responsibility; antisymmetry is re-checked here.
pub fn solve_primitive(cover: &Cover, d: &Coupling, base: Option<&str>, tol: f64) -> Result<Primitive> {
    solve_primitive_with_order(cover, d, base, tol, NeighborOrder::Lexicographic)
}

/// [`solve_primitive`] with an explicit spanning-tree neighbor order.
pub fn solve_primitive_with_order(
    cover: &Cover,
    d: &Coupling,
    base: Option<&str>,
    tol: f64,
    order: NeighborOrder,
) -> Result<Primitive> {
    let analysis = analyze(cover, d, base, tol, order)?;
    if analysis.cycles.iter().any(|w| w.obstructed) {
        return Err(Error::Obstructed(Box::new(analysis.report(&analysis.cycles))));
    }
    let c = analysis.tree_sums();
    let nerve = &analysis.nerve;
    let mut bases: Vec<String> = analysis
        .forest
        .roots
        .iter()
        .map(|&r| nerve.name(r).to_owned())
        .collect();
    if let Some(b) = base {
        // requested base first
        let k = bases.iter().position(|x| x == b).expect("base is a root");
        let first = bases.remove(k);
        bases.insert(0, first);
    }
    Ok(Primitive::from_values(nerve.nodes().iter().cloned().zip(c), bases))
}

/// Holonomy of every fundamental cycle of the default cycle basis.
pub fn holonomy(cover: &Cover, d: &Coupling) -> Result<HolonomyReport> {
    let analysis = analyze(cover, d, None, f64::INFINITY, NeighborOrder::Lexicographic)?;
    Ok(analysis.report(&analysis.cycles))
}

/// One primitive per connected component, each normalized at the smallest
/// identifier of its component. Fails with the holonomy report of the first
/// obstructed component.
pub fn component_primitives(cover: &Cover, d: &Coupling, tol: f64) -> Result<Vec<Primitive>> {
    let analysis = analyze(cover, d, None, tol, NeighborOrder::Lexicographic)?;
    let nerve = &analysis.nerve;
    let c = analysis.tree_sums();

    let mut out = Vec::with_capacity(nerve.components().len());
    for (k, comp) in nerve.components().iter().enumerate() {
        let mine: Vec<&WalkSum> = analysis
            .cycles
            .iter()
            .filter(|w| nerve.component_of(w.walk[0]) == k)
            .collect();
        if mine.iter().any(|w| w.obstructed) {
            return Err(Error::Obstructed(Box::new(analysis.report(mine))));
        }
        let root = analysis.forest.roots[k];
        out.push(Primitive::from_values(
            comp.iter().map(|&i| (nerve.name(i).to_owned(), c[i])),
            vec![nerve.name(root).to_owned()],
        ));
    }
    Ok(out)
}
