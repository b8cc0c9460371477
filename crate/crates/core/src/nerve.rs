//! Finite covers, their nerve graphs, and cycle bases.
//!
//! Cover sets are opaque string identifiers. Which sets intersect (pairs) and
//! which triples share a common point (triples) are declared by the caller;
//! geometric front-ends in [`crate::path_chain`] and [`crate::gluing`] derive
//! them from regions.
//!
//! Every traversal visits identifiers in lexicographic (byte) order so that
//! spanning forests, cycle bases and primitives are reproducible.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite cover given by its set identifiers, intersecting pairs and
/// triples with nonempty triple intersection.
///
/// Pairs and triples are stored sorted, so two covers declared with the same
/// data in different orders compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCover", into = "RawCover")]
pub struct Cover {
    sets: Vec<String>,
    pairs: BTreeSet<(String, String)>,
    triples: BTreeSet<(String, String, String)>,
}

#[derive(Serialize, Deserialize)]
struct RawCover {
    sets: Vec<String>,
    #[serde(default)]
    pairs: Vec<[String; 2]>,
    #[serde(default)]
    triples: Vec<[String; 3]>,
}

impl TryFrom<RawCover> for Cover {
    type Error = Error;

    fn try_from(raw: RawCover) -> Result<Self> {
        Cover::new(
            raw.sets,
            raw.pairs.into_iter().map(|[a, b]| (a, b)),
            raw.triples.into_iter().map(|[a, b, c]| (a, b, c)),
        )
    }
}

impl From<Cover> for RawCover {
    fn from(cover: Cover) -> Self {
        RawCover {
            sets: cover.sets,
            pairs: cover.pairs.into_iter().map(|(a, b)| [a, b]).collect(),
            triples: cover.triples.into_iter().map(|(a, b, c)| [a, b, c]).collect(),
        }
    }
}

fn sorted_pair(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn sorted_triple(a: String, b: String, c: String) -> (String, String, String) {
    let mut v = [a, b, c];
    v.sort();
    let [a, b, c] = v;
    (a, b, c)
}

impl Cover {
    /// Builds a cover, checking that identifiers are unique, that pairs and
    /// triples only mention known identifiers, and that every 2-subset of a
    /// declared triple is a declared pair.
    pub fn new<P, T>(sets: Vec<String>, pairs: P, triples: T) -> Result<Self>
    where
        P: IntoIterator<Item = (String, String)>,
        T: IntoIterator<Item = (String, String, String)>,
    {
        let mut seen = BTreeSet::new();
        for s in &sets {
            if !seen.insert(s.as_str()) {
                return Err(Error::DuplicateIdentifier(s.clone()));
            }
        }
        let known = |id: &String| -> Result<()> {
            if seen.contains(id.as_str()) {
                Ok(())
            } else {
                Err(Error::UnknownIdentifierInPair(id.clone()))
            }
        };

        let mut pair_set = BTreeSet::new();
        for (a, b) in pairs {
            known(&a)?;
            known(&b)?;
            if a == b {
                return Err(Error::DegenerateSimplex(vec![a, b]));
            }
            pair_set.insert(sorted_pair(a, b));
        }

        let mut triple_set = BTreeSet::new();
        for (a, b, c) in triples {
            known(&a)?;
            known(&b)?;
            known(&c)?;
            if a == b || b == c || a == c {
                return Err(Error::DegenerateSimplex(vec![a, b, c]));
            }
            let (a, b, c) = sorted_triple(a, b, c);
            for (x, y) in [(&a, &b), (&b, &c), (&a, &c)] {
                if !pair_set.contains(&(x.clone(), y.clone())) {
                    return Err(Error::TriplePairMissing(
                        a.clone(),
                        b.clone(),
                        c.clone(),
                        x.clone(),
                        y.clone(),
                    ));
                }
            }
            triple_set.insert((a, b, c));
        }

        Ok(Cover {
            sets,
            pairs: pair_set,
            triples: triple_set,
        })
    }

    /// Set identifiers in declaration order.
    pub fn sets(&self) -> &[String] {
        &self.sets
    }

    /// Intersecting pairs, each stored as `(smaller, larger)`.
    pub fn pairs(&self) -> &BTreeSet<(String, String)> {
        &self.pairs
    }

    /// Declared triples, each stored sorted.
    pub fn triples(&self) -> &BTreeSet<(String, String, String)> {
        &self.triples
    }

    pub fn contains_set(&self, id: &str) -> bool {
        self.sets.iter().any(|s| s == id)
    }

    pub fn has_pair(&self, a: &str, b: &str) -> bool {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.pairs.contains(&(key.0.to_owned(), key.1.to_owned()))
    }
}

/// Graph realization of a cover: one node per set, one edge per pair.
///
/// Nodes are stored in lexicographic order, so comparing node indices is the
/// same as comparing identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NerveGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    components: Vec<Vec<usize>>,
}

impl NerveGraph {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn name(&self, node: usize) -> &str {
        &self.nodes[node]
    }

    /// Neighbors of `node`, ascending.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Edges as `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Connected components, each sorted, ordered by their smallest node.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, node: usize) -> usize {
        self.components
            .iter()
            .position(|c| c.binary_search(&node).is_ok())
            .expect("components partition the node set")
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }
}

/// Builds the nerve graph of a cover.
///
/// [`Cover::new`] already rejects duplicate and unknown identifiers, so this
/// step cannot fail.
pub fn build_nerve(cover: &Cover) -> NerveGraph {
    let mut nodes = cover.sets.clone();
    nodes.sort();
    let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    let mut adjacency = vec![Vec::new(); nodes.len()];
    let mut edges = Vec::with_capacity(cover.pairs.len());
    for (a, b) in &cover.pairs {
        let (i, j) = (index[a], index[b]);
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        adjacency[i].push(j);
        adjacency[j].push(i);
        edges.push((i, j));
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    edges.sort_unstable();

    let mut components = Vec::new();
    let mut seen = vec![false; nodes.len()];
    for start in 0..nodes.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }

    NerveGraph {
        nodes,
        index,
        adjacency,
        edges,
        components,
    }
}

/// Neighbor visiting order for breadth-first spanning forests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborOrder {
    /// Lexicographic identifier order.
    #[default]
    Lexicographic,
    /// Neighbor lists shuffled by a seeded RNG. Produces a different but
    /// equally valid spanning forest; used to exercise tree independence.
    Shuffled(u64),
}

/// A breadth-first spanning forest of a nerve graph.
#[derive(Debug, Clone)]
pub struct SpanningForest {
    /// Root of each component, in component order.
    pub roots: Vec<usize>,
    /// Tree parent of each node; `None` for roots.
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<usize>,
    /// Nodes in breadth-first visiting order (roots first within each tree).
    pub order: Vec<usize>,
}

impl SpanningForest {
    /// Breadth-first forest with the given root per component. Components
    /// without an entry in `roots` are rooted at their smallest node.
    pub fn new(nerve: &NerveGraph, roots: &[usize], order: NeighborOrder) -> Self {
        let n = nerve.node_count();
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut visit = Vec::with_capacity(n);
        let mut rng = match order {
            NeighborOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            NeighborOrder::Lexicographic => None,
        };

        let mut chosen = Vec::with_capacity(nerve.components().len());
        for comp in nerve.components() {
            let root = roots
                .iter()
                .copied()
                .find(|r| comp.binary_search(r).is_ok())
                .unwrap_or(comp[0]);
            chosen.push(root);
            seen[root] = true;
            visit.push(root);
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                let mut nbrs = nerve.neighbors(u).to_vec();
                if let Some(rng) = rng.as_mut() {
                    nbrs.shuffle(rng);
                }
                for v in nbrs {
                    if !seen[v] {
                        seen[v] = true;
                        parent[v] = Some(u);
                        depth[v] = depth[u] + 1;
                        visit.push(v);
                        queue.push_back(v);
                    }
                }
            }
        }

        SpanningForest {
            roots: chosen,
            parent,
            depth,
            order: visit,
        }
    }

    pub fn is_tree_edge(&self, a: usize, b: usize) -> bool {
        self.parent[a] == Some(b) || self.parent[b] == Some(a)
    }

    /// Closed walk for the non-tree edge `(u, v)`: from the lowest common
    /// ancestor down to `u`, across to `v`, and back up. The return to the
    /// first node is implicit.
    pub fn fundamental_cycle(&self, u: usize, v: usize) -> Vec<usize> {
        let mut up_u = vec![u];
        let mut up_v = vec![v];
        let (mut a, mut b) = (u, v);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has a parent");
            up_u.push(a);
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has a parent");
            up_v.push(b);
        }
        while a != b {
            a = self.parent[a].expect("endpoints share a tree");
            b = self.parent[b].expect("endpoints share a tree");
            up_u.push(a);
            up_v.push(b);
        }
        // up_u and up_v both end at the common ancestor.
        up_v.pop();
        let mut walk: Vec<usize> = up_u.into_iter().rev().collect();
        walk.extend(up_v);
        walk
    }
}

/// One fundamental cycle, as a closed walk over node identifiers. The walk
/// returns from the last node to the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub nodes: Vec<String>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Oriented edges `(from, to)` of the closed walk.
    pub fn oriented_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        let n = self.nodes.len();
        (0..n).map(move |k| (self.nodes[k].as_str(), self.nodes[(k + 1) % n].as_str()))
    }
}

/// Fundamental cycles of a spanning forest, one per non-tree edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleBasis {
    pub cycles: Vec<Cycle>,
    pub tree_edges: Vec<(String, String)>,
}

/// Cycle basis from the breadth-first forest rooted at the smallest node of
/// each component, neighbors in identifier order.
pub fn cycle_basis(nerve: &NerveGraph) -> CycleBasis {
    let forest = SpanningForest::new(nerve, &[], NeighborOrder::Lexicographic);
    cycle_basis_for(nerve, &forest)
}

/// Cycle basis generated by an arbitrary spanning forest of `nerve`.
pub fn cycle_basis_for(nerve: &NerveGraph, forest: &SpanningForest) -> CycleBasis {
    let mut cycles = Vec::new();
    let mut tree_edges = Vec::new();
    for &(u, v) in nerve.edges() {
        if forest.is_tree_edge(u, v) {
            tree_edges.push((nerve.name(u).to_owned(), nerve.name(v).to_owned()));
        } else {
            let walk = forest.fundamental_cycle(u, v);
            cycles.push(Cycle {
                nodes: walk.into_iter().map(|i| nerve.name(i).to_owned()).collect(),
            });
        }
    }
    CycleBasis { cycles, tree_edges }
}
