//! Instances with known optima or bounds: planted noisy tree metrics and
//! the correlation-clustering construction, with brute-force oracles.
//!
//! All randomness comes from `ChaCha8Rng` seeded with the caller's seed.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{DistanceMatrix, Labels, LineReader};
use crate::problem::TreeMetricMatrix;
use crate::tree::ExplicitTree;
use crate::ultrafit::{Child, Hierarchy, HierarchyNode};
use crate::value::{int, Value};

/// Planted tree edges are drawn uniformly from `1..=PLANTED_MAX_WEIGHT`.
pub const PLANTED_MAX_WEIGHT: i64 = 8;
pub const CC_BRUTEFORCE_LIMIT: usize = 10;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simple undirected graph over labelled vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    labels: Arc<Labels>,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new<I, S>(names: I, edges: &[(&str, &str)]) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels = Labels::new(names)?;
        let mut g = Graph {
            labels,
            edges: BTreeSet::new(),
        };
        for (a, b) in edges {
            let (i, j) = (g.labels.require(a)?, g.labels.require(b)?);
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Vertices `1..=n` without edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i.to_string()), &[])
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j)?;
            }
        }
        Ok(g)
    }

    /// `1 - 2 - ... - n`.
    pub fn path(n: usize) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for i in 1..n {
            g.add_edge(i - 1, i)?;
        }
        Ok(g)
    }

    /// Graph on `1..=n` whose edges are the pairs `(i, j)`, `i < j`, in
    /// lexicographic order selected by the bits of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Result<Self> {
        let mut g = Self::empty(n)?;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for (bit, &(i, j)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                g.add_edge(i, j)?;
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at {}", self.labels.name(i))));
        }
        if i.max(j) >= self.n() {
            return Err(Error::InvalidGraph(format!("vertex index {} out of range", i.max(j))));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &Arc<Labels> {
        &self.labels
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// `n`, then the labels on one line, then one `a b` edge per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = LineReader::new(text);
        let (line, first) = lines.next_line("vertex count")?;
        let n: usize = first.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected vertex count, found {first:?}"),
        })?;
        let (line, second) = lines.next_line("labels")?;
        let names: Vec<&str> = second.split_whitespace().collect();
        if names.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} labels, found {}", names.len()),
            });
        }
        let mut g = Self::new(names, &[])?;
        while let Some((line, text)) = lines.next_nonblank() {
            let ends: Vec<&str> = text.split_whitespace().collect();
            let [a, b] = ends[..] else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected an edge `a b`, found {text:?}"),
                });
            };
            let (i, j) = (g.labels.require(a)?, g.labels.require(b)?);
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.n())?;
        writeln!(f, "{}", self.labels.names().join(" "))?;
        for (i, j) in self.edges() {
            writeln!(f, "{} {}", self.labels.name(i), self.labels.name(j))?;
        }
        Ok(())
    }
}

/// A tree metric with `k` entries overwritten.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub matrix: DistanceMatrix,
    pub planted: TreeMetricMatrix,
    pub tree: ExplicitTree,
    pub flipped: Vec<(usize, usize)>,
    pub seed: u64,
}

/// Random tree over `labels`: nodes are added one at a time, each joined to
/// a uniformly chosen earlier node by an edge of weight in
/// `1..=max_weight`; up to `n - 1` auxiliary nodes are mixed in and the
/// elements are placed on distinct random nodes.
pub fn random_tree<R: Rng>(labels: Arc<Labels>, max_weight: i64, rng: &mut R) -> ExplicitTree {
    let n = labels.len();
    let nodes = n + rng.gen_range(0..n.max(1));
    let mut t = ExplicitTree::new(labels);
    for x in 1..nodes {
        let parent = rng.gen_range(0..x);
        t.add_leaf(parent, int(rng.gen_range(1..=max_weight)));
    }
    for (e, node) in sample(rng, nodes, n).into_iter().enumerate() {
        t.associate(e, node);
    }
    t
}

/// Random hierarchy over `n` elements built by repeatedly joining two or
/// three random clusters at the tallest child's height plus a step drawn
/// from `0..=max_step`.
pub fn random_hierarchy<R: Rng>(n: usize, max_step: i64, rng: &mut R) -> Hierarchy {
    let mut open: Vec<(Child, Value)> = (0..n).map(|e| (Child::Leaf(e), int(0))).collect();
    let mut nodes: Vec<HierarchyNode> = Vec::new();
    while open.len() > 1 {
        let k = if open.len() >= 3 && rng.gen_bool(0.3) { 3 } else { 2 };
        let mut picked: Vec<usize> = sample(rng, open.len(), k).into_vec();
        picked.sort_unstable_by(|a, b| b.cmp(a));
        let kids: Vec<(Child, Value)> = picked.into_iter().map(|i| open.swap_remove(i)).collect();
        let top = kids.iter().map(|(_, h)| h).max().expect("k >= 2").clone();
        let height = top + int(rng.gen_range(0..=max_step));
        nodes.push(HierarchyNode {
            children: kids.into_iter().map(|(c, _)| c).collect(),
            height: height.clone(),
        });
        open.push((Child::Node(nodes.len() - 1), height));
    }
    let root = (!nodes.is_empty()).then(|| nodes.len() - 1);
    Hierarchy::new(n, nodes, root).expect("joins produce a valid hierarchy")
}

pub fn planted_labels(n: usize) -> Result<Arc<Labels>> {
    Labels::new((1..=n).map(|i| format!("t{i}")))
}

/// Induced matrix of a random tree with `k` uniformly chosen pairs replaced
/// by different values drawn from `0..=max + 1`.
pub fn gen_planted(n: usize, k: usize, seed: u64) -> Result<PlantedInstance> {
    let pairs = n * n.saturating_sub(1) / 2;
    if n == 0 || k > pairs {
        return Err(Error::InvalidArgument(format!("{k} flips requested for {n} elements")));
    }
    let mut rng = rng_from_seed(seed);
    let tree = random_tree(planted_labels(n)?, PLANTED_MAX_WEIGHT, &mut rng);
    let planted = tree.induced_matrix()?;
    let top = planted.max_entry().to_integer();
    let top: i64 = i64::try_from(top).map_err(|_| Error::Invariant("planted distances overflow".into()))?;
    let all: Vec<(usize, usize)> = planted.pairs().collect();
    let mut chosen: Vec<usize> = sample(&mut rng, pairs, k).into_vec();
    chosen.sort_unstable();
    let flipped: Vec<(usize, usize)> = chosen.iter().map(|&p| all[p]).collect();
    let mut upper = planted.upper().to_vec();
    for &p in &chosen {
        let fresh = loop {
            let v = int(rng.gen_range(0..=top + 1));
            if v != upper[p] {
                break v;
            }
        };
        upper[p] = fresh;
    }
    let matrix = DistanceMatrix::from_upper(planted.labels().names().to_vec(), upper)?;
    Ok(PlantedInstance {
        matrix,
        planted: TreeMetricMatrix::new_unchecked(planted),
        tree,
        flipped,
        seed,
    })
}

/// Labels for the auxiliary elements: `x1, x2, ...`, with extra leading
/// `x`s until none collides with a vertex label.
fn vprime_labels(g: &Graph, count: usize) -> Vec<String> {
    let mut prefix = String::from("x");
    loop {
        let names: Vec<String> = (1..=count).map(|i| format!("{prefix}{i}")).collect();
        if names.iter().all(|s| g.labels.index_of(s).is_none()) {
            return names;
        }
        prefix.push('x');
    }
}

/// Default auxiliary set size `2 * C(|V|, 2)`.
pub fn default_vprime_size(n: usize) -> usize {
    n * n.saturating_sub(1)
}

/// Distance matrix over `V` followed by the auxiliary set `V'`: edges and
/// pairs inside `V'` at `delta` (default 0), non-edges at 2, and every
/// vertex at 1 from every auxiliary element.
pub fn gen_correlation(g: &Graph, delta: Option<&Value>, vprime_size: Option<usize>) -> Result<DistanceMatrix> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidGraph("need at least two vertices".into()));
    }
    let low = delta.cloned().unwrap_or_else(|| int(0));
    if low < int(0) || low >= int(1) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {low}")));
    }
    let extra = vprime_labels(g, vprime_size.unwrap_or_else(|| default_vprime_size(n)));
    let names = g.labels.names().iter().cloned().chain(extra);
    DistanceMatrix::from_labels(names, |i, j| match (i < n, j < n) {
        (true, true) if g.has_edge(i, j) => low.clone(),
        (true, true) => int(2),
        (false, false) => low.clone(),
        _ => int(1),
    })
}

/// Edges cut plus non-edges kept together. `part[v]` is the cluster of `v`.
pub fn cc_cost(g: &Graph, part: &[usize]) -> usize {
    let mut cost = 0;
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            if g.has_edge(i, j) != (part[i] == part[j]) {
                cost += 1;
            }
        }
    }
    cost
}

/// Optimal correlation clustering by enumerating all set partitions
/// (restricted growth strings); the first optimum in that order wins.
pub fn cc_bruteforce(g: &Graph) -> Result<(usize, Vec<usize>)> {
    let n = g.n();
    if n > CC_BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            what: "brute-force correlation clustering",
            n,
            limit: CC_BRUTEFORCE_LIMIT,
        });
    }
    let mut part = vec![0usize; n];
    let mut best = (cc_cost(g, &part), part.clone());
    // next restricted growth string
    'outer: loop {
        let mut i = n;
        loop {
            if i <= 1 {
                break 'outer;
            }
            i -= 1;
            let max_prev = part[..i].iter().max().copied().unwrap_or(0);
            if part[i] <= max_prev {
                part[i] += 1;
                part[i + 1..].iter_mut().for_each(|p| *p = 0);
                break;
            }
        }
        let cost = cc_cost(g, &part);
        if cost < best.0 {
            best = (cost, part.clone());
        }
    }
    Ok(best)
}

/// Renumbers clusters by first appearance.
pub fn normalize_partition(part: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    part.iter()
        .map(|p| match seen.iter().position(|s| s == p) {
            Some(i) => i,
            None => {
                seen.push(*p);
                seen.len() - 1
            }
        })
        .collect()
}

fn ensure_vertices_first(d: &DistanceMatrix, g: &Graph) -> Result<()> {
    if d.n() < g.n() || d.labels().names()[..g.n()] != *g.labels.names() {
        return Err(Error::LabelMismatch);
    }
    Ok(())
}

/// Tree realizing a clustering on the correlation instance `d` (built with
/// `delta = 0`): all auxiliary elements on a hub node, one node per cluster
/// at distance 1 from the hub holding its vertices. Its cost against `d`
/// equals the clustering's cost.
pub fn clustering_tree(d: &DistanceMatrix, g: &Graph, part: &[usize]) -> Result<ExplicitTree> {
    ensure_vertices_first(d, g)?;
    if part.len() != g.n() {
        return Err(Error::InvalidArgument(
            "partition size differs from vertex count".into(),
        ));
    }
    let part = normalize_partition(part);
    let mut t = ExplicitTree::new(d.labels().clone());
    let clusters = part.iter().max().map_or(0, |m| m + 1);
    let nodes: Vec<usize> = (0..clusters).map(|_| t.add_leaf(0, int(1))).collect();
    for (v, &c) in part.iter().enumerate() {
        t.associate(v, nodes[c]);
    }
    for e in g.n()..d.n() {
        t.associate(e, 0);
    }
    Ok(t)
}

/// Reads a clustering off a tree fitted to a correlation instance: the
/// auxiliary elements must coincide and every vertex must sit at distance 1
/// from them; vertices then cluster by tree distance below 2.
pub fn tree_to_clustering(t: &DistanceMatrix, g: &Graph) -> Result<(Vec<usize>, usize)> {
    ensure_vertices_first(t, g)?;
    let n = g.n();
    let one = int(1);
    let two = int(2);
    for a in n..t.n() {
        for b in a + 1..t.n() {
            if t.get(a, b) != &int(0) {
                return Err(Error::Structure(format!(
                    "auxiliary elements {} and {} are apart",
                    t.label(a),
                    t.label(b)
                )));
            }
        }
        for v in 0..n {
            if t.get(a, v) != &one {
                return Err(Error::Structure(format!(
                    "vertex {} is not at distance 1 from {}",
                    t.label(v),
                    t.label(a)
                )));
            }
        }
    }
    let mut part: Vec<usize> = (0..n).collect();
    for v in 0..n {
        part[v] = (0..v).find(|&u| t.get(u, v) < &two).map_or(v, |u| part[u]);
    }
    for u in 0..n {
        for v in u + 1..n {
            if (part[u] == part[v]) != (t.get(u, v) < &two) {
                return Err(Error::Structure(format!(
                    "closeness is not transitive at {} and {}",
                    t.label(u),
                    t.label(v)
                )));
            }
        }
    }
    let part = normalize_partition(&part);
    let cost = cc_cost(g, &part);
    Ok((part, cost))
}
