//! L0 fitting of unconstrained ultrametrics: an exact exhaustive solver for
//! small inputs, a deterministic agglomerative heuristic, and the pluggable
//! solver interface the reductions are written against.

use std::collections::HashMap;
use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::DistanceMatrix;
use crate::problem::UltrametricMatrix;
use crate::value::{int, Value};
use crate::verify::check_ultrametric;

pub const DEFAULT_EXACT_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Leaf(usize),
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyNode {
    pub children: Vec<Child>,
    pub height: Value,
}

/// A rooted tree over elements `0..n` with a height per internal node; the
/// induced matrix maps each pair to the height of its lowest common
/// ancestor.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    n: usize,
    nodes: Vec<HierarchyNode>,
    root: Option<usize>,
}

impl Hierarchy {
    /// Validates structure: each element under exactly one node, internal
    /// nodes with at least two children, nonnegative heights that never
    /// increase from parent to child.
    pub fn new(n: usize, nodes: Vec<HierarchyNode>, root: Option<usize>) -> Result<Self> {
        let h = Hierarchy { n, nodes, root };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("hierarchy: {m}")));
        let Some(root) = self.root else {
            return if self.n <= 1 && self.nodes.is_empty() {
                Ok(())
            } else {
                bad("missing root")
            };
        };
        let mut leaf_seen = vec![false; self.n];
        let mut node_seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        node_seen[root] = true;
        while let Some(x) = stack.pop() {
            let node = &self.nodes[x];
            if node.children.len() < 2 {
                return bad("internal node with fewer than two children");
            }
            if node.height < Value::zero() {
                return bad("negative height");
            }
            for c in &node.children {
                match *c {
                    Child::Leaf(e) => {
                        if e >= self.n || std::mem::replace(&mut leaf_seen[e], true) {
                            return bad("element repeated or out of range");
                        }
                    }
                    Child::Node(y) => {
                        if y >= self.nodes.len() || std::mem::replace(&mut node_seen[y], true) {
                            return bad("node repeated or out of range");
                        }
                        if self.nodes[y].height > node.height {
                            return bad("child above parent");
                        }
                        stack.push(y);
                    }
                }
            }
        }
        if leaf_seen.iter().any(|s| !s) || node_seen.iter().any(|s| !s) {
            return bad("unreachable element or node");
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    fn collect_leaves(&self, node: usize, out: &mut Vec<usize>) {
        for c in &self.nodes[node].children {
            match *c {
                Child::Leaf(e) => out.push(e),
                Child::Node(y) => self.collect_leaves(y, out),
            }
        }
    }

    /// Induced ultrametric over the given matrix's labels.
    pub fn to_matrix(&self, like: &DistanceMatrix) -> Result<UltrametricMatrix> {
        if like.n() != self.n {
            return Err(Error::LabelMismatch);
        }
        let mut lca = vec![Value::zero(); self.n * self.n];
        for (x, node) in self.nodes.iter().enumerate() {
            let groups: Vec<Vec<usize>> = node
                .children
                .iter()
                .map(|c| match *c {
                    Child::Leaf(e) => vec![e],
                    Child::Node(y) => {
                        let mut v = Vec::new();
                        self.collect_leaves(y, &mut v);
                        v
                    }
                })
                .collect();
            for (a, ga) in groups.iter().enumerate() {
                for gb in &groups[a + 1..] {
                    for &i in ga {
                        for &j in gb {
                            lca[i * self.n + j] = self.nodes[x].height.clone();
                            lca[j * self.n + i] = self.nodes[x].height.clone();
                        }
                    }
                }
            }
        }
        let m = DistanceMatrix::from_fn(like.labels().clone(), |i, j| lca[i * self.n + j].clone())?;
        debug_assert!(check_ultrametric(&m).is_ok());
        Ok(UltrametricMatrix::new_unchecked(m))
    }
}

/// A hierarchy without heights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Node(Vec<Shape>),
}

/// All set partitions of `items` into at least two blocks, as restricted
/// growth strings.
fn partitions_into_two_or_more(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    fn rec(items: &[usize], i: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == items.len() {
            if blocks.len() >= 2 {
                out.push(blocks.clone());
            }
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(items[i]);
            rec(items, i + 1, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![items[i]]);
        rec(items, i + 1, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(items, 0, &mut Vec::new(), &mut out);
    out
}

/// Every hierarchy topology (rooted tree whose internal nodes have at least
/// two children) on `items`, in a fixed deterministic order.
pub fn enumerate_shapes(items: &[usize]) -> Vec<Shape> {
    fn rec(items: &[usize], memo: &mut HashMap<Vec<usize>, Vec<Shape>>) -> Vec<Shape> {
        if items.len() == 1 {
            return vec![Shape::Leaf(items[0])];
        }
        if let Some(found) = memo.get(items) {
            return found.clone();
        }
        let mut out = Vec::new();
        for blocks in partitions_into_two_or_more(items) {
            let mut combos: Vec<Vec<Shape>> = vec![Vec::new()];
            for block in &blocks {
                let subs = rec(block, memo);
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        subs.iter().map(move |s| {
                            let mut p = prefix.clone();
                            p.push(s.clone());
                            p
                        })
                    })
                    .collect();
            }
            out.extend(combos.into_iter().map(Shape::Node));
        }
        memo.insert(items.to_vec(), out.clone());
        out
    }
    if items.is_empty() {
        return Vec::new();
    }
    rec(items, &mut HashMap::new())
}

/// Per-element lower bounds and a global upper bound on node heights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HeightBounds<'a> {
    pub lower: &'a [Value],
    pub upper: &'a Value,
}

const INFEASIBLE: usize = usize::MAX / 4;

struct ShapeDp<'a> {
    ranks: &'a [usize],
    n: usize,
    k: usize,
    min_rank: &'a [usize],
    max_rank: usize,
}

/// Per-subtree DP table: `cost[h]` is the least disagreement count inside
/// the subtree when its root sits at candidate height `h`.
struct Solved {
    cost: Vec<usize>,
    leaves: Vec<usize>,
    children: Vec<Option<Box<Solved>>>,
}

impl ShapeDp<'_> {
    fn solve(&self, shape: &Shape) -> Solved {
        let Shape::Node(kids) = shape else {
            unreachable!("leaves are handled by the parent")
        };
        let mut groups: Vec<Vec<usize>> = Vec::with_capacity(kids.len());
        let mut solved_kids = Vec::with_capacity(kids.len());
        let mut floor = 0usize;
        for kid in kids {
            match kid {
                Shape::Leaf(e) => {
                    groups.push(vec![*e]);
                    floor = floor.max(self.min_rank[*e]);
                    solved_kids.push(None);
                }
                Shape::Node(_) => {
                    let s = self.solve(kid);
                    groups.push(s.leaves.clone());
                    solved_kids.push(Some(Box::new(s)));
                }
            }
        }
        let mut agree = vec![0usize; self.k];
        let mut cross = 0usize;
        for (a, ga) in groups.iter().enumerate() {
            for gb in &groups[a + 1..] {
                for &i in ga {
                    for &j in gb {
                        agree[self.ranks[i * self.n + j]] += 1;
                        cross += 1;
                    }
                }
            }
        }
        let mut cost = vec![INFEASIBLE; self.k];
        for h in floor..=self.max_rank.min(self.k - 1) {
            let mut total = cross - agree[h];
            for s in solved_kids.iter().flatten() {
                let best = s.cost[..=h].iter().copied().min().unwrap_or(INFEASIBLE);
                total = total.saturating_add(best);
            }
            cost[h] = total.min(INFEASIBLE);
        }
        Solved {
            cost,
            leaves: groups.concat(),
            children: solved_kids,
        }
    }

    /// Writes the chosen candidate height of every internal node's pairs.
    fn assign(&self, solved: &Solved, h: usize, out: &mut [usize]) {
        let groups = kid_leaves(solved);
        for (a, ga) in groups.iter().enumerate() {
            for gb in &groups[a + 1..] {
                for &i in ga.iter() {
                    for &j in gb.iter() {
                        out[i * self.n + j] = h;
                        out[j * self.n + i] = h;
                    }
                }
            }
        }
        for s in solved.children.iter().flatten() {
            let (best_h, _) = argmin_prefix(&s.cost, h);
            self.assign(s, best_h, out);
        }
    }
}

fn kid_leaves(solved: &Solved) -> Vec<&[usize]> {
    let mut out = Vec::with_capacity(solved.children.len());
    let mut offset = 0;
    for c in &solved.children {
        let len = c.as_ref().map_or(1, |s| s.leaves.len());
        out.push(&solved.leaves[offset..offset + len]);
        offset += len;
    }
    out
}

/// Smallest index in `cost[..=limit]` attaining the minimum.
fn argmin_prefix(cost: &[usize], limit: usize) -> (usize, usize) {
    let mut best = (0, cost[0]);
    for (h, &c) in cost.iter().enumerate().take(limit + 1).skip(1) {
        if c < best.1 {
            best = (h, c);
        }
    }
    best
}

/// Exhaustive minimizer over all hierarchies with node heights drawn from
/// `candidates` (sorted, distinct, containing every value of `d`). Returns
/// `None` when no hierarchy satisfies `bounds`.
pub(crate) fn exact_over_candidates(
    d: &DistanceMatrix,
    candidates: &[Value],
    bounds: Option<HeightBounds<'_>>,
    exec: Execution,
) -> Option<(usize, DistanceMatrix)> {
    let n = d.n();
    if n <= 1 {
        return Some((0, d.clone()));
    }
    let k = candidates.len();
    let rank_of = |v: &Value| candidates.binary_search(v).expect("candidate set covers matrix values");
    let mut ranks = vec![0usize; n * n];
    for (i, j) in d.pairs() {
        let r = rank_of(d.get(i, j));
        ranks[i * n + j] = r;
        ranks[j * n + i] = r;
    }
    let (min_rank, max_rank) = match bounds {
        None => (vec![0; n], k - 1),
        Some(b) => {
            let lo = b.lower.iter().map(|l| candidates.partition_point(|c| c < l)).collect();
            let hi = candidates.partition_point(|c| c <= b.upper);
            if hi == 0 {
                return None;
            }
            (lo, hi - 1)
        }
    };
    let dp = ShapeDp {
        ranks: &ranks,
        n,
        k,
        min_rank: &min_rank,
        max_rank,
    };

    let items: Vec<usize> = (0..n).collect();
    let shapes = enumerate_shapes(&items);
    let results: Vec<(usize, usize)> = exec.map(&shapes, |shape| {
        let solved = dp.solve(shape);
        let (h, c) = argmin_prefix(&solved.cost, k - 1);
        (c, h)
    });
    let (best_idx, &(best_cost, best_h)) = results
        .iter()
        .enumerate()
        .min_by_key(|(i, (c, _))| (*c, *i))
        .expect("at least one shape");
    if best_cost >= INFEASIBLE {
        return None;
    }
    let solved = dp.solve(&shapes[best_idx]);
    let mut assigned = vec![0usize; n * n];
    dp.assign(&solved, best_h, &mut assigned);
    let m = DistanceMatrix::from_fn(d.labels().clone(), |i, j| candidates[assigned[i * n + j]].clone())
        .expect("candidates are nonnegative");
    Some((best_cost, m))
}

fn default_candidates(d: &DistanceMatrix) -> Vec<Value> {
    let mut c = d.distinct_values();
    if c.first().is_none_or(|v| !v.is_zero()) {
        c.insert(0, Value::zero());
    }
    c
}

/// Exact L0-optimal ultrametric by exhaustive topology enumeration with a
/// height DP per topology. Heights are drawn from the distinct values of
/// `d` plus zero.
pub fn fit_ultrametric_exact(d: &DistanceMatrix, limit: usize, exec: Execution) -> Result<UltrametricMatrix> {
    if d.n() > limit {
        return Err(Error::ExactLimit { n: d.n(), limit });
    }
    let (_, m) =
        exact_over_candidates(d, &default_candidates(d), None, exec).expect("unconstrained problem is always feasible");
    Ok(UltrametricMatrix::new_unchecked(m))
}

/// Exact solver with additional candidate heights merged into the default
/// set. Used to probe that snapping to input values loses nothing.
pub fn fit_ultrametric_exact_with_extra(
    d: &DistanceMatrix,
    extra: &[Value],
    limit: usize,
    exec: Execution,
) -> Result<UltrametricMatrix> {
    if d.n() > limit {
        return Err(Error::ExactLimit { n: d.n(), limit });
    }
    let mut c = default_candidates(d);
    c.extend(extra.iter().filter(|v| **v >= Value::zero()).cloned());
    c.sort();
    c.dedup();
    let (_, m) = exact_over_candidates(d, &c, None, exec).expect("unconstrained problem is always feasible");
    Ok(UltrametricMatrix::new_unchecked(m))
}

struct Cluster {
    members: Vec<usize>,
    height: Option<usize>,
    node: Child,
}

#[derive(Clone, Copy)]
struct MergeEval {
    height: usize,
    agreements: usize,
    size: usize,
}

impl MergeEval {
    /// Higher agreement fraction first, then the lower merge height.
    fn better_than(&self, other: &MergeEval) -> bool {
        let lhs = self.agreements * other.size;
        let rhs = other.agreements * self.size;
        lhs > rhs || (lhs == rhs && self.height < other.height)
    }
}

/// Deterministic agglomerative heuristic. Ultrametric inputs are returned
/// unchanged. Otherwise clusters are merged greedily: each candidate merge
/// sits at the plurality value of its cross entries (ties toward the smaller
/// value), raised to the taller child's height if needed; the merge with the
/// highest fraction of agreeing cross entries wins, ties going to the lower
/// height and then to label order.
pub fn fit_ultrametric_heuristic(d: &DistanceMatrix) -> UltrametricMatrix {
    if check_ultrametric(d).is_ok() {
        return UltrametricMatrix::new_unchecked(d.clone());
    }
    let n = d.n();
    let values = d.distinct_values();
    let mut ranks = vec![0usize; n * n];
    for (i, j) in d.pairs() {
        let r = values.binary_search(d.get(i, j)).expect("value present");
        ranks[i * n + j] = r;
        ranks[j * n + i] = r;
    }

    let evaluate = |a: &Cluster, b: &Cluster| -> MergeEval {
        let mut cross: Vec<usize> = Vec::with_capacity(a.members.len() * b.members.len());
        for &i in &a.members {
            for &j in &b.members {
                cross.push(ranks[i * n + j]);
            }
        }
        cross.sort_unstable();
        let (mut plurality, mut best_run) = (cross[0], 0usize);
        let mut run_start = 0;
        for idx in 1..=cross.len() {
            if idx == cross.len() || cross[idx] != cross[run_start] {
                if idx - run_start > best_run {
                    best_run = idx - run_start;
                    plurality = cross[run_start];
                }
                run_start = idx;
            }
        }
        let height = [Some(plurality), a.height, b.height]
            .into_iter()
            .flatten()
            .max()
            .expect("plurality");
        let agreements = cross.iter().filter(|&&r| r == height).count();
        MergeEval {
            height,
            agreements,
            size: cross.len(),
        }
    };

    let mut clusters: Vec<Option<Cluster>> = (0..n)
        .map(|e| {
            Some(Cluster {
                members: vec![e],
                height: None,
                node: Child::Leaf(e),
            })
        })
        .collect();
    let mut nodes: Vec<HierarchyNode> = Vec::new();
    let mut cache: HashMap<(usize, usize), MergeEval> = HashMap::new();

    for _ in 1..n {
        // active clusters ordered by their smallest member, i.e. label order
        let mut active: Vec<usize> = (0..clusters.len()).filter(|&c| clusters[c].is_some()).collect();
        active.sort_by_key(|&c| clusters[c].as_ref().map(|x| x.members[0]));
        let mut best: Option<((usize, usize), MergeEval)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let key = (a.min(b), a.max(b));
                let eval = *cache
                    .entry(key)
                    .or_insert_with(|| evaluate(clusters[a].as_ref().unwrap(), clusters[b].as_ref().unwrap()));
                if best.as_ref().is_none_or(|(_, e)| eval.better_than(e)) {
                    best = Some(((a, b), eval));
                }
            }
        }
        let ((a, b), eval) = best.expect("at least two clusters");
        let ca = clusters[a].take().unwrap();
        let cb = clusters[b].take().unwrap();
        nodes.push(HierarchyNode {
            children: vec![ca.node, cb.node],
            height: values[eval.height].clone(),
        });
        let mut members = ca.members;
        members.extend(cb.members);
        members.sort_unstable();
        clusters.push(Some(Cluster {
            members,
            height: Some(eval.height),
            node: Child::Node(nodes.len() - 1),
        }));
    }

    let root = nodes.len().checked_sub(1);
    let hierarchy = Hierarchy::new(n, nodes, root).expect("agglomeration yields a valid hierarchy");
    hierarchy.to_matrix(d).expect("labels match")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Heuristic,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Exact => "exact",
            SolverKind::Heuristic => "heuristic",
        })
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "heuristic" => Ok(SolverKind::Heuristic),
            other => Err(Error::InvalidArgument(format!("unknown solver {other:?}"))),
        }
    }
}

/// Any algorithm for unconstrained L0 ultrametric fitting. The reductions
/// accept any implementation; their guarantees scale with its `claimed_rho`.
pub trait UltrametricFitter: Sync {
    fn name(&self) -> String;

    /// Approximation factor, when the fitter guarantees one.
    fn claimed_rho(&self) -> Option<Value>;

    fn fit(&self, d: &DistanceMatrix) -> Result<DistanceMatrix>;
}

/// Built-in solver selection.
#[derive(Debug, Clone, PartialEq)]
pub struct UltraSolverSpec {
    pub kind: SolverKind,
    pub exact_limit: usize,
    pub execution: Execution,
}

impl UltraSolverSpec {
    pub fn exact() -> Self {
        UltraSolverSpec {
            kind: SolverKind::Exact,
            exact_limit: DEFAULT_EXACT_LIMIT,
            execution: Execution::default(),
        }
    }

    pub fn heuristic() -> Self {
        UltraSolverSpec {
            kind: SolverKind::Heuristic,
            ..Self::exact()
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.exact_limit = limit;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

impl UltrametricFitter for UltraSolverSpec {
    fn name(&self) -> String {
        self.kind.to_string()
    }

    fn claimed_rho(&self) -> Option<Value> {
        match self.kind {
            SolverKind::Exact => Some(int(1)),
            SolverKind::Heuristic => None,
        }
    }

    fn fit(&self, d: &DistanceMatrix) -> Result<DistanceMatrix> {
        Ok(match self.kind {
            SolverKind::Exact => fit_ultrametric_exact(d, self.exact_limit, self.execution)?,
            SolverKind::Heuristic => fit_ultrametric_heuristic(d),
        }
        .into_matrix())
    }
}

/// Runs `solver` and certifies its output.
pub fn solve<S: UltrametricFitter + ?Sized>(d: &DistanceMatrix, solver: &S) -> Result<UltrametricMatrix> {
    let out = solver.fit(d)?;
    if !out.same_labels(d) {
        return Err(Error::Invariant(format!(
            "solver {} changed the label set",
            solver.name()
        )));
    }
    UltrametricMatrix::new(out)
}
