//! Explicit weighted trees: construction from certified matrices, induced
//! distances, and Newick text.

use std::collections::VecDeque;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::matrix::{DistanceMatrix, Labels};
use crate::problem::{TreeMetricMatrix, UltrametricMatrix};
use crate::value::{format_value, half, parse_value, Value};
use crate::verify::{check_ultrametric, scan_tree_metric};

pub type NodeId = usize;

/// A tree with nonnegative edge weights and a many-to-one association of
/// elements to nodes. Nodes without elements are auxiliary.
#[derive(Debug, Clone)]
pub struct ExplicitTree {
    labels: Arc<Labels>,
    adjacency: Vec<Vec<(NodeId, Value)>>,
    assoc: Vec<Option<NodeId>>,
}

impl ExplicitTree {
    /// A tree with a single node and no associations yet.
    pub fn new(labels: Arc<Labels>) -> Self {
        let n = labels.len();
        ExplicitTree {
            labels,
            adjacency: vec![Vec::new()],
            assoc: vec![None; n],
        }
    }

    pub fn labels(&self) -> &Arc<Labels> {
        &self.labels
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, Value)] {
        &self.adjacency[node]
    }

    /// Node of element `e`. Panics if the tree is incomplete.
    pub fn node_of(&self, e: usize) -> NodeId {
        self.assoc[e].expect("element associated")
    }

    pub fn elements_at(&self, node: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.assoc
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Some(node))
            .map(|(e, _)| e)
    }

    pub fn add_node(&mut self) -> NodeId {
        self.adjacency.push(Vec::new());
        self.adjacency.len() - 1
    }

    /// Adds a new node hanging off `parent`.
    pub fn add_leaf(&mut self, parent: NodeId, weight: Value) -> NodeId {
        let node = self.add_node();
        self.connect(parent, node, weight);
        node
    }

    pub fn connect(&mut self, a: NodeId, b: NodeId, weight: Value) {
        self.adjacency[a].push((b, weight.clone()));
        self.adjacency[b].push((a, weight));
    }

    fn disconnect(&mut self, a: NodeId, b: NodeId) {
        self.adjacency[a].retain(|(x, _)| *x != b);
        self.adjacency[b].retain(|(x, _)| *x != a);
    }

    pub fn associate(&mut self, e: usize, node: NodeId) {
        self.assoc[e] = Some(node);
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Checks connectivity, acyclicity, weights and full association.
    pub fn validate(&self) -> Result<()> {
        let nodes = self.node_count();
        if self.edge_count() + 1 != nodes {
            return Err(Error::InvalidTree(format!(
                "{} edges on {nodes} nodes",
                self.edge_count()
            )));
        }
        let mut seen = vec![false; nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for (y, w) in &self.adjacency[x] {
                if w.is_negative() {
                    return Err(Error::InvalidTree("negative edge weight".into()));
                }
                if !seen[*y] {
                    seen[*y] = true;
                    stack.push(*y);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidTree("tree is disconnected".into()));
        }
        if let Some(e) = self.assoc.iter().position(Option::is_none) {
            return Err(Error::InvalidTree(format!(
                "element {} has no node",
                self.labels.name(e)
            )));
        }
        Ok(())
    }

    /// Distances from `source` to every node.
    pub fn distances_from(&self, source: NodeId) -> Vec<Value> {
        let mut dist = vec![Value::zero(); self.node_count()];
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(x) = queue.pop_front() {
            for (y, w) in &self.adjacency[x] {
                if !seen[*y] {
                    seen[*y] = true;
                    dist[*y] = &dist[x] + w;
                    queue.push_back(*y);
                }
            }
        }
        dist
    }

    /// Pairwise path lengths between associated nodes.
    pub fn induced_matrix(&self) -> Result<DistanceMatrix> {
        self.validate()?;
        let n = self.labels.len();
        let rows: Vec<Vec<Value>> = (0..n).map(|e| self.distances_from(self.node_of(e))).collect();
        DistanceMatrix::from_fn(self.labels.clone(), |i, j| rows[i][self.node_of(j)].clone())
    }

    /// Parent pointers and depths with the tree hung from `root`.
    pub(crate) fn rooted_at(&self, root: NodeId) -> Rooted {
        let nodes = self.node_count();
        let mut parent = vec![None; nodes];
        let mut depth = vec![Value::zero(); nodes];
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(x) = queue.pop_front() {
            for (y, w) in &self.adjacency[x] {
                if !seen[*y] {
                    seen[*y] = true;
                    parent[*y] = Some(x);
                    depth[*y] = &depth[x] + w;
                    queue.push_back(*y);
                }
            }
        }
        Rooted { parent, depth }
    }

    /// Returns the node on the path from `from` towards the root at exactly
    /// `target` depth, subdividing an edge if no such node exists. Requires
    /// `0 <= target <= depth[from]`.
    pub(crate) fn point_at_depth(&mut self, rooted: &mut Rooted, from: NodeId, target: &Value) -> NodeId {
        debug_assert!(target <= &rooted.depth[from] && !target.is_negative());
        let mut cur = from;
        loop {
            if &rooted.depth[cur] == target {
                return cur;
            }
            let p = rooted.parent[cur].expect("target depth lies above the root");
            if &rooted.depth[p] < target {
                let mid = self.add_node();
                self.disconnect(cur, p);
                self.connect(p, mid, target - &rooted.depth[p]);
                self.connect(mid, cur, &rooted.depth[cur] - target);
                rooted.parent.push(Some(p));
                rooted.depth.push(target.clone());
                rooted.parent[cur] = Some(mid);
                return mid;
            }
            cur = p;
        }
    }

    /// Newick rendering; see [`serialize_newick`].
    pub fn to_newick(&self) -> String {
        serialize_newick(self)
    }
}

pub(crate) struct Rooted {
    pub(crate) parent: Vec<Option<NodeId>>,
    pub(crate) depth: Vec<Value>,
}

impl Rooted {
    pub(crate) fn add_leaf(&mut self, parent: NodeId, weight: &Value) {
        self.parent.push(Some(parent));
        let d = &self.depth[parent] + weight;
        self.depth.push(d);
    }
}

/// Incremental attachment: element `k` joins the path from element 0 to
/// the element `j` minimizing its pendant length
/// `(D(0,k) + D(j,k) - D(0,j)) / 2`. Returns `None` when some attachment
/// is geometrically impossible; the caller compares induced distances.
fn reconstruct(m: &DistanceMatrix) -> Option<ExplicitTree> {
    let n = m.n();
    let mut tree = ExplicitTree::new(m.labels().clone());
    if n == 0 {
        return Some(tree);
    }
    tree.associate(0, 0);
    let mut rooted = tree.rooted_at(0);
    for k in 1..n {
        let d0k = m.get(0, k);
        let mut best: Option<(Value, usize)> = None;
        for j in 0..k {
            let pendant = half(&(d0k + m.get(j, k) - m.get(0, j)));
            if best.as_ref().is_none_or(|(b, _)| pendant < *b) {
                best = Some((pendant, j));
            }
        }
        let (pendant, j) = best.expect("k > 0");
        let along = d0k - &pendant;
        if pendant.is_negative() || along.is_negative() || &along > m.get(0, j) {
            return None;
        }
        let from = tree.node_of(j);
        let point = tree.point_at_depth(&mut rooted, from, &along);
        if pendant.is_zero() {
            tree.associate(k, point);
        } else {
            let leaf = tree.add_leaf(point, pendant.clone());
            rooted.add_leaf(point, &pendant);
            tree.associate(k, leaf);
        }
    }
    Some(tree)
}

pub(crate) fn reconstructs_exactly(m: &DistanceMatrix) -> bool {
    reconstruct(m).is_some_and(|t| t.induced_matrix().as_ref() == Ok(m))
}

/// Builds a tree whose induced distances equal `m` exactly.
pub fn matrix_to_tree(m: &DistanceMatrix) -> Result<ExplicitTree> {
    if let Some(tree) = reconstruct(m) {
        if tree.induced_matrix().as_ref() == Ok(m) {
            return Ok(tree);
        }
    }
    match scan_tree_metric(m, crate::value::zero()) {
        Err(w) => Err(Error::NotTreeMetric(w)),
        Ok(()) => Err(Error::Invariant(
            "tree reconstruction failed on a four-point metric".into(),
        )),
    }
}

/// [`matrix_to_tree`] for an already certified matrix.
pub fn tree_of(t: &TreeMetricMatrix) -> ExplicitTree {
    matrix_to_tree(t).expect("certified tree metric reconstructs")
}

/// Rooted dendrogram: a node of ultrametric height `H` sits `H/2` above its
/// leaves, so leaf-to-leaf distances reproduce `u`. Zero-distance elements
/// share a leaf.
pub fn ultrametric_to_dendrogram(u: &DistanceMatrix) -> Result<ExplicitTree> {
    check_ultrametric(u).map_err(Error::NotUltrametric)?;
    let mut tree = ExplicitTree::new(u.labels().clone());
    if u.n() == 0 {
        return Ok(tree);
    }
    let all: Vec<usize> = (0..u.n()).collect();
    build_dendrogram(u, &mut tree, 0, &all);
    Ok(tree)
}

/// Fills `node` with the hierarchy over `members`; returns its height.
fn build_dendrogram(u: &DistanceMatrix, tree: &mut ExplicitTree, node: NodeId, members: &[usize]) -> Value {
    let top = members
        .iter()
        .enumerate()
        .flat_map(|(a, &x)| members[a + 1..].iter().map(move |&y| u.get(x, y)))
        .max()
        .cloned()
        .unwrap_or_else(Value::zero);
    if top.is_zero() {
        for &e in members {
            tree.associate(e, node);
        }
        return top;
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &e in members {
        match classes.iter_mut().find(|c| u.get(c[0], e) < &top) {
            Some(c) => c.push(e),
            None => classes.push(vec![e]),
        }
    }
    for class in classes {
        let child = tree.add_node();
        let h = build_dendrogram(u, tree, child, &class);
        tree.connect(node, child, half(&(&top - h)));
    }
    top
}

/// Dendrogram of a certified ultrametric.
pub fn dendrogram_of(u: &UltrametricMatrix) -> ExplicitTree {
    ultrametric_to_dendrogram(u).expect("certified ultrametric")
}

fn newick_root(t: &ExplicitTree) -> NodeId {
    (0..t.node_count())
        .find(|&x| t.neighbors(x).len() >= 2 && t.elements_at(x).next().is_none())
        .or_else(|| t.assoc.first().copied().flatten())
        .unwrap_or(0)
}

fn quote_label(label: &str) -> String {
    if label.chars().any(|c| "()[]':;,".contains(c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

struct Emitted {
    body: String,
    lift: Value,
    key: usize,
}

fn emit(t: &ExplicitTree, node: NodeId, parent: Option<NodeId>) -> Option<Emitted> {
    let elements: Vec<usize> = t.elements_at(node).collect();
    let mut children: Vec<Emitted> = t
        .neighbors(node)
        .iter()
        .filter(|(y, _)| Some(*y) != parent)
        .filter_map(|(y, w)| {
            emit(t, *y, Some(node)).map(|mut em| {
                em.lift += w;
                em
            })
        })
        .collect();
    if parent.is_some() {
        if elements.len() == 1 && children.is_empty() {
            return Some(Emitted {
                body: quote_label(t.labels.name(elements[0])),
                lift: Value::zero(),
                key: elements[0],
            });
        }
        if elements.is_empty() && children.len() <= 1 {
            return children.pop();
        }
    }
    let mut items: Vec<(usize, String)> = elements
        .iter()
        .map(|&e| (e, format!("{}:0", quote_label(t.labels.name(e)))))
        .collect();
    items.extend(
        children
            .into_iter()
            .map(|em| (em.key, format!("{}:{}", em.body, format_value(&em.lift)))),
    );
    if items.is_empty() {
        return None;
    }
    items.sort_by_key(|(k, _)| *k);
    let key = items[0].0;
    let body: Vec<String> = items.into_iter().map(|(_, s)| s).collect();
    Some(Emitted {
        body: format!("({})", body.join(",")),
        lift: Value::zero(),
        key,
    })
}

/// Newick text with exact branch lengths. Co-associated elements become
/// zero-length siblings, element-free branches are dropped, unary auxiliary
/// nodes are contracted, and children are ordered by their first label.
pub fn serialize_newick(t: &ExplicitTree) -> String {
    let root = newick_root(t);
    match emit(t, root, None) {
        Some(em) => format!("{};", em.body),
        None => "();".to_string(),
    }
}

struct NewickParser<'a> {
    text: &'a str,
    pos: usize,
}

struct ParsedNode {
    label: Option<String>,
    length: Option<Value>,
    children: Vec<ParsedNode>,
}

impl<'a> NewickParser<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: 1,
            message: format!("newick offset {}: {}", self.pos, message.into()),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn subtree(&mut self) -> Result<ParsedNode> {
        let mut children = Vec::new();
        if self.eat('(') {
            loop {
                children.push(self.subtree()?);
                if self.eat(',') {
                    continue;
                }
                if self.eat(')') {
                    break;
                }
                return Err(self.error("expected ',' or ')'"));
            }
        }
        let label = self.label()?;
        let length = if self.eat(':') {
            let token = self.token();
            Some(parse_value(&token).map_err(|_| self.error(format!("bad branch length {token:?}")))?)
        } else {
            None
        };
        Ok(ParsedNode {
            label,
            length,
            children,
        })
    }

    fn token(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || "()[]':;,".contains(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        self.text[start..self.pos].to_string()
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated quoted label")),
                    Some('\'') => {
                        self.pos += 1;
                        if self.peek() == Some('\'') {
                            self.pos += 1;
                            out.push('\'');
                        } else {
                            break;
                        }
                    }
                    Some(c) => {
                        self.pos += c.len_utf8();
                        out.push(c);
                    }
                }
            }
            return Ok(Some(out));
        }
        let token = self.token();
        Ok((!token.is_empty()).then_some(token))
    }
}

fn collect_labels(node: &ParsedNode, out: &mut Vec<String>) {
    if let Some(l) = &node.label {
        out.push(l.clone());
    }
    for c in &node.children {
        collect_labels(c, out);
    }
}

fn place(parsed: &ParsedNode, tree: &mut ExplicitTree, node: NodeId) -> Result<()> {
    if let Some(l) = &parsed.label {
        let e = tree.labels.require(l)?;
        if tree.assoc[e].is_some() {
            return Err(Error::DuplicateLabel(l.clone()));
        }
        tree.associate(e, node);
    }
    for child in &parsed.children {
        let w = child
            .length
            .clone()
            .ok_or_else(|| Error::InvalidTree("missing branch length".into()))?;
        if w.is_negative() {
            return Err(Error::InvalidTree("negative branch length".into()));
        }
        let c = tree.add_leaf(node, w);
        place(child, tree, c)?;
    }
    Ok(())
}

fn parse_tree(text: &str) -> Result<ParsedNode> {
    let mut p = NewickParser { text, pos: 0 };
    let root = p.subtree()?;
    if !p.eat(';') {
        return Err(p.error("expected ';'"));
    }
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing content"));
    }
    Ok(root)
}

/// Parses Newick text; elements are ordered by first appearance. Internal
/// node labels associate elements with internal nodes.
pub fn parse_newick(text: &str) -> Result<ExplicitTree> {
    let root = parse_tree(text)?;
    let mut names = Vec::new();
    collect_labels(&root, &mut names);
    let mut tree = ExplicitTree::new(Labels::new(names)?);
    place(&root, &mut tree, 0)?;
    tree.validate()?;
    Ok(tree)
}

/// Parses Newick text over a known label set, which must match exactly.
pub fn parse_newick_with_labels(text: &str, labels: &Arc<Labels>) -> Result<ExplicitTree> {
    let root = parse_tree(text)?;
    let mut tree = ExplicitTree::new(labels.clone());
    place(&root, &mut tree, 0)?;
    tree.validate()?;
    Ok(tree)
}
