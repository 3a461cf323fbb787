//! Tree fitting through anchored (alpha-restricted) trees.
//!
//! For an anchor `alpha` with `m = max_u D(alpha, u)` the centroid
//! quasimetric `C(u, v) = 2m - D(alpha, u) - D(alpha, v)` turns every
//! alpha-restricted tree metric `T` into the constrained ultrametric
//! `T + C` and back. Differences are preserved pairwise, so fitting a
//! constrained ultrametric to `D + C` fits an alpha-restricted tree to `D`.

use std::sync::Arc;
use std::time::Instant;

use num_traits::{Signed, Zero};

use crate::constrained::fit_constrained;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::{l0_distance, DistanceMatrix, Labels};
use crate::problem::{all_zero, ConstrainedInstance, TreeMetricMatrix, UltrametricMatrix};
use crate::report::{Certificate, FitReport};
use crate::tree::ExplicitTree;
use crate::ultrafit::{UltraSolverSpec, UltrametricFitter};
use crate::value::{half, int, Value};
use crate::verify::{check_constrained, check_tree_metric};

/// A quasimetric `Q(u, v) = (l_u + l_v) / 2` given by per-element lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidQuasimetric {
    labels: Arc<Labels>,
    alpha: usize,
    m_alpha: Value,
    lengths: Vec<Value>,
}

impl CentroidQuasimetric {
    pub fn labels(&self) -> &Arc<Labels> {
        &self.labels
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn m_alpha(&self) -> &Value {
        &self.m_alpha
    }

    /// `l_u = 2m - 2 D(alpha, u)`; also the lower bound of `u` in the
    /// restricted instance.
    pub fn lengths(&self) -> &[Value] {
        &self.lengths
    }

    /// `D(alpha, u)` recovered from the lengths.
    pub fn anchor_distance(&self, u: usize) -> Value {
        &self.m_alpha - half(&self.lengths[u])
    }

    pub fn entry(&self, u: usize, v: usize) -> Value {
        if u == v {
            return Value::zero();
        }
        half(&(&self.lengths[u] + &self.lengths[v]))
    }

    pub fn to_matrix(&self) -> Result<DistanceMatrix> {
        DistanceMatrix::from_fn(self.labels.clone(), |u, v| self.entry(u, v))
    }

    /// Bounds-only instance over `matrix`: `h = 2m`, `l_u` the lengths.
    fn instance_for(&self, matrix: DistanceMatrix) -> Result<ConstrainedInstance> {
        ConstrainedInstance::new_relaxed(
            matrix,
            self.labels.name(self.alpha),
            &self.m_alpha + &self.m_alpha,
            self.lengths.clone(),
        )
    }
}

pub fn centroid_quasimetric(d: &DistanceMatrix, alpha: &str) -> Result<CentroidQuasimetric> {
    let a = d.labels().require(alpha)?;
    if d.n() < 2 {
        return Err(Error::InvalidArgument(
            "centroid quasimetric needs at least two elements".into(),
        ));
    }
    let m_alpha = (0..d.n())
        .filter(|&u| u != a)
        .map(|u| d.get(a, u))
        .max()
        .expect("n >= 2")
        .clone();
    let two = int(2);
    let lengths = (0..d.n()).map(|u| &two * (&m_alpha - d.get(a, u))).collect();
    Ok(CentroidQuasimetric {
        labels: d.labels().clone(),
        alpha: a,
        m_alpha,
        lengths,
    })
}

/// `D' = D + C`, `h = 2m`, `l_u = 2m - 2 D(alpha, u)`. Elements at maximal
/// distance from the anchor get `l_u = 0`.
pub fn restricted_instance(d: &DistanceMatrix, alpha: &str) -> Result<ConstrainedInstance> {
    let c = centroid_quasimetric(d, alpha)?;
    if c.m_alpha.is_zero() {
        return Err(Error::Degenerate(alpha.to_string()));
    }
    let shifted = d.map(|u, v, x| x + c.entry(u, v))?;
    c.instance_for(shifted)
}

/// Per-element `|T(alpha, u) - D(alpha, u)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRestrictedCertificate {
    pub alpha: String,
    pub residuals: Vec<Value>,
}

impl AlphaRestrictedCertificate {
    pub fn new(t: &DistanceMatrix, d: &DistanceMatrix, alpha: &str) -> Result<Self> {
        t.ensure_same_labels(d)?;
        let a = d.labels().require(alpha)?;
        let residuals = (0..d.n()).map(|u| (t.get(a, u) - d.get(a, u)).abs()).collect();
        Ok(AlphaRestrictedCertificate {
            alpha: alpha.to_string(),
            residuals,
        })
    }

    pub fn is_restricted(&self) -> bool {
        self.residuals.iter().all(Zero::is_zero)
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.residuals.iter().position(|r| !r.is_zero())
    }
}

fn ensure_restricted_to(t: &DistanceMatrix, c: &CentroidQuasimetric) -> Result<()> {
    let a = c.alpha;
    match (0..t.n()).find(|&u| *t.get(a, u) != c.anchor_distance(u)) {
        None => Ok(()),
        Some(u) => Err(Error::NotAlphaRestricted {
            alpha: t.label(a).to_string(),
            element: t.label(u).to_string(),
        }),
    }
}

/// `T' = U - C`: the alpha-restricted tree metric of a constrained
/// ultrametric.
pub fn constrained_to_tree(u: &DistanceMatrix, c: &CentroidQuasimetric) -> Result<TreeMetricMatrix> {
    if u.labels().names() != c.labels.names() {
        return Err(Error::LabelMismatch);
    }
    check_constrained(u, &c.instance_for(u.clone())?).map_err(Error::NotConstrained)?;
    let t = u.map(|a, b, x| x - c.entry(a, b))?;
    if let Some(x) = t.upper().iter().find(|x| x.is_negative()) {
        return Err(Error::Invariant(format!("negative tree distance {x}")));
    }
    ensure_restricted_to(&t, c).map_err(|e| Error::Invariant(e.to_string()))?;
    check_tree_metric(&t).map_err(|w| Error::Invariant(format!("not a tree metric: {w}")))?;
    Ok(TreeMetricMatrix::new_unchecked(t))
}

/// `U = T + C`: the constrained ultrametric of an alpha-restricted tree
/// metric.
pub fn tree_to_constrained(t: &DistanceMatrix, c: &CentroidQuasimetric) -> Result<UltrametricMatrix> {
    if t.labels().names() != c.labels.names() {
        return Err(Error::LabelMismatch);
    }
    ensure_restricted_to(t, c)?;
    check_tree_metric(t).map_err(Error::NotTreeMetric)?;
    let u = t.map(|a, b, x| x + c.entry(a, b))?;
    check_constrained(&u, &c.instance_for(u.clone())?)
        .map_err(|w| Error::Invariant(format!("shifted tree is not constrained: {w}")))?;
    Ok(UltrametricMatrix::new_unchecked(u))
}

/// Moves every element so that its tree distance to `alpha` equals
/// `D(alpha, u)`: too-far elements slide up the path towards `alpha`
/// (subdividing an edge if needed), too-close ones hang off a new leaf.
/// Nodes left without elements are kept.
pub fn alpha_restrict(t: &ExplicitTree, d: &DistanceMatrix, alpha: &str) -> Result<ExplicitTree> {
    if t.labels().names() != d.labels().names() {
        return Err(Error::LabelMismatch);
    }
    t.validate()?;
    let a = d.labels().require(alpha)?;
    let mut rooted = t.rooted_at(t.node_of(a));
    let mut out = t.clone();
    for u in (0..d.n()).filter(|&u| u != a) {
        let from = t.node_of(u);
        let have = rooted.depth[from].clone();
        let want = d.get(a, u);
        if &have > want {
            let p = out.point_at_depth(&mut rooted, from, want);
            out.associate(u, p);
        } else if &have < want {
            let w = want - &have;
            let leaf = out.add_leaf(from, w.clone());
            rooted.add_leaf(from, &w);
            out.associate(u, leaf);
        }
    }
    Ok(out)
}

/// Best anchor for restricting a fixed tree: `(alpha, cost)` minimizing
/// the disagreements of the restricted tree with `d`, ties to the first
/// label.
pub fn best_alpha_restriction(t: &ExplicitTree, d: &DistanceMatrix) -> Result<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for a in 0..d.n() {
        let r = alpha_restrict(t, d, d.label(a))?;
        let cost = l0_distance(&r.induced_matrix()?, d)?;
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((a, cost));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty label set".into()))
}

/// Fits a tree metric by solving the restricted constrained problem for
/// every anchor and keeping the cheapest result. With a factor-`rho`
/// ultrametric solver the result is within `6 * rho` of optimal.
pub fn fit_tree<S: UltrametricFitter + ?Sized>(
    d: &DistanceMatrix,
    solver: &S,
) -> Result<(TreeMetricMatrix, FitReport)> {
    fit_tree_with(d, solver, Execution::default())
}

/// [`fit_tree`] with the anchors' subproblems run under `exec`.
pub fn fit_tree_with<S: UltrametricFitter + ?Sized>(
    d: &DistanceMatrix,
    solver: &S,
    exec: Execution,
) -> Result<(TreeMetricMatrix, FitReport)> {
    let start = Instant::now();
    let report = |t: &DistanceMatrix, anchor: Option<usize>| {
        FitReport::build(
            d,
            t,
            solver.name(),
            anchor.map(|a| d.label(a).to_string()),
            Certificate::TreeMetric,
            start.elapsed(),
        )
    };
    if d.n() <= 1 || all_zero(d) {
        let t = TreeMetricMatrix::new_unchecked(d.clone());
        let r = report(&t, (d.n() > 0).then_some(0))?;
        return Ok((t, r));
    }

    let results = exec.map_range(d.n(), |a| -> Result<Option<(usize, TreeMetricMatrix)>> {
        let alpha = d.label(a);
        let c = centroid_quasimetric(d, alpha)?;
        if c.m_alpha().is_zero() {
            return Ok(None);
        }
        let inst = restricted_instance(d, alpha)?;
        let (u, _) = fit_constrained(&inst, solver)?;
        let t = constrained_to_tree(&u, &c)?;
        Ok(Some((l0_distance(&t, d)?, t)))
    });

    let mut best: Option<(usize, usize, TreeMetricMatrix)> = None;
    for (a, r) in results.into_iter().enumerate() {
        if let Some((cost, t)) = r? {
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, a, t));
            }
        }
    }
    let (_, a, t) = best.ok_or_else(|| Error::Invariant("no usable anchor".into()))?;
    let r = report(&t, Some(a))?;
    Ok((t, r))
}

/// [`fit_tree`] with a built-in solver, honoring its execution mode.
pub fn fit_tree_spec(d: &DistanceMatrix, spec: &UltraSolverSpec) -> Result<(TreeMetricMatrix, FitReport)> {
    fit_tree_with(d, spec, spec.execution)
}
