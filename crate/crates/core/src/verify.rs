//! Property verifiers with re-checkable witnesses.
//!
//! Every failing check returns a [`MetricWitness`] naming the offending
//! elements and entries; [`MetricWitness::reverify`] evaluates the same
//! condition again from scratch.

use std::fmt;

use num_traits::{Signed, Zero};

use crate::matrix::DistanceMatrix;
use crate::problem::ConstrainedInstance;
use crate::tree::reconstructs_exactly;
use crate::value::{format_value, zero, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// `values[0] = D(a,b)` exceeds both `D(a,c)` and `D(b,c)`.
    UltrametricViolation,
    /// The largest of the three pairings of four elements is unique.
    FourPointViolation,
    /// `D(a,b) > D(a,c) + D(c,b)`.
    TriangleViolation,
    /// `values = [U(a,b), l_a, l_b, h]` with `U(a,b)` outside `[max(l_a,l_b), h]`.
    ConstraintViolation,
    Asymmetry,
    NegativeEntry,
    NonZeroDiagonal,
}

impl fmt::Display for WitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WitnessKind::UltrametricViolation => "ultrametric-violation",
            WitnessKind::FourPointViolation => "four-point-violation",
            WitnessKind::TriangleViolation => "triangle-violation",
            WitnessKind::ConstraintViolation => "constraint-violation",
            WitnessKind::Asymmetry => "asymmetry",
            WitnessKind::NegativeEntry => "negative-entry",
            WitnessKind::NonZeroDiagonal => "nonzero-diagonal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricWitness {
    pub kind: WitnessKind,
    pub elements: Vec<String>,
    pub values: Vec<Value>,
}

impl fmt::Display for MetricWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values: Vec<String> = self.values.iter().map(format_value).collect();
        write!(
            f,
            "{} on ({}) with values [{}]",
            self.kind,
            self.elements.join(", "),
            values.join(", ")
        )
    }
}

impl MetricWitness {
    /// Re-evaluates the named condition on `m` (and `inst` for constraint
    /// witnesses) and reports whether the violation is reproduced exactly.
    pub fn reverify(&self, m: &DistanceMatrix, inst: Option<&ConstrainedInstance>) -> bool {
        self.reverify_within(m, inst, zero())
    }

    pub fn reverify_within(&self, m: &DistanceMatrix, inst: Option<&ConstrainedInstance>, tolerance: &Value) -> bool {
        let idx: Option<Vec<usize>> = self.elements.iter().map(|e| m.labels().index_of(e)).collect();
        let Some(idx) = idx else {
            return false;
        };
        let d = |a: usize, b: usize| m.get(idx[a], idx[b]);
        match self.kind {
            WitnessKind::UltrametricViolation if idx.len() == 3 => {
                ultrametric_violated(d(0, 1), d(0, 2), d(1, 2), tolerance)
            }
            WitnessKind::FourPointViolation if idx.len() == 4 => {
                let sums = [d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2)];
                four_point_violated(sums, tolerance)
            }
            WitnessKind::TriangleViolation if idx.len() == 3 => d(0, 1) - (d(0, 2) + d(2, 1)) > *tolerance,
            WitnessKind::ConstraintViolation if idx.len() == 2 => match inst {
                Some(inst) => {
                    let (a, b) = (idx[0], idx[1]);
                    inst.matrix().same_labels(m) && !inst.pair_feasible(a, b, m.get(a, b))
                }
                None => false,
            },
            WitnessKind::NegativeEntry if idx.len() == 2 => d(0, 1).is_negative(),
            // Asymmetric and diagonal defects cannot exist inside a
            // DistanceMatrix; those witnesses only re-verify on raw rows.
            _ => false,
        }
    }

    /// Re-verifies witnesses produced by [`check_rows`].
    pub fn reverify_rows(&self, names: &[String], rows: &[Vec<Value>], tolerance: &Value) -> bool {
        let idx: Option<Vec<usize>> = self
            .elements
            .iter()
            .map(|e| names.iter().position(|n| n == e))
            .collect();
        let Some(idx) = idx else {
            return false;
        };
        match (self.kind, idx.as_slice()) {
            (WitnessKind::Asymmetry, &[i, j]) => (&rows[i][j] - &rows[j][i]).abs() > *tolerance,
            (WitnessKind::NegativeEntry, &[i, j]) => rows[i][j].is_negative(),
            (WitnessKind::NonZeroDiagonal, &[i]) => rows[i][i].abs() > *tolerance,
            _ => false,
        }
    }
}

fn ultrametric_violated(ab: &Value, ac: &Value, bc: &Value, tolerance: &Value) -> bool {
    if tolerance.is_zero() {
        return ab > ac.max(bc);
    }
    ab - ac.max(bc) > *tolerance
}

fn four_point_violated(mut sums: [Value; 3], tolerance: &Value) -> bool {
    sums.sort();
    if tolerance.is_zero() {
        return sums[2] > sums[1];
    }
    &sums[2] - &sums[1] > *tolerance
}

/// `m` is an ultrametric iff it equals its subdominant ultrametric, the
/// minimax path distance over a minimum spanning tree. Quadratic.
fn equals_subdominant(m: &DistanceMatrix) -> bool {
    let n = m.n();
    if n < 3 {
        return true;
    }
    let mut order = vec![0usize];
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    // closest tree vertex for every outside vertex
    let mut link: Vec<usize> = vec![0; n];
    // minimax[k][i]: bottleneck between order[k] and order[i], i < k
    let mut minimax: Vec<Vec<&Value>> = vec![Vec::new()];
    let mut pos = vec![0usize; n];
    for _ in 1..n {
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| m.get(a, link[a]).cmp(m.get(b, link[b])))
            .expect("vertices remain");
        let p = pos[link[v]];
        let w = m.get(v, link[v]);
        let k = order.len();
        let mut row: Vec<&Value> = Vec::with_capacity(k);
        for i in 0..k {
            let through = match i.cmp(&p) {
                std::cmp::Ordering::Less => minimax[p][i],
                std::cmp::Ordering::Greater => minimax[i][p],
                std::cmp::Ordering::Equal => zero(),
            };
            let bottleneck = through.max(w);
            if bottleneck != m.get(v, order[i]) {
                return false;
            }
            row.push(bottleneck);
        }
        minimax.push(row);
        pos[v] = k;
        order.push(v);
        in_tree[v] = true;
        for u in (0..n).filter(|&u| !in_tree[u]) {
            if m.get(u, v) < m.get(u, link[u]) {
                link[u] = v;
            }
        }
    }
    true
}

/// Checks raw square rows for the format-level invariants: zero diagonal,
/// symmetry (within `tolerance`), and nonnegativity.
pub fn check_rows(names: &[String], rows: &[Vec<Value>], tolerance: &Value) -> Result<(), MetricWitness> {
    let n = names.len();
    for i in 0..n {
        if rows[i][i].abs() > *tolerance {
            return Err(MetricWitness {
                kind: WitnessKind::NonZeroDiagonal,
                elements: vec![names[i].clone()],
                values: vec![rows[i][i].clone()],
            });
        }
        for j in i + 1..n {
            if (&rows[i][j] - &rows[j][i]).abs() > *tolerance {
                return Err(MetricWitness {
                    kind: WitnessKind::Asymmetry,
                    elements: vec![names[i].clone(), names[j].clone()],
                    values: vec![rows[i][j].clone(), rows[j][i].clone()],
                });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rows[i][j].is_negative() {
                return Err(MetricWitness {
                    kind: WitnessKind::NegativeEntry,
                    elements: vec![names[i].clone(), names[j].clone()],
                    values: vec![rows[i][j].clone()],
                });
            }
        }
    }
    Ok(())
}

fn witness(m: &DistanceMatrix, kind: WitnessKind, elems: &[usize], values: Vec<Value>) -> MetricWitness {
    MetricWitness {
        kind,
        elements: elems.iter().map(|&i| m.label(i).to_string()).collect(),
        values,
    }
}

/// Ok iff in every triple the two largest entries are equal.
pub fn check_ultrametric(m: &DistanceMatrix) -> Result<(), MetricWitness> {
    if equals_subdominant(m) {
        return Ok(());
    }
    check_ultrametric_within(m, zero())
}

pub fn check_ultrametric_within(m: &DistanceMatrix, tolerance: &Value) -> Result<(), MetricWitness> {
    let n = m.n();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let (ab, ac, bc) = (m.get(a, b), m.get(a, c), m.get(b, c));
                // Rotate so the offending pair comes first in the witness.
                for (x, y, z, v) in [
                    (a, b, c, [ab, ac, bc]),
                    (a, c, b, [ac, ab, bc]),
                    (b, c, a, [bc, ab, ac]),
                ] {
                    if ultrametric_violated(v[0], v[1], v[2], tolerance) {
                        let values = vec![v[0].clone(), m.get(x, z).clone(), m.get(y, z).clone()];
                        return Err(witness(m, WitnessKind::UltrametricViolation, &[x, y, z], values));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Ok iff `m` is realizable by a nonnegatively weighted tree.
///
/// Exact checks first try to reconstruct the tree and compare its induced
/// distances, which is quadratic for valid inputs. When that fails the
/// triangle and four-point conditions are scanned to produce a witness.
pub fn check_tree_metric(m: &DistanceMatrix) -> Result<(), MetricWitness> {
    if reconstructs_exactly(m) {
        return Ok(());
    }
    match scan_tree_metric(m, zero()) {
        Err(w) => Err(w),
        Ok(()) => unreachable!("reconstruction failed on a matrix satisfying the four-point condition"),
    }
}

/// Tolerant tree-metric check; always uses the exhaustive scan.
pub fn check_tree_metric_within(m: &DistanceMatrix, tolerance: &Value) -> Result<(), MetricWitness> {
    if tolerance.is_zero() {
        return check_tree_metric(m);
    }
    scan_tree_metric(m, tolerance)
}

/// Exhaustive triangle-inequality and four-point scan, `O(n^4)`.
pub fn scan_tree_metric(m: &DistanceMatrix, tolerance: &Value) -> Result<(), MetricWitness> {
    let n = m.n();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a < b && c != a && c != b && m.get(a, b) - (m.get(a, c) + m.get(c, b)) > *tolerance {
                    let values = vec![m.get(a, b).clone(), m.get(a, c).clone(), m.get(c, b).clone()];
                    return Err(witness(m, WitnessKind::TriangleViolation, &[a, b, c], values));
                }
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let sums = [
                        m.get(a, b) + m.get(c, d),
                        m.get(a, c) + m.get(b, d),
                        m.get(a, d) + m.get(b, c),
                    ];
                    if four_point_violated(sums.clone(), tolerance) {
                        return Err(witness(
                            m,
                            WitnessKind::FourPointViolation,
                            &[a, b, c, d],
                            sums.to_vec(),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Ok iff `u` is an ultrametric whose every entry lies in
/// `[max(l_a, l_b), h]` for the instance's bounds.
pub fn check_constrained(u: &DistanceMatrix, inst: &ConstrainedInstance) -> Result<(), MetricWitness> {
    check_ultrametric(u)?;
    let bad = u
        .pairs()
        .zip(u.upper())
        .find(|&((a, b), v)| !inst.pair_feasible(a, b, v));
    match bad {
        None => Ok(()),
        Some(((a, b), v)) => Err(witness(
            u,
            WitnessKind::ConstraintViolation,
            &[a, b],
            vec![
                v.clone(),
                inst.lower(a).clone(),
                inst.lower(b).clone(),
                inst.h().clone(),
            ],
        )),
    }
}
