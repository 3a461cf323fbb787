//! Constrained ultrametric fitting by squeezing: clamp the input into the
//! constraint band, fit an unconstrained ultrametric with any solver, then
//! clamp the result. With a factor-`rho` solver the result is within
//! `2 * rho` of the best constrained ultrametric.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::DistanceMatrix;
use crate::problem::{ConstrainedInstance, UltrametricMatrix};
use crate::report::{Certificate, FitReport};
use crate::ultrafit::{exact_over_candidates, solve, HeightBounds, UltrametricFitter};
use crate::value::Value;
use crate::verify::{check_constrained, check_ultrametric};

pub const CONSTRAINED_EXACT_LIMIT: usize = 6;
pub const CONSTRAINED_ENUMERATION_LIMIT: usize = 4;

/// `min(h, max(v, l_u, l_v))`.
pub fn squeeze_value(v: &Value, lu: &Value, lv: &Value, h: &Value) -> Value {
    v.max(lu).max(lv).min(h).clone()
}

/// A matrix clamped into an instance's constraint band.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezedMatrix {
    matrix: DistanceMatrix,
    source: ConstrainedInstance,
}

impl SqueezedMatrix {
    pub fn matrix(&self) -> &DistanceMatrix {
        &self.matrix
    }

    pub fn source(&self) -> &ConstrainedInstance {
        &self.source
    }

    pub fn into_matrix(self) -> DistanceMatrix {
        self.matrix
    }
}

pub fn squeeze(a: &DistanceMatrix, inst: &ConstrainedInstance) -> Result<SqueezedMatrix> {
    inst.matrix().ensure_same_labels(a)?;
    let matrix = a.map(|i, j, v| squeeze_value(v, inst.lower(i), inst.lower(j), inst.h()))?;
    Ok(SqueezedMatrix {
        matrix,
        source: inst.clone(),
    })
}

/// Squeezes an ultrametric. Raising each element's entries to its lower
/// bound and then capping at `h` never breaks the three-point condition, so
/// the result is a constrained ultrametric; this is re-checked before
/// returning.
pub fn squeeze_ultrametric(u: &DistanceMatrix, inst: &ConstrainedInstance) -> Result<UltrametricMatrix> {
    check_ultrametric(u).map_err(Error::NotUltrametric)?;
    let s = squeeze(u, inst)?.into_matrix();
    check_constrained(&s, inst)
        .map_err(|w| Error::Invariant(format!("squeezed ultrametric is not constrained: {w}")))?;
    Ok(UltrametricMatrix::new_unchecked(s))
}

/// Squeeze, solve unconstrained, squeeze the solution.
pub fn fit_constrained<S: UltrametricFitter + ?Sized>(
    inst: &ConstrainedInstance,
    solver: &S,
) -> Result<(UltrametricMatrix, FitReport)> {
    let start = Instant::now();
    let squeezed = squeeze(inst.matrix(), inst)?;
    let u = solve(squeezed.matrix(), solver)?;
    let out = squeeze_ultrametric(&u, inst)?;
    let report = FitReport::build(
        inst.matrix(),
        &out,
        solver.name(),
        Some(inst.alpha_label().to_string()),
        Certificate::ConstrainedUltrametric,
        start.elapsed(),
    )?;
    Ok((out, report))
}

fn constrained_candidates(inst: &ConstrainedInstance) -> Vec<Value> {
    let mut c = inst.matrix().distinct_values();
    c.extend(inst.lowers().iter().cloned());
    c.push(inst.h().clone());
    c.sort();
    c.dedup();
    c
}

/// Exact minimizer over constrained ultrametrics by topology enumeration
/// with a bounded height DP: a node must sit at or above the lower bound of
/// every leaf directly under it, and no node may exceed `h`.
pub fn fit_constrained_exact(inst: &ConstrainedInstance, exec: Execution) -> Result<UltrametricMatrix> {
    let d = inst.matrix();
    if d.n() > CONSTRAINED_EXACT_LIMIT {
        return Err(Error::TooLarge {
            what: "exact constrained fitting",
            n: d.n(),
            limit: CONSTRAINED_EXACT_LIMIT,
        });
    }
    let bounds = HeightBounds {
        lower: inst.lowers(),
        upper: inst.h(),
    };
    let (_, m) = exact_over_candidates(d, &constrained_candidates(inst), Some(bounds), exec)
        .ok_or_else(|| Error::Invariant("constrained instance has no feasible hierarchy".into()))?;
    check_constrained(&m, inst).map_err(|w| Error::Invariant(format!("exact constrained fit: {w}")))?;
    Ok(UltrametricMatrix::new_unchecked(m))
}

/// Exact minimizer by enumerating every matrix whose entries come from the
/// instance's candidate values and keeping the best constrained ultrametric.
/// Independent of the hierarchy machinery.
pub fn fit_constrained_enumerate(inst: &ConstrainedInstance) -> Result<UltrametricMatrix> {
    let d = inst.matrix();
    if d.n() > CONSTRAINED_ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "constrained matrix enumeration",
            n: d.n(),
            limit: CONSTRAINED_ENUMERATION_LIMIT,
        });
    }
    let candidates = constrained_candidates(inst);
    let pairs: Vec<(usize, usize)> = d.pairs().collect();
    let options: Vec<Vec<&Value>> = pairs
        .iter()
        .map(|&(i, j)| candidates.iter().filter(|c| inst.pair_feasible(i, j, c)).collect())
        .collect();
    let mut digits = vec![0usize; pairs.len()];
    let mut best: Option<(usize, DistanceMatrix)> = None;
    loop {
        let mut it = digits.iter().zip(&options).map(|(&k, o)| o[k].clone());
        let m = DistanceMatrix::from_fn(d.labels().clone(), |_, _| it.next().expect("one per pair"))?;
        if check_ultrametric(&m).is_ok() {
            let cost = d.upper().iter().zip(m.upper()).filter(|(a, b)| a != b).count();
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, m));
            }
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                let (_, m) = best.ok_or_else(|| Error::Invariant("no feasible matrix".into()))?;
                return Ok(UltrametricMatrix::new_unchecked(m));
            }
            digits[pos] += 1;
            if digits[pos] < options[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}
