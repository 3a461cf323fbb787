//! Problem instances and certified matrix refinements.

use std::fmt;
use std::ops::Deref;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::matrix::{DistanceMatrix, LineReader};
use crate::value::{format_value, parse_value, Value};
use crate::verify::{check_tree_metric, check_ultrametric};

/// Input of constrained ultrametric fitting: a matrix, an anchor element,
/// an upper bound `h`, and a lower bound per element with `l_alpha = h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedInstance {
    matrix: DistanceMatrix,
    alpha: usize,
    h: Value,
    lower: Vec<Value>,
}

impl ConstrainedInstance {
    /// Strict form: `h > 0` and every `l_u > 0`.
    pub fn new(matrix: DistanceMatrix, alpha: &str, h: Value, lower: Vec<Value>) -> Result<Self> {
        let inst = Self::new_relaxed(matrix, alpha, h, lower)?;
        if let Some(i) = inst.lower.iter().position(|l| !l.is_positive()) {
            return Err(Error::InvalidInstance(format!(
                "lower bound of {} must be positive",
                inst.matrix.label(i)
            )));
        }
        Ok(inst)
    }

    /// Admits `l_u = 0`, which the anchored tree reduction produces for
    /// elements at maximal distance from the anchor.
    pub fn new_relaxed(matrix: DistanceMatrix, alpha: &str, h: Value, lower: Vec<Value>) -> Result<Self> {
        let alpha = matrix.labels().require(alpha)?;
        if lower.len() != matrix.n() {
            return Err(Error::InvalidInstance(format!(
                "{} lower bounds for {} elements",
                lower.len(),
                matrix.n()
            )));
        }
        if !h.is_positive() {
            return Err(Error::InvalidInstance("h must be positive".into()));
        }
        if lower[alpha] != h {
            return Err(Error::InvalidInstance(format!(
                "lower bound of anchor {} must equal h",
                matrix.label(alpha)
            )));
        }
        for (i, l) in lower.iter().enumerate() {
            if l.is_negative() {
                return Err(Error::InvalidInstance(format!(
                    "negative lower bound for {}",
                    matrix.label(i)
                )));
            }
            if *l > h {
                return Err(Error::InvalidInstance(format!(
                    "lower bound of {} exceeds h",
                    matrix.label(i)
                )));
            }
        }
        Ok(ConstrainedInstance {
            matrix,
            alpha,
            h,
            lower,
        })
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        &self.matrix
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn alpha_label(&self) -> &str {
        self.matrix.label(self.alpha)
    }

    pub fn h(&self) -> &Value {
        &self.h
    }

    pub fn lower(&self, i: usize) -> &Value {
        &self.lower[i]
    }

    pub fn lowers(&self) -> &[Value] {
        &self.lower
    }

    /// `max(l_a, l_b)`.
    pub fn pair_lower(&self, a: usize, b: usize) -> &Value {
        std::cmp::max(&self.lower[a], &self.lower[b])
    }

    pub fn pair_feasible(&self, a: usize, b: usize, v: &Value) -> bool {
        v >= self.pair_lower(a, b) && v <= &self.h
    }

    /// Same bounds on a different matrix over the same labels.
    pub fn with_matrix(&self, matrix: DistanceMatrix) -> Result<Self> {
        self.matrix.ensure_same_labels(&matrix)?;
        Ok(ConstrainedInstance {
            matrix,
            alpha: self.alpha,
            h: self.h.clone(),
            lower: self.lower.clone(),
        })
    }

    /// Matrix format followed by `alpha <label>`, `h <value>` and one
    /// `<label> <value>` line per element.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = LineReader::new(text);
        let matrix = DistanceMatrix::read(&mut lines, None)?;

        let mut keyed = |key: &str| -> Result<(usize, String)> {
            let (line, text) = lines.next_line(key)?;
            let mut parts = text.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(v), None) if k == key => Ok((line, v.to_string())),
                _ => Err(Error::Parse {
                    line,
                    message: format!("expected `{key} <value>`, found {text:?}"),
                }),
            }
        };
        let (_, alpha) = keyed("alpha")?;
        let (line, h) = keyed("h")?;
        let h = parse_value(&h).map_err(|_| Error::Parse {
            line,
            message: format!("not a number: {h:?}"),
        })?;

        let mut lower: Vec<Option<Value>> = vec![None; matrix.n()];
        for _ in 0..matrix.n() {
            let (line, text) = lines.next_line("lower bound")?;
            let mut parts = text.split_whitespace();
            let (Some(label), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `<label> <value>`, found {text:?}"),
                });
            };
            let i = matrix.labels().require(label)?;
            if lower[i].is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate lower bound for {label}"),
                });
            }
            lower[i] = Some(parse_value(value).map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {value:?}"),
            })?);
        }
        lines.expect_end()?;
        let lower = lower.into_iter().map(|l| l.expect("all n lines assigned")).collect();
        Self::new(matrix, &alpha, h, lower)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConstrainedInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.matrix)?;
        writeln!(f, "alpha {}", self.alpha_label())?;
        writeln!(f, "h {}", format_value(&self.h))?;
        for (i, l) in self.lower.iter().enumerate() {
            writeln!(f, "{} {}", self.matrix.label(i), format_value(l))?;
        }
        Ok(())
    }
}

macro_rules! certified_matrix {
    ($(#[$doc:meta])* $name:ident, $check:path, $err:path) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(DistanceMatrix);

        impl $name {
            pub fn new(m: DistanceMatrix) -> Result<Self> {
                $check(&m).map_err($err)?;
                Ok($name(m))
            }

            pub(crate) fn new_unchecked(m: DistanceMatrix) -> Self {
                $name(m)
            }

            pub fn as_matrix(&self) -> &DistanceMatrix {
                &self.0
            }

            pub fn into_matrix(self) -> DistanceMatrix {
                self.0
            }
        }

        impl Deref for $name {
            type Target = DistanceMatrix;

            fn deref(&self) -> &DistanceMatrix {
                &self.0
            }
        }

        impl TryFrom<DistanceMatrix> for $name {
            type Error = Error;

            fn try_from(m: DistanceMatrix) -> Result<Self> {
                Self::new(m)
            }
        }
    };
}

certified_matrix!(
    /// A distance matrix that passed [`check_ultrametric`].
    UltrametricMatrix,
    check_ultrametric,
    Error::NotUltrametric
);

certified_matrix!(
    /// A distance matrix that passed [`check_tree_metric`].
    TreeMetricMatrix,
    check_tree_metric,
    Error::NotTreeMetric
);

impl UltrametricMatrix {
    /// Every ultrametric is a tree metric.
    pub fn into_tree_metric(self) -> TreeMetricMatrix {
        TreeMetricMatrix::new_unchecked(self.0)
    }
}

/// True when every entry of `m` equals zero.
pub(crate) fn all_zero(m: &DistanceMatrix) -> bool {
    m.upper().iter().all(Zero::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::int;

    const TEXT: &str = "3\na b c\n0 1 2\n1 0 3\n2 3 0\nalpha a\nh 4\na 4\nb 1\nc 2.5\n";

    #[test]
    fn parses_constrained_file() {
        let inst = ConstrainedInstance::parse(TEXT).unwrap();
        assert_eq!(inst.alpha_label(), "a");
        assert_eq!(inst.h(), &int(4));
        assert_eq!(inst.lower(2), &crate::value::ratio(5, 2));
        assert_eq!(inst.to_text(), TEXT);
    }

    #[test]
    fn rejects_bad_bounds() {
        let m = DistanceMatrix::from_upper(["a", "b"], vec![int(1)]).unwrap();
        // anchor bound must equal h
        assert!(ConstrainedInstance::new(m.clone(), "a", int(4), vec![int(3), int(1)]).is_err());
        // bound above h
        assert!(ConstrainedInstance::new(m.clone(), "a", int(4), vec![int(4), int(5)]).is_err());
        // zero bound only in relaxed form
        assert!(ConstrainedInstance::new(m.clone(), "a", int(4), vec![int(4), int(0)]).is_err());
        assert!(ConstrainedInstance::new_relaxed(m.clone(), "a", int(4), vec![int(4), int(0)]).is_ok());
        // h must be positive
        assert!(ConstrainedInstance::new_relaxed(m.clone(), "a", int(0), vec![int(0), int(0)]).is_err());
        assert!(ConstrainedInstance::new(m, "z", int(4), vec![int(4), int(1)]).is_err());
        let dup = TEXT.replace("c 2.5", "b 2.5");
        assert!(ConstrainedInstance::parse(&dup).is_err());
    }

    #[test]
    fn certified_wrappers_validate() {
        let bad = DistanceMatrix::from_upper(["u", "v", "w"], vec![int(3), int(2), int(1)]).unwrap();
        assert!(matches!(
            UltrametricMatrix::new(bad.clone()),
            Err(Error::NotUltrametric(_))
        ));
        assert!(TreeMetricMatrix::new(bad).is_ok());
    }
}
