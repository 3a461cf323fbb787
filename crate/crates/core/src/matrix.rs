//! Symmetric distance matrices over labeled elements, the L0 cost, and the
//! plain-text matrix format.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::value::{format_value, parse_value, zero, Value};
use crate::verify::{check_rows, WitnessKind};

/// Ordered, duplicate-free element names. Shared between all matrices that
/// live on the same element set.
#[derive(Debug, PartialEq, Eq)]
pub struct Labels {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Labels {
    pub fn new<I, S>(names: I) -> Result<Arc<Labels>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("bad label {name:?}")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(name.clone()));
            }
        }
        Ok(Arc::new(Labels { names, index }))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }
}

#[inline]
fn pair_slot(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// A nonnegative symmetric matrix with an implicit zero diagonal. Only the
/// upper triangle is stored, so asymmetry cannot be represented.
#[derive(Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Arc<Labels>,
    upper: Vec<Value>,
}

impl DistanceMatrix {
    /// Builds a matrix from `f(i, j)` evaluated once per pair `i < j`.
    pub fn from_fn<F>(labels: Arc<Labels>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Value,
    {
        let n = labels.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                if v.is_negative() {
                    return Err(Error::Negative(labels.name(i).to_string(), labels.name(j).to_string()));
                }
                upper.push(v);
            }
        }
        Ok(DistanceMatrix { labels, upper })
    }

    pub fn from_labels<I, S>(names: I, f: impl FnMut(usize, usize) -> Value) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_fn(Labels::new(names)?, f)
    }

    /// Convenience constructor from the upper triangle in row-major order.
    pub fn from_upper<I, S>(names: I, upper: Vec<Value>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels = Labels::new(names)?;
        let n = labels.len();
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidArgument(format!(
                "{} entries given for {n} elements",
                upper.len()
            )));
        }
        let mut it = upper.into_iter();
        Self::from_fn(labels, |_, _| it.next().expect("length checked"))
    }

    pub fn zeros(labels: Arc<Labels>) -> Self {
        Self::from_fn(labels, |_, _| Value::zero()).expect("zero is nonnegative")
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &Arc<Labels> {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        self.labels.name(i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Value {
        if i == j {
            zero()
        } else {
            &self.upper[pair_slot(self.n(), i, j)]
        }
    }

    pub fn get_by_label(&self, a: &str, b: &str) -> Result<&Value> {
        Ok(self.get(self.labels.require(a)?, self.labels.require(b)?))
    }

    /// All unordered pairs `(i, j)` with `i < j`, in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }

    pub fn pair_count(&self) -> usize {
        self.upper.len()
    }

    /// Upper-triangle entries in the same order as [`pairs`](Self::pairs).
    pub fn upper(&self) -> &[Value] {
        &self.upper
    }

    /// Sorted distinct off-diagonal values.
    pub fn distinct_values(&self) -> Vec<Value> {
        let set: BTreeSet<&Value> = self.upper.iter().collect();
        set.into_iter().cloned().collect()
    }

    pub fn max_entry(&self) -> Value {
        self.upper.iter().max().cloned().unwrap_or_else(Value::zero)
    }

    pub fn same_labels(&self, other: &DistanceMatrix) -> bool {
        Arc::ptr_eq(&self.labels, &other.labels) || self.labels.names == other.labels.names
    }

    pub fn ensure_same_labels(&self, other: &DistanceMatrix) -> Result<()> {
        if self.same_labels(other) {
            Ok(())
        } else {
            Err(Error::LabelMismatch)
        }
    }

    /// Entrywise transform over pairs `i < j`.
    pub fn map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, &Value) -> Value,
    {
        let labels = self.labels.clone();
        Self::from_fn(labels, |i, j| f(i, j, self.get(i, j)))
    }

    /// Parses the matrix text format: `n`, then `n` labels, then `n` rows of
    /// `n` decimals. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = LineReader::new(text);
        let m = Self::read(&mut lines, None)?;
        lines.expect_end()?;
        Ok(m)
    }

    /// Like [`parse`](Self::parse) but accepts asymmetric or nonzero-diagonal
    /// entries that are within `tolerance`; asymmetric pairs keep the mean.
    pub fn parse_with_tolerance(text: &str, tolerance: &Value) -> Result<Self> {
        let mut lines = LineReader::new(text);
        let m = Self::read(&mut lines, Some(tolerance))?;
        lines.expect_end()?;
        Ok(m)
    }

    pub(crate) fn read(lines: &mut LineReader<'_>, tolerance: Option<&Value>) -> Result<Self> {
        let (line_no, first) = lines.next_line("element count")?;
        let n: usize = first.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("expected element count, found {first:?}"),
        })?;
        let (line_no, second) = lines.next_line("labels")?;
        let names: Vec<&str> = second.split_whitespace().collect();
        if names.len() != n {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {n} labels, found {}", names.len()),
            });
        }
        let labels = Labels::new(names.iter().copied())?;

        let mut rows: Vec<Vec<Value>> = Vec::with_capacity(n);
        for r in 0..n {
            let (line_no, row) = lines.next_line("matrix row")?;
            let cells: Vec<&str> = row.split_whitespace().collect();
            if cells.len() != n {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("row {} has {} entries, expected {n}", r + 1, cells.len()),
                });
            }
            let parsed = cells
                .iter()
                .map(|c| {
                    parse_value(c).map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("not a number: {c:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(parsed);
        }

        if let Err(w) = check_rows(labels.names(), &rows, tolerance.unwrap_or(zero())) {
            let mut names = w.elements.into_iter();
            let mut next = || names.next().unwrap_or_default();
            return Err(match w.kind {
                WitnessKind::NonZeroDiagonal => Error::NonZeroDiagonal(next()),
                WitnessKind::Asymmetry => Error::Asymmetric(next(), next()),
                _ => Error::Negative(next(), next()),
            });
        }
        Self::from_fn(labels, |i, j| {
            if rows[i][j] == rows[j][i] {
                rows[i][j].clone()
            } else {
                (&rows[i][j] + &rows[j][i]) / Value::from_integer(2.into())
            }
        })
    }

    /// Serializes in the text format read by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DistanceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n();
        writeln!(f, "{n}")?;
        writeln!(f, "{}", self.labels.names.join(" "))?;
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format_value(self.get(i, j))).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

impl fmt::Debug for DistanceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DistanceMatrix {{ ")?;
        for (k, (i, j)) in self.pairs().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(
                f,
                "{}-{}: {}",
                self.label(i),
                self.label(j),
                format_value(&self.upper[k])
            )?;
        }
        write!(f, " }}")
    }
}

/// Number of unordered pairs on which `a` and `b` differ.
pub fn l0_distance(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<usize> {
    a.ensure_same_labels(b)?;
    Ok(a.upper.iter().zip(&b.upper).filter(|(x, y)| x != y).count())
}

/// The pairs `(i, j)`, `i < j`, on which `a` and `b` differ.
pub fn disagreements(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<Vec<(usize, usize)>> {
    a.ensure_same_labels(b)?;
    Ok(a.pairs()
        .zip(a.upper.iter().zip(&b.upper))
        .filter(|(_, (x, y))| x != y)
        .map(|(p, _)| p)
        .collect())
}

/// Line cursor that skips blank lines and tracks 1-based line numbers.
pub(crate) struct LineReader<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        LineReader {
            inner: text.lines().enumerate(),
        }
    }

    pub(crate) fn next_nonblank(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.trim()))
    }

    pub(crate) fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_nonblank().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unexpected end of input, expected {what}"),
        })
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        match self.next_nonblank() {
            None => Ok(()),
            Some((line, text)) => Err(Error::Parse {
                line,
                message: format!("unexpected trailing content {text:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::int;

    fn tri(a: i64, b: i64, c: i64) -> DistanceMatrix {
        DistanceMatrix::from_upper(["u", "v", "w"], vec![int(a), int(b), int(c)]).unwrap()
    }

    #[test]
    fn l0_examples() {
        assert_eq!(l0_distance(&tri(1, 2, 3), &tri(1, 2, 3)).unwrap(), 0);
        assert_eq!(l0_distance(&tri(1, 2, 3), &tri(1, 2, 4)).unwrap(), 1);
        assert_eq!(l0_distance(&tri(1, 2, 3), &tri(1, 5, 4)).unwrap(), 2);
    }

    #[test]
    fn l0_rejects_label_mismatch() {
        let other = DistanceMatrix::from_upper(["u", "v", "x"], vec![int(1), int(2), int(3)]).unwrap();
        assert_eq!(l0_distance(&tri(1, 2, 3), &other), Err(Error::LabelMismatch));
    }

    #[test]
    fn symmetric_lookup_and_zero_diagonal() {
        let m = tri(1, 2, 3);
        assert_eq!(m.get(0, 2), &int(2));
        assert_eq!(m.get(2, 0), &int(2));
        assert_eq!(m.get(1, 1), &int(0));
        assert_eq!(m.get_by_label("w", "v").unwrap(), &int(3));
    }

    #[test]
    fn text_round_trip() {
        let text = "3\na b c\n0 1.5 2\n1.5 0 0.25\n2 0.25 0\n";
        let m = DistanceMatrix::parse(text).unwrap();
        assert_eq!(m.to_text(), text);
        assert_eq!(DistanceMatrix::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn parser_rejects_bad_input() {
        let asym = "3\na b c\n0 1 2\n1 0 3\n2 4 0\n";
        assert_eq!(
            DistanceMatrix::parse(asym),
            Err(Error::Asymmetric("b".into(), "c".into()))
        );
        let diag = "2\na b\n1 1\n1 0\n";
        assert_eq!(DistanceMatrix::parse(diag), Err(Error::NonZeroDiagonal("a".into())));
        let neg = "2\na b\n0 -1\n-1 0\n";
        assert_eq!(DistanceMatrix::parse(neg), Err(Error::Negative("a".into(), "b".into())));
        let dup = "2\na a\n0 1\n1 0\n";
        assert_eq!(DistanceMatrix::parse(dup), Err(Error::DuplicateLabel("a".into())));
        assert!(DistanceMatrix::parse("2\na b\n0 1\n").is_err());
        assert!(DistanceMatrix::parse("2\na b\n0 1\n1 0\nextra\n").is_err());
        assert!(DistanceMatrix::parse("2\na b c\n0 1\n1 0\n").is_err());
    }

    #[test]
    fn tolerance_accepts_near_symmetry() {
        let text = "2\na b\n0 1\n1.001 0\n";
        assert!(DistanceMatrix::parse(text).is_err());
        let m = DistanceMatrix::parse_with_tolerance(text, &crate::value::ratio(1, 100)).unwrap();
        assert_eq!(m.get(0, 1), &crate::value::ratio(2001, 2000));
    }

    #[test]
    fn single_element_matrix() {
        let m = DistanceMatrix::parse("1\nx\n0\n").unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.pair_count(), 0);
    }
}
