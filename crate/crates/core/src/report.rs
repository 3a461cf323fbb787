use std::fmt;
use std::time::Duration;

use crate::error::Result;
use crate::matrix::{disagreements, DistanceMatrix};
use crate::value::{format_value, Value};

/// Which property the returned matrix was verified to have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    Ultrametric,
    ConstrainedUltrametric,
    TreeMetric,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Certificate::Ultrametric => "ultrametric",
            Certificate::ConstrainedUltrametric => "constrained-ultrametric",
            Certificate::TreeMetric => "tree-metric",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disagreement {
    pub u: String,
    pub v: String,
    pub input: Value,
    pub output: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub cost: usize,
    pub anchor: Option<String>,
    pub solver: String,
    pub n: usize,
    pub wall_time: Duration,
    pub certificate: Certificate,
    pub disagreements: Vec<Disagreement>,
}

impl FitReport {
    pub fn build(
        input: &DistanceMatrix,
        output: &DistanceMatrix,
        solver: String,
        anchor: Option<String>,
        certificate: Certificate,
        wall_time: Duration,
    ) -> Result<Self> {
        let disagreements: Vec<Disagreement> = disagreements(input, output)?
            .into_iter()
            .map(|(i, j)| Disagreement {
                u: input.label(i).to_string(),
                v: input.label(j).to_string(),
                input: input.get(i, j).clone(),
                output: output.get(i, j).clone(),
            })
            .collect();
        Ok(FitReport {
            cost: disagreements.len(),
            anchor,
            solver,
            n: input.n(),
            wall_time,
            certificate,
            disagreements,
        })
    }

    /// Line-oriented `key value` text with a fixed key order. Wall time is
    /// left out so the text depends only on the inputs.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cost {}", self.cost)?;
        writeln!(f, "alpha {}", self.anchor.as_deref().unwrap_or("-"))?;
        writeln!(f, "solver {}", self.solver)?;
        writeln!(f, "n {}", self.n)?;
        writeln!(f, "valid {}", self.certificate)?;
        for d in &self.disagreements {
            writeln!(
                f,
                "pair {} {} {} {}",
                d.u,
                d.v,
                format_value(&d.input),
                format_value(&d.output)
            )?;
        }
        Ok(())
    }
}
