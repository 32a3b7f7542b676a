use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::area::AttackedArea;
use crate::error::{Error, Result};
use crate::grid::LineId;

/// Lower bound on the objective weight of any line.
pub const COST_FLOOR: f64 = 1e-3;

/// Per-line attack probabilities `y ∈ [0, 1]` in `E_H` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorVector(pub Vec<f64>);

impl PriorVector {
    pub fn uniform(n: usize) -> Self {
        PriorVector(vec![0.0; n])
    }

    /// Ground-truth labels used as probabilities.
    pub fn oracle(labels: &[u8]) -> Self {
        PriorVector(labels.iter().map(|&l| f64::from(l)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, n_lines: usize) -> Result<()> {
        if self.0.len() != n_lines {
            return Err(Error::Prior(format!(
                "prior has {} entries, area has {n_lines} lines",
                self.0.len()
            )));
        }
        if let Some(y) = self.0.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(Error::Prior(format!("probability {y} outside [0, 1]")));
        }
        Ok(())
    }

    /// `c_e = max(1 − y_e, COST_FLOOR)`.
    pub fn costs(&self) -> Vec<f64> {
        self.0.iter().map(|y| (1.0 - y).max(COST_FLOOR)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "path")]
pub enum PriorSource {
    Uniform,
    Oracle,
    File(std::path::PathBuf),
}

impl std::fmt::Display for PriorSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PriorSource::Uniform => f.write_str("uniform"),
            PriorSource::Oracle => f.write_str("oracle"),
            PriorSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl std::str::FromStr for PriorSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PriorSource::Uniform),
            "oracle" => Ok(PriorSource::Oracle),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(PriorSource::File(p.into())),
                _ => Err(Error::Config(format!(
                    "prior must be `uniform`, `oracle` or `file:<path>`, got `{s}`"
                ))),
            },
        }
    }
}

/// On-disk prior exchanged with an external model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorFile {
    pub area_id: String,
    pub edges: Vec<LineId>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_id: Option<String>,
}

impl PriorFile {
    pub fn new(area: &AttackedArea, prior: &PriorVector, scenario_id: Option<String>) -> Self {
        PriorFile {
            area_id: area.id.clone(),
            edges: area.lines.clone(),
            y: prior.0.clone(),
            scenario_id,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Reorders the probabilities into the area's `E_H` order.
    pub fn to_prior(&self, area: &AttackedArea) -> Result<PriorVector> {
        if self.area_id != area.id {
            return Err(Error::Prior(format!(
                "prior is for area {}, not {}",
                self.area_id, area.id
            )));
        }
        if self.edges.len() != self.y.len() {
            return Err(Error::Prior(format!(
                "{} edges but {} probabilities",
                self.edges.len(),
                self.y.len()
            )));
        }
        if self.edges.len() != area.lines.len() {
            return Err(Error::Prior(format!(
                "prior covers {} lines, area has {}",
                self.edges.len(),
                area.lines.len()
            )));
        }
        let mut y = Vec::with_capacity(area.lines.len());
        for l in &area.lines {
            let k = self
                .edges
                .iter()
                .position(|e| e == l)
                .ok_or_else(|| Error::Prior(format!("prior has no entry for line {l}")))?;
            y.push(self.y[k]);
        }
        let prior = PriorVector(y);
        prior.validate(area.lines.len())?;
        Ok(prior)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn costs_respect_floor() {
        let p = PriorVector(vec![0.0, 0.5, 1.0]);
        assert_eq!(p.costs(), vec![1.0, 0.5, COST_FLOOR]);
        assert!(PriorVector(vec![1.2]).validate(1).is_err());
        assert!(PriorVector(vec![0.2]).validate(2).is_err());
    }

    #[test]
    fn source_parsing() {
        assert_eq!("uniform".parse::<PriorSource>().unwrap(), PriorSource::Uniform);
        assert_eq!(
            "file:a.json".parse::<PriorSource>().unwrap(),
            PriorSource::File("a.json".into())
        );
        assert!("file:".parse::<PriorSource>().is_err());
        assert!("bayes".parse::<PriorSource>().is_err());
    }
}
