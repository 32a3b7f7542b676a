use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, ScenarioRecord};
use super::metrics::{confusion, normalized_error, ClassificationMetrics, ConfusionCounts, Summary};
use crate::area::AttackedArea;
use crate::diagnosis::{diagnose, DeltaMode, DiagnosisOptions, PriorFile, PriorSource, PriorVector};
use crate::error::{Error, Result};
use crate::model::GridModel;

/// Resolved source of per-scenario priors.
#[derive(Debug, Clone)]
pub enum PriorBook {
    Uniform,
    Oracle,
    /// One prior for every scenario.
    Shared(PriorVector),
    /// Priors keyed by scenario id.
    PerScenario(HashMap<String, PriorVector>),
}

impl PriorBook {
    /// A prior file holds either one JSON object, or one object per line
    /// each tagged with its `scenario_id`.
    pub fn resolve(source: &PriorSource, area: &AttackedArea) -> Result<Self> {
        match source {
            PriorSource::Uniform => Ok(PriorBook::Uniform),
            PriorSource::Oracle => Ok(PriorBook::Oracle),
            PriorSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Prior(format!("cannot read {}: {e}", path.display()))
                })?;
                if let Ok(single) = serde_json::from_str::<PriorFile>(&text) {
                    return Ok(PriorBook::Shared(single.to_prior(area)?));
                }
                let mut map = HashMap::new();
                for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    let pf: PriorFile = serde_json::from_str(line).map_err(|e| {
                        Error::Prior(format!("{} line {}: {e}", path.display(), n + 1))
                    })?;
                    let id = pf.scenario_id.clone().ok_or_else(|| {
                        Error::Prior(format!("{} line {}: missing scenario_id", path.display(), n + 1))
                    })?;
                    map.insert(id, pf.to_prior(area)?);
                }
                Ok(PriorBook::PerScenario(map))
            }
        }
    }

    pub fn prior_for(&self, record: &ScenarioRecord) -> Result<PriorVector> {
        match self {
            PriorBook::Uniform => Ok(PriorVector::uniform(record.lines.len())),
            PriorBook::Oracle => Ok(PriorVector::oracle(&record.labels)),
            PriorBook::Shared(p) => Ok(p.clone()),
            PriorBook::PerScenario(map) => map
                .get(&record.id)
                .cloned()
                .ok_or_else(|| Error::Prior(format!("no prior for scenario {}", record.id))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub scenario_id: String,
    pub cardinality: usize,
    pub predicted: Vec<u8>,
    pub truth: Vec<u8>,
    pub x_hat: Vec<f64>,
    pub x_true: Vec<f64>,
    pub counts: ConfusionCounts,
    pub metrics: ClassificationMetrics,
    pub normalized_error: f64,
    pub delta_mode: DeltaMode,
    pub islanding: bool,
    pub objective: f64,
}

pub fn evaluate_record(
    model: &GridModel,
    area: &AttackedArea,
    record: &ScenarioRecord,
    prior: &PriorVector,
    opts: &DiagnosisOptions,
) -> Result<EvaluationRecord> {
    if record.lines != area.lines {
        return Err(Error::Dataset(format!(
            "record {} was generated for a different line set",
            record.id
        )));
    }
    let d = diagnose(model, area, &record.measurements, prior, opts)?;
    let counts = confusion(&d.labels, &record.labels)?;
    Ok(EvaluationRecord {
        scenario_id: record.id.clone(),
        cardinality: record.cardinality,
        normalized_error: normalized_error(&d.x_h, &record.x_h)?,
        metrics: counts.into(),
        counts,
        predicted: d.labels,
        truth: record.labels.clone(),
        x_hat: d.x_h,
        x_true: record.x_h.clone(),
        delta_mode: d.delta_mode,
        islanding: d.reconstruction.islanding,
        objective: d.objective,
    })
}

/// Evaluates records in parallel; output order follows input order.
pub fn evaluate_records(
    model: &GridModel,
    area: &AttackedArea,
    records: &[ScenarioRecord],
    priors: &PriorBook,
    opts: &DiagnosisOptions,
) -> Result<Vec<EvaluationRecord>> {
    records
        .par_iter()
        .map(|r| {
            let prior = priors.prior_for(r)?;
            evaluate_record(model, area, r, &prior, opts).map_err(|e| match e {
                Error::Solver(m) => Error::Solver(format!("{}: {m}", r.id)),
                Error::Reconstruction(m) => Error::Reconstruction(format!("{}: {m}", r.id)),
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityRow {
    pub cardinality: usize,
    pub records: usize,
    pub accuracy: Summary,
    pub far: Summary,
    pub mdr: Summary,
    pub f1: Summary,
    pub error: Summary,
}

/// Mean and std of every metric per attack cardinality, ascending.
pub fn aggregate(records: &[EvaluationRecord]) -> Result<Vec<CardinalityRow>> {
    if records.is_empty() {
        return Err(Error::Dataset("no records to aggregate".into()));
    }
    let mut cards: Vec<usize> = records.iter().map(|r| r.cardinality).collect();
    cards.sort_unstable();
    cards.dedup();
    cards
        .into_iter()
        .map(|k| {
            let group: Vec<&EvaluationRecord> =
                records.iter().filter(|r| r.cardinality == k).collect();
            let col = |f: fn(&EvaluationRecord) -> f64| -> Result<Summary> {
                Summary::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            Ok(CardinalityRow {
                cardinality: k,
                records: group.len(),
                accuracy: col(|r| r.metrics.accuracy)?,
                far: col(|r| r.metrics.far)?,
                mdr: col(|r| r.metrics.mdr)?,
                f1: col(|r| r.metrics.f1)?,
                error: col(|r| r.normalized_error)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub area_id: String,
    pub prior: String,
    pub rows: Vec<CardinalityRow>,
    #[serde(skip)]
    pub records: Vec<EvaluationRecord>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "cardinality,records,accuracy_mean,accuracy_std,far_mean,far_std,mdr_mean,mdr_std,f1_mean,f1_std,error_mean,error_std\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cardinality,
                r.records,
                r.accuracy.mean,
                r.accuracy.std,
                r.far.mean,
                r.far.std,
                r.mdr.mean,
                r.mdr.std,
                r.f1.mean,
                r.f1.std,
                r.error.mean,
                r.error.std
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("area {}  prior {}\n", self.area_id, self.prior);
        let _ = writeln!(
            s,
            "{:>3} {:>5}  {:>17}  {:>17}  {:>17}  {:>17}  {:>17}",
            "|F|", "n", "accuracy", "FAR", "MDR", "F1", "error"
        );
        let cell = |m: &Summary| format!("{:.4} ± {:.4}", m.mean, m.std);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>3} {:>5}  {:>17}  {:>17}  {:>17}  {:>17}  {:>17}",
                r.cardinality,
                r.records,
                cell(&r.accuracy),
                cell(&r.far),
                cell(&r.mdr),
                cell(&r.f1),
                cell(&r.error)
            );
        }
        s
    }

    /// Writes `metrics.csv`, `metrics.json`, `metrics.txt` and
    /// `records.ndjson` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.csv"), self.to_csv())?;
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(dir.join("metrics.txt"), self.to_text())?;
        let mut lines = String::new();
        for r in &self.records {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        fs::write(dir.join("records.ndjson"), lines)?;
        Ok(())
    }
}

/// Diagnoses every test record of `dataset` and tabulates the results.
pub fn run_experiment(
    model: &GridModel,
    dataset: &Dataset,
    source: &PriorSource,
    opts: &DiagnosisOptions,
) -> Result<ExperimentReport> {
    let area = &dataset.manifest.area;
    area.validate_against(&model.grid)?;
    let priors = PriorBook::resolve(source, area)?;
    let mut records = Vec::new();
    for shard in dataset.test_shards() {
        records.extend(dataset.read_shard(&shard.spec.name)?);
    }
    if records.is_empty() {
        return Err(Error::Dataset("dataset has no test records".into()));
    }
    let evaluated = evaluate_records(model, area, &records, &priors, opts)?;
    Ok(ExperimentReport {
        area_id: area.id.clone(),
        prior: source.to_string(),
        rows: aggregate(&evaluated)?,
        records: evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, err: f64, pred: Vec<u8>, truth: Vec<u8>) -> EvaluationRecord {
        let counts = confusion(&pred, &truth).unwrap();
        EvaluationRecord {
            scenario_id: String::new(),
            cardinality: k,
            x_hat: vec![],
            x_true: vec![],
            metrics: counts.into(),
            counts,
            predicted: pred,
            truth,
            normalized_error: err,
            delta_mode: DeltaMode::Zero,
            islanding: false,
            objective: 0.0,
        }
    }

    #[test]
    fn aggregation_groups_by_cardinality() {
        let rows = aggregate(&[
            rec(2, 0.5, vec![1, 1, 0], vec![1, 1, 0]),
            rec(1, 0.0, vec![1, 0, 0], vec![1, 0, 0]),
            rec(1, 1.0, vec![0, 1, 0], vec![1, 0, 0]),
        ])
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].cardinality, 1);
        assert_eq!(rows[0].error, Summary { mean: 0.5, std: 0.5 });
        assert_eq!(rows[1].f1.mean, 1.0);
        assert!(aggregate(&[]).is_err());
    }
}
