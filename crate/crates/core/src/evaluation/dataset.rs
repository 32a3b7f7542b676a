//! Scenario datasets on disk: one NDJSON file per shard plus
//! `manifest.json`. Records are generated in parallel from per-record seeds
//! and written in index order, so output does not depend on thread count.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::area::AttackedArea;
use crate::error::{Error, Result};
use crate::grid::{parse_case_file, CanonicalGrid, LineId};
use crate::model::GridModel;
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulator::{
    sample_attack, sample_operating_point, simulate, AttackScenario, KindMix, LineAttack,
    MeasurementSet, SimConfig,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRID_FILE: &str = "grid.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Training records per attack kind.
    pub train_per_kind: usize,
    /// Test records per attack cardinality.
    pub test_per_cardinality: usize,
    /// Test cardinalities; every value in `1..=|E_H|` when absent.
    #[serde(default)]
    pub cardinalities: Option<Vec<usize>>,
    pub test_mix: KindMix,
    pub sim: SimConfig,
    /// Redraws allowed when a scenario cannot be rebalanced.
    pub max_resamples: u32,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            train_per_kind: 500,
            test_per_cardinality: 200,
            cardinalities: None,
            test_mix: KindMix::Mixed,
            sim: SimConfig::default(),
            max_resamples: 100,
        }
    }
}

/// Per-bus features: post-attack angle and injection with blinded buses
/// set to zero, and the sampled load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusFeatures {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub load: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub theta_post: Vec<f64>,
    pub p_post: Vec<f64>,
    pub delta: Vec<f64>,
    pub alpha: Option<f64>,
    pub islanding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub shard: String,
    pub area_id: String,
    pub seed: u64,
    pub cardinality: usize,
    /// `E_H`, the order of `labels` and `x_h`.
    pub lines: Vec<LineId>,
    pub attacks: Vec<LineAttack>,
    pub labels: Vec<u8>,
    pub x_h: Vec<f64>,
    pub features: BusFeatures,
    pub measurements: MeasurementSet,
    pub truth: ScenarioTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShardKind {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardSpec {
    pub name: String,
    pub kind: ShardKind,
    pub mix: KindMix,
    /// Fixed cardinality, or uniform over `1..=|E_H|` when absent.
    pub cardinality: Option<usize>,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    #[serde(flatten)]
    pub spec: ShardSpec,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub grid: String,
    pub root_seed: u64,
    pub area: AttackedArea,
    pub config: DatasetConfig,
    pub shards: Vec<ShardEntry>,
}

/// Shard layout for `config` on `area`.
pub fn plan_shards(area: &AttackedArea, config: &DatasetConfig) -> Result<Vec<ShardSpec>> {
    let m = area.lines.len();
    let cards = match &config.cardinalities {
        Some(c) => c.clone(),
        None => (1..=m).collect(),
    };
    if let Some(&bad) = cards.iter().find(|&&k| k == 0 || k > m) {
        return Err(Error::Config(format!(
            "attack cardinality {bad} outside 1..={m}"
        )));
    }
    let mut shards = Vec::new();
    if config.train_per_kind > 0 {
        for (name, mix) in [("train_alter", KindMix::Alter), ("train_cut", KindMix::Cut)] {
            shards.push(ShardSpec {
                name: name.into(),
                kind: ShardKind::Train,
                mix,
                cardinality: None,
                records: config.train_per_kind,
            });
        }
    }
    if config.test_per_cardinality > 0 {
        for k in cards {
            shards.push(ShardSpec {
                name: format!("test_f{k}"),
                kind: ShardKind::Test,
                mix: config.test_mix,
                cardinality: Some(k),
                records: config.test_per_cardinality,
            });
        }
    }
    Ok(shards)
}

fn shard_stream(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Builds record `index` of `shard`; same inputs give the same record.
pub fn generate_record(
    model: &GridModel,
    area: &AttackedArea,
    config: &DatasetConfig,
    shard: &ShardSpec,
    root_seed: u64,
    index: usize,
) -> Result<ScenarioRecord> {
    let seed = derive_seed(root_seed, shard_stream(&shard.name), index as u64);
    let mut rng = rng_from_seed(seed);
    let mut last = None;
    for _ in 0..=config.max_resamples {
        let point = sample_operating_point(&model.grid, config.sim.load_sigma, &mut rng)?;
        let k = match shard.cardinality {
            Some(k) => k,
            None => rng.random_range(1..=area.lines.len()),
        };
        let attack = sample_attack(area, k, shard.mix, &config.sim.attack, &mut rng)?;
        match simulate(model, area, &attack, &point, config.sim.alpha_range, &mut rng) {
            Ok((scenario, meas)) => {
                return Ok(to_record(area, shard, seed, index, scenario, meas));
            }
            Err(e @ Error::Rebalance(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Dataset(format!(
        "record {index} of {}: no admissible scenario after {} draws ({})",
        shard.name,
        config.max_resamples + 1,
        last.map_or_else(String::new, |e| e.to_string())
    )))
}

fn to_record(
    area: &AttackedArea,
    shard: &ShardSpec,
    seed: u64,
    index: usize,
    sc: AttackScenario,
    meas: MeasurementSet,
) -> ScenarioRecord {
    let zeroed = |v: &[Option<f64>]| v.iter().map(|x| x.unwrap_or(0.0)).collect();
    ScenarioRecord {
        id: format!("{}-{index:05}", shard.name),
        shard: shard.name.clone(),
        area_id: area.id.clone(),
        seed,
        cardinality: sc.attack.cardinality(),
        lines: area.lines.clone(),
        labels: sc.attack.labels(area),
        x_h: sc.attack.x_h(area),
        features: BusFeatures {
            theta: zeroed(&meas.theta_post),
            p: zeroed(&meas.p_post),
            load: sc.loads.clone(),
        },
        truth: ScenarioTruth {
            islanding: sc.islanding(),
            theta_post: sc.theta_post,
            p_post: sc.p_post,
            delta: sc.delta,
            alpha: sc.alpha,
        },
        attacks: sc.attack.lines,
        measurements: meas,
    }
}

/// All records of one shard, in index order.
pub fn generate_shard(
    model: &GridModel,
    area: &AttackedArea,
    config: &DatasetConfig,
    shard: &ShardSpec,
    root_seed: u64,
) -> Result<Vec<ScenarioRecord>> {
    (0..shard.records)
        .into_par_iter()
        .map(|i| generate_record(model, area, config, shard, root_seed, i))
        .collect()
}

/// Writes every shard and the manifest into `dir`.
pub fn generate_dataset(
    model: &GridModel,
    area: &AttackedArea,
    config: &DatasetConfig,
    root_seed: u64,
    dir: &Path,
) -> Result<Manifest> {
    config.sim.validate()?;
    area.validate_against(&model.grid)?;
    if !area.certified() {
        return Err(Error::Assumption(format!(
            "area {} is not certified",
            area.id
        )));
    }
    let specs = plan_shards(area, config)?;
    if specs.is_empty() {
        return Err(Error::Config("dataset would contain no records".into()));
    }
    fs::create_dir_all(dir)?;
    let grid = CanonicalGrid::from_topology(&model.grid);
    fs::write(dir.join(GRID_FILE), serde_json::to_string_pretty(&grid)? + "\n")?;
    let mut shards = Vec::with_capacity(specs.len());
    for spec in specs {
        let records = generate_shard(model, area, config, &spec, root_seed)?;
        let mut bytes = Vec::new();
        for r in &records {
            serde_json::to_writer(&mut bytes, r)?;
            bytes.push(b'\n');
        }
        let file = format!("{}.ndjson", spec.name);
        fs::write(dir.join(&file), &bytes)?;
        shards.push(ShardEntry {
            sha256: hex::encode(Sha256::digest(&bytes)),
            file,
            spec,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        grid: model.grid.name().to_string(),
        root_seed,
        area: area.clone(),
        config: config.clone(),
        shards,
    };
    let mut f = fs::File::create(dir.join(MANIFEST_FILE))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

/// An opened dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::Dataset(format!("cannot read {}: {e}", path.display()))
        })?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Dataset(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        Ok(Dataset { dir, manifest })
    }

    /// The grid the dataset was generated on.
    pub fn model(&self) -> Result<GridModel> {
        let text = fs::read_to_string(self.dir.join(GRID_FILE))?;
        let grid = parse_case_file(&text)?;
        self.manifest.area.validate_against(&grid)?;
        Ok(GridModel::new(grid))
    }

    pub fn shard(&self, name: &str) -> Result<&ShardEntry> {
        self.manifest
            .shards
            .iter()
            .find(|s| s.spec.name == name)
            .ok_or_else(|| Error::Dataset(format!("no shard named `{name}`")))
    }

    /// Reads a shard and checks it against its manifest checksum.
    pub fn read_shard(&self, name: &str) -> Result<Vec<ScenarioRecord>> {
        let entry = self.shard(name)?;
        let path = self.dir.join(&entry.file);
        let bytes = fs::read(&path)?;
        let digest = hex::encode(Sha256::digest(&bytes));
        if digest != entry.sha256 {
            return Err(Error::Dataset(format!(
                "{} does not match its manifest checksum",
                path.display()
            )));
        }
        let mut out = Vec::with_capacity(entry.spec.records);
        for (n, line) in BufReader::new(bytes.as_slice()).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScenarioRecord = serde_json::from_str(&line).map_err(|e| {
                Error::Dataset(format!("{} line {}: {e}", path.display(), n + 1))
            })?;
            if rec.area_id != self.manifest.area.id {
                return Err(Error::Dataset(format!(
                    "record {} belongs to area {}",
                    rec.id, rec.area_id
                )));
            }
            out.push(rec);
        }
        Ok(out)
    }

    pub fn test_shards(&self) -> impl Iterator<Item = &ShardEntry> {
        self.manifest
            .shards
            .iter()
            .filter(|s| s.spec.kind == ShardKind::Test)
    }
}
