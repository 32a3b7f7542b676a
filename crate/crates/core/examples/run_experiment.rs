//! Generates a dataset and tabulates diagnosis metrics for both priors.

use pcpa::area::dbgs;
use pcpa::cases::ieee30;
use pcpa::diagnosis::{DiagnosisOptions, PriorSource};
use pcpa::evaluation::{generate_dataset, run_experiment, Dataset, DatasetConfig};
use pcpa::GridModel;

fn main() -> pcpa::Result<()> {
    let model = GridModel::new(ieee30());
    let area = dbgs(&model, 8, 0)?;
    let cfg = DatasetConfig {
        train_per_kind: 0,
        test_per_cardinality: 50,
        ..DatasetConfig::default()
    };
    let dir = std::env::temp_dir().join("pcpa-example-experiment");
    generate_dataset(&model, &area, &cfg, 2, &dir)?;
    let ds = Dataset::open(&dir)?;
    for prior in [PriorSource::Uniform, PriorSource::Oracle] {
        let report = run_experiment(&model, &ds, &prior, &DiagnosisOptions::default())?;
        println!("{}", report.to_text());
    }
    Ok(())
}
