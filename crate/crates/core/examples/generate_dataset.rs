//! Writes a small labelled dataset to a temporary directory.

use pcpa::area::dbgs;
use pcpa::cases::ieee30;
use pcpa::evaluation::{generate_dataset, DatasetConfig};
use pcpa::GridModel;

fn main() -> pcpa::Result<()> {
    let model = GridModel::new(ieee30());
    let area = dbgs(&model, 8, 0)?;
    let cfg = DatasetConfig {
        train_per_kind: 20,
        test_per_cardinality: 10,
        ..DatasetConfig::default()
    };
    let dir = std::env::temp_dir().join("pcpa-example-dataset");
    let manifest = generate_dataset(&model, &area, &cfg, 1, &dir)?;
    for s in &manifest.shards {
        println!("{:<12} {:>4} records  {}", s.spec.name, s.spec.records, &s.sha256[..12]);
    }
    println!("written to {}", dir.display());
    Ok(())
}
