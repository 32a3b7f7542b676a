//! Diagnoses the same attack with an uninformative and a perfect prior.

use pcpa::area::dbgs;
use pcpa::cases::ieee30;
use pcpa::diagnosis::{diagnose, DiagnosisOptions, PriorVector};
use pcpa::evaluation::normalized_error;
use pcpa::rng::rng_from_seed;
use pcpa::simulator::{sample_attack, sample_operating_point, simulate, AttackConfig, KindMix};
use pcpa::GridModel;

fn main() -> pcpa::Result<()> {
    let model = GridModel::new(ieee30());
    let area = dbgs(&model, 8, 0)?;
    let mut rng = rng_from_seed(21);
    let point = sample_operating_point(&model.grid, 0.2, &mut rng)?;
    let attack = sample_attack(&area, 4, KindMix::Alter, &AttackConfig::default(), &mut rng)?;
    let (sc, meas) = simulate(&model, &area, &attack, &point, (0.5, 0.95), &mut rng)?;
    let truth = sc.attack.x_h(&area);
    let labels = sc.attack.labels(&area);
    for (name, prior) in [
        ("uniform", PriorVector::uniform(labels.len())),
        ("oracle", PriorVector::oracle(&labels)),
    ] {
        let d = diagnose(&model, &area, &meas, &prior, &DiagnosisOptions::default())?;
        println!(
            "{name:>8}: error {:.4}, predicted {:?}",
            normalized_error(&d.x_h, &truth)?,
            d.labels
        );
    }
    println!("   truth: {labels:?}");
    Ok(())
}
