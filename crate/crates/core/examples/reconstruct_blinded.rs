//! Recovers the blinded post-attack angles of the area from outside data.

use pcpa::area::dbgs;
use pcpa::cases::ieee30;
use pcpa::reconstruction::reconstruct;
use pcpa::rng::rng_from_seed;
use pcpa::simulator::{sample_attack, sample_operating_point, simulate, AttackConfig, KindMix};
use pcpa::GridModel;

fn main() -> pcpa::Result<()> {
    let model = GridModel::new(ieee30());
    let area = dbgs(&model, 8, 0)?;
    let mut rng = rng_from_seed(4);
    let point = sample_operating_point(&model.grid, 0.2, &mut rng)?;
    let attack = sample_attack(&area, 2, KindMix::Alter, &AttackConfig::default(), &mut rng)?;
    let (sc, meas) = simulate(&model, &area, &attack, &point, (0.5, 0.95), &mut rng)?;
    let blinded = meas.theta_post.iter().filter(|t| t.is_none()).count();
    let rec = reconstruct(&model, &area, &meas)?;
    let err = rec
        .theta_post
        .iter()
        .zip(&sc.theta_post)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{blinded} blinded angles, max error {err:.2e}, islanding {}", rec.islanding);
    Ok(())
}
