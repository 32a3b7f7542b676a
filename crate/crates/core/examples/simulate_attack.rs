//! One mixed attack of three lines, with the resulting islands and shedding.

use pcpa::area::dbgs;
use pcpa::cases::ieee30;
use pcpa::rng::rng_from_seed;
use pcpa::simulator::{sample_attack, sample_operating_point, simulate, AttackConfig, KindMix};
use pcpa::GridModel;

fn main() -> pcpa::Result<()> {
    let model = GridModel::new(ieee30());
    let area = dbgs(&model, 8, 0)?;
    let mut rng = rng_from_seed(11);
    let point = sample_operating_point(&model.grid, 0.2, &mut rng)?;
    let attack = sample_attack(&area, 3, KindMix::Mixed, &AttackConfig::default(), &mut rng)?;
    let (sc, _) = simulate(&model, &area, &attack, &point, (0.5, 0.95), &mut rng)?;
    for a in &sc.attack.lines {
        println!("line {} {:?} x = {:.3}", a.line, a.kind, a.x);
    }
    println!("islands: {}", sc.islands.len());
    if let Some(alpha) = sc.alpha {
        println!("load kept inside the area: {alpha:.3}");
    }
    let shed: f64 = sc.delta.iter().map(|d| d.abs()).sum();
    println!("total |p - p'| = {shed:.4}");
    Ok(())
}
