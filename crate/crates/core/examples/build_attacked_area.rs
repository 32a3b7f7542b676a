//! Searches for a certified attacked area and prints its certificate.

use pcpa::area::{count_cycles, dbgs};
use pcpa::cases::ieee118;
use pcpa::GridModel;

fn main() -> pcpa::Result<()> {
    let model = GridModel::new(ieee118());
    let area = dbgs(&model, 20, 7)?;
    println!("{} after {} attempt(s)", area.id, area.attempts);
    println!("buses: {:?}", area.buses.iter().map(|b| b.0).collect::<Vec<_>>());
    println!("internal lines {}, boundary lines {}", area.lines.len(), area.boundary_lines.len());
    println!("independent cycles {}", count_cycles(&model.grid, &area)?);
    println!(
        "|V_H| <= |V_Hbar| {}, matching cover {}, full column rank {}",
        area.assumption1_ok, area.matching_cover_ok, area.full_column_rank_ok
    );
    Ok(())
}
