//! Base-case DC power flow on the 118-bus grid.

use pcpa::cases::ieee118;
use pcpa::powerflow::{line_flows, max_abs_residual, solve_dc};
use pcpa::GridModel;

fn main() -> pcpa::Result<()> {
    let model = GridModel::new(ieee118());
    let p = model.grid.base_injections();
    let theta = solve_dc(model.admittance.matrix(), &p, &[0])?;
    let flows = line_flows(&theta, &model.grid)?;
    let (j, f) = flows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    println!("residual {:.2e}", max_abs_residual(model.admittance.matrix(), &theta, &p));
    println!("heaviest line {} carries {f:.3} p.u.", model.grid.lines()[j].id);
    Ok(())
}
