//! Incidence and admittance matrices of the 30-bus grid.

use pcpa::cases::ieee30;
use pcpa::GridModel;

fn main() {
    let model = GridModel::new(ieee30());
    let a = model.admittance.matrix();
    let d = model.incidence.matrix();
    println!("{}: {} buses, {} lines", model.grid.name(), model.n_buses(), model.n_lines());
    println!("D is {}x{}, A is {}x{}", d.nrows(), d.ncols(), a.nrows(), a.ncols());
    let row_sum = a.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    println!("largest |row sum| of A: {row_sum:.2e}");
    println!("rank of A: {}", a.clone().svd(false, false).rank(1e-9));
}
