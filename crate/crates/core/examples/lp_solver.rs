//! The bounded simplex solver on a small problem.

use nalgebra::DMatrix;
use pcpa::diagnosis::{solve_lp, LinearProgram};

fn main() -> pcpa::Result<()> {
    // minimise -x - 2y  s.t.  x + y + s = 1.5,  0 <= x, y <= 1,  0 <= s <= 10
    let lp = LinearProgram {
        c: vec![-1.0, -2.0, 0.0],
        a_eq: DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
        b_eq: vec![1.5],
        lower: vec![0.0; 3],
        upper: vec![1.0, 1.0, 10.0],
    };
    let sol = solve_lp(&lp)?;
    println!("{:?} after {} pivots", sol.status, sol.iterations);
    println!("x = {:?}, objective {}", sol.x, sol.objective);
    Ok(())
}
