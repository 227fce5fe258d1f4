//! A strictly diagonally dominant matrix whose inverse is not, followed by
//! the Ostrowski intervals for the inverse diagonal as lambda grows.

use nalgebra::DMatrix;

use llctrack::solver::{dominance_report, is_strictly_diagonally_dominant};

fn main() -> llctrack::Result<()> {
    let f = DMatrix::from_row_slice(3, 3, &[5.0, 2.0, -2.0, 2.0, 5.0, 2.0, -2.0, 2.0, 5.0]);
    let inv = f.clone().try_inverse().expect("det = 49");
    println!("F SDD: {}", is_strictly_diagonally_dominant(&f));
    println!("F^-1 = {inv:.4}");
    println!("F^-1 SDD: {}", is_strictly_diagonally_dominant(&inv));
    println!("F^-1 1 = {:.4?}", inv.column_sum().as_slice());

    for lambda in [0.0, 1.0, 10.0, 100.0] {
        let mut g = f.clone();
        for i in 0..3 {
            g[(i, i)] += lambda;
        }
        let rep = dominance_report(&g)?;
        let inv = g.try_inverse().expect("positive definite");
        println!(
            "lambda {lambda:>5}: mu = {:.3?}, (F^-1)_11 = {:.4} in [{:.4}, {:.4}], inverse SDD {}",
            rep.mu,
            inv[(0, 0)],
            rep.diag_bounds[0].0,
            rep.diag_bounds[0].1,
            is_strictly_diagonally_dominant(&inv),
        );
    }
    Ok(())
}
