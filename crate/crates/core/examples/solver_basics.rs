//! Codes one query against a small dictionary with and without
//! regularization, and checks the result against the brute-force
//! nonnegative optimum.

use nalgebra::{DMatrix, DVector};

use llctrack::solver::{
    lambda_lower_bound, nonnegativity_certificate, solve, solve_nonneg_oracle, CodingProblem,
    DEFAULT_EPSILON,
};

fn main() -> llctrack::Result<()> {
    // Three nonnegative, unit-norm atoms near the query, as image patches are.
    let atoms = [
        [0.52, 0.48, 0.50, 0.50],
        [0.60, 0.40, 0.45, 0.53],
        [0.47, 0.55, 0.52, 0.45],
    ];
    let cols: Vec<DVector<f64>> = atoms
        .iter()
        .map(|a| DVector::from_row_slice(a).normalize())
        .collect();
    let basis = DMatrix::from_columns(&cols);
    let query = DVector::from_row_slice(&[0.55, 0.45, 0.49, 0.51]).normalize();

    let plain = CodingProblem::new(query.clone(), basis.clone(), 0.0)?;
    let c0 = solve(&plain)?;
    println!("lambda = 0:     c = {:.4?}", c0.coefficients.as_slice());

    let bound = lambda_lower_bound(&plain.shifted_gram(), DEFAULT_EPSILON);
    let regularized = plain.with_lambda(bound)?;
    let c = solve(&regularized)?;
    println!("lambda = {bound:.2e}: c = {:.4?}", c.coefficients.as_slice());
    println!(
        "certificate for F^-1 1 > 0: {}",
        nonnegativity_certificate(&c.gram_shifted)?
    );

    let oracle = solve_nonneg_oracle(&regularized)?;
    println!(
        "nonnegative optimum: c = {:.4?}, objective {:.3e} vs closed form {:.3e}",
        oracle.coefficients.as_slice(),
        regularized.objective(&oracle.coefficients),
        regularized.objective(&c.coefficients),
    );
    Ok(())
}
