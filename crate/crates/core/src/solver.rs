//! Closed-form coders for the sum-to-one constrained least-squares problem
//!
//! ```text
//! min_c ||y - B c||^2 + lambda ||c||^2   s.t.  1^T c = 1
//! ```
//!
//! together with the tools used to reason about the sign of its solution:
//! the regularization lower bound that makes the shifted Gram matrix strictly
//! diagonally dominant, Ostrowski bounds on the diagonal of its inverse, and an
//! exact (exhaustive active-set) solver for the nonnegative variant.
//!
//! With `A = B - y 1^T` and `1^T c = 1` the residual `y - B c` equals `-A c`,
//! so the objective is `c^T (A^T A + lambda I) c`. Its constrained minimizer is
//! `F^{-1} 1 / (1^T F^{-1} 1)` with `F = A^T A + lambda I`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default `epsilon` for [`lambda_lower_bound`].
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Diagonal jitter added to `A^T A` before the unregularized solve.
pub const JITTER: f64 = 1e-12;

/// Largest condition number accepted by the unregularized solve.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest dictionary size handled by [`solve_nonneg_oracle`].
pub const ORACLE_MAX_K: usize = 12;

/// Query vector, dictionary and regularization weight of one coding problem.
///
/// The solver does not renormalize. Callers coding image patches are expected
/// to pass a unit-norm query and unit-norm basis columns.
#[derive(Debug, Clone)]
pub struct CodingProblem {
    query: DVector<f64>,
    basis: DMatrix<f64>,
    lambda: f64,
}

impl CodingProblem {
    pub fn new(query: DVector<f64>, basis: DMatrix<f64>, lambda: f64) -> Result<Self> {
        let (m, k) = basis.shape();
        if query.len() != m {
            return Err(Error::InvalidProblem(format!(
                "query has length {} but basis has {} rows",
                query.len(),
                m
            )));
        }
        if k == 0 || k > m {
            return Err(Error::InvalidProblem(format!(
                "need 1 <= K <= M, got K = {k}, M = {m}"
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        if query.iter().chain(basis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite entry".into()));
        }
        Ok(Self {
            query,
            basis,
            lambda,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn query(&self) -> &DVector<f64> {
        &self.query
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of dictionary atoms `K`.
    pub fn atoms(&self) -> usize {
        self.basis.ncols()
    }

    /// `A = B - y 1^T`.
    pub fn shifted_basis(&self) -> DMatrix<f64> {
        let mut a = self.basis.clone();
        for mut col in a.column_iter_mut() {
            col -= &self.query;
        }
        a
    }

    /// `A^T A`.
    pub fn shifted_gram(&self) -> DMatrix<f64> {
        let a = self.shifted_basis();
        let k = a.ncols();
        let mut g = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = dot(a.column(i).as_slice(), a.column(j).as_slice());
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// `||y - B c||^2`.
    pub fn residual(&self, coefficients: &DVector<f64>) -> f64 {
        (&self.query - &self.basis * coefficients).norm_squared()
    }

    /// `||y - B c||^2 + lambda ||c||^2`.
    pub fn objective(&self, coefficients: &DVector<f64>) -> f64 {
        self.residual(coefficients) + self.lambda * coefficients.norm_squared()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (xa, xb) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += xa[i] * xb[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Output of the coders.
///
/// `gram_shifted` is `A^T A + lambda I`. For the unregularized solve it holds
/// `A^T A + JITTER * I`, the matrix that was actually factored.
#[derive(Debug, Clone)]
pub struct CodingSolution {
    pub coefficients: DVector<f64>,
    pub residual: f64,
    pub gram_shifted: DMatrix<f64>,
}

impl CodingSolution {
    /// Indices whose coefficient is exactly zero (the active nonnegativity
    /// constraints of an oracle solution).
    pub fn active_set(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_nonnegative(&self, tolerance: f64) -> bool {
        self.coefficients.iter().all(|&c| c >= -tolerance)
    }
}

/// Row ratios and Ostrowski intervals for the diagonal of `F^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub is_sdd: bool,
    pub mu: Vec<f64>,
    /// `(lower, upper)` per row; `upper` is `+inf` when `mu >= 1`.
    pub diag_bounds: Vec<(f64, f64)>,
}

impl DominanceReport {
    /// True when every diagonal entry of `inverse` lies inside its interval.
    pub fn contains_diagonal_of(&self, inverse: &DMatrix<f64>) -> bool {
        self.diag_bounds
            .iter()
            .enumerate()
            .all(|(j, &(lo, hi))| inverse[(j, j)] >= lo && inverse[(j, j)] <= hi)
    }
}

/// Unregularized coder: `c = (A^T A)^{-1} 1`, rescaled to sum to one.
pub fn solve_sum_to_one(problem: &CodingProblem) -> Result<CodingSolution> {
    if problem.lambda != 0.0 {
        return Err(Error::InvalidProblem(format!(
            "solve_sum_to_one expects lambda = 0, got {}",
            problem.lambda
        )));
    }
    let mut f = problem.shifted_gram();
    add_to_diagonal(&mut f, JITTER);

    let eig = SymmetricEigen::new(f.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition.is_finite() && condition < MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    finish(problem, f)
}

/// Regularized coder: `c = (A^T A + lambda I)^{-1} 1`, rescaled to sum to one.
pub fn solve_regularized(problem: &CodingProblem) -> Result<CodingSolution> {
    if problem.lambda <= 0.0 {
        return Err(Error::NonPositiveLambda(problem.lambda));
    }
    let mut f = problem.shifted_gram();
    add_to_diagonal(&mut f, problem.lambda);
    finish(problem, f)
}

/// Dispatches on `lambda`: zero goes to [`solve_sum_to_one`], positive values
/// to [`solve_regularized`].
pub fn solve(problem: &CodingProblem) -> Result<CodingSolution> {
    if problem.lambda == 0.0 {
        solve_sum_to_one(problem)
    } else {
        solve_regularized(problem)
    }
}

fn finish(problem: &CodingProblem, f: DMatrix<f64>) -> Result<CodingSolution> {
    let k = f.nrows();
    let chol = f
        .clone()
        .cholesky()
        .ok_or(Error::SingularSystem { condition: f64::INFINITY })?;
    let z = chol.solve(&DVector::from_element(k, 1.0));
    let total = z.sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::SingularSystem { condition: f64::INFINITY });
    }
    let coefficients = z / total;
    let residual = problem.residual(&coefficients);
    Ok(CodingSolution {
        coefficients,
        residual,
        gram_shifted: f,
    })
}

fn add_to_diagonal(m: &mut DMatrix<f64>, value: f64) {
    for j in 0..m.nrows() {
        m[(j, j)] += value;
    }
}

/// Exact solver for the nonnegative variant
///
/// ```text
/// min_c ||y - B c||^2 + lambda ||c||^2   s.t.  c >= 0, 1^T c = 1
/// ```
///
/// by enumerating all `2^K - 1` supports. Each support is solved as an
/// equality-constrained problem through its bordered KKT system and kept when
/// primal feasible; the feasible candidate with the smallest objective wins.
/// Coefficients off the winning support are exactly zero.
pub fn solve_nonneg_oracle(problem: &CodingProblem) -> Result<CodingSolution> {
    let k = problem.atoms();
    if k > ORACLE_MAX_K {
        return Err(Error::OracleTooLarge {
            k,
            max: ORACLE_MAX_K,
        });
    }
    let mut gram = problem.shifted_gram();
    add_to_diagonal(&mut gram, problem.lambda);

    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1u32 << k) {
        let support: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let Some(local) = solve_on_support(&gram, &support) else {
            continue;
        };
        if local.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut c = DVector::zeros(k);
        for (&j, &v) in support.iter().zip(local.iter()) {
            c[j] = v.max(0.0);
        }
        let total = c.sum();
        if total <= 0.0 {
            continue;
        }
        c /= total;
        let value = problem.objective(&c);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, c));
        }
    }

    // Every vertex e_j is feasible, so at least one singleton support survives.
    let (_, coefficients) = best.expect("simplex vertices are always feasible");
    let residual = problem.residual(&coefficients);
    Ok(CodingSolution {
        coefficients,
        residual,
        gram_shifted: gram,
    })
}

fn solve_on_support(gram: &DMatrix<f64>, support: &[usize]) -> Option<DVector<f64>> {
    let s = support.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = gram[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;

    let scale = kkt.amax().max(1.0);
    let svd = kkt.clone().svd(true, true);
    let x = svd.solve(&rhs, scale * 1e-13).ok()?;
    // Inconsistent KKT systems have no stationary point on this face.
    if (&kkt * &x - &rhs).amax() > 1e-9 * scale {
        return None;
    }
    Some(x.rows(0, s).into_owned())
}

/// Smallest regularization weight making `A^T A + lambda I` strictly
/// diagonally dominant: the largest off-diagonal absolute row sum plus
/// `epsilon`.
pub fn lambda_lower_bound(a_gram: &DMatrix<f64>, epsilon: f64) -> f64 {
    let max_row = (0..a_gram.nrows())
        .map(|j| off_diagonal_row_sum(a_gram, j))
        .fold(0.0, f64::max);
    max_row + epsilon
}

fn off_diagonal_row_sum(m: &DMatrix<f64>, row: usize) -> f64 {
    m.row(row)
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != row)
        .map(|(_, v)| v.abs())
        .sum()
}

/// `|m_jj| > sum_{i != j} |m_ji|` for every row.
pub fn is_strictly_diagonally_dominant(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|j| m[(j, j)].abs() > off_diagonal_row_sum(m, j))
}

/// Row ratios `mu_j = sum_{i != j} |f_ji| / |f_jj|` and the Ostrowski interval
/// `[1 / (|f_jj| (1 + mu_j)), 1 / (|f_jj| (1 - mu_j))]` for `(F^{-1})_jj`.
pub fn dominance_report(f: &DMatrix<f64>) -> Result<DominanceReport> {
    let (rows, cols) = f.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let mut mu = Vec::with_capacity(rows);
    let mut diag_bounds = Vec::with_capacity(rows);
    for j in 0..rows {
        let d = f[(j, j)].abs();
        if d == 0.0 {
            return Err(Error::ZeroDiagonal(j));
        }
        let ratio = off_diagonal_row_sum(f, j) / d;
        let lower = 1.0 / (d * (1.0 + ratio));
        let upper = if ratio < 1.0 {
            1.0 / (d * (1.0 - ratio))
        } else {
            f64::INFINITY
        };
        mu.push(ratio);
        diag_bounds.push((lower, upper));
    }
    Ok(DominanceReport {
        is_sdd: mu.iter().all(|&m| m < 1.0),
        mu,
        diag_bounds,
    })
}

/// Sufficient test for `F^{-1} 1 > 0`: `F` symmetric positive definite with a
/// strictly diagonally dominant inverse. A `false` answer is not a proof that
/// the solution has a negative entry.
pub fn nonnegativity_certificate(f: &DMatrix<f64>) -> Result<bool> {
    let (rows, cols) = f.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let tol = 1e-12 * f.amax().max(1.0);
    if (f - f.transpose()).amax() > tol {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = f.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(is_strictly_diagonally_dominant(&chol.inverse()))
}
