use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::solver::CodingProblem;

fn unit_gaussian<R: Rng>(rng: &mut R, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize()
}

/// Gaussian query and basis, every vector normalized.
pub fn random_unit_problem<R: Rng>(rng: &mut R, m: usize, k: usize, lambda: f64) -> CodingProblem {
    let y = unit_gaussian(rng, m);
    let cols: Vec<_> = (0..k).map(|_| unit_gaussian(rng, m)).collect();
    CodingProblem::new(y, DMatrix::from_columns(&cols), lambda).unwrap()
}

/// Intensities in [0, 1]: a shared base pattern plus per-vector perturbation,
/// then l2-normalized, mimicking nearby patches of one target.
pub fn image_like_problem<R: Rng>(rng: &mut R, m: usize, k: usize) -> CodingProblem {
    let base: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let draw = |rng: &mut R| {
        let noise: f64 = rng.random_range(0.05..0.4);
        DVector::from_fn(m, |i, _| {
            let v = base[i] + noise * (rng.random::<f64>() - 0.5);
            v.clamp(0.0, 1.0)
        })
        .normalize()
    };
    let y = draw(rng);
    let cols: Vec<_> = (0..k).map(|_| draw(rng)).collect();
    CodingProblem::new(y, DMatrix::from_columns(&cols), 0.0).unwrap()
}
