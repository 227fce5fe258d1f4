//! Multi-dictionary encoding of one candidate.
//!
//! The candidate is coded against `m` local dictionaries built from its
//! `k_1 < k_2 < ... < k_m` nearest templates. The per-dictionary
//! reconstructions `D = [B^1 c^1, ..., B^m c^m]` are then blended by weights
//! `w` from the same regularized sum-to-one coder, with `beta` in place of
//! `lambda`.
//!
//! The dictionaries and their codes do not depend on `w`, so `D` is fixed and
//! the alternation reaches its fixed point after the first weight solve. The
//! configured number of iterations is still run and the weight history kept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::PatchVector;
use crate::solver::{solve, CodingProblem};
use crate::templates::{
    knn_select, scatter_solution, LocalDictionary, TemplateStore, UniformCoefficients,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub neighbor_counts: Vec<usize>,
    pub lambda: f64,
    pub beta: f64,
    pub iterations: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            neighbor_counts: vec![5, 8, 10],
            lambda: 1.0,
            beta: 0.1,
            iterations: 3,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighbor_counts.is_empty() {
            return Err(Error::Config("neighbor_counts must not be empty".into()));
        }
        if self.neighbor_counts[0] == 0 {
            return Err(Error::Config("neighbor counts must be positive".into()));
        }
        if self.neighbor_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "neighbor_counts must be strictly increasing".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        for (name, v) in [("lambda", self.lambda), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EncodingResult {
    /// Local codes `c^j`, one per dictionary.
    pub coefficients: Vec<DVector<f64>>,
    /// Scattered codes `d^j`.
    pub per_dictionary: Vec<UniformCoefficients>,
    /// Blend weights, summing to one.
    pub weights: DVector<f64>,
    /// `sum_j w_j d^j`.
    pub combined: UniformCoefficients,
    /// Weights after each iteration.
    pub weight_history: Vec<DVector<f64>>,
    /// Reconstructions `B^j c^j` as the columns of `D`.
    pub reconstructions: DMatrix<f64>,
}

impl EncodingResult {
    /// `||y - D w||^2`.
    pub fn residual(&self, query: &PatchVector) -> f64 {
        (query.values() - &self.reconstructions * &self.weights).norm_squared()
    }
}

/// Encodes `query` against the store.
pub fn encode(
    query: &PatchVector,
    store: &TemplateStore,
    config: &EncoderConfig,
) -> Result<EncodingResult> {
    config.validate()?;
    let max_k = *config.neighbor_counts.last().expect("validated non-empty");
    // The k nearest for every k are prefixes of one ranking.
    let widest = knn_select(query, store, max_k)?;
    let dicts: Vec<LocalDictionary> = config
        .neighbor_counts
        .iter()
        .map(|&k| LocalDictionary {
            basis: widest.basis.columns(0, k).into_owned(),
            indicator: widest.indicator[..k].to_vec(),
        })
        .collect();
    encode_with_dictionaries(query, store, &dicts, config.lambda, config.beta, config.iterations)
}

/// Encodes against explicit dictionaries. Unlike [`encode`], the dictionaries
/// need not have increasing sizes.
pub fn encode_with_dictionaries(
    query: &PatchVector,
    store: &TemplateStore,
    dicts: &[LocalDictionary],
    lambda: f64,
    beta: f64,
    iterations: usize,
) -> Result<EncodingResult> {
    if dicts.is_empty() || iterations == 0 {
        return Err(Error::Config(
            "need at least one dictionary and one iteration".into(),
        ));
    }
    let y = query.values();
    let m = dicts.len();

    let mut coefficients = Vec::with_capacity(m);
    let mut per_dictionary = Vec::with_capacity(m);
    let mut reconstructions = DMatrix::zeros(y.len(), m);
    for (j, dict) in dicts.iter().enumerate() {
        let problem = CodingProblem::new(y.clone(), dict.basis.clone(), lambda)?;
        let solution = solve(&problem)?;
        per_dictionary.push(scatter_solution(&solution, dict, store)?);
        reconstructions
            .column_mut(j)
            .copy_from(&(&dict.basis * &solution.coefficients));
        coefficients.push(solution.coefficients);
    }

    let weight_problem = CodingProblem::new(y.clone(), reconstructions.clone(), beta)?;
    let mut weights = DVector::from_element(m, 1.0 / m as f64);
    let mut weight_history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        weights = solve(&weight_problem)?.coefficients;
        weight_history.push(weights.clone());
    }

    let combined = blend(&per_dictionary, &weights, store);
    Ok(EncodingResult {
        coefficients,
        per_dictionary,
        weights,
        combined,
        weight_history,
        reconstructions,
    })
}

fn blend(
    per_dictionary: &[UniformCoefficients],
    weights: &DVector<f64>,
    store: &TemplateStore,
) -> UniformCoefficients {
    let mut combined = UniformCoefficients::zeros(store.len(), store.n_positives());
    for (d, &w) in per_dictionary.iter().zip(weights.iter()) {
        combined.add_scaled(w, d);
    }
    combined
}

/// `(||y - T_pos d_pos||^2, ||y - T_neg d_neg||^2)`.
pub fn reconstruction_errors(
    query: &PatchVector,
    store: &TemplateStore,
    combined: &UniformCoefficients,
) -> (f64, f64) {
    let y = query.values();
    let mut pos = y.clone();
    for (t, &d) in store.positives().iter().zip(combined.pos_part()) {
        if d != 0.0 {
            pos.axpy(-d, t.patch.values(), 1.0);
        }
    }
    let mut neg = y.clone();
    for (t, &d) in store.negatives().iter().zip(combined.neg_part()) {
        if d != 0.0 {
            neg.axpy(-d, t.patch.values(), 1.0);
        }
    }
    (pos.norm_squared(), neg.norm_squared())
}
