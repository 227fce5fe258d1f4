//! Positive and negative template stores.
//!
//! Positives are sampled in a disc around the target center, negatives in the
//! surrounding annulus. Store positions are 1-based over the concatenation
//! `[positives, negatives]`, the ordering used by dictionary indicators and by
//! the uniform coefficient vector.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::BoundingBox;
use crate::imaging::{extract_patch, squared_distance, GrayImage, PatchVector, PATCH_LEN};
use crate::solver::CodingSolution;
use crate::tracker::AffineState;

const MAX_SAMPLE_ATTEMPTS: usize = 100;

/// Store sizes, sampling radii and update policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub positives: usize,
    pub negatives: usize,
    pub max_positives: usize,
    /// Frames between updates.
    pub update_interval: usize,
    /// Positive reconstruction error below which a tracked patch is added.
    pub pos_error_threshold: f64,
    /// Inner radius as a fraction of `min(w, h)` of the box.
    pub inner_radius_factor: f64,
    /// Outer radius as a fraction of `min(w, h)` of the box.
    pub outer_radius_factor: f64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            positives: 50,
            negatives: 150,
            max_positives: 100,
            update_interval: 5,
            pos_error_threshold: 0.1,
            inner_radius_factor: 0.1,
            outer_radius_factor: 1.0,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.positives == 0 || self.positives > self.max_positives {
            return fail("need 1 <= positives <= max_positives");
        }
        if self.negatives == 0 {
            return fail("negatives must be at least 1");
        }
        if self.update_interval == 0 {
            return fail("update_interval must be at least 1");
        }
        if self.pos_error_threshold.is_nan() || self.pos_error_threshold <= 0.0 {
            return fail("pos_error_threshold must be positive");
        }
        if !(self.inner_radius_factor >= 0.0 && self.outer_radius_factor > self.inner_radius_factor)
        {
            return fail("need 0 <= inner_radius_factor < outer_radius_factor");
        }
        Ok(())
    }

    /// `(r, s)` in pixels for a box with shorter side `min_side`.
    pub fn radii(&self, min_side: f64) -> (f64, f64) {
        (
            self.inner_radius_factor * min_side,
            self.outer_radius_factor * min_side,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub patch: PatchVector,
    /// Center the patch was sampled at.
    pub center: (f64, f64),
    pub frame_of_birth: usize,
}

/// Outcome of one [`TemplateStore::update`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveUpdate {
    Unchanged,
    Appended,
    /// 0-based index into the positive set.
    Replaced(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreUpdate {
    pub negatives_refreshed: bool,
    pub positives: PositiveUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateStore {
    positives: Vec<Template>,
    negatives: Vec<Template>,
    template_size: (f64, f64),
    config: StoreConfig,
    seed: u64,
}

impl TemplateStore {
    /// Samples the initial stores from the first frame.
    pub fn init(
        first_frame: &GrayImage,
        init_box: &BoundingBox,
        config: &StoreConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        validate_box(first_frame, init_box)?;
        let (cx, cy) = init_box.center();
        let (r, s) = config.radii(init_box.w.min(init_box.h));
        let size = (init_box.w, init_box.h);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = AffineState::at(cx, cy);

        let positives = (0..config.positives)
            .map(|_| sample_template(&mut rng, first_frame, &base, size, 0.0, r, 1))
            .collect::<Result<Vec<_>>>()?;
        let negatives = (0..config.negatives)
            .map(|_| sample_template(&mut rng, first_frame, &base, size, r, s, 1))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            positives,
            negatives,
            template_size: size,
            config: config.clone(),
            seed,
        })
    }

    /// Builds a store from explicit templates (tests, custom initializations).
    pub fn from_templates(
        positives: Vec<Template>,
        negatives: Vec<Template>,
        template_size: (f64, f64),
        config: StoreConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if positives.is_empty() || positives.len() > config.max_positives {
            return Err(Error::Config(format!(
                "positive set must hold 1..={} templates, got {}",
                config.max_positives,
                positives.len()
            )));
        }
        Ok(Self {
            positives,
            negatives,
            template_size,
            config,
            seed,
        })
    }

    pub fn positives(&self) -> &[Template] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Template] {
        &self.negatives
    }

    pub fn n_positives(&self) -> usize {
        self.positives.len()
    }

    pub fn n_negatives(&self) -> usize {
        self.negatives.len()
    }

    /// `p + n`.
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn template_size(&self) -> (f64, f64) {
        self.template_size
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    /// Template at a 1-based position of `[positives, negatives]`.
    pub fn template(&self, position: usize) -> Option<&Template> {
        let p = self.positives.len();
        match position {
            0 => None,
            i if i <= p => self.positives.get(i - 1),
            i => self.negatives.get(i - 1 - p),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Template> {
        self.positives.iter().chain(self.negatives.iter())
    }

    /// Per-frame store maintenance.
    ///
    /// Acts only when `frame_index` is a multiple of the update interval: the
    /// negative set is resampled in the annulus around `current_state`, and
    /// `tracked_patch` joins the positives when the frame is not occluded and
    /// `pos_error` is under the threshold. A full positive set replaces its
    /// template closest to the new patch.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        tracked_patch: &PatchVector,
        pos_error: f64,
        occluded: bool,
        frame_index: usize,
        current_frame: &GrayImage,
        current_state: &AffineState,
    ) -> Result<StoreUpdate> {
        if !frame_index.is_multiple_of(self.config.update_interval) {
            return Ok(StoreUpdate {
                negatives_refreshed: false,
                positives: PositiveUpdate::Unchanged,
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(frame_index as u64);
        let (w, h) = self.template_size;
        let (r, s) = self.config.radii(current_state.s.abs() * w.min(h));
        let negatives = (0..self.config.negatives)
            .map(|_| {
                sample_template(
                    &mut rng,
                    current_frame,
                    current_state,
                    self.template_size,
                    r,
                    s,
                    frame_index,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        self.negatives = negatives;

        let positives = if occluded || pos_error >= self.config.pos_error_threshold {
            PositiveUpdate::Unchanged
        } else {
            let template = Template {
                patch: tracked_patch.clone(),
                center: (current_state.lx, current_state.ly),
                frame_of_birth: frame_index,
            };
            if self.positives.len() < self.config.max_positives {
                self.positives.push(template);
                PositiveUpdate::Appended
            } else {
                let closest = nearest_index(&self.positives, tracked_patch);
                self.positives[closest] = template;
                PositiveUpdate::Replaced(closest)
            }
        };
        Ok(StoreUpdate {
            negatives_refreshed: true,
            positives,
        })
    }
}

fn nearest_index(templates: &[Template], patch: &PatchVector) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, t) in templates.iter().enumerate() {
        let d = t.patch.squared_distance(patch);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn validate_box(frame: &GrayImage, b: &BoundingBox) -> Result<()> {
    if !(b.w >= 2.0 && b.h >= 2.0) {
        return Err(Error::DegenerateBox { w: b.w, h: b.h });
    }
    let (fw, fh) = (frame.width() as f64, frame.height() as f64);
    let out = |detail: String| Err(Error::BoxOutOfFrame { what: "init", detail });
    if b.x < 0.0 {
        return out(format!("x = {} < 0", b.x));
    }
    if b.y < 0.0 {
        return out(format!("y = {} < 0", b.y));
    }
    if b.x + b.w > fw {
        return out(format!("x + w = {} > frame width {}", b.x + b.w, fw));
    }
    if b.y + b.h > fh {
        return out(format!("y + h = {} > frame height {}", b.y + b.h, fh));
    }
    Ok(())
}

/// Offset with `inner <= |d| < outer` (strictly above `inner` when
/// `inner > 0`), uniform by area.
fn sample_offset<R: Rng>(rng: &mut R, inner: f64, outer: f64) -> (f64, f64) {
    loop {
        let u: f64 = rng.random();
        let radius = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let (dx, dy) = (radius * angle.cos(), radius * angle.sin());
        let d = dx.hypot(dy);
        let inside = if outer == 0.0 { true } else { d < outer };
        let outside = if inner == 0.0 { true } else { d > inner };
        if inside && outside {
            return (dx, dy);
        }
    }
}

fn sample_template<R: Rng>(
    rng: &mut R,
    frame: &GrayImage,
    around: &AffineState,
    size: (f64, f64),
    inner: f64,
    outer: f64,
    frame_index: usize,
) -> Result<Template> {
    let mut last = Error::ZeroPatch;
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let (dx, dy) = sample_offset(rng, inner, outer);
        let state = AffineState {
            lx: around.lx + dx,
            ly: around.ly + dy,
            ..*around
        };
        match extract_patch(frame, &state, size) {
            Ok(patch) => {
                return Ok(Template {
                    patch,
                    center: (state.lx, state.ly),
                    frame_of_birth: frame_index,
                })
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// `M x k` matrix of selected templates and their 1-based store positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDictionary {
    pub basis: DMatrix<f64>,
    pub indicator: Vec<usize>,
}

impl LocalDictionary {
    pub fn k(&self) -> usize {
        self.indicator.len()
    }
}

/// The `k` templates nearest to `query` in Euclidean distance, ties broken by
/// lower store position.
pub fn knn_select(query: &PatchVector, store: &TemplateStore, k: usize) -> Result<LocalDictionary> {
    let size = store.len();
    if k == 0 || k > size {
        return Err(Error::KTooLarge { k, size });
    }
    let q = query.as_slice();
    let mut ranked: Vec<(f64, usize)> = store
        .iter()
        .enumerate()
        .map(|(i, t)| (squared_distance(q, t.patch.as_slice()), i + 1))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.truncate(k);

    let mut basis = DMatrix::zeros(PATCH_LEN, k);
    for (col, &(_, position)) in ranked.iter().enumerate() {
        let t = store.template(position).expect("position from enumeration");
        basis.column_mut(col).copy_from(t.patch.values());
    }
    Ok(LocalDictionary {
        basis,
        indicator: ranked.into_iter().map(|(_, p)| p).collect(),
    })
}

/// Coefficients over the whole store: `[d_pos, d_neg]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformCoefficients {
    values: Vec<f64>,
    n_positives: usize,
}

impl UniformCoefficients {
    pub fn new(values: Vec<f64>, n_positives: usize) -> Self {
        assert!(n_positives <= values.len());
        Self {
            values,
            n_positives,
        }
    }

    pub fn zeros(len: usize, n_positives: usize) -> Self {
        Self::new(vec![0.0; len], n_positives)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pos_part(&self) -> &[f64] {
        &self.values[..self.n_positives]
    }

    pub fn neg_part(&self) -> &[f64] {
        &self.values[self.n_positives..]
    }

    pub fn n_positives(&self) -> usize {
        self.n_positives
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `self += weight * other`.
    pub fn add_scaled(&mut self, weight: f64, other: &UniformCoefficients) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += weight * b;
        }
    }

    /// Values at the given 1-based positions.
    pub fn gather(&self, indicator: &[usize]) -> Vec<f64> {
        indicator.iter().map(|&u| self.values[u - 1]).collect()
    }
}

/// Writes `coefficients[j]` to position `indicator[j]`; every other entry is 0.
pub fn scatter(
    coefficients: &[f64],
    indicator: &[usize],
    store_size: usize,
    n_positives: usize,
) -> Result<UniformCoefficients> {
    if coefficients.len() != indicator.len() {
        return Err(Error::InvalidProblem(format!(
            "{} coefficients for {} indicator entries",
            coefficients.len(),
            indicator.len()
        )));
    }
    let mut values = vec![0.0; store_size];
    for (&c, &u) in coefficients.iter().zip(indicator) {
        if u == 0 || u > store_size {
            return Err(Error::IndicatorOutOfRange {
                position: u,
                size: store_size,
            });
        }
        values[u - 1] = c;
    }
    Ok(UniformCoefficients::new(values, n_positives.min(store_size)))
}

/// [`scatter`] for a solved dictionary against a store.
pub fn scatter_solution(
    solution: &CodingSolution,
    dict: &LocalDictionary,
    store: &TemplateStore,
) -> Result<UniformCoefficients> {
    scatter(
        solution.coefficients.as_slice(),
        &dict.indicator,
        store.len(),
        store.n_positives(),
    )
}
