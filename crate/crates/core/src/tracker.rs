//! Particle-filter tracking loop.
//!
//! Each frame draws particles around the previous optimum, extracts and
//! encodes one patch per particle, scores it with
//! `exp(-alpha (eps_pos - eps_neg))` and keeps the highest score. The number
//! of negative templates the winner leans on decides whether the frame is
//! treated as severely occluded, which in turn gates the positive template
//! update.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode, reconstruction_errors, EncoderConfig};
use crate::error::{Error, Result};
use crate::evaluation::BoundingBox;
use crate::imaging::{extract_patch, GrayImage, PatchVector};
use crate::templates::{StoreConfig, StoreUpdate, TemplateStore, UniformCoefficients};

const MAX_REDRAWS: usize = 100;
const MIN_SCALE: f64 = 1e-3;

/// `[lx, ly, theta, s, alpha, phi]`: center translation in pixels, rotation in
/// radians, scale, aspect ratio and skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineState {
    pub lx: f64,
    pub ly: f64,
    pub theta: f64,
    pub s: f64,
    pub alpha: f64,
    pub phi: f64,
}

impl AffineState {
    /// Unrotated, unit-scale state centered at `(lx, ly)`.
    pub fn at(lx: f64, ly: f64) -> Self {
        Self {
            lx,
            ly,
            theta: 0.0,
            s: 1.0,
            alpha: 1.0,
            phi: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.lx, self.ly, self.theta, self.s, self.alpha, self.phi]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            lx: v[0],
            ly: v[1],
            theta: v[2],
            s: v[3],
            alpha: v[4],
            phi: v[5],
        }
    }

    /// Row-major 2x2 matrix `R(theta) [1 phi; 0 1] diag(s, s alpha)`.
    pub fn linear_part(&self) -> [f64; 4] {
        let (sin, cos) = self.theta.sin_cos();
        let (a, b) = (self.s, self.s * self.alpha * self.phi);
        let d = self.s * self.alpha;
        [cos * a, cos * b - sin * d, sin * a, sin * b + cos * d]
    }

    /// Area of the warped template box.
    pub fn warped_area(&self, template_size: (f64, f64)) -> f64 {
        (self.s * self.s * self.alpha * template_size.0 * template_size.1).abs()
    }

    pub fn is_valid(&self, template_size: (f64, f64)) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
            && self.s > 0.0
            && self.alpha > 0.0
            && self.warped_area(template_size) >= 4.0
    }

    /// Corners of the warped template box.
    pub fn corners(&self, template_size: (f64, f64)) -> [(f64, f64); 4] {
        let [m00, m01, m10, m11] = self.linear_part();
        let (hw, hh) = (template_size.0 / 2.0, template_size.1 / 2.0);
        [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .map(|(u, v)| (self.lx + m00 * u + m01 * v, self.ly + m10 * u + m11 * v))
    }

    /// Axis-aligned envelope of the warped template box.
    pub fn envelope(&self, template_size: (f64, f64)) -> BoundingBox {
        let c = self.corners(template_size);
        let xs = c.map(|p| p.0);
        let ys = c.map(|p| p.1);
        let min = |v: [f64; 4]| v.into_iter().fold(f64::INFINITY, f64::min);
        let max = |v: [f64; 4]| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
        BoundingBox::new(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))
    }
}

/// Per-parameter standard deviations of the Gaussian random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub sigmas: [f64; 6],
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            sigmas: [4.0, 4.0, 0.01, 0.01, 0.002, 0.001],
        }
    }
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.iter().all(|s| *s >= 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("motion sigmas must be finite and >= 0".into()))
        }
    }
}

/// Draws `n` states around `prev`. Draws that break the state invariants are
/// redrawn up to 100 times, then clamped.
pub fn propagate<R: Rng>(
    prev: &AffineState,
    model: &MotionModel,
    n: usize,
    template_size: (f64, f64),
    rng: &mut R,
) -> Vec<AffineState> {
    let base = prev.to_array();
    (0..n)
        .map(|_| {
            let mut candidate = *prev;
            for _ in 0..MAX_REDRAWS {
                let mut v = base;
                for (x, sigma) in v.iter_mut().zip(model.sigmas) {
                    if sigma > 0.0 {
                        *x += sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                candidate = AffineState::from_array(v);
                if candidate.is_valid(template_size) {
                    return candidate;
                }
            }
            clamp_state(candidate, template_size)
        })
        .collect()
}

/// [`propagate`] with a generator seeded from `seed`.
pub fn propagate_seeded(
    prev: &AffineState,
    model: &MotionModel,
    n: usize,
    template_size: (f64, f64),
    seed: u64,
) -> Vec<AffineState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    propagate(prev, model, n, template_size, &mut rng)
}

fn clamp_state(mut st: AffineState, template_size: (f64, f64)) -> AffineState {
    st.s = st.s.max(MIN_SCALE);
    st.alpha = st.alpha.max(MIN_SCALE);
    let area = st.warped_area(template_size);
    if area < 4.0 {
        st.s *= (4.0 / area).sqrt();
    }
    st
}

/// `exp(-alpha (pos_error - neg_error))`: high when the positives explain the
/// candidate better than the negatives do.
pub fn confidence(pos_error: f64, neg_error: f64, alpha: f64) -> f64 {
    (-alpha * (pos_error - neg_error)).exp()
}

/// Number of negative coefficients strictly above `use_threshold`.
pub fn count_negatives_used(combined: &UniformCoefficients, use_threshold: f64) -> usize {
    combined
        .neg_part()
        .iter()
        .filter(|&&d| d > use_threshold)
        .count()
}

/// Severe occlusion: at least two negative templates in use.
pub const OCCLUSION_MIN_NEGATIVES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub encoder: EncoderConfig,
    pub store: StoreConfig,
    pub motion: MotionModel,
    pub n_particles: usize,
    /// Confidence normalization factor.
    pub alpha: f64,
    pub use_threshold: f64,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            store: StoreConfig::default(),
            motion: MotionModel::default(),
            n_particles: 600,
            alpha: 2.5,
            use_threshold: 1e-3,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.store.validate()?;
        self.motion.validate()?;
        if self.n_particles == 0 {
            return Err(Error::Config("n_particles must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if self.use_threshold.is_nan() || self.use_threshold <= 0.0 {
            return Err(Error::Config("use_threshold must be positive".into()));
        }
        let max_k = *self.encoder.neighbor_counts.last().unwrap_or(&0);
        if max_k > self.store.positives + self.store.negatives {
            return Err(Error::Config(format!(
                "largest neighbor count {max_k} exceeds the initial store size"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    /// 1-based frame number.
    pub frame_index: usize,
    pub state: AffineState,
    /// Axis-aligned envelope of the tracked state.
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub pos_error: f64,
    pub neg_error: f64,
    pub neg_used: usize,
    pub occluded: bool,
    #[serde(skip)]
    pub store_update: Option<StoreUpdate>,
}

/// Score of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub pos_error: f64,
    pub neg_error: f64,
    pub confidence: f64,
}

/// Extracts, encodes and scores one particle.
pub fn observe(
    frame: &GrayImage,
    state: &AffineState,
    store: &TemplateStore,
    config: &TrackerConfig,
) -> Result<(Observation, PatchVector, UniformCoefficients)> {
    let patch = extract_patch(frame, state, store.template_size())?;
    let encoding = encode(&patch, store, &config.encoder)?;
    let (pos_error, neg_error) = reconstruction_errors(&patch, store, &encoding.combined);
    let obs = Observation {
        pos_error,
        neg_error,
        confidence: confidence(pos_error, neg_error, config.alpha),
    };
    Ok((obs, patch, encoding.combined))
}

/// Index of the highest confidence; ties go to the lower index. `None` when
/// every entry is missing.
pub fn select_best(observations: &[Option<Observation>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, obs) in observations.iter().enumerate() {
        if let Some(o) = obs {
            if best.is_none_or(|(_, c)| o.confidence > c) {
                best = Some((i, o.confidence));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Tracker state across frames. The template store is the only mutable part
/// and changes only between frames.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    store: TemplateStore,
    state: AffineState,
    frame_index: usize,
}

impl Tracker {
    /// Initializes the stores from the first frame and scores the initial box.
    pub fn new(
        first_frame: &GrayImage,
        init_box: &BoundingBox,
        config: TrackerConfig,
    ) -> Result<(Self, FrameResult)> {
        config.validate()?;
        let store = TemplateStore::init(first_frame, init_box, &config.store, config.seed)?;
        let (cx, cy) = init_box.center();
        let state = AffineState::at(cx, cy);
        let tracker = Self {
            config,
            store,
            state,
            frame_index: 1,
        };
        let (obs, _, combined) = observe(first_frame, &state, &tracker.store, &tracker.config)?;
        let result = tracker.result(state, obs, &combined, None);
        Ok((tracker, result))
    }

    pub fn store(&self) -> &TemplateStore {
        &self.store
    }

    pub fn state(&self) -> &AffineState {
        &self.state
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// 1-based index of the last processed frame.
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    /// Particles for the next frame, from a generator keyed on
    /// `(seed, frame_index)`.
    pub fn particles_for(&self, frame_index: usize) -> Vec<AffineState> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(frame_index as u64);
        propagate(
            &self.state,
            &self.config.motion,
            self.config.n_particles,
            self.store.template_size(),
            &mut rng,
        )
    }

    /// Tracks the next frame.
    pub fn track(&mut self, frame: &GrayImage) -> Result<FrameResult> {
        let frame_index = self.frame_index + 1;
        let particles = self.particles_for(frame_index);
        let result = self.track_particles(frame, frame_index, &particles)?;
        Ok(result)
    }

    /// Scores the given particles, keeps the best one and updates the stores.
    pub fn track_particles(
        &mut self,
        frame: &GrayImage,
        frame_index: usize,
        particles: &[AffineState],
    ) -> Result<FrameResult> {
        let observations: Vec<Option<Observation>> = particles
            .par_iter()
            .map(|st| observe(frame, st, &self.store, &self.config).ok().map(|o| o.0))
            .collect();
        let best = select_best(&observations).ok_or(Error::AllParticlesDegenerate)?;
        let state = particles[best];
        let (obs, patch, combined) = observe(frame, &state, &self.store, &self.config)?;
        let neg_used = count_negatives_used(&combined, self.config.use_threshold);
        let occluded = neg_used >= OCCLUSION_MIN_NEGATIVES;
        let update = self
            .store
            .update(&patch, obs.pos_error, occluded, frame_index, frame, &state)?;

        self.state = state;
        self.frame_index = frame_index;
        Ok(self.result(state, obs, &combined, Some(update)))
    }

    fn result(
        &self,
        state: AffineState,
        obs: Observation,
        combined: &UniformCoefficients,
        store_update: Option<StoreUpdate>,
    ) -> FrameResult {
        let neg_used = count_negatives_used(combined, self.config.use_threshold);
        FrameResult {
            frame_index: self.frame_index.max(1),
            state,
            bbox: state.envelope(self.store.template_size()),
            confidence: obs.confidence,
            pos_error: obs.pos_error,
            neg_error: obs.neg_error,
            neg_used,
            occluded: neg_used >= OCCLUSION_MIN_NEGATIVES,
            store_update,
        }
    }
}

/// Source of frames addressed by 0-based index.
pub trait FrameSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn frame(&self, index: usize) -> Result<GrayImage>;
}

impl FrameSource for crate::synth::SynthSpec {
    fn len(&self) -> usize {
        self.frames
    }

    fn frame(&self, index: usize) -> Result<GrayImage> {
        Ok(crate::synth::SynthSpec::frame(self, index))
    }
}

/// Per-frame results of a whole run and the time spent tracking (decode
/// excluded).
#[derive(Debug, Clone)]
pub struct TrackRun {
    pub results: Vec<FrameResult>,
    pub tracking_time: Duration,
}

impl TrackRun {
    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.results.iter().map(|r| r.bbox).collect()
    }

    /// Frames per second over the tracking loop.
    pub fn fps(&self) -> f64 {
        let secs = self.tracking_time.as_secs_f64();
        if secs > 0.0 {
            self.results.len() as f64 / secs
        } else {
            0.0
        }
    }
}

/// Tracks every frame of `source` starting from `init_box` on frame 0.
pub fn run_sequence<S: FrameSource + ?Sized>(
    source: &S,
    init_box: &BoundingBox,
    config: &TrackerConfig,
) -> Result<TrackRun> {
    if source.is_empty() {
        return Err(Error::Config("sequence has no frames".into()));
    }
    let first = source.frame(0)?;
    let start = Instant::now();
    let (mut tracker, first_result) = Tracker::new(&first, init_box, config.clone())?;
    let mut tracking_time = start.elapsed();
    let mut results = Vec::with_capacity(source.len());
    results.push(first_result);
    for i in 1..source.len() {
        let frame = source.frame(i)?;
        let start = Instant::now();
        results.push(tracker.track(&frame)?);
        tracking_time += start.elapsed();
    }
    Ok(TrackRun {
        results,
        tracking_time,
    })
}
