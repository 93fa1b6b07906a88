//! Image scorers.
//!
//! Every scorer follows one contract: larger `Fitness::raw` is better, and a
//! failed evaluation is reported as `valid = false` instead of an error.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::{decode_png, encode_png_bytes, ImageBuffer, RenderError};

pub const DESCRIPTOR_GRID: usize = 16;
pub const DESCRIPTOR_DIM: usize = DESCRIPTOR_GRID * DESCRIPTOR_GRID;

pub const DEFAULT_NOVELTY_K: usize = 15;
pub const DEFAULT_NOVELTY_THRESHOLD: f64 = 0.03;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("descriptor dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid score request: {0}")]
    InvalidRequest(String),
    #[error("invalid scorer configuration: {0}")]
    InvalidConfig(String),
}

/// Scorer output on a scorer-native, maximize-better scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    pub raw: f64,
    pub valid: bool,
}

impl Fitness {
    /// A valid fitness; non-finite values are demoted to invalid.
    pub fn new(raw: f64) -> Self {
        if raw.is_finite() {
            Self { raw, valid: true }
        } else {
            Self::invalid()
        }
    }

    pub fn invalid() -> Self {
        Self { raw: f64::NAN, valid: false }
    }

    /// `Some(raw)` when valid.
    pub fn value(&self) -> Option<f64> {
        self.valid.then_some(self.raw)
    }
}

/// Something that turns an image into a fitness. Called concurrently from
/// evaluation workers.
pub trait Scorer: Send + Sync {
    fn score(&self, image: &ImageBuffer) -> Fitness;
}

/// Fraction of pixels that differ from `background`.
pub fn silhouette_fraction(image: &ImageBuffer, background: [u8; 3]) -> f64 {
    let total = image.width() as usize * image.height() as usize;
    if total == 0 {
        return 0.0;
    }
    let covered = image.rgb_pixels().filter(|p| *p != background).count();
    covered as f64 / total as f64
}

/// Rewards silhouettes covering `target` of the frame: `raw = -|coverage - target|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageScorer {
    pub target: f64,
    pub background: [u8; 3],
}

impl Default for CoverageScorer {
    fn default() -> Self {
        Self { target: 0.5, background: [128, 128, 128] }
    }
}

impl Scorer for CoverageScorer {
    fn score(&self, image: &ImageBuffer) -> Fitness {
        Fitness::new(-(silhouette_fraction(image, self.background) - self.target).abs())
    }
}

/// Mean luma in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrightnessScorer;

impl Scorer for BrightnessScorer {
    fn score(&self, image: &ImageBuffer) -> Fitness {
        let n = image.width() as usize * image.height() as usize;
        if n == 0 {
            return Fitness::invalid();
        }
        let sum: f64 = image.rgb_pixels().map(luma).sum();
        Fitness::new(sum / (n as f64 * 255.0))
    }
}

/// Intersection-over-union between the rendered silhouette and a target mask.
///
/// Mask pixels with luma ≥ 128 are foreground. Two empty sets score 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskIouScorer {
    width: u32,
    height: u32,
    mask: Vec<bool>,
    background: [u8; 3],
}

impl MaskIouScorer {
    pub fn new(mask: &ImageBuffer, background: [u8; 3]) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            mask: mask.rgb_pixels().map(|p| luma(p) >= 128.0).collect(),
            background,
        }
    }

    pub fn from_png(bytes: &[u8], background: [u8; 3]) -> Result<Self, RenderError> {
        Ok(Self::new(&decode_png(bytes)?, background))
    }
}

impl Scorer for MaskIouScorer {
    fn score(&self, image: &ImageBuffer) -> Fitness {
        if image.width() != self.width || image.height() != self.height {
            return Fitness::invalid();
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (p, &m) in image.rgb_pixels().zip(&self.mask) {
            let s = p != self.background;
            inter += usize::from(s && m);
            union += usize::from(s || m);
        }
        if union == 0 {
            Fitness::new(1.0)
        } else {
            Fitness::new(inter as f64 / union as f64)
        }
    }
}

/// Rec. 601 luma in `[0, 255]`; exact for grey pixels.
fn luma(p: [u8; 3]) -> f64 {
    (299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32) as f64 / 1000.0
}

// ---------------------------------------------------------------------------
// Remote scorer client
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    ImagenetClass,
    ClipText,
}

impl ScoreMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMode::ImagenetClass => "imagenet_class",
            ScoreMode::ClipText => "clip_text",
        }
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "imagenet_class" => Ok(ScoreMode::ImagenetClass),
            "clip_text" => Ok(ScoreMode::ClipText),
            other => Err(ScoringError::InvalidConfig(format!(
                "unknown mode {other:?} (expected imagenet_class or clip_text)"
            ))),
        }
    }
}

/// Checks the target against the mode's constraints.
pub fn validate_target(mode: ScoreMode, target: &str) -> Result<(), ScoringError> {
    match mode {
        ScoreMode::ImagenetClass => match target.parse::<u32>() {
            Ok(class) if class <= 999 => Ok(()),
            _ => Err(ScoringError::InvalidRequest(format!(
                "imagenet_class target {target:?} must be an integer in [0, 999]"
            ))),
        },
        ScoreMode::ClipText if target.trim().is_empty() => {
            Err(ScoringError::InvalidRequest("clip_text caption must be non-empty".into()))
        }
        ScoreMode::ClipText => Ok(()),
    }
}

/// Body of `POST /score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub image_png_b64: String,
    pub mode: ScoreMode,
    pub target: String,
}

impl ScoreRequest {
    pub fn new(
        id: impl Into<String>,
        image: &ImageBuffer,
        mode: ScoreMode,
        target: &str,
    ) -> Result<Self, ScoringError> {
        validate_target(mode, target)?;
        let png = encode_png_bytes(image).map_err(|e| ScoringError::InvalidRequest(e.to_string()))?;
        Ok(Self {
            id: id.into(),
            image_png_b64: base64::engine::general_purpose::STANDARD.encode(png),
            mode,
            target: target.to_owned(),
        })
    }
}

/// Response body: `{"id", "score"}` on success, `{"id", "error"}` on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// HTTP client for the neural scoring service.
#[derive(Debug)]
pub struct RemoteScorer {
    endpoint: String,
    mode: ScoreMode,
    target: String,
    agent: ureq::Agent,
    next_id: AtomicU64,
}

impl RemoteScorer {
    pub fn new(endpoint: &str, mode: ScoreMode, target: &str, timeout: Duration) -> Result<Self, ScoringError> {
        validate_target(mode, target)?;
        if endpoint.is_empty() {
            return Err(ScoringError::InvalidConfig("scorer endpoint is empty".into()));
        }
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_owned(),
            mode,
            target: target.to_owned(),
            agent: agent(timeout),
            next_id: AtomicU64::new(0),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// `GET /healthz` answered with 200.
    pub fn healthy(&self) -> bool {
        health_check(&self.agent, &self.endpoint)
    }

    /// Sends one request, retrying once. Never fails loudly.
    pub fn remote_score(&self, request: &ScoreRequest) -> Fitness {
        let url = format!("{}/score", self.endpoint);
        for _ in 0..2 {
            if let Some(score) = post_score(&self.agent, &url, request) {
                return Fitness::new(score);
            }
        }
        Fitness::invalid()
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, image: &ImageBuffer) -> Fitness {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        match ScoreRequest::new(id, image, self.mode, &self.target) {
            Ok(request) => self.remote_score(&request),
            Err(_) => Fitness::invalid(),
        }
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

fn post_score(agent: &ureq::Agent, url: &str, request: &ScoreRequest) -> Option<f64> {
    let mut response = agent.post(url).send_json(request).ok()?;
    if response.status() != 200 {
        return None;
    }
    let body: ScoreResponse = response.body_mut().read_json().ok()?;
    if body.id != request.id || body.error.is_some() {
        return None;
    }
    body.score.filter(|s| s.is_finite())
}

/// True when `GET {endpoint}/healthz` answers 200 within `timeout`.
pub fn endpoint_healthy(endpoint: &str, timeout: Duration) -> bool {
    health_check(&agent(timeout), endpoint.trim_end_matches('/'))
}

fn health_check(agent: &ureq::Agent, endpoint: &str) -> bool {
    agent.get(&format!("{endpoint}/healthz")).call().map(|r| r.status() == 200).unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Novelty
// ---------------------------------------------------------------------------

/// Greyscale render box-filtered to a 16×16 grid, row-major, scaled to `[0, 1]`.
pub fn behavior_descriptor(image: &ImageBuffer) -> Vec<f64> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let span = |cell: usize, len: usize| {
        let lo = (cell * len / DESCRIPTOR_GRID).min(len.saturating_sub(1));
        let hi = ((cell + 1) * len / DESCRIPTOR_GRID).max(lo + 1).min(len);
        lo..hi
    };
    let mut out = Vec::with_capacity(DESCRIPTOR_DIM);
    for cy in 0..DESCRIPTOR_GRID {
        for cx in 0..DESCRIPTOR_GRID {
            if w == 0 || h == 0 {
                out.push(0.0);
                continue;
            }
            let (xs, ys) = (span(cx, w), span(cy, h));
            let count = (xs.len() * ys.len()) as f64;
            let sum: f64 = ys
                .flat_map(|y| xs.clone().map(move |x| (x, y)))
                .map(|(x, y)| luma(image.get(x as u32, y as u32)))
                .sum();
            out.push(sum / count / 255.0);
        }
    }
    out
}

/// Append-only archive of behaviour descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyArchive {
    dim: usize,
    k: usize,
    add_threshold: f64,
    descriptors: Vec<Vec<f64>>,
}

impl NoveltyArchive {
    pub fn new(dim: usize, k: usize, add_threshold: f64) -> Result<Self, ScoringError> {
        if dim == 0 || k == 0 {
            return Err(ScoringError::InvalidConfig("novelty dim and k must be positive".into()));
        }
        if !(add_threshold >= 0.0 && add_threshold.is_finite()) {
            return Err(ScoringError::InvalidConfig(format!(
                "novelty threshold {add_threshold} must be finite and >= 0"
            )));
        }
        Ok(Self { dim, k, add_threshold, descriptors: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn add_threshold(&self) -> f64 {
        self.add_threshold
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[Vec<f64>] {
        &self.descriptors
    }

    fn check(&self, v: &[f64]) -> Result<(), ScoringError> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(ScoringError::DimensionMismatch { expected: self.dim, got: v.len() })
        }
    }

    /// Mean distance from `query` to its `k` nearest neighbours among the
    /// archive and `others`. `others` must not contain the query's own entry.
    pub fn novelty(&self, others: &[Vec<f64>], query: &[f64]) -> Result<f64, ScoringError> {
        self.check(query)?;
        for o in others {
            self.check(o)?;
        }
        let mut distances: Vec<f64> = self.descriptors.iter().chain(others).map(|d| euclidean(d, query)).collect();
        Ok(mean_of_smallest(&mut distances, self.k))
    }

    /// Novelty of every member of `population`, each excluding only its own slot.
    pub fn population_novelty(&self, population: &[Vec<f64>]) -> Result<Vec<f64>, ScoringError> {
        for d in population {
            self.check(d)?;
        }
        Ok((0..population.len())
            .map(|i| {
                let mut distances: Vec<f64> = self
                    .descriptors
                    .iter()
                    .chain(population[..i].iter())
                    .chain(population[i + 1..].iter())
                    .map(|d| euclidean(d, &population[i]))
                    .collect();
                mean_of_smallest(&mut distances, self.k)
            })
            .collect())
    }

    /// Appends `descriptor` iff `novelty` strictly exceeds the threshold.
    pub fn update(&mut self, descriptor: &[f64], novelty: f64) -> Result<bool, ScoringError> {
        self.check(descriptor)?;
        if novelty > self.add_threshold {
            self.descriptors.push(descriptor.to_vec());
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// Sorting first makes the sum independent of neighbour order.
fn mean_of_smallest(distances: &mut [f64], k: usize) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    distances.sort_by(f64::total_cmp);
    let take = k.min(distances.len());
    distances[..take].iter().sum::<f64>() / take as f64
}
