//! The 15-gene genetic algorithm over supershape and view genes.
//!
//! Each generation: evaluate every genome (render + score, fanned out across
//! threads), copy the elites, keep roulette-selected survivors, and fill the
//! rest with mutated copies of roulette-selected parents. All randomness comes
//! from one seeded [`GaRng`] advanced only by the orchestrating thread.

use std::f64::consts::PI;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{tessellate, GeometryError, SuperformulaParams, TriangleMesh, DEFAULT_RESOLUTION};
use crate::render::{render, ImageBuffer, RenderConfig, RenderError, Rendered, ViewAngles};
use crate::scoring::{behavior_descriptor, Fitness, NoveltyArchive, Scorer, ScoringError};

pub const GENE_COUNT: usize = 15;

/// Gene order inside a [`Genome`].
pub const GENE_NAMES: [&str; GENE_COUNT] = [
    "r1.m",
    "r1.a",
    "r1.b",
    "r1.n1",
    "r1.n2",
    "r1.n3",
    "r2.m",
    "r2.a",
    "r2.b",
    "r2.n1",
    "r2.n2",
    "r2.n3",
    "elevation",
    "azimuth",
    "rotation",
];

pub const ELEVATION: usize = 12;
pub const AZIMUTH: usize = 13;
pub const ROTATION: usize = 14;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error("gene {name} = {value} outside bounds [{lo}, {hi}]")]
    OutOfBounds { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("cannot select from an empty population")]
    EmptyPopulation,
    #[error("checkpoint does not match this run: {0}")]
    Resume(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("checkpoint sink failed: {0}")]
    Io(#[from] io::Error),
}

/// Two superformula parameter sets followed by elevation, azimuth and rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome {
    genes: [f64; GENE_COUNT],
}

impl Genome {
    pub const fn from_genes(genes: [f64; GENE_COUNT]) -> Self {
        Self { genes }
    }

    pub fn from_slice(values: &[f64]) -> Option<Self> {
        Some(Self { genes: values.try_into().ok()? })
    }

    /// Unit sphere seen from the default view.
    pub fn sphere() -> Self {
        let mut genes = [0.0; GENE_COUNT];
        genes[..6].copy_from_slice(&[0.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        genes[6..12].copy_from_slice(&[0.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        Self { genes }
    }

    pub fn genes(&self) -> &[f64; GENE_COUNT] {
        &self.genes
    }

    pub fn r1(&self) -> SuperformulaParams {
        params_at(&self.genes[0..6])
    }

    pub fn r2(&self) -> SuperformulaParams {
        params_at(&self.genes[6..12])
    }

    pub fn view(&self) -> Result<ViewAngles, RenderError> {
        ViewAngles::new(self.genes[ELEVATION], self.genes[AZIMUTH], self.genes[ROTATION])
    }

    pub fn with_view(mut self, elevation: f64, azimuth: f64, rotation: f64) -> Self {
        self.genes[ELEVATION] = elevation;
        self.genes[AZIMUTH] = azimuth;
        self.genes[ROTATION] = rotation;
        self
    }
}

fn params_at(g: &[f64]) -> SuperformulaParams {
    SuperformulaParams { m: g[0], a: g[1], b: g[2], n1: g[3], n2: g[4], n3: g[5] }
}

/// Inclusive `[lo, hi]` per gene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneBounds(pub [[f64; 2]; GENE_COUNT]);

impl Default for GeneBounds {
    fn default() -> Self {
        let shape = [[0.0, 20.0], [0.1, 5.0], [0.1, 5.0], [0.1, 20.0], [0.0, 20.0], [0.0, 20.0]];
        let mut b = [[0.0; 2]; GENE_COUNT];
        b[..6].copy_from_slice(&shape);
        b[6..12].copy_from_slice(&shape);
        for angle in &mut b[12..] {
            *angle = [-PI, PI];
        }
        Self(b)
    }
}

impl GeneBounds {
    pub fn lo(&self, gene: usize) -> f64 {
        self.0[gene][0]
    }

    pub fn hi(&self, gene: usize) -> f64 {
        self.0[gene][1]
    }

    pub fn check(&self, genome: &Genome) -> Result<(), EvolveError> {
        for (i, &value) in genome.genes.iter().enumerate() {
            let [lo, hi] = self.0[i];
            if !(value >= lo && value <= hi) {
                return Err(EvolveError::OutOfBounds { name: GENE_NAMES[i], value, lo, hi });
            }
        }
        Ok(())
    }

    pub fn contains(&self, genome: &Genome) -> bool {
        self.check(genome).is_ok()
    }

    fn validate(&self) -> Result<(), EvolveError> {
        for (i, &[lo, hi]) in self.0.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(EvolveError::InvalidConfig(format!(
                    "bounds for {} must be finite with lo <= hi, got [{lo}, {hi}]",
                    GENE_NAMES[i]
                )));
            }
        }
        // Keep every in-bounds genome inside the superformula's domain.
        for offset in [0, 6] {
            for (k, strict) in [(1, true), (2, true), (3, true), (4, false), (5, false)] {
                let lo = self.0[offset + k][0];
                if (strict && lo <= 0.0) || (!strict && lo < 0.0) {
                    return Err(EvolveError::InvalidConfig(format!(
                        "lower bound of {} is {lo}, outside the superformula domain",
                        GENE_NAMES[offset + k]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub mutation_rate: f64,
    pub selection_rate: f64,
    pub generations: usize,
    pub rng_seed: u64,
    pub gene_bounds: GeneBounds,
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            mutation_rate: 0.1,
            selection_rate: 0.5,
            generations: 30,
            rng_seed: 0,
            gene_bounds: GeneBounds::default(),
            elitism: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let n = self.population_size;
        if n < 2 {
            return Err(EvolveError::InvalidConfig(format!("population_size {n} must be >= 2")));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(EvolveError::InvalidConfig(format!("mutation_rate {} must lie in [0, 1]", self.mutation_rate)));
        }
        if !(self.selection_rate > 0.0 && self.selection_rate <= 1.0) {
            return Err(EvolveError::InvalidConfig(format!(
                "selection_rate {} must lie in (0, 1]",
                self.selection_rate
            )));
        }
        if self.selection_rate * (n as f64) < 1.0 {
            return Err(EvolveError::InvalidConfig(format!(
                "selection_rate * population_size = {} must be >= 1",
                self.selection_rate * n as f64
            )));
        }
        if self.elitism > n {
            return Err(EvolveError::InvalidConfig(format!("elitism {} exceeds population_size {n}", self.elitism)));
        }
        self.gene_bounds.validate()
    }

    /// `⌈selection_rate · N⌉`, ignoring float noise in the product.
    pub fn survivor_count(&self) -> usize {
        let exact = self.selection_rate * self.population_size as f64;
        ((exact - 1e-9).ceil() as usize).clamp(1, self.population_size)
    }
}

/// Serializable ChaCha8 stream position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// 32-byte key, lowercase hex.
    pub seed: String,
    pub stream: u64,
    /// 32-bit word offset into the stream, as a decimal string (it is a u128).
    pub word_pos: String,
}

/// Seeded generator for every random decision of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaRng(ChaCha8Rng);

impl GaRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.0.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: self.0.get_stream(),
            word_pos: self.0.get_word_pos().to_string(),
        }
    }

    pub fn from_state(state: &RngState) -> Result<Self, EvolveError> {
        let bad = |what: &str| EvolveError::Resume(format!("malformed rng state: {what}"));
        if state.seed.len() != 64 {
            return Err(bad("seed must be 64 hex digits"));
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&state.seed[2 * i..2 * i + 2], 16).map_err(|_| bad("seed"))?;
        }
        let word_pos: u128 = state.word_pos.parse().map_err(|_| bad("word_pos"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(state.stream);
        rng.set_word_pos(word_pos);
        Ok(Self(rng))
    }

    /// First 16 hex digits of SHA-256 over the serialized state.
    pub fn digest(&self) -> String {
        state_digest(&self.state())
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

pub fn state_digest(state: &RngState) -> String {
    let mut h = Sha256::new();
    h.update(state.seed.as_bytes());
    h.update(state.stream.to_le_bytes());
    h.update(state.word_pos.as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Uniform draws inside the gene bounds.
pub fn init_population(config: &GaConfig, rng: &mut GaRng) -> Result<Vec<Genome>, EvolveError> {
    config.validate()?;
    Ok((0..config.population_size).map(|_| random_genome(&config.gene_bounds, rng)).collect())
}

pub fn random_genome(bounds: &GeneBounds, rng: &mut GaRng) -> Genome {
    let mut genes = [0.0; GENE_COUNT];
    for (i, g) in genes.iter_mut().enumerate() {
        let [lo, hi] = bounds.0[i];
        *g = if lo == hi { lo } else { rng.0.random_range(lo..=hi) };
    }
    Genome { genes }
}

/// Values fed to selection: invalid entries sit one below the worst valid
/// value, or everything is zero when nothing is valid.
pub fn selection_values(fitness: &[Fitness]) -> Vec<f64> {
    let floor = fitness.iter().filter_map(Fitness::value).fold(f64::INFINITY, f64::min);
    let fill = if floor.is_finite() { floor - 1.0 } else { 0.0 };
    fitness.iter().map(|f| f.value().unwrap_or(fill)).collect()
}

/// Roulette-wheel draws with replacement over `values`, returning indices.
///
/// Weights are shifted to `v - min + ε` with `ε = 1e-6 · (max - min + 1)` so
/// negative scores work and the worst individual keeps a sliver of the wheel.
pub fn roulette_indices(values: &[f64], count: usize, rng: &mut GaRng) -> Result<Vec<usize>, EvolveError> {
    if values.is_empty() {
        return Err(EvolveError::EmptyPopulation);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok((0..count).map(|_| rng.0.random_range(0..values.len())).collect());
    }
    let eps = 1e-6 * (max - min + 1.0);
    let mut cumulative = Vec::with_capacity(values.len());
    let mut total = 0.0;
    for v in values {
        total += v - min + eps;
        cumulative.push(total);
    }
    Ok((0..count)
        .map(|_| {
            let spin = rng.0.random::<f64>() * total;
            cumulative.partition_point(|&c| c <= spin).min(values.len() - 1)
        })
        .collect())
}

/// Roulette selection over a scored population.
pub fn roulette_select(
    scored: &[(Genome, Fitness)],
    count: usize,
    rng: &mut GaRng,
) -> Result<Vec<Genome>, EvolveError> {
    let fitness: Vec<Fitness> = scored.iter().map(|(_, f)| *f).collect();
    let picks = roulette_indices(&selection_values(&fitness), count, rng)?;
    Ok(picks.into_iter().map(|i| scored[i].0).collect())
}

/// Per-gene Gaussian mutation with σ = 10% of the gene range, clamped to bounds.
///
/// One uniform draw is consumed per gene whether or not it mutates.
pub fn mutate(genome: &Genome, config: &GaConfig, rng: &mut GaRng) -> Genome {
    let mut genes = genome.genes;
    for (i, g) in genes.iter_mut().enumerate() {
        if rng.0.random::<f64>() < config.mutation_rate {
            let [lo, hi] = config.gene_bounds.0[i];
            let sigma = 0.1 * (hi - lo);
            if sigma > 0.0 {
                let noise = Normal::new(0.0, sigma).expect("sigma is positive and finite");
                *g = (*g + noise.sample(&mut rng.0)).clamp(lo, hi);
            }
        }
    }
    Genome { genes }
}

/// Fitness of a whole population plus the archive bookkeeping novelty mode does.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: Vec<Fitness>,
    /// Population indices whose descriptors were appended to the novelty archive.
    pub archive_added: Vec<usize>,
}

pub trait PopulationEvaluator {
    fn evaluate(&mut self, population: &[Genome]) -> Evaluation;
}

/// Adapts an independent per-genome fitness function, run in parallel.
pub struct PerGenome<F>(pub F);

impl<F> PopulationEvaluator for PerGenome<F>
where
    F: Fn(&Genome) -> Fitness + Sync,
{
    fn evaluate(&mut self, population: &[Genome]) -> Evaluation {
        Evaluation { fitness: population.par_iter().map(|g| (self.0)(g)).collect(), archive_added: Vec::new() }
    }
}

/// Genome → mesh → image.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub render: RenderConfig,
    pub resolution: usize,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self { render: RenderConfig::default(), resolution: DEFAULT_RESOLUTION }
    }
}

impl Pipeline {
    pub fn mesh(&self, genome: &Genome) -> Result<TriangleMesh, EvolveError> {
        Ok(tessellate(&genome.r1(), &genome.r2(), self.resolution, self.resolution)?)
    }

    pub fn render(&self, genome: &Genome) -> Result<Rendered, EvolveError> {
        let mesh = self.mesh(genome)?;
        Ok(render(&mesh, &genome.view()?, &self.render)?)
    }

    pub fn image(&self, genome: &Genome) -> Result<ImageBuffer, EvolveError> {
        Ok(self.render(genome)?.image)
    }
}

/// Renders each genome and hands the image to a [`Scorer`]. Render failures
/// become invalid fitness.
pub struct ScoredEvaluator<S> {
    pub pipeline: Pipeline,
    pub scorer: S,
}

impl<S: Scorer> PopulationEvaluator for ScoredEvaluator<S> {
    fn evaluate(&mut self, population: &[Genome]) -> Evaluation {
        let fitness = population
            .par_iter()
            .map(|g| match self.pipeline.image(g) {
                Ok(image) => self.scorer.score(&image),
                Err(_) => Fitness::invalid(),
            })
            .collect();
        Evaluation { fitness, archive_added: Vec::new() }
    }
}

/// Fitness = novelty of each render's behaviour descriptor against the archive
/// snapshot and the rest of the population. After scoring, every individual is
/// offered to the archive in population order.
pub struct NoveltyEvaluator {
    pub pipeline: Pipeline,
    pub archive: NoveltyArchive,
}

impl NoveltyEvaluator {
    fn descriptors(&self, population: &[Genome]) -> Vec<Option<Vec<f64>>> {
        population.par_iter().map(|g| self.pipeline.image(g).ok().map(|img| behavior_descriptor(&img))).collect()
    }

    /// Re-adds the archive entries recorded in a checkpoint.
    pub fn replay(&mut self, record: &GenerationRecord) -> Result<(), EvolveError> {
        let chosen: Vec<Genome> = record
            .archive_added
            .iter()
            .map(|&i| {
                record.scored.get(i).map(|(g, _)| *g).ok_or_else(|| {
                    EvolveError::Resume(format!("archive index {i} out of range in generation {}", record.index))
                })
            })
            .collect::<Result<_, _>>()?;
        for d in self.descriptors(&chosen) {
            let d = d.ok_or_else(|| EvolveError::Resume("archived genome no longer renders".into()))?;
            self.archive.update(&d, f64::INFINITY)?;
        }
        Ok(())
    }
}

impl PopulationEvaluator for NoveltyEvaluator {
    fn evaluate(&mut self, population: &[Genome]) -> Evaluation {
        let descriptors = self.descriptors(population);
        let rendered: Vec<usize> = (0..population.len()).filter(|&i| descriptors[i].is_some()).collect();
        let valid: Vec<Vec<f64>> = rendered.iter().map(|&i| descriptors[i].clone().unwrap()).collect();

        let mut fitness = vec![Fitness::invalid(); population.len()];
        let mut archive_added = Vec::new();
        let Ok(scores) = self.archive.population_novelty(&valid) else {
            return Evaluation { fitness, archive_added };
        };
        for (slot, (&i, &score)) in rendered.iter().zip(&scores).enumerate() {
            fitness[i] = Fitness::new(score);
            if matches!(self.archive.update(&valid[slot], score), Ok(true)) {
                archive_added.push(i);
            }
        }
        Evaluation { fitness, archive_added }
    }
}

/// One evaluated generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub index: usize,
    pub scored: Vec<(Genome, Fitness)>,
    pub best_index: usize,
    /// Generator state after evaluation and before breeding the next generation.
    pub rng_state: RngState,
    pub rng_state_digest: String,
    pub archive_added: Vec<usize>,
}

impl GenerationRecord {
    pub fn best(&self) -> (Genome, Fitness) {
        self.scored[self.best_index]
    }

    pub fn population(&self) -> Vec<Genome> {
        self.scored.iter().map(|(g, _)| *g).collect()
    }
}

/// Index of the highest valid fitness (first on ties); 0 when none is valid.
pub fn best_index(fitness: &[Fitness]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in fitness.iter().enumerate() {
        if let Some(v) = f.value() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// GA state between generations.
#[derive(Debug, Clone)]
pub struct Evolution {
    config: GaConfig,
    rng: GaRng,
    population: Vec<Genome>,
    generation: usize,
}

impl Evolution {
    /// Fresh run with a uniformly initialised population.
    pub fn new(config: GaConfig) -> Result<Self, EvolveError> {
        let mut rng = GaRng::seed_from_u64(config.rng_seed);
        let population = init_population(&config, &mut rng)?;
        Ok(Self { config, rng, population, generation: 0 })
    }

    /// Fresh run from a caller-supplied initial population.
    pub fn with_population(config: GaConfig, population: Vec<Genome>) -> Result<Self, EvolveError> {
        config.validate()?;
        if population.len() != config.population_size {
            return Err(EvolveError::InvalidConfig(format!(
                "initial population has {} genomes, expected {}",
                population.len(),
                config.population_size
            )));
        }
        for g in &population {
            config.gene_bounds.check(g)?;
        }
        let rng = GaRng::seed_from_u64(config.rng_seed);
        Ok(Self { config, rng, population, generation: 0 })
    }

    /// Continues after `record` exactly as an uninterrupted run would.
    pub fn resume(config: GaConfig, record: &GenerationRecord) -> Result<Self, EvolveError> {
        config.validate()?;
        if record.scored.len() != config.population_size {
            return Err(EvolveError::Resume(format!(
                "record has {} genomes, config expects {}",
                record.scored.len(),
                config.population_size
            )));
        }
        let rng = GaRng::from_state(&record.rng_state)?;
        if rng.digest() != record.rng_state_digest {
            return Err(EvolveError::Resume("rng state digest mismatch".into()));
        }
        let mut evo = Self { config, rng, population: record.population(), generation: record.index };
        let fitness: Vec<Fitness> = record.scored.iter().map(|(_, f)| *f).collect();
        evo.breed(&fitness)?;
        Ok(evo)
    }

    pub fn config(&self) -> &GaConfig {
        &self.config
    }

    pub fn population(&self) -> &[Genome] {
        &self.population
    }

    /// Index of the generation the next [`step_generation`](Self::step_generation) evaluates.
    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Evaluates the current population without breeding.
    pub fn evaluate(&mut self, evaluator: &mut dyn PopulationEvaluator) -> Result<GenerationRecord, EvolveError> {
        let Evaluation { fitness, archive_added } = evaluator.evaluate(&self.population);
        if fitness.len() != self.population.len() {
            return Err(EvolveError::InvalidConfig(format!(
                "evaluator returned {} fitness values for {} genomes",
                fitness.len(),
                self.population.len()
            )));
        }
        let state = self.rng.state();
        Ok(GenerationRecord {
            index: self.generation,
            best_index: best_index(&fitness),
            scored: self.population.iter().copied().zip(fitness).collect(),
            rng_state_digest: state_digest(&state),
            rng_state: state,
            archive_added,
        })
    }

    /// Evaluate, record, then breed the next population.
    pub fn step_generation(
        &mut self,
        evaluator: &mut dyn PopulationEvaluator,
    ) -> Result<GenerationRecord, EvolveError> {
        let record = self.evaluate(evaluator)?;
        let fitness: Vec<Fitness> = record.scored.iter().map(|(_, f)| *f).collect();
        self.breed(&fitness)?;
        Ok(record)
    }

    /// Elites, then ⌈selection_rate·N⌉ roulette survivors, then mutated offspring.
    fn breed(&mut self, fitness: &[Fitness]) -> Result<(), EvolveError> {
        let n = self.config.population_size;
        let values = selection_values(fitness);

        let mut ranked: Vec<usize> = (0..values.len()).collect();
        ranked.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let elites = self.config.elitism.min(n);
        let survivors = self.config.survivor_count().min(n - elites);
        let offspring = n - elites - survivors;

        let mut next = Vec::with_capacity(n);
        next.extend(ranked[..elites].iter().map(|&i| self.population[i]));
        for i in roulette_indices(&values, survivors, &mut self.rng)? {
            next.push(self.population[i]);
        }
        for _ in 0..offspring {
            let parent = roulette_indices(&values, 1, &mut self.rng)?[0];
            next.push(mutate(&self.population[parent], &self.config, &mut self.rng));
        }
        debug_assert_eq!(next.len(), n);
        self.population = next;
        self.generation += 1;
        Ok(())
    }
}

/// Drives `evolution` until `config.generations` generations have been
/// evaluated in total (at least one), handing each record to `sink`.
///
/// `stop` is polled after each record is sunk; returning true ends the run early.
pub fn run_generations(
    evolution: &mut Evolution,
    evaluator: &mut dyn PopulationEvaluator,
    sink: &mut dyn FnMut(&GenerationRecord) -> io::Result<()>,
    stop: &dyn Fn() -> bool,
) -> Result<Option<GenerationRecord>, EvolveError> {
    let total = evolution.config.generations.max(1);
    let mut last = None;
    while evolution.generation < total {
        let record = if evolution.generation + 1 == total {
            evolution.evaluate(evaluator)?
        } else {
            evolution.step_generation(evaluator)?
        };
        sink(&record)?;
        let finished = record.index + 1 == total;
        last = Some(record);
        if finished {
            break;
        }
        if stop() {
            break;
        }
    }
    Ok(last)
}

/// Runs a full evolution against `scorer`.
pub fn run_evolution<S: Scorer>(
    config: GaConfig,
    pipeline: Pipeline,
    scorer: S,
    sink: &mut dyn FnMut(&GenerationRecord) -> io::Result<()>,
) -> Result<GenerationRecord, EvolveError> {
    let mut evolution = Evolution::new(config)?;
    let mut evaluator = ScoredEvaluator { pipeline, scorer };
    run_generations(&mut evolution, &mut evaluator, sink, &|| false)?
        .ok_or_else(|| EvolveError::InvalidConfig("run produced no generations".into()))
}

/// Runs novelty search: same loop, fitness = novelty, archive grown each generation.
pub fn run_novelty_search(
    config: GaConfig,
    pipeline: Pipeline,
    archive: NoveltyArchive,
    sink: &mut dyn FnMut(&GenerationRecord) -> io::Result<()>,
) -> Result<(NoveltyArchive, Vec<GenerationRecord>), EvolveError> {
    let evolution = Evolution::new(config)?;
    run_novelty_from(evolution, pipeline, archive, sink)
}

/// Novelty search from a prepared [`Evolution`] (e.g. a custom initial population).
pub fn run_novelty_from(
    mut evolution: Evolution,
    pipeline: Pipeline,
    archive: NoveltyArchive,
    sink: &mut dyn FnMut(&GenerationRecord) -> io::Result<()>,
) -> Result<(NoveltyArchive, Vec<GenerationRecord>), EvolveError> {
    let mut evaluator = NoveltyEvaluator { pipeline, archive };
    let mut records = Vec::new();
    run_generations(
        &mut evolution,
        &mut evaluator,
        &mut |r| {
            records.push(r.clone());
            sink(r)
        },
        &|| false,
    )?;
    Ok((evaluator.archive, records))
}
