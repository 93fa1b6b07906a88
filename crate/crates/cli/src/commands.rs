use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde_json::Value;
use supershape_core::checkpoint::{read_checkpoints, CheckpointWriter};
use supershape_core::evolve::{
    run_generations, Evolution, EvolveError, GenerationRecord, Genome, NoveltyEvaluator, Pipeline, PopulationEvaluator,
    ScoredEvaluator,
};
use supershape_core::geometry::export_obj;
use supershape_core::render::{encode_png, ImageBuffer};
use supershape_core::scoring::{
    endpoint_healthy, BrightnessScorer, CoverageScorer, Fitness, MaskIouScorer, NoveltyArchive, RemoteScorer, Scorer,
    DESCRIPTOR_DIM,
};

use crate::config::{Objective, RunConfig};
use crate::error::CliError;
use crate::genome_spec::GenomeSpec;

pub const CHECKPOINT_FILE: &str = "checkpoints.jsonl";

struct DynScorer(Box<dyn Scorer>);

impl Scorer for DynScorer {
    fn score(&self, image: &ImageBuffer) -> Fitness {
        self.0.score(image)
    }
}

pub fn evolve(cfg: &RunConfig, resume: bool, stop: Arc<AtomicBool>, quiet: bool) -> Result<(), CliError> {
    ensure_writable(&cfg.out)?;
    let ckpt_path = cfg.out.join(CHECKPOINT_FILE);
    let echo = cfg.echo();

    let previous = if resume { load_previous(&ckpt_path, &echo)? } else { Vec::new() };

    // Fail fast before any rendering.
    let mut evaluator: Box<dyn PopulationEvaluator> = match &cfg.objective {
        Objective::Novelty { k, threshold } => {
            let archive =
                NoveltyArchive::new(DESCRIPTOR_DIM, *k, *threshold).map_err(|e| CliError::Config(e.to_string()))?;
            let mut ev = NoveltyEvaluator { pipeline: cfg.pipeline.clone(), archive };
            for line in &previous {
                ev.replay(line).map_err(|e| CliError::Config(format!("cannot resume: {e}")))?;
            }
            Box::new(ev)
        }
        other => {
            Box::new(ScoredEvaluator { pipeline: cfg.pipeline.clone(), scorer: DynScorer(build_scorer(other, cfg)?) })
        }
    };

    let file =
        if resume { OpenOptions::new().append(true).create(true).open(&ckpt_path) } else { File::create(&ckpt_path) }
            .map_err(|e| CliError::io(ckpt_path.display(), e))?;
    let mut writer = CheckpointWriter::new(BufWriter::new(file), echo);

    let mut evolution = match previous.last() {
        Some(last) => Evolution::resume(cfg.ga.clone(), last),
        None => Evolution::new(cfg.ga.clone()),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut best: Option<(Genome, f64)> = None;
    for record in &previous {
        track_best(&mut best, record);
    }

    let mut sink = |record: &GenerationRecord| -> std::io::Result<()> {
        writer.write(record)?;
        track_best(&mut best, record);
        let (genome, fitness) = record.best();
        if !quiet {
            match fitness.value() {
                Some(v) => eprintln!("generation {} best {v:.6}", record.index),
                None => eprintln!("generation {} best invalid", record.index),
            }
        }
        if cfg.export_every > 0 && record.index.is_multiple_of(cfg.export_every) && fitness.valid {
            if let Ok(image) = cfg.pipeline.image(&genome) {
                write_png(&cfg.out.join(format!("gen_{}_best.png", record.index)), &image)?;
            }
        }
        Ok(())
    };
    let stopper = Arc::clone(&stop);
    let result =
        run_generations(&mut evolution, evaluator.as_mut(), &mut sink, &move || stopper.load(Ordering::SeqCst));
    writer.into_inner().flush().map_err(|e| CliError::io(ckpt_path.display(), e))?;
    match result {
        Ok(_) => {}
        Err(EvolveError::Io(e)) => return Err(CliError::io("writing run outputs", e)),
        Err(e) => return Err(CliError::Config(e.to_string())),
    }
    if stop.load(Ordering::SeqCst) && evolution.generation() < cfg.ga.generations.max(1) {
        return Err(CliError::Interrupted);
    }

    match best {
        Some((genome, _)) => export_final(&cfg.pipeline, &genome, &cfg.out),
        None => {
            eprintln!("warning: no valid genome in any generation; final_best.* not written");
            Ok(())
        }
    }
}

fn ensure_writable(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let probe = dir.join(".write_probe");
    File::create(&probe)
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| CliError::io(format!("output directory {} is not writable", dir.display()), e))
}

fn load_previous(path: &Path, echo: &Value) -> Result<Vec<GenerationRecord>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    let lines = read_checkpoints(BufReader::new(file)).map_err(|e| CliError::io(path.display(), e))?;
    let without_generations = |v: &Value| {
        let mut v = v.clone();
        if let Some(map) = v.as_object_mut() {
            map.remove("generations");
        }
        v
    };
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.generation != i {
            return Err(CliError::Config(format!("checkpoint line {} holds generation {}", i + 1, line.generation)));
        }
        if without_generations(&line.config) != without_generations(echo) {
            return Err(CliError::Config("checkpoint was written with a different configuration".into()));
        }
        records.push(line.to_record().map_err(|e| CliError::io(path.display(), e))?);
    }
    Ok(records)
}

fn build_scorer(objective: &Objective, cfg: &RunConfig) -> Result<Box<dyn Scorer>, CliError> {
    let background = cfg.pipeline.render.background;
    Ok(match objective {
        Objective::Coverage { target } => Box::new(CoverageScorer { target: *target, background }),
        Objective::Brightness => Box::new(BrightnessScorer),
        Objective::Iou { mask } => {
            let bytes = fs::read(mask).map_err(|e| CliError::io(mask.display(), e))?;
            let scorer = MaskIouScorer::from_png(&bytes, background)
                .map_err(|e| CliError::Config(format!("mask {}: {e}", mask.display())))?;
            let probe = ImageBuffer::filled(cfg.pipeline.render.width, cfg.pipeline.render.height, background);
            if !scorer.score(&probe).valid {
                return Err(CliError::Config(format!("mask {} does not match the render size", mask.display())));
            }
            Box::new(scorer)
        }
        Objective::Remote { endpoint, mode, target, timeout } => {
            if !endpoint_healthy(endpoint, *timeout) {
                return Err(CliError::ScorerUnreachable(format!("{endpoint}/healthz did not answer 200")));
            }
            Box::new(RemoteScorer::new(endpoint, *mode, target, *timeout).map_err(|e| CliError::Config(e.to_string()))?)
        }
        Objective::Novelty { .. } => unreachable!("novelty has its own evaluator"),
    })
}

fn track_best(best: &mut Option<(Genome, f64)>, record: &GenerationRecord) {
    let (genome, fitness) = record.best();
    if let Some(v) = fitness.value() {
        if best.is_none_or(|(_, b)| v > b) {
            *best = Some((genome, v));
        }
    }
}

fn export_final(pipeline: &Pipeline, genome: &Genome, out: &Path) -> Result<(), CliError> {
    let mesh = pipeline.mesh(genome).map_err(|e| CliError::Config(e.to_string()))?;
    let obj = out.join("final_best.obj");
    let mut file = File::create(&obj).map_err(|e| CliError::io(obj.display(), e))?;
    export_obj(&mesh, &mut file).map_err(|e| CliError::io(obj.display(), e))?;
    let image = pipeline.image(genome).map_err(|e| CliError::Config(e.to_string()))?;
    let png = out.join("final_best.png");
    write_png(&png, &image).map_err(|e| CliError::io(png.display(), e))
}

fn write_png(path: &Path, image: &ImageBuffer) -> std::io::Result<()> {
    let file = File::create(path)?;
    encode_png(image, BufWriter::new(file)).map_err(std::io::Error::other)
}

pub struct RenderArgs<'a> {
    pub genome: &'a GenomeSpec,
    pub checkpoint: Option<PathBuf>,
    pub output: &'a Path,
    pub obj: Option<&'a Path>,
}

pub fn render(cfg: &RunConfig, args: RenderArgs<'_>) -> Result<(), CliError> {
    let ckpt = args.checkpoint.unwrap_or_else(|| cfg.out.join(CHECKPOINT_FILE));
    let genome = args.genome.resolve(&ckpt, &cfg.ga.gene_bounds)?;
    let mesh = cfg.pipeline.mesh(&genome).map_err(|e| CliError::Config(format!("genome does not tessellate: {e}")))?;
    let image = cfg.pipeline.image(&genome).map_err(|e| CliError::Config(e.to_string()))?;
    write_png(args.output, &image).map_err(|e| CliError::io(args.output.display(), e))?;
    if let Some(obj) = args.obj {
        let mut file = File::create(obj).map_err(|e| CliError::io(obj.display(), e))?;
        export_obj(&mesh, &mut file).map_err(|e| CliError::io(obj.display(), e))?;
    }
    Ok(())
}

/// View angles for cell (row, col): azimuth sweeps a full turn across columns,
/// elevation spans [-π/3, π/3] down the rows (0 for a single row).
pub fn sweep_view(row: u32, col: u32, rows: u32, cols: u32) -> (f64, f64, f64) {
    use std::f64::consts::{FRAC_PI_3, TAU};
    let azimuth = TAU * col as f64 / cols as f64;
    let elevation = if rows == 1 { 0.0 } else { -FRAC_PI_3 + 2.0 * FRAC_PI_3 * row as f64 / (rows - 1) as f64 };
    (elevation, azimuth, 0.0)
}

pub fn contact_sheet(pipeline: &Pipeline, genome: &Genome, rows: u32, cols: u32) -> Result<ImageBuffer, CliError> {
    let (w, h) = (pipeline.render.width, pipeline.render.height);
    let (sheet_w, sheet_h) = w
        .checked_mul(cols)
        .zip(h.checked_mul(rows))
        .ok_or_else(|| CliError::Config("contact sheet is too large".into()))?;
    // One tessellation serves every view.
    let mesh = pipeline.mesh(genome).map_err(|e| CliError::Config(format!("genome does not tessellate: {e}")))?;
    let mut sheet = ImageBuffer::filled(sheet_w, sheet_h, pipeline.render.background);
    for row in 0..rows {
        for col in 0..cols {
            let (e, a, r) = sweep_view(row, col, rows, cols);
            let view = genome.with_view(e, a, r).view().map_err(|e| CliError::Config(e.to_string()))?;
            let tile = supershape_core::render::render(&mesh, &view, &pipeline.render)
                .map_err(|e| CliError::Config(e.to_string()))?
                .image;
            sheet.blit(&tile, col * w, row * h);
        }
    }
    Ok(sheet)
}

pub fn views(
    cfg: &RunConfig,
    genome: &GenomeSpec,
    checkpoint: Option<PathBuf>,
    grid: (u32, u32),
    output: &Path,
) -> Result<(), CliError> {
    let ckpt = checkpoint.unwrap_or_else(|| cfg.out.join(CHECKPOINT_FILE));
    let genome = genome.resolve(&ckpt, &cfg.ga.gene_bounds)?;
    let sheet = contact_sheet(&cfg.pipeline, &genome, grid.0, grid.1)?;
    write_png(output, &sheet).map_err(|e| CliError::io(output.display(), e))
}
