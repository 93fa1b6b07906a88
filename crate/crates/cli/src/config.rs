//! Flat `key = value` run configuration.
//!
//! Values are layered: built-in defaults, then the scorer endpoint from
//! `SUPERSHAPE_SCORER_ENDPOINT`, then the config file, then command-line flags. Blank
//! lines and lines starting with `#` are ignored. Recognised keys:
//!
//! ```text
//! seed, population, generations, mutation_rate, selection_rate, elitism
//! width, height, background (r,g,b), framing, resolution
//! objective (coverage | brightness | iou | remote | novelty)
//! coverage_target, mask, endpoint, mode, target, timeout_secs
//! novelty_k, novelty_threshold, out, export_every
//! bounds.<gene> = lo,hi        gene ∈ r1.m … r2.n3, elevation, azimuth, rotation
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::Value;
use supershape_core::evolve::{GaConfig, Pipeline, GENE_NAMES};
use supershape_core::render::RenderConfig;
use supershape_core::scoring::{validate_target, ScoreMode, DEFAULT_NOVELTY_K, DEFAULT_NOVELTY_THRESHOLD};

use crate::error::CliError;

pub const ENDPOINT_ENV: &str = "SUPERSHAPE_SCORER_ENDPOINT";

const PLAIN_KEYS: &[&str] = &[
    "seed",
    "population",
    "generations",
    "mutation_rate",
    "selection_rate",
    "elitism",
    "width",
    "height",
    "background",
    "framing",
    "resolution",
    "objective",
    "coverage_target",
    "mask",
    "endpoint",
    "mode",
    "target",
    "timeout_secs",
    "novelty_k",
    "novelty_threshold",
    "out",
    "export_every",
];

/// Keys that do not affect results and are left out of the checkpoint echo.
const UNECHOED_KEYS: &[&str] = &["out", "export_every"];

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Coverage { target: f64 },
    Brightness,
    Iou { mask: PathBuf },
    Remote { endpoint: String, mode: ScoreMode, target: String, timeout: Duration },
    Novelty { k: usize, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ga: GaConfig,
    pub pipeline: Pipeline,
    pub objective: Objective,
    pub out: PathBuf,
    /// Write `gen_<k>_best.png` every this many generations; 0 disables.
    pub export_every: usize,
    settings: BTreeMap<String, String>,
}

/// Ordered key/value layers.
#[derive(Debug, Clone, Default)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn defaults() -> Self {
        let ga = GaConfig::default();
        let render = RenderConfig::default();
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_owned(), v);
        };
        put("seed", ga.rng_seed.to_string());
        put("population", ga.population_size.to_string());
        put("generations", ga.generations.to_string());
        put("mutation_rate", ga.mutation_rate.to_string());
        put("selection_rate", ga.selection_rate.to_string());
        put("elitism", ga.elitism.to_string());
        put("width", render.width.to_string());
        put("height", render.height.to_string());
        put("background", format_rgb(render.background));
        put("framing", render.framing.to_string());
        put("resolution", Pipeline::default().resolution.to_string());
        put("objective", "coverage".into());
        put("coverage_target", "0.5".into());
        put("mode", "clip_text".into());
        put("timeout_secs", "30".into());
        put("novelty_k", DEFAULT_NOVELTY_K.to_string());
        put("novelty_threshold", DEFAULT_NOVELTY_THRESHOLD.to_string());
        put("out", "out".into());
        put("export_every", "1".into());
        for (i, name) in GENE_NAMES.iter().enumerate() {
            let [lo, hi] = ga.gene_bounds.0[i];
            put(&format!("bounds.{name}"), format!("{lo},{hi}"));
        }
        Self(map)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim();
        if !is_known_key(key) {
            return Err(CliError::Config(format!("unknown config key {key:?}")));
        }
        self.0.insert(key.to_owned(), value.trim().to_owned());
        Ok(())
    }

    /// Applies `SUPERSHAPE_SCORER_ENDPOINT` when set.
    pub fn apply_env(&mut self) {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                self.0.insert("endpoint".into(), endpoint.trim().to_owned());
            }
        }
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`, got {line:?}", n + 1)))?;
            self.set(key, value).map_err(|e| CliError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `KEY=VALUE` pairs from the command line.
    pub fn apply_pairs<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<(), CliError> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn build(self) -> Result<RunConfig, CliError> {
        let mut ga = GaConfig {
            rng_seed: self.parse("seed")?,
            population_size: self.parse("population")?,
            generations: self.parse("generations")?,
            mutation_rate: self.parse("mutation_rate")?,
            selection_rate: self.parse("selection_rate")?,
            elitism: self.parse("elitism")?,
            ..GaConfig::default()
        };
        for (i, name) in GENE_NAMES.iter().enumerate() {
            let key = format!("bounds.{name}");
            let text = self.require(&key)?;
            let values = parse_list(text, &key)?;
            let [lo, hi] = <[f64; 2]>::try_from(values.as_slice())
                .map_err(|_| CliError::Config(format!("{key} expects `lo,hi`, got {text:?}")))?;
            ga.gene_bounds.0[i] = [lo, hi];
        }
        ga.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let render = RenderConfig {
            width: self.parse("width")?,
            height: self.parse("height")?,
            background: parse_rgb(self.require("background")?)?,
            framing: self.parse("framing")?,
            ..RenderConfig::default()
        };
        render.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let resolution: usize = self.parse("resolution")?;
        if resolution < 3 {
            return Err(CliError::Config(format!("resolution {resolution} must be >= 3")));
        }

        let objective = match self.require("objective")? {
            "coverage" => {
                let target: f64 = self.parse("coverage_target")?;
                if !(0.0..=1.0).contains(&target) {
                    return Err(CliError::Config(format!("coverage_target {target} must lie in [0, 1]")));
                }
                Objective::Coverage { target }
            }
            "brightness" => Objective::Brightness,
            "iou" => Objective::Iou { mask: PathBuf::from(self.require("mask")?) },
            "remote" => {
                let mode: ScoreMode = self.require("mode")?.parse().map_err(|e| CliError::Config(format!("{e}")))?;
                let target = self.require("target")?.to_owned();
                validate_target(mode, &target).map_err(|e| CliError::Config(e.to_string()))?;
                let secs: f64 = self.parse("timeout_secs")?;
                if !(secs > 0.0 && secs.is_finite()) {
                    return Err(CliError::Config(format!("timeout_secs {secs} must be positive")));
                }
                Objective::Remote {
                    endpoint: self.require("endpoint")?.to_owned(),
                    mode,
                    target,
                    timeout: Duration::from_secs_f64(secs),
                }
            }
            "novelty" => {
                let k: usize = self.parse("novelty_k")?;
                let threshold: f64 = self.parse("novelty_threshold")?;
                if k == 0 || !(threshold >= 0.0 && threshold.is_finite()) {
                    return Err(CliError::Config("novelty_k must be >= 1 and novelty_threshold >= 0".into()));
                }
                Objective::Novelty { k, threshold }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown objective {other:?} (expected coverage, brightness, iou, remote or novelty)"
                )))
            }
        };

        Ok(RunConfig {
            ga,
            pipeline: Pipeline { render, resolution },
            objective,
            out: PathBuf::from(self.require("out")?),
            export_every: self.parse("export_every")?,
            settings: self.0,
        })
    }

    fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| CliError::Config(format!("missing required config key {key:?}")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let text = self.require(key)?;
        text.parse().map_err(|e| CliError::Config(format!("bad value {text:?} for {key}: {e}")))
    }
}

impl RunConfig {
    /// Result-relevant settings, as echoed into every checkpoint line.
    pub fn echo(&self) -> Value {
        let map = self
            .settings
            .iter()
            .filter(|(k, _)| !UNECHOED_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        Value::Object(map)
    }
}

fn is_known_key(key: &str) -> bool {
    PLAIN_KEYS.contains(&key) || key.strip_prefix("bounds.").is_some_and(|gene| GENE_NAMES.contains(&gene))
}

fn parse_list(text: &str, key: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad number {s:?} in {key}: {e}"))))
        .collect()
}

fn parse_rgb(text: &str) -> Result<[u8; 3], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let channels: Vec<u8> = parts
        .iter()
        .map(|p| p.parse::<u8>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad background {text:?}: {e}")))?;
    <[u8; 3]>::try_from(channels.as_slice())
        .map_err(|_| CliError::Config(format!("background expects r,g,b, got {text:?}")))
}

fn format_rgb(c: [u8; 3]) -> String {
    format!("{},{},{}", c[0], c[1], c[2])
}
