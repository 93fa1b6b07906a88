//! JSON-lines checkpoint stream: one line per evaluated generation.
//!
//! ```text
//! {"generation":3,"config":{...},"population":[{"genes":[15 numbers],"raw":-0.12}, ...],
//!  "best_index":7,"best_raw":-0.01,"rng":{"seed":"<64 hex>","stream":0,"word_pos":"1234"},
//!  "rng_digest":"<16 hex>","archive_added":[0,5]}
//! ```
//!
//! `raw` is `null` for invalid fitness. `rng` is the ChaCha8 key, stream and
//! 32-bit word position after the generation was evaluated; restoring it and
//! re-breeding from the stored population continues the run bit-exactly.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::evolve::{best_index, state_digest, GenerationRecord, Genome, RngState};
use crate::scoring::Fitness;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredGenome {
    pub genes: Genome,
    pub raw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLine {
    pub generation: usize,
    pub config: Value,
    pub population: Vec<ScoredGenome>,
    pub best_index: usize,
    pub best_raw: Option<f64>,
    pub rng: RngState,
    pub rng_digest: String,
    #[serde(default)]
    pub archive_added: Vec<usize>,
}

impl CheckpointLine {
    pub fn from_record(record: &GenerationRecord, config: Value) -> Self {
        Self {
            generation: record.index,
            config,
            population: record.scored.iter().map(|(g, f)| ScoredGenome { genes: *g, raw: f.value() }).collect(),
            best_index: record.best_index,
            best_raw: record.best().1.value(),
            rng: record.rng_state.clone(),
            rng_digest: record.rng_state_digest.clone(),
            archive_added: record.archive_added.clone(),
        }
    }

    pub fn to_record(&self) -> io::Result<GenerationRecord> {
        let scored: Vec<(Genome, Fitness)> =
            self.population.iter().map(|s| (s.genes, s.raw.map_or_else(Fitness::invalid, Fitness::new))).collect();
        if scored.is_empty() {
            return Err(invalid("checkpoint line has an empty population"));
        }
        if state_digest(&self.rng) != self.rng_digest {
            return Err(invalid("rng digest does not match rng state"));
        }
        let fitness: Vec<Fitness> = scored.iter().map(|(_, f)| *f).collect();
        let best = best_index(&fitness);
        if best != self.best_index {
            return Err(invalid("best_index does not match the population's fitness"));
        }
        Ok(GenerationRecord {
            index: self.generation,
            scored,
            best_index: best,
            rng_state: self.rng.clone(),
            rng_state_digest: self.rng_digest.clone(),
            archive_added: self.archive_added.clone(),
        })
    }
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_owned())
}

/// Appends one flushed JSON line per record.
pub struct CheckpointWriter<W: Write> {
    sink: W,
    config: Value,
}

impl<W: Write> CheckpointWriter<W> {
    pub fn new(sink: W, config: Value) -> Self {
        Self { sink, config }
    }

    pub fn write(&mut self, record: &GenerationRecord) -> io::Result<()> {
        let line = CheckpointLine::from_record(record, self.config.clone());
        serde_json::to_writer(&mut self.sink, &line)?;
        self.sink.write_all(b"\n")?;
        self.sink.flush()
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Parses every non-empty line.
pub fn read_checkpoints<R: BufRead>(reader: R) -> io::Result<Vec<CheckpointLine>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CheckpointLine = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        out.push(parsed);
    }
    Ok(out)
}
