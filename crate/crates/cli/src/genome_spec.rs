//! Genome arguments: 15 comma-separated reals, or `gen<k>:best` / `gen<k>:<i>`
//! naming a genome in a checkpoint stream.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use supershape_core::checkpoint::read_checkpoints;
use supershape_core::evolve::{GeneBounds, Genome, GENE_COUNT};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum GenomeSpec {
    Literal(Genome),
    Checkpoint { generation: usize, slot: Slot },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Best,
    Index(usize),
}

impl GenomeSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        if let Some(rest) = text.strip_prefix("gen") {
            if let Some((g, slot)) = rest.split_once(':') {
                let generation = g
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad generation in checkpoint reference {text:?}")))?;
                let slot = match slot {
                    "best" => Slot::Best,
                    i => Slot::Index(i.parse().map_err(|_| {
                        CliError::Config(format!("checkpoint reference {text:?} expects `best` or an index"))
                    })?),
                };
                return Ok(GenomeSpec::Checkpoint { generation, slot });
            }
        }
        let values: Vec<f64> = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("genome value {:?} is not a number", s.trim())))
            })
            .collect::<Result<_, _>>()?;
        let genome = Genome::from_slice(&values).ok_or_else(|| {
            CliError::Config(format!("genome needs {GENE_COUNT} comma-separated values, got {}", values.len()))
        })?;
        Ok(GenomeSpec::Literal(genome))
    }

    /// Resolves checkpoint references against `checkpoints` and checks bounds.
    pub fn resolve(&self, checkpoints: &Path, bounds: &GeneBounds) -> Result<Genome, CliError> {
        let genome = match *self {
            GenomeSpec::Literal(g) => g,
            GenomeSpec::Checkpoint { generation, slot } => {
                let file = File::open(checkpoints).map_err(|e| CliError::io(checkpoints.display(), e))?;
                let lines =
                    read_checkpoints(BufReader::new(file)).map_err(|e| CliError::io(checkpoints.display(), e))?;
                let line = lines.iter().find(|l| l.generation == generation).ok_or_else(|| {
                    CliError::Config(format!("generation {generation} not found in {}", checkpoints.display()))
                })?;
                let i = match slot {
                    Slot::Best => line.best_index,
                    Slot::Index(i) => i,
                };
                line.population.get(i).map(|s| s.genes).ok_or_else(|| {
                    CliError::Config(format!(
                        "generation {generation} has {} genomes, no index {i}",
                        line.population.len()
                    ))
                })?
            }
        };
        bounds.check(&genome).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(genome)
    }
}

/// `RxC` with both sides at least 1.
pub fn parse_grid(text: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Config(format!("grid must look like ROWSxCOLS with both >= 1, got {text:?}"));
    let (r, c) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    let rows: u32 = r.trim().parse().map_err(|_| bad())?;
    let cols: u32 = c.trim().parse().map_err(|_| bad())?;
    if rows == 0 || cols == 0 {
        return Err(bad());
    }
    Ok((rows, cols))
}
