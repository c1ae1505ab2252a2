//! Versioned binary checkpoints.
//!
//! Layout: magic `TGP1`, version, a JSON metadata block (config, stats,
//! best-so-far, counters — floats stored as IEEE bit patterns so resume is
//! bit-exact even for infinities), then the three population matrices
//! row-major, and a trailing CRC32 over everything before it.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{BestSoFar, EvolutionConfig, GenerationStats};
use crate::error::{Error, Result};
use crate::eval::ResolvedStrategy;
use crate::tree::{PopulationStore, Tree};

const MAGIC: &[u8; 4] = b"TGP1";
const VERSION: u32 = 1;

/// Everything the engine needs to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointState {
    pub config: EvolutionConfig,
    pub population: PopulationStore,
    pub stats: Vec<GenerationStats>,
    pub best: Option<BestSoFar>,
    pub node_evaluations: u64,
    pub total_seconds: f64,
    pub done: bool,
}

#[derive(Serialize, Deserialize)]
struct StatsRepr {
    generation: usize,
    best: u64,
    mean: u64,
    median: u64,
    mean_size: u64,
    seconds: u64,
    strategy: ResolvedStrategy,
}

impl From<&GenerationStats> for StatsRepr {
    fn from(s: &GenerationStats) -> Self {
        StatsRepr {
            generation: s.generation,
            best: s.best.to_bits(),
            mean: s.mean.to_bits(),
            median: s.median.to_bits(),
            mean_size: s.mean_size.to_bits(),
            seconds: s.seconds.to_bits(),
            strategy: s.strategy,
        }
    }
}

impl StatsRepr {
    fn into_stats(self) -> GenerationStats {
        GenerationStats {
            generation: self.generation,
            best: f64::from_bits(self.best),
            mean: f64::from_bits(self.mean),
            median: f64::from_bits(self.median),
            mean_size: f64::from_bits(self.mean_size),
            seconds: f64::from_bits(self.seconds),
            strategy: self.strategy,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BestRepr {
    types: Vec<u8>,
    value_bits: Vec<u64>,
    sizes: Vec<u32>,
    fitness: u64,
    generation: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    pop_size: usize,
    max_len: usize,
    n_inputs: usize,
    n_outputs: usize,
    /// Config with `target_fitness` stripped; the bits travel separately
    /// because JSON cannot carry infinities.
    config: EvolutionConfig,
    target_fitness_bits: Option<u64>,
    stats: Vec<StatsRepr>,
    best: Option<BestRepr>,
    node_evaluations: u64,
    total_seconds_bits: u64,
    done: bool,
}

pub fn checkpoint_save(state: &CheckpointState, path: &Path) -> Result<()> {
    let mut config = state.config.clone();
    let target_fitness_bits = config.target_fitness.map(f64::to_bits);
    config.target_fitness = None;

    let best = state.best.as_ref().map(|b| {
        let s = b.tree.as_slice();
        let len = s.len();
        BestRepr {
            types: s.types[..len].to_vec(),
            value_bits: s.values[..len].iter().map(|v| v.to_bits()).collect(),
            sizes: s.sizes[..len].to_vec(),
            fitness: b.fitness.to_bits(),
            generation: b.generation,
        }
    });

    let header = Header {
        pop_size: state.population.pop_size(),
        max_len: state.population.max_len(),
        n_inputs: state.config.encoding.n_inputs,
        n_outputs: state.config.encoding.n_outputs,
        config,
        target_fitness_bits,
        stats: state.stats.iter().map(StatsRepr::from).collect(),
        best,
        node_evaluations: state.node_evaluations,
        total_seconds_bits: state.total_seconds.to_bits(),
        done: state.done,
    };
    let header_json = serde_json::to_vec(&header)?;

    let (types, values, sizes) = state.population.matrices();
    let mut bytes = Vec::with_capacity(
        4 + 4 + 8 + header_json.len() + types.len() + values.len() * 8 + sizes.len() * 4 + 4,
    );
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    bytes.extend_from_slice(types);
    for v in values {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    for s in sizes {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());

    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::CorruptChecksum);
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }
}

pub fn checkpoint_load(path: &Path) -> Result<CheckpointState> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 4 + 4 + 8 + 4 {
        return Err(Error::CorruptChecksum);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(tail.try_into().expect("4-byte tail"));
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::CorruptChecksum);
    }

    let mut cur = Cursor { bytes: body, at: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::InvalidEncoding("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let header_len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)?;

    let cells = header.pop_size * header.max_len;
    let types = cur.take(cells)?.to_vec();
    let mut values = Vec::with_capacity(cells);
    for chunk in cur.take(cells * 8)?.chunks_exact(8) {
        values.push(f64::from_bits(u64::from_le_bytes(chunk.try_into().unwrap())));
    }
    let mut sizes = Vec::with_capacity(cells);
    for chunk in cur.take(cells * 4)?.chunks_exact(4) {
        sizes.push(u32::from_le_bytes(chunk.try_into().unwrap()));
    }
    if cur.at != body.len() {
        return Err(Error::CorruptChecksum);
    }

    let population =
        PopulationStore::from_matrices(header.pop_size, header.max_len, types, values, sizes)?;

    let mut config = header.config;
    config.target_fitness = header.target_fitness_bits.map(f64::from_bits);

    let best = header
        .best
        .map(|b| -> Result<BestSoFar> {
            let values: Vec<f64> = b.value_bits.iter().map(|&v| f64::from_bits(v)).collect();
            Ok(BestSoFar {
                tree: Tree::from_parts(&b.types, &values, &b.sizes, header.max_len)?,
                fitness: f64::from_bits(b.fitness),
                generation: b.generation,
            })
        })
        .transpose()?;

    Ok(CheckpointState {
        config,
        population,
        stats: header.stats.into_iter().map(StatsRepr::into_stats).collect(),
        best,
        node_evaluations: header.node_evaluations,
        total_seconds: f64::from_bits(header.total_seconds_bits),
        done: header.done,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;
    use crate::eval::ParallelWidth;
    use crate::problems::{generate_pagie, PagieSpec, Problem};
    use crate::tree::EncodingConfig;

    fn setup() -> (Problem, EvolutionConfig) {
        let ds = generate_pagie(&PagieSpec {
            lo: -2.0,
            hi: 2.0,
            step: 0.8,
        })
        .unwrap();
        let problem = Problem::regression(ds).unwrap();
        let cfg = EvolutionConfig {
            pop_size: 40,
            max_generations: 8,
            encoding: EncodingConfig {
                max_len: 64,
                n_inputs: 2,
                n_outputs: 1,
                const_range: (-1.0, 1.0),
            },
            target_fitness: Some(f64::NEG_INFINITY),
            seed: 11,
            ..Default::default()
        };
        (problem, cfg)
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let (problem, mut cfg) = setup();
        cfg.target_fitness = Some(f64::INFINITY);
        cfg.max_generations = 0;
        let engine = Engine::new(cfg, &problem, ParallelWidth::fixed(1).unwrap()).unwrap();
        let state = engine.checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.tgp");
        checkpoint_save(&state, &path).unwrap();
        let loaded = checkpoint_load(&path).unwrap();
        assert_eq!(loaded, state);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let (problem, mut cfg) = setup();
        cfg.target_fitness = None;
        cfg.max_generations = 1;
        let engine = Engine::new(cfg, &problem, ParallelWidth::fixed(1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.tgp");
        checkpoint_save(&engine.checkpoint(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            checkpoint_load(&path),
            Err(Error::CorruptChecksum)
        ));
    }

    #[test]
    fn flipped_byte_is_corrupt() {
        let (problem, mut cfg) = setup();
        cfg.target_fitness = None;
        cfg.max_generations = 1;
        let engine = Engine::new(cfg, &problem, ParallelWidth::fixed(1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.tgp");
        checkpoint_save(&engine.checkpoint(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            checkpoint_load(&path),
            Err(Error::CorruptChecksum)
        ));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (problem, mut cfg) = setup();
        cfg.target_fitness = None;
        cfg.max_generations = 8;
        let width = || ParallelWidth::fixed(2).unwrap();

        let mut straight = Engine::new(cfg.clone(), &problem, width()).unwrap();
        straight.run().unwrap();
        let full = straight.result().unwrap();

        let mut first_half = Engine::new(cfg, &problem, width()).unwrap();
        for _ in 0..4 {
            first_half.step().unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mid.tgp");
        checkpoint_save(&first_half.checkpoint(), &path).unwrap();

        let state = checkpoint_load(&path).unwrap();
        let mut resumed = Engine::resume(state, &problem, width()).unwrap();
        resumed.run().unwrap();
        let spliced = resumed.result().unwrap();

        assert_eq!(full.redacted(), spliced.redacted());
    }
}
