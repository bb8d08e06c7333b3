//! Run state on disk.
//!
//! Genomes are stored in the genome text format, whose shortest-round-trip
//! number formatting is exact. Fitness values travel as raw bit patterns
//! because JSON has no NaN or infinity.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use tneat::evolution::{NeatState, NodeKeyAllocator, SpeciesKeys, SpeciesState};
use tneat::genome::{parse_genome, serialize_genome, PopulationTensors};
use tneat::ExperimentConfig;

const FORMAT: &str = "tneat-checkpoint 1";

#[derive(Debug, Serialize, Deserialize)]
struct SpeciesRecord {
    key: u64,
    representative: String,
    members: Vec<usize>,
    history_bits: Vec<u64>,
    stagnation: usize,
    spawn: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    /// Config text the run was started from, plus the effective seed.
    pub config_text: String,
    pub seed: u64,
    generation: usize,
    genomes: Vec<String>,
    species_id: Vec<Option<u64>>,
    fitness_bits: Vec<u64>,
    species: Vec<SpeciesRecord>,
    allocator: NodeKeyAllocator,
    species_keys: SpeciesKeys,
}

impl Checkpoint {
    pub fn capture(state: &NeatState, config_text: &str) -> Self {
        let pop = &state.population;
        Self {
            format: FORMAT.to_string(),
            config_text: config_text.to_string(),
            seed: state.config.seed,
            generation: state.generation,
            genomes: pop.genomes().iter().map(serialize_genome).collect(),
            species_id: pop.species_id.clone(),
            fitness_bits: pop.fitness.iter().map(|f| f.to_bits()).collect(),
            species: state
                .species
                .iter()
                .map(|s| SpeciesRecord {
                    key: s.species_key,
                    representative: serialize_genome(&s.representative),
                    members: s.member_indices.clone(),
                    history_bits: s.best_fitness_history.iter().map(|f| f.to_bits()).collect(),
                    stagnation: s.stagnation_counter,
                    spawn: s.spawn_count,
                })
                .collect(),
            allocator: state.allocator.clone(),
            species_keys: state.species_keys,
        }
    }

    /// Rebuilds the state under `experiment`, which must agree with the
    /// checkpointed run on everything except the stopping criteria.
    pub fn restore(self, experiment: &ExperimentConfig) -> Result<NeatState> {
        if self.format != FORMAT {
            bail!("unsupported checkpoint format {:?}", self.format);
        }
        let mut saved = ExperimentConfig::parse(&self.config_text).context("checkpointed config")?;
        saved.neat.seed = self.seed;
        saved.neat.generation_limit = experiment.neat.generation_limit;
        saved.neat.fitness_target = experiment.neat.fitness_target;
        if &saved != experiment {
            bail!("config differs from the checkpointed run in more than generation_limit/fitness_target");
        }
        let genomes = self
            .genomes
            .iter()
            .enumerate()
            .map(|(i, t)| parse_genome(t).with_context(|| format!("checkpoint genome {i}")))
            .collect::<Result<Vec<_>>>()?;
        let mut population = PopulationTensors::from_genomes(&genomes)?;
        if self.species_id.len() != genomes.len() || self.fitness_bits.len() != genomes.len() {
            bail!("checkpoint population bookkeeping has the wrong length");
        }
        population.species_id = self.species_id;
        population.fitness = self.fitness_bits.into_iter().map(f64::from_bits).collect();
        let species = self
            .species
            .into_iter()
            .map(|s| {
                Ok(SpeciesState {
                    species_key: s.key,
                    representative: parse_genome(&s.representative).context("species representative")?,
                    member_indices: s.members,
                    best_fitness_history: s.history_bits.into_iter().map(f64::from_bits).collect(),
                    stagnation_counter: s.stagnation,
                    spawn_count: s.spawn,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NeatState {
            config: experiment.neat.clone(),
            generation: self.generation,
            population,
            species,
            allocator: self.allocator,
            species_keys: self.species_keys,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
