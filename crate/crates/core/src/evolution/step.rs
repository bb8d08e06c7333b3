//! The generation loop: evaluate, prune stagnant species, allocate spawns,
//! reproduce, re-speciate.

use std::time::Instant;

use thiserror::Error;

use super::mutation::NodeKeyAllocator;
use super::reproduce::reproduce;
use super::species::{allocate_spawns, fitness_key, speciate, update_stagnation, SpeciesKeys, SpeciesState};
use crate::config::{ConfigError, NeatConfig};
use crate::genome::{GenomeError, GenomeTensors, PopulationTensors};
use crate::inference::{population_transform, FunctionRegistry, InferenceError};
use crate::problems::{evaluate_population, EvalMode, Problem, ProblemError};
use crate::rng::{stage, RngStream};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("population has not been evaluated")]
    NotEvaluated,
}

/// One row of the per-generation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub species_count: usize,
    pub mean_live_nodes: f64,
    pub mean_live_conns: f64,
    pub elapsed_seconds: f64,
}

impl GenerationStats {
    pub const CSV_HEADER: &'static str =
        "generation,best_fitness,mean_fitness,species_count,mean_live_nodes,mean_live_conns,elapsed_seconds";

    /// CSV row. Without `wall_time` the elapsed column is left empty so that
    /// the file is a pure function of config and seed.
    pub fn csv_row(&self, wall_time: bool) -> String {
        let elapsed = if wall_time {
            format!("{:.6}", self.elapsed_seconds)
        } else {
            String::new()
        };
        format!(
            "{},{},{},{},{},{},{}",
            self.generation,
            self.best_fitness,
            self.mean_fitness,
            self.species_count,
            self.mean_live_nodes,
            self.mean_live_conns,
            elapsed
        )
    }
}

/// Complete evolutionary state between generations.
#[derive(Debug, Clone, PartialEq)]
pub struct NeatState {
    pub config: NeatConfig,
    /// Index of the population currently held (0 for the initial one).
    pub generation: usize,
    pub population: PopulationTensors,
    pub species: Vec<SpeciesState>,
    pub allocator: NodeKeyAllocator,
    pub species_keys: SpeciesKeys,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best_genome: GenomeTensors,
    pub best_fitness: f64,
    pub target_reached: bool,
    pub generations: usize,
}

impl NeatState {
    /// Fresh random population, speciated. Genome `i` is initialised from the
    /// stream `seed / 0 / INIT / i`.
    pub fn new(config: NeatConfig) -> Result<Self, EvolutionError> {
        config.validate()?;
        let root = RngStream::new(config.seed);
        let genomes = (0..config.pop_size)
            .map(|i| GenomeTensors::init(&config, &root.descend(&[0, stage::INIT, i as u64])))
            .collect::<Result<Vec<_>, _>>()?;
        let mut population = PopulationTensors::from_genomes(&genomes)?;
        let mut species_keys = SpeciesKeys::new();
        let species = speciate(&mut population, Vec::new(), &config, &mut species_keys);
        Ok(Self {
            allocator: NodeKeyAllocator::new(config.inputs, config.outputs),
            config,
            generation: 0,
            population,
            species,
            species_keys,
        })
    }

    pub fn is_evaluated(&self) -> bool {
        self.population.fitness.iter().all(|f| !f.is_nan())
    }

    /// Scores the current population and returns its statistics (with the
    /// evaluation time in `elapsed_seconds`).
    pub fn evaluate(&mut self, problem: &dyn Problem, mode: EvalMode) -> Result<GenerationStats, EvolutionError> {
        let start = Instant::now();
        let registry = FunctionRegistry::default();
        let nets = population_transform(&self.population)?;
        let fitness = evaluate_population(problem, &nets, &registry, &RngStream::new(self.config.seed), mode)?;
        self.population.fitness = fitness;
        let mut stats = self.stats();
        stats.elapsed_seconds = start.elapsed().as_secs_f64();
        Ok(stats)
    }

    /// Statistics of the current (evaluated) population.
    pub fn stats(&self) -> GenerationStats {
        let f = &self.population.fitness;
        let (nodes, conns) = self.population.mean_live_counts();
        GenerationStats {
            generation: self.generation,
            best_fitness: f.iter().copied().map(fitness_key).fold(f64::NEG_INFINITY, f64::max),
            mean_fitness: f.iter().sum::<f64>() / f.len() as f64,
            species_count: self.species.len(),
            mean_live_nodes: nodes,
            mean_live_conns: conns,
            elapsed_seconds: 0.0,
        }
    }

    /// Index of the best genome (ties to the lower index).
    pub fn best_index(&self) -> usize {
        let f = &self.population.fitness;
        (0..f.len()).fold(0, |b, i| if fitness_key(f[i]) > fitness_key(f[b]) { i } else { b })
    }

    /// Replaces the evaluated population by its offspring and re-speciates.
    pub fn advance(&mut self) -> Result<(), EvolutionError> {
        if !self.is_evaluated() {
            return Err(EvolutionError::NotEvaluated);
        }
        let fitness = self.population.fitness.clone();
        let species = std::mem::take(&mut self.species);
        let mut species = update_stagnation(species, &fitness, &self.config);
        allocate_spawns(&mut species, &fitness, &self.config);
        let root = RngStream::new(self.config.seed).child(self.generation as u64 + 1);
        let mut next = reproduce(&self.population, &species, &self.config, &root, &mut self.allocator)?;
        // survivors keep their history; membership is rebuilt from scratch
        self.species = speciate(&mut next, species, &self.config, &mut self.species_keys);
        self.population = next;
        self.generation += 1;
        Ok(())
    }

    /// Evaluates and advances until `fitness_target` is reached or
    /// `generation_limit` populations have been evaluated. `on_generation` is
    /// called once per evaluated generation with its timing filled in.
    ///
    /// A state whose population is already evaluated (e.g. restored from a
    /// checkpoint) is advanced first.
    pub fn run(
        &mut self,
        problem: &dyn Problem,
        mode: EvalMode,
        mut on_generation: impl FnMut(&GenerationStats, &NeatState),
    ) -> Result<RunOutcome, EvolutionError> {
        let mut target_reached = false;
        if self.is_evaluated() {
            target_reached = self.stats().best_fitness >= self.config.fitness_target;
            if !target_reached && self.generation + 1 < self.config.generation_limit {
                self.advance()?;
            }
        }
        while !target_reached && !self.is_evaluated() {
            let start = Instant::now();
            let mut stats = self.evaluate(problem, mode)?;
            target_reached = stats.best_fitness >= self.config.fitness_target;
            let last = self.generation + 1 >= self.config.generation_limit;
            if !target_reached && !last {
                self.advance()?;
            }
            stats.elapsed_seconds = start.elapsed().as_secs_f64();
            on_generation(&stats, self);
        }
        let best = self.best_index();
        Ok(RunOutcome {
            best_genome: self.population.genome(best),
            best_fitness: self.population.fitness[best],
            target_reached,
            generations: self.generation + 1,
        })
    }
}
