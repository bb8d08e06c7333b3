//! NEAT with genomes stored as fixed-shape, NaN-padded tensors.
//!
//! Every genome in a population has the same node and connection tensor
//! shape, so mutation, distance, speciation and inference are uniform
//! per-genome maps that run data-parallel across the population.

pub mod config;
pub mod evolution;
pub mod genome;
pub mod inference;
pub mod oracle;
pub mod problems;
pub mod rng;

pub use config::{ConfigError, ExperimentConfig, NeatConfig, NetworkType, NumericAttrConfig};
pub use evolution::{EvolutionError, GenerationStats, NeatState, RunOutcome};
pub use genome::{ConnRow, GenomeError, GenomeTensors, NodeKey, NodeRow, PopulationTensors};
pub use inference::{transform, FunctionRegistry, InferenceError, TransformedNetwork};
pub use problems::{EvalMode, Problem, ProblemKind};
pub use rng::RngStream;
