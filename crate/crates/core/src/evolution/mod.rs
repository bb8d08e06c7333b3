//! Mutation, crossover, distance, speciation and the generation loop.

pub mod crossover;
pub mod distance;
pub mod mutation;
pub mod reproduce;
pub mod species;
pub mod step;

pub use crossover::crossover;
pub use distance::{distance, distance_indexed, GeneIndex};
pub use mutation::{mutate, mutate_with_key, NodeKeyAllocator};
pub use reproduce::{rank_members, reproduce};
pub use species::{allocate_spawns, speciate, update_stagnation, SpeciesKeys, SpeciesState};
pub use step::{EvolutionError, GenerationStats, NeatState, RunOutcome};
