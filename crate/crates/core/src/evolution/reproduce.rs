//! Per-species reproduction into a fresh population.

use rand::Rng;
use rayon::prelude::*;

use super::crossover::crossover;
use super::mutation::{mutate_with_key, NodeKeyAllocator};
use super::species::{fitness_key, SpeciesState};
use crate::config::NeatConfig;
use crate::genome::{GenomeError, GenomeTensors, PopulationTensors};
use crate::rng::{stage, RngStream};

/// What fills one slot of the next generation.
#[derive(Debug, Clone)]
enum Slot {
    Elite(usize),
    /// Child of two parents drawn from `pool` (population indices, best first).
    Child {
        pool: Vec<usize>,
    },
}

/// Members of a species sorted by fitness, best first; ties go to the lower
/// population index.
pub fn rank_members(members: &[usize], fitness: &[f64]) -> Vec<usize> {
    let mut m = members.to_vec();
    m.sort_by(|&a, &b| {
        fitness_key(fitness[b])
            .total_cmp(&fitness_key(fitness[a]))
            .then(a.cmp(&b))
    });
    m
}

fn plan(species: &[SpeciesState], fitness: &[f64], config: &NeatConfig) -> Vec<Slot> {
    let mut slots = Vec::with_capacity(config.pop_size);
    for s in species {
        let ranked = rank_members(&s.member_indices, fitness);
        let elites = config.genome_elitism.min(s.spawn_count).min(ranked.len());
        slots.extend(ranked[..elites].iter().map(|&i| Slot::Elite(i)));
        let survivors = ((config.survival_threshold * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len());
        let pool = ranked[..survivors].to_vec();
        for _ in elites..s.spawn_count {
            slots.push(Slot::Child { pool: pool.clone() });
        }
    }
    slots
}

/// Builds the next population from the allocated spawn counts.
///
/// Slot `o` of the output draws its randomness from the stream
/// `root / REPRODUCE / o` and, if its mutation splits a connection, uses
/// node key `base + o` where `base` is reserved from `allocator` up front.
/// Offspring are therefore independent of evaluation order and thread count.
pub fn reproduce(
    pop: &PopulationTensors,
    species: &[SpeciesState],
    config: &NeatConfig,
    root: &RngStream,
    allocator: &mut NodeKeyAllocator,
) -> Result<PopulationTensors, GenomeError> {
    let fitness = &pop.fitness;
    let mut slots = plan(species, fitness, config);
    // spawn counts sum to pop_size except in degenerate cases (more species
    // than slots); pad with copies of the overall best or truncate
    if slots.len() > config.pop_size {
        slots.truncate(config.pop_size);
    }
    if slots.len() < config.pop_size {
        let all: Vec<usize> = (0..pop.len()).collect();
        let ranked = rank_members(&all, fitness);
        while slots.len() < config.pop_size {
            slots.push(Slot::Child { pool: vec![ranked[0]] });
        }
    }
    let base = allocator.reserve(config.pop_size);

    let offspring: Vec<GenomeTensors> = slots
        .par_iter()
        .enumerate()
        .map(|(o, slot)| match slot {
            Slot::Elite(i) => Ok(pop.genome(*i)),
            Slot::Child { pool } => {
                let stream = root.descend(&[stage::REPRODUCE, o as u64]);
                let mut rng = stream.rng();
                let a = pool[rng.gen_range(0..pool.len())];
                let b = pool[rng.gen_range(0..pool.len())];
                // pool is sorted best first, so the lower position is fitter
                let (fit, less) = if pool.iter().position(|&x| x == a) <= pool.iter().position(|&x| x == b) {
                    (a, b)
                } else {
                    (b, a)
                };
                let child = crossover(&pop.genome(fit), &pop.genome(less), &stream.child(stage::CROSSOVER))?;
                let key = base + o as u64;
                Ok(mutate_with_key(&child, config, &stream.child(stage::MUTATE), key).0)
            }
        })
        .collect::<Result<_, GenomeError>>()?;
    PopulationTensors::from_genomes(&offspring)
}
