use std::collections::HashSet;

use tneat::evolution::NeatState;
use tneat::oracle::fuzz::{check_invariants, fuzz_config};
use tneat::problems::{EvalMode, ProblemKind};
use tneat::NeatConfig;

fn small(seed: u64) -> NeatConfig {
    NeatConfig {
        seed,
        pop_size: 24,
        generation_limit: 40,
        max_species: 4,
        compatibility_threshold: 0.6,
        ..fuzz_config(2, 1, 14, 28)
    }
}

fn run(config: NeatConfig) -> (NeatState, Vec<String>) {
    let problem = ProblemKind::Xor.build();
    let mut state = NeatState::new(config).unwrap();
    let mut rows = Vec::new();
    state
        .run(problem.as_ref(), EvalMode::Batched, |s, _| rows.push(s.csv_row(false)))
        .unwrap();
    (state, rows)
}

#[test]
fn every_generation_upholds_population_invariants() {
    for seed in 0..5 {
        let config = small(seed);
        let problem = ProblemKind::Xor.build();
        let mut state = NeatState::new(config.clone()).unwrap();
        let mut last_best = f64::NEG_INFINITY;
        for _ in 0..config.generation_limit {
            let stats = state.evaluate(problem.as_ref(), EvalMode::Batched).unwrap();
            assert!(stats.best_fitness >= last_best, "best fitness decreased");
            last_best = stats.best_fitness;

            let best = state.best_index();
            let best_genome = state.population.genome(best);
            state.advance().unwrap();

            let pop = &state.population;
            assert_eq!(pop.len(), config.pop_size);
            assert!(state.species.len() <= config.max_species);
            // the best genome survives bitwise as an elite
            assert!(pop.genomes().contains(&best_genome));
            let mut seen = HashSet::new();
            for s in &state.species {
                for &i in &s.member_indices {
                    assert!(seen.insert(i));
                    assert_eq!(pop.species_id[i], Some(s.species_key));
                }
            }
            assert_eq!(seen.len(), pop.len());
            for g in pop.genomes() {
                check_invariants(&g, config.max_nodes, config.max_conns).unwrap();
            }
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let (a, rows_a) = run(small(7));
    let (b, rows_b) = run(small(7));
    assert_eq!(rows_a, rows_b);
    assert_eq!(a, b);
    let (_, rows_c) = run(small(8));
    assert_ne!(rows_a, rows_c);
}

#[test]
fn thread_count_does_not_change_trajectory() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    for problem in [ProblemKind::Xor, ProblemKind::CartPole] {
        let (i, o) = problem.shape();
        let config = NeatConfig {
            inputs: i,
            outputs: o,
            generation_limit: 15,
            ..small(3)
        };
        let go = || {
            let p = problem.build();
            let mut s = NeatState::new(config.clone()).unwrap();
            let mut rows = Vec::new();
            s.run(p.as_ref(), EvalMode::Batched, |st, _| rows.push(st.csv_row(false)))
                .unwrap();
            (s, rows)
        };
        let (a, ra) = one.install(go);
        let (b, rb) = four.install(go);
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }
}

#[test]
fn keys_are_never_reissued() {
    let (state, _) = run(small(1));
    // every hidden key in the final population is below the allocator head
    for g in state.population.genomes() {
        for n in g.live_nodes() {
            assert!(n.key < state.allocator.peek());
        }
    }
}
