//! Speciation, stagnation and spawn allocation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{distance_indexed, GeneIndex};
use crate::config::NeatConfig;
use crate::genome::{GenomeTensors, PopulationTensors};

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesState {
    pub species_key: u64,
    pub representative: GenomeTensors,
    pub member_indices: Vec<usize>,
    /// Species fitness (max over members) for every generation it was scored.
    pub best_fitness_history: Vec<f64>,
    pub stagnation_counter: usize,
    pub spawn_count: usize,
}

/// Source of fresh species keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpeciesKeys {
    next: u64,
}

impl SpeciesKeys {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn take(&mut self) -> u64 {
        let k = self.next;
        self.next += 1;
        k
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// Fitness with NaN ordered below everything else.
pub(crate) fn fitness_key(f: f64) -> f64 {
    if f.is_nan() {
        f64::NEG_INFINITY
    } else {
        f
    }
}

/// Assigns every genome to a species.
///
/// Surviving species keep their representative. Each genome (in index order)
/// joins the first species, by ascending key, within
/// `compatibility_threshold`; otherwise it founds a new species while fewer
/// than `max_species` exist, or else joins the nearest one. Afterwards each
/// species' representative becomes its member closest to the old one, and
/// empty species are dropped.
pub fn speciate(
    pop: &mut PopulationTensors,
    species: Vec<SpeciesState>,
    config: &NeatConfig,
    keys: &mut SpeciesKeys,
) -> Vec<SpeciesState> {
    let genomes = pop.genomes();
    let indices: Vec<GeneIndex> = genomes.par_iter().map(GeneIndex::new).collect();

    let mut species = species;
    species.sort_by_key(|s| s.species_key);
    let mut reps: Vec<(GenomeTensors, GeneIndex)> = species
        .iter()
        .map(|s| (s.representative.clone(), GeneIndex::new(&s.representative)))
        .collect();

    // distance table against the surviving representatives
    let existing: Vec<Vec<f64>> = genomes
        .par_iter()
        .zip(indices.par_iter())
        .map(|(g, gi)| {
            reps.iter()
                .map(|(r, ri)| distance_indexed(g, gi, r, ri, config))
                .collect()
        })
        .collect();

    let mut founded: Vec<SpeciesState> = Vec::new();
    let mut assigned = vec![(0usize, 0.0f64); genomes.len()];
    for (i, g) in genomes.iter().enumerate() {
        let mut dists = existing[i].clone();
        for (r, ri) in &reps[species.len()..] {
            dists.push(distance_indexed(g, &indices[i], r, ri, config));
        }
        let slot = if let Some(s) = dists.iter().position(|&d| d <= config.compatibility_threshold) {
            s
        } else if reps.len() < config.max_species {
            founded.push(SpeciesState {
                species_key: keys.take(),
                representative: g.clone(),
                member_indices: Vec::new(),
                best_fitness_history: Vec::new(),
                stagnation_counter: 0,
                spawn_count: 0,
            });
            reps.push((g.clone(), indices[i].clone()));
            dists.push(0.0);
            reps.len() - 1
        } else {
            // nearest; ties go to the lower key
            dists
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (s, &d)| if d < best.1 { (s, d) } else { best },
                )
                .0
        };
        assigned[i] = (slot, dists[slot]);
    }

    species.extend(founded);
    for s in &mut species {
        s.member_indices.clear();
    }
    for (i, &(slot, _)) in assigned.iter().enumerate() {
        species[slot].member_indices.push(i);
    }
    for s in &mut species {
        let closest = s
            .member_indices
            .iter()
            .copied()
            .fold(None::<(usize, f64)>, |best, i| match best {
                Some((_, d)) if d <= assigned[i].1 => best,
                _ => Some((i, assigned[i].1)),
            });
        if let Some((i, _)) = closest {
            s.representative = genomes[i].clone();
        }
    }
    species.retain(|s| !s.member_indices.is_empty());
    for s in &species {
        for &i in &s.member_indices {
            pop.species_id[i] = Some(s.species_key);
        }
    }
    species
}

/// Records this generation's species fitness (max over members), updates
/// stagnation counters, and removes species stagnant for `max_stagnation`
/// generations unless they rank among the top `species_elitism`.
pub fn update_stagnation(mut species: Vec<SpeciesState>, fitness: &[f64], config: &NeatConfig) -> Vec<SpeciesState> {
    for s in &mut species {
        let current = s
            .member_indices
            .iter()
            .map(|&i| fitness_key(fitness[i]))
            .fold(f64::NEG_INFINITY, f64::max);
        let previous = s.best_fitness_history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if s.best_fitness_history.is_empty() || current > previous {
            s.stagnation_counter = 0;
        } else {
            s.stagnation_counter += 1;
        }
        s.best_fitness_history.push(current);
    }
    let mut ranked: Vec<usize> = (0..species.len()).collect();
    ranked.sort_by(|&a, &b| {
        let fa = *species[a].best_fitness_history.last().unwrap();
        let fb = *species[b].best_fitness_history.last().unwrap();
        fb.total_cmp(&fa)
            .then(species[a].species_key.cmp(&species[b].species_key))
    });
    let mut protected = vec![false; species.len()];
    for &i in ranked.iter().take(config.species_elitism) {
        protected[i] = true;
    }
    let keep: Vec<bool> = species
        .iter()
        .zip(&protected)
        .map(|(s, &p)| p || s.stagnation_counter < config.max_stagnation)
        .collect();
    if !keep.iter().any(|&k| k) {
        // species_elitism = 0 and everything stagnated: keep the best one
        protected[ranked[0]] = true;
    }
    species
        .into_iter()
        .zip(keep.into_iter().zip(protected))
        .filter_map(|(s, (k, p))| (k || p).then_some(s))
        .collect()
}

/// Sets `spawn_count` on every species so the counts sum to `pop_size`.
///
/// Targets are proportional to min-shifted mean member fitness. Each species
/// moves toward its target by at most `spawn_number_change_rate * size + 1`
/// and keeps at least one slot; the residual lands on the largest species.
pub fn allocate_spawns(species: &mut [SpeciesState], fitness: &[f64], config: &NeatConfig) {
    const EPS: f64 = 1e-8;
    if species.is_empty() {
        return;
    }
    let p = config.pop_size;
    let means: Vec<f64> = species
        .iter()
        .map(|s| {
            let sum: f64 = s.member_indices.iter().map(|&i| fitness_key(fitness[i])).sum();
            sum / s.member_indices.len().max(1) as f64
        })
        .collect();
    let lowest = means.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = means
        .iter()
        .map(|&m| {
            let x = m - lowest;
            if x.is_finite() {
                x + EPS
            } else {
                EPS
            }
        })
        .collect();
    let total: f64 = shifted.iter().sum();
    let r = config.spawn_number_change_rate;
    let mut sizes: Vec<usize> = species
        .iter()
        .zip(&shifted)
        .map(|(s, &w)| {
            let target = w / total * p as f64;
            let old = s.member_indices.len() as f64;
            let limit = r * old + 1.0;
            let step = (target - old).clamp(-limit, limit);
            ((old + step).round().max(1.0)) as usize
        })
        .collect();

    let mut sum: usize = sizes.iter().sum();
    while sum != p {
        let largest = (0..sizes.len())
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .unwrap();
        if sum < p {
            sizes[largest] += p - sum;
        } else {
            let cut = (sum - p).min(sizes[largest] - 1);
            if cut == 0 {
                break;
            }
            sizes[largest] -= cut;
        }
        sum = sizes.iter().sum();
    }
    for (s, n) in species.iter_mut().zip(sizes) {
        s.spawn_count = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn cfg() -> NeatConfig {
        NeatConfig {
            inputs: 2,
            outputs: 1,
            max_nodes: 6,
            max_conns: 8,
            pop_size: 4,
            species_elitism: 1,
            ..NeatConfig::default()
        }
    }

    fn species_with(key: u64, members: Vec<usize>, rep: GenomeTensors) -> SpeciesState {
        SpeciesState {
            species_key: key,
            representative: rep,
            member_indices: members,
            best_fitness_history: Vec::new(),
            stagnation_counter: 0,
            spawn_count: 0,
        }
    }

    fn pop(n: usize, c: &NeatConfig) -> PopulationTensors {
        let gs: Vec<_> = (0..n)
            .map(|i| GenomeTensors::init(c, &RngStream::new(i as u64)).unwrap())
            .collect();
        PopulationTensors::from_genomes(&gs).unwrap()
    }

    #[test]
    fn everyone_within_threshold() {
        let mut c = cfg();
        c.compatibility_threshold = 100.0;
        let mut p = pop(4, &c);
        let s = speciate(&mut p, Vec::new(), &c, &mut SpeciesKeys::new());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].member_indices, vec![0, 1, 2, 3]);
        assert!(p.species_id.iter().all(|&k| k == Some(0)));
    }

    #[test]
    fn zero_threshold_gives_singletons() {
        let mut c = cfg();
        c.compatibility_threshold = 0.0;
        c.max_species = 4;
        let mut p = pop(4, &c);
        let s = speciate(&mut p, Vec::new(), &c, &mut SpeciesKeys::new());
        assert_eq!(s.len(), 4);
        for (k, sp) in s.iter().enumerate() {
            assert_eq!(sp.member_indices, vec![k]);
            assert_eq!(sp.representative, p.genome(k));
        }
    }

    #[test]
    fn capped_species_count_joins_nearest() {
        let mut c = cfg();
        c.compatibility_threshold = 0.0;
        c.max_species = 2;
        c.pop_size = 3;
        c.species_elitism = 0;
        let base = GenomeTensors::init(&c, &RngStream::new(0)).unwrap();
        // g1 differs a little from g0, g2 a lot
        let g0 = base.clone();
        let g2 = base.remove_conn(0, 2).unwrap().remove_conn(1, 2).unwrap();
        let g1 = base.remove_conn(0, 2).unwrap();
        let mut p = PopulationTensors::from_genomes(&[g0.clone(), g2.clone(), g1.clone()]).unwrap();
        let s = speciate(&mut p, Vec::new(), &c, &mut SpeciesKeys::new());
        // oracle: exhaustive distance table
        let d10 = super::super::distance::distance(&g1, &g0, &c).unwrap();
        let d12 = super::super::distance::distance(&g1, &g2, &c).unwrap();
        let nearest = if d10 <= d12 { 0 } else { 1 };
        assert_eq!(s.len(), 2);
        assert!(s[nearest].member_indices.contains(&2));
        assert_eq!(p.species_id[2], Some(s[nearest].species_key));
    }

    #[test]
    fn existing_representative_is_kept_first() {
        let mut c = cfg();
        c.compatibility_threshold = 100.0;
        let mut p = pop(3, &c);
        let old = species_with(7, vec![], p.genome(2));
        let mut keys = SpeciesKeys::new();
        let s = speciate(&mut p, vec![old], &c, &mut keys);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].species_key, 7);
        // genome 2 is identical to the old representative
        assert_eq!(s[0].representative, p.genome(2));
        assert_eq!(keys.peek(), 0);
    }

    #[test]
    fn stagnation_rules() {
        let c = NeatConfig {
            max_stagnation: 3,
            species_elitism: 2,
            ..cfg()
        };
        let g = GenomeTensors::init(&c, &RngStream::new(0)).unwrap();
        // single species, never improves, survives through elitism
        let mut s = vec![species_with(0, vec![0], g.clone())];
        for _ in 0..100 {
            s = update_stagnation(s, &[1.0], &c);
        }
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].stagnation_counter, 99);

        // tie does not count as improvement
        let mut t = vec![species_with(0, vec![0], g.clone())];
        t = update_stagnation(t, &[1.0], &c);
        t = update_stagnation(t, &[1.0], &c);
        assert_eq!(t[0].stagnation_counter, 1);
        t = update_stagnation(t, &[1.5], &c);
        assert_eq!(t[0].stagnation_counter, 0);

        // three species, the stagnant one ranked third is removed
        let mut three = vec![
            species_with(0, vec![0], g.clone()),
            species_with(1, vec![1], g.clone()),
            species_with(2, vec![2], g.clone()),
        ];
        three[2].best_fitness_history = vec![5.0];
        three[2].stagnation_counter = 5;
        let out = update_stagnation(three, &[3.0, 2.0, 1.0], &c);
        assert_eq!(out.iter().map(|s| s.species_key).collect::<Vec<_>>(), vec![0, 1]);
    }

    fn sized(sizes: &[usize]) -> (Vec<SpeciesState>, usize) {
        let g = GenomeTensors::empty(1, 1, 2, 1);
        let mut next = 0;
        let s = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let m = (next..next + n).collect();
                next += n;
                species_with(k as u64, m, g.clone())
            })
            .collect();
        (s, next)
    }

    #[test]
    fn single_species_takes_everything() {
        let (mut s, p) = sized(&[7]);
        let c = NeatConfig { pop_size: 10, ..cfg() };
        allocate_spawns(&mut s, &vec![0.0; p], &c);
        assert_eq!(s[0].spawn_count, 10);
    }

    #[test]
    fn equal_species_split_evenly() {
        let (mut s, p) = sized(&[5, 5]);
        let c = NeatConfig { pop_size: 10, ..cfg() };
        allocate_spawns(&mut s, &vec![2.0; p], &c);
        assert_eq!((s[0].spawn_count, s[1].spawn_count), (5, 5));
    }

    #[test]
    fn clamped_move_toward_equal_share() {
        // Scalar oracle: targets (50, 50); small species moves by at most
        // 0.5 * 10 + 1 = 6 -> 16; large moves to its target 50; the residual
        // 34 goes to the largest species.
        let oracle = |old: [f64; 2], target: [f64; 2], r: f64, p: usize| {
            let mut n: Vec<usize> = old
                .iter()
                .zip(target)
                .map(|(&o, t)| (o + (t - o).clamp(-r * o - 1.0, r * o + 1.0)).round().max(1.0) as usize)
                .collect();
            let sum: usize = n.iter().sum();
            let big = if n[0] >= n[1] { 0 } else { 1 };
            n[big] = n[big] + p - sum;
            n
        };
        let expected = oracle([90.0, 10.0], [50.0, 50.0], 0.5, 100);
        assert_eq!(expected, vec![84, 16]);
        let (mut s, p) = sized(&[90, 10]);
        let c = NeatConfig {
            pop_size: 100,
            spawn_number_change_rate: 0.5,
            ..cfg()
        };
        allocate_spawns(&mut s, &vec![1.0; p], &c);
        assert_eq!(vec![s[0].spawn_count, s[1].spawn_count], expected);
    }

    #[test]
    fn spawns_always_sum_to_pop_size() {
        use rand::Rng;
        let mut rng = RngStream::new(5).rng();
        for _ in 0..300 {
            let k = rng.gen_range(1..6);
            let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(1..30)).collect();
            let (mut s, p) = sized(&sizes);
            let fit: Vec<f64> = (0..p).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let c = NeatConfig {
                pop_size: rng.gen_range(k..80),
                spawn_number_change_rate: rng.gen_range(0.0..1.0),
                ..cfg()
            };
            allocate_spawns(&mut s, &fit, &c);
            assert_eq!(s.iter().map(|x| x.spawn_count).sum::<usize>(), c.pop_size);
            assert!(s.iter().all(|x| x.spawn_count >= 1));
        }
    }
}
