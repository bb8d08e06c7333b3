use ndarray::{s, Array3, Axis};

use super::{GenomeError, GenomeTensors, CONN_COLS, NODE_COLS};

/// The whole population stacked along a leading axis.
#[derive(Debug, Clone)]
pub struct PopulationTensors {
    nodes: Array3<f64>,
    conns: Array3<f64>,
    num_inputs: usize,
    num_outputs: usize,
    /// Species label per genome; `None` until the population is speciated.
    pub species_id: Vec<Option<u64>>,
    /// NaN until evaluated.
    pub fitness: Vec<f64>,
}

impl PartialEq for PopulationTensors {
    fn eq(&self, other: &Self) -> bool {
        let bits = |a: &Array3<f64>, b: &Array3<f64>| {
            a.dim() == b.dim() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
        };
        self.num_inputs == other.num_inputs
            && self.num_outputs == other.num_outputs
            && bits(&self.nodes, &other.nodes)
            && bits(&self.conns, &other.conns)
            && self.species_id == other.species_id
            && self
                .fitness
                .iter()
                .zip(&other.fitness)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl PopulationTensors {
    pub fn from_genomes(genomes: &[GenomeTensors]) -> Result<Self, GenomeError> {
        let first = genomes
            .first()
            .ok_or_else(|| GenomeError::ShapeMismatch("empty population".into()))?;
        let (p, mn, mc) = (genomes.len(), first.max_nodes(), first.max_conns());
        let mut nodes = Array3::from_elem((p, mn, NODE_COLS), f64::NAN);
        let mut conns = Array3::from_elem((p, mc, CONN_COLS), f64::NAN);
        for (i, g) in genomes.iter().enumerate() {
            first.same_shape(g)?;
            nodes.index_axis_mut(Axis(0), i).assign(g.nodes());
            conns.index_axis_mut(Axis(0), i).assign(g.conns());
        }
        Ok(Self {
            nodes,
            conns,
            num_inputs: first.num_inputs(),
            num_outputs: first.num_outputs(),
            species_id: vec![None; p],
            fitness: vec![f64::NAN; p],
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len_of(Axis(0))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> &Array3<f64> {
        &self.nodes
    }

    pub fn conns(&self) -> &Array3<f64> {
        &self.conns
    }

    /// Copy of slice `i` as a standalone genome.
    pub fn genome(&self, i: usize) -> GenomeTensors {
        GenomeTensors {
            nodes: self.nodes.slice(s![i, .., ..]).to_owned(),
            conns: self.conns.slice(s![i, .., ..]).to_owned(),
            num_inputs: self.num_inputs,
            num_outputs: self.num_outputs,
        }
    }

    pub fn genomes(&self) -> Vec<GenomeTensors> {
        (0..self.len()).map(|i| self.genome(i)).collect()
    }

    /// Mean live node and connection counts across the population.
    pub fn mean_live_counts(&self) -> (f64, f64) {
        let p = self.len() as f64;
        let live = |t: &Array3<f64>| t.index_axis(ndarray::Axis(2), 0).iter().filter(|x| !x.is_nan()).count() as f64;
        (live(&self.nodes) / p, live(&self.conns) / p)
    }
}
