//! Two-phase feedforward inference.
//!
//! [`transform`] turns a genome into a topological node order plus a dense
//! `max_nodes x max_nodes` weight tensor (NaN where no enabled connection
//! exists). [`TransformedNetwork::forward`] then sweeps the order once,
//! computing each node as `act(bias + response * agg(w * v))` over the
//! non-NaN entries of its column. A network is transformed once and can be
//! evaluated any number of times.

mod dot;
pub mod registry;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use thiserror::Error;

use crate::genome::{conn_col, node_col, GenomeTensors, PopulationTensors};

pub use dot::genome_to_dot;
pub use registry::{Activation, Aggregation, FunctionRegistry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("enabled connections contain a cycle ({unprocessed} live nodes could not be ordered)")]
    CycleDetected { unprocessed: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown function code: {0}")]
    UnknownFunction(String),
    #[error("genome {index}: {source}")]
    Genome {
        index: usize,
        #[source]
        source: Box<InferenceError>,
    },
}

/// Inference-ready form of one genome.
#[derive(Debug, Clone)]
pub struct TransformedNetwork {
    nodes: Array2<f64>,
    /// Node row indices in topological order, NaN-padded to `max_nodes`.
    order: Vec<f64>,
    /// `[i, j, 0]` = weight of the enabled connection from node row `i` to
    /// node row `j`, NaN otherwise.
    conns_expanded: Array3<f64>,
    input_rows: Vec<usize>,
    output_rows: Vec<usize>,
}

impl TransformedNetwork {
    pub fn nodes(&self) -> &Array2<f64> {
        &self.nodes
    }

    pub fn order(&self) -> &[f64] {
        &self.order
    }

    pub fn conns_expanded(&self) -> &Array3<f64> {
        &self.conns_expanded
    }

    pub fn num_inputs(&self) -> usize {
        self.input_rows.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.output_rows.len()
    }

    pub fn input_rows(&self) -> &[usize] {
        &self.input_rows
    }

    pub fn output_rows(&self) -> &[usize] {
        &self.output_rows
    }

    fn max_nodes(&self) -> usize {
        self.nodes.nrows()
    }

    fn ordered_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().take_while(|x| !x.is_nan()).map(|&x| x as usize)
    }

    #[inline]
    fn weight(&self, from: usize, to: usize) -> f64 {
        // contiguous layout: [from][to][0]
        self.conns_expanded.as_slice().expect("standard layout")[from * self.max_nodes() + to]
    }

    fn node_functions(
        &self,
        registry: &FunctionRegistry,
        row: usize,
    ) -> Result<(f64, f64, Aggregation, Activation), InferenceError> {
        let n = self.nodes.row(row);
        let agg_id = n[node_col::AGGREGATION] as usize;
        let act_id = n[node_col::ACTIVATION] as usize;
        let agg = registry
            .aggregation(agg_id)
            .ok_or_else(|| InferenceError::UnknownFunction(format!("aggregation {agg_id}")))?;
        let act = registry
            .activation(act_id)
            .ok_or_else(|| InferenceError::UnknownFunction(format!("activation {act_id}")))?;
        Ok((n[node_col::BIAS], n[node_col::RESPONSE], agg, act))
    }

    fn check_input(&self, input: &[f64]) -> Result<(), InferenceError> {
        if input.len() != self.num_inputs() {
            return Err(InferenceError::InvalidInput(format!(
                "expected {} values, got {}",
                self.num_inputs(),
                input.len()
            )));
        }
        if input.iter().any(|x| x.is_nan()) {
            return Err(InferenceError::InvalidInput("input contains NaN".into()));
        }
        Ok(())
    }

    /// Evaluates the network on one input vector.
    pub fn forward(&self, registry: &FunctionRegistry, input: &[f64]) -> Result<Vec<f64>, InferenceError> {
        self.check_input(input)?;
        let n = self.max_nodes();
        let mut v = vec![f64::NAN; n];
        for (&r, &x) in self.input_rows.iter().zip(input) {
            v[r] = x;
        }
        for k in self.ordered_rows() {
            if self.input_rows.contains(&k) {
                continue;
            }
            let (bias, response, agg, act) = self.node_functions(registry, k)?;
            let mut acc = agg.init();
            let mut count = 0;
            for (j, &x) in v.iter().enumerate().take(n) {
                let w = self.weight(j, k);
                if !w.is_nan() {
                    acc = agg.step(acc, w * x);
                    count += 1;
                }
            }
            v[k] = act.apply(bias + response * agg.finish(acc, count));
        }
        Ok(self.output_rows.iter().map(|&r| v[r]).collect())
    }

    /// Evaluates a `B x I` batch; row `b` of the result equals
    /// `forward(inputs[b])` bit for bit.
    pub fn forward_batch(
        &self,
        registry: &FunctionRegistry,
        inputs: &Array2<f64>,
    ) -> Result<Array2<f64>, InferenceError> {
        let b = inputs.nrows();
        if b == 0 {
            return Err(InferenceError::InvalidInput("empty batch".into()));
        }
        if inputs.ncols() != self.num_inputs() {
            return Err(InferenceError::InvalidInput(format!(
                "expected {} columns, got {}",
                self.num_inputs(),
                inputs.ncols()
            )));
        }
        if inputs.iter().any(|x| x.is_nan()) {
            return Err(InferenceError::InvalidInput("input contains NaN".into()));
        }
        let n = self.max_nodes();
        // node-major value table: values[node * b + sample]
        let mut values = vec![f64::NAN; n * b];
        for (i, &r) in self.input_rows.iter().enumerate() {
            for s in 0..b {
                values[r * b + s] = inputs[[s, i]];
            }
        }
        let mut acc = vec![0.0; b];
        for k in self.ordered_rows() {
            if self.input_rows.contains(&k) {
                continue;
            }
            let (bias, response, agg, act) = self.node_functions(registry, k)?;
            acc.fill(agg.init());
            let mut count = 0;
            for j in 0..n {
                let w = self.weight(j, k);
                if w.is_nan() {
                    continue;
                }
                let src = &values[j * b..(j + 1) * b];
                for (a, &x) in acc.iter_mut().zip(src) {
                    *a = agg.step(*a, w * x);
                }
                count += 1;
            }
            let dst = &mut values[k * b..(k + 1) * b];
            for (d, &a) in dst.iter_mut().zip(&acc) {
                *d = act.apply(bias + response * agg.finish(a, count));
            }
        }
        let mut out = Array2::zeros((b, self.num_outputs()));
        for (o, &r) in self.output_rows.iter().enumerate() {
            for s in 0..b {
                out[[s, o]] = values[r * b + s];
            }
        }
        Ok(out)
    }
}

/// Topologically orders the live nodes and expands enabled connections into
/// a dense row-indexed weight tensor.
///
/// Kahn's algorithm always releases the smallest ready row index first, so
/// the order is a pure function of the tensors.
pub fn transform(genome: &GenomeTensors) -> Result<TransformedNetwork, InferenceError> {
    let n = genome.max_nodes();
    let mut cexp = Array3::from_elem((n, n, 1), f64::NAN);
    let mut row_of = std::collections::HashMap::with_capacity(n);
    for r in genome.live_node_rows() {
        row_of.insert(genome.nodes()[[r, node_col::KEY]] as u64, r);
    }
    let mut indegree = vec![0usize; n];
    for r in genome.live_conn_rows() {
        let c = genome.conns().row(r);
        if c[conn_col::ENABLED] == 0.0 {
            continue;
        }
        let (Some(&i), Some(&j)) = (
            row_of.get(&(c[conn_col::IN] as u64)),
            row_of.get(&(c[conn_col::OUT] as u64)),
        ) else {
            continue;
        };
        cexp[[i, j, 0]] = c[conn_col::WEIGHT];
        indegree[j] += 1;
    }

    let live: Vec<usize> = genome.live_node_rows().collect();
    let mut ready: BinaryHeap<Reverse<usize>> = live
        .iter()
        .filter(|&&r| indegree[r] == 0)
        .map(|&r| Reverse(r))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(r)) = ready.pop() {
        order.push(r as f64);
        for j in 0..n {
            if !cexp[[r, j, 0]].is_nan() {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
    }
    if order.len() < live.len() {
        return Err(InferenceError::CycleDetected {
            unprocessed: live.len() - order.len(),
        });
    }
    order.resize(n, f64::NAN);

    let find = |k: usize| row_of.get(&(k as u64)).copied();
    let i_n = genome.num_inputs();
    let o_n = genome.num_outputs();
    let input_rows = (0..i_n)
        .map(find)
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| InferenceError::InvalidInput("genome is missing an input node".into()))?;
    let output_rows = (i_n..i_n + o_n)
        .map(find)
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| InferenceError::InvalidInput("genome is missing an output node".into()))?;

    Ok(TransformedNetwork {
        nodes: genome.nodes().clone(),
        order,
        conns_expanded: cexp,
        input_rows,
        output_rows,
    })
}

fn collect_indexed<T: Send>(results: Vec<Result<T, InferenceError>>) -> Result<Vec<T>, InferenceError> {
    let mut ok = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => {
                return Err(InferenceError::Genome {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(ok)
}

/// Transforms every genome of the population in parallel. The first failing
/// genome (by index) is reported.
pub fn population_transform(pop: &PopulationTensors) -> Result<Vec<TransformedNetwork>, InferenceError> {
    let results: Vec<_> = (0..pop.len())
        .into_par_iter()
        .map(|i| transform(&pop.genome(i)))
        .collect();
    collect_indexed(results)
}

/// Runs each network on its own input batch (`inputs[i]` is `B_i x I`).
pub fn population_forward(
    networks: &[TransformedNetwork],
    registry: &FunctionRegistry,
    inputs: &[Array2<f64>],
) -> Result<Vec<Array2<f64>>, InferenceError> {
    if networks.len() != inputs.len() {
        return Err(InferenceError::InvalidInput(format!(
            "{} networks but {} input batches",
            networks.len(),
            inputs.len()
        )));
    }
    let results: Vec<_> = networks
        .par_iter()
        .zip(inputs.par_iter())
        .map(|(net, x)| net.forward_batch(registry, x))
        .collect();
    collect_indexed(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{ConnRow, NodeRow};

    fn node(key: u64, bias: f64, act: Activation) -> NodeRow {
        NodeRow {
            key,
            bias,
            response: 1.0,
            aggregation_id: Aggregation::Sum as usize,
            activation_id: act as usize,
        }
    }

    /// rows {0: input, 1: output, 2: hidden}
    fn chain() -> GenomeTensors {
        GenomeTensors::empty(1, 1, 5, 5)
            .add_node(node(0, 0.0, Activation::Identity))
            .unwrap()
            .add_node(node(1, 0.0, Activation::Identity))
            .unwrap()
            .add_node(node(2, 0.0, Activation::Identity))
            .unwrap()
            .add_conn(ConnRow::new(0, 2, true, 1.0))
            .unwrap()
            .add_conn(ConnRow::new(2, 1, true, 1.0))
            .unwrap()
    }

    #[test]
    fn chain_order() {
        let t = transform(&chain()).unwrap();
        assert_eq!(&t.order()[..3], &[0.0, 2.0, 1.0]);
        assert!(t.order()[3..].iter().all(|x| x.is_nan()));
        assert_eq!(t.conns_expanded()[[0, 2, 0]], 1.0);
        assert!(t.conns_expanded()[[0, 1, 0]].is_nan());
    }

    #[test]
    fn disabled_connection_is_nan() {
        let g = chain().add_conn(ConnRow::new(0, 1, false, 3.0)).unwrap();
        let t = transform(&g).unwrap();
        assert!(t.conns_expanded()[[0, 1, 0]].is_nan());
    }

    #[test]
    fn cycle_is_detected() {
        let g = chain()
            .add_node(node(3, 0.0, Activation::Identity))
            .unwrap()
            .add_conn(ConnRow::new(2, 3, true, 1.0))
            .unwrap()
            .add_conn(ConnRow::new(3, 2, true, 1.0))
            .unwrap();
        assert!(matches!(transform(&g), Err(InferenceError::CycleDetected { .. })));
    }

    fn single_edge() -> TransformedNetwork {
        let g = GenomeTensors::empty(1, 1, 3, 2)
            .add_node(node(0, 0.0, Activation::Identity))
            .unwrap()
            .add_node(node(1, 0.5, Activation::Identity))
            .unwrap()
            .add_conn(ConnRow::new(0, 1, true, 2.0))
            .unwrap();
        transform(&g).unwrap()
    }

    #[test]
    fn single_edge_forward() {
        let reg = FunctionRegistry::default();
        assert_eq!(single_edge().forward(&reg, &[3.0]).unwrap(), vec![6.5]);
    }

    #[test]
    fn isolated_output_gives_activated_bias() {
        let reg = FunctionRegistry::default();
        let g = GenomeTensors::empty(1, 1, 3, 2)
            .add_node(node(0, 0.0, Activation::Identity))
            .unwrap()
            .add_node(node(1, -0.75, Activation::Identity))
            .unwrap();
        let t = transform(&g).unwrap();
        assert_eq!(t.forward(&reg, &[10.0]).unwrap(), vec![-0.75]);
    }

    #[test]
    fn input_errors() {
        let reg = FunctionRegistry::default();
        let t = single_edge();
        assert!(matches!(
            t.forward(&reg, &[1.0, 2.0]),
            Err(InferenceError::InvalidInput(_))
        ));
        assert!(matches!(
            t.forward(&reg, &[f64::NAN]),
            Err(InferenceError::InvalidInput(_))
        ));
        assert!(t.forward_batch(&reg, &Array2::zeros((0, 1))).is_err());
    }

    #[test]
    fn batch_of_one_and_duplicates() {
        let reg = FunctionRegistry::default();
        let t = transform(&chain()).unwrap();
        let x = ndarray::arr2(&[[0.3], [0.3], [-1.0]]);
        let y = t.forward_batch(&reg, &x).unwrap();
        assert_eq!(y[[0, 0]].to_bits(), y[[1, 0]].to_bits());
        let single = t.forward_batch(&reg, &ndarray::arr2(&[[-1.0]])).unwrap();
        assert_eq!(single[[0, 0]], t.forward(&reg, &[-1.0]).unwrap()[0]);
        assert_eq!(y[[2, 0]], single[[0, 0]]);
    }
}
