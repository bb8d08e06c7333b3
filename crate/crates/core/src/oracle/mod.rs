//! Object-graph reference implementation used to check the tensor code.
//!
//! Networks are plain maps keyed by historical marker. Inference is a
//! memoized depth-first recursion from the outputs and distance uses set
//! operations on those maps, so neither shares an algorithm with the
//! tensorized paths they are compared against.

pub mod fuzz;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use thiserror::Error;

use crate::config::NeatConfig;
use crate::genome::{conn_col, node_col, GenomeTensors, NodeKey};
use crate::inference::{FunctionRegistry, InferenceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("cycle through node {0}")]
    CycleDetected(NodeKey),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNode {
    pub bias: f64,
    pub response: f64,
    pub aggregation_id: usize,
    pub activation_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub enabled: bool,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNetwork {
    pub nodes: BTreeMap<NodeKey, GraphNode>,
    pub edges: BTreeMap<(NodeKey, NodeKey), GraphEdge>,
    pub input_keys: Vec<NodeKey>,
    pub output_keys: Vec<NodeKey>,
}

/// Decodes raw node/connection matrices, checking every genome invariant.
pub fn decode_tensors(
    nodes: &Array2<f64>,
    conns: &Array2<f64>,
    num_inputs: usize,
    num_outputs: usize,
) -> Result<GraphNetwork, OracleError> {
    let bad = |m: String| Err(OracleError::Integrity(m));
    let mut net = GraphNetwork {
        nodes: BTreeMap::new(),
        edges: BTreeMap::new(),
        input_keys: (0..num_inputs as NodeKey).collect(),
        output_keys: (num_inputs as NodeKey..(num_inputs + num_outputs) as NodeKey).collect(),
    };
    for (r, row) in nodes.outer_iter().enumerate() {
        let nan = row.iter().filter(|x| x.is_nan()).count();
        if nan == row.len() {
            continue;
        }
        if nan > 0 {
            return bad(format!("node row {r} is partially NaN"));
        }
        let key = row[node_col::KEY] as NodeKey;
        let node = GraphNode {
            bias: row[node_col::BIAS],
            response: row[node_col::RESPONSE],
            aggregation_id: row[node_col::AGGREGATION] as usize,
            activation_id: row[node_col::ACTIVATION] as usize,
        };
        if net.nodes.insert(key, node).is_some() {
            return bad(format!("duplicate node key {key}"));
        }
    }
    for k in net.input_keys.iter().chain(&net.output_keys) {
        if !net.nodes.contains_key(k) {
            return bad(format!("missing input/output node {k}"));
        }
    }
    for (r, row) in conns.outer_iter().enumerate() {
        let nan = row.iter().filter(|x| x.is_nan()).count();
        if nan == row.len() {
            continue;
        }
        if nan > 0 {
            return bad(format!("connection row {r} is partially NaN"));
        }
        let pair = (row[conn_col::IN] as NodeKey, row[conn_col::OUT] as NodeKey);
        if !net.nodes.contains_key(&pair.0) || !net.nodes.contains_key(&pair.1) {
            return bad(format!("connection {pair:?} has a missing endpoint"));
        }
        let edge = GraphEdge {
            enabled: row[conn_col::ENABLED] != 0.0,
            weight: row[conn_col::WEIGHT],
        };
        if net.edges.insert(pair, edge).is_some() {
            return bad(format!("duplicate connection {pair:?}"));
        }
    }
    Ok(net)
}

pub fn decode(genome: &GenomeTensors) -> Result<GraphNetwork, OracleError> {
    decode_tensors(
        genome.nodes(),
        genome.conns(),
        genome.num_inputs(),
        genome.num_outputs(),
    )
}

impl GraphNetwork {
    pub fn add_node(&mut self, key: NodeKey, node: GraphNode) {
        self.nodes.insert(key, node);
    }

    /// Removes the node and every edge touching it.
    pub fn remove_node(&mut self, key: NodeKey) {
        self.nodes.remove(&key);
        self.edges.retain(|&(i, o), _| i != key && o != key);
    }

    pub fn add_edge(&mut self, in_key: NodeKey, out_key: NodeKey, edge: GraphEdge) {
        self.edges.insert((in_key, out_key), edge);
    }

    pub fn remove_edge(&mut self, in_key: NodeKey, out_key: NodeKey) {
        self.edges.remove(&(in_key, out_key));
    }

    /// True if the enabled edges contain a directed cycle.
    pub fn has_enabled_cycle(&self) -> bool {
        let mut adj: HashMap<NodeKey, Vec<NodeKey>> = HashMap::new();
        for (&(i, o), e) in &self.edges {
            if e.enabled {
                adj.entry(i).or_default().push(o);
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<NodeKey, u8> = HashMap::new();
        fn visit(k: NodeKey, adj: &HashMap<NodeKey, Vec<NodeKey>>, state: &mut HashMap<NodeKey, u8>) -> bool {
            match state.get(&k) {
                Some(1) => return true,
                Some(2) => return false,
                _ => {}
            }
            state.insert(k, 1);
            for &n in adj.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
                if visit(n, adj, state) {
                    return true;
                }
            }
            state.insert(k, 2);
            false
        }
        self.nodes.keys().any(|&k| visit(k, &adj, &mut state))
    }
}

/// Evaluates the network by memoized recursion from each output.
pub fn graph_forward(net: &GraphNetwork, registry: &FunctionRegistry, input: &[f64]) -> Result<Vec<f64>, OracleError> {
    if input.len() != net.input_keys.len() {
        return Err(InferenceError::InvalidInput(format!(
            "expected {} inputs, got {}",
            net.input_keys.len(),
            input.len()
        ))
        .into());
    }
    let mut incoming: HashMap<NodeKey, Vec<(NodeKey, f64)>> = HashMap::new();
    for (&(i, o), e) in &net.edges {
        if e.enabled {
            incoming.entry(o).or_default().push((i, e.weight));
        }
    }
    let mut memo: HashMap<NodeKey, f64> = net.input_keys.iter().copied().zip(input.iter().copied()).collect();
    let mut visiting: BTreeSet<NodeKey> = BTreeSet::new();

    fn value(
        k: NodeKey,
        net: &GraphNetwork,
        registry: &FunctionRegistry,
        incoming: &HashMap<NodeKey, Vec<(NodeKey, f64)>>,
        memo: &mut HashMap<NodeKey, f64>,
        visiting: &mut BTreeSet<NodeKey>,
    ) -> Result<f64, OracleError> {
        if let Some(&v) = memo.get(&k) {
            return Ok(v);
        }
        if !visiting.insert(k) {
            return Err(OracleError::CycleDetected(k));
        }
        let node = net.nodes[&k];
        let mut terms = Vec::new();
        for &(src, w) in incoming.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
            terms.push(w * value(src, net, registry, incoming, memo, visiting)?);
        }
        let agg = registry
            .aggregation(node.aggregation_id)
            .ok_or_else(|| InferenceError::UnknownFunction(format!("aggregation {}", node.aggregation_id)))?;
        let act = registry
            .activation(node.activation_id)
            .ok_or_else(|| InferenceError::UnknownFunction(format!("activation {}", node.activation_id)))?;
        let v = act.apply(node.bias + node.response * agg.apply(&terms));
        visiting.remove(&k);
        memo.insert(k, v);
        Ok(v)
    }

    net.output_keys
        .iter()
        .map(|&k| value(k, net, registry, &incoming, &mut memo, &mut visiting))
        .collect()
}

/// Compatibility distance by explicit set intersection and difference.
pub fn graph_distance(a: &GraphNetwork, b: &GraphNetwork, config: &NeatConfig) -> f64 {
    let keys_a: BTreeSet<_> = a.nodes.keys().copied().collect();
    let keys_b: BTreeSet<_> = b.nodes.keys().copied().collect();
    let pairs_a: BTreeSet<_> = a.edges.keys().copied().collect();
    let pairs_b: BTreeSet<_> = b.edges.keys().copied().collect();

    let disjoint = keys_a.symmetric_difference(&keys_b).count() + pairs_a.symmetric_difference(&pairs_b).count();
    let mut diffs = Vec::new();
    for k in keys_a.intersection(&keys_b) {
        let (x, y) = (a.nodes[k], b.nodes[k]);
        let cat = |p: usize, q: usize| if p == q { 0.0 } else { 1.0 };
        diffs.push(
            ((x.bias - y.bias).abs()
                + (x.response - y.response).abs()
                + cat(x.aggregation_id, y.aggregation_id)
                + cat(x.activation_id, y.activation_id))
                / 4.0,
        );
    }
    for p in pairs_a.intersection(&pairs_b) {
        let (x, y) = (a.edges[p], b.edges[p]);
        let flag = |e: bool| if e { 1.0f64 } else { 0.0 };
        diffs.push(((flag(x.enabled) - flag(y.enabled)).abs() + (x.weight - y.weight).abs()) / 2.0);
    }
    let n = (keys_a.len() + pairs_a.len()).max(keys_b.len() + pairs_b.len());
    if n == 0 {
        return 0.0;
    }
    let homologous = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().sum::<f64>() / diffs.len() as f64
    };
    config.compatibility_disjoint * disjoint as f64 / n as f64 + config.compatibility_homologous * homologous
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{ConnRow, NodeRow};
    use crate::inference::{Activation, Aggregation};
    use crate::rng::RngStream;

    fn node(key: NodeKey, bias: f64) -> NodeRow {
        NodeRow {
            key,
            bias,
            response: 1.0,
            aggregation_id: Aggregation::Sum as usize,
            activation_id: Activation::Identity as usize,
        }
    }

    fn single_edge() -> GenomeTensors {
        GenomeTensors::empty(1, 1, 4, 4)
            .add_node(node(0, 0.0))
            .unwrap()
            .add_node(node(1, 0.5))
            .unwrap()
            .add_conn(ConnRow::new(0, 1, true, 2.0))
            .unwrap()
    }

    fn small_config() -> NeatConfig {
        NeatConfig {
            inputs: 2,
            outputs: 1,
            max_nodes: 4,
            max_conns: 4,
            ..NeatConfig::default()
        }
    }

    #[test]
    fn fresh_genome_decodes() {
        let g = GenomeTensors::init(&small_config(), &RngStream::new(0)).unwrap();
        let net = decode(&g).unwrap();
        assert_eq!(net.nodes.len(), 3);
        assert_eq!(net.edges.len(), 2);
        assert_eq!(net.input_keys, vec![0, 1]);
        assert_eq!(net.output_keys, vec![2]);
    }

    #[test]
    fn dangling_connection_is_rejected() {
        let g = GenomeTensors::init(&small_config(), &RngStream::new(0)).unwrap();
        let mut conns = g.conns().clone();
        conns[[0, conn_col::OUT]] = 9.0;
        assert!(matches!(
            decode_tensors(g.nodes(), &conns, 2, 1),
            Err(OracleError::Integrity(_))
        ));
    }

    #[test]
    fn single_edge_fixture() {
        let net = decode(&single_edge()).unwrap();
        let out = graph_forward(&net, &FunctionRegistry::default(), &[3.0]).unwrap();
        assert_eq!(out, vec![6.5]);
    }

    #[test]
    fn isolated_output_is_bias_through_activation() {
        let g = GenomeTensors::empty(1, 1, 3, 3)
            .add_node(node(0, 0.0))
            .unwrap()
            .add_node(NodeRow {
                activation_id: Activation::Tanh as usize,
                ..node(1, 0.3)
            })
            .unwrap();
        let out = graph_forward(&decode(&g).unwrap(), &FunctionRegistry::default(), &[1.0]).unwrap();
        assert_eq!(out, vec![0.3f64.tanh()]);
    }

    #[test]
    fn cycles_are_detected() {
        let mut net = decode(&single_edge()).unwrap();
        net.add_node(
            2,
            GraphNode {
                bias: 0.0,
                response: 1.0,
                aggregation_id: 0,
                activation_id: 0,
            },
        );
        net.add_edge(
            1,
            2,
            GraphEdge {
                enabled: true,
                weight: 1.0,
            },
        );
        net.add_edge(
            2,
            1,
            GraphEdge {
                enabled: true,
                weight: 1.0,
            },
        );
        assert!(net.has_enabled_cycle());
        assert!(matches!(
            graph_forward(&net, &FunctionRegistry::default(), &[1.0]),
            Err(OracleError::CycleDetected(_))
        ));
        net.edges.get_mut(&(2, 1)).unwrap().enabled = false;
        assert!(!net.has_enabled_cycle());
    }

    #[test]
    fn commuting_squares() {
        let g = single_edge();
        let h = g.add_node(node(5, -1.0)).unwrap();
        let mut expect = decode(&g).unwrap();
        expect.add_node(
            5,
            GraphNode {
                bias: -1.0,
                response: 1.0,
                aggregation_id: 0,
                activation_id: 0,
            },
        );
        assert_eq!(decode(&h).unwrap(), expect);

        let h2 = h.add_conn(ConnRow::new(5, 1, false, 0.25)).unwrap();
        expect.add_edge(
            5,
            1,
            GraphEdge {
                enabled: false,
                weight: 0.25,
            },
        );
        assert_eq!(decode(&h2).unwrap(), expect);

        let h3 = h2.remove_node(5).unwrap();
        expect.remove_node(5);
        assert_eq!(decode(&h3).unwrap(), expect);

        let h4 = h3.remove_conn(0, 1).unwrap();
        expect.remove_edge(0, 1);
        assert_eq!(decode(&h4).unwrap(), expect);
    }

    #[test]
    fn distance_matches_hand_formula() {
        let cfg = small_config();
        let g = GenomeTensors::init(&cfg, &RngStream::new(3)).unwrap();
        let a = decode(&g).unwrap();
        assert_eq!(graph_distance(&a, &a, &cfg), 0.0);
        let mut b = a.clone();
        b.add_node(
            9,
            GraphNode {
                bias: 0.0,
                response: 1.0,
                aggregation_id: 0,
                activation_id: 1,
            },
        );
        // 5 genes vs 6 genes, one disjoint
        assert!((graph_distance(&a, &b, &cfg) - 1.0 / 6.0).abs() < 1e-15);
    }
}
