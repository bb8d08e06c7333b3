//! Random genomes and random edit sequences for property tests.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{decode, GraphNetwork};
use crate::config::NeatConfig;
use crate::evolution::mutation::{mutate, NodeKeyAllocator};
use crate::genome::{node_col, ConnRow, GenomeError, GenomeTensors, NodeKey, NodeRow};
use crate::inference::{Activation, Aggregation};
use crate::rng::RngStream;

/// One edit applied to a genome.
#[derive(Debug, Clone, PartialEq)]
pub enum FuzzOp {
    AddNode(NodeRow),
    RemoveNode(NodeKey),
    AddConn(ConnRow),
    RemoveConn(NodeKey, NodeKey),
    SetNodeAttr(NodeKey, usize, f64),
    SetConnAttr(NodeKey, NodeKey, usize, f64),
    /// A full evolutionary mutation drawn from the given stream seed.
    Mutate(u64),
}

/// Configuration exercising every mutation path, with all functions enabled.
pub fn fuzz_config(inputs: usize, outputs: usize, max_nodes: usize, max_conns: usize) -> NeatConfig {
    NeatConfig {
        inputs,
        outputs,
        max_nodes,
        max_conns,
        node_add: 0.4,
        node_delete: 0.2,
        conn_add: 0.6,
        conn_delete: 0.2,
        activation_options: Activation::ALL.to_vec(),
        activation_replace_rate: 0.2,
        aggregation_options: Aggregation::ALL.to_vec(),
        aggregation_replace_rate: 0.2,
        enabled_mutate_rate: 0.1,
        ..NeatConfig::default()
    }
}

fn random_node(rng: &mut impl Rng, key: NodeKey) -> NodeRow {
    NodeRow {
        key,
        bias: rng.gen_range(-2.0..2.0),
        response: rng.gen_range(-2.0..2.0),
        aggregation_id: rng.gen_range(0..Aggregation::ALL.len()),
        activation_id: rng.gen_range(0..Activation::ALL.len()),
    }
}

/// Draws an edit. Keys are taken mostly from the live set, sometimes at
/// random, so both successful and rejected edits occur.
pub fn random_op(rng: &mut impl Rng, g: &GenomeTensors) -> FuzzOp {
    let keys: Vec<NodeKey> = g.live_nodes().map(|n| n.key).collect();
    let pairs: Vec<(NodeKey, NodeKey)> = g.live_conns().map(|c| (c.in_key, c.out_key)).collect();
    let max_key = keys.iter().copied().max().unwrap_or(0) + 3;
    let key = |rng: &mut dyn rand::RngCore| {
        if rng.gen_bool(0.8) {
            *keys.choose(rng).unwrap_or(&0)
        } else {
            rng.gen_range(0..=max_key)
        }
    };
    let pair = |rng: &mut dyn rand::RngCore| pairs.choose(rng).copied();
    match rng.gen_range(0..8) {
        0 => {
            let k = if rng.gen_bool(0.8) { max_key } else { key(rng) };
            FuzzOp::AddNode(random_node(rng, k))
        }
        1 => FuzzOp::RemoveNode(key(rng)),
        2 | 3 => FuzzOp::AddConn(ConnRow::new(
            key(rng),
            key(rng),
            rng.gen_bool(0.8),
            rng.gen_range(-3.0..3.0),
        )),
        4 => match pair(rng) {
            Some((i, o)) if rng.gen_bool(0.9) => FuzzOp::RemoveConn(i, o),
            _ => FuzzOp::RemoveConn(key(rng), key(rng)),
        },
        5 => {
            let idx = rng.gen_range(0..5);
            let v = match idx {
                2 => rng.gen_range(0..Aggregation::ALL.len() + 1) as f64,
                3 => rng.gen_range(0..Activation::ALL.len() + 1) as f64,
                _ => rng.gen_range(-3.0..3.0),
            };
            FuzzOp::SetNodeAttr(key(rng), idx, v)
        }
        6 => {
            let (i, o) = pair(rng).unwrap_or((0, 0));
            let idx = rng.gen_range(0..3);
            let v = if idx == 0 {
                rng.gen_range(0..2) as f64
            } else {
                rng.gen_range(-3.0..3.0)
            };
            FuzzOp::SetConnAttr(i, o, idx, v)
        }
        _ => FuzzOp::Mutate(rng.gen()),
    }
}

/// True if the live connections (enabled or not) contain a directed cycle.
pub fn has_live_cycle(net: &GraphNetwork) -> bool {
    let mut all_on = net.clone();
    for e in all_on.edges.values_mut() {
        e.enabled = true;
    }
    all_on.has_enabled_cycle()
}

/// Applies an edit. Connection additions that would close a directed cycle
/// are refused, as the evolutionary operators do for feedforward genomes.
pub fn apply_op(
    g: &GenomeTensors,
    op: &FuzzOp,
    config: &NeatConfig,
    allocator: &mut NodeKeyAllocator,
) -> Result<GenomeTensors, GenomeError> {
    match *op {
        FuzzOp::AddNode(row) => {
            let out = g.add_node(row)?;
            // keep the allocator ahead of hand-picked keys
            while allocator.peek() <= row.key {
                allocator.take();
            }
            Ok(out)
        }
        FuzzOp::RemoveNode(k) => g.remove_node(k),
        FuzzOp::AddConn(row) => {
            let out = g.add_conn(row)?;
            let net = decode(&out).map_err(|e| GenomeError::Integrity(e.to_string()))?;
            if has_live_cycle(&net) {
                return Err(GenomeError::InvalidRow(format!(
                    "connection ({}, {}) would close a cycle",
                    row.in_key, row.out_key
                )));
            }
            Ok(out)
        }
        FuzzOp::RemoveConn(i, o) => g.remove_conn(i, o),
        FuzzOp::SetNodeAttr(k, idx, v) => g.set_node_attr(k, idx, v),
        FuzzOp::SetConnAttr(i, o, idx, v) => g.set_conn_attr(i, o, idx, v),
        FuzzOp::Mutate(seed) => Ok(mutate(g, config, &RngStream::new(seed), allocator)),
    }
}

/// Independent check of every encoding invariant; returns the first
/// violation found.
pub fn check_invariants(g: &GenomeTensors, max_nodes: usize, max_conns: usize) -> Result<(), String> {
    if g.nodes().dim() != (max_nodes, 5) || g.conns().dim() != (max_conns, 4) {
        return Err(format!(
            "shape changed to {:?} / {:?}",
            g.nodes().dim(),
            g.conns().dim()
        ));
    }
    for (name, t) in [("node", g.nodes()), ("connection", g.conns())] {
        for (r, row) in t.outer_iter().enumerate() {
            let nan = row.iter().filter(|x| x.is_nan()).count();
            if nan != 0 && nan != row.len() {
                return Err(format!("{name} row {r} mixes NaN and values"));
            }
        }
    }
    let mut keys = HashSet::new();
    for row in g.nodes().outer_iter().filter(|r| !r[0].is_nan()) {
        if !keys.insert(row[node_col::KEY] as NodeKey) {
            return Err(format!("duplicate node key {}", row[0]));
        }
    }
    for k in 0..(g.num_inputs() + g.num_outputs()) as NodeKey {
        if !keys.contains(&k) {
            return Err(format!("fixed node {k} missing"));
        }
    }
    let mut pairs = HashSet::new();
    for row in g.conns().outer_iter().filter(|r| !r[0].is_nan()) {
        let (i, o) = (row[0] as NodeKey, row[1] as NodeKey);
        if !keys.contains(&i) || !keys.contains(&o) {
            return Err(format!("connection ({i}, {o}) dangles"));
        }
        if !pairs.insert((i, o)) {
            return Err(format!("duplicate connection ({i}, {o})"));
        }
        if (o as usize) < g.num_inputs() {
            return Err(format!("connection ({i}, {o}) enters an input"));
        }
    }
    let net = decode(g).map_err(|e| e.to_string())?;
    if has_live_cycle(&net) {
        return Err("live connections contain a cycle".into());
    }
    Ok(())
}

/// Random valid feedforward genome grown by mutation from a fresh one. All
/// activation and aggregation functions can appear.
pub fn random_genome(
    rng: &mut impl Rng,
    inputs: usize,
    outputs: usize,
    max_nodes: usize,
    max_conns: usize,
) -> GenomeTensors {
    let config = fuzz_config(inputs, outputs, max_nodes, max_conns);
    let mut allocator = NodeKeyAllocator::new(inputs, outputs);
    let mut g = GenomeTensors::init(&config, &RngStream::new(rng.gen())).expect("capacity");
    for _ in 0..rng.gen_range(0..3 * max_nodes) {
        g = mutate(&g, &config, &RngStream::new(rng.gen()), &mut allocator);
    }
    g
}
