//! Structural and attribute mutation over genome tensors.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{NeatConfig, NetworkType, NumericAttrConfig};
use crate::genome::{conn_col, node_col, ConnRow, GenomeTensors, NodeKey, NodeRow};
use crate::rng::RngStream;

/// Issues fresh historical markers for hidden nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeKeyAllocator {
    next_key: NodeKey,
}

impl NodeKeyAllocator {
    pub fn new(num_inputs: usize, num_outputs: usize) -> Self {
        Self {
            next_key: (num_inputs + num_outputs) as NodeKey,
        }
    }

    pub fn peek(&self) -> NodeKey {
        self.next_key
    }

    pub fn take(&mut self) -> NodeKey {
        let k = self.next_key;
        self.next_key += 1;
        k
    }

    /// Reserves `count` consecutive keys and returns the first.
    pub fn reserve(&mut self, count: usize) -> NodeKey {
        let base = self.next_key;
        self.next_key += count as NodeKey;
        base
    }
}

pub(crate) fn sample_init(rng: &mut ChaCha8Rng, a: &NumericAttrConfig, lo: f64, hi: f64) -> f64 {
    let x = if a.init_std > 0.0 {
        Normal::new(a.init_mean, a.init_std).expect("finite").sample(rng)
    } else {
        a.init_mean
    };
    x.clamp(lo, hi)
}

/// Replace with probability `replace_rate`, otherwise perturb with
/// probability `mutate_rate`; the result is clamped.
pub(crate) fn mutate_numeric(rng: &mut ChaCha8Rng, x: f64, a: &NumericAttrConfig, lo: f64, hi: f64) -> f64 {
    if rng.gen::<f64>() < a.replace_rate {
        return sample_init(rng, a, lo, hi);
    }
    if rng.gen::<f64>() < a.mutate_rate {
        let noise = if a.mutate_power > 0.0 {
            Normal::new(0.0, a.mutate_power).expect("finite").sample(rng)
        } else {
            0.0
        };
        return (x + noise).clamp(lo, hi);
    }
    x
}

fn mutate_categorical<T: Copy + Into<usize>>(rng: &mut ChaCha8Rng, x: f64, options: &[T], rate: f64) -> f64 {
    if rng.gen::<f64>() < rate {
        if let Some(&choice) = options.choose(rng) {
            return choice.into() as f64;
        }
    }
    x
}

/// `reach[a][b]`: node row `b` is reachable from node row `a` along live
/// connections (enabled or not).
fn reachability(g: &GenomeTensors, row_of: &std::collections::HashMap<NodeKey, usize>) -> Vec<Vec<bool>> {
    let n = g.max_nodes();
    let mut adj = vec![Vec::new(); n];
    for c in g.live_conns() {
        adj[row_of[&c.in_key]].push(row_of[&c.out_key]);
    }
    let mut reach = vec![vec![false; n]; n];
    let mut stack = Vec::new();
    for start in g.live_node_rows() {
        let seen = &mut reach[start];
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    reach
}

fn split_connection(g: &mut GenomeTensors, rng: &mut ChaCha8Rng, config: &NeatConfig, new_key: NodeKey) -> bool {
    let candidates: Vec<usize> = g
        .live_conn_rows()
        .filter(|&r| g.conns()[[r, conn_col::ENABLED]] != 0.0)
        .collect();
    if candidates.is_empty() || g.free_node_rows() < 1 || g.free_conn_rows() < 2 {
        return false;
    }
    let row = candidates[rng.gen_range(0..candidates.len())];
    let old = g.conn(row).expect("live row");
    let bias = sample_init(rng, &config.bias, config.attr_min, config.attr_max);
    *g.conn_cell_mut(row, conn_col::ENABLED) = 0.0;
    let node = NodeRow {
        key: new_key,
        bias,
        response: config.response.init_mean,
        aggregation_id: config.aggregation_default as usize,
        activation_id: config.activation_default as usize,
    };
    g.add_node_mut(node).expect("free row checked");
    g.add_conn_mut(ConnRow::new(old.in_key, new_key, true, 1.0))
        .expect("fresh key");
    g.add_conn_mut(ConnRow::new(new_key, old.out_key, true, old.weight))
        .expect("fresh key");
    true
}

fn delete_hidden_node(g: &mut GenomeTensors, rng: &mut ChaCha8Rng) {
    let hidden: Vec<NodeKey> = g.live_nodes().map(|n| n.key).filter(|&k| g.is_hidden_key(k)).collect();
    if hidden.is_empty() {
        return;
    }
    let k = hidden[rng.gen_range(0..hidden.len())];
    g.remove_node_mut(k).expect("hidden and live");
}

fn add_connection(g: &mut GenomeTensors, rng: &mut ChaCha8Rng, config: &NeatConfig) {
    if g.free_conn_rows() == 0 {
        return;
    }
    let keys: Vec<(NodeKey, usize)> = g.live_node_rows().map(|r| (g.node(r).unwrap().key, r)).collect();
    let row_of: std::collections::HashMap<NodeKey, usize> = keys.iter().copied().collect();
    let feedforward = config.network_type == NetworkType::Feedforward;
    let reach = feedforward.then(|| reachability(g, &row_of));
    let mut live = std::collections::HashSet::new();
    for c in g.live_conns() {
        live.insert((c.in_key, c.out_key));
    }
    let mut candidates = Vec::new();
    for &(src, src_row) in &keys {
        if g.is_output_key(src) {
            continue;
        }
        for &(dst, dst_row) in &keys {
            if g.is_input_key(dst) || live.contains(&(src, dst)) {
                continue;
            }
            if let Some(reach) = &reach {
                if src == dst || reach[dst_row][src_row] {
                    continue;
                }
            }
            candidates.push((src, dst));
        }
    }
    if candidates.is_empty() {
        return;
    }
    let (src, dst) = candidates[rng.gen_range(0..candidates.len())];
    let w = sample_init(rng, &config.weight, config.attr_min, config.attr_max);
    g.add_conn_mut(ConnRow::new(src, dst, true, w))
        .expect("candidate is free");
}

fn delete_connection(g: &mut GenomeTensors, rng: &mut ChaCha8Rng) {
    let rows: Vec<usize> = g.live_conn_rows().collect();
    if rows.is_empty() {
        return;
    }
    let c = g.conn(rows[rng.gen_range(0..rows.len())]).unwrap();
    g.remove_conn_mut(c.in_key, c.out_key).expect("live");
}

fn mutate_attributes(g: &mut GenomeTensors, rng: &mut ChaCha8Rng, config: &NeatConfig) {
    let (lo, hi) = (config.attr_min, config.attr_max);
    for r in 0..g.max_nodes() {
        let Some(n) = g.node(r) else { continue };
        if g.is_input_key(n.key) {
            continue;
        }
        *g.node_cell_mut(r, node_col::BIAS) = mutate_numeric(rng, n.bias, &config.bias, lo, hi);
        *g.node_cell_mut(r, node_col::RESPONSE) = mutate_numeric(rng, n.response, &config.response, lo, hi);
        *g.node_cell_mut(r, node_col::AGGREGATION) = mutate_categorical(
            rng,
            n.aggregation_id as f64,
            &config.aggregation_options,
            config.aggregation_replace_rate,
        );
        *g.node_cell_mut(r, node_col::ACTIVATION) = mutate_categorical(
            rng,
            n.activation_id as f64,
            &config.activation_options,
            config.activation_replace_rate,
        );
    }
    for r in 0..g.max_conns() {
        let Some(c) = g.conn(r) else { continue };
        *g.conn_cell_mut(r, conn_col::WEIGHT) = mutate_numeric(rng, c.weight, &config.weight, lo, hi);
        if rng.gen::<f64>() < config.enabled_mutate_rate {
            *g.conn_cell_mut(r, conn_col::ENABLED) = if c.enabled { 0.0 } else { 1.0 };
        }
    }
}

/// Mutates with a pre-reserved key for a possible new node. Returns the
/// offspring and whether `new_key` was used.
///
/// Sub-steps run in a fixed order: node split, node deletion, connection
/// addition, connection deletion, attribute mutation. A structural step that
/// has no valid target or no free capacity does nothing.
pub fn mutate_with_key(
    genome: &GenomeTensors,
    config: &NeatConfig,
    stream: &RngStream,
    new_key: NodeKey,
) -> (GenomeTensors, bool) {
    let mut rng = stream.rng();
    let mut g = genome.clone();
    let mut used = false;
    if rng.gen::<f64>() < config.node_add {
        used = split_connection(&mut g, &mut rng, config, new_key);
    }
    if rng.gen::<f64>() < config.node_delete {
        delete_hidden_node(&mut g, &mut rng);
    }
    if rng.gen::<f64>() < config.conn_add {
        add_connection(&mut g, &mut rng, config);
    }
    if rng.gen::<f64>() < config.conn_delete {
        delete_connection(&mut g, &mut rng);
    }
    mutate_attributes(&mut g, &mut rng, config);
    (g, used)
}

pub fn mutate(
    genome: &GenomeTensors,
    config: &NeatConfig,
    stream: &RngStream,
    allocator: &mut NodeKeyAllocator,
) -> GenomeTensors {
    let (g, used) = mutate_with_key(genome, config, stream, allocator.peek());
    if used {
        allocator.take();
    }
    g
}
