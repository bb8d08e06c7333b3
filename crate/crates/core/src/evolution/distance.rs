//! Compatibility distance between two genomes.
//!
//! Genes are aligned by historical marker: nodes by key, connections by
//! `(in_key, out_key)`. With `D` disjoint genes, `A` the mean over homologous
//! pairs of their mean per-attribute difference, and `N` the larger live gene
//! count, the distance is `c_disjoint * D / N + c_homologous * A`.

use crate::config::NeatConfig;
use crate::genome::{conn_col, node_col, GenomeError, GenomeTensors};

/// Live genes of one genome sorted by marker, for merge-based alignment.
#[derive(Debug, Clone)]
pub struct GeneIndex {
    nodes: Vec<(u64, usize)>,
    conns: Vec<((u64, u64), usize)>,
}

impl GeneIndex {
    pub fn new(g: &GenomeTensors) -> Self {
        let mut nodes: Vec<_> = g
            .live_node_rows()
            .map(|r| (g.nodes()[[r, node_col::KEY]] as u64, r))
            .collect();
        nodes.sort_unstable();
        let mut conns: Vec<_> = g
            .live_conn_rows()
            .map(|r| {
                let c = g.conns().row(r);
                ((c[conn_col::IN] as u64, c[conn_col::OUT] as u64), r)
            })
            .collect();
        conns.sort_unstable();
        Self { nodes, conns }
    }

    pub fn gene_count(&self) -> usize {
        self.nodes.len() + self.conns.len()
    }
}

/// Walks two sorted gene lists, calling `homologous(row_a, row_b)` for
/// matched markers; returns the number of disjoint genes.
fn merge<K: Ord + Copy>(a: &[(K, usize)], b: &[(K, usize)], mut homologous: impl FnMut(usize, usize)) -> usize {
    let (mut i, mut j, mut disjoint) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                disjoint += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                disjoint += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                homologous(a[i].1, b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    disjoint + (a.len() - i) + (b.len() - j)
}

fn node_gene_diff(a: &GenomeTensors, ra: usize, b: &GenomeTensors, rb: usize) -> f64 {
    let (x, y) = (a.nodes().row(ra), b.nodes().row(rb));
    let cat = |c: usize| if x[c] != y[c] { 1.0 } else { 0.0 };
    ((x[node_col::BIAS] - y[node_col::BIAS]).abs()
        + (x[node_col::RESPONSE] - y[node_col::RESPONSE]).abs()
        + cat(node_col::AGGREGATION)
        + cat(node_col::ACTIVATION))
        / 4.0
}

fn conn_gene_diff(a: &GenomeTensors, ra: usize, b: &GenomeTensors, rb: usize) -> f64 {
    let (x, y) = (a.conns().row(ra), b.conns().row(rb));
    ((x[conn_col::ENABLED] - y[conn_col::ENABLED]).abs() + (x[conn_col::WEIGHT] - y[conn_col::WEIGHT]).abs()) / 2.0
}

/// Distance using prebuilt gene indices (avoids re-sorting representatives).
pub fn distance_indexed(
    a: &GenomeTensors,
    ia: &GeneIndex,
    b: &GenomeTensors,
    ib: &GeneIndex,
    config: &NeatConfig,
) -> f64 {
    let mut diff_sum = 0.0;
    let mut homologous = 0usize;
    let mut disjoint = merge(&ia.nodes, &ib.nodes, |ra, rb| {
        diff_sum += node_gene_diff(a, ra, b, rb);
        homologous += 1;
    });
    disjoint += merge(&ia.conns, &ib.conns, |ra, rb| {
        diff_sum += conn_gene_diff(a, ra, b, rb);
        homologous += 1;
    });
    let n = ia.gene_count().max(ib.gene_count());
    if n == 0 {
        return 0.0;
    }
    let mean_diff = if homologous == 0 {
        0.0
    } else {
        diff_sum / homologous as f64
    };
    config.compatibility_disjoint * disjoint as f64 / n as f64 + config.compatibility_homologous * mean_diff
}

pub fn distance(a: &GenomeTensors, b: &GenomeTensors, config: &NeatConfig) -> Result<f64, GenomeError> {
    if a.num_inputs() != b.num_inputs() || a.num_outputs() != b.num_outputs() {
        return Err(GenomeError::ShapeMismatch(format!(
            "({}, {}) vs ({}, {}) inputs/outputs",
            a.num_inputs(),
            a.num_outputs(),
            b.num_inputs(),
            b.num_outputs()
        )));
    }
    Ok(distance_indexed(a, &GeneIndex::new(a), b, &GeneIndex::new(b), config))
}
