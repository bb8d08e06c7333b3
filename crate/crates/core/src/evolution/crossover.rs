use std::collections::HashMap;

use rand::Rng;

use crate::genome::{conn_col, node_col, GenomeError, GenomeTensors, NodeKey};
use crate::rng::RngStream;

/// Offspring with the fitter parent's topology and row layout. For genes the
/// other parent also carries, each attribute is taken from either parent
/// with probability 1/2.
pub fn crossover(
    parent_fit: &GenomeTensors,
    parent_less: &GenomeTensors,
    stream: &RngStream,
) -> Result<GenomeTensors, GenomeError> {
    parent_fit.same_shape(parent_less)?;
    let mut rng = stream.rng();
    let mut child = parent_fit.clone();

    let less_nodes: HashMap<NodeKey, usize> = parent_less
        .live_node_rows()
        .map(|r| (parent_less.nodes()[[r, node_col::KEY]] as NodeKey, r))
        .collect();
    for r in 0..parent_fit.max_nodes() {
        let Some(n) = parent_fit.node(r) else { continue };
        let Some(&lr) = less_nodes.get(&n.key) else { continue };
        for col in [
            node_col::BIAS,
            node_col::RESPONSE,
            node_col::AGGREGATION,
            node_col::ACTIVATION,
        ] {
            if rng.gen_bool(0.5) {
                *child.node_cell_mut(r, col) = parent_less.nodes()[[lr, col]];
            }
        }
    }

    let less_conns: HashMap<(NodeKey, NodeKey), usize> = parent_less
        .live_conn_rows()
        .map(|r| {
            let c = parent_less.conns().row(r);
            ((c[conn_col::IN] as NodeKey, c[conn_col::OUT] as NodeKey), r)
        })
        .collect();
    for r in 0..parent_fit.max_conns() {
        let Some(c) = parent_fit.conn(r) else { continue };
        let Some(&lr) = less_conns.get(&(c.in_key, c.out_key)) else {
            continue;
        };
        for col in [conn_col::ENABLED, conn_col::WEIGHT] {
            if rng.gen_bool(0.5) {
                *child.conn_cell_mut(r, col) = parent_less.conns()[[lr, col]];
            }
        }
    }
    Ok(child)
}
