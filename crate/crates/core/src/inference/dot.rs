use std::fmt::Write;

use super::registry::Activation;
use crate::genome::GenomeTensors;

/// Graphviz rendering of a genome. Disabled connections are dashed.
pub fn genome_to_dot(g: &GenomeTensors) -> String {
    let mut out = String::from("digraph genome {\n  rankdir=LR;\n");
    for n in g.live_nodes() {
        let act = Activation::from_id(n.activation_id)
            .map(|a| a.name().to_string())
            .unwrap_or_else(|| format!("act#{}", n.activation_id));
        let shape = if g.is_input_key(n.key) {
            "box"
        } else if g.is_output_key(n.key) {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(
            out,
            "  n{k} [shape={shape}, label=\"{k}\\nb={b:.3}\\n{act}\"];",
            k = n.key,
            b = n.bias
        );
    }
    for c in g.live_conns() {
        let style = if c.enabled { "solid" } else { "dashed" };
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{:.3}\", style={style}];",
            c.in_key, c.out_key, c.weight
        );
    }
    out.push_str("}\n");
    out
}
