//! Fixed-shape tensor encoding of genomes.
//!
//! A genome is a pair of dense matrices: a node tensor of shape
//! `max_nodes x 5` laid out as `(key, bias, response, aggregation, activation)`
//! and a connection tensor of shape `max_conns x 4` laid out as
//! `(in_key, out_key, enabled, weight)`. Unused capacity is filled with rows
//! of NaN. Input nodes always carry keys `0..I` and outputs `I..I+O`.
//!
//! Structural edits follow the padded-tensor rules: an addition writes into
//! the first all-NaN row, a removal overwrites the row with NaN and leaves the
//! hole where it is.

mod population;
mod text;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{NeatConfig, NumericAttrConfig};
use crate::inference::{Activation, Aggregation};
use crate::rng::RngStream;

pub use population::PopulationTensors;
pub use text::{parse_genome, serialize_genome, ParseError};

pub type NodeKey = u64;

pub const NODE_COLS: usize = 5;
pub const CONN_COLS: usize = 4;

pub mod node_col {
    pub const KEY: usize = 0;
    pub const BIAS: usize = 1;
    pub const RESPONSE: usize = 2;
    pub const AGGREGATION: usize = 3;
    pub const ACTIVATION: usize = 4;
}

pub mod conn_col {
    pub const IN: usize = 0;
    pub const OUT: usize = 1;
    pub const ENABLED: usize = 2;
    pub const WEIGHT: usize = 3;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeError {
    #[error("no free row left in the {0} tensor")]
    CapacityFull(&'static str),
    #[error("node key {0} is already live")]
    DuplicateKey(NodeKey),
    #[error("connection ({0}, {1}) is already live")]
    DuplicateConn(NodeKey, NodeKey),
    #[error("connection ({0}, {1}) refers to a node that is not live")]
    DanglingEndpoint(NodeKey, NodeKey),
    #[error("no live gene with key {0}")]
    KeyNotFound(String),
    #[error("node {0} is an input or output node and cannot be removed")]
    ProtectedNode(NodeKey),
    #[error("attribute index {0} out of range")]
    BadAttrIndex(usize),
    #[error("genome shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("invalid row contents: {0}")]
    InvalidRow(String),
    #[error("genome invariant violated: {0}")]
    Integrity(String),
}

/// Node gene as a typed view of one live node row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRow {
    pub key: NodeKey,
    pub bias: f64,
    pub response: f64,
    pub aggregation_id: usize,
    pub activation_id: usize,
}

impl NodeRow {
    fn to_cells(self) -> [f64; NODE_COLS] {
        [
            self.key as f64,
            self.bias,
            self.response,
            self.aggregation_id as f64,
            self.activation_id as f64,
        ]
    }

    fn from_cells(r: ArrayView1<f64>) -> Self {
        Self {
            key: r[node_col::KEY] as NodeKey,
            bias: r[node_col::BIAS],
            response: r[node_col::RESPONSE],
            aggregation_id: r[node_col::AGGREGATION] as usize,
            activation_id: r[node_col::ACTIVATION] as usize,
        }
    }
}

/// Connection gene as a typed view of one live connection row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnRow {
    pub in_key: NodeKey,
    pub out_key: NodeKey,
    pub enabled: bool,
    pub weight: f64,
}

impl ConnRow {
    pub fn new(in_key: NodeKey, out_key: NodeKey, enabled: bool, weight: f64) -> Self {
        Self {
            in_key,
            out_key,
            enabled,
            weight,
        }
    }

    fn to_cells(self) -> [f64; CONN_COLS] {
        [
            self.in_key as f64,
            self.out_key as f64,
            if self.enabled { 1.0 } else { 0.0 },
            self.weight,
        ]
    }

    fn from_cells(r: ArrayView1<f64>) -> Self {
        Self {
            in_key: r[conn_col::IN] as NodeKey,
            out_key: r[conn_col::OUT] as NodeKey,
            enabled: r[conn_col::ENABLED] != 0.0,
            weight: r[conn_col::WEIGHT],
        }
    }
}

/// One genome as NaN-padded node and connection tensors.
///
/// Equality is bitwise over every cell, so two genomes compare equal only if
/// their padding sits in the same rows.
#[derive(Debug, Clone)]
pub struct GenomeTensors {
    nodes: Array2<f64>,
    conns: Array2<f64>,
    num_inputs: usize,
    num_outputs: usize,
}

impl PartialEq for GenomeTensors {
    fn eq(&self, other: &Self) -> bool {
        self.num_inputs == other.num_inputs
            && self.num_outputs == other.num_outputs
            && self.nodes.dim() == other.nodes.dim()
            && self.conns.dim() == other.conns.dim()
            && bits_eq(self.nodes.iter(), other.nodes.iter())
            && bits_eq(self.conns.iter(), other.conns.iter())
    }
}

fn bits_eq<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> bool {
    a.zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Aggregation and activation cells must hold a registered function code.
fn check_function_code(col: usize, value: f64) -> Result<(), GenomeError> {
    let (kind, count) = if col == node_col::AGGREGATION {
        ("aggregation", Aggregation::ALL.len())
    } else {
        ("activation", Activation::ALL.len())
    };
    if value >= 0.0 && value.fract() == 0.0 && (value as usize) < count {
        Ok(())
    } else {
        Err(GenomeError::InvalidRow(format!("{value} is not a valid {kind} code")))
    }
}

fn row_is_padding(r: ArrayView1<f64>) -> bool {
    r.iter().all(|x| x.is_nan())
}

fn sample(rng: &mut impl Rng, a: &NumericAttrConfig, lo: f64, hi: f64) -> f64 {
    let x = if a.init_std > 0.0 {
        Normal::new(a.init_mean, a.init_std)
            .expect("finite normal parameters")
            .sample(rng)
    } else {
        a.init_mean
    };
    x.clamp(lo, hi)
}

impl GenomeTensors {
    /// All-padding genome of the given shape. It has no live rows, so it is
    /// only a valid genome once inputs and outputs are added.
    pub fn empty(num_inputs: usize, num_outputs: usize, max_nodes: usize, max_conns: usize) -> Self {
        Self {
            nodes: Array2::from_elem((max_nodes, NODE_COLS), f64::NAN),
            conns: Array2::from_elem((max_conns, CONN_COLS), f64::NAN),
            num_inputs,
            num_outputs,
        }
    }

    /// Minimal genome with every input wired to every output.
    ///
    /// Input nodes carry neutral attributes (bias 0, response 1, default
    /// functions); they are never evaluated or mutated. Output biases and
    /// responses, and all weights, are drawn from the configured initial
    /// distributions.
    pub fn init(config: &NeatConfig, stream: &RngStream) -> Result<Self, GenomeError> {
        let (i_n, o_n) = (config.inputs, config.outputs);
        if config.max_nodes < i_n + o_n {
            return Err(GenomeError::CapacityFull("node"));
        }
        if config.max_conns < i_n * o_n {
            return Err(GenomeError::CapacityFull("connection"));
        }
        let mut rng = stream.rng();
        let (lo, hi) = (config.attr_min, config.attr_max);
        let mut g = Self::empty(i_n, o_n, config.max_nodes, config.max_conns);
        let agg = config.aggregation_default as usize;
        let act = config.activation_default as usize;
        for k in 0..i_n {
            g.write_node(
                k,
                NodeRow {
                    key: k as NodeKey,
                    bias: 0.0,
                    response: 1.0,
                    aggregation_id: agg,
                    activation_id: act,
                },
            );
        }
        for k in i_n..i_n + o_n {
            let bias = sample(&mut rng, &config.bias, lo, hi);
            let response = sample(&mut rng, &config.response, lo, hi);
            g.write_node(
                k,
                NodeRow {
                    key: k as NodeKey,
                    bias,
                    response,
                    aggregation_id: agg,
                    activation_id: act,
                },
            );
        }
        let mut row = 0;
        for i in 0..i_n {
            for o in i_n..i_n + o_n {
                let w = sample(&mut rng, &config.weight, lo, hi);
                g.write_conn(row, ConnRow::new(i as NodeKey, o as NodeKey, true, w));
                row += 1;
            }
        }
        Ok(g)
    }

    /// Builds a genome from raw tensors, checking every invariant.
    pub fn from_tensors(
        num_inputs: usize,
        num_outputs: usize,
        nodes: Array2<f64>,
        conns: Array2<f64>,
    ) -> Result<Self, GenomeError> {
        if nodes.ncols() != NODE_COLS || conns.ncols() != CONN_COLS {
            return Err(GenomeError::ShapeMismatch(format!(
                "expected {NODE_COLS} node columns and {CONN_COLS} connection columns, got {} and {}",
                nodes.ncols(),
                conns.ncols()
            )));
        }
        let g = Self {
            nodes,
            conns,
            num_inputs,
            num_outputs,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn nodes(&self) -> &Array2<f64> {
        &self.nodes
    }

    pub fn conns(&self) -> &Array2<f64> {
        &self.conns
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn max_nodes(&self) -> usize {
        self.nodes.nrows()
    }

    pub fn max_conns(&self) -> usize {
        self.conns.nrows()
    }

    pub fn is_input_key(&self, key: NodeKey) -> bool {
        (key as usize) < self.num_inputs
    }

    pub fn is_output_key(&self, key: NodeKey) -> bool {
        let k = key as usize;
        k >= self.num_inputs && k < self.num_inputs + self.num_outputs
    }

    pub fn is_hidden_key(&self, key: NodeKey) -> bool {
        key as usize >= self.num_inputs + self.num_outputs
    }

    pub fn same_shape(&self, other: &Self) -> Result<(), GenomeError> {
        if self.num_inputs != other.num_inputs
            || self.num_outputs != other.num_outputs
            || self.nodes.dim() != other.nodes.dim()
            || self.conns.dim() != other.conns.dim()
        {
            return Err(GenomeError::ShapeMismatch(format!(
                "({} in, {} out, {}x{}) vs ({} in, {} out, {}x{})",
                self.num_inputs,
                self.num_outputs,
                self.max_nodes(),
                self.max_conns(),
                other.num_inputs,
                other.num_outputs,
                other.max_nodes(),
                other.max_conns()
            )));
        }
        Ok(())
    }

    pub fn is_node_row_live(&self, row: usize) -> bool {
        !self.nodes[[row, node_col::KEY]].is_nan()
    }

    pub fn is_conn_row_live(&self, row: usize) -> bool {
        !self.conns[[row, conn_col::IN]].is_nan()
    }

    pub fn live_node_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.max_nodes()).filter(|&r| self.is_node_row_live(r))
    }

    pub fn live_conn_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.max_conns()).filter(|&r| self.is_conn_row_live(r))
    }

    pub fn node(&self, row: usize) -> Option<NodeRow> {
        self.is_node_row_live(row)
            .then(|| NodeRow::from_cells(self.nodes.row(row)))
    }

    pub fn conn(&self, row: usize) -> Option<ConnRow> {
        self.is_conn_row_live(row)
            .then(|| ConnRow::from_cells(self.conns.row(row)))
    }

    pub fn live_nodes(&self) -> impl Iterator<Item = NodeRow> + '_ {
        self.live_node_rows().map(|r| NodeRow::from_cells(self.nodes.row(r)))
    }

    pub fn live_conns(&self) -> impl Iterator<Item = ConnRow> + '_ {
        self.live_conn_rows().map(|r| ConnRow::from_cells(self.conns.row(r)))
    }

    pub fn node_row_of(&self, key: NodeKey) -> Option<usize> {
        let k = key as f64;
        (0..self.max_nodes()).find(|&r| self.nodes[[r, node_col::KEY]] == k)
    }

    pub fn conn_row_of(&self, in_key: NodeKey, out_key: NodeKey) -> Option<usize> {
        let (i, o) = (in_key as f64, out_key as f64);
        (0..self.max_conns()).find(|&r| self.conns[[r, conn_col::IN]] == i && self.conns[[r, conn_col::OUT]] == o)
    }

    fn first_free_node_row(&self) -> Option<usize> {
        (0..self.max_nodes()).find(|&r| row_is_padding(self.nodes.row(r)))
    }

    fn first_free_conn_row(&self) -> Option<usize> {
        (0..self.max_conns()).find(|&r| row_is_padding(self.conns.row(r)))
    }

    pub fn free_node_rows(&self) -> usize {
        self.max_nodes() - self.live_node_rows().count()
    }

    pub fn free_conn_rows(&self) -> usize {
        self.max_conns() - self.live_conn_rows().count()
    }

    /// `(live node rows, live connection rows)`.
    pub fn count_live(&self) -> (usize, usize) {
        (self.live_node_rows().count(), self.live_conn_rows().count())
    }

    fn write_node(&mut self, row: usize, n: NodeRow) {
        self.nodes
            .row_mut(row)
            .iter_mut()
            .zip(n.to_cells())
            .for_each(|(c, v)| *c = v);
    }

    fn write_conn(&mut self, row: usize, c: ConnRow) {
        self.conns
            .row_mut(row)
            .iter_mut()
            .zip(c.to_cells())
            .for_each(|(cell, v)| *cell = v);
    }

    fn check_node_row(row: &NodeRow) -> Result<(), GenomeError> {
        if !row.bias.is_finite() || !row.response.is_finite() {
            return Err(GenomeError::InvalidRow(format!(
                "node {} has non-finite attributes",
                row.key
            )));
        }
        check_function_code(node_col::AGGREGATION, row.aggregation_id as f64)?;
        check_function_code(node_col::ACTIVATION, row.activation_id as f64)
    }

    pub(crate) fn add_node_mut(&mut self, row: NodeRow) -> Result<usize, GenomeError> {
        Self::check_node_row(&row)?;
        if self.node_row_of(row.key).is_some() {
            return Err(GenomeError::DuplicateKey(row.key));
        }
        let r = self.first_free_node_row().ok_or(GenomeError::CapacityFull("node"))?;
        self.write_node(r, row);
        Ok(r)
    }

    pub(crate) fn remove_node_mut(&mut self, key: NodeKey) -> Result<(), GenomeError> {
        let r = self
            .node_row_of(key)
            .ok_or_else(|| GenomeError::KeyNotFound(format!("node {key}")))?;
        if !self.is_hidden_key(key) {
            return Err(GenomeError::ProtectedNode(key));
        }
        self.nodes.row_mut(r).fill(f64::NAN);
        let k = key as f64;
        for cr in 0..self.max_conns() {
            let (i, o) = (self.conns[[cr, conn_col::IN]], self.conns[[cr, conn_col::OUT]]);
            if i == k || o == k {
                self.conns.row_mut(cr).fill(f64::NAN);
            }
        }
        Ok(())
    }

    pub(crate) fn add_conn_mut(&mut self, row: ConnRow) -> Result<usize, GenomeError> {
        if !row.weight.is_finite() {
            return Err(GenomeError::InvalidRow(format!(
                "connection ({}, {}) has a non-finite weight",
                row.in_key, row.out_key
            )));
        }
        if self.conn_row_of(row.in_key, row.out_key).is_some() {
            return Err(GenomeError::DuplicateConn(row.in_key, row.out_key));
        }
        if self.node_row_of(row.in_key).is_none() || self.node_row_of(row.out_key).is_none() {
            return Err(GenomeError::DanglingEndpoint(row.in_key, row.out_key));
        }
        if self.is_input_key(row.out_key) || self.is_output_key(row.in_key) {
            return Err(GenomeError::InvalidRow(format!(
                "connection ({}, {}) runs against the input-to-output direction",
                row.in_key, row.out_key
            )));
        }
        let r = self
            .first_free_conn_row()
            .ok_or(GenomeError::CapacityFull("connection"))?;
        self.write_conn(r, row);
        Ok(r)
    }

    pub(crate) fn remove_conn_mut(&mut self, in_key: NodeKey, out_key: NodeKey) -> Result<(), GenomeError> {
        let r = self
            .conn_row_of(in_key, out_key)
            .ok_or_else(|| GenomeError::KeyNotFound(format!("connection ({in_key}, {out_key})")))?;
        self.conns.row_mut(r).fill(f64::NAN);
        Ok(())
    }

    pub(crate) fn set_node_attr_mut(&mut self, key: NodeKey, attr_index: usize, value: f64) -> Result<(), GenomeError> {
        if attr_index > 3 {
            return Err(GenomeError::BadAttrIndex(attr_index));
        }
        if value.is_nan() {
            return Err(GenomeError::InvalidRow("attribute value is NaN".into()));
        }
        let r = self
            .node_row_of(key)
            .ok_or_else(|| GenomeError::KeyNotFound(format!("node {key}")))?;
        if attr_index >= 2 {
            check_function_code(1 + attr_index, value)?;
        } else if !value.is_finite() {
            return Err(GenomeError::InvalidRow(format!("node {key}: non-finite attribute")));
        }
        self.nodes[[r, 1 + attr_index]] = value;
        Ok(())
    }

    pub(crate) fn set_conn_attr_mut(
        &mut self,
        in_key: NodeKey,
        out_key: NodeKey,
        attr_index: usize,
        value: f64,
    ) -> Result<(), GenomeError> {
        if attr_index > 1 {
            return Err(GenomeError::BadAttrIndex(attr_index));
        }
        if value.is_nan() {
            return Err(GenomeError::InvalidRow("attribute value is NaN".into()));
        }
        let r = self
            .conn_row_of(in_key, out_key)
            .ok_or_else(|| GenomeError::KeyNotFound(format!("connection ({in_key}, {out_key})")))?;
        if attr_index == 0 && value != 0.0 && value != 1.0 {
            return Err(GenomeError::InvalidRow(format!("enabled flag {value} is not 0 or 1")));
        }
        if !value.is_finite() {
            return Err(GenomeError::InvalidRow("non-finite weight".into()));
        }
        self.conns[[r, conn_col::ENABLED + attr_index]] = value;
        Ok(())
    }

    // Cell-level access by row for the mutation and crossover kernels.
    pub(crate) fn node_cell_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.nodes[[row, col]]
    }

    pub(crate) fn conn_cell_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.conns[[row, col]]
    }

    /// Writes `row` into the first all-NaN node row.
    pub fn add_node(&self, row: NodeRow) -> Result<Self, GenomeError> {
        let mut g = self.clone();
        g.add_node_mut(row)?;
        Ok(g)
    }

    /// Clears a hidden node's row and every connection touching it.
    pub fn remove_node(&self, key: NodeKey) -> Result<Self, GenomeError> {
        let mut g = self.clone();
        g.remove_node_mut(key)?;
        Ok(g)
    }

    /// Writes `row` into the first all-NaN connection row.
    pub fn add_conn(&self, row: ConnRow) -> Result<Self, GenomeError> {
        let mut g = self.clone();
        g.add_conn_mut(row)?;
        Ok(g)
    }

    pub fn remove_conn(&self, in_key: NodeKey, out_key: NodeKey) -> Result<Self, GenomeError> {
        let mut g = self.clone();
        g.remove_conn_mut(in_key, out_key)?;
        Ok(g)
    }

    /// Sets node attribute `attr_index` (0 bias, 1 response, 2 aggregation,
    /// 3 activation), i.e. column `1 + attr_index`.
    pub fn set_node_attr(&self, key: NodeKey, attr_index: usize, value: f64) -> Result<Self, GenomeError> {
        let mut g = self.clone();
        g.set_node_attr_mut(key, attr_index, value)?;
        Ok(g)
    }

    /// Sets connection attribute `attr_index` (0 enabled, 1 weight), i.e.
    /// column `2 + attr_index`.
    pub fn set_conn_attr(
        &self,
        in_key: NodeKey,
        out_key: NodeKey,
        attr_index: usize,
        value: f64,
    ) -> Result<Self, GenomeError> {
        let mut g = self.clone();
        g.set_conn_attr_mut(in_key, out_key, attr_index, value)?;
        Ok(g)
    }

    /// Checks every structural invariant of the encoding.
    pub fn validate(&self) -> Result<(), GenomeError> {
        let bad = |m: String| Err(GenomeError::Integrity(m));
        let mut keys = std::collections::HashSet::new();
        for r in 0..self.max_nodes() {
            let row = self.nodes.row(r);
            let nan = row.iter().filter(|x| x.is_nan()).count();
            if nan == 0 {
                let key = row[node_col::KEY];
                if key < 0.0 || key.fract() != 0.0 || !key.is_finite() {
                    return bad(format!("node row {r}: key {key} is not a non-negative integer"));
                }
                for c in [node_col::AGGREGATION, node_col::ACTIVATION] {
                    if let Err(e) = check_function_code(c, row[c]) {
                        return bad(format!("node row {r}: {e}"));
                    }
                }
                if !row[node_col::BIAS].is_finite() || !row[node_col::RESPONSE].is_finite() {
                    return bad(format!("node row {r}: non-finite attribute"));
                }
                if !keys.insert(key as NodeKey) {
                    return bad(format!("node row {r}: duplicate key {key}"));
                }
            } else if nan != NODE_COLS {
                return bad(format!("node row {r} is partially NaN"));
            }
        }
        for k in 0..(self.num_inputs + self.num_outputs) as NodeKey {
            if !keys.contains(&k) {
                return bad(format!("input/output node {k} is missing"));
            }
        }
        let mut pairs = std::collections::HashSet::new();
        for r in 0..self.max_conns() {
            let row = self.conns.row(r);
            let nan = row.iter().filter(|x| x.is_nan()).count();
            if nan == 0 {
                let (i, o) = (row[conn_col::IN], row[conn_col::OUT]);
                if i < 0.0 || o < 0.0 || i.fract() != 0.0 || o.fract() != 0.0 {
                    return bad(format!("connection row {r}: endpoint keys must be integers"));
                }
                let (i, o) = (i as NodeKey, o as NodeKey);
                let e = row[conn_col::ENABLED];
                if e != 0.0 && e != 1.0 {
                    return bad(format!("connection row {r}: enabled flag {e} is not 0 or 1"));
                }
                if !row[conn_col::WEIGHT].is_finite() {
                    return bad(format!("connection row {r}: non-finite weight"));
                }
                if !keys.contains(&i) || !keys.contains(&o) {
                    return bad(format!("connection row {r}: ({i}, {o}) has a dangling endpoint"));
                }
                if self.is_input_key(o) {
                    return bad(format!("connection row {r}: ({i}, {o}) ends at an input"));
                }
                if self.is_output_key(i) {
                    return bad(format!("connection row {r}: ({i}, {o}) starts at an output"));
                }
                if !pairs.insert((i, o)) {
                    return bad(format!("connection row {r}: duplicate ({i}, {o})"));
                }
            } else if nan != CONN_COLS {
                return bad(format!("connection row {r} is partially NaN"));
            }
        }
        Ok(())
    }
}
