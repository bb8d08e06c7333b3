//! Line-oriented genome document.
//!
//! ```text
//! tneat-genome 1
//! inputs 2
//! outputs 1
//! max_nodes 4
//! max_conns 4
//! nodes
//! 0 0 1 0 1
//! 1 0 1 0 1
//! 2 -0.37 1 0 1
//! null null null null null
//! conns
//! 0 2 1 0.81
//! 1 2 1 -1.2
//! null null null null
//! null null null null
//! ```
//!
//! Every row of both tensors is written, padding included, so row positions
//! survive a round trip. Numbers use the shortest representation that parses
//! back to the same `f64`.

use ndarray::Array2;
use thiserror::Error;

use super::{GenomeTensors, CONN_COLS, NODE_COLS};

const MAGIC: &str = "tneat-genome 1";

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {field}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

fn fmt_cell(x: f64) -> String {
    if x.is_nan() {
        "null".to_string()
    } else {
        format!("{x}")
    }
}

pub fn serialize_genome(g: &GenomeTensors) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("inputs {}\n", g.num_inputs()));
    out.push_str(&format!("outputs {}\n", g.num_outputs()));
    out.push_str(&format!("max_nodes {}\n", g.max_nodes()));
    out.push_str(&format!("max_conns {}\n", g.max_conns()));
    for (label, t) in [("nodes", g.nodes()), ("conns", g.conns())] {
        out.push_str(label);
        out.push('\n');
        for row in t.rows() {
            let cells: Vec<String> = row.iter().map(|&x| fmt_cell(x)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, field: &str) -> Result<(usize, &'a str), ParseError> {
        loop {
            match self.inner.next() {
                Some((i, l)) if l.trim().is_empty() => self.last = i + 1,
                Some((i, l)) => {
                    self.last = i + 1;
                    return Ok((i + 1, l.trim()));
                }
                None => {
                    return Err(ParseError {
                        line: self.last + 1,
                        field: field.to_string(),
                        message: "unexpected end of document".into(),
                    })
                }
            }
        }
    }
}

fn err(line: usize, field: impl Into<String>, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn header(lines: &mut Lines, name: &str) -> Result<usize, ParseError> {
    let (line, text) = lines.next(name)?;
    let mut parts = text.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == name => v
            .parse()
            .map_err(|_| err(line, name, format!("expected a non-negative integer, got {v:?}"))),
        _ => Err(err(line, name, format!("expected `{name} <count>`, got {text:?}"))),
    }
}

fn rows(lines: &mut Lines, label: &str, n: usize, cols: usize) -> Result<Array2<f64>, ParseError> {
    let (line, text) = lines.next(label)?;
    if text != label {
        return Err(err(line, label, format!("expected section `{label}`, got {text:?}")));
    }
    let mut t = Array2::from_elem((n, cols), f64::NAN);
    for r in 0..n {
        let (line, text) = lines.next(&format!("{label}[{r}]"))?;
        let cells: Vec<&str> = text.split_whitespace().collect();
        if cells.len() != cols {
            return Err(err(
                line,
                format!("{label}[{r}]"),
                format!("expected {cols} cells, found {}", cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            t[[r, c]] = match *cell {
                "null" => f64::NAN,
                s => s
                    .parse::<f64>()
                    .ok()
                    .filter(|x| !x.is_nan())
                    .ok_or_else(|| err(line, format!("{label}[{r}][{c}]"), format!("bad number {s:?}")))?,
            };
        }
    }
    Ok(t)
}

/// Parses a genome document and checks all encoding invariants.
pub fn parse_genome(text: &str) -> Result<GenomeTensors, ParseError> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
        last: 0,
    };
    let (line, magic) = lines.next("header")?;
    if magic != MAGIC {
        return Err(err(line, "header", format!("expected {MAGIC:?}, got {magic:?}")));
    }
    let inputs = header(&mut lines, "inputs")?;
    let outputs = header(&mut lines, "outputs")?;
    let max_nodes = header(&mut lines, "max_nodes")?;
    let max_conns = header(&mut lines, "max_conns")?;
    let nodes_line = lines.last + 1;
    let nodes = rows(&mut lines, "nodes", max_nodes, NODE_COLS)?;
    let conns = rows(&mut lines, "conns", max_conns, CONN_COLS)?;
    if let Some((i, extra)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(i + 1, "trailer", format!("unexpected content {extra:?}")));
    }
    GenomeTensors::from_tensors(inputs, outputs, nodes, conns).map_err(|e| err(nodes_line, "genome", e.to_string()))
}
