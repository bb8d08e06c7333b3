//! Integer codes for node functions.
//!
//! Non-numeric node attributes are stored in the tensors as small integer
//! codes; this registry maps those codes back to functions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(usize)]
pub enum Activation {
    Identity = 0,
    Tanh = 1,
    Sigmoid = 2,
    Relu = 3,
    Sin = 4,
    Gauss = 5,
    Abs = 6,
}

impl Activation {
    pub const ALL: [Activation; 7] = [
        Activation::Identity,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Sin,
        Activation::Gauss,
        Activation::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Sin => "sin",
            Activation::Gauss => "gauss",
            Activation::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
            Activation::Sin => x.sin(),
            Activation::Gauss => (-x * x).exp(),
            Activation::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(usize)]
pub enum Aggregation {
    Sum = 0,
    Product = 1,
    Max = 2,
    Mean = 3,
}

impl Aggregation {
    pub const ALL: [Aggregation; 4] = [
        Aggregation::Sum,
        Aggregation::Product,
        Aggregation::Max,
        Aggregation::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Sum => "sum",
            Aggregation::Product => "product",
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    /// Accumulator start value.
    #[inline]
    pub fn init(self) -> f64 {
        match self {
            Aggregation::Sum | Aggregation::Mean => 0.0,
            Aggregation::Product => 1.0,
            Aggregation::Max => f64::NEG_INFINITY,
        }
    }

    #[inline]
    pub fn step(self, acc: f64, x: f64) -> f64 {
        match self {
            Aggregation::Sum | Aggregation::Mean => acc + x,
            Aggregation::Product => acc * x,
            Aggregation::Max => acc.max(x),
        }
    }

    /// Final value after `count` steps. Aggregating nothing yields 0.
    #[inline]
    pub fn finish(self, acc: f64, count: usize) -> f64 {
        if count == 0 {
            return 0.0;
        }
        match self {
            Aggregation::Mean => acc / count as f64,
            _ => acc,
        }
    }

    pub fn apply(self, xs: &[f64]) -> f64 {
        let acc = xs.iter().fold(self.init(), |a, &x| self.step(a, x));
        self.finish(acc, xs.len())
    }
}

impl From<Activation> for usize {
    fn from(a: Activation) -> usize {
        a as usize
    }
}

impl From<Aggregation> for usize {
    fn from(a: Aggregation) -> usize {
        a as usize
    }
}

/// Dense id -> function tables.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRegistry {
    activations: Vec<Activation>,
    aggregations: Vec<Aggregation>,
}

impl Default for FunctionRegistry {
    fn default() -> Self {
        Self {
            activations: Activation::ALL.to_vec(),
            aggregations: Aggregation::ALL.to_vec(),
        }
    }
}

impl FunctionRegistry {
    #[inline]
    pub fn activation(&self, id: usize) -> Option<Activation> {
        self.activations.get(id).copied()
    }

    #[inline]
    pub fn aggregation(&self, id: usize) -> Option<Aggregation> {
        self.aggregations.get(id).copied()
    }

    pub fn num_activations(&self) -> usize {
        self.activations.len()
    }

    pub fn num_aggregations(&self) -> usize {
        self.aggregations.len()
    }
}
