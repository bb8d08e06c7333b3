//! Fitness problems: XOR, 1-D function regression and cart-pole balancing.
//!
//! Each problem scores a transformed network with a higher-is-better real.
//! Population evaluation comes in two flavours that must agree exactly: a
//! batched path (all sample inputs in one `forward_batch`, all cart-pole
//! environments advanced in lockstep) and a per-genome sequential path.

pub mod cartpole;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{FunctionRegistry, InferenceError, TransformedNetwork};
use crate::rng::{stage, RngStream};
use cartpole::CartPoleState;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("network shape {got:?} does not match problem shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("genome {index}: {source}")]
    Genome {
        index: usize,
        #[source]
        source: Box<ProblemError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub episodic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegressionTarget {
    Sin,
    Cos,
    Square,
}

impl RegressionTarget {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Self::Sin),
            "cos" => Some(Self::Cos),
            "square" => Some(Self::Square),
            _ => None,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Sin => x.sin(),
            Self::Cos => x.cos(),
            Self::Square => x * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProblemKind {
    Xor,
    Regression { target: RegressionTarget, samples: usize },
    CartPole,
}

impl ProblemKind {
    pub fn shape(&self) -> (usize, usize) {
        let s = self.spec();
        (s.inputs, s.outputs)
    }

    pub fn spec(&self) -> ProblemSpec {
        let (inputs, outputs, episodic) = match self {
            ProblemKind::Xor => (2, 1, false),
            ProblemKind::Regression { .. } => (1, 1, false),
            ProblemKind::CartPole => (4, 1, true),
        };
        ProblemSpec {
            inputs,
            outputs,
            episodic,
        }
    }

    pub fn build(&self) -> Box<dyn Problem> {
        match *self {
            ProblemKind::Xor => Box::new(Xor),
            ProblemKind::Regression { target, samples } => Box::new(Regression::new(target, samples)),
            ProblemKind::CartPole => Box::new(CartPole),
        }
    }
}

/// How a population is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Data-parallel over genomes; episodic problems step in lockstep.
    Batched,
    /// One genome at a time on the calling thread.
    Sequential,
}

pub trait Problem: Send + Sync {
    fn spec(&self) -> ProblemSpec;

    /// Scores one network. `stream` is the genome's evaluation stream.
    fn evaluate(
        &self,
        net: &TransformedNetwork,
        registry: &FunctionRegistry,
        stream: &RngStream,
    ) -> Result<f64, ProblemError>;

    /// Batched population scoring; must equal `evaluate` elementwise.
    fn evaluate_batched(
        &self,
        nets: &[TransformedNetwork],
        registry: &FunctionRegistry,
        streams: &[RngStream],
    ) -> Vec<Result<f64, ProblemError>> {
        nets.par_iter()
            .zip(streams.par_iter())
            .map(|(n, s)| self.evaluate(n, registry, s))
            .collect()
    }

    fn check_shape(&self, net: &TransformedNetwork) -> Result<(), ProblemError> {
        let spec = self.spec();
        let got = (net.num_inputs(), net.num_outputs());
        if got != (spec.inputs, spec.outputs) {
            return Err(ProblemError::ShapeMismatch {
                expected: (spec.inputs, spec.outputs),
                got,
            });
        }
        Ok(())
    }
}

/// FNV-1a over the bits of the transformed tensors. Identical genomes get
/// identical evaluation streams, which keeps elite re-evaluation exact.
pub fn network_fingerprint(net: &TransformedNetwork) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let cells = net.nodes().iter().chain(net.order()).chain(net.conns_expanded().iter());
    for x in cells {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Per-genome evaluation stream: depends only on the seed and the network.
pub fn evaluation_stream(root: &RngStream, net: &TransformedNetwork) -> RngStream {
    root.descend(&[stage::EVALUATE, network_fingerprint(net)])
}

/// Scores a transformed population; errors carry the genome index.
pub fn evaluate_population(
    problem: &dyn Problem,
    nets: &[TransformedNetwork],
    registry: &FunctionRegistry,
    root: &RngStream,
    mode: EvalMode,
) -> Result<Vec<f64>, ProblemError> {
    let results: Vec<Result<f64, ProblemError>> = match mode {
        EvalMode::Batched => {
            let streams: Vec<RngStream> = nets.par_iter().map(|n| evaluation_stream(root, n)).collect();
            problem.evaluate_batched(nets, registry, &streams)
        }
        EvalMode::Sequential => nets
            .iter()
            .map(|n| problem.evaluate(n, registry, &evaluation_stream(root, n)))
            .collect(),
    };
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| ProblemError::Genome {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

pub const XOR_CASES: [([f64; 2], f64); 4] = [
    ([0.0, 0.0], 0.0),
    ([0.0, 1.0], 1.0),
    ([1.0, 0.0], 1.0),
    ([1.0, 1.0], 0.0),
];

/// `4 - sum of squared errors` over the four XOR cases.
pub fn eval_xor<F>(mut forward: F) -> Result<f64, ProblemError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, InferenceError>,
{
    let mut sse = 0.0;
    for (x, t) in XOR_CASES {
        let y = forward(&x)?;
        if y.len() != 1 {
            return Err(ProblemError::ShapeMismatch {
                expected: (2, 1),
                got: (2, y.len()),
            });
        }
        sse += (y[0] - t) * (y[0] - t);
    }
    Ok(4.0 - sse)
}

/// Negative mean squared error of `forward` against `target` on `samples`.
pub fn eval_regression<F>(mut forward: F, target: impl Fn(f64) -> f64, samples: &[f64]) -> Result<f64, ProblemError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, InferenceError>,
{
    let mut sse = 0.0;
    for &x in samples {
        let y = forward(&[x])?;
        if y.len() != 1 {
            return Err(ProblemError::ShapeMismatch {
                expected: (1, 1),
                got: (1, y.len()),
            });
        }
        let e = y[0] - target(x);
        sse += e * e;
    }
    Ok(-sse / samples.len() as f64)
}

/// Steps survived (1..=500) from an initial state drawn from `stream`.
pub fn eval_cartpole<F>(forward: F, stream: &RngStream) -> Result<f64, ProblemError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, InferenceError>,
{
    let mut forward = forward;
    let start = CartPoleState::random(&mut stream.rng());
    let steps = cartpole::run_episode(start, |obs| Ok(forward(obs)?[0]))?;
    Ok(steps as f64)
}

pub struct Xor;

impl Xor {
    fn batch() -> Array2<f64> {
        Array2::from_shape_fn((4, 2), |(r, c)| XOR_CASES[r].0[c])
    }
}

impl Problem for Xor {
    fn spec(&self) -> ProblemSpec {
        ProblemKind::Xor.spec()
    }

    fn evaluate(
        &self,
        net: &TransformedNetwork,
        registry: &FunctionRegistry,
        _: &RngStream,
    ) -> Result<f64, ProblemError> {
        self.check_shape(net)?;
        eval_xor(|x| net.forward(registry, x))
    }

    fn evaluate_batched(
        &self,
        nets: &[TransformedNetwork],
        registry: &FunctionRegistry,
        _: &[RngStream],
    ) -> Vec<Result<f64, ProblemError>> {
        let inputs = Self::batch();
        nets.par_iter()
            .map(|net| {
                self.check_shape(net)?;
                let y = net.forward_batch(registry, &inputs)?;
                let mut sse = 0.0;
                for (r, (_, t)) in XOR_CASES.iter().enumerate() {
                    sse += (y[[r, 0]] - t) * (y[[r, 0]] - t);
                }
                Ok(4.0 - sse)
            })
            .collect()
    }
}

pub struct Regression {
    target: RegressionTarget,
    samples: Vec<f64>,
}

impl Regression {
    /// `samples` evenly spaced points on `[-pi, pi]`, endpoints included.
    pub fn new(target: RegressionTarget, samples: usize) -> Self {
        let pi = std::f64::consts::PI;
        let step = 2.0 * pi / (samples.max(2) - 1) as f64;
        let samples = (0..samples).map(|i| -pi + step * i as f64).collect();
        Self { target, samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

impl Problem for Regression {
    fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            inputs: 1,
            outputs: 1,
            episodic: false,
        }
    }

    fn evaluate(
        &self,
        net: &TransformedNetwork,
        registry: &FunctionRegistry,
        _: &RngStream,
    ) -> Result<f64, ProblemError> {
        self.check_shape(net)?;
        eval_regression(|x| net.forward(registry, x), |x| self.target.eval(x), &self.samples)
    }

    fn evaluate_batched(
        &self,
        nets: &[TransformedNetwork],
        registry: &FunctionRegistry,
        _: &[RngStream],
    ) -> Vec<Result<f64, ProblemError>> {
        let inputs = Array2::from_shape_fn((self.samples.len(), 1), |(r, _)| self.samples[r]);
        nets.par_iter()
            .map(|net| {
                self.check_shape(net)?;
                let y = net.forward_batch(registry, &inputs)?;
                let mut sse = 0.0;
                for (r, &x) in self.samples.iter().enumerate() {
                    let e = y[[r, 0]] - self.target.eval(x);
                    sse += e * e;
                }
                Ok(-sse / self.samples.len() as f64)
            })
            .collect()
    }
}

pub struct CartPole;

impl Problem for CartPole {
    fn spec(&self) -> ProblemSpec {
        ProblemKind::CartPole.spec()
    }

    fn evaluate(
        &self,
        net: &TransformedNetwork,
        registry: &FunctionRegistry,
        stream: &RngStream,
    ) -> Result<f64, ProblemError> {
        self.check_shape(net)?;
        eval_cartpole(|x| net.forward(registry, x), stream)
    }

    /// All environments advance one step per iteration; finished episodes
    /// are frozen until every genome is done.
    fn evaluate_batched(
        &self,
        nets: &[TransformedNetwork],
        registry: &FunctionRegistry,
        streams: &[RngStream],
    ) -> Vec<Result<f64, ProblemError>> {
        let mut results: Vec<Option<Result<f64, ProblemError>>> =
            nets.iter().map(|n| self.check_shape(n).err().map(Err)).collect();
        let mut states: Vec<CartPoleState> = streams.iter().map(|s| CartPoleState::random(&mut s.rng())).collect();
        loop {
            let active: Vec<usize> = (0..nets.len())
                .filter(|&i| results[i].is_none() && !states[i].is_terminal())
                .collect();
            if active.is_empty() {
                break;
            }
            let stepped: Vec<(usize, Result<CartPoleState, InferenceError>)> = active
                .par_iter()
                .map(|&i| {
                    let s = states[i];
                    let out = nets[i].forward(registry, &s.observation());
                    (i, out.map(|y| s.step(cartpole::action(y[0])).expect("active")))
                })
                .collect();
            for (i, r) in stepped {
                match r {
                    Ok(s) => states[i] = s,
                    Err(e) => results[i] = Some(Err(e.into())),
                }
            }
        }
        results
            .into_iter()
            .zip(&states)
            .map(|(r, s)| r.unwrap_or(Ok(s.steps as f64)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NeatConfig;
    use crate::evolution::mutation::{mutate, NodeKeyAllocator};
    use crate::genome::GenomeTensors;
    use crate::inference::{transform, Activation};

    /// Network whose single output is the constant `b` (zero weights).
    fn constant_net(inputs: usize, b: f64) -> TransformedNetwork {
        let mut cfg = NeatConfig {
            inputs,
            outputs: 1,
            max_nodes: 6,
            max_conns: 8,
            activation_default: Activation::Identity,
            activation_options: vec![Activation::Identity],
            ..NeatConfig::default()
        };
        cfg.bias.init_mean = b;
        cfg.bias.init_std = 0.0;
        cfg.weight.init_mean = 0.0;
        cfg.weight.init_std = 0.0;
        transform(&GenomeTensors::init(&cfg, &RngStream::new(0)).unwrap()).unwrap()
    }

    fn random_nets(inputs: usize, count: usize, seed: u64) -> Vec<TransformedNetwork> {
        let cfg = NeatConfig {
            inputs,
            outputs: 1,
            max_nodes: 12,
            max_conns: 24,
            node_add: 0.5,
            conn_add: 0.5,
            ..NeatConfig::default()
        };
        let mut alloc = NodeKeyAllocator::new(inputs, 1);
        (0..count)
            .map(|i| {
                let s = RngStream::new(seed).child(i as u64);
                let mut g = GenomeTensors::init(&cfg, &s).unwrap();
                for m in 0..8 {
                    g = mutate(&g, &cfg, &s.child(m), &mut alloc);
                }
                transform(&g).unwrap()
            })
            .collect()
    }

    #[test]
    fn xor_fitness_fixtures() {
        let reg = FunctionRegistry::default();
        let stream = RngStream::new(0);
        assert_eq!(Xor.evaluate(&constant_net(2, 0.5), &reg, &stream).unwrap(), 3.0);
        assert_eq!(eval_xor(|x| Ok(vec![(x[0] != x[1]) as u8 as f64])).unwrap(), 4.0);
        let three_right = eval_xor(|x| {
            Ok(vec![if x == [1.0, 1.0] {
                0.5
            } else {
                (x[0] != x[1]) as u8 as f64
            }])
        });
        assert_eq!(three_right.unwrap(), 3.75);
    }

    #[test]
    fn regression_fixtures() {
        let reg = FunctionRegistry::default();
        let problem = Regression::new(RegressionTarget::Sin, 64);
        let xs = problem.samples();
        assert_eq!(xs.len(), 64);
        assert_eq!(xs[0], -std::f64::consts::PI);
        assert!((xs[63] - std::f64::consts::PI).abs() < 1e-15);

        let expected = -xs.iter().map(|x| x.sin() * x.sin()).sum::<f64>() / 64.0;
        let got = problem
            .evaluate(&constant_net(1, 0.0), &reg, &RngStream::new(0))
            .unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got + 0.5).abs() < 0.01);

        assert_eq!(eval_regression(|x| Ok(vec![x[0].sin()]), f64::sin, xs).unwrap(), 0.0);
        for net in random_nets(1, 20, 4) {
            assert!(problem.evaluate(&net, &reg, &RngStream::new(0)).unwrap() <= 0.0);
        }
    }

    #[test]
    fn shape_is_checked() {
        let reg = FunctionRegistry::default();
        let err = Xor
            .evaluate(&constant_net(3, 0.0), &reg, &RngStream::new(0))
            .unwrap_err();
        assert_eq!(
            err,
            ProblemError::ShapeMismatch {
                expected: (2, 1),
                got: (3, 1)
            }
        );
        let nets = [constant_net(2, 0.0), constant_net(4, 0.0)];
        let err = evaluate_population(&CartPole, &nets, &reg, &RngStream::new(0), EvalMode::Batched).unwrap_err();
        assert!(matches!(err, ProblemError::Genome { index: 0, .. }));
    }

    #[test]
    fn cartpole_fitness_range_and_determinism() {
        let reg = FunctionRegistry::default();
        for (i, net) in random_nets(4, 30, 9).iter().enumerate() {
            let s = RngStream::new(i as u64);
            let f = CartPole.evaluate(net, &reg, &s).unwrap();
            assert!((1.0..=500.0).contains(&f));
            assert_eq!(f, CartPole.evaluate(net, &reg, &s).unwrap());
        }
    }

    #[test]
    fn batched_equals_sequential() {
        let reg = FunctionRegistry::default();
        let root = RngStream::new(21);
        let cases: Vec<(Box<dyn Problem>, usize)> = vec![
            (Box::new(Xor), 2),
            (Box::new(Regression::new(RegressionTarget::Sin, 64)), 1),
            (Box::new(CartPole), 4),
        ];
        for (problem, inputs) in cases {
            let nets = random_nets(inputs, 40, inputs as u64);
            let a = evaluate_population(problem.as_ref(), &nets, &reg, &root, EvalMode::Batched).unwrap();
            let b = evaluate_population(problem.as_ref(), &nets, &reg, &root, EvalMode::Sequential).unwrap();
            assert_eq!(a.len(), 40);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            let single = evaluate_population(problem.as_ref(), &nets[..1], &reg, &root, EvalMode::Batched).unwrap();
            assert_eq!(single[0].to_bits(), a[0].to_bits());
        }
    }

    #[test]
    fn identical_networks_share_streams() {
        let nets = random_nets(4, 2, 5);
        let root = RngStream::new(0);
        assert_eq!(
            evaluation_stream(&root, &nets[0]),
            evaluation_stream(&root, &nets[0].clone())
        );
        assert_ne!(network_fingerprint(&nets[0]), network_fingerprint(&nets[1]));
    }
}
