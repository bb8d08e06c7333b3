//! Hyperparameters and the flat `key = value` experiment file.
//!
//! Keys use the hyperparameter names verbatim (`pop_size`, `node_add`,
//! `weight_mutate_power`, ...). Missing keys fall back to the defaults below;
//! unknown or repeated keys are rejected.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::registry::{Activation, Aggregation};
use crate::problems::{ProblemKind, RegressionTarget};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkType {
    Feedforward,
    Recurrent,
}

impl fmt::Display for NetworkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkType::Feedforward => "feedforward",
            NetworkType::Recurrent => "recurrent",
        })
    }
}

/// Sampling and mutation controls for one real-valued attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericAttrConfig {
    pub init_mean: f64,
    pub init_std: f64,
    pub mutate_power: f64,
    pub mutate_rate: f64,
    pub replace_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeatConfig {
    pub seed: u64,
    pub fitness_target: f64,
    pub generation_limit: usize,
    pub pop_size: usize,
    pub network_type: NetworkType,
    pub inputs: usize,
    pub outputs: usize,
    pub max_nodes: usize,
    pub max_conns: usize,
    pub max_species: usize,
    pub compatibility_disjoint: f64,
    pub compatibility_homologous: f64,
    pub node_add: f64,
    pub node_delete: f64,
    pub conn_add: f64,
    pub conn_delete: f64,
    pub compatibility_threshold: f64,
    pub species_elitism: usize,
    pub max_stagnation: usize,
    pub genome_elitism: usize,
    pub survival_threshold: f64,
    pub spawn_number_change_rate: f64,
    pub bias: NumericAttrConfig,
    pub response: NumericAttrConfig,
    pub weight: NumericAttrConfig,
    pub activation_default: Activation,
    pub activation_options: Vec<Activation>,
    pub activation_replace_rate: f64,
    pub aggregation_default: Aggregation,
    pub aggregation_options: Vec<Aggregation>,
    pub aggregation_replace_rate: f64,
    /// Probability of flipping a connection's enabled flag during mutation.
    pub enabled_mutate_rate: f64,
    pub attr_min: f64,
    pub attr_max: f64,
}

impl Default for NeatConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            fitness_target: f64::INFINITY,
            generation_limit: 100,
            pop_size: 1000,
            network_type: NetworkType::Feedforward,
            inputs: 2,
            outputs: 1,
            max_nodes: 50,
            max_conns: 100,
            max_species: 10,
            compatibility_disjoint: 1.0,
            compatibility_homologous: 0.5,
            node_add: 0.2,
            node_delete: 0.0,
            conn_add: 0.4,
            conn_delete: 0.0,
            compatibility_threshold: 3.5,
            species_elitism: 2,
            max_stagnation: 15,
            genome_elitism: 2,
            survival_threshold: 0.2,
            spawn_number_change_rate: 0.5,
            bias: NumericAttrConfig {
                init_mean: 0.0,
                init_std: 1.0,
                mutate_power: 0.5,
                mutate_rate: 0.7,
                replace_rate: 0.1,
            },
            response: NumericAttrConfig {
                init_mean: 1.0,
                init_std: 0.0,
                mutate_power: 0.0,
                mutate_rate: 0.0,
                replace_rate: 0.0,
            },
            weight: NumericAttrConfig {
                init_mean: 0.0,
                init_std: 1.0,
                mutate_power: 0.5,
                mutate_rate: 0.8,
                replace_rate: 0.1,
            },
            activation_default: Activation::Tanh,
            activation_options: vec![Activation::Tanh],
            activation_replace_rate: 0.0,
            aggregation_default: Aggregation::Sum,
            aggregation_options: vec![Aggregation::Sum],
            aggregation_replace_rate: 0.0,
            enabled_mutate_rate: 0.0,
            attr_min: -30.0,
            attr_max: 30.0,
        }
    }
}

impl NeatConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let probs = [
            ("node_add", self.node_add),
            ("node_delete", self.node_delete),
            ("conn_add", self.conn_add),
            ("conn_delete", self.conn_delete),
            ("survival_threshold", self.survival_threshold),
            ("bias_mutate_rate", self.bias.mutate_rate),
            ("bias_replace_rate", self.bias.replace_rate),
            ("response_mutate_rate", self.response.mutate_rate),
            ("response_replace_rate", self.response.replace_rate),
            ("weight_mutate_rate", self.weight.mutate_rate),
            ("weight_replace_rate", self.weight.replace_rate),
            ("activation_replace_rate", self.activation_replace_rate),
            ("aggregation_replace_rate", self.aggregation_replace_rate),
            ("enabled_mutate_rate", self.enabled_mutate_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.inputs == 0 || self.outputs == 0 {
            return invalid("inputs and outputs must be at least 1".into());
        }
        if self.max_nodes < self.inputs + self.outputs {
            return invalid(format!(
                "max_nodes = {} is smaller than inputs + outputs = {}",
                self.max_nodes,
                self.inputs + self.outputs
            ));
        }
        if self.max_conns < self.inputs * self.outputs {
            return invalid(format!(
                "max_conns = {} cannot hold the {} initial connections",
                self.max_conns,
                self.inputs * self.outputs
            ));
        }
        if self.pop_size < 2 * self.species_elitism || self.pop_size == 0 {
            return invalid(format!(
                "pop_size = {} must be at least 2 * species_elitism = {}",
                self.pop_size,
                2 * self.species_elitism
            ));
        }
        if self.max_species == 0 || self.max_species > self.pop_size {
            return invalid(format!("max_species = {} must be in 1..=pop_size", self.max_species));
        }
        if self.survival_threshold <= 0.0 {
            return invalid("survival_threshold must be positive".into());
        }
        if self.spawn_number_change_rate < 0.0 {
            return invalid("spawn_number_change_rate must be non-negative".into());
        }
        if self.compatibility_threshold < 0.0 {
            return invalid("compatibility_threshold must be non-negative".into());
        }
        if self.attr_min.is_nan() || self.attr_max.is_nan() || self.attr_min > self.attr_max {
            return invalid("attr_min must not exceed attr_max".into());
        }
        for (name, a) in [
            ("bias", self.bias),
            ("response", self.response),
            ("weight", self.weight),
        ] {
            if a.init_std < 0.0 || a.mutate_power < 0.0 {
                return invalid(format!("{name}: init_std and mutate_power must be non-negative"));
            }
        }
        if self.activation_options.is_empty() || self.aggregation_options.is_empty() {
            return invalid("activation_options and aggregation_options must be non-empty".into());
        }
        Ok(())
    }
}

/// A full experiment: algorithm hyperparameters plus the problem to solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub neat: NeatConfig,
    pub problem: ProblemKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let problem = ProblemKind::Xor;
        let mut neat = NeatConfig::default();
        let (i, o) = problem.shape();
        neat.inputs = i;
        neat.outputs = o;
        Self { neat, problem }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: e.to_string(),
    })
}

fn parse_real(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => parse_value(line, key, v),
    }
}

/// Integer-valued keys also accept a float spelling (`100.0`).
fn parse_count(line: usize, key: &str, v: &str) -> Result<usize, ConfigError> {
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    let x = parse_real(line, key, v)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason: format!("{v} is not a non-negative integer"),
        })
    }
}

fn split_list(v: &str) -> Vec<&str> {
    v.trim_start_matches('[')
        .trim_end_matches(']')
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

fn bad(line: usize, key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Parses the flat config format. `inputs`/`outputs` default to the
    /// selected problem's shape.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut neat = NeatConfig::default();
        let mut problem_name: Option<(usize, String)> = None;
        let mut regression_target = RegressionTarget::Sin;
        let mut regression_samples = 64usize;
        let mut inputs: Option<usize> = None;
        let mut outputs: Option<usize> = None;
        let mut seen = HashSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            let key = k.trim();
            let v = v.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            let real = |v: &str| parse_real(line, key, v);
            let count = |v: &str| parse_count(line, key, v);
            match key {
                "seed" => neat.seed = parse_value(line, key, v)?,
                "fitness_target" => neat.fitness_target = real(v)?,
                "generation_limit" => neat.generation_limit = count(v)?,
                "pop_size" => neat.pop_size = count(v)?,
                "network_type" => {
                    neat.network_type = match v {
                        "feedforward" => NetworkType::Feedforward,
                        "recurrent" => NetworkType::Recurrent,
                        _ => return Err(bad(line, key, "expected feedforward or recurrent")),
                    }
                }
                "inputs" => inputs = Some(count(v)?),
                "outputs" => outputs = Some(count(v)?),
                "max_nodes" => neat.max_nodes = count(v)?,
                "max_conns" => neat.max_conns = count(v)?,
                "max_species" => neat.max_species = count(v)?,
                "compatibility_disjoint" => neat.compatibility_disjoint = real(v)?,
                "compatibility_homologous" => neat.compatibility_homologous = real(v)?,
                "node_add" => neat.node_add = real(v)?,
                "node_delete" => neat.node_delete = real(v)?,
                "conn_add" => neat.conn_add = real(v)?,
                "conn_delete" => neat.conn_delete = real(v)?,
                "compatibility_threshold" => neat.compatibility_threshold = real(v)?,
                "species_elitism" => neat.species_elitism = count(v)?,
                "max_stagnation" => neat.max_stagnation = count(v)?,
                "genome_elitism" => neat.genome_elitism = count(v)?,
                "survival_threshold" => neat.survival_threshold = real(v)?,
                "spawn_number_change_rate" => neat.spawn_number_change_rate = real(v)?,
                "bias_init_mean" => neat.bias.init_mean = real(v)?,
                "bias_init_std" => neat.bias.init_std = real(v)?,
                "bias_mutate_power" => neat.bias.mutate_power = real(v)?,
                "bias_mutate_rate" => neat.bias.mutate_rate = real(v)?,
                "bias_replace_rate" => neat.bias.replace_rate = real(v)?,
                "response_init_mean" => neat.response.init_mean = real(v)?,
                "response_init_std" => neat.response.init_std = real(v)?,
                "response_mutate_power" => neat.response.mutate_power = real(v)?,
                "response_mutate_rate" => neat.response.mutate_rate = real(v)?,
                "response_replace_rate" => neat.response.replace_rate = real(v)?,
                "weight_init_mean" => neat.weight.init_mean = real(v)?,
                "weight_init_std" => neat.weight.init_std = real(v)?,
                "weight_mutate_power" => neat.weight.mutate_power = real(v)?,
                "weight_mutate_rate" => neat.weight.mutate_rate = real(v)?,
                "weight_replace_rate" => neat.weight.replace_rate = real(v)?,
                "activation_default" => {
                    neat.activation_default =
                        Activation::from_name(v).ok_or_else(|| bad(line, key, format!("unknown activation `{v}`")))?
                }
                "activation_options" => {
                    neat.activation_options = split_list(v)
                        .into_iter()
                        .map(|s| {
                            Activation::from_name(s).ok_or_else(|| bad(line, key, format!("unknown activation `{s}`")))
                        })
                        .collect::<Result<_, _>>()?
                }
                "activation_replace_rate" => neat.activation_replace_rate = real(v)?,
                "aggregation_default" => {
                    neat.aggregation_default =
                        Aggregation::from_name(v).ok_or_else(|| bad(line, key, format!("unknown aggregation `{v}`")))?
                }
                "aggregation_options" => {
                    neat.aggregation_options = split_list(v)
                        .into_iter()
                        .map(|s| {
                            Aggregation::from_name(s)
                                .ok_or_else(|| bad(line, key, format!("unknown aggregation `{s}`")))
                        })
                        .collect::<Result<_, _>>()?
                }
                "aggregation_replace_rate" => neat.aggregation_replace_rate = real(v)?,
                "enabled_mutate_rate" => neat.enabled_mutate_rate = real(v)?,
                "attr_min" => neat.attr_min = real(v)?,
                "attr_max" => neat.attr_max = real(v)?,
                "problem" => problem_name = Some((line, v.to_string())),
                "regression_target" => {
                    regression_target = RegressionTarget::from_name(v)
                        .ok_or_else(|| bad(line, key, format!("unknown regression target `{v}`")))?
                }
                "regression_samples" => regression_samples = count(v)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }

        let problem = match problem_name {
            None => ProblemKind::Xor,
            Some((line, name)) => match name.as_str() {
                "xor" => ProblemKind::Xor,
                "regression" => ProblemKind::Regression {
                    target: regression_target,
                    samples: regression_samples,
                },
                "cartpole" => ProblemKind::CartPole,
                _ => return Err(bad(line, "problem", "expected xor, regression or cartpole")),
            },
        };
        if let ProblemKind::Regression { samples, .. } = problem {
            if samples < 2 {
                return Err(ConfigError::Invalid("regression_samples must be at least 2".into()));
            }
        }
        let (pi, po) = problem.shape();
        neat.inputs = inputs.unwrap_or(pi);
        neat.outputs = outputs.unwrap_or(po);
        if (neat.inputs, neat.outputs) != (pi, po) {
            return Err(ConfigError::Invalid(format!(
                "problem expects inputs = {pi}, outputs = {po} but config has {}, {}",
                neat.inputs, neat.outputs
            )));
        }
        neat.validate()?;
        Ok(Self { neat, problem })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.neat.max_nodes, 50);
        assert_eq!(c.neat.max_conns, 100);
        assert_eq!(c.neat.compatibility_threshold, 3.5);
        assert!(c.neat.fitness_target.is_infinite());
    }

    #[test]
    fn every_hyperparameter_name_is_accepted() {
        let text = "
            seed = 3
            fitness_target = Inf
            generation_limit = 100.0
            pop_size = 50
            network_type = feedforward
            inputs = 2
            outputs = 1
            max_nodes = 20
            max_conns = 40
            max_species = 5
            compatibility_disjoint = 1.0
            compatibility_homologous = 0.5
            node_add = 0.2
            node_delete = 0
            conn_add = 0.4
            conn_delete = 0
            compatibility_threshold = 3.5
            species_elitism = 2
            max_stagnation = 15
            genome_elitism = 2
            survival_threshold = 0.2
            spawn_number_change_rate = 0.5
            bias_init_mean = 0
            bias_init_std = 1.0
            bias_mutate_power = 0.5
            bias_mutate_rate = 0.7
            bias_replace_rate = 0.1
            response_init_mean = 1.0
            response_init_std = 0
            response_mutate_power = 0
            response_mutate_rate = 0
            response_replace_rate = 0
            weight_init_mean = 0
            weight_init_std = 1
            weight_mutate_power = 0.5
            weight_mutate_rate = 0.8
            weight_replace_rate = 0.1
            activation_default = tanh
            activation_options = [tanh, sigmoid]
            activation_replace_rate = 0
            aggregation_default = sum
            aggregation_options = [sum]
            aggregation_replace_rate = 0
            enabled_mutate_rate = 0.01
            attr_min = -30
            attr_max = 30
        ";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.neat.seed, 3);
        assert_eq!(c.neat.pop_size, 50);
        assert_eq!(c.neat.generation_limit, 100);
        assert_eq!(c.neat.activation_options, vec![Activation::Tanh, Activation::Sigmoid]);
        assert_eq!(c.neat.enabled_mutate_rate, 0.01);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ExperimentConfig::parse("pop_size = 10\nnode_ad = 0.3\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                key: "node_ad".into()
            }
        );
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(matches!(
            ExperimentConfig::parse("seed = 1\nseed = 2").unwrap_err(),
            ConfigError::DuplicateKey { line: 2, .. }
        ));
        assert!(matches!(
            ExperimentConfig::parse("just words").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            ExperimentConfig::parse("node_add = lots").unwrap_err(),
            ConfigError::BadValue { .. }
        ));
    }

    #[test]
    fn problem_sets_shape_and_rejects_mismatch() {
        let c = ExperimentConfig::parse("problem = cartpole").unwrap();
        assert_eq!((c.neat.inputs, c.neat.outputs), (4, 1));
        assert!(ExperimentConfig::parse("problem = cartpole\ninputs = 2").is_err());
        let r = ExperimentConfig::parse("problem = regression\nregression_samples = 16").unwrap();
        assert_eq!(
            r.problem,
            ProblemKind::Regression {
                target: RegressionTarget::Sin,
                samples: 16
            }
        );
    }

    #[test]
    fn validation_catches_bad_ranges() {
        assert!(ExperimentConfig::parse("node_add = 1.5").is_err());
        assert!(ExperimentConfig::parse("pop_size = 3\nspecies_elitism = 2\nmax_species = 2").is_err());
        assert!(ExperimentConfig::parse("max_nodes = 2").is_err());
        assert!(ExperimentConfig::parse("max_conns = 1").is_err());
    }
}
