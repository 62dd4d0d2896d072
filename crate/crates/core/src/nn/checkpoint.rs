//! JSON checkpoints with bit-exact numbers.
//!
//! Every `f64` is written as the 16 lowercase hex digits of its IEEE-754 bit
//! pattern (`1.0` is `"3ff0000000000000"`), so a round trip reproduces each
//! parameter exactly, including signed zeros. Layout:
//!
//! ```text
//! {
//!   "format": "auvrl-mlp-v1",
//!   "layer_sizes": [2, 64, 64, 5],
//!   "weights": [[...], ...],      // per layer, row-major outputs x inputs
//!   "biases": [[...], ...],
//!   "optimizer": null | {
//!     "learning_rate", "beta1", "beta2", "epsilon": hex,
//!     "step": int,
//!     "m_weights", "m_biases", "v_weights", "v_biases": per-layer hex arrays
//!   },
//!   "step": int                   // learner step count
//! }
//! ```

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::adam::{Adam, AdamConfig};
use super::mlp::{Dense, Mlp};

pub const FORMAT: &str = "auvrl-mlp-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint is not valid JSON: {0}")]
    Syntax(String),
    #[error("checkpoint field `{0}` is missing")]
    Missing(String),
    #[error("checkpoint field `{field}` is invalid: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> CheckpointError {
    CheckpointError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// A network plus the optional optimizer state that was training it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Mlp,
    pub optimizer: Option<Adam>,
    pub step: u64,
}

pub fn encode_f64(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn decode_f64(s: &str) -> Option<f64> {
    if s.len() != 16 {
        return None;
    }
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

fn encode_vec(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| Value::String(encode_f64(v))).collect())
}

fn per_layer(net: &Mlp, pick: impl Fn(&Dense) -> &[f64]) -> Value {
    Value::Array(net.layers().iter().map(|l| encode_vec(pick(l))).collect())
}

impl Checkpoint {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let net = &self.network;
        let optimizer = match &self.optimizer {
            None => Value::Null,
            Some(opt) => json!({
                "learning_rate": encode_f64(opt.config.learning_rate),
                "beta1": encode_f64(opt.config.beta1),
                "beta2": encode_f64(opt.config.beta2),
                "epsilon": encode_f64(opt.config.epsilon),
                "step": opt.step,
                "m_weights": per_layer(&opt.m, |l| &l.weights),
                "m_biases": per_layer(&opt.m, |l| &l.biases),
                "v_weights": per_layer(&opt.v, |l| &l.weights),
                "v_biases": per_layer(&opt.v, |l| &l.biases),
            }),
        };
        let doc = json!({
            "format": FORMAT,
            "layer_sizes": net.layer_sizes(),
            "weights": per_layer(net, |l| &l.weights),
            "biases": per_layer(net, |l| &l.biases),
            "optimizer": optimizer,
            "step": self.step,
        });
        serde_json::to_vec(&doc).expect("JSON values always serialize")
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let doc: Value =
            serde_json::from_slice(bytes).map_err(|e| CheckpointError::Syntax(e.to_string()))?;
        let root = doc
            .as_object()
            .ok_or_else(|| invalid("<root>", "expected an object"))?;

        let format = get(root, "format", "format")?
            .as_str()
            .ok_or_else(|| invalid("format", "expected a string"))?;
        if format != FORMAT {
            return Err(invalid("format", format!("unsupported format {format:?}")));
        }

        let sizes_value = get(root, "layer_sizes", "layer_sizes")?;
        let sizes: Vec<usize> = sizes_value
            .as_array()
            .ok_or_else(|| invalid("layer_sizes", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_u64()
                    .filter(|&n| n > 0)
                    .map(|n| n as usize)
                    .ok_or_else(|| invalid(format!("layer_sizes[{i}]"), "expected a positive integer"))
            })
            .collect::<Result<_, _>>()?;
        if sizes.len() < 2 {
            return Err(invalid("layer_sizes", "need at least input and output sizes"));
        }

        let network = read_network(root, &sizes, "weights", "biases", "")?;
        let optimizer = match get(root, "optimizer", "optimizer")? {
            Value::Null => None,
            Value::Object(opt) => Some(read_optimizer(opt, &sizes, &network)?),
            _ => return Err(invalid("optimizer", "expected an object or null")),
        };
        let step = get(root, "step", "step")?
            .as_u64()
            .ok_or_else(|| invalid("step", "expected a non-negative integer"))?;

        Ok(Checkpoint {
            network,
            optimizer,
            step,
        })
    }
}

/// Serializes only the network parameters.
pub fn serialize(net: &Mlp) -> Vec<u8> {
    Checkpoint {
        network: net.clone(),
        optimizer: None,
        step: 0,
    }
    .to_json_bytes()
}

pub fn deserialize(bytes: &[u8]) -> Result<Mlp, CheckpointError> {
    Checkpoint::from_json_bytes(bytes).map(|c| c.network)
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, CheckpointError> {
    obj.get(key).ok_or_else(|| CheckpointError::Missing(path.to_string()))
}

fn read_vec(value: &Value, path: &str, expected_len: usize) -> Result<Vec<f64>, CheckpointError> {
    let items = value
        .as_array()
        .ok_or_else(|| invalid(path, "expected an array"))?;
    if items.len() != expected_len {
        return Err(invalid(
            path,
            format!("expected {expected_len} values, found {}", items.len()),
        ));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str()
                .and_then(decode_f64)
                .ok_or_else(|| invalid(format!("{path}[{i}]"), "expected 16 hex digits"))
        })
        .collect()
}

fn read_layers(value: &Value, path: &str, sizes: &[usize], weights: bool) -> Result<Vec<Vec<f64>>, CheckpointError> {
    let layers = value
        .as_array()
        .ok_or_else(|| invalid(path, "expected an array of layers"))?;
    if layers.len() != sizes.len() - 1 {
        return Err(invalid(
            path,
            format!("expected {} layers, found {}", sizes.len() - 1, layers.len()),
        ));
    }
    layers
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let len = if weights { sizes[i] * sizes[i + 1] } else { sizes[i + 1] };
            read_vec(layer, &format!("{path}[{i}]"), len)
        })
        .collect()
}

fn read_network(
    obj: &Map<String, Value>,
    sizes: &[usize],
    weights_key: &str,
    biases_key: &str,
    prefix: &str,
) -> Result<Mlp, CheckpointError> {
    let w_path = format!("{prefix}{weights_key}");
    let b_path = format!("{prefix}{biases_key}");
    let weights = read_layers(get(obj, weights_key, &w_path)?, &w_path, sizes, true)?;
    let biases = read_layers(get(obj, biases_key, &b_path)?, &b_path, sizes, false)?;
    let layers = weights
        .into_iter()
        .zip(biases)
        .enumerate()
        .map(|(i, (weights, biases))| Dense {
            inputs: sizes[i],
            outputs: sizes[i + 1],
            weights,
            biases,
        })
        .collect();
    Mlp::from_layers(layers).map_err(|e| invalid(w_path, e.to_string()))
}

fn read_optimizer(obj: &Map<String, Value>, sizes: &[usize], network: &Mlp) -> Result<Adam, CheckpointError> {
    let scalar = |key: &str| -> Result<f64, CheckpointError> {
        let path = format!("optimizer.{key}");
        get(obj, key, &path)?
            .as_str()
            .and_then(decode_f64)
            .ok_or_else(|| invalid(path, "expected 16 hex digits"))
    };
    let config = AdamConfig {
        learning_rate: scalar("learning_rate")?,
        beta1: scalar("beta1")?,
        beta2: scalar("beta2")?,
        epsilon: scalar("epsilon")?,
    };
    let step = get(obj, "step", "optimizer.step")?
        .as_u64()
        .ok_or_else(|| invalid("optimizer.step", "expected a non-negative integer"))?;
    let m = read_network(obj, sizes, "m_weights", "m_biases", "optimizer.")?;
    let v = read_network(obj, sizes, "v_weights", "v_biases", "optimizer.")?;
    debug_assert!(m.same_shape(network));
    Ok(Adam { config, step, m, v })
}
