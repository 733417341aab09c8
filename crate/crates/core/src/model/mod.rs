//! Gaze network assembly, prediction and weight serialization.

pub mod config;
pub mod container;
pub mod gradcheck;
pub mod network;

use std::path::Path;

pub use config::{ConvStage, ModelConfig, Profile};
pub use container::WeightContainer;
pub use network::{GazeNet, InputBundle, Trace};

use crate::error::{GazeError, Result};
use crate::nn::{Param, ParamSet};

pub fn build_model(config: ModelConfig, seed: u64) -> Result<GazeNet<f32>> {
    GazeNet::build(config, seed)
}

pub fn to_container(model: &GazeNet<f32>) -> WeightContainer {
    let mut tensors = Vec::with_capacity(model.params().len() * 2);
    for (name, p) in model.params().iter() {
        tensors.push((format!("{name}.weights"), p.weights.clone()));
        tensors.push((format!("{name}.bias"), p.bias.clone()));
    }
    WeightContainer {
        fingerprint: model.config().fingerprint(),
        config: Some(serde_json::to_value(model.config()).expect("config serializes")),
        tensors,
    }
}

pub fn save_weights(model: &GazeNet<f32>) -> Result<Vec<u8>> {
    to_container(model).encode()
}

/// Rebuilds a model from container bytes. Everything is validated before the
/// model is assembled, so a bad container never yields a partial model.
pub fn load_weights(bytes: &[u8], config: &ModelConfig) -> Result<GazeNet<f32>> {
    from_container(&WeightContainer::decode(bytes)?, config)
}

pub fn from_container(container: &WeightContainer, config: &ModelConfig) -> Result<GazeNet<f32>> {
    let expected = config.fingerprint();
    if container.fingerprint != expected {
        return Err(GazeError::Fingerprint {
            expected,
            found: container.fingerprint.clone(),
        });
    }
    let layers = network::param_layers(config)?;
    let mut wanted = std::collections::BTreeMap::new();
    for (name, spec) in &layers {
        let (ws, bs) = spec.param_shapes().expect("parameterised");
        wanted.insert(format!("{name}.weights"), ws);
        wanted.insert(format!("{name}.bias"), bs);
    }
    for (name, t) in &container.tensors {
        match wanted.get(name) {
            None => return Err(GazeError::Container(format!("unknown tensor {name}"))),
            Some(shape) if shape.as_slice() != t.shape() => {
                return Err(GazeError::Container(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )))
            }
            _ => {}
        }
    }
    for name in wanted.keys() {
        if container.get(name).is_none() {
            return Err(GazeError::Container(format!("missing tensor {name}")));
        }
    }
    let mut params = ParamSet::new();
    for (name, _) in &layers {
        let w = container.get(&format!("{name}.weights")).expect("checked").clone();
        let b = container.get(&format!("{name}.bias")).expect("checked").clone();
        params.insert(name.clone(), Param::new(w, b))?;
    }
    GazeNet::with_params(config.clone(), params)
}

/// Reads the model config embedded in a container header.
pub fn embedded_config(container: &WeightContainer) -> Result<ModelConfig> {
    let value = container
        .config
        .clone()
        .ok_or_else(|| GazeError::Container("container carries no model config".into()))?;
    let config: ModelConfig =
        serde_json::from_value(value).map_err(|e| GazeError::Container(format!("embedded config: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Loads a weights file using the config embedded in it.
pub fn load_weights_file(path: &Path) -> Result<GazeNet<f32>> {
    let bytes = std::fs::read(path).map_err(|e| GazeError::io(path, e))?;
    let container = WeightContainer::decode(&bytes)?;
    let config = embedded_config(&container)?;
    from_container(&container, &config)
}
