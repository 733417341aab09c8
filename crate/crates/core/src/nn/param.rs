use std::collections::BTreeMap;

use rand::Rng;

use super::layers::LayerSpec;
use crate::error::{GazeError, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub grad_weights: Tensor<T>,
    pub grad_bias: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Self {
        let grad_weights = Tensor::zeros(weights.shape());
        let grad_bias = Tensor::zeros(bias.shape());
        Self {
            weights,
            bias,
            grad_weights,
            grad_bias,
        }
    }

    /// Kaiming-uniform weights, zero bias.
    pub fn kaiming_uniform<R: Rng>(spec: &LayerSpec, rng: &mut R) -> Result<Self> {
        let (ws, bs) = spec.param_shapes().ok_or_else(|| {
            GazeError::InvalidArgument(format!("{} layer has no parameters", spec.kind_name()))
        })?;
        let bound = (6.0 / spec.fan_in() as f64).sqrt();
        let weights = Tensor::from_fn(&ws, |_| T::lit(rng.gen_range(-bound..bound)));
        Ok(Self::new(weights, Tensor::zeros(&bs)))
    }

    pub fn zero_grads(&mut self) {
        self.grad_weights.fill(T::zero());
        self.grad_bias.fill(T::zero());
    }

    pub fn accumulate(&mut self, grad_weights: &Tensor<T>, grad_bias: &Tensor<T>) -> Result<()> {
        self.grad_weights.add_assign(grad_weights)?;
        self.grad_bias.add_assign(grad_bias)
    }

    pub fn num_values(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            weights: self.weights.cast(),
            bias: self.bias.cast(),
            grad_weights: self.grad_weights.cast(),
            grad_bias: self.grad_bias.cast(),
        }
    }
}

/// Named parameters, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<T = f32> {
    params: BTreeMap<String, Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, param: Param<T>) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(GazeError::InvalidArgument(format!("duplicate parameter name {name}")));
        }
        self.params.insert(name, param);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param<T>)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param<T>)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        self.params.values_mut().for_each(Param::zero_grads);
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(Param::num_values).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params
            .values()
            .all(|p| p.weights.all_finite() && p.bias.all_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            params: self.params.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Copies values (not gradients) from `other`, which must have identical names and shapes.
    pub fn copy_values_from(&mut self, other: &ParamSet<T>) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(GazeError::Shape("parameter sets differ in size".into()));
        }
        for (name, p) in self.params.iter_mut() {
            let src = other
                .params
                .get(name)
                .ok_or_else(|| GazeError::Shape(format!("missing parameter {name}")))?;
            if src.weights.shape() != p.weights.shape() || src.bias.shape() != p.bias.shape() {
                return Err(GazeError::Shape(format!("parameter {name} changed shape")));
            }
            p.weights = src.weights.clone();
            p.bias = src.bias.clone();
        }
        Ok(())
    }
}
