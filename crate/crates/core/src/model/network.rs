//! The three-branch gaze regression network.
//!
//! Both eye crops run through one shared conv trunk; their flattened features
//! are concatenated (left, then right) and embedded by one FC layer. The face
//! crop has its own trunk and FC chain, the face grid a two-layer FC chain.
//! The three embeddings are concatenated and regressed to two outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{conv_trunk, ModelConfig};
use crate::error::{GazeError, Result};
use crate::geometry::GazePoint;
use crate::nn::gradcheck::kink_signature;
use crate::nn::{backward, forward, ForwardCtx, LayerSpec, Param, ParamSet};
use crate::tensor::{Scalar, Tensor};

/// The network's four input streams. Crops are `[3, h, w]`, mean-subtracted;
/// the face grid is the flattened `[625]` binary mask.
#[derive(Clone, Debug, PartialEq)]
pub struct InputBundle<T = f32> {
    pub left_eye: Tensor<T>,
    pub right_eye: Tensor<T>,
    pub face: Tensor<T>,
    pub face_grid: Tensor<T>,
}

impl<T: Scalar> InputBundle<T> {
    pub fn cast<U: Scalar>(&self) -> InputBundle<U> {
        InputBundle {
            left_eye: self.left_eye.cast(),
            right_eye: self.right_eye.cast(),
            face: self.face.cast(),
            face_grid: self.face_grid.cast(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.left_eye.all_finite() && self.right_eye.all_finite() && self.face.all_finite() && self.face_grid.all_finite()
    }
}

#[derive(Clone, Debug)]
struct Node {
    spec: LayerSpec,
    param: Option<String>,
}

#[derive(Clone, Debug, Default)]
struct Sequential {
    nodes: Vec<Node>,
}

impl Sequential {
    fn push(&mut self, spec: LayerSpec, param: Option<String>) {
        self.nodes.push(Node { spec, param });
    }

    fn run<T: Scalar>(&self, params: &ParamSet<T>, input: Tensor<T>) -> Result<(Tensor<T>, Vec<ForwardCtx<T>>)> {
        let mut x = input;
        let mut ctxs = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let p = node.param.as_deref().map(|n| params.get(n).expect("param registered"));
            let (y, ctx) = forward(&node.spec, p, &[&x])?;
            ctxs.push(ctx);
            x = y;
        }
        Ok((x, ctxs))
    }

    fn back<T: Scalar>(&self, params: &mut ParamSet<T>, ctxs: &[ForwardCtx<T>], grad: Tensor<T>) -> Result<Tensor<T>> {
        if ctxs.len() != self.nodes.len() {
            return Err(GazeError::InvalidArgument("trace does not match network".into()));
        }
        let mut g = grad;
        for (node, ctx) in self.nodes.iter().zip(ctxs).rev() {
            let back = match node.param.as_deref() {
                Some(name) => {
                    let p = params.get_mut(name).expect("param registered");
                    let back = backward(&node.spec, Some(p), ctx, &g)?;
                    let (gw, gb) = back.param_grads.as_ref().expect("parameterised layer");
                    p.accumulate(gw, gb)?;
                    back
                }
                None => backward(&node.spec, None, ctx, &g)?,
            };
            g = back.input_grads.into_iter().next().expect("single input");
        }
        Ok(g)
    }
}

/// Everything a forward pass leaves for the backward pass.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    left: Vec<ForwardCtx<T>>,
    right: Vec<ForwardCtx<T>>,
    eye_concat: ForwardCtx<T>,
    eye_head: Vec<ForwardCtx<T>>,
    face: Vec<ForwardCtx<T>>,
    grid: Vec<ForwardCtx<T>>,
    fusion_concat: ForwardCtx<T>,
    fusion: Vec<ForwardCtx<T>>,
}

impl<T> Trace<T> {
    pub fn kink_signature(&self) -> u64 {
        kink_signature(
            self.left
                .iter()
                .chain(&self.right)
                .chain(&self.eye_head)
                .chain(&self.face)
                .chain(&self.grid)
                .chain(&self.fusion),
        )
    }
}

#[derive(Clone, Debug)]
pub struct GazeNet<T = f32> {
    config: ModelConfig,
    params: ParamSet<T>,
    eye_trunk: Sequential,
    eye_head: Sequential,
    face: Sequential,
    grid: Sequential,
    fusion: Sequential,
    corrupt_backward: bool,
}

struct Graph {
    eye_trunk: Sequential,
    eye_head: Sequential,
    face: Sequential,
    grid: Sequential,
    fusion: Sequential,
}

fn build_graph(config: &ModelConfig) -> Result<Graph> {
    config.validate()?;
    let fc = |i: usize, o: usize| LayerSpec::FullyConnected {
        in_features: i,
        out_features: o,
    };
    let trunk = |prefix: &str, specs: Vec<LayerSpec>| {
        let mut seq = Sequential::default();
        let mut conv_idx = 0;
        for spec in specs {
            let name = matches!(spec, LayerSpec::Conv2d(_)).then(|| {
                conv_idx += 1;
                format!("{prefix}.conv{conv_idx}")
            });
            seq.push(spec, name);
        }
        seq.push(LayerSpec::Flatten, None);
        seq
    };

    let (eh, ew) = config.eye_size;
    let (eye_layers, eye_flat) = conv_trunk(&config.eye_convs, [3, eh, ew])?;
    let eye_trunk = trunk("eye", eye_layers);
    let mut eye_head = Sequential::default();
    eye_head.push(fc(2 * eye_flat, config.eye_fc), Some("eye.fc".into()));
    eye_head.push(LayerSpec::Relu, None);

    let (fh, fw) = config.face_size;
    let (face_layers, face_flat) = conv_trunk(&config.face_convs, [3, fh, fw])?;
    let mut face = trunk("face", face_layers);
    let mut width = face_flat;
    for (i, out) in config.face_fc.iter().enumerate() {
        face.push(fc(width, *out), Some(format!("face.fc{}", i + 1)));
        face.push(LayerSpec::Relu, None);
        width = *out;
    }
    let face_out = width;

    let mut grid = Sequential::default();
    let mut width = config.grid_cells();
    for (i, out) in config.grid_fc.iter().enumerate() {
        grid.push(fc(width, *out), Some(format!("grid.fc{}", i + 1)));
        grid.push(LayerSpec::Relu, None);
        width = *out;
    }
    let grid_out = width;

    let mut fusion = Sequential::default();
    fusion.push(fc(config.eye_fc + face_out + grid_out, config.fusion_hidden), Some("fusion.fc1".into()));
    fusion.push(LayerSpec::Relu, None);
    fusion.push(fc(config.fusion_hidden, 2), Some("fusion.fc2".into()));

    Ok(Graph {
        eye_trunk,
        eye_head,
        face,
        grid,
        fusion,
    })
}

/// Parameter names and layer specs, in graph order.
pub(crate) fn param_layers(config: &ModelConfig) -> Result<Vec<(String, LayerSpec)>> {
    let g = build_graph(config)?;
    Ok([&g.eye_trunk, &g.eye_head, &g.face, &g.grid, &g.fusion]
        .into_iter()
        .flat_map(|s| s.nodes.iter())
        .filter_map(|n| n.param.clone().map(|p| (p, n.spec)))
        .collect())
}

impl<T: Scalar> GazeNet<T> {
    /// Builds a network with Kaiming-uniform weights from a seeded PRNG.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (name, spec) in param_layers(&config)? {
            params.insert(name, Param::kaiming_uniform(&spec, &mut rng)?)?;
        }
        Self::with_params(config, params)
    }

    /// Assembles a network around existing parameters, checking names and shapes.
    pub fn with_params(config: ModelConfig, params: ParamSet<T>) -> Result<Self> {
        let layers = param_layers(&config)?;
        if layers.len() != params.len() {
            return Err(GazeError::Shape(format!(
                "network needs {} parameter layers, got {}",
                layers.len(),
                params.len()
            )));
        }
        for (name, spec) in &layers {
            let p = params
                .get(name)
                .ok_or_else(|| GazeError::Shape(format!("missing parameter {name}")))?;
            let (ws, bs) = spec.param_shapes().expect("parameterised");
            if p.weights.shape() != ws.as_slice() || p.bias.shape() != bs.as_slice() {
                return Err(GazeError::Shape(format!("parameter {name} has the wrong shape")));
            }
        }
        let g = build_graph(&config)?;
        Ok(Self {
            config,
            params,
            eye_trunk: g.eye_trunk,
            eye_head: g.eye_head,
            face: g.face,
            grid: g.grid,
            fusion: g.fusion,
            corrupt_backward: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_values()
    }

    /// Test hook: negates the gradients of the output layer so that gradient
    /// checking has a known failure to detect.
    pub fn set_corrupt_backward(&mut self, on: bool) {
        self.corrupt_backward = on;
    }

    pub fn cast<U: Scalar>(&self) -> GazeNet<U> {
        GazeNet {
            config: self.config.clone(),
            params: self.params.cast(),
            eye_trunk: self.eye_trunk.clone(),
            eye_head: self.eye_head.clone(),
            face: self.face.clone(),
            grid: self.grid.clone(),
            fusion: self.fusion.clone(),
            corrupt_backward: self.corrupt_backward,
        }
    }

    pub fn check_bundle(&self, bundle: &InputBundle<T>) -> Result<()> {
        let (eh, ew) = self.config.eye_size;
        let (fh, fw) = self.config.face_size;
        let checks: [(&str, &Tensor<T>, Vec<usize>); 4] = [
            ("left_eye", &bundle.left_eye, vec![3, eh, ew]),
            ("right_eye", &bundle.right_eye, vec![3, eh, ew]),
            ("face", &bundle.face, vec![3, fh, fw]),
            ("face_grid", &bundle.face_grid, vec![self.config.grid_cells()]),
        ];
        for (name, t, want) in checks {
            if t.shape() != want.as_slice() {
                return Err(GazeError::Shape(format!(
                    "{name} has shape {:?}, model expects {want:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn forward_trace(&self, bundle: &InputBundle<T>) -> Result<([T; 2], Trace<T>)> {
        self.check_bundle(bundle)?;
        let p = &self.params;
        let (left, left_ctx) = self.eye_trunk.run(p, bundle.left_eye.clone())?;
        let (right, right_ctx) = self.eye_trunk.run(p, bundle.right_eye.clone())?;
        let (eyes, eye_concat) = forward(&LayerSpec::Concat, None, &[&left, &right])?;
        let (eyes, eye_head) = self.eye_head.run(p, eyes)?;
        let (face, face_ctx) = self.face.run(p, bundle.face.clone())?;
        let (grid, grid_ctx) = self.grid.run(p, bundle.face_grid.clone())?;
        let (fused, fusion_concat) = forward(&LayerSpec::Concat, None, &[&eyes, &face, &grid])?;
        let (out, fusion) = self.fusion.run(p, fused)?;
        let out = [out.data()[0], out.data()[1]];
        if !(out[0].is_finite() && out[1].is_finite()) {
            return Err(GazeError::NonFinite("network output".into()));
        }
        Ok((
            out,
            Trace {
                left: left_ctx,
                right: right_ctx,
                eye_concat,
                eye_head,
                face: face_ctx,
                grid: grid_ctx,
                fusion_concat,
                fusion,
            },
        ))
    }

    /// Raw network output in the configured space, not clamped.
    pub fn predict_raw(&self, bundle: &InputBundle<T>) -> Result<[T; 2]> {
        Ok(self.forward_trace(bundle)?.0)
    }

    /// Accumulates parameter gradients for `d loss / d output = grad`.
    pub fn backward(&mut self, trace: &Trace<T>, grad: [T; 2]) -> Result<()> {
        let g = Tensor::new(vec![2], grad.to_vec())?;
        if self.corrupt_backward {
            let before = self.params.get("fusion.fc2").expect("output layer").clone();
            let g_fused = self.fusion.back(&mut self.params, &trace.fusion, g.clone())?;
            let p = self.params.get_mut("fusion.fc2").expect("output layer");
            let neg = |now: &Tensor<T>, then: &Tensor<T>| {
                Tensor::from_fn(now.shape(), |i| then.data()[i] - (now.data()[i] - then.data()[i]))
            };
            p.grad_weights = neg(&p.grad_weights, &before.grad_weights);
            p.grad_bias = neg(&p.grad_bias, &before.grad_bias);
            return self.backward_from_fusion(trace, g_fused);
        }
        let g_fused = self.fusion.back(&mut self.params, &trace.fusion, g)?;
        self.backward_from_fusion(trace, g_fused)
    }

    fn backward_from_fusion(&mut self, trace: &Trace<T>, g_fused: Tensor<T>) -> Result<()> {
        let parts = backward(&LayerSpec::Concat, None, &trace.fusion_concat, &g_fused)?.input_grads;
        let [g_eyes, g_face, g_grid]: [Tensor<T>; 3] = parts
            .try_into()
            .map_err(|_| GazeError::InvalidArgument("fusion trace is malformed".into()))?;
        self.grid.back(&mut self.params, &trace.grid, g_grid)?;
        self.face.back(&mut self.params, &trace.face, g_face)?;
        let g_eyes = self.eye_head.back(&mut self.params, &trace.eye_head, g_eyes)?;
        let parts = backward(&LayerSpec::Concat, None, &trace.eye_concat, &g_eyes)?.input_grads;
        let [g_left, g_right]: [Tensor<T>; 2] = parts
            .try_into()
            .map_err(|_| GazeError::InvalidArgument("eye trace is malformed".into()))?;
        // Both eye paths accumulate into the same shared trunk parameters.
        self.eye_trunk.back(&mut self.params, &trace.right, g_right)?;
        self.eye_trunk.back(&mut self.params, &trace.left, g_left)?;
        Ok(())
    }
}

impl GazeNet<f32> {
    /// Clamped prediction tagged with the model's output space.
    pub fn predict(&self, bundle: &InputBundle<f32>) -> Result<GazePoint> {
        let [x, y] = self.predict_raw(bundle)?;
        Ok(GazePoint::new(x, y, self.config.output_space).clamped(None))
    }
}
