use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GazeError, Result};
use crate::geometry::Space;
use crate::nn::{Conv2dSpec, LayerSpec, PoolSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Full,
    Tiny,
}

impl std::str::FromStr for Profile {
    type Err = GazeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Profile::Full),
            "tiny" => Ok(Profile::Tiny),
            other => Err(GazeError::InvalidArgument(format!("unknown profile {other:?}"))),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Full => "full",
            Profile::Tiny => "tiny",
        })
    }
}

/// One convolution (+ ReLU, + optional max-pool) stage of a branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub pool: Option<PoolSpec>,
}

impl ConvStage {
    const fn new(out_channels: usize, kernel: usize, stride: usize, padding: usize, pool: bool) -> Self {
        Self {
            out_channels,
            kernel,
            stride,
            padding,
            pool: if pool {
                Some(PoolSpec { window: 2, stride: 2 })
            } else {
                None
            },
        }
    }
}

pub const GRID_SIZE: usize = 25;
pub const EYE_CONV_LAYERS: usize = 4;
pub const FACE_CONV_LAYERS: usize = 5;
pub const EYE_EMBEDDING: usize = 128;
pub const FACE_FC: [usize; 2] = [128, 64];
pub const GRID_FC: [usize; 2] = [256, 128];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub profile: Profile,
    /// (height, width)
    pub eye_size: (usize, usize),
    pub face_size: (usize, usize),
    pub grid_size: usize,
    pub eye_convs: Vec<ConvStage>,
    pub face_convs: Vec<ConvStage>,
    pub eye_fc: usize,
    pub face_fc: Vec<usize>,
    pub grid_fc: Vec<usize>,
    pub fusion_hidden: usize,
    pub output_space: Space,
}

impl ModelConfig {
    pub fn full(output_space: Space) -> Self {
        let eye_convs = vec![
            ConvStage::new(96, 11, 4, 0, true),
            ConvStage::new(256, 5, 1, 2, true),
            ConvStage::new(384, 3, 1, 1, false),
            ConvStage::new(64, 1, 1, 0, false),
        ];
        let mut face_convs = eye_convs.clone();
        face_convs.push(ConvStage::new(64, 3, 1, 1, false));
        Self {
            profile: Profile::Full,
            eye_size: (112, 112),
            face_size: (224, 224),
            grid_size: GRID_SIZE,
            eye_convs,
            face_convs,
            eye_fc: EYE_EMBEDDING,
            face_fc: FACE_FC.to_vec(),
            grid_fc: GRID_FC.to_vec(),
            fusion_hidden: 128,
            output_space,
        }
    }

    pub fn tiny(output_space: Space) -> Self {
        let eye_convs = vec![
            ConvStage::new(8, 3, 1, 1, true),
            ConvStage::new(8, 3, 1, 1, true),
            ConvStage::new(16, 3, 1, 1, false),
            ConvStage::new(8, 3, 1, 1, false),
        ];
        let mut face_convs = eye_convs.clone();
        face_convs.push(ConvStage::new(8, 3, 1, 1, false));
        Self {
            profile: Profile::Tiny,
            eye_size: (16, 16),
            face_size: (32, 32),
            grid_size: GRID_SIZE,
            eye_convs,
            face_convs,
            eye_fc: EYE_EMBEDDING,
            face_fc: FACE_FC.to_vec(),
            grid_fc: GRID_FC.to_vec(),
            fusion_hidden: 128,
            output_space,
        }
    }

    pub fn for_profile(profile: Profile, output_space: Space) -> Self {
        match profile {
            Profile::Full => Self::full(output_space),
            Profile::Tiny => Self::tiny(output_space),
        }
    }

    /// Hex digest of the canonical JSON form; identifies compatible weights.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid_cells(&self) -> usize {
        self.grid_size * self.grid_size
    }

    /// Checks the branch structure and that every layer's shapes line up.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GazeError::InvalidArgument(format!("model config: {m}")));
        if self.eye_convs.len() != EYE_CONV_LAYERS {
            return bad(format!("eye branch needs {EYE_CONV_LAYERS} conv layers, has {}", self.eye_convs.len()));
        }
        if self.face_convs.len() != FACE_CONV_LAYERS {
            return bad(format!("face branch needs {FACE_CONV_LAYERS} conv layers, has {}", self.face_convs.len()));
        }
        if self.eye_fc != EYE_EMBEDDING {
            return bad(format!("eye embedding must be {EYE_EMBEDDING}, is {}", self.eye_fc));
        }
        if self.face_fc != FACE_FC {
            return bad(format!("face FC chain must be {FACE_FC:?}, is {:?}", self.face_fc));
        }
        if self.grid_fc != GRID_FC {
            return bad(format!("grid FC chain must be {GRID_FC:?}, is {:?}", self.grid_fc));
        }
        if self.grid_size != GRID_SIZE {
            return bad(format!("face grid must be {GRID_SIZE}x{GRID_SIZE}"));
        }
        if self.fusion_hidden == 0 {
            return bad("fusion hidden width must be positive".into());
        }
        let (eh, ew) = self.eye_size;
        let (fh, fw) = self.face_size;
        conv_trunk(&self.eye_convs, [3, eh, ew])?;
        conv_trunk(&self.face_convs, [3, fh, fw])?;
        Ok(())
    }
}

/// Layer list and flattened output width of a conv trunk.
pub(crate) fn conv_trunk(stages: &[ConvStage], input: [usize; 3]) -> Result<(Vec<LayerSpec>, usize)> {
    let mut shape = input.to_vec();
    let mut layers = Vec::new();
    for s in stages {
        let spec = LayerSpec::Conv2d(Conv2dSpec::square(shape[0], s.out_channels, s.kernel, s.stride, s.padding));
        shape = spec.output_shape(&[&shape])?;
        layers.push(spec);
        layers.push(LayerSpec::Relu);
        if let Some(p) = s.pool {
            let pool = LayerSpec::MaxPool2d(p);
            shape = pool.output_shape(&[&shape])?;
            layers.push(pool);
        }
    }
    Ok((layers, shape.iter().product()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate() {
        ModelConfig::full(Space::CameraCm).validate().unwrap();
        ModelConfig::tiny(Space::NormalizedScreen).validate().unwrap();
    }

    #[test]
    fn inconsistent_tables_are_rejected() {
        let mut c = ModelConfig::tiny(Space::CameraCm);
        c.eye_convs.pop();
        assert!(c.validate().is_err());

        let mut c = ModelConfig::tiny(Space::CameraCm);
        c.face_fc = vec![128, 32];
        assert!(c.validate().is_err());

        let mut c = ModelConfig::tiny(Space::CameraCm);
        c.eye_size = (2, 2);
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_distinguishes_configs() {
        let a = ModelConfig::tiny(Space::CameraCm);
        let b = ModelConfig::tiny(Space::NormalizedScreen);
        let c = ModelConfig::full(Space::CameraCm);
        assert_eq!(a.fingerprint(), ModelConfig::tiny(Space::CameraCm).fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 32);
    }

    #[test]
    fn profile_parses() {
        assert_eq!("tiny".parse::<Profile>().unwrap(), Profile::Tiny);
        assert_eq!("FULL".parse::<Profile>().unwrap(), Profile::Full);
        assert!("medium".parse::<Profile>().is_err());
    }
}
