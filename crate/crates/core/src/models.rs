//! Architecture builders: VGGE and scaled-down AlexNet and ResNet variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{count_params, infer_shape, LayerSpec, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "VGGE")]
    Vgge,
    AlexNetMini,
    ResNetMini,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Vgge, ModelKind::AlexNetMini, ModelKind::ResNetMini];

    pub fn build(self, input_shape: [usize; 3], n_classes: usize) -> Result<ModelConfig> {
        match self {
            ModelKind::Vgge => build_vgge(input_shape, n_classes),
            ModelKind::AlexNetMini => build_alexnet_mini(input_shape, n_classes),
            ModelKind::ResNetMini => build_resnet_mini(input_shape, n_classes),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Vgge => "VGGE",
            ModelKind::AlexNetMini => "AlexNetMini",
            ModelKind::ResNetMini => "ResNetMini",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vgge" => Ok(ModelKind::Vgge),
            "alexnetmini" | "alexnet" => Ok(ModelKind::AlexNetMini),
            "resnetmini" | "resnet" => Ok(ModelKind::ResNetMini),
            _ => Err(Error::Config(format!(
                "unknown model {s:?}; expected VGGE, AlexNetMini or ResNetMini"
            ))),
        }
    }
}

/// A shape-checked architecture. `input_shape` is `(n_mfcc, n_frames, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: ModelKind,
    pub input_shape: [usize; 3],
    pub n_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelConfig {
    fn checked(name: ModelKind, input_shape: [usize; 3], n_classes: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let cfg = ModelConfig { name, input_shape, n_classes, layers };
        let out = infer_shape(&cfg.engine_input(), &cfg.layers)?;
        if out != [n_classes] {
            return Err(Error::dim(name.to_string(), format!("final output {out:?}, expected [{n_classes}]")));
        }
        Ok(cfg)
    }

    /// Channel-first shape the engine consumes: `[1, n_mfcc, n_frames]`.
    pub fn engine_input(&self) -> [usize; 3] {
        let [h, w, c] = self.input_shape;
        [c, h, w]
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.engine_input(), &self.layers).expect("checked at build")
    }

    pub fn instantiate<T: Scalar>(&self, seed: u64) -> Result<Network<T>> {
        Network::new(&self.engine_input(), self.layers.clone(), seed)
    }
}

fn check_input(name: &str, input_shape: [usize; 3], n_classes: usize) -> Result<()> {
    let [h, w, c] = input_shape;
    if c != 1 {
        return Err(Error::dim(name, format!("expects one input channel, got {c}")));
    }
    if h < 16 || w < 16 {
        return Err(Error::dim(name, format!("input {h}x{w} too small; need at least 16x16")));
    }
    if n_classes < 2 {
        return Err(Error::dim(name, "need at least 2 classes"));
    }
    Ok(())
}

/// Width and head settings for VGGE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VggeOptions {
    pub widths: Vec<usize>,
    pub dense_units: usize,
    pub dropout: f64,
    pub batch_norm: bool,
}

impl Default for VggeOptions {
    fn default() -> Self {
        VggeOptions {
            widths: vec![32, 64, 128, 256],
            dense_units: 256,
            dropout: 0.5,
            batch_norm: false,
        }
    }
}

/// Four blocks of 3x3 same conv, ReLU and 2x2 max-pool, then a
/// dense-ReLU-dropout head.
pub fn build_vgge(input_shape: [usize; 3], n_classes: usize) -> Result<ModelConfig> {
    build_vgge_with(input_shape, n_classes, &VggeOptions::default())
}

pub fn build_vgge_with(input_shape: [usize; 3], n_classes: usize, opts: &VggeOptions) -> Result<ModelConfig> {
    check_input("VGGE", input_shape, n_classes)?;
    let mut layers = Vec::new();
    for &w in &opts.widths {
        layers.push(LayerSpec::conv_same(w, 3));
        if opts.batch_norm {
            layers.push(LayerSpec::batch_norm());
        }
        layers.push(LayerSpec::ReLU);
        layers.push(LayerSpec::max_pool(2));
    }
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::dense(opts.dense_units),
        LayerSpec::ReLU,
        LayerSpec::dropout(opts.dropout),
        LayerSpec::dense(n_classes),
    ]);
    ModelConfig::checked(ModelKind::Vgge, input_shape, n_classes, layers)
}

/// Five convolutions (11x11 stride 2, 5x5, three 3x3) with three pools and
/// two dropout-regularized dense layers.
pub fn build_alexnet_mini(input_shape: [usize; 3], n_classes: usize) -> Result<ModelConfig> {
    check_input("AlexNetMini", input_shape, n_classes)?;
    use LayerSpec as L;
    let layers = vec![
        L::conv(48, 11, 2, 5),
        L::ReLU,
        L::max_pool(2),
        L::conv_same(96, 5),
        L::ReLU,
        L::max_pool(2),
        L::conv_same(128, 3),
        L::ReLU,
        L::conv_same(128, 3),
        L::ReLU,
        L::conv_same(96, 3),
        L::ReLU,
        L::max_pool(2),
        L::Flatten,
        L::dense(1024),
        L::ReLU,
        L::dropout(0.5),
        L::dense(512),
        L::ReLU,
        L::dropout(0.5),
        L::dense(n_classes),
    ];
    ModelConfig::checked(ModelKind::AlexNetMini, input_shape, n_classes, layers)
}

/// Basic residual block; a strided block gets a 1x1 projection shortcut.
pub fn residual_block(width: usize, stride: usize, project: bool) -> Vec<LayerSpec> {
    use LayerSpec as L;
    let main = vec![
        L::conv(width, 3, stride, 1),
        L::batch_norm(),
        L::ReLU,
        L::conv_same(width, 3),
        L::batch_norm(),
    ];
    let shortcut = if project {
        vec![L::conv(width, 1, stride, 0), L::batch_norm()]
    } else {
        Vec::new()
    };
    vec![L::Residual { main, shortcut }, L::ReLU]
}

/// Stem conv and four stages of two residual blocks (8/16/32/64 channels),
/// global average pooling and a dense head.
pub fn build_resnet_mini(input_shape: [usize; 3], n_classes: usize) -> Result<ModelConfig> {
    check_input("ResNetMini", input_shape, n_classes)?;
    use LayerSpec as L;
    let mut layers = vec![L::conv_same(8, 3), L::batch_norm(), L::ReLU];
    let mut prev = 8;
    for (stage, width) in [8usize, 16, 32, 64].into_iter().enumerate() {
        let stride = if stage == 0 { 1 } else { 2 };
        layers.extend(residual_block(width, stride, stride != 1 || width != prev));
        layers.extend(residual_block(width, 1, false));
        prev = width;
    }
    layers.extend([L::GlobalAvgPool, L::dense(n_classes)]);
    ModelConfig::checked(ModelKind::ResNetMini, input_shape, n_classes, layers)
}
