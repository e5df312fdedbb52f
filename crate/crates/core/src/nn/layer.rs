use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative layer description. Activations are laid out `[N, C, H, W]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerSpec {
    Conv2D {
        filters: usize,
        kernel: [usize; 2],
        stride: [usize; 2],
        padding: [usize; 2],
    },
    MaxPool2D {
        size: [usize; 2],
        stride: [usize; 2],
    },
    Dense {
        units: usize,
    },
    ReLU,
    Dropout {
        rate: f64,
    },
    Flatten,
    BatchNorm {
        epsilon: f64,
        momentum: f64,
    },
    GlobalAvgPool,
    /// `main(x) + shortcut(x)`; an empty shortcut is the identity.
    Residual {
        main: Vec<LayerSpec>,
        shortcut: Vec<LayerSpec>,
    },
}

impl LayerSpec {
    /// Stride-1 convolution with "same" padding (odd kernels).
    pub fn conv_same(filters: usize, k: usize) -> Self {
        LayerSpec::Conv2D {
            filters,
            kernel: [k, k],
            stride: [1, 1],
            padding: [k / 2, k / 2],
        }
    }

    pub fn conv(filters: usize, k: usize, stride: usize, pad: usize) -> Self {
        LayerSpec::Conv2D {
            filters,
            kernel: [k, k],
            stride: [stride, stride],
            padding: [pad, pad],
        }
    }

    pub fn max_pool(k: usize) -> Self {
        LayerSpec::MaxPool2D {
            size: [k, k],
            stride: [k, k],
        }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec::Dropout { rate }
    }

    pub fn batch_norm() -> Self {
        LayerSpec::BatchNorm {
            epsilon: 1e-3,
            momentum: 0.99,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2D { .. } => "Conv2D",
            LayerSpec::MaxPool2D { .. } => "MaxPool2D",
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::ReLU => "ReLU",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::BatchNorm { .. } => "BatchNorm",
            LayerSpec::GlobalAvgPool => "GlobalAvgPool",
            LayerSpec::Residual { .. } => "Residual",
        }
    }
}

/// Per-sample output shape of `layers` applied to `input`.
pub fn infer_shape(input: &[usize], layers: &[LayerSpec]) -> Result<Vec<usize>> {
    Ok(Compiler::default().compile(layers, input)?.1)
}

/// Number of trainable scalars, without allocating them.
pub fn count_params(input: &[usize], layers: &[LayerSpec]) -> Result<usize> {
    let mut c = Compiler::default();
    c.compile(layers, input)?;
    Ok(c.params.iter().map(|p| p.shape.iter().product::<usize>()).sum())
}

/// Kind of a trainable tensor, used for initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ParamRole {
    Weight { fan_in: usize },
    Bias,
    Gamma,
    Beta,
}

#[derive(Debug, Clone)]
pub(crate) struct ParamDecl {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
}

/// Compiled layer with resolved shapes and parameter slots.
#[derive(Debug, Clone)]
pub(crate) enum Node {
    Conv(ConvGeom),
    Pool(PoolGeom),
    Dense {
        inputs: usize,
        units: usize,
        weight: usize,
        bias: usize,
    },
    Relu,
    Dropout {
        rate: f64,
        ordinal: u64,
    },
    Flatten,
    BatchNorm {
        channels: usize,
        spatial: usize,
        epsilon: f64,
        momentum: f64,
        gamma: usize,
        beta: usize,
        mean: usize,
        var: usize,
    },
    GlobalAvgPool {
        channels: usize,
        spatial: usize,
    },
    Residual {
        main: Vec<Node>,
        shortcut: Vec<Node>,
    },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub oh: usize,
    pub ow: usize,
    pub weight: usize,
    pub bias: usize,
}

impl ConvGeom {
    pub fn ck(&self) -> usize {
        self.c * self.kh * self.kw
    }

    pub fn p(&self) -> usize {
        self.oh * self.ow
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PoolGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub oh: usize,
    pub ow: usize,
}

#[derive(Default)]
pub(crate) struct Compiler {
    pub params: Vec<ParamDecl>,
    /// Shapes of non-trainable buffers (batch-norm running statistics).
    pub buffers: Vec<Vec<usize>>,
    dropouts: u64,
}

fn spatial(shape: &[usize], at: &str) -> Result<(usize, usize, usize)> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        _ => Err(Error::dim(at, format!("expects a [C, H, W] input, got {shape:?}"))),
    }
}

impl Compiler {
    fn param(&mut self, name: String, shape: Vec<usize>, role: ParamRole) -> usize {
        self.params.push(ParamDecl { name, shape, role });
        self.params.len() - 1
    }

    pub fn compile(&mut self, layers: &[LayerSpec], input: &[usize]) -> Result<(Vec<Node>, Vec<usize>)> {
        self.compile_seq(layers, input, "", "")
    }

    fn compile_seq(
        &mut self,
        layers: &[LayerSpec],
        input: &[usize],
        prefix: &str,
        tags: &str,
    ) -> Result<(Vec<Node>, Vec<usize>)> {
        let mut shape = input.to_vec();
        let mut nodes = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let at = format!("{prefix}layer {i} ({})", layer.kind());
            let (node, out) = self.compile_one(layer, &shape, &at, &format!("{tags}{i}"))?;
            nodes.push(node);
            shape = out;
        }
        Ok((nodes, shape))
    }

    fn compile_one(&mut self, layer: &LayerSpec, shape: &[usize], at: &str, tag: &str) -> Result<(Node, Vec<usize>)> {
        match layer {
            &LayerSpec::Conv2D {
                filters,
                kernel: [kh, kw],
                stride: [sh, sw],
                padding: [ph, pw],
            } => {
                let (c, h, w) = spatial(shape, at)?;
                if filters == 0 || kh == 0 || kw == 0 || sh == 0 || sw == 0 {
                    return Err(Error::dim(at, "filters, kernel and stride must be positive"));
                }
                if h + 2 * ph < kh || w + 2 * pw < kw {
                    return Err(Error::dim(
                        at,
                        format!("kernel {kh}x{kw} larger than padded input {}x{}", h + 2 * ph, w + 2 * pw),
                    ));
                }
                let oh = (h + 2 * ph - kh) / sh + 1;
                let ow = (w + 2 * pw - kw) / sw + 1;
                let fan_in = c * kh * kw;
                let weight = self.param(format!("{tag}.conv.weight"), vec![filters, fan_in], ParamRole::Weight { fan_in });
                let bias = self.param(format!("{tag}.conv.bias"), vec![filters], ParamRole::Bias);
                let g = ConvGeom { c, h, w, o: filters, kh, kw, sh, sw, ph, pw, oh, ow, weight, bias };
                Ok((Node::Conv(g), vec![filters, oh, ow]))
            }
            &LayerSpec::MaxPool2D {
                size: [kh, kw],
                stride: [sh, sw],
            } => {
                let (c, h, w) = spatial(shape, at)?;
                if kh == 0 || kw == 0 || sh == 0 || sw == 0 {
                    return Err(Error::dim(at, "pool size and stride must be positive"));
                }
                if h < kh || w < kw {
                    return Err(Error::dim(at, format!("input {h}x{w} smaller than pool window {kh}x{kw}")));
                }
                let oh = (h - kh) / sh + 1;
                let ow = (w - kw) / sw + 1;
                let g = PoolGeom { c, h, w, kh, kw, sh, sw, oh, ow };
                Ok((Node::Pool(g), vec![c, oh, ow]))
            }
            &LayerSpec::Dense { units } => {
                if shape.len() != 1 {
                    return Err(Error::dim(at, format!("expects a flat input, got {shape:?}; add Flatten")));
                }
                if units == 0 {
                    return Err(Error::dim(at, "units must be positive"));
                }
                let inputs = shape[0];
                let weight = self.param(format!("{tag}.dense.weight"), vec![units, inputs], ParamRole::Weight { fan_in: inputs });
                let bias = self.param(format!("{tag}.dense.bias"), vec![units], ParamRole::Bias);
                Ok((Node::Dense { inputs, units, weight, bias }, vec![units]))
            }
            LayerSpec::ReLU => Ok((Node::Relu, shape.to_vec())),
            &LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::dim(at, format!("dropout rate {rate} outside [0, 1)")));
                }
                self.dropouts += 1;
                Ok((Node::Dropout { rate, ordinal: self.dropouts }, shape.to_vec()))
            }
            LayerSpec::Flatten => Ok((Node::Flatten, vec![shape.iter().product()])),
            &LayerSpec::BatchNorm { epsilon, momentum } => {
                if epsilon <= 0.0 || !(0.0..=1.0).contains(&momentum) {
                    return Err(Error::dim(at, "epsilon must be positive and momentum in [0, 1]"));
                }
                let (channels, spatial) = match shape {
                    [f] => (*f, 1),
                    [c, h, w] => (*c, h * w),
                    _ => return Err(Error::dim(at, format!("unsupported input {shape:?}"))),
                };
                let gamma = self.param(format!("{tag}.bn.gamma"), vec![channels], ParamRole::Gamma);
                let beta = self.param(format!("{tag}.bn.beta"), vec![channels], ParamRole::Beta);
                self.buffers.push(vec![channels]);
                self.buffers.push(vec![channels]);
                let mean = self.buffers.len() - 2;
                let var = self.buffers.len() - 1;
                Ok((
                    Node::BatchNorm { channels, spatial, epsilon, momentum, gamma, beta, mean, var },
                    shape.to_vec(),
                ))
            }
            LayerSpec::GlobalAvgPool => {
                let (c, h, w) = spatial(shape, at)?;
                Ok((Node::GlobalAvgPool { channels: c, spatial: h * w }, vec![c]))
            }
            LayerSpec::Residual { main, shortcut } => {
                let (main_nodes, main_out) = self.compile_seq(main, shape, &format!("{at} main "), &format!("{tag}.main."))?;
                let (short_nodes, short_out) = self.compile_seq(shortcut, shape, &format!("{at} shortcut "), &format!("{tag}.shortcut."))?;
                if main_out != short_out {
                    return Err(Error::dim(
                        at,
                        format!("branch shapes differ: main {main_out:?}, shortcut {short_out:?}"),
                    ));
                }
                Ok((Node::Residual { main: main_nodes, shortcut: short_nodes }, main_out))
            }
        }
    }
}
