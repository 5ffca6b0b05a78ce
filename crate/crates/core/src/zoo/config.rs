use serde::{Deserialize, Serialize};

use super::{Result, ZooError};

/// Default frames per input window.
pub const SEQUENCE_LENGTH: usize = 5;
pub const LEAKY_ALPHA: f32 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    None,
    Relu,
    LeakyRelu(f32),
    Tanh,
}

/// One entry of an architecture's layer list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 2D convolution applied to every frame of the window independently.
    Conv2d {
        filters: usize,
        kernel: [usize; 2],
        stride: [usize; 2],
        padding: [usize; 2],
        activation: Activation,
    },
    /// Convolution over (time, height, width). Bias is dropped when
    /// followed by batch norm.
    Conv3d {
        filters: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
        batch_norm: bool,
        activation: Activation,
    },
    /// conv3d-BN-LeakyReLU-conv3d-BN plus shortcut, then LeakyReLU. The
    /// first conv carries `stride`; a 1x1x1 projection is added to the
    /// shortcut when the channel count or extent changes.
    ResidualBlock {
        filters: usize,
        stride: [usize; 3],
        alpha: f32,
    },
    /// Window: per frame to `[T, F]`. Volume: everything to `[F]`.
    Flatten,
    GlobalAvgPool,
    Lstm {
        hidden: usize,
    },
    Gru {
        hidden: usize,
    },
    Dense {
        units: usize,
        activation: Activation,
    },
    /// Dense layer to two values, steering through tanh and throttle
    /// through sigmoid.
    PolicyHead,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Conv3d { .. } => "conv3d",
            LayerSpec::ResidualBlock { .. } => "residual_block",
            LayerSpec::Flatten => "flatten",
            LayerSpec::GlobalAvgPool => "global_avg_pool",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Gru { .. } => "gru",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::PolicyHead => "policy_head",
        }
    }

    /// Counts toward the temporal-convolution depth used by the ablation.
    pub fn is_conv3d_layer(&self) -> bool {
        matches!(self, LayerSpec::Conv3d { .. } | LayerSpec::ResidualBlock { .. })
    }
}

/// Per-sample activation shape between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeKind {
    /// `[T, C, H, W]`, frames in time order.
    Window { t: usize, c: usize, h: usize, w: usize },
    /// `[C, T, H, W]`, channels first for 3D convolution.
    Volume { c: usize, t: usize, h: usize, w: usize },
    /// `[T, F]`
    Sequence { t: usize, f: usize },
    /// `[F]`
    Vector { f: usize },
}

impl ShapeKind {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            ShapeKind::Window { t, c, h, w } => vec![t, c, h, w],
            ShapeKind::Volume { c, t, h, w } => vec![c, t, h, w],
            ShapeKind::Sequence { t, f } => vec![t, f],
            ShapeKind::Vector { f } => vec![f],
        }
    }

    pub fn numel(&self) -> usize {
        self.dims().iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub name: String,
    pub sequence_length: usize,
    /// `[channels, height, width]`; channels is 4 (RGB-D) or 3 (RGB only).
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

pub const BUILTIN_NAMES: [&str; 8] = [
    "rnn_default",
    "rnn_modified",
    "cnn3d_default",
    "cnn3d_modified",
    "cnn3d_modified_minus1",
    "cnn3d_modified_plus1",
    "cnn3d_modified_minus1_conv",
    "cnn3d_modified_plus1_conv",
];

pub fn conv_out(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn relu_conv2d(filters: usize) -> LayerSpec {
    LayerSpec::Conv2d {
        filters,
        kernel: [3, 3],
        stride: [2, 2],
        padding: [1, 1],
        activation: Activation::Relu,
    }
}

fn conv3d(filters: usize, stride: [usize; 3], batch_norm: bool, activation: Activation) -> LayerSpec {
    LayerSpec::Conv3d {
        filters,
        kernel: [3, 3, 3],
        stride,
        padding: [1, 1, 1],
        batch_norm,
        activation,
    }
}

fn block(filters: usize, stride: [usize; 3]) -> LayerSpec {
    LayerSpec::ResidualBlock {
        filters,
        stride,
        alpha: LEAKY_ALPHA,
    }
}

fn rnn(cell: LayerSpec) -> Vec<LayerSpec> {
    vec![
        relu_conv2d(16),
        relu_conv2d(32),
        relu_conv2d(64),
        LayerSpec::Flatten,
        cell,
        LayerSpec::Dense {
            units: 64,
            activation: Activation::Relu,
        },
        LayerSpec::PolicyHead,
    ]
}

fn residual_tail(mut body: Vec<LayerSpec>) -> Vec<LayerSpec> {
    body.push(LayerSpec::GlobalAvgPool);
    body.push(LayerSpec::Dense {
        units: 128,
        activation: Activation::LeakyRelu(LEAKY_ALPHA),
    });
    body.push(LayerSpec::PolicyHead);
    body
}

fn stem() -> LayerSpec {
    conv3d(16, [1, 2, 2], true, Activation::LeakyRelu(LEAKY_ALPHA))
}

impl ArchitectureConfig {
    /// Built-in architecture by name for `input_shape = [C, H, W]`.
    pub fn builtin(name: &str, input_shape: [usize; 3]) -> Result<ArchitectureConfig> {
        let s2 = [1, 2, 2];
        let layers = match name {
            "rnn_default" => rnn(LayerSpec::Lstm { hidden: 128 }),
            "rnn_modified" => rnn(LayerSpec::Gru { hidden: 128 }),
            "cnn3d_default" => vec![
                conv3d(16, s2, false, Activation::Relu),
                conv3d(32, s2, false, Activation::Relu),
                conv3d(64, s2, false, Activation::Relu),
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 128,
                    activation: Activation::Relu,
                },
                LayerSpec::PolicyHead,
            ],
            "cnn3d_modified" => residual_tail(vec![stem(), block(32, s2), block(64, s2)]),
            "cnn3d_modified_minus1" => residual_tail(vec![stem(), block(32, s2)]),
            "cnn3d_modified_plus1" => {
                residual_tail(vec![stem(), block(32, s2), block(64, s2), block(64, [1, 1, 1])])
            }
            "cnn3d_modified_minus1_conv" => residual_tail(vec![block(32, s2), block(64, s2)]),
            "cnn3d_modified_plus1_conv" => residual_tail(vec![
                stem(),
                block(32, s2),
                block(64, s2),
                conv3d(64, [1, 1, 1], true, Activation::LeakyRelu(LEAKY_ALPHA)),
            ]),
            other => return Err(ZooError::UnknownArchitecture(other.to_string())),
        };
        let cfg = ArchitectureConfig {
            name: name.to_string(),
            sequence_length: SEQUENCE_LENGTH,
            input_shape,
            layers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same architecture without the depth channel.
    pub fn rgb_only(mut self) -> ArchitectureConfig {
        self.input_shape[0] = 3;
        self
    }

    pub fn input_kind(&self) -> ShapeKind {
        let [c, h, w] = self.input_shape;
        ShapeKind::Window {
            t: self.sequence_length,
            c,
            h,
            w,
        }
    }

    pub fn conv3d_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_conv3d_layer()).count()
    }

    /// Output shape of every layer, in order. Fails with the index of the
    /// first layer whose input does not fit.
    pub fn shapes(&self) -> Result<Vec<ShapeKind>> {
        let bad = |layer: usize, detail: String| ZooError::Config { layer, detail };
        let [c, h, w] = self.input_shape;
        if self.sequence_length == 0 || c == 0 || h == 0 || w == 0 {
            return Err(ZooError::Config {
                layer: 0,
                detail: format!(
                    "empty input: T={} shape {:?}",
                    self.sequence_length, self.input_shape
                ),
            });
        }
        if c != 3 && c != 4 {
            return Err(bad(0, format!("input needs 3 or 4 channels, got {c}")));
        }
        let mut cur = self.input_kind();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let last = i + 1 == self.layers.len();
            if matches!(layer, LayerSpec::PolicyHead) != last {
                return Err(bad(i, "the policy head must be the final layer, and only there".into()));
            }
            cur = match (*layer, cur) {
                (
                    LayerSpec::Conv2d {
                        filters,
                        kernel,
                        stride,
                        padding,
                        ..
                    },
                    ShapeKind::Window { t, h, w, .. },
                ) => {
                    let oh = conv_out(h, kernel[0], stride[0], padding[0]);
                    let ow = conv_out(w, kernel[1], stride[1], padding[1]);
                    match (oh, ow, filters) {
                        (Some(h), Some(w), f) if f > 0 => ShapeKind::Window { t, c: f, h, w },
                        _ => return Err(bad(i, format!("conv2d does not fit {h}x{w}"))),
                    }
                }
                (
                    LayerSpec::Conv3d {
                        filters,
                        kernel,
                        stride,
                        padding,
                        ..
                    },
                    ShapeKind::Window { t, h, w, .. } | ShapeKind::Volume { t, h, w, .. },
                ) => {
                    let ext = [t, h, w];
                    let o: Option<Vec<usize>> = (0..3)
                        .map(|a| conv_out(ext[a], kernel[a], stride[a], padding[a]))
                        .collect();
                    match o {
                        Some(o) if filters > 0 => ShapeKind::Volume {
                            c: filters,
                            t: o[0],
                            h: o[1],
                            w: o[2],
                        },
                        _ => return Err(bad(i, format!("conv3d does not fit {t}x{h}x{w}"))),
                    }
                }
                (
                    LayerSpec::ResidualBlock { filters, stride, .. },
                    ShapeKind::Window { t, h, w, .. } | ShapeKind::Volume { t, h, w, .. },
                ) => {
                    let o: Option<Vec<usize>> = [t, h, w]
                        .iter()
                        .zip(stride)
                        .map(|(&e, s)| conv_out(e, 3, s, 1))
                        .collect();
                    match o {
                        Some(o) if filters > 0 => ShapeKind::Volume {
                            c: filters,
                            t: o[0],
                            h: o[1],
                            w: o[2],
                        },
                        _ => return Err(bad(i, "residual block does not fit".into())),
                    }
                }
                (LayerSpec::Flatten, ShapeKind::Window { t, c, h, w }) => {
                    ShapeKind::Sequence { t, f: c * h * w }
                }
                (LayerSpec::Flatten, k @ ShapeKind::Volume { .. }) => {
                    ShapeKind::Vector { f: k.numel() }
                }
                (LayerSpec::GlobalAvgPool, ShapeKind::Volume { c, .. }) => {
                    ShapeKind::Vector { f: c }
                }
                (LayerSpec::Lstm { hidden } | LayerSpec::Gru { hidden }, ShapeKind::Sequence { .. })
                    if hidden > 0 =>
                {
                    ShapeKind::Vector { f: hidden }
                }
                (LayerSpec::Dense { units, .. }, ShapeKind::Vector { .. }) if units > 0 => {
                    ShapeKind::Vector { f: units }
                }
                (LayerSpec::PolicyHead, ShapeKind::Vector { .. }) => ShapeKind::Vector { f: 2 },
                (layer, shape) => {
                    return Err(bad(i, format!("{} cannot follow {shape:?}", layer.kind())));
                }
            };
            out.push(cur);
        }
        match out.last() {
            Some(ShapeKind::Vector { f: 2 }) => Ok(out),
            _ => Err(bad(
                self.layers.len().saturating_sub(1),
                "the last layer must be a policy head producing 2 values".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<ArchitectureConfig> {
        let cfg: ArchitectureConfig =
            serde_json::from_str(s).map_err(|e| ZooError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates_at_both_resolutions() {
        for name in BUILTIN_NAMES {
            for shape in [[4, 120, 160], [4, 48, 64], [3, 48, 64]] {
                ArchitectureConfig::builtin(name, shape).unwrap();
            }
        }
    }

    #[test]
    fn broken_chain_names_the_layer() {
        let mut cfg = ArchitectureConfig::builtin("cnn3d_modified", [4, 48, 64]).unwrap();
        cfg.layers.insert(4, LayerSpec::Gru { hidden: 8 });
        match cfg.validate() {
            Err(ZooError::Config { layer, .. }) => assert_eq!(layer, 4),
            other => panic!("{other:?}"),
        }
        let mut cfg = ArchitectureConfig::builtin("rnn_default", [4, 48, 64]).unwrap();
        cfg.layers.pop();
        assert!(matches!(cfg.validate(), Err(ZooError::Config { layer: 5, .. })));
    }

    #[test]
    fn tiny_input_fails_on_the_conv_that_no_longer_fits() {
        let mut cfg = ArchitectureConfig::builtin("cnn3d_default", [4, 48, 64]).unwrap();
        cfg.layers[1] = LayerSpec::Conv3d {
            filters: 8,
            kernel: [3, 50, 3],
            stride: [1, 1, 1],
            padding: [0, 0, 0],
            batch_norm: false,
            activation: Activation::Relu,
        };
        assert!(matches!(cfg.validate(), Err(ZooError::Config { layer: 1, .. })));
    }

    #[test]
    fn json_round_trip() {
        for name in BUILTIN_NAMES {
            let cfg = ArchitectureConfig::builtin(name, [4, 48, 64]).unwrap();
            assert_eq!(ArchitectureConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn rnn_variants_differ_only_in_the_cell() {
        let a = ArchitectureConfig::builtin("rnn_default", [4, 48, 64]).unwrap();
        let b = ArchitectureConfig::builtin("rnn_modified", [4, 48, 64]).unwrap();
        let diff: Vec<_> = a
            .layers
            .iter()
            .zip(&b.layers)
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .collect();
        assert_eq!(a.layers.len(), b.layers.len());
        assert_eq!(diff.len(), 1);
        let (_, (x, y)) = diff[0];
        assert_eq!((x.kind(), y.kind()), ("lstm", "gru"));
    }

    #[test]
    fn ablation_changes_one_temporal_conv_layer() {
        let base = ArchitectureConfig::builtin("cnn3d_modified", [4, 48, 64]).unwrap();
        for (name, delta) in [
            ("cnn3d_modified_minus1", -1),
            ("cnn3d_modified_plus1", 1),
            ("cnn3d_modified_minus1_conv", -1),
            ("cnn3d_modified_plus1_conv", 1),
        ] {
            let v = ArchitectureConfig::builtin(name, [4, 48, 64]).unwrap();
            assert_eq!(v.conv3d_layer_count() as i32 - base.conv3d_layer_count() as i32, delta, "{name}");
        }
    }
}
