use crate::command::ControlCommand;
use crate::nn::init::{fan_in_uniform, rng};
use crate::nn::{BatchNormStats, EngineError, GateVars, GruVars, LstmVars, NormMode, Tape, Tensor, Var};

use super::config::{Activation, ArchitectureConfig, LayerSpec, ShapeKind};
use super::{Result, ZooError};

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor<f32>,
}

/// Running statistics of one batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct NormBuffer {
    pub name: String,
    pub stats: BatchNormStats<f32>,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    gamma: usize,
    beta: usize,
    stats: usize,
}

#[derive(Clone, Copy, Debug)]
struct Gate {
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Clone, Debug)]
enum Layer {
    Conv2d {
        k: usize,
        b: usize,
        stride: [usize; 2],
        padding: [usize; 2],
        act: Activation,
    },
    Conv3d {
        k: usize,
        b: Option<usize>,
        norm: Option<Norm>,
        stride: [usize; 3],
        padding: [usize; 3],
        act: Activation,
    },
    Residual {
        conv1: usize,
        norm1: Norm,
        conv2: usize,
        norm2: Norm,
        /// 1x1x1 kernel and bias
        projection: Option<(usize, usize)>,
        stride: [usize; 3],
        alpha: f32,
    },
    Flatten,
    GlobalAvgPool,
    Lstm {
        gates: [Gate; 4],
        hidden: usize,
    },
    Gru {
        gates: [Gate; 3],
        hidden: usize,
    },
    Dense {
        w: usize,
        b: usize,
        act: Activation,
    },
    Head {
        w: usize,
        b: usize,
    },
}

/// A built policy network: parameters, batch-norm buffers and the layer
/// program that wires them.
#[derive(Clone, Debug)]
pub struct Model {
    config: ArchitectureConfig,
    params: Vec<Param>,
    norms: Vec<NormBuffer>,
    layers: Vec<Layer>,
}

struct Builder<R> {
    rng: R,
    params: Vec<Param>,
    norms: Vec<NormBuffer>,
}

impl<R: rand::Rng> Builder<R> {
    fn fan_in(&mut self, name: String, shape: &[usize], fan_in: usize) -> usize {
        let value = fan_in_uniform(shape, fan_in, &mut self.rng);
        self.push(name, value)
    }

    fn zeros(&mut self, name: String, shape: &[usize]) -> usize {
        self.push(name, Tensor::zeros(shape))
    }

    fn push(&mut self, name: String, value: Tensor<f32>) -> usize {
        self.params.push(Param { name, value });
        self.params.len() - 1
    }

    fn norm(&mut self, prefix: &str, channels: usize) -> Norm {
        let gamma = self.push(format!("{prefix}.gamma"), Tensor::ones(&[channels]));
        let beta = self.zeros(format!("{prefix}.beta"), &[channels]);
        self.norms.push(NormBuffer {
            name: prefix.to_string(),
            stats: BatchNormStats::new(channels),
        });
        Norm {
            gamma,
            beta,
            stats: self.norms.len() - 1,
        }
    }

    fn gate(&mut self, prefix: &str, input: usize, hidden: usize) -> Gate {
        Gate {
            w: self.fan_in(format!("{prefix}.w"), &[hidden, input], input),
            u: self.fan_in(format!("{prefix}.u"), &[hidden, hidden], hidden),
            b: self.zeros(format!("{prefix}.b"), &[hidden]),
        }
    }
}

fn channels(kind: ShapeKind) -> usize {
    match kind {
        ShapeKind::Window { c, .. } | ShapeKind::Volume { c, .. } => c,
        ShapeKind::Sequence { f, .. } | ShapeKind::Vector { f } => f,
    }
}

impl Model {
    /// Builds `cfg` with weights drawn from a generator seeded by `seed`.
    pub fn build(cfg: &ArchitectureConfig, seed: u64) -> Result<Model> {
        let shapes = cfg.shapes()?;
        let mut b = Builder {
            rng: rng(seed),
            params: Vec::new(),
            norms: Vec::new(),
        };
        let mut layers = Vec::with_capacity(cfg.layers.len());
        let mut input = cfg.input_kind();
        for (i, spec) in cfg.layers.iter().enumerate() {
            let p = format!("{i}.{}", spec.kind());
            let cin = channels(input);
            let layer = match *spec {
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    stride,
                    padding,
                    activation,
                } => Layer::Conv2d {
                    k: b.fan_in(
                        format!("{p}.kernel"),
                        &[filters, cin, kernel[0], kernel[1]],
                        cin * kernel[0] * kernel[1],
                    ),
                    b: b.zeros(format!("{p}.bias"), &[filters]),
                    stride,
                    padding,
                    act: activation,
                },
                LayerSpec::Conv3d {
                    filters,
                    kernel,
                    stride,
                    padding,
                    batch_norm,
                    activation,
                } => {
                    let fan: usize = cin * kernel.iter().product::<usize>();
                    let k = b.fan_in(
                        format!("{p}.kernel"),
                        &[filters, cin, kernel[0], kernel[1], kernel[2]],
                        fan,
                    );
                    let (bias, norm) = if batch_norm {
                        (None, Some(b.norm(&format!("{p}.bn"), filters)))
                    } else {
                        (Some(b.zeros(format!("{p}.bias"), &[filters])), None)
                    };
                    Layer::Conv3d {
                        k,
                        b: bias,
                        norm,
                        stride,
                        padding,
                        act: activation,
                    }
                }
                LayerSpec::ResidualBlock {
                    filters,
                    stride,
                    alpha,
                } => {
                    let conv1 = b.fan_in(format!("{p}.conv1"), &[filters, cin, 3, 3, 3], cin * 27);
                    let norm1 = b.norm(&format!("{p}.bn1"), filters);
                    let conv2 =
                        b.fan_in(format!("{p}.conv2"), &[filters, filters, 3, 3, 3], filters * 27);
                    let norm2 = b.norm(&format!("{p}.bn2"), filters);
                    let same_extent = stride == [1, 1, 1] && matches!(input, ShapeKind::Volume { .. });
                    let projection = (cin != filters || !same_extent).then(|| {
                        (
                            b.fan_in(format!("{p}.proj"), &[filters, cin, 1, 1, 1], cin),
                            b.zeros(format!("{p}.proj_bias"), &[filters]),
                        )
                    });
                    Layer::Residual {
                        conv1,
                        norm1,
                        conv2,
                        norm2,
                        projection,
                        stride,
                        alpha,
                    }
                }
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::GlobalAvgPool => Layer::GlobalAvgPool,
                LayerSpec::Lstm { hidden } => Layer::Lstm {
                    gates: ["input", "forget", "output", "candidate"]
                        .map(|g| b.gate(&format!("{p}.{g}"), cin, hidden)),
                    hidden,
                },
                LayerSpec::Gru { hidden } => Layer::Gru {
                    gates: ["update", "reset", "candidate"]
                        .map(|g| b.gate(&format!("{p}.{g}"), cin, hidden)),
                    hidden,
                },
                LayerSpec::Dense { units, activation } => Layer::Dense {
                    w: b.fan_in(format!("{p}.w"), &[units, cin], cin),
                    b: b.zeros(format!("{p}.b"), &[units]),
                    act: activation,
                },
                LayerSpec::PolicyHead => Layer::Head {
                    w: b.fan_in(format!("{p}.w"), &[2, cin], cin),
                    b: b.zeros(format!("{p}.b"), &[2]),
                },
            };
            layers.push(layer);
            input = shapes[i];
        }
        Ok(Model {
            config: cfg.clone(),
            params: b.params,
            norms: b.norms,
            layers,
        })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn norms(&self) -> &[NormBuffer] {
        &self.norms
    }

    pub fn norms_mut(&mut self) -> &mut [NormBuffer] {
        &mut self.norms
    }

    /// Number of scalar trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Names of the recurrent cells in the model (`"lstm"`, `"gru"`).
    pub fn recurrent_cells(&self) -> Vec<&'static str> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Lstm { .. } => Some("lstm"),
                Layer::Gru { .. } => Some("gru"),
                _ => None,
            })
            .collect()
    }

    fn layer_kinds(&self) -> Vec<&'static str> {
        self.config.layers.iter().map(|l| l.kind()).collect()
    }

    /// Per-sample window shape `[T, C, H, W]`.
    pub fn window_shape(&self) -> [usize; 4] {
        let [c, h, w] = self.config.input_shape;
        [self.config.sequence_length, c, h, w]
    }

    fn check_batch(&self, x: &Tensor<f32>) -> Result<()> {
        let want = self.window_shape();
        if x.ndim() != 5 || x.shape()[1..] != want {
            return Err(ZooError::Engine(EngineError::Dimension {
                op: "model input",
                detail: format!("expected [N, {want:?}...], got {:?}", x.shape()),
            }));
        }
        Ok(())
    }

    /// Records the network on `tape` for a batch `x [N, T, C, H, W]` and
    /// returns the squashed `[N, 2]` output. Parameters are registered with
    /// their index as slot. In training mode batch-norm statistics are
    /// updated in place.
    pub fn forward(&mut self, tape: &mut Tape<f32>, x: &Tensor<f32>, mode: NormMode) -> Result<Var> {
        self.check_batch(x)?;
        let vars: Vec<Var> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| tape.param(&p.value, i))
            .collect();
        let xv = tape.input(x.clone());
        let kinds = self.layer_kinds();
        let Model { layers, norms, .. } = self;
        run(tape, layers, &vars, norms, xv, mode, &kinds)
    }

    /// Inference on a batch of windows; returns `[N, 2]`.
    pub fn predict(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.check_batch(x)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.input(p.value.clone())).collect();
        let xv = tape.input(x.clone());
        let mut norms = self.norms.clone();
        let kinds = self.layer_kinds();
        let y = run(&mut tape, &self.layers, &vars, &mut norms, xv, NormMode::Inference, &kinds)?;
        Ok(tape.value(y).clone())
    }

    /// Maps one `[T, C, H, W]` window to a command. Every call starts from a
    /// fresh recurrent state.
    pub fn forward_policy(&self, window: &Tensor<f32>) -> Result<ControlCommand> {
        let want = self.window_shape();
        if window.shape() != want {
            return Err(ZooError::Engine(EngineError::Dimension {
                op: "forward_policy",
                detail: format!("window {:?}, model expects {want:?}", window.shape()),
            }));
        }
        let x = window.clone().reshape(&[1, want[0], want[1], want[2], want[3]])?;
        let y = self.predict(&x)?;
        let d = y.data();
        Ok(ControlCommand::new(d[0], d[1]))
    }
}

pub fn parameter_count(model: &Model) -> usize {
    model.parameter_count()
}

fn activate(tape: &mut Tape<f32>, x: Var, act: Activation) -> Var {
    match act {
        Activation::None => x,
        Activation::Relu => tape.relu(x),
        Activation::LeakyRelu(a) => tape.leaky_relu(x, a),
        Activation::Tanh => tape.tanh(x),
    }
}

fn batch_norm(
    tape: &mut Tape<f32>,
    x: Var,
    n: Norm,
    vars: &[Var],
    norms: &mut [NormBuffer],
    mode: NormMode,
) -> crate::nn::Result<Var> {
    let stats = &mut norms[n.stats].stats;
    let stored = stats.mode;
    stats.mode = mode;
    let y = tape.batch_norm(x, vars[n.gamma], vars[n.beta], stats);
    stats.mode = stored;
    let y = y?;
    tape.set_label(y, norms[n.stats].name.clone());
    Ok(y)
}

/// `[N, C, T, H, W]` view of the current activation.
fn as_volume(tape: &mut Tape<f32>, x: Var, is_window: bool) -> crate::nn::Result<Var> {
    if is_window {
        tape.permute(x, &[0, 2, 1, 3, 4])
    } else {
        Ok(x)
    }
}

fn run(
    tape: &mut Tape<f32>,
    layers: &[Layer],
    vars: &[Var],
    norms: &mut [NormBuffer],
    x: Var,
    mode: NormMode,
    kinds: &[&'static str],
) -> Result<Var> {
    let mut cur = x;
    // the input arrives as [N, T, C, H, W]
    let mut window = true;
    for (i, layer) in layers.iter().enumerate() {
        cur = match *layer {
            Layer::Conv2d {
                k,
                b,
                stride,
                padding,
                act,
            } => {
                let s = tape.shape(cur).to_vec();
                let (n, t) = (s[0], s[1]);
                let frames = tape.reshape(cur, &[n * t, s[2], s[3], s[4]])?;
                let y = tape.conv2d(frames, vars[k], Some(vars[b]), stride, padding)?;
                let y = activate(tape, y, act);
                let o = tape.shape(y).to_vec();
                tape.reshape(y, &[n, t, o[1], o[2], o[3]])?
            }
            Layer::Conv3d {
                k,
                b,
                norm,
                stride,
                padding,
                act,
            } => {
                let v = as_volume(tape, cur, window)?;
                window = false;
                let mut y = tape.conv3d(v, vars[k], b.map(|b| vars[b]), stride, padding)?;
                if let Some(n) = norm {
                    y = batch_norm(tape, y, n, vars, norms, mode)?;
                }
                activate(tape, y, act)
            }
            Layer::Residual {
                conv1,
                norm1,
                conv2,
                norm2,
                projection,
                stride,
                alpha,
            } => {
                let v = as_volume(tape, cur, window)?;
                window = false;
                let branch = |t: &mut Tape<f32>, x: Var| {
                    let y = t.conv3d(x, vars[conv1], None, stride, [1, 1, 1])?;
                    let y = batch_norm(t, y, norm1, vars, norms, mode)?;
                    let y = t.leaky_relu(y, alpha);
                    let y = t.conv3d(y, vars[conv2], None, [1, 1, 1], [1, 1, 1])?;
                    batch_norm(t, y, norm2, vars, norms, mode)
                };
                let y = match projection {
                    Some((pk, pb)) => tape.residual_projected(v, branch, |t, x| {
                        t.conv3d(x, vars[pk], Some(vars[pb]), stride, [0, 0, 0])
                    })?,
                    None => tape.residual(v, branch)?,
                };
                tape.leaky_relu(y, alpha)
            }
            Layer::Flatten => {
                let s = tape.shape(cur).to_vec();
                if window {
                    window = false;
                    tape.reshape(cur, &[s[0], s[1], s[2..].iter().product()])?
                } else {
                    tape.flatten(cur)?
                }
            }
            Layer::GlobalAvgPool => tape.global_avg_pool(cur)?,
            Layer::Lstm { gates, hidden } => {
                let s = tape.shape(cur).to_vec();
                let g = |g: Gate| GateVars {
                    w: vars[g.w],
                    u: vars[g.u],
                    b: vars[g.b],
                };
                let p = LstmVars {
                    input: g(gates[0]),
                    forget: g(gates[1]),
                    output: g(gates[2]),
                    candidate: g(gates[3]),
                };
                let mut h = tape.input(Tensor::zeros(&[s[0], hidden]));
                let mut c = tape.input(Tensor::zeros(&[s[0], hidden]));
                for step in 0..s[1] {
                    let xt = tape.select_step(cur, step)?;
                    (h, c) = tape.lstm_step(xt, h, c, &p)?;
                }
                h
            }
            Layer::Gru { gates, hidden } => {
                let s = tape.shape(cur).to_vec();
                let g = |g: Gate| GateVars {
                    w: vars[g.w],
                    u: vars[g.u],
                    b: vars[g.b],
                };
                let p = GruVars {
                    update: g(gates[0]),
                    reset: g(gates[1]),
                    candidate: g(gates[2]),
                };
                let mut h = tape.input(Tensor::zeros(&[s[0], hidden]));
                for step in 0..s[1] {
                    let xt = tape.select_step(cur, step)?;
                    h = tape.gru_step(xt, h, &p)?;
                }
                h
            }
            Layer::Dense { w, b, act } => {
                let y = tape.linear(cur, vars[w], Some(vars[b]))?;
                activate(tape, y, act)
            }
            Layer::Head { w, b } => {
                let y = tape.linear(cur, vars[w], Some(vars[b]))?;
                tape.policy_head(y)?
            }
        };
        tape.set_label(cur, format!("layer {i} {}", kinds[i]));
    }
    Ok(cur)
}
