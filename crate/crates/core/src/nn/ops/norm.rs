//! Batch normalization over the channel axis (axis 1).

use serde::{Deserialize, Serialize};

use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Op, Tape, Var};
use crate::nn::tensor::{Element, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    Training,
    Inference,
}

/// Running statistics and constants of one batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormStats<E: Element = f32> {
    pub running_mean: Vec<E>,
    pub running_var: Vec<E>,
    pub epsilon: E,
    pub momentum: E,
    pub mode: NormMode,
}

impl<E: Element> BatchNormStats<E> {
    pub fn new(channels: usize) -> Self {
        BatchNormStats {
            running_mean: vec![E::zero(); channels],
            running_var: vec![E::one(); channels],
            epsilon: E::from_f64(DEFAULT_EPSILON),
            momentum: E::from_f64(DEFAULT_MOMENTUM),
            mode: NormMode::Training,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

/// Learnable scale/shift plus running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<E: Element = f32> {
    pub gamma: Tensor<E>,
    pub beta: Tensor<E>,
    pub stats: BatchNormStats<E>,
}

impl<E: Element> BatchNormState<E> {
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            gamma: Tensor::ones(&[channels]),
            beta: Tensor::zeros(&[channels]),
            stats: BatchNormStats::new(channels),
        }
    }
}

pub(crate) struct Saved<E> {
    xhat: Vec<E>,
    inv_std: Vec<E>,
    training: bool,
}

fn layout(shape: &[usize]) -> (usize, usize, usize) {
    (shape[0], shape[1], shape[2..].iter().product())
}

fn normalize<E: Element>(
    x: &[E],
    shape: &[usize],
    gamma: &[E],
    beta: &[E],
    stats: &mut BatchNormStats<E>,
) -> (Vec<E>, Saved<E>) {
    let (n, c, inner) = layout(shape);
    let count = (n * inner) as f64;
    let training = stats.mode == NormMode::Training;
    let mut mean = vec![E::zero(); c];
    let mut var = vec![E::zero(); c];
    if training {
        for ch in 0..c {
            let planes = || (0..n).map(move |i| (i * c + ch) * inner);
            let s: f64 = planes()
                .flat_map(|o| x[o..o + inner].iter())
                .map(|v| v.as_f64())
                .sum();
            let m = s / count;
            let v: f64 = planes()
                .flat_map(|o| x[o..o + inner].iter())
                .map(|v| (v.as_f64() - m).powi(2))
                .sum::<f64>()
                / count;
            mean[ch] = E::from_f64(m);
            var[ch] = E::from_f64(v);
        }
        let mo = stats.momentum;
        for ch in 0..c {
            stats.running_mean[ch] = (E::one() - mo) * stats.running_mean[ch] + mo * mean[ch];
            stats.running_var[ch] = (E::one() - mo) * stats.running_var[ch] + mo * var[ch];
        }
    } else {
        mean.copy_from_slice(&stats.running_mean);
        var.copy_from_slice(&stats.running_var);
    }
    let inv_std: Vec<E> = var
        .iter()
        .map(|&v| E::one() / (v + stats.epsilon).sqrt())
        .collect();
    let mut xhat = vec![E::zero(); x.len()];
    let mut y = vec![E::zero(); x.len()];
    for i in 0..n {
        for ch in 0..c {
            let o = (i * c + ch) * inner;
            for j in o..o + inner {
                let h = (x[j] - mean[ch]) * inv_std[ch];
                xhat[j] = h;
                y[j] = gamma[ch] * h + beta[ch];
            }
        }
    }
    (
        y,
        Saved {
            xhat,
            inv_std,
            training,
        },
    )
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn backward<E: Element>(
    shape: &[usize],
    gamma: &[E],
    saved: &Saved<E>,
    dy: &[E],
) -> (Vec<E>, Vec<E>, Vec<E>) {
    let (n, c, inner) = layout(shape);
    let m = E::from_f64((n * inner) as f64);
    let mut dgamma = vec![E::zero(); c];
    let mut dbeta = vec![E::zero(); c];
    for i in 0..n {
        for ch in 0..c {
            let o = (i * c + ch) * inner;
            for j in o..o + inner {
                dgamma[ch] = dgamma[ch] + dy[j] * saved.xhat[j];
                dbeta[ch] = dbeta[ch] + dy[j];
            }
        }
    }
    let mut dx = vec![E::zero(); dy.len()];
    for i in 0..n {
        for ch in 0..c {
            let o = (i * c + ch) * inner;
            let k = gamma[ch] * saved.inv_std[ch];
            for j in o..o + inner {
                dx[j] = if saved.training {
                    // sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
                    k * (dy[j] - (dbeta[ch] + saved.xhat[j] * dgamma[ch]) / m)
                } else {
                    k * dy[j]
                };
            }
        }
    }
    (dx, dgamma, dbeta)
}

impl<E: Element> Tape<E> {
    /// `y = gamma * (x - mu) / sqrt(var + eps) + beta` per channel of
    /// `x [N, C, ...]`. Training mode uses biased mini-batch statistics and
    /// updates the running estimates in `stats`.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &mut BatchNormStats<E>,
    ) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(EngineError::dim("batch_norm", format!("{shape:?}")));
        }
        let c = shape[1];
        if self.shape(gamma) != [c] || self.shape(beta) != [c] || stats.channels() != c {
            return Err(EngineError::dim(
                "batch_norm",
                format!(
                    "{c} channels, gamma {:?}, beta {:?}, stats {}",
                    self.shape(gamma),
                    self.shape(beta),
                    stats.channels()
                ),
            ));
        }
        if stats.mode == NormMode::Training && shape[0] < 2 {
            return Err(EngineError::DegenerateBatch(shape[0]));
        }
        let (y, saved) = normalize(
            self.value(x).data(),
            &shape,
            self.value(gamma).data(),
            self.value(beta).data(),
            stats,
        );
        let v = Tensor::new(&shape, y)?;
        Ok(self.push(
            v,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                saved,
            },
            &[x, gamma, beta],
        ))
    }
}

/// Tensor-level batch normalization.
pub fn batchnorm_forward<E: Element>(x: &Tensor<E>, s: &mut BatchNormState<E>) -> Result<Tensor<E>> {
    let mut t = Tape::new();
    let xv = t.input(x.clone());
    let g = t.input(s.gamma.clone());
    let b = t.input(s.beta.clone());
    let y = t.batch_norm(xv, g, b, &mut s.stats)?;
    Ok(t.nodes.swap_remove(y.0).value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_batch_normalizes_to_zero() {
        let x = Tensor::<f32>::full(&[4, 3], 2.5);
        let mut s = BatchNormState::new(3);
        let y = batchnorm_forward(&x, &mut s).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_three_batch() {
        let x = Tensor::<f64>::new(&[2, 1], vec![1.0, 3.0]).unwrap();
        let mut s = BatchNormState::new(1);
        s.stats.epsilon = 1e-300;
        let y = batchnorm_forward(&x, &mut s).unwrap();
        assert_eq!(y.data(), &[-1.0, 1.0]);
        let x = Tensor::<f32>::new(&[2, 1], vec![1.0, 3.0]).unwrap();
        let mut s = BatchNormState::new(1);
        let y = batchnorm_forward(&x, &mut s).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-4 && (y.data()[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_gamma_gives_beta() {
        let x = Tensor::<f32>::from_fn(&[3, 2, 4], |i| (i as f32).sin() * 4.0);
        let mut s = BatchNormState::new(2);
        s.gamma = Tensor::zeros(&[2]);
        s.beta = Tensor::new(&[2], vec![0.25, -1.5]).unwrap();
        let y = batchnorm_forward(&x, &mut s).unwrap();
        for (i, &v) in y.data().iter().enumerate() {
            let ch = (i / 4) % 2;
            assert_eq!(v, s.beta.data()[ch]);
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let x = Tensor::<f64>::new(&[2, 1], vec![1.0, 3.0]).unwrap();
        let mut s = BatchNormState::new(1);
        batchnorm_forward(&x, &mut s).unwrap();
        assert!((s.stats.running_mean[0] - 0.2).abs() < 1e-12);
        assert!((s.stats.running_var[0] - (0.9 + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn inference_uses_running_stats_and_leaves_them() {
        let x = Tensor::<f32>::new(&[1, 2], vec![3.0, -1.0]).unwrap();
        let mut s = BatchNormState::new(2);
        s.stats.running_mean = vec![1.0, 1.0];
        s.stats.running_var = vec![4.0, 4.0];
        s.stats.mode = NormMode::Inference;
        let before = s.stats.clone();
        let y = batchnorm_forward(&x, &mut s).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-5);
        assert!((y.data()[1] + 1.0).abs() < 1e-5);
        assert_eq!(s.stats, before);
    }

    #[test]
    fn single_sample_training_is_degenerate() {
        let x = Tensor::<f32>::zeros(&[1, 2, 3]);
        let mut s = BatchNormState::new(2);
        assert_eq!(batchnorm_forward(&x, &mut s), Err(EngineError::DegenerateBatch(1)));
    }
}
