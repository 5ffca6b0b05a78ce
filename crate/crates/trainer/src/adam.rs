use macpilot_core::nn::Tensor;

use crate::TrainConfig;

/// Adam moments for a list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(sizes: impl IntoIterator<Item = usize>, cfg: &TrainConfig) -> Adam {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update. `grads[i]` is `None` for parameters the
/// backward pass did not reach; those and their moments are left alone.
pub fn adam_step(params: &mut [&mut Tensor<f32>], grads: &[Option<&[f32]>], opt: &mut Adam) {
    assert_eq!(params.len(), grads.len());
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    let (b1, b2) = (opt.beta1 as f32, opt.beta2 as f32);
    let step = (opt.lr / c1) as f32;
    let c2 = c2 as f32;
    let eps = opt.epsilon as f32;
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let Some(g) = g else { continue };
        let (m, v) = (&mut opt.m[i], &mut opt.v[i]);
        for (((w, &g), m), v) in p.data_mut().iter_mut().zip(*g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *w -= step * *m / ((*v / c2).sqrt() + eps);
        }
    }
}
