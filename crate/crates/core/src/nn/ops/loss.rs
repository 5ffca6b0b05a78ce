use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Op, Tape, Var};
use crate::nn::tensor::{Element, Tensor};

use super::elementwise::sigmoid;

impl<E: Element> Tape<E> {
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum::<E>();
        self.push(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().copied().sum::<E>() / E::from_f64(v.numel() as f64);
        self.push(Tensor::scalar(s), Op::Mean(x), &[x])
    }

    /// Mean squared error over every element.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(EngineError::dim(
                "mse_loss",
                format!("{:?} vs {:?}", self.shape(pred), self.shape(target)),
            ));
        }
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let n = E::from_f64(p.len() as f64);
        let s = p
            .iter()
            .zip(t)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<E>()
            / n;
        Ok(self.push(Tensor::scalar(s), Op::Mse { pred, target }, &[pred, target]))
    }

    /// Squashes `[N, 2]` raw outputs into a steering (tanh) and throttle
    /// (sigmoid) command.
    pub fn policy_head(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || s[1] != 2 {
            return Err(EngineError::dim("policy_head", format!("{s:?}")));
        }
        let mut v = self.value(x).clone();
        for row in v.data_mut().chunks_mut(2) {
            row[0] = row[0].tanh();
            row[1] = sigmoid(row[1]);
        }
        Ok(self.push(v, Op::PolicyHead(x), &[x]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mse(pred: &[f32], target: &[f32]) -> f32 {
        let mut t = Tape::<f32>::new();
        let n = pred.len() / 2;
        let p = t.input(Tensor::new(&[n, 2], pred.to_vec()).unwrap());
        let q = t.input(Tensor::new(&[n, 2], target.to_vec()).unwrap());
        let l = t.mse_loss(p, q).unwrap();
        t.value(l).item()
    }

    #[test]
    fn mse_edge_values() {
        let a = [0.3, -0.2, 0.9, 0.1];
        assert_eq!(mse(&a, &a), 0.0);
        let b: Vec<f32> = a.iter().map(|v| v + 1.0).collect();
        assert!((mse(&b, &a) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mse_matches_scalar_loop() {
        let pred: Vec<f32> = (0..40).map(|i| ((i * 7919) % 101) as f32 / 50.0 - 1.0).collect();
        let target: Vec<f32> = (0..40).map(|i| ((i * 104729) % 97) as f32 / 48.0 - 1.0).collect();
        let mut acc = 0.0f64;
        for (p, t) in pred.iter().zip(&target) {
            acc += ((p - t) as f64).powi(2);
        }
        let want = acc / 40.0;
        assert!((mse(&pred, &target) as f64 - want).abs() < 1e-6);
    }

    #[test]
    fn policy_head_zero_input() {
        let mut t = Tape::<f32>::new();
        let x = t.input(Tensor::zeros(&[1, 2]));
        let y = t.policy_head(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 0.5]);
    }
}
