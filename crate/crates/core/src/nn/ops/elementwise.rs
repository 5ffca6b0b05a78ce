use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Op, Tape, Var};
use crate::nn::tensor::{Element, Tensor};

fn same_shape<E: Element>(tape: &Tape<E>, op: &'static str, a: Var, b: Var) -> Result<()> {
    if tape.shape(a) != tape.shape(b) {
        return Err(EngineError::dim(
            op,
            format!("{:?} vs {:?}", tape.shape(a), tape.shape(b)),
        ));
    }
    Ok(())
}

fn zip_map<E: Element>(tape: &Tape<E>, a: Var, b: Var, f: impl Fn(E, E) -> E) -> Tensor<E> {
    let av = tape.value(a);
    let data = av
        .data()
        .iter()
        .zip(tape.value(b).data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(av.shape(), data).expect("shape preserved")
}

pub(crate) fn sigmoid<E: Element>(x: E) -> E {
    E::one() / (E::one() + (-x).exp())
}

pub fn leaky_relu_scalar<E: Element>(x: E, alpha: E) -> E {
    if x >= E::zero() {
        x
    } else {
        alpha * x
    }
}

impl<E: Element> Tape<E> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "add", a, b)?;
        let v = zip_map(self, a, b, |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "sub", a, b)?;
        let v = zip_map(self, a, b, |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "mul", a, b)?;
        let v = zip_map(self, a, b, |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: E) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a), &[a])
    }

    /// `x` where `x >= 0`, `alpha * x` otherwise. `alpha = 0` is ReLU.
    pub fn leaky_relu(&mut self, a: Var, alpha: E) -> Var {
        let v = self.value(a).map(|x| leaky_relu_scalar(x, alpha));
        self.push(v, Op::LeakyRelu(a, alpha), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, E::zero())
    }
}

/// Tensor-level LeakyReLU.
pub fn leaky_relu<E: Element>(x: &Tensor<E>, alpha: E) -> Tensor<E> {
    x.map(|v| leaky_relu_scalar(v, alpha))
}
