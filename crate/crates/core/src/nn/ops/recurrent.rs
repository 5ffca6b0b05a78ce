//! GRU and LSTM cells.
//!
//! GRU:
//!   z = sigmoid(W_z x + U_z h + b_z)
//!   r = sigmoid(W_r x + U_r h + b_r)
//!   c = tanh(W_h x + U_h (r * h) + b_h)
//!   h' = (1 - z) * h + z * c
//!
//! LSTM (input, forget, output, candidate gates):
//!   c' = f * c + i * g,  h' = o * tanh(c')

use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Op, Tape, Var};
use crate::nn::tensor::{Element, Tensor};

/// Weights of one gate: input-to-hidden `w [hidden, input]`,
/// hidden-to-hidden `u [hidden, hidden]`, bias `b [hidden]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams<E: Element = f32> {
    pub w: Tensor<E>,
    pub u: Tensor<E>,
    pub b: Tensor<E>,
}

impl<E: Element> GateParams<E> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GateParams {
            w: Tensor::zeros(&[hidden, input]),
            u: Tensor::zeros(&[hidden, hidden]),
            b: Tensor::zeros(&[hidden]),
        }
    }

    fn sizes(&self) -> Result<(usize, usize)> {
        let (w, u, b) = (self.w.shape(), self.u.shape(), self.b.shape());
        if w.len() != 2 || u.len() != 2 || u[0] != u[1] || u[0] != w[0] || b != [w[0]] {
            return Err(EngineError::dim(
                "gate params",
                format!("w {w:?}, u {u:?}, b {b:?}"),
            ));
        }
        Ok((w[1], w[0]))
    }

    fn record(&self, tape: &mut Tape<E>) -> GateVars {
        GateVars {
            w: tape.leaf(self.w.clone()),
            u: tape.leaf(self.u.clone()),
            b: tape.leaf(self.b.clone()),
        }
    }
}

fn check_gates<E: Element>(gates: &[&GateParams<E>]) -> Result<(usize, usize)> {
    let first = gates[0].sizes()?;
    for g in &gates[1..] {
        if g.sizes()? != first {
            return Err(EngineError::dim("recurrent params", "gates disagree on sizes"));
        }
    }
    Ok(first)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<E: Element = f32> {
    pub update: GateParams<E>,
    pub reset: GateParams<E>,
    pub candidate: GateParams<E>,
}

impl<E: Element> GruParams<E> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            update: GateParams::zeros(input, hidden),
            reset: GateParams::zeros(input, hidden),
            candidate: GateParams::zeros(input, hidden),
        }
    }

    /// `(input_size, hidden_size)` after checking every gate agrees.
    pub fn sizes(&self) -> Result<(usize, usize)> {
        check_gates(&[&self.update, &self.reset, &self.candidate])
    }

    pub fn parameter_count(input: usize, hidden: usize) -> usize {
        3 * (hidden * input + hidden * hidden + hidden)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<E: Element = f32> {
    pub input: GateParams<E>,
    pub forget: GateParams<E>,
    pub output: GateParams<E>,
    pub candidate: GateParams<E>,
}

impl<E: Element> LstmParams<E> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            input: GateParams::zeros(input, hidden),
            forget: GateParams::zeros(input, hidden),
            output: GateParams::zeros(input, hidden),
            candidate: GateParams::zeros(input, hidden),
        }
    }

    pub fn sizes(&self) -> Result<(usize, usize)> {
        check_gates(&[&self.input, &self.forget, &self.output, &self.candidate])
    }

    pub fn parameter_count(input: usize, hidden: usize) -> usize {
        4 * (hidden * input + hidden * hidden + hidden)
    }
}

/// Gate weights already recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct GateVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub update: GateVars,
    pub reset: GateVars,
    pub candidate: GateVars,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub input: GateVars,
    pub forget: GateVars,
    pub output: GateVars,
    pub candidate: GateVars,
}

impl<E: Element> Tape<E> {
    /// `W x + U h + b`
    fn gate_preactivation(&mut self, x: Var, h: Var, g: &GateVars) -> Result<Var> {
        let wx = self.linear(x, g.w, Some(g.b))?;
        let uh = self.linear(h, g.u, None)?;
        self.add(wx, uh)
    }

    fn gru_blend(&mut self, z: Var, h: Var, cand: Var) -> Result<Var> {
        if self.shape(z) != self.shape(h) || self.shape(h) != self.shape(cand) {
            return Err(EngineError::dim("gru_blend", "gate shapes differ"));
        }
        let (zv, hv, cv) = (self.value(z), self.value(h), self.value(cand));
        let data = zv
            .data()
            .iter()
            .zip(hv.data())
            .zip(cv.data())
            .map(|((&z, &h), &c)| (E::one() - z) * h + z * c)
            .collect();
        let v = Tensor::new(zv.shape(), data)?;
        Ok(self.push(v, Op::GruBlend { z, h, cand }, &[z, h, cand]))
    }

    /// One GRU step on a batch: `x [N, input]`, `h [N, hidden]`.
    pub fn gru_step(&mut self, x: Var, h: Var, p: &GruVars) -> Result<Var> {
        let z = self.gate_preactivation(x, h, &p.update)?;
        let z = self.sigmoid(z);
        let r = self.gate_preactivation(x, h, &p.reset)?;
        let r = self.sigmoid(r);
        let rh = self.mul(r, h)?;
        let wx = self.linear(x, p.candidate.w, Some(p.candidate.b))?;
        let urh = self.linear(rh, p.candidate.u, None)?;
        let c = self.add(wx, urh)?;
        let c = self.tanh(c);
        self.gru_blend(z, h, c)
    }

    /// One LSTM step on a batch; returns `(h', c')`.
    pub fn lstm_step(&mut self, x: Var, h: Var, c: Var, p: &LstmVars) -> Result<(Var, Var)> {
        let i = self.gate_preactivation(x, h, &p.input)?;
        let i = self.sigmoid(i);
        let f = self.gate_preactivation(x, h, &p.forget)?;
        let f = self.sigmoid(f);
        let o = self.gate_preactivation(x, h, &p.output)?;
        let o = self.sigmoid(o);
        let g = self.gate_preactivation(x, h, &p.candidate)?;
        let g = self.tanh(g);
        let fc = self.mul(f, c)?;
        let ig = self.mul(i, g)?;
        let c_next = self.add(fc, ig)?;
        let tc = self.tanh(c_next);
        let h_next = self.mul(o, tc)?;
        Ok((h_next, c_next))
    }
}

fn as_batch<E: Element>(t: &Tensor<E>, width: usize, what: &str) -> Result<Tensor<E>> {
    match t.shape() {
        [w] if *w == width => t.clone().reshape(&[1, width]),
        [_, w] if *w == width => Ok(t.clone()),
        s => Err(EngineError::dim(
            "recurrent step",
            format!("{what} has shape {s:?}, expected [{width}] or [N, {width}]"),
        )),
    }
}

fn restore_rank<E: Element>(t: Tensor<E>, like: &Tensor<E>) -> Tensor<E> {
    if like.ndim() == 1 {
        let n = t.numel();
        t.reshape(&[n]).expect("same size")
    } else {
        t
    }
}

/// One GRU step on plain tensors. `x` is `[input]` or `[N, input]`.
pub fn gru_step<E: Element>(x: &Tensor<E>, h_prev: &Tensor<E>, p: &GruParams<E>) -> Result<Tensor<E>> {
    let (input, hidden) = p.sizes()?;
    let mut t = Tape::new();
    let xv = t.input(as_batch(x, input, "x")?);
    let hv = t.input(as_batch(h_prev, hidden, "h_prev")?);
    if t.shape(xv)[0] != t.shape(hv)[0] {
        return Err(EngineError::dim("gru_step", "batch sizes of x and h_prev differ"));
    }
    let vars = GruVars {
        update: p.update.record(&mut t),
        reset: p.reset.record(&mut t),
        candidate: p.candidate.record(&mut t),
    };
    let out = t.gru_step(xv, hv, &vars)?;
    Ok(restore_rank(t.value(out).clone(), h_prev))
}

/// One LSTM step on plain tensors; returns `(h, c)`.
pub fn lstm_step<E: Element>(
    x: &Tensor<E>,
    h_prev: &Tensor<E>,
    c_prev: &Tensor<E>,
    p: &LstmParams<E>,
) -> Result<(Tensor<E>, Tensor<E>)> {
    let (input, hidden) = p.sizes()?;
    let mut t = Tape::new();
    let xv = t.input(as_batch(x, input, "x")?);
    let hv = t.input(as_batch(h_prev, hidden, "h_prev")?);
    let cv = t.input(as_batch(c_prev, hidden, "c_prev")?);
    if t.shape(xv)[0] != t.shape(hv)[0] || t.shape(hv) != t.shape(cv) {
        return Err(EngineError::dim("lstm_step", "batch sizes differ"));
    }
    let vars = LstmVars {
        input: p.input.record(&mut t),
        forget: p.forget.record(&mut t),
        output: p.output.record(&mut t),
        candidate: p.candidate.record(&mut t),
    };
    let (h, c) = t.lstm_step(xv, hv, cv, &vars)?;
    Ok((
        restore_rank(t.value(h).clone(), h_prev),
        restore_rank(t.value(c).clone(), c_prev),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec1(v: &[f32]) -> Tensor<f32> {
        Tensor::new(&[v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn zero_gru_halves_hidden_state_exactly() {
        let p = GruParams::<f32>::zeros(3, 4);
        let x = vec1(&[0.3, -2.0, 7.5]);
        let v = vec1(&[1.0, -0.7, 3.3e-3, 123.456]);
        let h = gru_step(&x, &v, &p).unwrap();
        for (a, b) in h.data().iter().zip(v.data()) {
            assert_eq!(a.to_bits(), (0.5 * b).to_bits());
        }
    }

    #[test]
    fn zero_input_zero_state_stays_zero() {
        let mut p = GruParams::<f32>::zeros(2, 2);
        p.update.w = Tensor::from_fn(&[2, 2], |i| i as f32 + 1.0);
        p.candidate.u = Tensor::from_fn(&[2, 2], |i| -(i as f32));
        let h = gru_step(&vec1(&[0.0, 0.0]), &vec1(&[0.0, 0.0]), &p).unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
    }

    #[test]
    fn scalar_gru_matches_hand_evaluation() {
        let mut p = GruParams::<f64>::zeros(1, 1);
        for g in [&mut p.update, &mut p.reset, &mut p.candidate] {
            g.w = Tensor::ones(&[1, 1]);
            g.u = Tensor::ones(&[1, 1]);
        }
        let one = Tensor::<f64>::ones(&[1]);
        let h = gru_step(&one, &one, &p).unwrap();
        // z = r = sigmoid(2); c = tanh(1 + r); h = (1 - z) + z * c
        let s2 = 1.0 / (1.0 + (-2.0f64).exp());
        let c = (1.0 + s2).tanh();
        let want = (1.0 - s2) + s2 * c;
        assert!((h.item() - want).abs() < 1e-6);
        assert!((h.item() - 0.959_979_2).abs() < 1e-6);
    }

    #[test]
    fn zero_lstm_cases() {
        let p = LstmParams::<f32>::zeros(2, 3);
        let x = vec1(&[1.0, -1.0]);
        let z = vec1(&[0.0, 0.0, 0.0]);
        let (h, c) = lstm_step(&x, &z, &z, &p).unwrap();
        assert_eq!(h.data(), z.data());
        assert_eq!(c.data(), z.data());

        let v = vec1(&[2.0, -0.5, 0.1]);
        let (h, c) = lstm_step(&x, &z, &v, &p).unwrap();
        for i in 0..3 {
            assert_eq!(c.data()[i], 0.5 * v.data()[i]);
            assert!((h.data()[i] - 0.5 * (0.5 * v.data()[i]).tanh()).abs() < 1e-7);
        }
    }

    #[test]
    fn scalar_lstm_matches_hand_evaluation() {
        let mut p = LstmParams::<f64>::zeros(1, 1);
        for g in [&mut p.input, &mut p.forget, &mut p.output, &mut p.candidate] {
            g.w = Tensor::ones(&[1, 1]);
            g.u = Tensor::ones(&[1, 1]);
            g.b = Tensor::ones(&[1]);
        }
        let x = Tensor::<f64>::ones(&[1]);
        let z = Tensor::<f64>::zeros(&[1]);
        let (h, c) = lstm_step(&x, &z, &z, &p).unwrap();
        // every gate pre-activation is 1 + 0 + 1 = 2
        let s = 1.0 / (1.0 + (-2.0f64).exp());
        let want_c = s * 2.0f64.tanh();
        let want_h = s * want_c.tanh();
        assert!((c.item() - want_c).abs() < 1e-6);
        assert!((h.item() - want_h).abs() < 1e-6);
        assert!((c.item() - 0.849_112_7).abs() < 1e-6);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut p = GruParams::<f32>::zeros(3, 4);
        assert!(gru_step(&vec1(&[0.0; 2]), &vec1(&[0.0; 4]), &p).is_err());
        assert!(gru_step(&vec1(&[0.0; 3]), &vec1(&[0.0; 5]), &p).is_err());
        p.reset.u = Tensor::zeros(&[4, 3]);
        assert!(p.sizes().is_err());
        let l = LstmParams::<f32>::zeros(3, 4);
        let h = vec1(&[0.0; 4]);
        assert!(lstm_step(&vec1(&[0.0; 3]), &h, &vec1(&[0.0; 3]), &l).is_err());
    }

    #[test]
    fn gru_cell_is_three_quarters_of_lstm() {
        for (i, h) in [(1, 1), (3, 4), (3072, 128)] {
            let g = GruParams::<f32>::parameter_count(i, h);
            let l = LstmParams::<f32>::parameter_count(i, h);
            assert_eq!(4 * g, 3 * l);
            assert!(l > g);
        }
    }
}
