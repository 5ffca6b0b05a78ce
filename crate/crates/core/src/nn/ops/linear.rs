use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Op, Tape, Var};
use crate::nn::tensor::{Element, Tensor};

impl<E: Element> Tape<E> {
    /// Fully connected layer: `x [N, in] -> x * w^T + b`, `w [out, in]`, `b [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(EngineError::dim("linear", format!("input {xs:?}, weight {ws:?}")));
        }
        let (n, fin, fout) = (xs[0], xs[1], ws[0]);
        if let Some(b) = b {
            if self.shape(b) != [fout] {
                return Err(EngineError::dim(
                    "linear",
                    format!("bias {:?} for {fout} outputs", self.shape(b)),
                ));
            }
        }
        let mut out = match b {
            Some(b) => {
                let bias = self.value(b).data();
                (0..n).flat_map(|_| bias.iter().copied()).collect()
            }
            None => vec![E::zero(); n * fout],
        };
        E::gemm(
            n,
            fin,
            fout,
            E::one(),
            self.value(x).data(),
            fin as isize,
            1,
            self.value(w).data(),
            1,
            fin as isize,
            E::one(),
            &mut out,
            fout as isize,
            1,
        );
        let v = Tensor::new(&[n, fout], out)?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(v, Op::Linear { x, w, b }, &inputs))
    }
}
