use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Op, Tape, Var};
use crate::nn::tensor::{numel, Element, Tensor};

impl<E: Element> Tape<E> {
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.value(x).numel() {
            return Err(EngineError::dim(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(x)),
            ));
        }
        let v = Tensor::new(shape, self.value(x).data().to_vec())?;
        Ok(self.push(v, Op::Reshape(x), &[x]))
    }

    /// Reorders axes; `axes[i]` names the source axis of output axis `i`.
    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let v = self.value(x).permute(axes)?;
        Ok(self.push(
            v,
            Op::Permute {
                x,
                axes: axes.to_vec(),
            },
            &[x],
        ))
    }

    /// Collapses every axis after the first.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        let n = s[0];
        let rest = numel(&s[1..]);
        self.reshape(x, &[n, rest])
    }

    /// Picks time step `t` out of a `[N, T, F]` sequence.
    pub fn select_step(&mut self, x: Var, t: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || t >= s[1] {
            return Err(EngineError::dim("select_step", format!("step {t} of {s:?}")));
        }
        let (steps, f) = (s[1], s[2]);
        let data: Vec<E> = self
            .value(x)
            .data()
            .chunks(steps * f)
            .flat_map(|row| row[t * f..(t + 1) * f].iter().copied())
            .collect();
        let v = Tensor::new(&[s[0], f], data)?;
        Ok(self.push(v, Op::SelectStep { x, t }, &[x]))
    }

    /// Mean over every axis after the channel axis: `[N, C, ...] -> [N, C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 3 {
            return Err(EngineError::dim("global_avg_pool", format!("{s:?}")));
        }
        let inner = numel(&s[2..]);
        let scale = E::one() / E::from_f64(inner as f64);
        let data = self
            .value(x)
            .data()
            .chunks(inner)
            .map(|p| p.iter().copied().sum::<E>() * scale)
            .collect();
        let v = Tensor::new(&[s[0], s[1]], data)?;
        Ok(self.push(v, Op::GlobalAvgPool(x), &[x]))
    }
}
