use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Tape, Var};
use crate::nn::tensor::{Element, Tensor};

impl<E: Element> Tape<E> {
    /// `y = F(x) + x`. The branch must preserve the shape of `x`.
    pub fn residual(
        &mut self,
        x: Var,
        branch: impl FnOnce(&mut Self, Var) -> Result<Var>,
    ) -> Result<Var> {
        let fx = branch(self, x)?;
        if self.shape(fx) != self.shape(x) {
            return Err(EngineError::dim(
                "residual",
                format!(
                    "branch output {:?} differs from input {:?} and no projection is configured",
                    self.shape(fx),
                    self.shape(x)
                ),
            ));
        }
        self.add(fx, x)
    }

    /// `y = F(x) + P(x)` where `P` projects the shortcut to the branch shape.
    pub fn residual_projected(
        &mut self,
        x: Var,
        branch: impl FnOnce(&mut Self, Var) -> Result<Var>,
        projection: impl FnOnce(&mut Self, Var) -> Result<Var>,
    ) -> Result<Var> {
        let fx = branch(self, x)?;
        let px = projection(self, x)?;
        self.add(fx, px)
    }
}

/// Tensor-level residual block; `branch` records `F` on a scratch tape.
pub fn residual_block_forward<E: Element>(
    x: &Tensor<E>,
    branch: impl FnOnce(&mut Tape<E>, Var) -> Result<Var>,
) -> Result<Tensor<E>> {
    let mut t = Tape::new();
    let xv = t.input(x.clone());
    let y = t.residual(xv, branch)?;
    Ok(t.value(y).clone())
}
