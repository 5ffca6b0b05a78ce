//! Central finite-difference gradient checking.

use super::error::Result;
use super::tape::{Tape, Var};
use super::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// max over every checked scalar of
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`
    pub max_relative_error: f64,
    /// `(input index, element index)` of the worst entry
    pub worst: (usize, usize),
    pub checked: usize,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the tape gradient of the scalar built by `f` against central
/// differences with the given `step`, for every element of every input.
pub fn grad_check<F>(inputs: &[Tensor<f64>], step: f64, tol: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut t = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| t.input(v.clone())).collect();
        let out = f(&mut t, &vars)?;
        Ok(t.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|v| tape.leaf(v.clone().with_requires_grad(true)))
        .collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: (0, 0),
        checked: 0,
        passed: true,
    };
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let zeros = vec![0.0; inputs[i].numel()];
        let analytic = tape.grad(*v).unwrap_or(&zeros).to_vec();
        for j in 0..inputs[i].numel() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + step;
            let plus = eval(&probe)?;
            probe[i].data_mut()[j] = orig - step;
            let minus = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic[j], numeric);
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = (i, j);
            }
            report.checked += 1;
        }
    }
    report.passed = report.max_relative_error < tol;
    Ok(report)
}
