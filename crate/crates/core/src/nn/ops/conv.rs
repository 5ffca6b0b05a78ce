//! 2D and 3D cross-correlation via im2col + GEMM.
//!
//! A 2D convolution runs through the same kernels as a 3D one with a
//! singleton depth axis.

use crate::nn::error::{EngineError, Result};
use crate::nn::tape::{Op, Tape, Var};
use crate::nn::tensor::{Element, Tensor};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub(crate) rank: usize,
    pub(crate) batch: usize,
    pub(crate) channels: usize,
    pub(crate) filters: usize,
    pub(crate) input: [usize; 3],
    pub(crate) kernel: [usize; 3],
    pub(crate) stride: [usize; 3],
    pub(crate) padding: [usize; 3],
    pub(crate) output: [usize; 3],
}

impl ConvGeom {
    fn new(
        op: &'static str,
        rank: usize,
        x_shape: &[usize],
        k_shape: &[usize],
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Self> {
        let nd = rank + 2;
        if x_shape.len() != nd || k_shape.len() != nd {
            return Err(EngineError::dim(
                op,
                format!("input {x_shape:?} and kernel {k_shape:?} must both have rank {nd}"),
            ));
        }
        if x_shape[1] != k_shape[1] {
            return Err(EngineError::dim(
                op,
                format!("input has {} channels, kernel expects {}", x_shape[1], k_shape[1]),
            ));
        }
        if stride.contains(&0) {
            return Err(EngineError::dim(op, "stride must be >= 1"));
        }
        let lift = |s: &[usize]| -> [usize; 3] {
            if rank == 2 {
                [1, s[2], s[3]]
            } else {
                [s[2], s[3], s[4]]
            }
        };
        let input = lift(x_shape);
        let kernel = lift(k_shape);
        let mut output = [0; 3];
        for a in 0..3 {
            let span = input[a] + 2 * padding[a];
            if kernel[a] > span {
                return Err(EngineError::dim(
                    op,
                    format!("kernel {:?} larger than padded input {:?}", kernel, input),
                ));
            }
            output[a] = (span - kernel[a]) / stride[a] + 1;
        }
        Ok(ConvGeom {
            rank,
            batch: x_shape[0],
            channels: x_shape[1],
            filters: k_shape[0],
            input,
            kernel,
            stride,
            padding,
            output,
        })
    }

    pub(crate) fn out_positions(&self) -> usize {
        self.output.iter().product()
    }

    fn in_positions(&self) -> usize {
        self.input.iter().product()
    }

    fn col_rows(&self) -> usize {
        self.channels * self.kernel.iter().product::<usize>()
    }

    fn out_shape(&self) -> Vec<usize> {
        let mut s = vec![self.batch, self.filters];
        if self.rank == 2 {
            s.extend_from_slice(&self.output[1..]);
        } else {
            s.extend_from_slice(&self.output);
        }
        s
    }
}

/// Visits `(col_index, input_index)` pairs for every in-bounds tap.
fn for_each_tap(g: &ConvGeom, mut f: impl FnMut(usize, usize)) {
    let [id, ih, iw] = g.input;
    let [kd, kh, kw] = g.kernel;
    let [od, oh, ow] = g.output;
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.padding;
    let p = g.out_positions();
    let mut row = 0;
    for c in 0..g.channels {
        for a in 0..kd {
            for b in 0..kh {
                for e in 0..kw {
                    let base = row * p;
                    for z in 0..od {
                        let zi = (z * sd + a) as isize - pd as isize;
                        if zi < 0 || zi >= id as isize {
                            continue;
                        }
                        for y in 0..oh {
                            let yi = (y * sh + b) as isize - ph as isize;
                            if yi < 0 || yi >= ih as isize {
                                continue;
                            }
                            let in_row = ((c * id + zi as usize) * ih + yi as usize) * iw;
                            let col_row = base + (z * oh + y) * ow;
                            for x in 0..ow {
                                let xi = (x * sw + e) as isize - pw as isize;
                                if xi < 0 || xi >= iw as isize {
                                    continue;
                                }
                                f(col_row + x, in_row + xi as usize);
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn im2col<E: Element>(g: &ConvGeom, x: &[E], col: &mut [E]) {
    col.iter_mut().for_each(|v| *v = E::zero());
    for_each_tap(g, |ci, xi| col[ci] = x[xi]);
}

fn col2im<E: Element>(g: &ConvGeom, col: &[E], dx: &mut [E]) {
    for_each_tap(g, |ci, xi| dx[xi] = dx[xi] + col[ci]);
}

pub(crate) fn forward<E: Element>(g: &ConvGeom, x: &[E], k: &[E], bias: Option<&[E]>) -> Vec<E> {
    let p = g.out_positions();
    let rows = g.col_rows();
    let sample_in = g.channels * g.in_positions();
    let sample_out = g.filters * p;
    let mut out = vec![E::zero(); g.batch * sample_out];
    let mut col = vec![E::zero(); rows * p];
    for n in 0..g.batch {
        im2col(g, &x[n * sample_in..(n + 1) * sample_in], &mut col);
        let dst = &mut out[n * sample_out..(n + 1) * sample_out];
        if let Some(b) = bias {
            for (plane, &bv) in dst.chunks_mut(p).zip(b) {
                plane.iter_mut().for_each(|v| *v = bv);
            }
        }
        E::gemm(
            g.filters, rows, p, E::one(), k, rows as isize, 1, &col, p as isize, 1, E::one(), dst,
            p as isize, 1,
        );
    }
    out
}

pub(crate) fn backward<E: Element>(
    g: &ConvGeom,
    x: &[E],
    k: &[E],
    dout: &[E],
    mut dx: Option<&mut [E]>,
    mut dk: Option<&mut [E]>,
) {
    let p = g.out_positions();
    let rows = g.col_rows();
    let sample_in = g.channels * g.in_positions();
    let sample_out = g.filters * p;
    let mut col = vec![E::zero(); rows * p];
    let mut dcol = vec![E::zero(); rows * p];
    for n in 0..g.batch {
        let dy = &dout[n * sample_out..(n + 1) * sample_out];
        if let Some(dk) = dk.as_deref_mut() {
            im2col(g, &x[n * sample_in..(n + 1) * sample_in], &mut col);
            // dk[F, rows] += dy[F, P] * col^T[P, rows]
            E::gemm(
                g.filters, p, rows, E::one(), dy, p as isize, 1, &col, 1, p as isize, E::one(), dk,
                rows as isize, 1,
            );
        }
        if let Some(dx) = dx.as_deref_mut() {
            // dcol[rows, P] = k^T[rows, F] * dy[F, P]
            E::gemm(
                rows, g.filters, p, E::one(), k, 1, rows as isize, dy, p as isize, 1, E::zero(),
                &mut dcol, p as isize, 1,
            );
            col2im(g, &dcol, &mut dx[n * sample_in..(n + 1) * sample_in]);
        }
    }
}

impl<E: Element> Tape<E> {
    fn conv(
        &mut self,
        op: &'static str,
        rank: usize,
        x: Var,
        k: Var,
        b: Option<Var>,
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Var> {
        let geom = ConvGeom::new(op, rank, self.shape(x), self.shape(k), stride, padding)?;
        if let Some(b) = b {
            if self.shape(b) != [geom.filters] {
                return Err(EngineError::dim(
                    op,
                    format!("bias {:?} for {} filters", self.shape(b), geom.filters),
                ));
            }
        }
        if !self.value(x).is_finite() {
            return Err(EngineError::NonFinite { op });
        }
        let data = forward(
            &geom,
            self.value(x).data(),
            self.value(k).data(),
            b.map(|b| self.value(b).data()),
        );
        let v = Tensor::new(&geom.out_shape(), data)?;
        let mut inputs = vec![x, k];
        inputs.extend(b);
        Ok(self.push(v, Op::Conv { x, k, b, geom }, &inputs))
    }

    /// `x [N, C, T, H, W]`, `k [F, C, kT, kH, kW]`, `b [F]`.
    pub fn conv3d(
        &mut self,
        x: Var,
        k: Var,
        b: Option<Var>,
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Var> {
        self.conv("conv3d", 3, x, k, b, stride, padding)
    }

    /// `x [N, C, H, W]`, `k [F, C, kH, kW]`, `b [F]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        k: Var,
        b: Option<Var>,
        stride: [usize; 2],
        padding: [usize; 2],
    ) -> Result<Var> {
        self.conv(
            "conv2d",
            2,
            x,
            k,
            b,
            [1, stride[0], stride[1]],
            [0, padding[0], padding[1]],
        )
    }
}

/// Tensor-level 3D cross-correlation.
pub fn conv3d_forward<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    stride: [usize; 3],
    padding: [usize; 3],
) -> Result<Tensor<E>> {
    let mut t = Tape::new();
    let (x, k) = (t.input(input.clone()), t.input(kernel.clone()));
    let b = bias.map(|b| t.input(b.clone()));
    let y = t.conv3d(x, k, b, stride, padding)?;
    Ok(t.nodes.swap_remove(y.0).value)
}

/// Tensor-level 2D cross-correlation.
pub fn conv2d_forward<E: Element>(
    input: &Tensor<E>,
    kernel: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    stride: [usize; 2],
    padding: [usize; 2],
) -> Result<Tensor<E>> {
    let mut t = Tape::new();
    let (x, k) = (t.input(input.clone()), t.input(kernel.clone()));
    let b = bias.map(|b| t.input(b.clone()));
    let y = t.conv2d(x, k, b, stride, padding)?;
    Ok(t.nodes.swap_remove(y.0).value)
}
