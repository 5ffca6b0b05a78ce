//! Straightforward loop implementations kept apart from the optimized
//! kernels so tests can compare the two.

/// Seven nested loops over `x [N,C,T,H,W]`, `k [F,C,kT,kH,kW]`.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv3d(
    x: &[f64],
    xs: [usize; 5],
    k: &[f64],
    ks: [usize; 5],
    bias: &[f64],
    stride: [usize; 3],
    pad: [usize; 3],
) -> (Vec<f64>, [usize; 5]) {
    let [n, c, t, h, w] = xs;
    let [f, kc, kt, kh, kw] = ks;
    assert_eq!(c, kc);
    let ot = (t + 2 * pad[0] - kt) / stride[0] + 1;
    let oh = (h + 2 * pad[1] - kh) / stride[1] + 1;
    let ow = (w + 2 * pad[2] - kw) / stride[2] + 1;
    let mut out = vec![0.0; n * f * ot * oh * ow];
    for b in 0..n {
        for o in 0..f {
            for z in 0..ot {
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut acc = bias.get(o).copied().unwrap_or(0.0);
                        for ci in 0..c {
                            for a in 0..kt {
                                for bb in 0..kh {
                                    for e in 0..kw {
                                        let zi = (z * stride[0] + a) as isize - pad[0] as isize;
                                        let yi = (y * stride[1] + bb) as isize - pad[1] as isize;
                                        let xi = (xo * stride[2] + e) as isize - pad[2] as isize;
                                        if zi < 0
                                            || yi < 0
                                            || xi < 0
                                            || zi >= t as isize
                                            || yi >= h as isize
                                            || xi >= w as isize
                                        {
                                            continue;
                                        }
                                        let xv = x[(((b * c + ci) * t + zi as usize) * h
                                            + yi as usize)
                                            * w
                                            + xi as usize];
                                        let kv = k[(((o * c + ci) * kt + a) * kh + bb) * kw + e];
                                        acc += xv * kv;
                                    }
                                }
                            }
                        }
                        out[(((b * f + o) * ot + z) * oh + y) * ow + xo] = acc;
                    }
                }
            }
        }
    }
    (out, [n, f, ot, oh, ow])
}

/// Nested loops over `x [N,C,H,W]`, `k [F,C,kH,kW]`.
pub fn naive_conv2d(
    x: &[f64],
    xs: [usize; 4],
    k: &[f64],
    ks: [usize; 4],
    bias: &[f64],
    stride: [usize; 2],
    pad: [usize; 2],
) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, w] = xs;
    let [f, kc, kh, kw] = ks;
    assert_eq!(c, kc);
    let oh = (h + 2 * pad[0] - kh) / stride[0] + 1;
    let ow = (w + 2 * pad[1] - kw) / stride[1] + 1;
    let mut out = vec![0.0; n * f * oh * ow];
    for b in 0..n {
        for o in 0..f {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = bias.get(o).copied().unwrap_or(0.0);
                    for ci in 0..c {
                        for bb in 0..kh {
                            for e in 0..kw {
                                let yi = (y * stride[0] + bb) as isize - pad[0] as isize;
                                let xi = (xo * stride[1] + e) as isize - pad[1] as isize;
                                if yi < 0 || xi < 0 || yi >= h as isize || xi >= w as isize {
                                    continue;
                                }
                                acc += x[((b * c + ci) * h + yi as usize) * w + xi as usize]
                                    * k[((o * c + ci) * kh + bb) * kw + e];
                            }
                        }
                    }
                    out[((b * f + o) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    (out, [n, f, oh, ow])
}
