use macpilot_sim::Frame;

/// Network input layout for one frame: `[channels, height, width]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputSpec {
    /// 3 for rgb, 4 for rgb plus depth.
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub far_clip: f32,
}

impl InputSpec {
    pub fn from_shape(shape: [usize; 3], far_clip: f64) -> InputSpec {
        InputSpec {
            channels: shape[0],
            height: shape[1],
            width: shape[2],
            far_clip: far_clip as f32,
        }
    }

    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Source cells and their overlap with each destination cell along one axis.
fn coverage(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
            let mut cells = Vec::new();
            let mut k = lo.floor() as usize;
            while (k as f64) < hi && k < src {
                let w = hi.min(k as f64 + 1.0) - lo.max(k as f64);
                if w > 0.0 {
                    cells.push((k, w / scale));
                }
                k += 1;
            }
            cells
        })
        .collect()
}

/// Area-averaging resize of a single-channel row-major image.
pub fn area_resize(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f32> {
    assert_eq!(src.len(), sw * sh);
    if (sw, sh) == (dw, dh) {
        return src.to_vec();
    }
    let cx = coverage(sw, dw);
    let cy = coverage(sh, dh);
    // horizontal pass, then vertical
    let mut tmp = vec![0f64; sh * dw];
    for y in 0..sh {
        for (x, cells) in cx.iter().enumerate() {
            tmp[y * dw + x] = cells.iter().map(|&(k, w)| src[y * sw + k] as f64 * w).sum();
        }
    }
    let mut out = vec![0f32; dh * dw];
    for (y, cells) in cy.iter().enumerate() {
        for x in 0..dw {
            out[y * dw + x] = cells.iter().map(|&(k, w)| tmp[k * dw + x] * w).sum::<f64>() as f32;
        }
    }
    out
}

/// Normalized planar input: rgb scaled to [0, 1], depth divided by the far
/// clip, each plane area-resized to the requested `InputSpec`.
pub fn frame_to_input(frame: &Frame, spec: &InputSpec) -> Vec<f32> {
    assert!(spec.channels == 3 || spec.channels == 4, "channels must be 3 or 4");
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut out = Vec::with_capacity(spec.numel());
    let mut plane = vec![0f32; w * h];
    for c in 0..spec.channels {
        if c < 3 {
            for (p, px) in plane.iter_mut().zip(frame.rgb.chunks_exact(3)) {
                *p = px[c] as f32 / 255.0;
            }
        } else {
            for (p, &d) in plane.iter_mut().zip(&frame.depth) {
                *p = d / spec.far_clip;
            }
        }
        out.extend(area_resize(&plane, w, h, spec.width, spec.height));
    }
    out
}
