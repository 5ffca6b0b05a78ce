use std::path::Path;

use crate::camera::Frame;

/// Binary PPM (P6) of the color channels.
pub fn ppm_bytes(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.rgb);
    out
}

/// Binary PGM (P5) of depth, scaled so `far_clip` is white.
pub fn pgm_bytes(frame: &Frame, far_clip: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(
        frame
            .depth
            .iter()
            .map(|&d| ((d as f64 / far_clip).clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_ppm(frame: &Frame, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, ppm_bytes(frame))
}

pub fn write_pgm(frame: &Frame, far_clip: f64, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, pgm_bytes(frame, far_clip))
}
