use std::fmt::Write as _;
use std::path::Path;

use crate::fit::TrainReport;
use crate::TrainError;

pub const CSV_FILE: &str = "curves.csv";
pub const SVG_FILE: &str = "curves.svg";

/// Writes `curves.csv` and `curves.svg` into `dir`.
pub fn export_curves(report: &TrainReport, dir: &Path) -> Result<(), TrainError> {
    if report.train_loss.is_empty() || report.train_loss.len() != report.val_loss.len() {
        return Err(TrainError::Contract("no epochs to export".into()));
    }
    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for (i, (t, v)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        let _ = writeln!(csv, "{},{},{}", i + 1, t, v);
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CSV_FILE), csv)?;
    std::fs::write(dir.join(SVG_FILE), render_svg(report))?;
    Ok(())
}

/// Rows `(epoch, train_loss, val_loss)` of a curves CSV.
pub fn read_curves_csv(path: &Path) -> Result<Vec<(usize, f64, f64)>, TrainError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |line: usize| TrainError::Contract(format!("{}: bad row {line}", path.display()));
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| {
            let mut f = l.split(',');
            let mut next = || f.next().ok_or_else(|| bad(i + 1));
            let e = next()?.parse().map_err(|_| bad(i + 1))?;
            let t = next()?.parse().map_err(|_| bad(i + 1))?;
            let v = next()?.parse().map_err(|_| bad(i + 1))?;
            Ok((e, t, v))
        })
        .collect()
}

/// Log-scale line plot of both losses.
pub fn render_svg(report: &TrainReport) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let all: Vec<f64> = report
        .train_loss
        .iter()
        .chain(&report.val_loss)
        .copied()
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (-1.0, 0.0) };
    let n = report.train_loss.len().max(2);
    let px = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n - 1) as f64;
    let py = |v: f64| {
        let v = v.max(10f64.powf(lo)).log10();
        h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo)
    };
    let line = |vals: &[f64]| {
        vals.iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.1},{:.1}", px(i), py(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad},{pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    for d in lo as i32..=hi as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">1e{d}</text>"#, pad - 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        line(&report.train_loss)
    );
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
        line(&report.val_loss)
    );
    let _ = writeln!(s, r##"<text x="{}" y="{}" fill="#1f77b4">train</text>"##, w - pad - 80.0, pad);
    let _ = writeln!(s, r##"<text x="{}" y="{}" fill="#d62728">validation</text>"##, w - pad - 80.0, pad + 16.0);
    s.push_str("</svg>\n");
    s
}
