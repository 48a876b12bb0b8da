//! Scatter-plot emission: one panel per method, real points behind
//! surrogate points, annotated with a small built-in bitmap font.

use distillkit::error::{DistillError, Result};
use distillkit::linalg::{covariance, jacobi_eigen, mean_vector};
use image::{Rgb, RgbImage};
use std::path::Path;

const PANEL: u32 = 280;
const HEADER: u32 = 26;
const MARGIN: u32 = 12;

const METHOD_COLORS: [[u8; 3]; 6] = [
    [214, 69, 65],   // red
    [31, 119, 180],  // blue
    [44, 160, 44],   // green
    [255, 127, 14],  // orange
    [148, 103, 189], // purple
    [23, 190, 207],  // teal
];

/// 5x7 glyphs, one byte per row, low 5 bits used.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '/' => [0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10],
        _ => [0x00; 7],
    }
}

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, color: [u8; 3]) {
    let mut cx = x;
    for c in text.chars() {
        let g = glyph(c);
        for (row, bits) in g.iter().enumerate() {
            for col in 0..5u32 {
                if bits & (1 << (4 - col)) != 0 {
                    let (px, py) = (cx + col, y + row as u32);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, Rgb(color));
                    }
                }
            }
        }
        cx += 6;
    }
}

fn draw_square(img: &mut RgbImage, cx: i64, cy: i64, half: i64, color: [u8; 3]) {
    for dy in -half..=half {
        for dx in -half..=half {
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
                img.put_pixel(x as u32, y as u32, Rgb(color));
            }
        }
    }
}

/// Projects rows onto the top two principal directions of `reference`.
/// Eigenvector signs are fixed by making the largest-magnitude entry
/// positive, so the projection is deterministic.
pub fn pca_project(reference: &[Vec<f64>], rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let dim = reference.first().map_or(0, Vec::len);
    if dim < 2 {
        return Err(DistillError::invalid(
            "plotting error: need at least two feature dimensions",
        ));
    }
    if dim == 2 {
        return Ok(rows.to_vec());
    }
    let mean = mean_vector(reference);
    let cov = covariance(reference);
    let (eig, vecs) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig[b].partial_cmp(&eig[a]).unwrap());
    let mut axes = Vec::with_capacity(2);
    for &k in order.iter().take(2) {
        let mut axis: Vec<f64> = (0..dim).map(|i| vecs.at(i, k)).collect();
        let lead = axis
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if axis[lead] < 0.0 {
            for v in &mut axis {
                *v = -*v;
            }
        }
        axes.push(axis);
    }
    Ok(rows
        .iter()
        .map(|r| {
            axes.iter()
                .map(|axis| {
                    axis.iter()
                        .enumerate()
                        .map(|(i, ai)| ai * (r[i] - mean[i]))
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Variances of `reference` along all principal directions, descending.
/// Exposed for the projection-quality checks.
pub fn pca_spectrum(reference: &[Vec<f64>]) -> Vec<f64> {
    let cov = covariance(reference);
    let (mut eig, _) = jacobi_eigen(&cov);
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}

/// One panel per method: real features as the gray background layer,
/// surrogate features in color, a text header with the method name and its
/// accuracy annotation. Empty surrogates render with a warning header.
pub fn plot_embedding_scatter(
    real: &[Vec<f64>],
    per_method: &[(String, Vec<Vec<f64>>, Option<f64>)],
    out_path: &Path,
) -> Result<()> {
    if real.is_empty() {
        return Err(DistillError::EmptyInput("no real features to plot".into()));
    }
    if per_method.is_empty() {
        return Err(DistillError::EmptyInput("no methods to plot".into()));
    }
    let real2 = pca_project(real, real)?;
    let mut surrogates2 = Vec::new();
    for (name, rows, acc) in per_method {
        surrogates2.push((name.clone(), pca_project(real, rows)?, *acc));
    }

    // Shared bounds over everything drawn.
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in real2.iter().chain(surrogates2.iter().flat_map(|(_, r, _)| r.iter())) {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    for d in 0..2 {
        let pad = 0.05 * (hi[d] - lo[d]).max(1e-9);
        lo[d] -= pad;
        hi[d] += pad;
    }

    let n_panels = surrogates2.len() as u32;
    let width = MARGIN + n_panels * (PANEL + MARGIN);
    let height = HEADER + PANEL + 2 * MARGIN;
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));

    let to_pixel = |panel: u32, p: &[f64]| -> (i64, i64) {
        let x0 = (MARGIN + panel * (PANEL + MARGIN)) as f64;
        let y0 = (HEADER + MARGIN) as f64;
        let fx = (p[0] - lo[0]) / (hi[0] - lo[0]);
        let fy = (p[1] - lo[1]) / (hi[1] - lo[1]);
        (
            (x0 + fx * PANEL as f64) as i64,
            (y0 + (1.0 - fy) * PANEL as f64) as i64,
        )
    };

    for (panel, (name, rows, acc)) in surrogates2.iter().enumerate() {
        let panel = panel as u32;
        // Panel frame.
        let x0 = (MARGIN + panel * (PANEL + MARGIN)) as i64;
        let y0 = (HEADER + MARGIN) as i64;
        for dx in 0..=PANEL as i64 {
            draw_square(&mut img, x0 + dx, y0, 0, [200, 200, 200]);
            draw_square(&mut img, x0 + dx, y0 + PANEL as i64, 0, [200, 200, 200]);
        }
        for dy in 0..=PANEL as i64 {
            draw_square(&mut img, x0, y0 + dy, 0, [200, 200, 200]);
            draw_square(&mut img, x0 + PANEL as i64, y0 + dy, 0, [200, 200, 200]);
        }
        for p in &real2 {
            let (px, py) = to_pixel(panel, p);
            draw_square(&mut img, px, py, 1, [170, 170, 170]);
        }
        let color = METHOD_COLORS[panel as usize % METHOD_COLORS.len()];
        for p in rows {
            let (px, py) = to_pixel(panel, p);
            draw_square(&mut img, px, py, 2, color);
        }
        let label = match (rows.is_empty(), acc) {
            (true, _) => format!("{name}: empty surrogate"),
            (false, Some(a)) => format!("{name} top1={a:.1}%"),
            (false, None) => name.clone(),
        };
        draw_text(
            &mut img,
            MARGIN + panel * (PANEL + MARGIN),
            MARGIN / 2,
            &label,
            [20, 20, 20],
        );
        // Legend swatch next to the header text.
        draw_square(
            &mut img,
            (MARGIN + panel * (PANEL + MARGIN) + PANEL - 8) as i64,
            (MARGIN / 2 + 3) as i64,
            3,
            color,
        );
    }

    img.save(out_path)
        .map_err(|e| DistillError::invalid(format!("plotting error: {e}")))?;
    Ok(())
}
