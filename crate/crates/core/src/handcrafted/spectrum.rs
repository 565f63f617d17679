use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::preprocess::GrayImage;
use crate::stats::compute_stats;

/// Magnitudes of the 2-D DFT, quadrant-swapped so the zero-frequency term
/// sits at `(height / 2, width / 2)`. Row-major, same shape as the input.
pub fn centered_magnitude_spectrum(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let mut buf: Vec<Complex<f64>> = img
        .data
        .iter()
        .map(|&v| Complex::new(v as f64, 0.0))
        .collect();
    if buf.is_empty() {
        return Vec::new();
    }

    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    row_fft.process(&mut buf);

    let col_fft = planner.plan_fft_forward(h);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = buf[r * w + c];
        }
        col_fft.process(&mut column);
        for r in 0..h {
            buf[r * w + c] = column[r];
        }
    }

    let mut out = vec![0.0; w * h];
    for r in 0..h {
        let sr = (r + h / 2) % h;
        for c in 0..w {
            let sc = (c + w / 2) % w;
            out[sr * w + sc] = buf[r * w + c].norm();
        }
    }
    out
}

/// Statistics of the floored, centered magnitude spectrum.
pub fn fft_features(img: &GrayImage) -> Result<Vec<f64>> {
    let spectrum: Vec<f64> = centered_magnitude_spectrum(img)
        .into_iter()
        .map(f64::floor)
        .collect();
    Ok(compute_stats(&spectrum)?.to_array().to_vec())
}
