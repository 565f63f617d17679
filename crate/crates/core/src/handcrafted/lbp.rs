use std::f64::consts::PI;

use crate::error::Result;
use crate::preprocess::GrayImage;
use crate::stats::{compute_stats, NUM_STATS};

pub const LBP_RADII: [usize; 4] = [2, 3, 5, 7];
pub const LBP_POINTS: usize = 8;

struct SamplePoint {
    dy0: isize,
    dx0: isize,
    fy: f64,
    fx: f64,
}

/// Sample `k` sits at `(-R sin(2πk/P), R cos(2πk/P))`, rounded to five
/// decimals so that axis-aligned points land exactly on the grid.
fn sample_points(radius: usize) -> Vec<SamplePoint> {
    let round5 = |v: f64| (v * 1e5).round() / 1e5;
    (0..LBP_POINTS)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / LBP_POINTS as f64;
            let dy = round5(-(radius as f64) * angle.sin());
            let dx = round5(radius as f64 * angle.cos());
            SamplePoint {
                dy0: dy.floor() as isize,
                dx0: dx.floor() as isize,
                fy: dy - dy.floor(),
                fx: dx - dx.floor(),
            }
        })
        .collect()
}

/// Default (non-uniform, non-rotation-invariant) 8-point LBP codes for every
/// pixel whose sampling circle lies inside the image, row-major over the
/// interior `(height - 2R) × (width - 2R)` region.
///
/// Bit `k` is set when the interpolated sample `k` is at least the centre
/// value. Interpolation runs on differences from the centre, which makes
/// the codes exactly invariant to a common intensity offset.
pub fn lbp_codes(img: &GrayImage, radius: usize) -> Vec<u8> {
    let points = sample_points(radius);
    if img.width <= 2 * radius || img.height <= 2 * radius {
        return Vec::new();
    }
    let mut codes = Vec::with_capacity((img.width - 2 * radius) * (img.height - 2 * radius));
    for r in radius..img.height - radius {
        for c in radius..img.width - radius {
            let centre = img.get(r, c) as i32;
            let diff = |rr: isize, cc: isize| {
                (img.get(rr as usize, cc as usize) as i32 - centre) as f64
            };
            let mut code = 0u8;
            for (k, p) in points.iter().enumerate() {
                let y0 = r as isize + p.dy0;
                let x0 = c as isize + p.dx0;
                let y1 = if p.fy > 0.0 { y0 + 1 } else { y0 };
                let x1 = if p.fx > 0.0 { x0 + 1 } else { x0 };
                let d00 = diff(y0, x0);
                let top = d00 + p.fx * (diff(y0, x1) - d00);
                let d10 = diff(y1, x0);
                let bottom = d10 + p.fx * (diff(y1, x1) - d10);
                let sample = top + p.fy * (bottom - top);
                if sample >= 0.0 {
                    code |= 1 << k;
                }
            }
            codes.push(code);
        }
    }
    codes
}

/// Statistics of the code image for radii 2, 3, 5 and 7, concatenated.
pub fn lbp_features(img: &GrayImage) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(LBP_RADII.len() * NUM_STATS);
    for radius in LBP_RADII {
        let codes: Vec<f64> = lbp_codes(img, radius).into_iter().map(f64::from).collect();
        out.extend(compute_stats(&codes)?.to_array());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_geometry() {
        let pts = sample_points(2);
        // k = 0 is straight right, k = 2 straight up.
        assert_eq!((pts[0].dy0, pts[0].dx0, pts[0].fy, pts[0].fx), (0, 2, 0.0, 0.0));
        assert_eq!((pts[2].dy0, pts[2].dx0, pts[2].fy, pts[2].fx), (-2, 0, 0.0, 0.0));
        assert_eq!((pts[4].dy0, pts[4].dx0), (0, -2));
        assert!(pts[1].fx > 0.4 && pts[1].fx < 0.42);
    }

    #[test]
    fn constant_image_codes_are_all_ones() {
        let img = GrayImage::filled(30, 30, 77);
        for radius in LBP_RADII {
            let codes = lbp_codes(&img, radius);
            assert_eq!(codes.len(), (30 - 2 * radius).pow(2));
            assert!(codes.iter().all(|&c| c == 255));
        }
    }

    #[test]
    fn bright_centre_gives_zero_code() {
        let mut img = GrayImage::filled(5, 5, 10);
        img.data[12] = 200;
        assert_eq!(lbp_codes(&img, 2), vec![0]);
    }

    #[test]
    fn single_bright_neighbour() {
        let mut img = GrayImage::filled(5, 5, 100);
        img.data[12] = 150;
        img.data[2 * 5 + 4] = 200; // k = 0 sample
        assert_eq!(lbp_codes(&img, 2), vec![1]);
    }

    #[test]
    fn too_small_image_has_no_codes() {
        assert!(lbp_codes(&GrayImage::filled(4, 9, 0), 2).is_empty());
    }
}
