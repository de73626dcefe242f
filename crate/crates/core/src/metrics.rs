//! Full-reference image comparison: windowed SSIM and PSNR on unit-range images.

use std::fmt;

use thiserror::Error;

use crate::image::Image;

const K1: f64 = 0.01;
const K2: f64 = 0.03;
/// Side of the uniform SSIM window.
pub const SSIM_WINDOW: usize = 8;

#[derive(Error, Debug, PartialEq)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("empty image")]
    Empty,
}

fn check_dims(a: &Image, b: &Image) -> Result<(), MetricError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricError::DimMismatch(a.width, a.height, b.width, b.height));
    }
    if a.data.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Window side actually used for an image; shrinks for images smaller than 8px.
pub fn ssim_window(width: usize, height: usize) -> usize {
    SSIM_WINDOW.min(width).min(height)
}

/// Mean SSIM over all `8x8` windows at stride 1, uniform weights,
/// `C1 = 0.01^2`, `C2 = 0.03^2` for unit dynamic range.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let win = ssim_window(a.width, a.height);
    let n = (win * win) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=a.height - win {
        for x0 in 0..=a.width - win {
            let (mut sa, mut sb) = (0.0, 0.0);
            for y in y0..y0 + win {
                for x in x0..x0 + win {
                    sa += a.get(x, y);
                    sb += b.get(x, y);
                }
            }
            let (mu_a, mu_b) = (sa / n, sb / n);
            let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
            for y in y0..y0 + win {
                for x in x0..x0 + win {
                    let da = a.get(x, y) - mu_a;
                    let db = b.get(x, y) - mu_b;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            }
            let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * vab + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (vaa + vbb + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data.len() as f64)
}

/// `10 log10(1 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricError> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / m).log10()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub ssim: f64,
    pub psnr: f64,
    pub width: usize,
    pub height: usize,
    pub window: usize,
}

impl MetricReport {
    pub fn compare(a: &Image, b: &Image) -> Result<Self, MetricError> {
        Ok(Self {
            ssim: ssim(a, b)?,
            psnr: psnr(a, b)?,
            width: a.width,
            height: a.height,
            window: ssim_window(a.width, a.height),
        })
    }
}

/// `key=value` lines; infinite PSNR prints as `inf`.
impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ssim={}", self.ssim)?;
        if self.psnr.is_infinite() {
            writeln!(f, "psnr=inf")?;
        } else {
            writeln!(f, "psnr={}", self.psnr)?;
        }
        writeln!(f, "width={}", self.width)?;
        writeln!(f, "height={}", self.height)?;
        write!(f, "window={}", self.window)
    }
}
