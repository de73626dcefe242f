//! Least-squares Gaussian fits to histograms and the thresholds derived from them.

use super::{JawError, Result};
use crate::image::Image;

const MAX_STEPS: usize = 100;
const REL_STEP_TOL: f64 = 1e-6;

/// `amplitude * exp(-(x - mu)^2 / (2 sigma^2))` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
    pub amplitude: f64,
    /// Sum of squared residuals at the reported parameters.
    pub residual: f64,
    pub converged: bool,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        gauss(self.amplitude, self.mu, self.sigma, x)
    }
}

#[inline]
fn gauss(amp: f64, mu: f64, sigma: f64, x: f64) -> f64 {
    let d = (x - mu) / sigma;
    amp * (-0.5 * d * d).exp()
}

fn sse(xs: &[f64], ys: &[f64], p: [f64; 3]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - gauss(p[0], p[1], p[2], x);
            r * r
        })
        .sum()
}

/// Starting point: parabola through the log-counts of the peak bin and its
/// neighbours, or moments of the peak's contiguous run when that is not possible.
fn initial_guess(xs: &[f64], ys: &[f64]) -> [f64; 3] {
    let peak = ys
        .iter()
        .enumerate()
        .fold(0, |best, (i, &y)| if y > ys[best] { i } else { best });
    if peak > 0 && peak + 1 < ys.len() && ys[peak - 1] > 0.0 && ys[peak + 1] > 0.0 {
        let (x0, x1, x2) = (xs[peak - 1], xs[peak], xs[peak + 1]);
        let (l0, l1, l2) = (ys[peak - 1].ln(), ys[peak].ln(), ys[peak + 1].ln());
        // divided differences of ln y = c2 x^2 + c1 x + c0
        let d01 = (l1 - l0) / (x1 - x0);
        let d12 = (l2 - l1) / (x2 - x1);
        let c2 = (d12 - d01) / (x2 - x0);
        if c2 < 0.0 {
            let c1 = d01 - c2 * (x0 + x1);
            let mu = -c1 / (2.0 * c2);
            let sigma = (-1.0 / (2.0 * c2)).sqrt();
            let amp = (l1 - c2 * (x1 - mu) * (x1 - mu)).exp();
            if mu.is_finite() && sigma.is_finite() && amp.is_finite() {
                return [amp, mu, sigma];
            }
        }
    }
    let mut lo = peak;
    while lo > 0 && ys[lo - 1] > 0.0 {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < ys.len() && ys[hi + 1] > 0.0 {
        hi += 1;
    }
    let mass: f64 = ys[lo..=hi].iter().sum();
    let mu = (lo..=hi).map(|i| xs[i] * ys[i]).sum::<f64>() / mass;
    let var = (lo..=hi).map(|i| (xs[i] - mu).powi(2) * ys[i]).sum::<f64>() / mass;
    let bin = if xs.len() > 1 {
        (xs[xs.len() - 1] - xs[0]).abs() / (xs.len() - 1) as f64
    } else {
        1.0
    };
    [ys[peak], mu, var.sqrt().max(bin / 2.0)]
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = r[row];
        }
        *o = det(mc) / d;
    }
    Some(out)
}

/// Fit a Gaussian to `(bin centres, counts)`.
///
/// Damped Gauss-Newton from a log-parabola start, at most 100 steps, stopping
/// when every parameter step is below `1e-6` relative. A fit that runs out of
/// steps is returned with `converged = false`.
pub fn fit_gaussian(centers: &[f64], counts: &[f64]) -> Result<GaussianFit> {
    if centers.len() != counts.len() {
        return Err(JawError::Histogram(format!(
            "{} centres vs {} counts",
            centers.len(),
            counts.len()
        )));
    }
    let nonzero = counts.iter().filter(|&&c| c > 0.0).count();
    if nonzero < 3 || counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(JawError::DegenerateHistogram { nonzero });
    }
    let xs = centers;
    let ys = counts;
    let mut p = initial_guess(xs, ys);
    let mut cost = sse(xs, ys, p);
    let mut lambda = 1e-3;
    let mut converged = false;

    for _ in 0..MAX_STEPS {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&x, &y) in xs.iter().zip(ys) {
            let e = gauss(1.0, p[1], p[2], x);
            let d = x - p[1];
            let s2 = p[2] * p[2];
            let j = [e, p[0] * e * d / s2, p[0] * e * d * d / (s2 * p[2])];
            let r = y - p[0] * e;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += lambda * jtj[i][i].max(1e-300);
        }
        let Some(step) = solve3(damped, jtr) else {
            break;
        };
        let candidate = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).abs()];
        let new_cost = if candidate[2] > 0.0 {
            sse(xs, ys, candidate)
        } else {
            f64::INFINITY
        };
        if new_cost <= cost {
            let scales = [p[0].abs(), p[1].abs() + p[2], p[2]];
            let small = step
                .iter()
                .zip(scales)
                .all(|(s, scale)| s.abs() <= REL_STEP_TOL * scale);
            p = candidate;
            cost = new_cost;
            lambda = (lambda / 10.0).max(1e-12);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                // no descent direction left: at a minimum to working precision
                converged = true;
                break;
            }
        }
    }
    Ok(GaussianFit {
        amplitude: p[0],
        mu: p[1],
        sigma: p[2],
        residual: cost,
        converged,
    })
}

/// Teeth mask threshold `mu + 2 sigma`.
pub fn teeth_threshold(fit: &GaussianFit) -> f64 {
    fit.mu + 2.0 * fit.sigma
}

/// ROI slice limits `round(mu - 2.5 sigma)`, `round(mu + 1.5 sigma)`, clamped to `[0, nz - 1]`.
pub fn roi_slices(fit: &GaussianFit, nz: usize) -> Result<(usize, usize)> {
    let last = nz.saturating_sub(1) as f64;
    let a = (fit.mu - 2.5 * fit.sigma).round().clamp(0.0, last) as usize;
    let b = (fit.mu + 1.5 * fit.sigma).round().clamp(0.0, last) as usize;
    if a >= b {
        return Err(JawError::CollapsedRoi { a, b });
    }
    Ok((a, b))
}

/// Histogram of the non-zero pixels over `[0, 1]` with `bins` uniform bins.
pub fn intensity_histogram(img: &Image, bins: usize) -> (Vec<f64>, Vec<f64>) {
    let mut counts = vec![0f64; bins];
    for &v in &img.data {
        if v > 0.0 {
            let i = ((v * bins as f64) as usize).min(bins - 1);
            counts[i] += 1.0;
        }
    }
    let centers = (0..bins).map(|i| (i as f64 + 0.5) / bins as f64).collect();
    (centers, counts)
}
