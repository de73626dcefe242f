//! Beer-Lambert pencil-beam rendering of the ray fan into a panorama.
//!
//! Each panorama pixel is `1 - T` with `T = exp(-beta * sum(sigma_i) * delta_mm)`,
//! where `sigma_i` are render-windowed intensities sampled along the beam in
//! one axial slice and `delta_mm` is the physical sample spacing.

use rayon::prelude::*;

use crate::geometry::{FocalTrough, Ray, RayFan};
use crate::image::Image;
use crate::volume::{FloatVolume, SampleMode, WindowSpec};

/// Attenuation per unit normalized intensity per mm.
pub const DEFAULT_BETA: f64 = 0.28;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderParams {
    pub beta: f64,
    pub render_window: WindowSpec,
    /// In-slice interpolation; `Trilinear` means bilinear within the axial slice.
    pub sample_mode: SampleMode,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            render_window: WindowSpec::RENDER,
            sample_mode: SampleMode::Trilinear,
        }
    }
}

/// `exp(-beta * delta * sum(samples))`; an empty beam transmits everything.
pub fn transmittance(samples: &[f64], beta: f64, delta: f64) -> f64 {
    let sum: f64 = samples.iter().sum();
    (-beta * delta * sum).exp()
}

/// Rendered pixel value `1 - T`, computed without cancellation.
#[inline]
fn absorbed(beta: f64, delta: f64, sum: f64) -> f64 {
    -(-beta * delta * sum).exp_m1()
}

/// Axial-plane mask of voxel centres inside the focal trough.
#[derive(Debug, Clone, PartialEq)]
pub struct TroughMask {
    pub nx: usize,
    pub ny: usize,
    pub inside: Vec<bool>,
}

impl TroughMask {
    pub fn new(trough: &FocalTrough, nx: usize, ny: usize) -> Self {
        let mut inside = Vec::with_capacity(nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                inside.push(trough.contains([x as f64, y as f64]));
            }
        }
        Self { nx, ny, inside }
    }

    /// Mask that admits every voxel.
    pub fn all(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            inside: vec![true; nx * ny],
        }
    }
}

/// Per-voxel weights a beam accumulates within one axial slice.
///
/// Summing `weight * value` over the taps equals summing the interpolated
/// sample values along the beam. Voxels outside the volume or outside the
/// trough carry no weight.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamTaps {
    /// `(index within the slice, accumulated weight)`, sorted by index.
    pub taps: Vec<(usize, f64)>,
    /// Physical sample spacing in mm.
    pub delta_mm: f64,
}

impl BeamTaps {
    pub fn new(ray: &Ray, delta: f64, spacing: [f64; 3], mask: &TroughMask, mode: SampleMode) -> Self {
        let (nx, ny) = (mask.nx, mask.ny);
        let mut acc: Vec<(usize, f64)> = Vec::with_capacity(ray.samples.len() * 4);
        let mut push = |x: isize, y: isize, w: f64| {
            if w != 0.0 && x >= 0 && y >= 0 && (x as usize) < nx && (y as usize) < ny {
                let i = y as usize * nx + x as usize;
                if mask.inside[i] {
                    acc.push((i, w));
                }
            }
        };
        for &[px, py] in &ray.samples {
            match mode {
                SampleMode::Nearest => push(px.round() as isize, py.round() as isize, 1.0),
                SampleMode::Trilinear => {
                    let (x0, y0) = (px.floor(), py.floor());
                    let (fx, fy) = (px - x0, py - y0);
                    let (x0, y0) = (x0 as isize, y0 as isize);
                    push(x0, y0, (1.0 - fx) * (1.0 - fy));
                    push(x0 + 1, y0, fx * (1.0 - fy));
                    push(x0, y0 + 1, (1.0 - fx) * fy);
                    push(x0 + 1, y0 + 1, fx * fy);
                }
            }
        }
        // stable sort keeps per-voxel accumulation in sample order
        acc.sort_by_key(|&(i, _)| i);
        let mut taps: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
        for (i, w) in acc {
            match taps.last_mut() {
                Some((j, sum)) if *j == i => *sum += w,
                _ => taps.push((i, w)),
            }
        }
        let [sx, sy, _] = spacing;
        let delta_mm = delta * (ray.direction[0] * sx).hypot(ray.direction[1] * sy);
        Self { taps, delta_mm }
    }

    /// Sum of interpolated intensities along the beam in slice `z`.
    pub fn line_sum(&self, values: &FloatVolume, z: usize) -> f64 {
        let slice = values.slice_z(z);
        self.taps.iter().map(|&(i, w)| w * slice[i] as f64).sum()
    }
}

/// One panorama column: `1 - T` for every slice in `z_range`, top to bottom.
///
/// `values` must already be render-windowed so that everything below the
/// window floor contributes nothing.
pub fn render_column(
    values: &FloatVolume,
    ray: &Ray,
    delta: f64,
    z_range: (usize, usize),
    params: &RenderParams,
    mask: &TroughMask,
) -> Vec<f64> {
    let taps = BeamTaps::new(ray, delta, values.spacing, mask, params.sample_mode);
    (z_range.0..z_range.1)
        .map(|z| absorbed(params.beta, taps.delta_mm, taps.line_sum(values, z)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    /// Rows are ROI slices (superior first), columns are fan rays in order.
    pub image: Image,
    pub roi_z: (usize, usize),
}

/// Render every ray of the fan; columns are independent and may run in parallel.
pub fn render_panorama(
    values: &FloatVolume,
    fan: &RayFan,
    trough: &FocalTrough,
    z_range: (usize, usize),
    params: &RenderParams,
) -> Panorama {
    let mask = TroughMask::new(trough, values.dims[0], values.dims[1]);
    render_panorama_masked(values, fan, &mask, z_range, params)
}

pub fn render_panorama_masked(
    values: &FloatVolume,
    fan: &RayFan,
    mask: &TroughMask,
    z_range: (usize, usize),
    params: &RenderParams,
) -> Panorama {
    let columns: Vec<Vec<f64>> = fan
        .rays
        .par_iter()
        .map(|ray| render_column(values, ray, fan.delta, z_range, params, mask))
        .collect();
    let width = columns.len();
    let height = z_range.1 - z_range.0;
    let mut image = Image::filled(width, height, 0.0);
    for (x, col) in columns.iter().enumerate() {
        for (y, &v) in col.iter().enumerate() {
            image.set(x, y, v);
        }
    }
    Panorama {
        image,
        roi_z: z_range,
    }
}

/// Mean of each column over all rows.
pub fn column_profile(img: &Image) -> Vec<f64> {
    (0..img.width)
        .map(|x| (0..img.height).map(|y| img.get(x, y)).sum::<f64>() / img.height as f64)
        .collect()
}

/// Local maxima whose prominence is at least `min_prominence`.
///
/// Plateaus count once, at their centre. Prominence is the height above the
/// higher of the two minima separating the peak from taller terrain (or the
/// profile ends).
pub fn find_peaks(profile: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = profile.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if profile[i] > profile[i - 1] {
            let mut j = i;
            while j + 1 < n && profile[j + 1] == profile[i] {
                j += 1;
            }
            if j + 1 < n && profile[j + 1] < profile[i] {
                let top = profile[i];
                let mut left_min = top;
                for k in (0..i).rev() {
                    if profile[k] > top {
                        break;
                    }
                    left_min = left_min.min(profile[k]);
                }
                let mut right_min = top;
                for &v in &profile[j + 1..] {
                    if v > top {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                if top - left_min.max(right_min) >= min_prominence {
                    peaks.push((i + j) / 2);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Share of the profile's range a peak must rise above its surroundings to count as a tooth.
pub const TOOTH_PROMINENCE_FRACTION: f64 = 0.1;

/// Peaks of the column profile prominent enough to be separate teeth.
pub fn tooth_peaks(profile: &[f64]) -> Vec<usize> {
    let (lo, hi) = profile
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        return Vec::new();
    }
    find_peaks(profile, TOOTH_PROMINENCE_FRACTION * (hi - lo))
}
