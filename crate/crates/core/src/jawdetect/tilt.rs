//! Sagittal tilt: principal-axis estimate from the jaw outline and axial-plane correction.

use rayon::prelude::*;

use super::contour::region_moments;
use super::{JawError, Result};
use crate::volume::FloatVolume;

/// Below this major/minor eigenvalue ratio the region has no usable axis.
pub const MIN_EIGEN_RATIO: f64 = 1.05;
pub const MAX_TILT_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltEstimate {
    /// Angle of the major axis from the anterior (`y`) axis, in `(-90, 90]`.
    pub degrees: f64,
    pub eigen_ratio: f64,
    pub low_confidence: bool,
}

/// Reduce an axis angle (defined mod 180) to `(-90, 90]`.
pub fn wrap_axis_deg(deg: f64) -> f64 {
    let mut d = deg.rem_euclid(180.0);
    if d > 90.0 {
        d -= 180.0;
    }
    d
}

/// Angle of the major principal axis of `[[mxx, mxy], [mxy, myy]]`.
pub fn axis_tilt(mxx: f64, myy: f64, mxy: f64) -> TiltEstimate {
    let tr = mxx + myy;
    let disc = ((mxx - myy) * (mxx - myy) / 4.0 + mxy * mxy).sqrt();
    let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
    let ratio = if l2 > 0.0 { l1 / l2 } else { f64::INFINITY };
    if ratio < MIN_EIGEN_RATIO {
        return TiltEstimate {
            degrees: 0.0,
            eigen_ratio: ratio,
            low_confidence: true,
        };
    }
    // major axis direction, measured from +x
    let phi = 0.5 * (2.0 * mxy).atan2(mxx - myy);
    let (vx, vy) = (phi.cos(), phi.sin());
    // rotating (0, 1) by t gives (-sin t, cos t)
    let from_y = (-vx).atan2(vy).to_degrees();
    TiltEstimate {
        degrees: wrap_axis_deg(from_y),
        eigen_ratio: ratio,
        low_confidence: false,
    }
}

/// Tilt of the region enclosed by a closed contour.
pub fn estimate_tilt(contour: &[[f64; 2]]) -> Result<TiltEstimate> {
    let m = region_moments(contour).ok_or(JawError::DegenerateContour)?;
    Ok(axis_tilt(m.mxx, m.myy, m.mxy))
}

/// Rotate `(x, y)` by `deg` about `centre`.
pub fn rotate_point(p: [f64; 2], centre: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    let (dx, dy) = (p[0] - centre[0], p[1] - centre[1]);
    [centre[0] + c * dx - s * dy, centre[1] + s * dx + c * dy]
}

/// Centre of the axial plane in voxel coordinates.
pub fn axial_centre(dims: [usize; 3]) -> [f64; 2] {
    [(dims[0] as f64 - 1.0) / 2.0, (dims[1] as f64 - 1.0) / 2.0]
}

/// Rotate every axial slice by `-angle_deg` about the axial centre.
///
/// Bilinear resampling; output voxels whose source falls outside the slice get `fill`.
pub fn correct_tilt(values: &FloatVolume, angle_deg: f64, fill: f32) -> Result<FloatVolume> {
    if !(angle_deg.abs() < MAX_TILT_DEG) {
        return Err(JawError::TiltOutOfRange(angle_deg));
    }
    if angle_deg == 0.0 {
        return Ok(values.clone());
    }
    let [nx, ny, _] = values.dims;
    let centre = axial_centre(values.dims);
    let plane = nx * ny;
    let mut data = vec![0f32; values.data.len()];
    data.par_chunks_mut(plane)
        .zip(values.data.par_chunks(plane))
        .for_each(|(out, src)| {
            for y in 0..ny {
                for x in 0..nx {
                    // content moves by -angle, so sample the source at +angle
                    let s = rotate_point([x as f64, y as f64], centre, angle_deg);
                    out[y * nx + x] = bilinear(src, nx, ny, s).unwrap_or(fill);
                }
            }
        });
    Ok(FloatVolume {
        dims: values.dims,
        spacing: values.spacing,
        data,
    })
}

fn bilinear(src: &[f32], nx: usize, ny: usize, p: [f64; 2]) -> Option<f32> {
    let eps = 1e-9;
    if p[0] < -eps || p[1] < -eps || p[0] > (nx - 1) as f64 + eps || p[1] > (ny - 1) as f64 + eps {
        return None;
    }
    let x = p[0].clamp(0.0, (nx - 1) as f64);
    let y = p[1].clamp(0.0, (ny - 1) as f64);
    let x0 = (x.floor() as usize).min(nx.saturating_sub(2));
    let y0 = (y.floor() as usize).min(ny.saturating_sub(2));
    let x1 = (x0 + 1).min(nx - 1);
    let y1 = (y0 + 1).min(ny - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let v = |xx: usize, yy: usize| src[yy * nx + xx] as f64;
    let top = v(x0, y0) * (1.0 - fx) + v(x1, y0) * fx;
    let bottom = v(x0, y1) * (1.0 - fx) + v(x1, y1) * fx;
    Some((top * (1.0 - fy) + bottom * fy) as f32)
}
