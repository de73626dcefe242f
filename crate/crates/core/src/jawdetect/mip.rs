use std::ops::Range;

use rayon::prelude::*;

use super::{JawError, Result};
use crate::image::Image;
use crate::volume::FloatVolume;

/// Projection direction of a MIP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipAxis {
    /// Max along y; image is `nx` wide, `nz` tall (row = axial slice).
    Coronal,
    /// Max along z; image is `nx` wide, `ny` tall.
    Axial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipImage {
    pub image: Image,
    pub axis: MipAxis,
    /// Slice range along the projection axis.
    pub range: Range<usize>,
}

/// Maximum of `values` along `axis` over `range`.
pub fn mip(values: &FloatVolume, axis: MipAxis, range: Range<usize>) -> Result<MipImage> {
    let [nx, ny, nz] = values.dims;
    let extent = match axis {
        MipAxis::Coronal => ny,
        MipAxis::Axial => nz,
    };
    if range.start >= range.end || range.end > extent {
        return Err(JawError::EmptyRange {
            start: range.start,
            end: range.end,
            extent,
        });
    }
    let (width, height) = match axis {
        MipAxis::Coronal => (nx, nz),
        MipAxis::Axial => (nx, ny),
    };
    let mut data = vec![0f64; width * height];
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, out)| match axis {
            MipAxis::Coronal => {
                let z = row;
                for (x, o) in out.iter_mut().enumerate() {
                    *o = range
                        .clone()
                        .map(|y| values.get(x, y, z))
                        .fold(f32::NEG_INFINITY, f32::max) as f64;
                }
            }
            MipAxis::Axial => {
                let y = row;
                out.fill(f64::NEG_INFINITY);
                for z in range.clone() {
                    let line = &values.slice_z(z)[y * nx..(y + 1) * nx];
                    for (o, &v) in out.iter_mut().zip(line) {
                        *o = o.max(v as f64);
                    }
                }
            }
        });
    Ok(MipImage {
        image: Image::new(width, height, data).expect("shape matches"),
        axis,
        range,
    })
}
