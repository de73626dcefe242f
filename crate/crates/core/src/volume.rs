//! Voxel volumes: the `PVOL1` file format, rescaling, windowing and sampling.
//!
//! A `PVOL1` file is one ASCII header line
//!
//! ```text
//! PVOL1 nx ny nz sx sy sz slope intercept little
//! ```
//!
//! followed by `nx*ny*nz` little-endian `i16` values, x fastest, then y, then z.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &str = "PVOL1";
const ENDIAN_TAG: &str = "little";
/// Longest header line accepted before the reader gives up.
const MAX_HEADER_LEN: usize = 4096;

#[derive(Error, Debug)]
pub enum VolumeError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated payload: expected {expected} voxels, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing data after {expected} voxels")]
    TrailingData { expected: usize },
    #[error("dimensions {0:?} overflow the addressable voxel count")]
    DimsOverflow([usize; 3]),
    #[error("invalid volume: {0}")]
    Invalid(String),
    #[error("degenerate window: lo {lo} must be below hi {hi}")]
    DegenerateWindow { lo: f64, hi: f64 },
    #[error("sample point {0:?} outside the volume")]
    OutOfBounds([f64; 3]),
}

pub type Result<T> = std::result::Result<T, VolumeError>;

/// Number of voxels for `dims`, rejecting zero extents and overflow.
pub fn voxel_count(dims: [usize; 3]) -> Result<usize> {
    if dims.contains(&0) {
        return Err(VolumeError::Invalid(format!("zero extent in dims {dims:?}")));
    }
    dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(dims[2]))
        .filter(|&n| n.checked_mul(2).is_some())
        .ok_or(VolumeError::DimsOverflow(dims))
}

/// Parsed `PVOL1` header line.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub slope: f64,
    pub intercept: f64,
}

impl VolumeHeader {
    pub fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 10 {
            return Err(VolumeError::Header(format!(
                "expected 10 fields, found {}",
                fields.len()
            )));
        }
        if fields[0] != MAGIC {
            return Err(VolumeError::Header(format!("bad magic {:?}", fields[0])));
        }
        if fields[9] != ENDIAN_TAG {
            return Err(VolumeError::Header(format!(
                "unsupported endianness tag {:?}",
                fields[9]
            )));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| VolumeError::Header(format!("bad dimension {s:?}")))
        };
        let float = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| VolumeError::Header(format!("bad number {s:?}")))
        };
        let header = VolumeHeader {
            dims: [int(fields[1])?, int(fields[2])?, int(fields[3])?],
            spacing: [float(fields[4])?, float(fields[5])?, float(fields[6])?],
            slope: float(fields[7])?,
            intercept: float(fields[8])?,
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        voxel_count(self.dims)?;
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(VolumeError::Header(format!(
                "spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        Ok(())
    }

    /// Header line including the trailing newline.
    ///
    /// Floats use Rust's shortest round-trip formatting so that a parsed
    /// header re-serializes to the same value.
    pub fn to_line(&self) -> String {
        let [nx, ny, nz] = self.dims;
        let [sx, sy, sz] = self.spacing;
        format!(
            "{MAGIC} {nx} {ny} {nz} {sx:?} {sy:?} {sz:?} {:?} {:?} {ENDIAN_TAG}\n",
            self.slope, self.intercept
        )
    }
}

/// Raw CBCT volume as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: [usize; 3],
    /// mm per voxel along x, y, z.
    pub spacing: [f64; 3],
    /// x-fastest voxel values.
    pub raw: Vec<i16>,
    pub rescale_slope: f64,
    pub rescale_intercept: f64,
}

impl Volume {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        raw: Vec<i16>,
        rescale_slope: f64,
        rescale_intercept: f64,
    ) -> Result<Self> {
        let header = VolumeHeader {
            dims,
            spacing,
            slope: rescale_slope,
            intercept: rescale_intercept,
        };
        header.validate()?;
        let n = voxel_count(dims)?;
        if raw.len() != n {
            return Err(VolumeError::Invalid(format!(
                "raw length {} does not match dims {dims:?}",
                raw.len()
            )));
        }
        if !rescale_slope.is_finite() || !rescale_intercept.is_finite() {
            return Err(VolumeError::Invalid("non-finite rescale parameters".into()));
        }
        Ok(Self {
            dims,
            spacing,
            raw,
            rescale_slope,
            rescale_intercept,
        })
    }

    pub fn header(&self) -> VolumeHeader {
        VolumeHeader {
            dims: self.dims,
            spacing: self.spacing,
            slope: self.rescale_slope,
            intercept: self.rescale_intercept,
        }
    }

    /// Linear rescale `raw * slope + intercept` into a float volume.
    pub fn rescale(&self) -> FloatVolume {
        let (slope, intercept) = (self.rescale_slope, self.rescale_intercept);
        FloatVolume {
            dims: self.dims,
            spacing: self.spacing,
            data: self
                .raw
                .iter()
                .map(|&r| (r as f64 * slope + intercept) as f32)
                .collect(),
        }
    }
}

pub fn read_volume<R: BufRead>(mut reader: R) -> Result<Volume> {
    let mut line = Vec::new();
    (&mut reader)
        .take(MAX_HEADER_LEN as u64)
        .read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(VolumeError::Header("missing or overlong header line".into()));
    }
    let text = std::str::from_utf8(&line[..line.len() - 1])
        .map_err(|_| VolumeError::Header("header is not ASCII".into()))?;
    let header = VolumeHeader::parse(text)?;
    // Canonical headers only: re-serialization must reproduce the bytes.
    if header.to_line().as_bytes() != line.as_slice() {
        return Err(VolumeError::Header(format!(
            "non-canonical header line {text:?}"
        )));
    }
    let n = voxel_count(header.dims)?;

    let mut bytes = Vec::with_capacity(n * 2);
    (&mut reader).take((n * 2) as u64).read_to_end(&mut bytes)?;
    if bytes.len() < n * 2 {
        return Err(VolumeError::Truncated {
            expected: n,
            found: bytes.len() / 2,
        });
    }
    let mut probe = [0u8; 1];
    if reader.read(&mut probe)? != 0 {
        return Err(VolumeError::TrailingData { expected: n });
    }
    let raw = bytes
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Volume::new(header.dims, header.spacing, raw, header.slope, header.intercept)
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let file = File::open(path)?;
    read_volume(BufReader::new(file))
}

pub fn write_volume_to<W: Write>(volume: &Volume, mut writer: W) -> Result<()> {
    writer.write_all(volume.header().to_line().as_bytes())?;
    let mut bytes = Vec::with_capacity(volume.raw.len() * 2);
    for v in &volume.raw {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

pub fn write_volume(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    write_volume_to(volume, BufWriter::new(File::create(path)?))
}

/// Intensity window `[lo, hi]` mapped onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub lo: f64,
    pub hi: f64,
}

impl WindowSpec {
    /// Preprocessing window used for jaw detection.
    pub const PREPROCESS: WindowSpec = WindowSpec { lo: 225.0, hi: 3096.0 };
    /// Approximate soft-tissue window.
    pub const SOFT_TISSUE: WindowSpec = WindowSpec { lo: -125.0, hi: 225.0 };
    /// Render window; the floor suppresses everything below soft tissue.
    pub const RENDER: WindowSpec = WindowSpec { lo: -175.0, hi: 3096.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let w = WindowSpec { lo, hi };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite() {
            Ok(())
        } else {
            Err(VolumeError::DegenerateWindow {
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// Interpolation used by [`FloatVolume::sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleMode {
    Nearest,
    #[default]
    Trilinear,
}

/// Dense float volume, same layout as [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct FloatVolume {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub data: Vec<f32>,
}

impl FloatVolume {
    pub fn filled(dims: [usize; 3], spacing: [f64; 3], value: f32) -> Result<Self> {
        let n = voxel_count(dims)?;
        Ok(Self {
            dims,
            spacing,
            data: vec![value; n],
        })
    }

    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let n = voxel_count(dims)?;
        let mut data = Vec::with_capacity(n);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    /// Axial slice `z` as an x-fastest slice of the data.
    pub fn slice_z(&self, z: usize) -> &[f32] {
        let n = self.dims[0] * self.dims[1];
        &self.data[z * n..(z + 1) * n]
    }

    /// Clamp `(x - lo) / (hi - lo)` to `[0, 1]` voxelwise.
    pub fn window(&self, w: WindowSpec) -> Result<FloatVolume> {
        w.validate()?;
        Ok(FloatVolume {
            dims: self.dims,
            spacing: self.spacing,
            data: self.data.iter().map(|&x| w.apply(x as f64) as f32).collect(),
        })
    }

    /// Value at a continuous voxel-coordinate point inside `[0, dims-1]`.
    pub fn sample(&self, p: [f64; 3], mode: SampleMode) -> Result<f64> {
        for (axis, &c) in p.iter().enumerate() {
            if !(c >= 0.0 && c <= (self.dims[axis] - 1) as f64) {
                return Err(VolumeError::OutOfBounds(p));
            }
        }
        Ok(match mode {
            SampleMode::Nearest => {
                let [x, y, z] = p.map(|c| c.round() as usize);
                self.get(x, y, z) as f64
            }
            SampleMode::Trilinear => self.trilinear(p),
        })
    }

    fn trilinear(&self, p: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for axis in 0..3 {
            let max = self.dims[axis] - 1;
            let f = p[axis].floor() as usize;
            // keep the upper neighbour inside the grid on the last voxel
            let f = f.min(max.saturating_sub(1));
            base[axis] = f;
            frac[axis] = if max == 0 { 0.0 } else { p[axis] - f as f64 };
        }
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for axis in 0..3 {
                let bit = (corner >> axis) & 1;
                w *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                idx[axis] = (base[axis] + bit).min(self.dims[axis] - 1);
            }
            if w != 0.0 {
                acc += w * self.get(idx[0], idx[1], idx[2]) as f64;
            }
        }
        acc
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}
