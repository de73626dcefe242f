//! Parametric head phantoms with known ground truth.
//!
//! The phantom is a soft-tissue head with a thin cranial cap, a closed band of
//! alveolar bone following an elliptical dental arch (maxillary and
//! mandibular slabs), and a row of teeth placed at equal arc length along the
//! arch. Each tooth is an enamel crown ellipsoid on top of a root cylinder;
//! implant teeth get metal crowns. Shapes have one-voxel linear edges so the
//! volume contains partial-volume intensities like a reconstructed scan.
//!
//! Positions are in mm relative to the axial centre of the volume; `z` grows
//! from the top of the volume (superior) downward.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::jawdetect::tilt::{axial_centre, rotate_point};
use crate::volume::{voxel_count, Volume, VolumeError};

#[derive(Error, Debug)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    Invalid(String),
    #[error("teeth overlap: spacing {spacing:.3} mm along the arch is below crown width {width:.3} mm")]
    TeethOverlap { spacing: f64, width: f64 },
    #[error("volume too small for the jaw: {0}")]
    DimsTooSmall(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T> = std::result::Result<T, PhantomError>;

/// Rescaled intensity levels (HU-like units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levels {
    pub air: f64,
    pub soft_tissue: f64,
    pub bone: f64,
    pub enamel: f64,
    pub metal: f64,
}

impl Default for Levels {
    fn default() -> Self {
        Self {
            air: -1000.0,
            soft_tissue: 40.0,
            bone: 700.0,
            enamel: 1800.0,
            metal: 3000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    /// mm per voxel; the axial plane must be isotropic (`sx == sy`).
    pub spacing: [f64; 3],
    /// Arch ellipse centre, mm from the axial centre.
    pub arch_center_mm: [f64; 2],
    /// Arch half-axes: lateral (`a`) and anterior-posterior (`b`), mm.
    pub arch_a_mm: f64,
    pub arch_b_mm: f64,
    pub tooth_count: usize,
    pub missing_teeth: BTreeSet<usize>,
    pub implant_teeth: BTreeSet<usize>,
    /// Rotation of the whole head about the vertical axis, degrees.
    pub tilt_deg: f64,
    pub levels: Levels,
    /// Superior and inferior limits of the jaw, mm from the top slice.
    pub jaw_z_mm: (f64, f64),
    pub crown_radius_mm: f64,
    /// Width of the alveolar bone band across the arch, mm.
    pub bone_width_mm: f64,
    /// Relative random variation of crown size; 0 gives a mirror-symmetric jaw.
    pub size_jitter: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Angular extent of the tooth row either side of the anterior apex, degrees.
pub const ARCH_HALF_SPAN_DEG: f64 = 80.0;

impl PhantomSpec {
    /// Standard 16-tooth head on an `n^3` grid spanning 128 mm, missing teeth 3 and 12.
    pub fn standard(n: usize) -> Self {
        let s = 128.0 / n as f64;
        PhantomSpec {
            dims: [n, n, n],
            spacing: [s, s, s],
            arch_center_mm: [0.0, -8.0],
            arch_a_mm: 26.0,
            arch_b_mm: 36.0,
            tooth_count: 16,
            missing_teeth: [3, 12].into_iter().collect(),
            implant_teeth: BTreeSet::new(),
            tilt_deg: 0.0,
            levels: Levels::default(),
            jaw_z_mm: (60.0, 100.0),
            crown_radius_mm: 2.0,
            bone_width_mm: 10.0,
            size_jitter: 0.05,
            slope: 1.0,
            intercept: -1000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PhantomError::Invalid(m));
        voxel_count(self.dims)?;
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad(format!("spacing must be positive, got {:?}", self.spacing));
        }
        if (self.spacing[0] - self.spacing[1]).abs() > 1e-12 {
            return bad("axial spacing must be isotropic".into());
        }
        if self.tooth_count == 0 {
            return bad("tooth_count must be at least 1".into());
        }
        if let Some(&i) = self
            .missing_teeth
            .iter()
            .chain(&self.implant_teeth)
            .find(|&&i| i >= self.tooth_count)
        {
            return bad(format!("tooth index {i} outside 0..{}", self.tooth_count));
        }
        if !(self.tilt_deg.abs() < 45.0) {
            return bad(format!("|tilt| must be below 45 degrees, got {}", self.tilt_deg));
        }
        let l = &self.levels;
        if !(l.air <= l.soft_tissue && l.soft_tissue < l.bone && l.bone < l.enamel && l.enamel < l.metal) {
            return bad("levels must satisfy air <= soft tissue < bone < enamel < metal".into());
        }
        if self.slope <= 0.0 {
            return bad("rescale slope must be positive".into());
        }
        for level in [l.air, l.metal] {
            let raw = (level - self.intercept) / self.slope;
            if raw < i16::MIN as f64 || raw > i16::MAX as f64 {
                return bad(format!("level {level} not representable as int16 raw"));
            }
        }
        if !(self.arch_a_mm > 0.0 && self.arch_b_mm > 0.0) {
            return bad("arch half-axes must be positive".into());
        }
        if !(self.crown_radius_mm > 0.0 && self.bone_width_mm > 0.0) {
            return bad("crown radius and bone width must be positive".into());
        }
        if !(0.0..0.5).contains(&self.size_jitter) {
            return bad("size_jitter must lie in [0, 0.5)".into());
        }
        let (z0, z1) = self.jaw_z_mm;
        if !(z0 >= 0.0 && z1 > z0) {
            return bad(format!("jaw z-extent {z0}..{z1} is empty"));
        }
        Ok(())
    }

    fn fov_mm(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.dims[i] as f64 * self.spacing[i])
    }

    fn head_semi_axes(&self) -> [f64; 3] {
        let f = self.fov_mm();
        [0.44 * f[0], 0.46 * f[1], 0.48 * f[2]]
    }

    fn tooth_spacing_mm(&self) -> f64 {
        arch_length(self.arch_a_mm, self.arch_b_mm) / self.tooth_count as f64
    }
}

/// Arc length of the arch ellipse between `-80` and `+80` degrees of parameter.
fn arch_length(a: f64, b: f64) -> f64 {
    arc_table(a, b).last().copied().unwrap_or(0.0)
}

const ARC_STEPS: usize = 20_000;

fn arc_table(a: f64, b: f64) -> Vec<f64> {
    let span = ARCH_HALF_SPAN_DEG.to_radians();
    let dt = 2.0 * span / ARC_STEPS as f64;
    let speed = |t: f64| (a * t.cos()).hypot(b * t.sin());
    let mut table = Vec::with_capacity(ARC_STEPS + 1);
    table.push(0.0);
    let mut s = 0.0;
    for i in 0..ARC_STEPS {
        let t0 = -span + i as f64 * dt;
        // Simpson on each step
        s += dt / 6.0 * (speed(t0) + 4.0 * speed(t0 + dt / 2.0) + speed(t0 + dt));
        table.push(s);
    }
    table
}

/// Arch parameters (radians) of `n` points at equal arc length, centred in their intervals.
fn equal_arc_parameters(a: f64, b: f64, n: usize) -> Vec<f64> {
    let table = arc_table(a, b);
    let total = *table.last().unwrap();
    let span = ARCH_HALF_SPAN_DEG.to_radians();
    let dt = 2.0 * span / ARC_STEPS as f64;
    (0..n)
        .map(|i| {
            let target = total * (i as f64 + 0.5) / n as f64;
            let j = table.partition_point(|&s| s < target).clamp(1, ARC_STEPS);
            let (s0, s1) = (table[j - 1], table[j]);
            let f = if s1 > s0 { (target - s0) / (s1 - s0) } else { 0.0 };
            -span + (j as f64 - 1.0 + f) * dt
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToothState {
    Present,
    Missing,
    Implant,
}

impl ToothState {
    pub fn as_str(&self) -> &'static str {
        match self {
            ToothState::Present => "present",
            ToothState::Missing => "missing",
            ToothState::Implant => "implant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToothTruth {
    pub index: usize,
    pub state: ToothState,
    /// Arch parameter of the tooth centre, degrees from the apex (before tilt).
    pub arch_deg: f64,
    /// Crown centre in the axial plane, voxel coordinates, tilt applied.
    pub center_vox: [f64; 2],
    pub crown_radius_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomTruth {
    pub tilt_deg: f64,
    pub seed: u64,
    /// Arch ellipse centre in voxel coordinates (tilt applied) and half-axes in voxels.
    pub arch_center_vox: [f64; 2],
    pub arch_a_vox: f64,
    pub arch_b_vox: f64,
    pub teeth: Vec<ToothTruth>,
    /// Axial slice span of the crowns and of the whole jaw, fractional voxel indices.
    pub crown_z: (f64, f64),
    pub jaw_z: (f64, f64),
}

impl PhantomTruth {
    pub fn present_teeth(&self) -> impl Iterator<Item = &ToothTruth> {
        self.teeth.iter().filter(|t| t.state != ToothState::Missing)
    }

    /// `key=value` sidecar text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tilt_deg={:?}", self.tilt_deg);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(
            s,
            "arch_center_vox={:?},{:?}",
            self.arch_center_vox[0], self.arch_center_vox[1]
        );
        let _ = writeln!(s, "arch_a_vox={:?}", self.arch_a_vox);
        let _ = writeln!(s, "arch_b_vox={:?}", self.arch_b_vox);
        let _ = writeln!(s, "crown_z={:?},{:?}", self.crown_z.0, self.crown_z.1);
        let _ = writeln!(s, "jaw_z={:?},{:?}", self.jaw_z.0, self.jaw_z.1);
        let _ = writeln!(s, "tooth_count={}", self.teeth.len());
        for t in &self.teeth {
            let _ = writeln!(
                s,
                "tooth.{}={},{:?},{:?},{:?}",
                t.index,
                t.state.as_str(),
                t.arch_deg,
                t.center_vox[0],
                t.center_vox[1]
            );
        }
        s
    }
}

/// Geometry of one tooth in the untilted head frame (mm).
#[derive(Debug, Clone, Copy)]
struct Tooth {
    center: [f64; 2],
    crown_r: f64,
    crown_half_h: f64,
    root_r: f64,
    level: f64,
}

/// Signed-distance edge ramp one voxel wide.
#[inline]
fn coverage(sd: f64, edge: f64) -> f64 {
    (0.5 - sd / edge).clamp(0.0, 1.0)
}

#[inline]
fn blend(v: f64, level: f64, occ: f64) -> f64 {
    if occ <= 0.0 {
        v
    } else {
        v + occ * (level - v)
    }
}

/// Approximate signed distance to an axis-aligned ellipse (negative inside).
#[inline]
fn ellipse_sd(p: [f64; 2], c: [f64; 2], a: f64, b: f64) -> f64 {
    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
    let f = (dx / a).powi(2) + (dy / b).powi(2);
    let g = 2.0 * ((dx / (a * a)).powi(2) + (dy / (b * b)).powi(2)).sqrt();
    if g == 0.0 {
        -a.min(b)
    } else {
        (f - 1.0) / g
    }
}

/// Generate a phantom volume and its ground truth. Deterministic in `(spec, seed)`.
pub fn generate(spec: &PhantomSpec, seed: u64) -> Result<(Volume, PhantomTruth)> {
    spec.validate()?;
    let fov = spec.fov_mm();
    let head = spec.head_semi_axes();
    let levels = spec.levels;
    let ac = spec.arch_center_mm;
    let (aa, ab) = (spec.arch_a_mm, spec.arch_b_mm);
    let half_bone = spec.bone_width_mm / 2.0;

    // jaw must sit inside the head and the volume
    let reach_x = ac[0].abs() + aa + half_bone;
    let reach_y = ac[1].abs() + ab + half_bone;
    if reach_x >= head[0] || reach_y >= head[1] || spec.jaw_z_mm.1 >= fov[2] {
        return Err(PhantomError::DimsTooSmall(format!(
            "jaw reaches ({reach_x:.1}, {reach_y:.1}) mm, z {:.1} mm; head/volume is {:?} mm",
            spec.jaw_z_mm.1, fov
        )));
    }

    let spacing_arc = spec.tooth_spacing_mm();
    let max_width = 2.0 * spec.crown_radius_mm * (1.0 + spec.size_jitter);
    if max_width >= spacing_arc {
        return Err(PhantomError::TeethOverlap {
            spacing: spacing_arc,
            width: max_width,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (z_lo, z_hi) = spec.jaw_z_mm;
    let jaw_h = z_hi - z_lo;
    let maxilla = (z_lo, z_lo + 0.25 * jaw_h);
    let crown_mid = z_lo + 0.40 * jaw_h;
    let crown_half_h = 0.12 * jaw_h;
    let root_span = (z_lo + 0.45 * jaw_h, z_lo + 0.85 * jaw_h);
    let mandible = (z_lo + 0.55 * jaw_h, z_hi);
    let skull_floor = z_lo - 8.0;
    let skull_thickness = 5.0;

    let params = equal_arc_parameters(aa, ab, spec.tooth_count);
    let mut teeth = Vec::new();
    let mut truth_teeth = Vec::new();
    let centre_vox = axial_centre(spec.dims);
    let to_vox = |p: [f64; 2]| {
        [
            centre_vox[0] + p[0] / spec.spacing[0],
            centre_vox[1] + p[1] / spec.spacing[1],
        ]
    };
    for (index, &t) in params.iter().enumerate() {
        let jitter_r = 1.0 + spec.size_jitter * (2.0 * rng.gen::<f64>() - 1.0);
        let jitter_h = 1.0 + spec.size_jitter * (2.0 * rng.gen::<f64>() - 1.0);
        let center = [ac[0] + aa * t.sin(), ac[1] - ab * t.cos()];
        let state = if spec.missing_teeth.contains(&index) {
            ToothState::Missing
        } else if spec.implant_teeth.contains(&index) {
            ToothState::Implant
        } else {
            ToothState::Present
        };
        let crown_r = spec.crown_radius_mm * jitter_r;
        if state != ToothState::Missing {
            teeth.push(Tooth {
                center,
                crown_r,
                crown_half_h: crown_half_h * jitter_h,
                root_r: 0.55 * crown_r,
                level: if state == ToothState::Implant {
                    levels.metal
                } else {
                    levels.enamel
                },
            });
        }
        let tilted = rotate_point(center, [0.0, 0.0], spec.tilt_deg);
        truth_teeth.push(ToothTruth {
            index,
            state,
            arch_deg: t.to_degrees(),
            center_vox: to_vox(tilted),
            crown_radius_mm: crown_r,
        });
    }

    let edge = spec.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    let [nx, ny, nz] = spec.dims;
    let plane = nx * ny;
    let mut raw = vec![0i16; plane * nz];
    let tilt = spec.tilt_deg;
    let (slope, intercept) = (spec.slope, spec.intercept);
    let max_crown = teeth
        .iter()
        .map(|t| t.crown_r)
        .fold(0.0, f64::max);

    raw.par_chunks_mut(plane).enumerate().for_each(|(z, out)| {
        let zm = z as f64 * spec.spacing[2];
        let zc = zm - fov[2] / 2.0;
        let in_jaw = zm > z_lo - edge && zm < z_hi + edge;
        let in_skull = zm < skull_floor + edge;
        for y in 0..ny {
            for x in 0..nx {
                let world = [
                    (x as f64 - centre_vox[0]) * spec.spacing[0],
                    (y as f64 - centre_vox[1]) * spec.spacing[1],
                ];
                // untilted head frame
                let p = rotate_point(world, [0.0, 0.0], -tilt);
                let head_f = (p[0] / head[0]).powi(2) + (p[1] / head[1]).powi(2) + (zc / head[2]).powi(2);
                let head_sd = (head_f.sqrt() - 1.0) * head[0].min(head[1]).min(head[2]);
                let mut v = blend(levels.air, levels.soft_tissue, coverage(head_sd, edge));

                if in_skull {
                    // band just inside the head surface
                    let shell = (head_sd + skull_thickness / 2.0).abs() - skull_thickness / 2.0;
                    let sd = shell.max(zm - skull_floor);
                    v = blend(v, levels.bone, coverage(sd, edge));
                }

                if in_jaw {
                    let arch_sd = ellipse_sd(p, ac, aa, ab);
                    let band = arch_sd.abs() - half_bone;
                    if band < edge {
                        let slab = |(lo, hi): (f64, f64)| (lo - zm).max(zm - hi);
                        let sd = band.max(slab(maxilla).min(slab(mandible)));
                        v = blend(v, levels.bone, coverage(sd, edge));
                    }
                    if arch_sd.abs() < max_crown + edge {
                        for t in &teeth {
                            let (dx, dy) = (p[0] - t.center[0], p[1] - t.center[1]);
                            if dx.abs() > t.crown_r + edge || dy.abs() > t.crown_r + edge {
                                continue;
                            }
                            let rho = dx.hypot(dy);
                            let root_sd = (rho - t.root_r).max((root_span.0 - zm).max(zm - root_span.1));
                            v = blend(v, levels.enamel, coverage(root_sd, edge));
                            let dz = (zm - crown_mid) / t.crown_half_h;
                            let f = (rho / t.crown_r).powi(2) + dz * dz;
                            let crown_sd = (f.sqrt() - 1.0) * t.crown_r.min(t.crown_half_h);
                            v = blend(v, t.level, coverage(crown_sd, edge));
                        }
                    }
                }
                out[y * nx + x] = ((v - intercept) / slope).round() as i16;
            }
        }
    });

    let volume = Volume::new(spec.dims, spec.spacing, raw, slope, intercept)?;
    let truth = PhantomTruth {
        tilt_deg: spec.tilt_deg,
        seed,
        arch_center_vox: to_vox(rotate_point(ac, [0.0, 0.0], tilt)),
        arch_a_vox: aa / spec.spacing[0],
        arch_b_vox: ab / spec.spacing[1],
        teeth: truth_teeth,
        crown_z: (
            (crown_mid - crown_half_h) / spec.spacing[2],
            (crown_mid + crown_half_h) / spec.spacing[2],
        ),
        jaw_z: (z_lo / spec.spacing[2], z_hi / spec.spacing[2]),
    };
    Ok((volume, truth))
}
