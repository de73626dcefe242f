//! Jaw detection on windowed volumes.
//!
//! A coronal MIP and a Gaussian fit to its intensity histogram give the teeth
//! threshold; a second fit to the row profile of the coronal teeth mask gives
//! the axial slice range (ROI). An axial MIP over the ROI is thresholded and
//! cleaned into the jaw mask, whose outline provides the bounding box and the
//! sagittal tilt.

pub mod contour;
pub mod gaussian;
pub mod mip;
pub mod morphology;
pub mod tilt;

use thiserror::Error;

pub use contour::extract_contour;
pub use gaussian::{fit_gaussian, intensity_histogram, roi_slices, teeth_threshold, GaussianFit};
pub use mip::{mip, MipAxis, MipImage};
pub use morphology::{binarize_and_clean, Mask};
pub use tilt::{correct_tilt, estimate_tilt, TiltEstimate};

use crate::geometry::BoundingBox;
use crate::volume::FloatVolume;

#[derive(Error, Debug, PartialEq)]
pub enum JawError {
    #[error("empty slice range {start}..{end} (extent {extent})")]
    EmptyRange {
        start: usize,
        end: usize,
        extent: usize,
    },
    #[error("degenerate histogram: {nonzero} non-zero bins, need at least 3")]
    DegenerateHistogram { nonzero: usize },
    #[error("histogram error: {0}")]
    Histogram(String),
    #[error("ROI collapsed to {a}..{b} after clamping")]
    CollapsedRoi { a: usize, b: usize },
    #[error("mask is empty after cleaning")]
    EmptyMask,
    #[error("contour encloses no area")]
    DegenerateContour,
    #[error("tilt {0} degrees outside (-45, 45)")]
    TiltOutOfRange(f64),
}

pub type Result<T> = std::result::Result<T, JawError>;

/// Number of histogram bins over the windowed `[0, 1]` range.
pub const HISTOGRAM_BINS: usize = 256;
/// Default axial jaw-mask threshold on preprocess-windowed values.
pub const DEFAULT_JAW_THRESHOLD: f64 = 0.05;

/// Detected jaw: outline, bounding box, tilt and axial ROI (`roi_z.0..roi_z.1`).
#[derive(Debug, Clone, PartialEq)]
pub struct JawGeometry {
    pub contour: Vec<[f64; 2]>,
    pub bbox: BoundingBox,
    pub tilt_deg: f64,
    pub tilt_low_confidence: bool,
    pub roi_z: (usize, usize),
}

/// Intermediate products of ROI detection, kept for debug output.
#[derive(Debug, Clone)]
pub struct RoiDetection {
    pub coronal: MipImage,
    pub intensity_fit: GaussianFit,
    pub teeth_threshold: f64,
    pub teeth_mask: Mask,
    pub profile_fit: GaussianFit,
    pub roi_z: (usize, usize),
}

/// Axial ROI from the coronal MIP of a preprocess-windowed volume.
pub fn detect_roi(windowed: &FloatVolume) -> Result<RoiDetection> {
    let coronal = mip(windowed, MipAxis::Coronal, 0..windowed.dims[1])?;
    let (centres, counts) = intensity_histogram(&coronal.image, HISTOGRAM_BINS);
    let intensity_fit = fit_gaussian(&centres, &counts)?;
    let t = teeth_threshold(&intensity_fit);
    let teeth_mask = Mask::threshold(&coronal.image, t).open();
    if teeth_mask.count() == 0 {
        return Err(JawError::EmptyMask);
    }
    let rows: Vec<f64> = (0..teeth_mask.height).map(|z| z as f64).collect();
    let profile: Vec<f64> = (0..teeth_mask.height)
        .map(|z| (0..teeth_mask.width).filter(|&x| teeth_mask.get(x, z)).count() as f64)
        .collect();
    let profile_fit = fit_gaussian(&rows, &profile)?;
    let roi_z = roi_slices(&profile_fit, windowed.dims[2])?;
    Ok(RoiDetection {
        coronal,
        intensity_fit,
        teeth_threshold: t,
        teeth_mask,
        profile_fit,
        roi_z,
    })
}

/// Jaw outline from the axial MIP over `roi_z`.
#[derive(Debug, Clone)]
pub struct Outline {
    pub axial: MipImage,
    pub mask: Mask,
    pub contour: Vec<[f64; 2]>,
    pub bbox: BoundingBox,
    pub tilt: TiltEstimate,
}

pub fn detect_outline(windowed: &FloatVolume, roi_z: (usize, usize), jaw_threshold: f64) -> Result<Outline> {
    let axial = mip(windowed, MipAxis::Axial, roi_z.0..roi_z.1)?;
    let mask = binarize_and_clean(&axial.image, jaw_threshold)?;
    let contour = extract_contour(&mask)?;
    let bbox = BoundingBox::of_points(&contour).ok_or(JawError::EmptyMask)?;
    let tilt = estimate_tilt(&contour)?;
    Ok(Outline {
        axial,
        mask,
        contour,
        bbox,
        tilt,
    })
}

impl JawGeometry {
    pub fn from_outline(outline: &Outline, roi_z: (usize, usize)) -> Self {
        JawGeometry {
            contour: outline.contour.clone(),
            bbox: outline.bbox,
            tilt_deg: outline.tilt.degrees,
            tilt_low_confidence: outline.tilt.low_confidence,
            roi_z,
        }
    }
}
