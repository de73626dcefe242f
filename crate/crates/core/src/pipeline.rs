//! End-to-end synthesis: volume in, panorama out.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info, warn};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::geometry::{build_ray_fan, build_trajectory, build_trough, Ellipse, FocalTrough, RayFan};
use crate::image::Image;
use crate::jawdetect::{
    correct_tilt, detect_outline, detect_roi, JawGeometry, Outline, RoiDetection, TiltEstimate,
};
use crate::render::{render_panorama, Panorama};
use crate::volume::{load_volume, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Window,
    Roi,
    Outline,
    Tilt,
    Trough,
    Trajectory,
    Fan,
    Render,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Window => "window",
            Stage::Roi => "roi",
            Stage::Outline => "outline",
            Stage::Tilt => "tilt",
            Stage::Trough => "trough",
            Stage::Trajectory => "trajectory",
            Stage::Fan => "fan",
            Stage::Render => "render",
            Stage::Write => "write",
        })
    }
}

#[derive(Error, Debug)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    fn at(stage: Stage, e: impl std::error::Error + Send + Sync + 'static) -> Self {
        PipelineError {
            stage,
            source: Box::new(e),
        }
    }

    /// Config problems are caller mistakes, not stage failures.
    pub fn is_validation(&self) -> bool {
        self.stage == Stage::Config
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::at(Stage::Config, e)
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| PipelineError::at(stage, e))
    }
}

/// Tilt found in the jaw outline and what was done about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltReport {
    pub estimate: TiltEstimate,
    pub corrected: bool,
    /// Tilt of the outline after correction (equals the estimate when uncorrected).
    pub residual_deg: f64,
}

/// Everything the pipeline computed, for inspection and tests.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub roi: RoiDetection,
    /// Outline used for the geometry (after tilt correction when applied).
    pub outline: Outline,
    pub tilt: TiltReport,
    pub jaw: JawGeometry,
    pub trough: FocalTrough,
    pub trajectory: Ellipse,
    pub fan: RayFan,
    pub panorama: Panorama,
}

/// Writes `NN_stage.pgm` files when a debug directory is configured.
struct DebugSink {
    dir: Option<PathBuf>,
    next: usize,
}

impl DebugSink {
    fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).stage(Stage::Write)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            next: 1,
        })
    }

    fn enabled(&self) -> bool {
        self.dir.is_some()
    }

    fn dump(&mut self, name: &str, img: &Image) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(format!("{:02}_{name}.pgm", self.next));
        self.next += 1;
        debug!("debug dump {}", path.display());
        img.write_pgm(&path, 8).stage(Stage::Write)
    }
}

fn timed<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let out = f();
    info!("{stage}: {:.3} s", t0.elapsed().as_secs_f64());
    out
}

/// Run every stage on an in-memory volume. Debug dumps follow `cfg.debug_dir`.
pub fn synthesize(volume: &Volume, cfg: &PipelineConfig) -> Result<Synthesis> {
    cfg.validate()?;
    let mut sink = DebugSink::new(cfg.debug_dir.as_deref())?;

    let (rescaled, pre) = timed(Stage::Window, || {
        let rescaled = volume.rescale();
        let pre = rescaled.window(cfg.preprocess_window).stage(Stage::Window)?;
        Ok((rescaled, pre))
    })?;

    let roi = timed(Stage::Roi, || detect_roi(&pre).stage(Stage::Roi))?;
    sink.dump("coronal_mip", &roi.coronal.image)?;
    sink.dump("teeth_mask", &roi.teeth_mask.to_image())?;
    info!(
        "teeth threshold {:.4} (mu {:.4}, sigma {:.4}); roi z {}..{}",
        roi.teeth_threshold, roi.intensity_fit.mu, roi.intensity_fit.sigma, roi.roi_z.0, roi.roi_z.1
    );

    let outline = match timed(Stage::Outline, || {
        detect_outline(&pre, roi.roi_z, cfg.jaw_threshold).stage(Stage::Outline)
    }) {
        Ok(o) => o,
        Err(e) => {
            // diagnostic dump of the projection that produced no jaw
            if sink.enabled() {
                if let Ok(axial) = crate::jawdetect::mip(&pre, crate::jawdetect::MipAxis::Axial, roi.roi_z.0..roi.roi_z.1) {
                    sink.dump("axial_mip_failed", &axial.image)?;
                }
            }
            return Err(e);
        }
    };
    sink.dump("axial_mip", &outline.axial.image)?;
    sink.dump("jaw_mask", &outline.mask.to_image())?;
    sink.dump("contour", &contour_overlay(&outline))?;
    let estimate = outline.tilt;
    info!(
        "tilt {:.3} deg (eigen ratio {:.3}{})",
        estimate.degrees,
        estimate.eigen_ratio,
        if estimate.low_confidence { ", low confidence" } else { "" }
    );

    let mut render_source = rescaled;
    let (outline, tilt) = if !cfg.tilt_correct || estimate.degrees == 0.0 {
        let residual = estimate.degrees;
        (outline, TiltReport { estimate, corrected: false, residual_deg: residual })
    } else if estimate.low_confidence {
        warn!("tilt estimate is low confidence; skipping correction");
        (outline, TiltReport { estimate, corrected: false, residual_deg: estimate.degrees })
    } else {
        timed(Stage::Tilt, || {
            let (air, _) = render_source.min_max();
            render_source = correct_tilt(&render_source, estimate.degrees, air).stage(Stage::Tilt)?;
            let pre = render_source.window(cfg.preprocess_window).stage(Stage::Tilt)?;
            let corrected = detect_outline(&pre, roi.roi_z, cfg.jaw_threshold).stage(Stage::Tilt)?;
            let residual = corrected.tilt.degrees;
            info!("residual tilt after correction {residual:.3} deg");
            Ok((corrected, TiltReport { estimate, corrected: true, residual_deg: residual }))
        })?
    };
    if tilt.corrected {
        sink.dump("corrected_axial_mip", &outline.axial.image)?;
        sink.dump("corrected_jaw_mask", &outline.mask.to_image())?;
    }
    drop(pre);

    let jaw = JawGeometry::from_outline(&outline, roi.roi_z);
    let sx = volume.spacing[0];
    let trough = timed(Stage::Trough, || {
        build_trough(&jaw, cfg.trough_incisor_mm / sx, cfg.trough_molar_mm / sx).stage(Stage::Trough)
    })?;
    let trajectory = timed(Stage::Trajectory, || build_trajectory(&jaw).stage(Stage::Trajectory))?;
    let fan = timed(Stage::Fan, || {
        build_ray_fan(&trajectory, &trough, &cfg.fan_params()).stage(Stage::Fan)
    })?;
    info!("{} rays, {} beam mode", fan.rays.len(), fan.mode);
    sink.dump("geometry", &geometry_overlay(&outline, &trough, &trajectory, &fan))?;

    let params = cfg.render_params();
    let panorama = timed(Stage::Render, || {
        let windowed = render_source.window(params.render_window).stage(Stage::Render)?;
        drop(render_source);
        Ok(render_panorama(&windowed, &fan, &trough, roi.roi_z, &params))
    })?;
    sink.dump("panorama", &panorama.image)?;

    Ok(Synthesis {
        roi,
        outline,
        tilt,
        jaw,
        trough,
        trajectory,
        fan,
        panorama,
    })
}

/// Load `cfg.input`, synthesize, and write `cfg.output` plus its provenance sidecar.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Synthesis> {
    cfg.validate()?;
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("no input volume given".into()))?;
    let output = cfg
        .output
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("no output path given".into()))?;
    let volume = timed(Stage::Load, || load_volume(input).stage(Stage::Load))?;
    info!(
        "loaded {} ({}x{}x{}, spacing {:?})",
        input.display(),
        volume.dims[0],
        volume.dims[1],
        volume.dims[2],
        volume.spacing
    );
    let synthesis = synthesize(&volume, cfg)?;
    timed(Stage::Write, || {
        write_outputs(&synthesis, cfg, output).stage(Stage::Write)
    })?;
    Ok(synthesis)
}

fn write_outputs(s: &Synthesis, cfg: &PipelineConfig, output: &Path) -> std::result::Result<(), crate::image::ImageError> {
    s.panorama.image.write_pgm(output, cfg.bits)?;
    if cfg.png {
        s.panorama.image.write_png(output.with_extension("png"), cfg.bits)?;
    }
    std::fs::write(sidecar_path(output), provenance(s, cfg))?;
    Ok(())
}

/// `<output>.txt`: config snapshot followed by detected geometry.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".txt");
    PathBuf::from(name)
}

pub fn provenance(s: &Synthesis, cfg: &PipelineConfig) -> String {
    use std::fmt::Write as _;
    let mut t = cfg.to_text();
    let b = &s.jaw.bbox;
    let _ = writeln!(t, "result.width={}", s.panorama.image.width);
    let _ = writeln!(t, "result.height={}", s.panorama.image.height);
    let _ = writeln!(t, "result.roi_z={},{}", s.roi.roi_z.0, s.roi.roi_z.1);
    let _ = writeln!(t, "result.teeth_threshold={:?}", s.roi.teeth_threshold);
    let _ = writeln!(t, "result.tilt_deg={:?}", s.tilt.estimate.degrees);
    let _ = writeln!(t, "result.tilt_corrected={}", s.tilt.corrected);
    let _ = writeln!(t, "result.residual_tilt_deg={:?}", s.tilt.residual_deg);
    let _ = writeln!(t, "result.bbox={:?},{:?},{:?},{:?}", b.x_min, b.x_max, b.y_min, b.y_max);
    let _ = writeln!(t, "result.rays={}", s.fan.rays.len());
    t
}

fn contour_overlay(outline: &Outline) -> Image {
    let mut img = outline.axial.image.clone();
    for v in img.data.iter_mut() {
        *v *= 0.5;
    }
    for p in &outline.contour {
        img.set(p[0] as usize, p[1] as usize, 1.0);
    }
    img
}

fn plot(img: &mut Image, p: [f64; 2], v: f64) {
    let (x, y) = (p[0].round(), p[1].round());
    if x >= 0.0 && y >= 0.0 && (x as usize) < img.width && (y as usize) < img.height {
        img.set(x as usize, y as usize, v);
    }
}

fn draw_ellipse(img: &mut Image, e: &Ellipse, v: f64) {
    let n = (8.0 * (e.a + e.b)).ceil() as usize;
    for i in 0..n {
        plot(img, e.point_at(i as f64 / n as f64 * std::f64::consts::TAU), v);
    }
}

/// Axial MIP with trough walls, trajectory and every tenth beam drawn in.
fn geometry_overlay(outline: &Outline, trough: &FocalTrough, traj: &Ellipse, fan: &RayFan) -> Image {
    let mut img = outline.axial.image.clone();
    for v in img.data.iter_mut() {
        *v *= 0.4;
    }
    for ray in fan.rays.iter().step_by(10) {
        for &p in &ray.samples {
            plot(&mut img, p, 0.6);
        }
    }
    draw_ellipse(&mut img, &trough.inner, 0.8);
    draw_ellipse(&mut img, &trough.outer, 0.8);
    draw_ellipse(&mut img, traj, 1.0);
    img
}
