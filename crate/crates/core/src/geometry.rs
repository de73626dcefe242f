//! Focal trough, rotation trajectory and the fan of pencil beams.
//!
//! All geometry lives in the axial plane, in voxel coordinates. The anterior
//! direction is `-y`. Ellipses are parametrized from the anterior apex,
//! `p(theta) = (h + a sin theta, k - b cos theta)`, so `theta = 0` is the apex
//! and `theta = -90 / +90` degrees are the lateral extremes at low / high `x`.

use thiserror::Error;

use crate::jawdetect::JawGeometry;

/// Tolerance on the normalized ellipse form for "point lies on ellipse".
pub const ON_ELLIPSE_EPS: f64 = 1e-6;

#[derive(Error, Debug, PartialEq)]
pub enum GeometryError {
    #[error("degenerate bounding box {0:?}")]
    DegenerateBbox(BoundingBox),
    #[error("ellipse half-axes must be positive, got a={a} b={b}")]
    BadAxes { a: f64, b: f64 },
    #[error("point ({x}, {y}) is not on the ellipse (normalized form {form})")]
    NotOnEllipse { x: f64, y: f64, form: f64 },
    #[error("trough thickness must satisfy t_incisor >= t_molar > 0, got {t_incisor} / {t_molar}")]
    BadThickness { t_incisor: f64, t_molar: f64 },
    #[error("trough inner half-axes collapse: a={a} b={b}")]
    InnerCollapsed { a: f64, b: f64 },
    #[error("invalid fan parameters: {0}")]
    BadFan(String),
    #[error("ray fan is empty")]
    EmptyFan,
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a [f64; 2]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bb = BoundingBox {
            x_min: first[0],
            x_max: first[0],
            y_min: first[1],
            y_max: first[1],
        };
        for p in it {
            bb.x_min = bb.x_min.min(p[0]);
            bb.x_max = bb.x_max.max(p[0]);
            bb.y_min = bb.y_min.min(p[1]);
            bb.y_max = bb.y_max.max(p[1]);
        }
        Some(bb)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub h: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
}

/// Slope of a line in the axial plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Finite(f64),
    Vertical,
}

impl Ellipse {
    pub fn new(h: f64, k: f64, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(GeometryError::BadAxes { a, b });
        }
        Ok(Self { h, k, a, b })
    }

    /// Ellipse inscribed in `bbox`: centre at the box centre, half-axes half the box extents.
    pub fn from_bbox(bbox: &BoundingBox) -> Result<Self> {
        let a = (bbox.x_max - bbox.x_min) / 2.0;
        let b = (bbox.y_max - bbox.y_min) / 2.0;
        if !(a > 0.0 && b > 0.0) {
            return Err(GeometryError::DegenerateBbox(*bbox));
        }
        Ok(Self {
            h: (bbox.x_min + bbox.x_max) / 2.0,
            k: (bbox.y_min + bbox.y_max) / 2.0,
            a,
            b,
        })
    }

    /// `(x-h)^2/a^2 + (y-k)^2/b^2`; 1 on the boundary.
    #[inline]
    pub fn form(&self, p: [f64; 2]) -> f64 {
        let dx = (p[0] - self.h) / self.a;
        let dy = (p[1] - self.k) / self.b;
        dx * dx + dy * dy
    }

    pub fn point_at(&self, theta: f64) -> [f64; 2] {
        [self.h + self.a * theta.sin(), self.k - self.b * theta.cos()]
    }

    /// Unit tangent at `theta`, pointing toward increasing `theta`.
    pub fn tangent_at(&self, theta: f64) -> [f64; 2] {
        normalize([self.a * theta.cos(), self.b * theta.sin()])
    }

    /// Unit normal at `theta`, pointing into the ellipse.
    pub fn inward_normal_at(&self, theta: f64) -> [f64; 2] {
        let p = self.point_at(theta);
        normalize([
            -(p[0] - self.h) / (self.a * self.a),
            -(p[1] - self.k) / (self.b * self.b),
        ])
    }

    /// Slope of the tangent at a boundary point: `m = -b^2 (x-h) / (a^2 (y-k))`.
    pub fn tangent_slope(&self, p: [f64; 2]) -> Result<Slope> {
        let form = self.form(p);
        if (form - 1.0).abs() > ON_ELLIPSE_EPS {
            return Err(GeometryError::NotOnEllipse {
                x: p[0],
                y: p[1],
                form,
            });
        }
        let dy = p[1] - self.k;
        if dy == 0.0 {
            return Ok(Slope::Vertical);
        }
        Ok(Slope::Finite(
            -(self.b * self.b) * (p[0] - self.h) / (self.a * self.a * dy),
        ))
    }

    /// Normalized discriminant of the line/ellipse system.
    ///
    /// For `y = m x + c` this is `(a^2 m^2 + b^2 - d^2) / (a^2 m^2 + b^2)` with
    /// `d = c - k + m h`; for a vertical line `x = c` it is `(a^2 - (c-h)^2) / a^2`.
    /// Zero means the line touches the ellipse in exactly one point.
    pub fn tangency_residual(&self, slope: Slope, intercept: f64) -> f64 {
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        match slope {
            Slope::Finite(m) => {
                let d = intercept - self.k + m * self.h;
                let scale = a2 * m * m + b2;
                (scale - d * d) / scale
            }
            Slope::Vertical => {
                let dx = intercept - self.h;
                (a2 - dx * dx) / a2
            }
        }
    }

    /// Parameters `s` where `origin + s * dir` crosses the boundary, ascending.
    pub fn line_crossings(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<(f64, f64)> {
        let ox = (origin[0] - self.h) / self.a;
        let oy = (origin[1] - self.k) / self.b;
        let dx = dir[0] / self.a;
        let dy = dir[1] / self.b;
        let qa = dx * dx + dy * dy;
        let qb = 2.0 * (ox * dx + oy * dy);
        let qc = ox * ox + oy * oy - 1.0;
        let disc = qb * qb - 4.0 * qa * qc;
        if qa == 0.0 || disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // numerically stable pair of roots
        let q = -0.5 * (qb + qb.signum() * sq);
        let (r1, r2) = if q == 0.0 {
            (-sq / (2.0 * qa), sq / (2.0 * qa))
        } else {
            (q / qa, qc / q)
        };
        Some((r1.min(r2), r1.max(r2)))
    }

    pub fn mirrored_x(&self, axis_x: f64) -> Ellipse {
        Ellipse {
            h: 2.0 * axis_x - self.h,
            ..*self
        }
    }
}

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Rotation trajectory fitted to the jaw bounding box.
pub fn build_trajectory(jaw: &JawGeometry) -> Result<Ellipse> {
    Ellipse::from_bbox(&jaw.bbox)
}

/// Elliptical annulus confining every beam sample.
///
/// The anterior apex lies on the b-axis, so padding the b half-axis sets the
/// incisor thickness and padding the a half-axis sets the molar thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalTrough {
    pub inner: Ellipse,
    pub outer: Ellipse,
    pub t_incisor: f64,
    pub t_molar: f64,
}

impl FocalTrough {
    pub fn around(base: &Ellipse, t_incisor: f64, t_molar: f64) -> Result<Self> {
        if !(t_molar > 0.0 && t_incisor >= t_molar && t_incisor.is_finite()) {
            return Err(GeometryError::BadThickness { t_incisor, t_molar });
        }
        let inner_a = base.a - t_molar / 2.0;
        let inner_b = base.b - t_incisor / 2.0;
        if !(inner_a > 0.0 && inner_b > 0.0) {
            return Err(GeometryError::InnerCollapsed {
                a: inner_a,
                b: inner_b,
            });
        }
        Ok(Self {
            inner: Ellipse {
                a: inner_a,
                b: inner_b,
                ..*base
            },
            outer: Ellipse {
                a: base.a + t_molar / 2.0,
                b: base.b + t_incisor / 2.0,
                ..*base
            },
            t_incisor,
            t_molar,
        })
    }

    /// Boundary-inclusive: inside (or on) the outer ellipse and outside (or on) the inner.
    #[inline]
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.outer.form(p) <= 1.0 && self.inner.form(p) >= 1.0
    }
}

pub fn build_trough(jaw: &JawGeometry, t_incisor: f64, t_molar: f64) -> Result<FocalTrough> {
    FocalTrough::around(&Ellipse::from_bbox(&jaw.bbox)?, t_incisor, t_molar)
}

/// How a beam is laid through its tangent point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeamMode {
    /// Beam along the inward normal, crossing the trough wall at the tangent point.
    #[default]
    Normal,
    /// Beam along the tangent line itself.
    Tangent,
}

impl std::str::FromStr for BeamMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "normal" => Ok(BeamMode::Normal),
            "tangent" => Ok(BeamMode::Tangent),
            other => Err(format!("unknown beam mode {other:?} (expected normal|tangent)")),
        }
    }
}

impl std::fmt::Display for BeamMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BeamMode::Normal => "normal",
            BeamMode::Tangent => "tangent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    /// Trajectory parameter of the tangent point, degrees from the anterior apex.
    pub theta_deg: f64,
    pub tangent_point: [f64; 2],
    pub slope: Slope,
    /// Unit tangent of the trajectory at the tangent point.
    pub tangent: [f64; 2],
    /// Unit direction of travel of the beam.
    pub direction: [f64; 2],
    /// In-trough sample points, in travel order, `delta` apart.
    pub samples: Vec<[f64; 2]>,
}

impl Ray {
    /// Line intercept `c` of the tangent line, or its `x` when vertical.
    pub fn tangent_intercept(&self) -> f64 {
        match self.slope {
            Slope::Finite(m) => self.tangent_point[1] - m * self.tangent_point[0],
            Slope::Vertical => self.tangent_point[0],
        }
    }

    /// Perpendicular distance from `p` to the beam line.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.tangent_point[0];
        let dy = p[1] - self.tangent_point[1];
        (dx * self.direction[1] - dy * self.direction[0]).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayFan {
    /// Ordered low-x posterior end, through the apex, to the high-x posterior end.
    pub rays: Vec<Ray>,
    pub delta: f64,
    pub mode: BeamMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanParams {
    pub sweep_deg: f64,
    pub shift_min_deg: f64,
    pub shift_max_deg: f64,
    /// Sample spacing along each beam, voxels.
    pub delta: f64,
    pub mode: BeamMode,
}

impl Default for FanParams {
    fn default() -> Self {
        Self {
            sweep_deg: 180.0,
            shift_min_deg: 0.4,
            shift_max_deg: 0.8,
            delta: 0.5,
            mode: BeamMode::Normal,
        }
    }
}

impl FanParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GeometryError::BadFan(m.to_string()));
        if !(self.sweep_deg > 0.0 && self.sweep_deg <= 180.0) {
            return bad("sweep must lie in (0, 180] degrees");
        }
        if !(self.shift_min_deg > 0.0 && self.shift_min_deg <= self.shift_max_deg) {
            return bad("shifts must satisfy 0 < shift_min <= shift_max");
        }
        if !(self.shift_max_deg.is_finite() && self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        Ok(())
    }
}

/// Tangent-point parameters in degrees, ascending, symmetric about the apex.
///
/// The step between neighbours grows linearly with `|theta|`, from
/// `shift_min` at the apex to `shift_max` at `sweep / 2`.
pub fn fan_parameters(params: &FanParams) -> Result<Vec<f64>> {
    params.validate()?;
    let half = params.sweep_deg / 2.0;
    let step = |theta: f64| {
        params.shift_min_deg + (params.shift_max_deg - params.shift_min_deg) * theta / half
    };
    let mut side = Vec::new();
    let mut theta = 0.0f64;
    loop {
        let next = theta + step(theta);
        if next > half + 1e-9 {
            break;
        }
        side.push(next);
        theta = next;
    }
    let mut all: Vec<f64> = side.iter().rev().map(|t| -t).collect();
    all.push(0.0);
    all.extend(side);
    Ok(all)
}

pub fn build_ray_fan(traj: &Ellipse, trough: &FocalTrough, params: &FanParams) -> Result<RayFan> {
    let thetas = fan_parameters(params)?;
    if thetas.len() < 2 {
        return Err(GeometryError::EmptyFan);
    }
    let rays = thetas
        .into_iter()
        .map(|deg| build_ray(traj, trough, deg, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(RayFan {
        rays,
        delta: params.delta,
        mode: params.mode,
    })
}

fn build_ray(traj: &Ellipse, trough: &FocalTrough, theta_deg: f64, params: &FanParams) -> Result<Ray> {
    let theta = theta_deg.to_radians();
    let p = traj.point_at(theta);
    // the parametrized point sits on the ellipse up to rounding
    let slope = traj.tangent_slope(p)?;
    let tangent = traj.tangent_at(theta);
    let direction = match params.mode {
        BeamMode::Normal => traj.inward_normal_at(theta),
        BeamMode::Tangent => tangent,
    };
    let samples = trough_samples(trough, p, direction, params.delta, params.mode);
    Ok(Ray {
        theta_deg,
        tangent_point: p,
        slope,
        tangent,
        direction,
        samples,
    })
}

/// Points `p + j*delta*dir` inside the trough, in travel order.
///
/// Normal beams keep only the first in-trough run along the direction of
/// travel (the trough wall at the tangent point), never the far wall.
fn trough_samples(
    trough: &FocalTrough,
    p: [f64; 2],
    dir: [f64; 2],
    delta: f64,
    mode: BeamMode,
) -> Vec<[f64; 2]> {
    let Some((s0, s1)) = trough.outer.line_crossings(p, dir) else {
        return Vec::new();
    };
    let j0 = (s0 / delta).ceil() as i64;
    let j1 = (s1 / delta).floor() as i64;
    let mut out = Vec::new();
    let mut in_run = false;
    for j in j0..=j1 {
        let s = j as f64 * delta;
        let q = [p[0] + s * dir[0], p[1] + s * dir[1]];
        if trough.contains(q) {
            out.push(q);
            in_run = true;
        } else if in_run && mode == BeamMode::Normal {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn bbox(x0: f64, x1: f64, y0: f64, y1: f64) -> BoundingBox {
        BoundingBox {
            x_min: x0,
            x_max: x1,
            y_min: y0,
            y_max: y1,
        }
    }

    #[test]
    fn trajectory_from_bbox() {
        let e = Ellipse::from_bbox(&bbox(0.0, 100.0, 0.0, 60.0)).unwrap();
        assert_eq!(e, Ellipse { h: 50.0, k: 30.0, a: 50.0, b: 30.0 });
        let sq = Ellipse::from_bbox(&bbox(10.0, 50.0, -5.0, 35.0)).unwrap();
        assert_eq!(sq.a, sq.b);
        assert!(matches!(
            Ellipse::from_bbox(&bbox(0.0, 0.0, 0.0, 10.0)),
            Err(GeometryError::DegenerateBbox(_))
        ));
    }

    #[test]
    fn slope_examples() {
        let r = 3.0;
        let c = Ellipse::new(0.0, 0.0, r, r).unwrap();
        assert_eq!(c.tangent_slope([0.0, r]).unwrap(), Slope::Finite(0.0));
        match c.tangent_slope([r * FRAC_1_SQRT_2, r * FRAC_1_SQRT_2]).unwrap() {
            Slope::Finite(m) => assert!((m + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let e = Ellipse::new(2.0, -1.0, 5.0, 3.0).unwrap();
        assert_eq!(e.tangent_slope([7.0, -1.0]).unwrap(), Slope::Vertical);
        assert!(matches!(
            e.tangent_slope([2.0, -1.0]),
            Err(GeometryError::NotOnEllipse { .. })
        ));
    }

    #[test]
    fn trough_padding() {
        let base = Ellipse::new(0.0, 0.0, 50.0, 30.0).unwrap();
        let t = FocalTrough::around(&base, 10.0, 10.0).unwrap();
        assert_eq!((t.outer.a, t.outer.b), (55.0, 35.0));
        assert_eq!((t.inner.a, t.inner.b), (45.0, 25.0));

        let t = FocalTrough::around(&base, 12.0, 6.0).unwrap();
        // apex gap along the b-axis, lateral gap along the a-axis
        assert_eq!(t.outer.b - t.inner.b, 12.0);
        assert_eq!(t.outer.a - t.inner.a, 6.0);

        assert!(FocalTrough::around(&base, 5.0, 6.0).is_err());
        assert!(FocalTrough::around(&base, 0.0, 0.0).is_err());
        assert!(matches!(
            FocalTrough::around(&base, 70.0, 6.0),
            Err(GeometryError::InnerCollapsed { .. })
        ));
    }

    #[test]
    fn membership_examples() {
        let base = Ellipse::new(10.0, 20.0, 50.0, 30.0).unwrap();
        let t = FocalTrough::around(&base, 10.0, 10.0).unwrap();
        assert!(!t.contains([10.0, 20.0]));
        assert!(t.contains([65.0, 20.0]));
        assert!(t.contains([10.0, 20.0 - 35.0]));
        assert!(!t.contains([500.0, 500.0]));
    }

    #[test]
    fn uniform_sweep_counts() {
        let p = FanParams {
            sweep_deg: 180.0,
            shift_min_deg: 1.0,
            shift_max_deg: 1.0,
            ..FanParams::default()
        };
        let thetas = fan_parameters(&p).unwrap();
        assert_eq!(thetas.len(), 181);
        assert_eq!(thetas[0], -90.0);
        assert_eq!(thetas[180], 90.0);
    }

    #[test]
    fn variable_shift_is_denser_at_apex() {
        let thetas = fan_parameters(&FanParams::default()).unwrap();
        let mid = thetas.len() / 2;
        assert_eq!(thetas[mid], 0.0);
        let apex_step = thetas[mid + 1] - thetas[mid];
        let end_step = thetas[thetas.len() - 1] - thetas[thetas.len() - 2];
        assert!((apex_step - 0.4).abs() < 1e-12);
        assert!(end_step > 0.75 && end_step <= 0.8 + 1e-12);
        assert!(thetas.windows(2).all(|w| w[1] > w[0]));
        assert!(*thetas.last().unwrap() <= 90.0 + 1e-9);
    }

    #[test]
    fn bad_fan_params() {
        for p in [
            FanParams { sweep_deg: 0.0, ..FanParams::default() },
            FanParams { sweep_deg: 181.0, ..FanParams::default() },
            FanParams { shift_min_deg: 0.9, ..FanParams::default() },
            FanParams { shift_min_deg: 0.0, ..FanParams::default() },
            FanParams { delta: 0.0, ..FanParams::default() },
        ] {
            assert!(fan_parameters(&p).is_err(), "{p:?}");
        }
    }

    #[test]
    fn circle_tangents_rotate_by_shift() {
        let c = Ellipse::new(64.0, 64.0, 40.0, 40.0).unwrap();
        let trough = FocalTrough::around(&c, 8.0, 8.0).unwrap();
        let p = FanParams {
            sweep_deg: 120.0,
            shift_min_deg: 2.0,
            shift_max_deg: 2.0,
            delta: 0.5,
            mode: BeamMode::Tangent,
        };
        let fan = build_ray_fan(&c, &trough, &p).unwrap();
        for w in fan.rays.windows(2) {
            let a0 = w[0].tangent[1].atan2(w[0].tangent[0]);
            let a1 = w[1].tangent[1].atan2(w[1].tangent[0]);
            assert!(((a1 - a0).to_degrees() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn samples_are_in_trough_and_evenly_spaced() {
        let traj = Ellipse::new(60.0, 70.0, 35.0, 50.0).unwrap();
        let trough = FocalTrough::around(&traj, 14.0, 9.0).unwrap();
        for mode in [BeamMode::Normal, BeamMode::Tangent] {
            let p = FanParams { mode, ..FanParams::default() };
            let fan = build_ray_fan(&traj, &trough, &p).unwrap();
            for ray in &fan.rays {
                assert!(!ray.samples.is_empty());
                assert!(ray.samples.iter().all(|&s| trough.contains(s)));
                for w in ray.samples.windows(2) {
                    let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
                    assert!((d - p.delta).abs() < 1e-9);
                }
                let resid = traj.tangency_residual(ray.slope, ray.tangent_intercept());
                assert!(resid.abs() < 1e-6, "{resid}");
            }
        }
    }

    #[test]
    fn normal_beams_cross_near_wall_only() {
        let traj = Ellipse::new(0.0, 0.0, 30.0, 40.0).unwrap();
        let trough = FocalTrough::around(&traj, 10.0, 6.0).unwrap();
        let fan = build_ray_fan(&traj, &trough, &FanParams::default()).unwrap();
        let apex = &fan.rays[fan.rays.len() / 2];
        assert_eq!(apex.theta_deg, 0.0);
        // apex wall spans y in [-45, -35]: 10 voxels at 0.5 spacing
        assert_eq!(apex.samples.len(), 21);
        assert!(apex.samples.iter().all(|s| s[1] < 0.0));
    }

    #[test]
    fn fan_mirror_symmetry() {
        let traj = Ellipse::new(50.0, 60.0, 30.0, 45.0).unwrap();
        let trough = FocalTrough::around(&traj, 12.0, 8.0).unwrap();
        let fan = build_ray_fan(&traj, &trough, &FanParams::default()).unwrap();
        let m_traj = traj.mirrored_x(50.0);
        let m_trough = FocalTrough::around(&m_traj, 12.0, 8.0).unwrap();
        let mfan = build_ray_fan(&m_traj, &m_trough, &FanParams::default()).unwrap();
        let n = fan.rays.len();
        for (i, ray) in fan.rays.iter().enumerate() {
            let mirror = &mfan.rays[n - 1 - i];
            assert_eq!(ray.samples.len(), mirror.samples.len());
            for (s, t) in ray.samples.iter().zip(&mirror.samples) {
                assert!((s[0] - (100.0 - t[0])).abs() < fan.delta / 2.0);
                assert!((s[1] - t[1]).abs() < fan.delta / 2.0);
            }
        }
    }
}
