use proptest::prelude::*;

use panosynth::config::PipelineConfig;
use panosynth::geometry::{build_ray_fan, BeamMode, Ellipse, FanParams, FocalTrough, Slope};
use panosynth::image::Image;
use panosynth::jawdetect::contour::{perimeter, signed_area};
use panosynth::jawdetect::tilt::rotate_point;
use panosynth::jawdetect::{
    estimate_tilt, extract_contour, mip, roi_slices, teeth_threshold, GaussianFit, Mask, MipAxis,
};
use panosynth::metrics::ssim;
use panosynth::render::{render_panorama, transmittance, RenderParams};
use panosynth::volume::FloatVolume;

fn fit(mu: f64, sigma: f64) -> GaussianFit {
    GaussianFit {
        mu,
        sigma,
        amplitude: 1.0,
        residual: 0.0,
        converged: true,
    }
}

fn arb_ellipse() -> impl Strategy<Value = Ellipse> {
    (-50.0f64..50.0, -50.0f64..50.0, 5.0f64..80.0, 5.0f64..80.0)
        .prop_map(|(h, k, a, b)| Ellipse::new(h, k, a, b).unwrap())
}

fn arb_float_volume(max: usize) -> impl Strategy<Value = FloatVolume> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(|(nx, ny, nz)| {
        prop::collection::vec(-1000.0f32..1000.0, nx * ny * nz).prop_map(move |data| FloatVolume {
            dims: [nx, ny, nz],
            spacing: [1.0; 3],
            data,
        })
    })
}

fn arb_image(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(0.0f64..1.0, w * h).prop_map(move |d| Image::new(w, h, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_and_roi_are_affine(mu in -500.0f64..500.0, sigma in 0.01f64..100.0, nz in 2usize..400) {
        prop_assert_eq!(teeth_threshold(&fit(mu, sigma)), mu + 2.0 * sigma);
        let last = (nz - 1) as f64;
        let a = (mu - 2.5 * sigma).round().clamp(0.0, last) as usize;
        let b = (mu + 1.5 * sigma).round().clamp(0.0, last) as usize;
        match roi_slices(&fit(mu, sigma), nz) {
            Ok(r) => prop_assert_eq!(r, (a, b)),
            Err(_) => prop_assert!(a >= b),
        }
    }

    #[test]
    fn tangent_lines_touch_once(e in arb_ellipse(), theta in -3.1f64..3.1) {
        let p = e.point_at(theta);
        let slope = e.tangent_slope(p).unwrap();
        let c = match slope {
            Slope::Finite(m) => p[1] - m * p[0],
            Slope::Vertical => p[0],
        };
        prop_assert!(e.tangency_residual(slope, c).abs() < 1e-6);
    }

    #[test]
    fn fan_is_ordered_and_confined(
        e in arb_ellipse(),
        sweep in 10.0f64..=180.0,
        smin in 0.3f64..2.0,
        extra in 0.0f64..2.0,
        delta in 0.25f64..1.5,
        tangent in any::<bool>(),
    ) {
        let t_m = 0.2 * e.a.min(e.b);
        let trough = FocalTrough::around(&e, t_m * 1.5, t_m).unwrap();
        let params = FanParams {
            sweep_deg: sweep,
            shift_min_deg: smin,
            shift_max_deg: smin + extra,
            delta,
            mode: if tangent { BeamMode::Tangent } else { BeamMode::Normal },
        };
        let fan = build_ray_fan(&e, &trough, &params).unwrap();
        for w in fan.rays.windows(2) {
            prop_assert!(w[1].theta_deg > w[0].theta_deg);
        }
        for ray in &fan.rays {
            for &q in &ray.samples {
                prop_assert!(trough.contains(q));
            }
            if !tangent {
                for w in ray.samples.windows(2) {
                    let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
                    prop_assert!((d - delta).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn mip_is_axis_max(v in arb_float_volume(6), coronal in any::<bool>(), cut in 0.0f64..1.0) {
        let [nx, ny, nz] = v.dims;
        if coronal {
            let m = mip(&v, MipAxis::Coronal, 0..ny).unwrap();
            for z in 0..nz {
                for x in 0..nx {
                    let brute = (0..ny).map(|y| v.get(x, y, z)).fold(f32::NEG_INFINITY, f32::max);
                    prop_assert_eq!(m.image.get(x, z), brute as f64);
                }
            }
        } else {
            let z0 = ((nz as f64 * cut) as usize).min(nz - 1);
            let m = mip(&v, MipAxis::Axial, z0..nz).unwrap();
            for y in 0..ny {
                for x in 0..nx {
                    let brute = (z0..nz).map(|z| v.get(x, y, z)).fold(f32::NEG_INFINITY, f32::max);
                    prop_assert_eq!(m.image.get(x, y), brute as f64);
                }
            }
        }
    }

    #[test]
    fn contour_is_closed_and_area_within_perimeter(
        cx in 8.0f64..24.0, cy in 8.0f64..24.0, rx in 2.0f64..7.0, ry in 2.0f64..7.0, wobble in 0.0f64..0.3,
    ) {
        let mut m = Mask::empty(32, 32);
        for y in 0..32 {
            for x in 0..32 {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let r = 1.0 + wobble * (3.0 * dy.atan2(dx)).sin();
                m.set(x, y, dx * dx + dy * dy <= r * r);
            }
        }
        let m = m.largest_component();
        prop_assume!(m.count() > 0);
        let c = extract_contour(&m).unwrap();
        prop_assert_eq!(c.first(), c.last());
        let area = signed_area(&c).abs();
        prop_assert!((area - m.count() as f64).abs() <= perimeter(&c));
    }

    #[test]
    fn tilt_follows_rotation(deg in -40.0f64..40.0) {
        let mut m = Mask::empty(121, 121);
        let c = 60.0;
        for y in 0..121 {
            for x in 0..121 {
                let p = rotate_point([x as f64, y as f64], [c, c], -deg);
                let (dx, dy) = ((p[0] - c) / 22.0, (p[1] - c) / 45.0);
                m.set(x, y, dx * dx + dy * dy <= 1.0);
            }
        }
        let est = estimate_tilt(&extract_contour(&m).unwrap()).unwrap();
        prop_assert!((est.degrees - deg).abs() < 1.0);
    }

    #[test]
    fn transmittance_ignores_sample_order(
        samples in prop::collection::vec(0.0f64..1.0, 0..400),
        beta in 0.01f64..2.0,
        delta in 0.1f64..2.0,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let t = transmittance(&samples, beta, delta);
        prop_assert!(t > 0.0 && t <= 1.0);
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((transmittance(&shuffled, beta, delta) - t).abs() < 1e-12);
    }

    #[test]
    fn brighter_volume_never_darkens_panorama(
        base in prop::collection::vec(0.0f32..0.5, 24 * 24 * 3),
        bump in prop::collection::vec(0.0f32..0.5, 24 * 24 * 3),
    ) {
        let dims = [24, 24, 3];
        let a = FloatVolume { dims, spacing: [1.0; 3], data: base.clone() };
        let b = FloatVolume {
            dims,
            spacing: [1.0; 3],
            data: base.iter().zip(&bump).map(|(x, d)| x + d).collect(),
        };
        let e = Ellipse::new(11.5, 11.5, 8.0, 10.0).unwrap();
        let trough = FocalTrough::around(&e, 6.0, 4.0).unwrap();
        let fan = build_ray_fan(&e, &trough, &FanParams::default()).unwrap();
        let params = RenderParams::default();
        let pa = render_panorama(&a, &fan, &trough, (0, 3), &params).image;
        let pb = render_panorama(&b, &fan, &trough, (0, 3), &params).image;
        for (x, y) in pa.data.iter().zip(&pb.data) {
            prop_assert!((0.0..1.0).contains(x));
            prop_assert!(y >= x);
        }
    }

    #[test]
    fn ssim_is_symmetric(a in arb_image(12, 10), b in arb_image(12, 10)) {
        prop_assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn config_text_round_trips(
        beta in 0.001f64..5.0,
        sweep in 1.0f64..=180.0,
        t_m in 1.0f64..20.0,
        extra in 0.0f64..10.0,
        correct in any::<bool>(),
    ) {
        let cfg = PipelineConfig {
            beta,
            sweep_deg: sweep,
            trough_molar_mm: t_m,
            trough_incisor_mm: t_m + extra,
            tilt_correct: correct,
            ..PipelineConfig::default()
        };
        prop_assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }
}
