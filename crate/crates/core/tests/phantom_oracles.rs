mod common;

use common::{components_3d, phantom, run};
use panosynth::jawdetect::tilt::rotate_point;
use panosynth::jawdetect::{detect_outline, detect_roi, DEFAULT_JAW_THRESHOLD};
use panosynth::phantom::{PhantomSpec, ToothState};
use panosynth::volume::WindowSpec;

#[test]
fn one_enamel_component_per_present_tooth() {
    let mut spec = PhantomSpec::standard(256);
    spec.missing_teeth = [3].into_iter().collect();
    let (vol, truth) = phantom(&spec, 5);
    let v = vol.rescale();
    let cut = ((spec.levels.bone + spec.levels.enamel) / 2.0) as f32;
    let z0 = truth.crown_z.0.ceil() as usize;
    let z1 = truth.crown_z.1.floor() as usize;
    let n = components_3d(v.dims, z0, z1, |x, y, z| v.get(x, y, z) >= cut);
    assert_eq!(n, 15);
}

#[test]
fn untilted_jaw_mask_is_mirror_symmetric() {
    let mut spec = PhantomSpec::standard(128);
    spec.size_jitter = 0.0;
    let (vol, _) = phantom(&spec, 1);
    let pre = vol.rescale().window(WindowSpec::PREPROCESS).unwrap();
    let roi = detect_roi(&pre).unwrap();
    let mask = detect_outline(&pre, roi.roi_z, DEFAULT_JAW_THRESHOLD).unwrap().mask;
    let w = mask.width as isize;
    for y in 0..mask.height as isize {
        for x in 0..w {
            if !mask.at(x, y) {
                continue;
            }
            let mx = w - 1 - x;
            let near = (-1..=1).any(|dy| (-1..=1).any(|dx| mask.at(mx + dx, y + dy)));
            assert!(near, "({x},{y}) has no mirror partner within one voxel");
        }
    }
}

#[test]
fn detection_agrees_with_truth() {
    let (vol, truth) = phantom(&PhantomSpec::standard(128), 42);
    let s = run(&vol);

    // ROI covers the crown band
    let (c0, c1) = truth.crown_z;
    let (a, b) = s.roi.roi_z;
    let covered = (b as f64).min(c1) - (a as f64).max(c0);
    assert!(covered >= 0.9 * (c1 - c0), "roi {a}..{b} vs crowns {c0}..{c1}");

    for t in truth.present_teeth() {
        let [x, y] = t.center_vox;
        let (xi, yi) = (x.round() as usize, y.round() as usize);
        assert!(s.outline.mask.get(xi, yi), "tooth {} outside jaw mask", t.index);
        assert!(s.trough.contains(t.center_vox), "tooth {} outside trough", t.index);
        assert!(s.trajectory.form(t.center_vox) < 1.0, "tooth {} outside trajectory", t.index);
    }
    assert_eq!(s.tilt.estimate.degrees, 0.0);
}

#[test]
fn implant_jaw_mask_holds_every_tooth() {
    let mut spec = PhantomSpec::standard(128);
    spec.implant_teeth = [0, 7, 15].into_iter().collect();
    let (vol, truth) = phantom(&spec, 3);
    let pre = vol.rescale().window(WindowSpec::PREPROCESS).unwrap();
    let roi = detect_roi(&pre).unwrap();
    let mask = detect_outline(&pre, roi.roi_z, DEFAULT_JAW_THRESHOLD).unwrap().mask;
    assert_eq!(mask.components().1.len(), 1);
    assert!(truth.teeth.iter().any(|t| t.state == ToothState::Implant));
    for t in truth.present_teeth() {
        let [x, y] = t.center_vox;
        assert!(mask.get(x.round() as usize, y.round() as usize), "tooth {}", t.index);
    }
}

#[test]
fn undoing_tilt_aligns_arch_axis() {
    for tilt in [-20.0, 10.0] {
        let mut spec = PhantomSpec::standard(128);
        spec.tilt_deg = tilt;
        spec.size_jitter = 0.0;
        let (_, truth) = phantom(&spec, 1);
        let centre = truth.arch_center_vox;
        // mirror pairs of teeth straddle the arch axis symmetrically once untilted
        let n = truth.teeth.len();
        for i in 0..n / 2 {
            let p = rotate_point(truth.teeth[i].center_vox, centre, -tilt);
            let q = rotate_point(truth.teeth[n - 1 - i].center_vox, centre, -tilt);
            assert!((p[1] - q[1]).abs() < 1.0, "pair {i}: {p:?} {q:?}");
            assert!(((p[0] - centre[0]) + (q[0] - centre[0])).abs() < 1.0);
        }
    }
}

#[test]
fn phantom_round_trips_through_file() {
    let (vol, _) = phantom(&PhantomSpec::standard(48), 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.pvol");
    panosynth::volume::write_volume(&vol, &path).unwrap();
    assert_eq!(panosynth::volume::load_volume(&path).unwrap(), vol);
}
