#![allow(dead_code)]

use std::collections::VecDeque;

use panosynth::config::PipelineConfig;
use panosynth::geometry::RayFan;
use panosynth::phantom::{generate, PhantomSpec, PhantomTruth};
use panosynth::pipeline::{synthesize, Synthesis};
use panosynth::volume::Volume;

pub fn phantom(spec: &PhantomSpec, seed: u64) -> (Volume, PhantomTruth) {
    generate(spec, seed).expect("phantom generation")
}

pub fn run(volume: &Volume) -> Synthesis {
    synthesize(volume, &PipelineConfig::default()).expect("pipeline")
}

/// Column of the ray whose line passes closest to `p`.
pub fn predicted_column(fan: &RayFan, p: [f64; 2]) -> usize {
    fan.rays
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.samples.is_empty())
        .min_by(|a, b| a.1.distance_to(p).total_cmp(&b.1.distance_to(p)))
        .map(|(j, _)| j)
        .unwrap()
}

/// 6-connected components of `inside` within the slab `z0..z1`.
pub fn components_3d(dims: [usize; 3], z0: usize, z1: usize, inside: impl Fn(usize, usize, usize) -> bool) -> usize {
    let [nx, ny, _] = dims;
    let depth = z1 - z0;
    let idx = |x: usize, y: usize, z: usize| ((z - z0) * ny + y) * nx + x;
    let mut seen = vec![false; nx * ny * depth];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for z in z0..z1 {
        for y in 0..ny {
            for x in 0..nx {
                if seen[idx(x, y, z)] || !inside(x, y, z) {
                    continue;
                }
                count += 1;
                seen[idx(x, y, z)] = true;
                queue.push_back((x, y, z));
                while let Some((x, y, z)) = queue.pop_front() {
                    let mut visit = |x: usize, y: usize, z: usize| {
                        if !seen[idx(x, y, z)] && inside(x, y, z) {
                            seen[idx(x, y, z)] = true;
                            queue.push_back((x, y, z));
                        }
                    };
                    if x > 0 { visit(x - 1, y, z) }
                    if x + 1 < nx { visit(x + 1, y, z) }
                    if y > 0 { visit(x, y - 1, z) }
                    if y + 1 < ny { visit(x, y + 1, z) }
                    if z > z0 { visit(x, y, z - 1) }
                    if z + 1 < z1 { visit(x, y, z + 1) }
                }
            }
        }
    }
    count
}
