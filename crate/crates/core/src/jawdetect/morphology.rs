//! Binary masks: thresholding, 3x3 opening/closing, hole filling, components.

use std::collections::VecDeque;

use super::{JawError, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

const NEIGHBOURS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];
const NEIGHBOURS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn threshold(img: &Image, t: f64) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v >= t).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Value at a signed position; outside the image is background.
    #[inline]
    pub fn at(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    fn filter3x3(&self, want_all: bool) -> Mask {
        let mut out = Mask::empty(self.width, self.height);
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                let centre = self.at(x, y);
                let v = if want_all {
                    centre && NEIGHBOURS_8.iter().all(|&(dx, dy)| self.at(x + dx, y + dy))
                } else {
                    centre || NEIGHBOURS_8.iter().any(|&(dx, dy)| self.at(x + dx, y + dy))
                };
                out.set(x as usize, y as usize, v);
            }
        }
        out
    }

    pub fn erode(&self) -> Mask {
        self.filter3x3(true)
    }

    pub fn dilate(&self) -> Mask {
        self.filter3x3(false)
    }

    pub fn open(&self) -> Mask {
        self.erode().dilate()
    }

    pub fn close(&self) -> Mask {
        self.dilate().erode()
    }

    /// Set every background pixel not 4-connected to the image border.
    pub fn fill_holes(&self) -> Mask {
        let (w, h) = (self.width, self.height);
        let mut outside = vec![false; w * h];
        let mut queue = VecDeque::new();
        let mut seed = |x: usize, y: usize, q: &mut VecDeque<(usize, usize)>| {
            let i = y * w + x;
            if !self.data[i] && !outside[i] {
                outside[i] = true;
                q.push_back((x, y));
            }
        };
        for x in 0..w {
            seed(x, 0, &mut queue);
            seed(x, h - 1, &mut queue);
        }
        for y in 0..h {
            seed(0, y, &mut queue);
            seed(w - 1, y, &mut queue);
        }
        while let Some((x, y)) = queue.pop_front() {
            for (dx, dy) in NEIGHBOURS_4 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    seed(nx as usize, ny as usize, &mut queue);
                }
            }
        }
        Mask {
            width: w,
            height: h,
            data: outside.iter().map(|&o| !o).collect(),
        }
    }

    /// 8-connected component labels (0 = background) and per-label pixel counts.
    pub fn components(&self) -> (Vec<u32>, Vec<Component>) {
        let (w, h) = (self.width, self.height);
        let mut labels = vec![0u32; w * h];
        let mut comps = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if !self.data[start] || labels[start] != 0 {
                continue;
            }
            let label = comps.len() as u32 + 1;
            labels[start] = label;
            queue.push_back(start);
            let mut comp = Component {
                label,
                count: 0,
                sum_x: 0.0,
                sum_y: 0.0,
            };
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % w, i / w);
                comp.count += 1;
                comp.sum_x += x as f64;
                comp.sum_y += y as f64;
                for (dx, dy) in NEIGHBOURS_8 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if self.at(nx, ny) {
                        let j = ny as usize * w + nx as usize;
                        if labels[j] == 0 {
                            labels[j] = label;
                            queue.push_back(j);
                        }
                    }
                }
            }
            comps.push(comp);
        }
        (labels, comps)
    }

    /// Largest 8-connected component; equal sizes go to the more anterior (smaller y) centroid.
    pub fn largest_component(&self) -> Mask {
        let (labels, comps) = self.components();
        let best = comps.iter().min_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then(a.centroid()[1].total_cmp(&b.centroid()[1]))
        });
        let mut out = Mask::empty(self.width, self.height);
        if let Some(best) = best {
            for (o, &l) in out.data.iter_mut().zip(&labels) {
                *o = l == best.label;
            }
        }
        out
    }

    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Second-moment ellipse data of the foreground pixels: `(cx, cy, mxx, myy, mxy)`.
    pub fn moments(&self) -> Option<[f64; 5]> {
        let n = self.count() as f64;
        if n == 0.0 {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                }
            }
        }
        let (cx, cy) = (sx / n, sy / n);
        let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    mxx += dx * dx;
                    myy += dy * dy;
                    mxy += dx * dy;
                }
            }
        }
        Some([cx, cy, mxx / n, myy / n, mxy / n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub label: u32,
    pub count: usize,
    sum_x: f64,
    sum_y: f64,
}

impl Component {
    pub fn centroid(&self) -> [f64; 2] {
        [self.sum_x / self.count as f64, self.sum_y / self.count as f64]
    }
}

/// Threshold at `t`, open, close, fill holes and keep the largest component.
pub fn binarize_and_clean(img: &Image, t: f64) -> Result<Mask> {
    let mask = Mask::threshold(img, t)
        .open()
        .close()
        .fill_holes()
        .largest_component();
    if mask.count() == 0 {
        return Err(JawError::EmptyMask);
    }
    Ok(mask)
}
