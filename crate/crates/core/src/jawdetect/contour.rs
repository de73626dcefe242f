//! Moore-neighbourhood boundary tracing and polygon measures.

use super::morphology::Mask;
use super::{JawError, Result};

/// Clockwise (in image coordinates, y down) starting west.
const MOORE: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn direction_index(from: (isize, isize), to: (isize, isize)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    MOORE.iter().position(|&m| m == d).expect("neighbouring pixels")
}

/// Outer boundary of the component containing the first foreground pixel in
/// raster order, as pixel centres. The polygon is closed: the first vertex is
/// repeated at the end.
pub fn extract_contour(mask: &Mask) -> Result<Vec<[f64; 2]>> {
    let start = mask
        .data
        .iter()
        .position(|&v| v)
        .ok_or(JawError::EmptyMask)?;
    let start = ((start % mask.width) as isize, (start / mask.width) as isize);
    // raster order guarantees the west neighbour is background
    let start_back = (start.0 - 1, start.1);

    let mut path = vec![start];
    let mut current = start;
    let mut back = start_back;
    let limit = 4 * mask.data.len() + 8;
    for _ in 0..limit {
        let first = direction_index(current, back);
        let mut next = None;
        let mut prev = back;
        for step in 1..=8 {
            let (dx, dy) = MOORE[(first + step) % 8];
            let cand = (current.0 + dx, current.1 + dy);
            if mask.at(cand.0, cand.1) {
                next = Some(cand);
                break;
            }
            prev = cand;
        }
        let Some(next) = next else {
            // isolated pixel
            break;
        };
        back = prev;
        current = next;
        if current == start && back == start_back {
            break;
        }
        // Jacob's criterion can miss when the start is re-entered from a
        // different side; stop once the first edge repeats.
        if path.len() >= 2 && current == path[1] && path[path.len() - 1] == start {
            break;
        }
        path.push(current);
    }
    if path.len() > 1 && *path.last().unwrap() == start {
        path.pop();
    }
    let mut poly: Vec<[f64; 2]> = path.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
    poly.push(poly[0]);
    Ok(poly)
}

/// Signed shoelace area of a closed polygon (first vertex repeated at the end).
pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    poly.windows(2)
        .map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1])
        .sum::<f64>()
        / 2.0
}

pub fn perimeter(poly: &[[f64; 2]]) -> f64 {
    poly.windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

/// Area, centroid and central second moments of the region a closed polygon encloses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMoments {
    pub area: f64,
    pub centroid: [f64; 2],
    pub mxx: f64,
    pub myy: f64,
    pub mxy: f64,
}

pub fn region_moments(poly: &[[f64; 2]]) -> Option<RegionMoments> {
    let (mut a2, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for w in poly.windows(2) {
        let ([x0, y0], [x1, y1]) = (w[0], w[1]);
        let c = x0 * y1 - x1 * y0;
        a2 += c;
        sx += (x0 + x1) * c;
        sy += (y0 + y1) * c;
        sxx += (x0 * x0 + x0 * x1 + x1 * x1) * c;
        syy += (y0 * y0 + y0 * y1 + y1 * y1) * c;
        sxy += (x0 * y1 + 2.0 * x0 * y0 + 2.0 * x1 * y1 + x1 * y0) * c;
    }
    let area = a2 / 2.0;
    if area.abs() < 1e-12 {
        return None;
    }
    let cx = sx / (6.0 * area);
    let cy = sy / (6.0 * area);
    Some(RegionMoments {
        area: area.abs(),
        centroid: [cx, cy],
        mxx: sxx / (12.0 * area) - cx * cx,
        myy: syy / (12.0 * area) - cy * cy,
        mxy: sxy / (24.0 * area) - cx * cy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mask_from(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> Mask {
        let mut m = Mask::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                m.set(x, y, f(x, y));
            }
        }
        m
    }

    #[test]
    fn square_boundary() {
        let m = mask_from(7, 7, |x, y| (2..5).contains(&x) && (2..5).contains(&y));
        let c = extract_contour(&m).unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], c[8]);
        let distinct: std::collections::BTreeSet<(i64, i64)> =
            c[..8].iter().map(|p| (p[0] as i64, p[1] as i64)).collect();
        assert_eq!(distinct.len(), 8);
        assert!(!distinct.contains(&(3, 3)));
        assert_eq!(signed_area(&c).abs(), 4.0);
    }

    #[test]
    fn single_pixel_and_empty() {
        let m = mask_from(3, 3, |x, y| x == 1 && y == 1);
        assert_eq!(extract_contour(&m).unwrap(), vec![[1.0, 1.0], [1.0, 1.0]]);
        assert!(extract_contour(&Mask::empty(3, 3)).is_err());
    }

    #[test]
    fn disk_perimeter() {
        let r = 20.0;
        let m = mask_from(64, 64, |x, y| {
            let (dx, dy) = (x as f64 - 32.0, y as f64 - 32.0);
            dx * dx + dy * dy <= r * r
        });
        let c = extract_contour(&m).unwrap();
        let p = perimeter(&c);
        assert!((p - 2.0 * PI * r).abs() < 0.15 * 2.0 * PI * r, "{p}");
    }

    #[test]
    fn polygon_moments_of_rectangle() {
        let poly = [[0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [0.0, 2.0], [0.0, 0.0]];
        let m = region_moments(&poly).unwrap();
        assert!((m.area - 8.0).abs() < 1e-12);
        assert!((m.centroid[0] - 2.0).abs() < 1e-12 && (m.centroid[1] - 1.0).abs() < 1e-12);
        assert!((m.mxx - 16.0 / 12.0).abs() < 1e-12);
        assert!((m.myy - 4.0 / 12.0).abs() < 1e-12);
        assert!(m.mxy.abs() < 1e-12);
        // orientation independent
        let rev: Vec<[f64; 2]> = poly.iter().rev().copied().collect();
        assert_eq!(region_moments(&rev).unwrap().area, m.area);
    }
}
