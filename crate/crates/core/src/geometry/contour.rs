//! Closed contours: marching-squares extraction from masks and geodesic
//! uniform resampling.

use std::collections::HashMap;

use super::mask::{shoelace_area, MaskFrame};
use super::GeometryError;

/// Closed polyline in pixel coordinates, counterclockwise (positive shoelace).
/// The last point implicitly connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<[f64; 2]>,
}

impl Contour {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Length of the closed polyline.
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let [x1, y1] = self.points[i];
                let [x2, y2] = self.points[(i + 1) % n];
                ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt()
            })
            .sum()
    }

    pub fn signed_area(&self) -> f64 {
        shoelace_area(&self.points)
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    /// Reverses orientation in place, keeping point 0 fixed.
    pub fn reverse(&mut self) {
        self.points[1..].reverse();
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Contour {
        Contour::new(self.points.iter().map(|&[x, y]| [x + dx, y + dy]).collect())
    }

    pub fn centroid_of_points(&self) -> (f64, f64) {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(ax, ay), &[x, y]| (ax + x, ay + y));
        (sx / n, sy / n)
    }
}

/// Per-frame contours of a video; all share the same point count.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourVideo {
    contours: Vec<Contour>,
}

impl ContourVideo {
    pub fn new(contours: Vec<Contour>) -> Result<Self, GeometryError> {
        let first = contours.first().ok_or(GeometryError::EmptyVideo)?;
        let n = first.len();
        for c in &contours {
            if c.len() != n {
                return Err(GeometryError::TooFewPoints { min: n, got: c.len() });
            }
        }
        Ok(Self { contours })
    }

    pub fn contours(&self) -> &[Contour] {
        &self.contours
    }

    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }
}

// Edge midpoints of a marching-squares cell (cx, cy). The cell covers
// [cx-0.5, cx+0.5] x [cy-0.5, cy+0.5] in pixel coordinates and its corners
// are the centers of pixels (cx-1, cy-1), (cx, cy-1), (cx-1, cy), (cx, cy).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    Top,
    Right,
    Bottom,
    Left,
}

fn edge_point(cx: i64, cy: i64, e: Edge) -> [f64; 2] {
    let (x, y) = (cx as f64, cy as f64);
    match e {
        Edge::Top => [x, y - 0.5],
        Edge::Right => [x + 0.5, y],
        Edge::Bottom => [x, y + 0.5],
        Edge::Left => [x - 0.5, y],
    }
}

/// Directed segments for each case index (bit0 = top-left pixel, bit1 =
/// top-right, bit2 = bottom-right, bit3 = bottom-left). Foreground stays on
/// the left when walking in screen coordinates (x right, y down); saddle
/// cases keep diagonal foreground pixels disconnected (4-connectivity).
fn cell_segments(case: u8) -> &'static [(Edge, Edge)] {
    use Edge::*;
    match case {
        0 | 15 => &[],
        1 => &[(Left, Top)],
        2 => &[(Top, Right)],
        3 => &[(Left, Right)],
        4 => &[(Right, Bottom)],
        5 => &[(Left, Top), (Right, Bottom)],
        6 => &[(Top, Bottom)],
        7 => &[(Left, Bottom)],
        8 => &[(Bottom, Left)],
        9 => &[(Bottom, Top)],
        10 => &[(Top, Right), (Bottom, Left)],
        11 => &[(Bottom, Right)],
        12 => &[(Right, Left)],
        13 => &[(Right, Top)],
        14 => &[(Top, Left)],
        _ => unreachable!(),
    }
}

/// Traces the outer boundary of a valid phantom frame as a closed
/// counterclockwise contour with sub-pixel vertices at marching-squares
/// edge midpoints.
pub fn extract_contour(frame: &MaskFrame) -> Result<Contour, GeometryError> {
    frame.validate_phantom()?;

    let w = frame.width() as i64;
    let h = frame.height() as i64;
    // Key vertices by doubled coordinates so they stay exact integers.
    let key = |p: [f64; 2]| ((p[0] * 2.0).round() as i64, (p[1] * 2.0).round() as i64);
    let mut succ: HashMap<(i64, i64), [f64; 2]> = HashMap::new();
    let mut start: Option<[f64; 2]> = None;

    for cy in 0..=h {
        for cx in 0..=w {
            let case = u8::from(frame.get(cx - 1, cy - 1))
                | (u8::from(frame.get(cx, cy - 1)) << 1)
                | (u8::from(frame.get(cx, cy)) << 2)
                | (u8::from(frame.get(cx - 1, cy)) << 3);
            for &(from, to) in cell_segments(case) {
                let a = edge_point(cx, cy, from);
                let b = edge_point(cx, cy, to);
                succ.insert(key(a), b);
                start.get_or_insert(a);
            }
        }
    }

    let start = start.ok_or(GeometryError::NoForeground)?;
    let total = succ.len();
    let mut points = Vec::with_capacity(total);
    let mut cur = start;
    loop {
        points.push(cur);
        cur = *succ
            .get(&key(cur))
            .expect("boundary walk left the segment graph");
        if key(cur) == key(start) {
            break;
        }
        if points.len() > total {
            // A validated phantom always yields a single cycle.
            unreachable!("contour tracing failed to close");
        }
    }

    let mut contour = Contour::new(points);
    if !contour.is_ccw() {
        contour.reverse();
    }
    Ok(contour)
}

/// Resamples a closed contour to `n` points at equal arc-length spacing along
/// the polyline. Point 0 is preserved as the phase anchor.
pub fn resample_arclength(contour: &Contour, n: usize) -> Result<Contour, GeometryError> {
    if contour.len() < 3 {
        return Err(GeometryError::TooFewPoints { min: 3, got: contour.len() });
    }
    if n < 8 {
        return Err(GeometryError::TooFewPoints { min: 8, got: n });
    }
    let pts = contour.points();
    let m = pts.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for i in 0..m {
        let [x1, y1] = pts[i];
        let [x2, y2] = pts[(i + 1) % m];
        let seg = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
        cum.push(cum[i] + seg);
    }
    let perimeter = cum[m];
    if perimeter <= 1e-12 {
        return Err(GeometryError::DegenerateContour);
    }

    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for j in 0..n {
        let target = perimeter * j as f64 / n as f64;
        while seg + 1 < m && cum[seg + 1] <= target {
            seg += 1;
        }
        // cum[seg] <= target < cum[seg + 1]
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        let [x1, y1] = pts[seg];
        let [x2, y2] = pts[(seg + 1) % m];
        out.push([x1 + t * (x2 - x1), y1 + t * (y2 - y1)]);
    }
    Ok(Contour::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn disk_frame(w: u32, h: u32, cx: f64, cy: f64, r: f64) -> MaskFrame {
        let mut f = MaskFrame::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let dx = f64::from(x) + 0.5 - cx;
                let dy = f64::from(y) + 0.5 - cy;
                if dx * dx + dy * dy <= r * r {
                    f.set(x, y, true);
                }
            }
        }
        f
    }

    #[test]
    fn single_pixel_diamond() {
        let mut f = MaskFrame::new(3, 3);
        f.set(1, 1, true);
        let c = extract_contour(&f).unwrap();
        assert_eq!(c.len(), 4);
        let mut got: Vec<(i64, i64)> =
            c.points().iter().map(|p| ((p[0] * 2.0) as i64, (p[1] * 2.0) as i64)).collect();
        got.sort_unstable();
        // Diamond at half-pixel offsets around the pixel center (1.5, 1.5).
        let mut want = vec![(2, 3), (3, 2), (4, 3), (3, 4)];
        want.sort_unstable();
        assert_eq!(got, want);
        assert!(c.is_ccw());
    }

    #[test]
    fn rectangle_bbox_matches() {
        let mut f = MaskFrame::new(16, 16);
        for y in 3..8 {
            for x in 2..10 {
                f.set(x, y, true);
            }
        }
        let c = extract_contour(&f).unwrap();
        let xs: Vec<f64> = c.points().iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = c.points().iter().map(|p| p[1]).collect();
        let (xmin, xmax) = (xs.iter().cloned().fold(f64::MAX, f64::min), xs.iter().cloned().fold(f64::MIN, f64::max));
        let (ymin, ymax) = (ys.iter().cloned().fold(f64::MAX, f64::min), ys.iter().cloned().fold(f64::MIN, f64::max));
        assert!((xmin - 2.0).abs() <= 1.0 && (xmax - 10.0).abs() <= 1.0);
        assert!((ymin - 3.0).abs() <= 1.0 && (ymax - 8.0).abs() <= 1.0);
    }

    #[test]
    fn disk_contour_near_ideal_circle() {
        let f = disk_frame(64, 64, 32.0, 32.0, 20.0);
        let c = extract_contour(&f).unwrap();
        // Pixel-level oracle: every traced point close to the ideal circle.
        let max_dev = c
            .points()
            .iter()
            .map(|p| (((p[0] - 32.0).powi(2) + (p[1] - 32.0).powi(2)).sqrt() - 20.0).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= 1.0, "max radial deviation {max_dev}");
    }

    #[test]
    fn contour_errors() {
        assert_eq!(extract_contour(&MaskFrame::new(8, 8)), Err(GeometryError::NoForeground));
        let mut two = MaskFrame::new(8, 8);
        two.set(1, 1, true);
        two.set(6, 6, true);
        assert!(matches!(extract_contour(&two), Err(GeometryError::MultipleComponents(_))));
    }

    #[test]
    fn resample_square_gaps() {
        let square = Contour::new(vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]);
        let r = resample_arclength(&square, 8).unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!(r.points()[0], [0.0, 0.0]);
        for i in 0..8 {
            let [x1, y1] = r.points()[i];
            let [x2, y2] = r.points()[(i + 1) % 8];
            let gap = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
            assert!((gap - 5.0).abs() < 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn resample_idempotent_on_uniform_input() {
        let n = 64;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let a = TAU * j as f64 / n as f64;
                [10.0 * a.cos(), 10.0 * a.sin()]
            })
            .collect();
        let c = Contour::new(pts);
        let r = resample_arclength(&c, n).unwrap();
        for (p, q) in c.points().iter().zip(r.points()) {
            assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_irregular_circle_uniform_angles() {
        // 1000 irregularly spaced angles on the unit circle -> resampled
        // points should sit at uniform angles (analytic oracle).
        let angles: Vec<f64> = (0..1000)
            .map(|i| {
                let u = i as f64 / 1000.0;
                TAU * (u + 0.02 * (3.0 * TAU * u).sin())
            })
            .collect();
        let pts: Vec<[f64; 2]> = angles.iter().map(|&a| [a.cos(), a.sin()]).collect();
        let c = Contour::new(pts);
        let r = resample_arclength(&c, 128).unwrap();
        let a0 = r.points()[0][1].atan2(r.points()[0][0]);
        for (j, p) in r.points().iter().enumerate() {
            let a = p[1].atan2(p[0]);
            let expected = a0 + TAU * j as f64 / 128.0;
            let mut diff = (a - expected) % TAU;
            if diff > PI {
                diff -= TAU;
            }
            if diff < -PI {
                diff += TAU;
            }
            assert!(diff.abs() < 1e-3, "point {j}: angle error {diff}");
        }
    }

    #[test]
    fn resample_degenerate() {
        let c = Contour::new(vec![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(resample_arclength(&c, 8), Err(GeometryError::DegenerateContour));
    }

    #[test]
    fn resample_preserves_perimeter_smooth() {
        // Smooth wavy shape sampled densely.
        let pts: Vec<[f64; 2]> = (0..2048)
            .map(|j| {
                let a = TAU * j as f64 / 2048.0;
                let r = 20.0 * (1.0 + 0.15 * (3.0 * a).cos());
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let c = Contour::new(pts);
        let p0 = c.perimeter();
        for n in [64, 128, 256] {
            let r = resample_arclength(&c, n).unwrap();
            let rel = (r.perimeter() - p0).abs() / p0;
            assert!(rel < 0.005, "n={n} rel={rel}");
        }
    }
}
