//! Scanline polygon rasterization (even-odd rule) and topology cleanup for
//! decoded contours.

use super::contour::Contour;
use super::mask::MaskFrame;
use super::GeometryError;

/// Rasterization result. `degenerate` flags an empty fill (zero-area input);
/// callers producing decoded curves should follow up with [`sanitize_phantom`].
#[derive(Debug, Clone)]
pub struct RasterOutput {
    pub frame: MaskFrame,
    pub degenerate: bool,
}

/// Fills a closed contour onto an h x w canvas with the even-odd rule,
/// sampling at pixel centers. Errors if any vertex leaves the canvas.
pub fn rasterize_contour(contour: &Contour, h: u32, w: u32) -> Result<RasterOutput, GeometryError> {
    for &[x, y] in contour.points() {
        if x < 0.0 || y < 0.0 || x >= f64::from(w) || y >= f64::from(h) {
            return Err(GeometryError::OutOfCanvas { x, y, w, h });
        }
    }
    let frame = fill_even_odd(contour.points(), h, w);
    let degenerate = frame.is_empty();
    Ok(RasterOutput { frame, degenerate })
}

/// Even-odd fill of a convex polygon, clipped to the canvas. Used for
/// hull-region measurements where vertices may legally sit on the border.
pub fn rasterize_convex_polygon(points: &[[f64; 2]], h: u32, w: u32) -> MaskFrame {
    fill_even_odd(points, h, w)
}

fn fill_even_odd(points: &[[f64; 2]], h: u32, w: u32) -> MaskFrame {
    let mut frame = MaskFrame::new(w, h);
    let n = points.len();
    if n < 3 {
        return frame;
    }
    let mut crossings: Vec<f64> = Vec::with_capacity(16);
    for row in 0..h {
        let yc = f64::from(row) + 0.5;
        crossings.clear();
        for i in 0..n {
            let [x1, y1] = points[i];
            let [x2, y2] = points[(i + 1) % n];
            // Half-open span rule: a crossing counts when yc is within
            // [min, max) of the edge, so shared vertices are not doubled.
            if (y1 <= yc) != (y2 <= yc) {
                crossings.push(x1 + (yc - y1) / (y2 - y1) * (x2 - x1));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in crossings.chunks_exact(2) {
            let (xa, xb) = (pair[0], pair[1]);
            // Pixel centers x+0.5 in [xa, xb).
            let start = (xa - 0.5).ceil().max(0.0) as i64;
            let end = ((xb - 0.5).ceil() as i64).min(i64::from(w));
            for x in start..end {
                frame.set(x as u32, row, true);
            }
        }
    }
    frame
}

/// Keeps the largest 4-connected foreground component and fills its holes.
/// Returns the cleaned frame and whether anything changed. Decoded curves
/// can self-intersect after harmonic truncation; this restores the
/// one-component/no-hole guarantee.
pub fn sanitize_phantom(frame: &MaskFrame) -> (MaskFrame, bool) {
    let w = frame.width() as i64;
    let h = frame.height() as i64;
    let idx = |x: i64, y: i64| (y * w + x) as usize;

    // Label 4-connected foreground components, tracking the largest.
    let mut label = vec![0u32; (w * h) as usize];
    let mut next = 0u32;
    let mut best = (0u32, 0usize);
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !frame.get(x, y) || label[idx(x, y)] != 0 {
                continue;
            }
            next += 1;
            let mut size = 0usize;
            label[idx(x, y)] = next;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                size += 1;
                for (nx, ny) in [(cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)] {
                    if frame.get(nx, ny) && label[idx(nx, ny)] == 0 {
                        label[idx(nx, ny)] = next;
                        stack.push((nx, ny));
                    }
                }
            }
            if size > best.1 {
                best = (next, size);
            }
        }
    }
    if best.1 == 0 {
        return (frame.clone(), false);
    }

    let mut out = MaskFrame::new(frame.width(), frame.height());
    for y in 0..h {
        for x in 0..w {
            if label[idx(x, y)] == best.0 {
                out.set(x as u32, y as u32, true);
            }
        }
    }

    // Fill holes: 8-connected background not reachable from the border.
    let mut outside = vec![false; (w * h) as usize];
    let mut stack = Vec::new();
    for x in 0..w {
        for y in [0, h - 1] {
            if !out.get(x, y) && !outside[idx(x, y)] {
                outside[idx(x, y)] = true;
                stack.push((x, y));
            }
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            if !out.get(x, y) && !outside[idx(x, y)] {
                outside[idx(x, y)] = true;
                stack.push((x, y));
            }
        }
    }
    while let Some((cx, cy)) = stack.pop() {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (cx + dx, cy + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                if !out.get(nx, ny) && !outside[idx(nx, ny)] {
                    outside[idx(nx, ny)] = true;
                    stack.push((nx, ny));
                }
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if !out.get(x, y) && !outside[idx(x, y)] {
                out.set(x as u32, y as u32, true);
            }
        }
    }

    let changed = out != *frame;
    (out, changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::extract_contour;
    use std::f64::consts::TAU;

    #[test]
    fn square_fill_count() {
        // Even-odd oracle on the exact polygon: [5,15]^2 covers pixel
        // centers 5.5..14.5 in both axes, exactly 100 pixels.
        let sq = Contour::new(vec![[5.0, 5.0], [15.0, 5.0], [15.0, 15.0], [5.0, 15.0]]);
        let out = rasterize_contour(&sq, 32, 32).unwrap();
        assert!(!out.degenerate);
        let n = out.frame.foreground_count() as i64;
        assert!((n - 100).abs() <= 10, "count {n}");
        assert_eq!(n, 100);
    }

    #[test]
    fn out_of_canvas_errors() {
        let sq = Contour::new(vec![[-1.0, 5.0], [15.0, 5.0], [15.0, 15.0], [5.0, 15.0]]);
        assert!(matches!(rasterize_contour(&sq, 32, 32), Err(GeometryError::OutOfCanvas { .. })));
    }

    #[test]
    fn degenerate_contour_flags() {
        let line = Contour::new(vec![[5.0, 5.0], [10.0, 5.0], [5.0, 5.0]]);
        let out = rasterize_contour(&line, 32, 32).unwrap();
        assert!(out.degenerate);
        assert!(out.frame.is_empty());
    }

    #[test]
    fn circle_roundtrip_topology() {
        let circle: Vec<[f64; 2]> = (0..128)
            .map(|j| {
                let a = TAU * j as f64 / 128.0;
                [16.0 + 10.0 * a.cos(), 16.0 + 10.0 * a.sin()]
            })
            .collect();
        let out = rasterize_contour(&Contour::new(circle), 32, 32).unwrap();
        assert_eq!(out.frame.components_and_holes(), (1, 0));
    }

    #[test]
    fn roundtrip_contour_is_stable() {
        // Trace -> rasterize -> trace should move points < 1.5 px (Hausdorff).
        let circle: Vec<[f64; 2]> = (0..256)
            .map(|j| {
                let a = TAU * j as f64 / 256.0;
                let r = 14.0 * (1.0 + 0.1 * (2.0 * a).cos());
                [24.0 + r * a.cos(), 24.0 + r * a.sin()]
            })
            .collect();
        let first = rasterize_contour(&Contour::new(circle), 48, 48).unwrap().frame;
        let c1 = extract_contour(&first).unwrap();
        let second = rasterize_contour(&c1, 48, 48).unwrap().frame;
        let c2 = extract_contour(&second).unwrap();
        let hausdorff = |a: &Contour, b: &Contour| -> f64 {
            let one_way = |p: &Contour, q: &Contour| {
                p.points()
                    .iter()
                    .map(|u| {
                        q.points()
                            .iter()
                            .map(|v| ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt())
                            .fold(f64::MAX, f64::min)
                    })
                    .fold(0.0, f64::max)
            };
            one_way(a, b).max(one_way(b, a))
        };
        let d = hausdorff(&c1, &c2);
        assert!(d <= 1.5, "hausdorff {d}");
    }

    #[test]
    fn pixel_area_matches_shoelace() {
        let circle: Vec<[f64; 2]> = (0..256)
            .map(|j| {
                let a = TAU * j as f64 / 256.0;
                [32.0 + 15.0 * a.cos(), 32.0 + 15.0 * a.sin()]
            })
            .collect();
        let frame = rasterize_contour(&Contour::new(circle), 64, 64).unwrap().frame;
        assert!(frame.foreground_count() >= 300);
        let traced = extract_contour(&frame).unwrap();
        let rel = (traced.signed_area().abs() - frame.foreground_count() as f64).abs()
            / frame.foreground_count() as f64;
        assert!(rel < 0.03, "relative area gap {rel}");
    }

    #[test]
    fn sanitize_keeps_largest_and_fills() {
        let mut f = MaskFrame::new(16, 16);
        // Large blob with a hole.
        for y in 2..10 {
            for x in 2..10 {
                f.set(x, y, true);
            }
        }
        f.set(5, 5, false);
        // Small separate speck.
        f.set(13, 13, true);
        let (clean, changed) = sanitize_phantom(&f);
        assert!(changed);
        assert_eq!(clean.components_and_holes(), (1, 0));
        assert!(clean.get(5, 5));
        assert!(!clean.get(13, 13));
    }
}
