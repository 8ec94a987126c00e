//! Binary mask frames/videos and the measurements defined directly on pixels.

use super::GeometryError;

/// Single-channel binary image. Pixel (x, y) occupies the unit square
/// [x, x+1] x [y, y+1] and has its center at (x+0.5, y+0.5).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl MaskFrame {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width >= 1 && height >= 1, "frame dimensions must be >= 1");
        Self { width, height, bits: vec![0; (width * height) as usize] }
    }

    /// Builds a frame from row-major bytes; any nonzero byte counts as foreground.
    pub fn from_bits(width: u32, height: u32, bits: &[u8]) -> Self {
        assert_eq!(bits.len(), (width * height) as usize, "bit buffer size mismatch");
        let bits = bits.iter().map(|&b| u8::from(b != 0)).collect();
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            return false;
        }
        self.bits[(y * i64::from(self.width) + x) as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.bits[(y * self.width + x) as usize] = u8::from(value);
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Centroid of foreground pixel centers.
    pub fn centroid(&self) -> Result<(f64, f64), GeometryError> {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x.into(), y.into()) {
                    sx += f64::from(x) + 0.5;
                    sy += f64::from(y) + 0.5;
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(GeometryError::NoForeground);
        }
        Ok((sx / n as f64, sy / n as f64))
    }

    /// Number of foreground pixels lying on the outermost row/column ring.
    pub fn border_contact_count(&self) -> usize {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut n = 0;
        for x in 0..w {
            n += usize::from(self.get(x, 0));
            if h > 1 {
                n += usize::from(self.get(x, h - 1));
            }
        }
        for y in 1..h - 1 {
            n += usize::from(self.get(0, y));
            if w > 1 {
                n += usize::from(self.get(w - 1, y));
            }
        }
        n
    }

    /// Counts 4-connected foreground components and holes (8-connected
    /// background regions that do not touch the frame border).
    pub fn components_and_holes(&self) -> (usize, usize) {
        let w = self.width as i64;
        let h = self.height as i64;
        let idx = |x: i64, y: i64| (y * w + x) as usize;
        let mut visited = vec![false; (w * h) as usize];
        let mut components = 0usize;

        let mut stack = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !self.get(x, y) || visited[idx(x, y)] {
                    continue;
                }
                components += 1;
                stack.push((x, y));
                visited[idx(x, y)] = true;
                while let Some((cx, cy)) = stack.pop() {
                    for (nx, ny) in [(cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)] {
                        if self.get(nx, ny) && !visited[idx(nx, ny)] {
                            visited[idx(nx, ny)] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }

        // Background flood from the border with 8-connectivity; leftover
        // background regions are holes.
        let mut bg_visited = vec![false; (w * h) as usize];
        let mut stack = Vec::new();
        for x in 0..w {
            for y in [0, h - 1] {
                if !self.get(x, y) && !bg_visited[idx(x, y)] {
                    bg_visited[idx(x, y)] = true;
                    stack.push((x, y));
                }
            }
        }
        for y in 0..h {
            for x in [0, w - 1] {
                if !self.get(x, y) && !bg_visited[idx(x, y)] {
                    bg_visited[idx(x, y)] = true;
                    stack.push((x, y));
                }
            }
        }
        while let Some((cx, cy)) = stack.pop() {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    if !self.get(nx, ny) && !bg_visited[idx(nx, ny)] {
                        bg_visited[idx(nx, ny)] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        let mut holes = 0usize;
        let mut hole_visited = vec![false; (w * h) as usize];
        let mut stack = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if self.get(x, y) || bg_visited[idx(x, y)] || hole_visited[idx(x, y)] {
                    continue;
                }
                holes += 1;
                hole_visited[idx(x, y)] = true;
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            let (nx, ny) = (cx + dx, cy + dy);
                            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                                continue;
                            }
                            if !self.get(nx, ny) && !bg_visited[idx(nx, ny)] && !hole_visited[idx(nx, ny)] {
                                hole_visited[idx(nx, ny)] = true;
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
        (components, holes)
    }

    /// A frame is a valid phantom when it holds exactly one 4-connected
    /// foreground component and no holes.
    pub fn validate_phantom(&self) -> Result<(), GeometryError> {
        let (components, holes) = self.components_and_holes();
        if components == 0 {
            return Err(GeometryError::NoForeground);
        }
        if components > 1 {
            return Err(GeometryError::MultipleComponents(components));
        }
        if holes > 0 {
            return Err(GeometryError::HasHoles(holes));
        }
        Ok(())
    }

    pub fn is_valid_phantom(&self) -> bool {
        self.validate_phantom().is_ok()
    }

    /// Ellipse-equivalent full axis lengths 4*sqrt(eigenvalues) of the
    /// second-central-moment matrix of foreground pixels. Each pixel
    /// contributes its own 1/12 square moment so degenerate rows keep a
    /// positive minor axis.
    pub fn moments_axes(&self) -> Result<(f64, f64), GeometryError> {
        let (cx, cy) = self.centroid()?;
        let mut mxx = 0.0;
        let mut myy = 0.0;
        let mut mxy = 0.0;
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x.into(), y.into()) {
                    let dx = f64::from(x) + 0.5 - cx;
                    let dy = f64::from(y) + 0.5 - cy;
                    mxx += dx * dx;
                    myy += dy * dy;
                    mxy += dx * dy;
                    n += 1;
                }
            }
        }
        let n = n as f64;
        let vxx = mxx / n + 1.0 / 12.0;
        let vyy = myy / n + 1.0 / 12.0;
        let vxy = mxy / n;
        let tr = vxx + vyy;
        let det = vxx * vyy - vxy * vxy;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let l1 = tr / 2.0 + disc;
        let l2 = (tr / 2.0 - disc).max(0.0);
        Ok((4.0 * l1.sqrt(), 4.0 * l2.sqrt()))
    }

    /// Convex hull vertices over the corner points of foreground pixels,
    /// counterclockwise (positive shoelace).
    pub fn hull_points(&self) -> Result<Vec<[f64; 2]>, GeometryError> {
        let mut corners: Vec<(i64, i64)> = Vec::new();
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                if !self.get(x, y) {
                    continue;
                }
                // Interior pixels cannot contribute hull vertices.
                if self.get(x - 1, y) && self.get(x + 1, y) && self.get(x, y - 1) && self.get(x, y + 1) {
                    continue;
                }
                corners.extend_from_slice(&[(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]);
            }
        }
        if corners.is_empty() {
            return Err(GeometryError::NoForeground);
        }
        corners.sort_unstable();
        corners.dedup();
        Ok(monotone_chain(&corners))
    }

    /// Area of the convex hull of foreground pixel corners (shoelace of the
    /// hull polygon), always >= foreground pixel count.
    pub fn convex_hull_area(&self) -> Result<f64, GeometryError> {
        let hull = self.hull_points()?;
        Ok(shoelace_area(&hull).abs())
    }

    /// Pixel set of the convex hull: pixels whose centers lie in the closed
    /// convex hull of the foreground pixel centers. This is the
    /// set-cardinality |ConvHull(M)| used by solidity/overlap/convexity
    /// ratios — the foreground is always a subset, so those ratios stay in
    /// (0, 1], and digitally convex shapes score exactly 1.
    pub fn convex_hull_region(&self) -> Result<MaskFrame, GeometryError> {
        let mut centers: Vec<(i64, i64)> = Vec::new();
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                if !self.get(x, y) {
                    continue;
                }
                if self.get(x - 1, y) && self.get(x + 1, y) && self.get(x, y - 1) && self.get(x, y + 1) {
                    continue;
                }
                // Doubled center coordinates stay integral.
                centers.push((2 * x + 1, 2 * y + 1));
            }
        }
        if centers.is_empty() {
            return Err(GeometryError::NoForeground);
        }
        centers.sort_unstable();
        centers.dedup();
        let hull: Vec<(i64, i64)> = if centers.len() < 3 {
            centers
        } else {
            monotone_chain(&centers).into_iter().map(|[x, y]| (x as i64, y as i64)).collect()
        };

        let mut region = MaskFrame::new(self.width, self.height);
        if hull.len() <= 2 {
            // Degenerate hull: the segment between the two extreme centers.
            let (a, b) = (hull[0], *hull.last().unwrap());
            for y in 0..self.height as i64 {
                for x in 0..self.width as i64 {
                    let p = (2 * x + 1, 2 * y + 1);
                    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                    let dot = (p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1);
                    let len2 = (b.0 - a.0).pow(2) + (b.1 - a.1).pow(2);
                    if cross == 0 && dot >= 0 && dot <= len2 {
                        region.set(x as u32, y as u32, true);
                    }
                }
            }
            return Ok(region);
        }
        // Closed test: centers on the hull boundary are included. All
        // arithmetic is integral (doubled coordinates), so there are no ties.
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                let p = (2 * x + 1, 2 * y + 1);
                let inside = (0..hull.len()).all(|i| {
                    let a = hull[i];
                    let b = hull[(i + 1) % hull.len()];
                    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0
                });
                if inside {
                    region.set(x as u32, y as u32, true);
                }
            }
        }
        Ok(region)
    }

    pub fn convex_hull_pixel_count(&self) -> Result<usize, GeometryError> {
        Ok(self.convex_hull_region()?.foreground_count())
    }
}

/// Andrew's monotone chain over integer corner points. Input must be sorted
/// and deduplicated. Returns CCW vertices (positive shoelace).
fn monotone_chain(points: &[(i64, i64)]) -> Vec<[f64; 2]> {
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| -> i64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    if points.len() < 3 {
        return points.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(points.len() + 1);
    for &p in points {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull.into_iter().map(|(x, y)| [x as f64, y as f64]).collect()
}

/// Signed shoelace area of a closed polygon.
pub(crate) fn shoelace_area(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x1, y1] = points[i];
        let [x2, y2] = points[(i + 1) % n];
        acc += x1 * y2 - x2 * y1;
    }
    acc / 2.0
}

/// Ordered sequence of equally sized mask frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskVideo {
    frames: Vec<MaskFrame>,
}

impl MaskVideo {
    pub fn new(frames: Vec<MaskFrame>) -> Result<Self, GeometryError> {
        let first = frames.first().ok_or(GeometryError::EmptyVideo)?;
        let (w, h) = (first.width(), first.height());
        for f in &frames {
            if f.width() != w || f.height() != h {
                return Err(GeometryError::DimensionMismatch(w, h, f.width(), f.height()));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[MaskFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.frames[0].width()
    }

    pub fn height(&self) -> u32 {
        self.frames[0].height()
    }
}
