//! Pixel-space geometric primitives.
//!
//! Coordinates are non-negative integers in image space with the origin at the
//! top-left corner. A [`BBox`] `(x, y, w, h)` spans the continuous rectangle
//! `[x, x + w] x [y, y + h]`; a pixel `(i, j)` is sampled at its center
//! `(i + 0.5, j + 0.5)`, so a box covers exactly `w * h` pixels. Polygons use
//! the same sampling, which keeps box and polygon rasterization consistent.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("degenerate box: width {w} x height {h}")]
    DegenerateBox { w: u32, h: u32 },
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("size must be positive, got {width}x{height}")]
    EmptySize { width: u32, height: u32 },
}

/// Image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Size {
    pub width: u32,
    pub height: u32,
}

impl Size {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptySize { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Axis-aligned box `(x, y, w, h)`.
///
/// The fields are public so that parsers can carry degenerate boxes through to
/// validation; [`BBox::new`] is the checked constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, GeometryError> {
        if w == 0 || h == 0 {
            return Err(GeometryError::DegenerateBox { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from fractional `[x, y, w, h]` by rounding both corners
    /// half-up and clamping at zero.
    pub fn from_float_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        let x0 = round_coord(x);
        let y0 = round_coord(y);
        let x1 = round_coord(x + w).max(x0);
        let y1 = round_coord(y + h).max(y0);
        Self {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    /// True when the box fits inside an image of the given size.
    pub fn fits(&self, size: Size) -> bool {
        self.right() <= size.width as u64 && self.bottom() <= size.height as u64
    }

    /// Restricts the box to the image, returning `None` when nothing is left.
    pub fn clip(&self, size: Size) -> Option<BBox> {
        let image = BBox {
            x: 0,
            y: 0,
            w: size.width,
            h: size.height,
        };
        bbox_intersection(self, &image)
    }
}

/// Rounds half-up and clamps negative values to zero.
pub fn round_coord(v: f64) -> u32 {
    if !v.is_finite() || v <= 0.0 {
        return 0;
    }
    let r = (v + 0.5).floor();
    if r >= u32::MAX as f64 {
        u32::MAX
    } else {
        r as u32
    }
}

/// Simple closed polygon with at least three vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polygon {
    points: Vec<(u32, u32)>,
}

impl Polygon {
    pub fn new(points: Vec<(u32, u32)>) -> Result<Self, GeometryError> {
        if points.len() < 3 {
            return Err(GeometryError::TooFewVertices(points.len()));
        }
        Ok(Self { points })
    }

    /// Axis-aligned rectangle as a four-vertex polygon.
    pub fn from_bbox(b: &BBox) -> Self {
        let (x0, y0) = (b.x, b.y);
        let x1 = b.x.saturating_add(b.w);
        let y1 = b.y.saturating_add(b.h);
        Self {
            points: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
        }
    }

    pub fn points(&self) -> &[(u32, u32)] {
        &self.points
    }

    /// Tight bounding box of the vertices. May be degenerate for collinear input.
    pub fn bounds(&self) -> BBox {
        let min_x = self.points.iter().map(|p| p.0).min().unwrap_or(0);
        let max_x = self.points.iter().map(|p| p.0).max().unwrap_or(0);
        let min_y = self.points.iter().map(|p| p.1).min().unwrap_or(0);
        let max_y = self.points.iter().map(|p| p.1).max().unwrap_or(0);
        BBox {
            x: min_x,
            y: min_y,
            w: max_x - min_x,
            h: max_y - min_y,
        }
    }

    fn edges(&self) -> impl Iterator<Item = ((u32, u32), (u32, u32))> + '_ {
        let n = self.points.len();
        (0..n).map(move |k| (self.points[k], self.points[(k + 1) % n]))
    }

    /// Calls `fill(row, first_col, last_col)` for every run of pixel centers
    /// inside the polygon (boundary inclusive, even-odd rule), clipped to
    /// `size`. Exact: the computation is done in doubled integer coordinates,
    /// where pixel centers are odd and vertices even.
    pub fn for_each_span(&self, size: Size, mut fill: impl FnMut(u32, u32, u32)) {
        let bounds = self.bounds();
        let row_end = (bounds.bottom()).min(size.height as u64) as u32;
        let mut crossings: Vec<(i128, i128)> = Vec::new();
        for row in bounds.y..row_end {
            let scan = 2 * row as i128 + 1;
            crossings.clear();
            for (a, b) in self.edges() {
                let (ax, ay) = (2 * a.0 as i128, 2 * a.1 as i128);
                let (bx, by) = (2 * b.0 as i128, 2 * b.1 as i128);
                if (ay > scan) == (by > scan) {
                    continue;
                }
                // x = ax + (scan - ay) * (bx - ax) / (by - ay), kept as num/den with den > 0
                let mut num = ax * (by - ay) + (scan - ay) * (bx - ax);
                let mut den = by - ay;
                if den < 0 {
                    num = -num;
                    den = -den;
                }
                crossings.push((num, den));
            }
            crossings.sort_by(|l, r| (l.0 * r.1).cmp(&(r.0 * l.1)));
            for pair in crossings.chunks_exact(2) {
                let (lo_n, lo_d) = pair[0];
                let (hi_n, hi_d) = pair[1];
                // columns i with lo <= 2i + 1 <= hi
                let first = div_ceil(lo_n - lo_d, 2 * lo_d).max(0);
                let last = div_floor(hi_n - hi_d, 2 * hi_d).min(size.width as i128 - 1);
                if first <= last {
                    fill(row, first as u32, last as u32);
                }
            }
        }
    }
}

fn div_floor(n: i128, d: i128) -> i128 {
    n.div_euclid(d)
}

fn div_ceil(n: i128, d: i128) -> i128 {
    -((-n).div_euclid(d))
}

/// True iff every point of `inner` lies within `outer`, edges inclusive.
pub fn bbox_contains(outer: &BBox, inner: &BBox) -> bool {
    inner.x >= outer.x
        && inner.y >= outer.y
        && inner.right() <= outer.right()
        && inner.bottom() <= outer.bottom()
}

/// Overlap rectangle of two boxes; zero-area overlaps count as disjoint.
pub fn bbox_intersection(a: &BBox, b: &BBox) -> Option<BBox> {
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = a.right().min(b.right());
    let y1 = a.bottom().min(b.bottom());
    if x1 <= x0 as u64 || y1 <= y0 as u64 {
        return None;
    }
    Some(BBox {
        x: x0,
        y: y0,
        w: (x1 - x0 as u64) as u32,
        h: (y1 - y0 as u64) as u32,
    })
}

/// `area(inner ∩ outer) / area(inner)`; zero for a degenerate `inner`.
pub fn enclosure_ratio(inner: &BBox, outer: &BBox) -> f64 {
    let area = inner.area();
    if area == 0 {
        return 0.0;
    }
    bbox_intersection(inner, outer).map_or(0.0, |i| i.area() as f64 / area as f64)
}

/// Even-odd point test with the boundary counted as inside.
pub fn point_in_polygon(p: (f64, f64), poly: &Polygon) -> bool {
    let (px, py) = p;
    let mut inside = false;
    for (a, b) in poly.edges() {
        let (ax, ay) = (a.0 as f64, a.1 as f64);
        let (bx, by) = (b.0 as f64, b.1 as f64);
        let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        if cross == 0.0
            && px >= ax.min(bx)
            && px <= ax.max(bx)
            && py >= ay.min(by)
            && py <= ay.max(by)
        {
            return true;
        }
        if (ay > py) != (by > py) {
            // p lies left of the edge's crossing iff cross has the sign of (by - ay)
            if (cross > 0.0) == (by > ay) {
                inside = !inside;
            }
        }
    }
    inside
}
