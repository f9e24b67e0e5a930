//! Binary masks and polygon rasterization.
//!
//! Polygon membership is *boundary inclusive*: a point exactly on an edge or
//! vertex counts as inside. [`fill_polygon`] and [`point_in_polygon`] share
//! the same row-crossing routine, so filling a polygon and testing every
//! pixel center individually produce identical masks.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::ComplexField;

use crate::geom::Pt2;

/// Distance below which a point is considered to lie on a polygon edge.
pub const ON_EDGE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum RasterError {
    /// Mask dimensions do not match for a pairwise operation.
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    /// Bit buffer length does not equal `width · height`.
    LengthMismatch { expected: usize, got: usize },
}

impl fmt::Display for RasterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RasterError::DimensionMismatch { left, right } => write!(
                f,
                "mask dimensions {}x{} and {}x{} do not match",
                left.0, left.1, right.0, right.1
            ),
            RasterError::LengthMismatch { expected, got } => {
                write!(f, "mask bit length {got} does not match {expected}")
            }
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for RasterError {}

/// Row-major boolean pixel grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        if bits.len() != width * height {
            return Err(RasterError::LengthMismatch {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`BinaryMask::get`] but `false` outside the grid.
    #[inline]
    pub fn get_checked(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    /// Pixelwise AND.
    pub fn intersect(&self, other: &Self) -> Result<Self, RasterError> {
        self.check_dims(other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    /// Pixelwise AND NOT.
    pub fn subtract(&self, other: &Self) -> Result<Self, RasterError> {
        self.check_dims(other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && !b)
            .collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    fn check_dims(&self, other: &Self) -> Result<(), RasterError> {
        if self.dimensions() != other.dimensions() {
            return Err(RasterError::DimensionMismatch {
                left: self.dimensions(),
                right: other.dimensions(),
            });
        }
        Ok(())
    }
}

/// Euclidean distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: &Pt2, a: &Pt2, b: &Pt2) -> f64 {
    let (d, _) = point_segment_projection(p, a, b);
    d
}

/// Distance to the segment and the clamped projection parameter `t ∈ [0,1]`.
pub fn point_segment_projection(p: &Pt2, a: &Pt2, b: &Pt2) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return ((p - a).norm(), 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    let proj = a + ab * t;
    ((p - proj).norm(), t)
}

/// X coordinates where polygon edges cross the horizontal line at `y`.
///
/// Horizontal edges contribute nothing; each other edge is counted on the
/// half-open span `[min_y, max_y)`, the standard even-odd vertex rule.
fn row_crossings(polygon: &[Pt2], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if a.y == b.y {
            continue;
        }
        let (lo, hi) = if a.y < b.y { (a, b) } else { (b, a) };
        if lo.y <= y && y < hi.y {
            out.push(lo.x + (y - lo.y) * (hi.x - lo.x) / (hi.y - lo.y));
        }
    }
    out.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
}

/// Whether `p` lies within [`ON_EDGE_TOL`] of the polygon boundary.
pub fn point_on_polygon_boundary(p: &Pt2, polygon: &[Pt2]) -> bool {
    let n = polygon.len();
    (0..n).any(|i| point_segment_distance(p, &polygon[i], &polygon[(i + 1) % n]) <= ON_EDGE_TOL)
}

/// Boundary-inclusive point-in-polygon test (even-odd rule).
///
/// Polygons with fewer than 3 vertices contain nothing.
pub fn point_in_polygon(p: &Pt2, polygon: &[Pt2]) -> bool {
    if polygon.len() < 3 {
        return false;
    }
    if point_on_polygon_boundary(p, polygon) {
        return true;
    }
    let mut crossings = Vec::new();
    row_crossings(polygon, p.y, &mut crossings);
    let left = crossings.iter().filter(|&&x| x < p.x).count();
    left % 2 == 1
}

/// Rasterizes a polygon into a mask by pixel-center membership.
///
/// Produces exactly the mask obtained by evaluating [`point_in_polygon`] at
/// every pixel center: interior spans by even-odd parity plus the lattice
/// points lying on the boundary itself.
pub fn fill_polygon(polygon: &[Pt2], width: usize, height: usize) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    if polygon.len() < 3 {
        return mask;
    }

    let mut crossings = Vec::new();
    for y in 0..height {
        row_crossings(polygon, y as f64, &mut crossings);
        let mut i = 0;
        while i + 1 < crossings.len() {
            let (lo, hi) = (crossings[i], crossings[i + 1]);
            // Strict interior; pixels exactly on a crossing are boundary
            // lattice points and are set below.
            let start = (lo.floor() as i64 + 1).max(0);
            let end = ((hi.ceil() as i64) - 1).min(width as i64 - 1);
            for x in start..=end {
                let xf = x as f64;
                if xf > lo && xf < hi {
                    mask.set(x as usize, y, true);
                }
            }
            i += 2;
        }
    }

    mark_boundary_lattice_points(polygon, &mut mask);
    mask
}

/// Sets every pixel whose center lies on the polygon boundary.
fn mark_boundary_lattice_points(polygon: &[Pt2], mask: &mut BinaryMask) {
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        if ComplexField::abs(dx) >= ComplexField::abs(dy) {
            // Shallow edge: walk lattice columns; per column only the
            // nearest row can be within tolerance.
            let (x0, x1) = ordered_lattice_range(a.x, b.x);
            for x in x0..=x1 {
                let t = if dx == 0.0 { 0.0 } else { (x as f64 - a.x) / dx };
                let y_line = a.y + t * dy;
                try_mark(&Pt2::new(x as f64, y_line.round()), &a, &b, mask);
            }
        } else {
            let (y0, y1) = ordered_lattice_range(a.y, b.y);
            for y in y0..=y1 {
                let t = (y as f64 - a.y) / dy;
                let x_line = a.x + t * dx;
                try_mark(&Pt2::new(x_line.round(), y as f64), &a, &b, mask);
            }
        }
    }
}

fn ordered_lattice_range(a: f64, b: f64) -> (i64, i64) {
    let lo = a.min(b);
    let hi = a.max(b);
    (
        (lo - ON_EDGE_TOL).ceil() as i64,
        (hi + ON_EDGE_TOL).floor() as i64,
    )
}

fn try_mark(candidate: &Pt2, a: &Pt2, b: &Pt2, mask: &mut BinaryMask) {
    if candidate.x < 0.0 || candidate.y < 0.0 {
        return;
    }
    let (x, y) = (candidate.x as usize, candidate.y as usize);
    if x >= mask.width() || y >= mask.height() {
        return;
    }
    if point_segment_distance(candidate, a, b) <= ON_EDGE_TOL {
        mask.set(x, y, true);
    }
}

/// Orientation sign of the triangle `a, b, c`: positive for the
/// counterclockwise shoelace convention used throughout.
fn orient(a: &Pt2, b: &Pt2, c: &Pt2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment_collinear(p: &Pt2, a: &Pt2, b: &Pt2) -> bool {
    p.x >= a.x.min(b.x) - ON_EDGE_TOL
        && p.x <= a.x.max(b.x) + ON_EDGE_TOL
        && p.y >= a.y.min(b.y) - ON_EDGE_TOL
        && p.y <= a.y.max(b.y) + ON_EDGE_TOL
}

/// Whether segments `a1–a2` and `b1–b2` share any point.
pub fn segments_intersect(a1: &Pt2, a2: &Pt2, b1: &Pt2, b2: &Pt2) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_collinear(a1, b1, b2))
        || (d2 == 0.0 && on_segment_collinear(a2, b1, b2))
        || (d3 == 0.0 && on_segment_collinear(b1, a1, a2))
        || (d4 == 0.0 && on_segment_collinear(b2, a1, a2))
}

/// Checks that a closed polygon is simple: no repeated vertices, no
/// zero-length edges and no crossing between non-adjacent edges.
pub fn polygon_is_simple(polygon: &[Pt2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a1 = polygon[i];
        let a2 = polygon[(i + 1) % n];
        if (a2 - a1).norm() <= ON_EDGE_TOL {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == (i + 1) % n || (j + 1) % n == i;
            if adjacent {
                continue;
            }
            let b1 = polygon[j];
            let b2 = polygon[(j + 1) % n];
            if segments_intersect(&a1, &a2, &b1, &b2) {
                return false;
            }
        }
        // Adjacent edges must only share the common vertex, not fold back.
        let next = (i + 1) % n;
        let b2 = polygon[(next + 1) % n];
        if orient(&a1, &a2, &b2) == 0.0 {
            let folds_back = (b2 - a2).dot(&(a1 - a2)) > 0.0;
            if folds_back {
                return false;
            }
        }
    }
    true
}

/// Signed area under the shoelace formula; positive means the orientation
/// matches the crate's counterclockwise convention.
pub fn signed_area(polygon: &[Pt2]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}
