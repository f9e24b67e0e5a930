//! Occlusion-region construction from shoe and leg silhouettes.
//!
//! The rendered shoe mask has an outer silhouette `S0` and, because the
//! shoe opening is transparent, an inner hole silhouette `S1`. Where the
//! leg mask crosses `S0`, two anchors `M0, M1` are found; their nearest
//! points `N0, N1` on `S1` close a polygon `M0 → N0 → (S1 arc) → N1 → M1 →
//! (S0 arc) → M0` whose rasterization inside the shoe annulus is the 2D
//! region to render transparent.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::ComplexField;

use crate::geom::Pt2;
use crate::raster::{
    fill_polygon, point_in_polygon, point_segment_projection, polygon_is_simple, signed_area,
    RasterError,
};

pub use crate::raster::BinaryMask;

#[derive(Clone, Debug, PartialEq)]
pub enum OccludeError {
    /// The shoe mask must hold exactly one foreground component with
    /// exactly one interior hole.
    Topology { foreground: usize, holes: usize },
    /// Foreground is solid: no transparent shoe opening.
    MissingOpening,
    /// A contour needs at least 3 vertices.
    TooFewVertices { got: usize },
    /// User-supplied contour self-intersects.
    NotSimple,
    /// The assembled occlusion polygon self-intersects; carries the
    /// polygon for diagnosis.
    DegenerateGeometry { polygon: Vec<Pt2> },
    Raster(RasterError),
}

impl fmt::Display for OccludeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OccludeError::Topology { foreground, holes } => write!(
                f,
                "expected one component with one hole, found {foreground} component(s) with {holes} hole(s)"
            ),
            OccludeError::MissingOpening => write!(f, "shoe mask has no opening hole"),
            OccludeError::TooFewVertices { got } => {
                write!(f, "contour needs >= 3 vertices, got {got}")
            }
            OccludeError::NotSimple => write!(f, "contour self-intersects"),
            OccludeError::DegenerateGeometry { polygon } => write!(
                f,
                "assembled polygon self-intersects ({} vertices)",
                polygon.len()
            ),
            OccludeError::Raster(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for OccludeError {}

impl From<RasterError> for OccludeError {
    fn from(e: RasterError) -> Self {
        OccludeError::Raster(e)
    }
}

/// Closed pixel-coordinate polygon stored counterclockwise (positive
/// shoelace area); the edge from the last vertex back to the first is
/// implicit. Edge `i` runs from vertex `i` to vertex `i + 1 (mod n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    vertices: Vec<Pt2>,
}

impl Contour {
    /// Validates vertex count and simplicity; reverses the vertex order if
    /// needed so the stored orientation is counterclockwise.
    pub fn new(vertices: Vec<Pt2>) -> Result<Self, OccludeError> {
        if vertices.len() < 3 {
            return Err(OccludeError::TooFewVertices {
                got: vertices.len(),
            });
        }
        if !polygon_is_simple(&vertices) {
            return Err(OccludeError::NotSimple);
        }
        Ok(Self::orient(vertices))
    }

    /// For traced boundaries: trusts the tracer, only fixes orientation.
    fn from_traced(vertices: Vec<Pt2>) -> Result<Self, OccludeError> {
        if vertices.len() < 3 {
            return Err(OccludeError::TooFewVertices {
                got: vertices.len(),
            });
        }
        Ok(Self::orient(vertices))
    }

    fn orient(mut vertices: Vec<Pt2>) -> Self {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Pt2] {
        &self.vertices
    }

    /// Number of vertices, which equals the number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, i: usize) -> (Pt2, Pt2) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        (b - a).norm()
    }

    /// Point at parameter `t ∈ [0, 1]` along edge `i`.
    pub fn point_at(&self, edge: usize, t: f64) -> Pt2 {
        let (a, b) = self.edge(edge);
        a + (b - a) * t
    }
}

/// A point pinned to a contour edge: edge index, parameter `t ∈ [0, 1)`
/// along that edge, and the resolved 2D position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourAnchor {
    pub edge: usize,
    pub t: f64,
    pub point: Pt2,
}

impl ContourAnchor {
    /// Resolves an anchor on `contour`, canonicalizing `t = 1` onto the
    /// start of the next edge.
    pub fn new(contour: &Contour, edge: usize, t: f64) -> Self {
        let n = contour.len();
        let (edge, t) = if t >= 1.0 - 1e-12 {
            ((edge + 1) % n, 0.0)
        } else {
            (edge % n, t.max(0.0))
        };
        Self {
            edge,
            t,
            point: contour.point_at(edge, t),
        }
    }
}

/// 8-neighborhood in clockwise order starting west, for Moore tracing.
const MOORE: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

/// Traces the boundary of the component containing `start`, which must be
/// its topmost-leftmost pixel. Terminates when the (pixel, backtrack)
/// state returns to its initial value.
fn moore_trace(
    is_member: &dyn Fn(i64, i64) -> bool,
    start: (i64, i64),
    max_steps: usize,
) -> Vec<Pt2> {
    let initial_b = (start.0 - 1, start.1);
    let mut contour = vec![Pt2::new(start.0 as f64, start.1 as f64)];
    let mut p = start;
    let mut b = initial_b;

    for _ in 0..max_steps {
        let bi = MOORE
            .iter()
            .position(|d| (p.0 + d.0, p.1 + d.1) == b)
            .expect("backtrack is always an 8-neighbor");
        let mut next = None;
        let mut last_bg = b;
        for k in 1..=8 {
            let dir = (bi + k) % 8;
            let q = (p.0 + MOORE[dir].0, p.1 + MOORE[dir].1);
            if is_member(q.0, q.1) {
                next = Some(q);
                break;
            }
            last_bg = q;
        }
        let Some(q) = next else {
            // Isolated pixel.
            return contour;
        };
        p = q;
        b = last_bg;
        if (p, b) == (start, initial_b) {
            break;
        }
        contour.push(Pt2::new(p.0 as f64, p.1 as f64));
    }
    contour
}

/// Connected-component labels; `-1` for non-member pixels.
fn label_components(
    width: usize,
    height: usize,
    member: impl Fn(usize, usize) -> bool,
    eight_connected: bool,
) -> (Vec<i32>, usize) {
    let mut labels = vec![-1i32; width * height];
    let mut count = 0usize;
    let mut queue: Vec<(usize, usize)> = Vec::new();
    for sy in 0..height {
        for sx in 0..width {
            if !member(sx, sy) || labels[sy * width + sx] >= 0 {
                continue;
            }
            let label = count as i32;
            count += 1;
            queue.clear();
            queue.push((sx, sy));
            labels[sy * width + sx] = label;
            while let Some((x, y)) = queue.pop() {
                let mut visit = |nx: i64, ny: i64| {
                    if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                        return;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if member(nx, ny) && labels[ny * width + nx] < 0 {
                        labels[ny * width + nx] = label;
                        queue.push((nx, ny));
                    }
                };
                visit(x as i64 - 1, y as i64);
                visit(x as i64 + 1, y as i64);
                visit(x as i64, y as i64 - 1);
                visit(x as i64, y as i64 + 1);
                if eight_connected {
                    visit(x as i64 - 1, y as i64 - 1);
                    visit(x as i64 + 1, y as i64 - 1);
                    visit(x as i64 - 1, y as i64 + 1);
                    visit(x as i64 + 1, y as i64 + 1);
                }
            }
        }
    }
    (labels, count)
}

/// Extracts the outer silhouette `S0` and the shoe-opening silhouette `S1`
/// from a rendered shoe mask.
///
/// The mask must contain exactly one 4-connected foreground component with
/// exactly one interior hole. Both contours trace boundary pixel centers
/// counterclockwise; `S1` lies strictly inside `S0`.
pub fn extract_silhouettes(shoe_mask: &BinaryMask) -> Result<(Contour, Contour), OccludeError> {
    let (w, h) = shoe_mask.dimensions();

    let (fg_labels, fg_count) = label_components(w, h, |x, y| shoe_mask.get(x, y), false);
    if fg_count != 1 {
        return Err(OccludeError::Topology {
            foreground: fg_count,
            holes: 0,
        });
    }

    // Background components (8-connected, the dual of 4-connected
    // foreground); those not touching the border are holes.
    let (bg_labels, bg_count) = label_components(w, h, |x, y| !shoe_mask.get(x, y), true);
    let mut touches_border = vec![false; bg_count];
    for x in 0..w {
        for y in [0, h - 1] {
            let l = bg_labels[y * w + x];
            if l >= 0 {
                touches_border[l as usize] = true;
            }
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            let l = bg_labels[y * w + x];
            if l >= 0 {
                touches_border[l as usize] = true;
            }
        }
    }
    let holes: Vec<i32> = (0..bg_count as i32)
        .filter(|&l| !touches_border[l as usize])
        .collect();
    if holes.is_empty() {
        return Err(OccludeError::MissingOpening);
    }
    if holes.len() > 1 {
        return Err(OccludeError::Topology {
            foreground: fg_count,
            holes: holes.len(),
        });
    }
    let hole = holes[0];

    let first_pixel = |pred: &dyn Fn(usize, usize) -> bool| -> Option<(i64, i64)> {
        for y in 0..h {
            for x in 0..w {
                if pred(x, y) {
                    return Some((x as i64, y as i64));
                }
            }
        }
        None
    };

    let fg_start = first_pixel(&|x, y| fg_labels[y * w + x] == 0).expect("component exists");
    let in_fg = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && shoe_mask.get(x as usize, y as usize)
    };
    let s0 = Contour::from_traced(moore_trace(&in_fg, fg_start, 8 * w * h))?;

    let hole_start = first_pixel(&|x, y| bg_labels[y * w + x] == hole).expect("hole exists");
    let in_hole = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && bg_labels[y as usize * w + x as usize] == hole
    };
    let s1 = Contour::from_traced(moore_trace(&in_hole, hole_start, 8 * w * h))?;

    if !point_in_polygon(&s1.vertices()[0], s0.vertices()) {
        return Err(OccludeError::Topology {
            foreground: fg_count,
            holes: 2,
        });
    }
    Ok((s0, s1))
}

/// Leg-mask membership sampled at the nearest pixel, false off-grid.
fn leg_member(leg_mask: &BinaryMask, p: &Pt2) -> bool {
    leg_mask.get_checked(
        ComplexField::round(p.x) as i64,
        ComplexField::round(p.y) as i64,
    )
}

/// Walks `S0` and finds where leg-mask membership toggles.
///
/// Membership is sampled at edge midpoints by nearest pixel; each toggle is
/// then localized by bisection along the contour. Returns `None` (the
/// no-occlusion outcome) when membership never toggles. With more than two
/// toggles, the pair bounding the longest inside-leg arc is returned. The
/// anchors are ordered so the inside-leg arc runs `M0 → M1` in contour
/// (counterclockwise) order.
pub fn mask_contour_intersections(
    leg_mask: &BinaryMask,
    s0: &Contour,
) -> Option<(ContourAnchor, ContourAnchor)> {
    let n = s0.len();
    let membership: Vec<bool> = (0..n)
        .map(|i| {
            let (a, b) = s0.edge(i);
            leg_member(leg_mask, &Pt2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0))
        })
        .collect();

    // A toggle sits between edge i and edge i+1.
    let toggles: Vec<usize> = (0..n)
        .filter(|&i| membership[i] != membership[(i + 1) % n])
        .collect();
    if toggles.is_empty() {
        return None;
    }
    debug_assert!(toggles.len() % 2 == 0);

    // Runs of inside-leg edges start at an outside→inside toggle and end
    // at the following toggle. Pick the longest run by arc length.
    let mut best: Option<(f64, usize, usize)> = None;
    let toggle_count = toggles.len();
    for (idx, &enter) in toggles.iter().enumerate() {
        if !membership[(enter + 1) % n] {
            continue;
        }
        let exit = toggles[(idx + 1) % toggle_count];
        let mut len = 0.0;
        let mut e = (enter + 1) % n;
        loop {
            len += s0.edge_length(e);
            if e == exit {
                break;
            }
            e = (e + 1) % n;
        }
        if best.map_or(true, |(l, _, _)| len > l) {
            best = Some((len, enter, exit));
        }
    }
    let (_, enter, exit) = best?;

    let m0 = localize_toggle(leg_mask, s0, enter);
    let m1 = localize_toggle(leg_mask, s0, exit);
    Some((m0, m1))
}

/// Bisects the membership boundary on the polyline between the midpoints
/// of edge `i` and edge `i + 1`.
fn localize_toggle(leg_mask: &BinaryMask, contour: &Contour, i: usize) -> ContourAnchor {
    let n = contour.len();
    let j = (i + 1) % n;
    // Path parameter s ∈ [0, 1]: s < 0.5 maps to edge i at t ∈ [0.5, 1),
    // s ≥ 0.5 to edge j at t ∈ [0, 0.5].
    let resolve = |s: f64| -> (usize, f64) {
        if s < 0.5 {
            (i, 0.5 + s)
        } else {
            (j, s - 0.5)
        }
    };
    let at = |s: f64| -> Pt2 {
        let (e, t) = resolve(s);
        contour.point_at(e, t)
    };
    let m_lo = leg_member(leg_mask, &at(0.0));
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..30 {
        let mid = (lo + hi) / 2.0;
        if leg_member(leg_mask, &at(mid)) == m_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = (lo + hi) / 2.0;
    let (e, t) = resolve(s);
    ContourAnchor::new(contour, e, t)
}

/// The anchor on `s1` nearest to `m`'s resolved point.
///
/// Ties over equidistant edges resolve to the lowest edge index, then the
/// lowest `t`; exact vertex hits canonicalize onto the edge starting there.
pub fn nearest_contour_point(s1: &Contour, m: &ContourAnchor) -> ContourAnchor {
    let n = s1.len();
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for e in 0..n {
        let (a, b) = s1.edge(e);
        let (d, t) = point_segment_projection(&m.point, &a, &b);
        if d < best.0 {
            best = (d, e, t);
        }
    }
    ContourAnchor::new(s1, best.1, best.2)
}

/// Vertices of the contour arc between two anchors, inclusive of both
/// anchor points, walking forward (increasing edge index) or backward.
fn arc_points(
    contour: &Contour,
    from: &ContourAnchor,
    to: &ContourAnchor,
    forward: bool,
) -> Vec<Pt2> {
    let n = contour.len();
    let mut pts = vec![from.point];
    if forward {
        if from.edge == to.edge && to.t >= from.t {
            pts.push(to.point);
            return dedupe(pts);
        }
        let mut v = (from.edge + 1) % n;
        loop {
            pts.push(contour.vertices()[v]);
            if v == to.edge {
                break;
            }
            v = (v + 1) % n;
        }
    } else {
        if from.edge == to.edge && to.t <= from.t {
            pts.push(to.point);
            return dedupe(pts);
        }
        let mut v = from.edge;
        loop {
            pts.push(contour.vertices()[v]);
            if v == (to.edge + 1) % n {
                break;
            }
            v = (v + n - 1) % n;
        }
    }
    pts.push(to.point);
    dedupe(pts)
}

fn dedupe(pts: Vec<Pt2>) -> Vec<Pt2> {
    let mut out: Vec<Pt2> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().map_or(true, |q| (p - q).norm() > 1e-9) {
            out.push(p);
        }
    }
    out
}

fn polyline_length(pts: &[Pt2]) -> f64 {
    pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn polyline_point_at(pts: &[Pt2], target: f64) -> Pt2 {
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let seg = (w[1] - w[0]).norm();
        if acc + seg >= target && seg > 0.0 {
            let t = (target - acc) / seg;
            return w[0] + (w[1] - w[0]) * t;
        }
        acc += seg;
    }
    *pts.last().unwrap()
}

/// Assembles and rasterizes the occlusion polygon.
///
/// The polygon runs `M0 → N0`, along `S1` from `N0` to `N1` on the side
/// whose arc midpoint lies inside the leg mask (falling back to the
/// shorter arc), `N1 → M1`, and back along the inside-leg arc of `S0` from
/// `M1` to `M0`. The rasterized polygon is intersected with the shoe
/// annulus (`S0` fill minus `S1` fill), keeping the output inside the
/// rendered shoe. Pixels are tested at their centers, boundary inclusive.
#[allow(clippy::too_many_arguments)]
pub fn build_occlusion_mask(
    m0: &ContourAnchor,
    n0: &ContourAnchor,
    m1: &ContourAnchor,
    n1: &ContourAnchor,
    s0: &Contour,
    s1: &Contour,
    leg_mask: Option<&BinaryMask>,
    width: usize,
    height: usize,
) -> Result<BinaryMask, OccludeError> {
    // Pick the S1 arc side.
    let fwd = arc_points(s1, n0, n1, true);
    let bwd = arc_points(s1, n0, n1, false);
    let fwd_len = polyline_length(&fwd);
    let bwd_len = polyline_length(&bwd);
    let shorter = |a: Vec<Pt2>, b: Vec<Pt2>| if fwd_len <= bwd_len { a } else { b };
    let inner_arc = match leg_mask {
        Some(mask) => {
            let fwd_in = leg_member(mask, &polyline_point_at(&fwd, fwd_len / 2.0));
            let bwd_in = leg_member(mask, &polyline_point_at(&bwd, bwd_len / 2.0));
            match (fwd_in, bwd_in) {
                (true, false) => fwd,
                (false, true) => bwd,
                _ => shorter(fwd, bwd),
            }
        }
        None => shorter(fwd, bwd),
    };

    // Inside-leg arc of S0 runs M0 → M1 forward; return along it reversed.
    let outer_return = arc_points(s0, m1, m0, false);

    let mut polygon = vec![m0.point];
    polygon.extend(inner_arc);
    polygon.extend(outer_return);
    // The return arc ends back at M0; drop the closing duplicate.
    if polygon.len() > 1 && (polygon[polygon.len() - 1] - polygon[0]).norm() <= 1e-9 {
        polygon.pop();
    }
    let polygon = dedupe(polygon);

    if !polygon_is_simple(&polygon) {
        return Err(OccludeError::DegenerateGeometry { polygon });
    }

    let raw = fill_polygon(&polygon, width, height);
    let annulus = fill_polygon(s0.vertices(), width, height)
        .subtract(&fill_polygon(s1.vertices(), width, height))?;
    Ok(raw.intersect(&annulus)?)
}

/// Full occlusion pipeline for one frame: silhouettes, intersections,
/// nearest points, polygon. Returns an all-zero mask when the leg does not
/// cross the outer silhouette.
pub fn occlusion_mask(
    shoe_mask: &BinaryMask,
    leg_mask: &BinaryMask,
) -> Result<BinaryMask, OccludeError> {
    let (w, h) = shoe_mask.dimensions();
    let (s0, s1) = extract_silhouettes(shoe_mask)?;
    let Some((m0, m1)) = mask_contour_intersections(leg_mask, &s0) else {
        return Ok(BinaryMask::new(w, h));
    };
    let n0 = nearest_contour_point(&s1, &m0);
    let n1 = nearest_contour_point(&s1, &m1);
    build_occlusion_mask(&m0, &n0, &m1, &n1, &s0, &s1, Some(leg_mask), w, h)
}
