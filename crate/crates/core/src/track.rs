//! Corner detection and frame-to-frame matching.
//!
//! FAST-9 corners restricted to a foot-region mask, matched between
//! consecutive grayscale frames by pyramidal Lucas–Kanade flow with a
//! forward-backward consistency check. The stabilizer consumes the
//! resulting [`MatchedPairs`] through that type alone, so simulated pairs
//! can be injected without images.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geom::{Pt2, Vec2};
use crate::raster::BinaryMask;

#[derive(Clone, Debug, PartialEq)]
pub enum TrackError {
    /// Intensity buffer length does not equal `width · height`.
    LengthMismatch { expected: usize, got: usize },
    /// Mask or image dimensions do not agree.
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    /// Matched point lists must have equal length.
    UnequalPairLists { prev: usize, cur: usize },
    /// The tracking window must be odd and at least 5 pixels.
    InvalidWindow { window: usize },
}

impl fmt::Display for TrackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackError::LengthMismatch { expected, got } => {
                write!(f, "intensity buffer length {got}, expected {expected}")
            }
            TrackError::DimensionMismatch { left, right } => write!(
                f,
                "dimensions {}x{} and {}x{} do not match",
                left.0, left.1, right.0, right.1
            ),
            TrackError::UnequalPairLists { prev, cur } => {
                write!(f, "pair lists of length {prev} and {cur}")
            }
            TrackError::InvalidWindow { window } => {
                write!(f, "window {window} must be odd and >= 5")
            }
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for TrackError {}

/// 8-bit grayscale frame, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameImage {
    width: usize,
    height: usize,
    intensities: Vec<u8>,
}

impl FrameImage {
    pub fn new(width: usize, height: usize, intensities: Vec<u8>) -> Result<Self, TrackError> {
        if intensities.len() != width * height {
            return Err(TrackError::LengthMismatch {
                expected: width * height,
                got: intensities.len(),
            });
        }
        Ok(Self {
            width,
            height,
            intensities,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut intensities = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                intensities.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            intensities,
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
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.intensities[y * self.width + x]
    }

    pub fn intensities(&self) -> &[u8] {
        &self.intensities
    }
}

/// Equal-length corner point lists with index-wise correspondence between
/// the previous and current frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchedPairs {
    prev: Vec<Pt2>,
    cur: Vec<Pt2>,
}

impl MatchedPairs {
    pub fn new(prev: Vec<Pt2>, cur: Vec<Pt2>) -> Result<Self, TrackError> {
        if prev.len() != cur.len() {
            return Err(TrackError::UnequalPairLists {
                prev: prev.len(),
                cur: cur.len(),
            });
        }
        Ok(Self { prev, cur })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, prev: Pt2, cur: Pt2) {
        self.prev.push(prev);
        self.cur.push(cur);
    }

    pub fn len(&self) -> usize {
        self.prev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prev.is_empty()
    }

    pub fn prev(&self) -> &[Pt2] {
        &self.prev
    }

    pub fn cur(&self) -> &[Pt2] {
        &self.cur
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pt2, &Pt2)> {
        self.prev.iter().zip(self.cur.iter())
    }
}

/// Lucas–Kanade tuning; every field is a configuration key.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    /// Square window side, odd, ≥ 5.
    pub window: usize,
    /// Pyramid levels.
    pub levels: usize,
    /// Iterations per level.
    pub iterations: usize,
    /// Max forward-backward error for a pair to survive, pixels.
    pub fb_tolerance: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            window: 11,
            levels: 3,
            iterations: 20,
            fb_tolerance: 1.0,
        }
    }
}

/// Bresenham circle of radius 3 used by the segment test.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// Minimum contiguous arc length for the segment test.
const FAST_ARC: usize = 9;

/// FAST-9 corners inside the mask, strongest first, at most `max_corners`.
///
/// A pixel qualifies when ≥ 9 contiguous circle pixels are all brighter or
/// all darker than the center by more than `threshold`. The corner score is
/// the sum of absolute center differences over the qualifying arc; corners
/// are non-max suppressed over their 8-neighborhood. Only mask pixels at
/// least 3 px from the border are considered.
pub fn detect_fast(
    image: &FrameImage,
    mask: &BinaryMask,
    threshold: u8,
    max_corners: usize,
) -> Result<Vec<Pt2>, TrackError> {
    if mask.dimensions() != image.dimensions() {
        return Err(TrackError::DimensionMismatch {
            left: image.dimensions(),
            right: mask.dimensions(),
        });
    }
    let (w, h) = image.dimensions();
    if w < 7 || h < 7 {
        return Ok(Vec::new());
    }
    let t = threshold as i32;

    let mut scores = vec![0i32; w * h];
    let mut candidates: Vec<(usize, usize)> = Vec::new();

    for y in 3..h - 3 {
        for x in 3..w - 3 {
            if !mask.get(x, y) {
                continue;
            }
            let c = image.get(x, y) as i32;

            // Compass pre-test: an arc of 9 must cover ≥ 3 of the 4
            // cardinal circle pixels on the same side.
            let compass = [0usize, 4, 8, 12].map(|i| {
                let (dx, dy) = CIRCLE[i];
                image.get((x as i32 + dx) as usize, (y as i32 + dy) as usize) as i32
            });
            let brighter = compass.iter().filter(|&&v| v > c + t).count();
            let darker = compass.iter().filter(|&&v| v < c - t).count();
            if brighter < 3 && darker < 3 {
                continue;
            }

            let ring = CIRCLE.map(|(dx, dy)| {
                image.get((x as i32 + dx) as usize, (y as i32 + dy) as usize) as i32
            });
            let score = fast_segment_score(c, &ring, t);
            if score > 0 {
                scores[y * w + x] = score;
                candidates.push((x, y));
            }
        }
    }

    // 3×3 non-max suppression on the score grid; raster order breaks ties.
    let mut corners: Vec<(i32, usize, usize)> = Vec::new();
    'cand: for &(x, y) in &candidates {
        let s = scores[y * w + x];
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                let ns = scores[ny * w + nx];
                if ns > s || (ns == s && (ny, nx) < (y, x)) {
                    continue 'cand;
                }
            }
        }
        corners.push((s, x, y));
    }

    corners.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    corners.truncate(max_corners);
    Ok(corners
        .into_iter()
        .map(|(_, x, y)| Pt2::new(x as f64, y as f64))
        .collect())
}

/// Best qualifying arc score, or 0 when no arc of ≥ 9 exists.
fn fast_segment_score(center: i32, ring: &[i32; 16], t: i32) -> i32 {
    let mut best = 0i32;
    for side in [1i32, -1i32] {
        let on = |v: i32| -> bool {
            if side > 0 {
                v > center + t
            } else {
                v < center - t
            }
        };
        let mut run = 0usize;
        let mut run_sum = 0i32;
        let mut qualified: i32 = 0;
        // Walk twice around so wrap-around arcs are contiguous; cap the run
        // at 16 to not double count a full circle.
        for i in 0..32 {
            let v = ring[i % 16];
            if on(v) && run < 16 {
                run += 1;
                run_sum += (v - center).abs();
                if run >= FAST_ARC {
                    qualified = qualified.max(run_sum);
                }
            } else {
                run = 0;
                run_sum = 0;
            }
        }
        best = best.max(qualified);
    }
    best
}

/// One pyramid level as f32 with clamped bilinear access.
struct Level {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Level {
    fn from_image(image: &FrameImage) -> Self {
        Self {
            w: image.width,
            h: image.height,
            data: image.intensities.iter().map(|&v| v as f32).collect(),
        }
    }

    fn downsample(&self) -> Self {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let s = self.at(2 * x, 2 * y)
                    + self.at(2 * x + 1, 2 * y)
                    + self.at(2 * x, 2 * y + 1)
                    + self.at(2 * x + 1, 2 * y + 1);
                data.push(s / 4.0);
            }
        }
        Self { w, h, data }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y.min(self.h - 1) * self.w + x.min(self.w - 1)]
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x as usize;
        let y0 = y as usize;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.at(x0, y0) as f64;
        let v10 = self.at(x0 + 1, y0) as f64;
        let v01 = self.at(x0, y0 + 1) as f64;
        let v11 = self.at(x0 + 1, y0 + 1) as f64;
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    fn grad(&self, x: f64, y: f64) -> Vec2 {
        Vec2::new(
            (self.bilinear(x + 1.0, y) - self.bilinear(x - 1.0, y)) / 2.0,
            (self.bilinear(x, y + 1.0) - self.bilinear(x, y - 1.0)) / 2.0,
        )
    }
}

fn build_pyramid(image: &FrameImage, levels: usize) -> Vec<Level> {
    let mut pyramid = Vec::with_capacity(levels);
    pyramid.push(Level::from_image(image));
    for _ in 1..levels {
        let next = pyramid.last().unwrap().downsample();
        if next.w < 8 || next.h < 8 {
            break;
        }
        pyramid.push(next);
    }
    pyramid
}

/// Tracks one point from `src` to `dst`, coarse to fine.
fn lk_track(src: &[Level], dst: &[Level], point: &Pt2, params: &FlowParams) -> Option<Pt2> {
    let hw = (params.window / 2) as f64;
    let mut flow = Vec2::zeros();

    for level_idx in (0..src.len()).rev() {
        let scale = (1u64 << level_idx) as f64;
        let p = Pt2::new(point.x / scale, point.y / scale);
        let src_level = &src[level_idx];
        let dst_level = &dst[level_idx];

        if !window_in_bounds(src_level, &p, hw) {
            // Too close to the border at this resolution; try finer levels.
            if level_idx == 0 {
                return None;
            }
            flow *= 2.0;
            continue;
        }

        // Spatial gradient matrix from the source patch, fixed per level.
        let mut gxx = 0.0;
        let mut gxy = 0.0;
        let mut gyy = 0.0;
        let n = params.window as i64;
        for wy in 0..n {
            for wx in 0..n {
                let sx = p.x + wx as f64 - hw;
                let sy = p.y + wy as f64 - hw;
                let g = src_level.grad(sx, sy);
                gxx += g.x * g.x;
                gxy += g.x * g.y;
                gyy += g.y * g.y;
            }
        }
        let det = gxx * gyy - gxy * gxy;
        if det < 1e-9 {
            return None;
        }
        let inv = [gyy / det, -gxy / det, gxx / det];

        for _ in 0..params.iterations {
            let q = Pt2::new(p.x + flow.x, p.y + flow.y);
            if !window_in_bounds(dst_level, &q, hw) {
                return None;
            }
            let mut bx = 0.0;
            let mut by = 0.0;
            for wy in 0..n {
                for wx in 0..n {
                    let sx = p.x + wx as f64 - hw;
                    let sy = p.y + wy as f64 - hw;
                    let delta =
                        src_level.bilinear(sx, sy) - dst_level.bilinear(sx + flow.x, sy + flow.y);
                    let g = src_level.grad(sx, sy);
                    bx += delta * g.x;
                    by += delta * g.y;
                }
            }
            let step = Vec2::new(inv[0] * bx + inv[1] * by, inv[1] * bx + inv[2] * by);
            flow += step;
            if step.norm() < 0.01 {
                break;
            }
        }

        if level_idx > 0 {
            flow *= 2.0;
        }
    }

    let out = Pt2::new(point.x + flow.x, point.y + flow.y);
    let base = &dst[0];
    if out.x < 0.0 || out.y < 0.0 || out.x > (base.w - 1) as f64 || out.y > (base.h - 1) as f64 {
        return None;
    }
    Some(out)
}

fn window_in_bounds(level: &Level, p: &Pt2, hw: f64) -> bool {
    p.x - hw - 1.0 >= 0.0
        && p.y - hw - 1.0 >= 0.0
        && p.x + hw + 1.0 <= (level.w - 1) as f64
        && p.y + hw + 1.0 <= (level.h - 1) as f64
}

/// Matches corners from `prev` into `cur` with pyramidal Lucas–Kanade and
/// keeps only pairs whose backward track lands within `fb_tolerance` of
/// the original corner. Output order follows the input corner order.
pub fn match_corners(
    prev: &FrameImage,
    cur: &FrameImage,
    corners: &[Pt2],
    params: &FlowParams,
) -> Result<MatchedPairs, TrackError> {
    if prev.dimensions() != cur.dimensions() {
        return Err(TrackError::DimensionMismatch {
            left: prev.dimensions(),
            right: cur.dimensions(),
        });
    }
    if params.window < 5 || params.window % 2 == 0 {
        return Err(TrackError::InvalidWindow {
            window: params.window,
        });
    }

    let pyr_prev = build_pyramid(prev, params.levels.max(1));
    let pyr_cur = build_pyramid(cur, params.levels.max(1));

    let mut pairs = MatchedPairs::empty();
    for corner in corners {
        let Some(forward) = lk_track(&pyr_prev, &pyr_cur, corner, params) else {
            continue;
        };
        let Some(backward) = lk_track(&pyr_cur, &pyr_prev, &forward, params) else {
            continue;
        };
        if (backward - corner).norm() <= params.fb_tolerance {
            pairs.push(*corner, forward);
        }
    }
    Ok(pairs)
}
