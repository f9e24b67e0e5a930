//! Ground-truth tensor encoding.
//!
//! Turns annotated foot instances into the channel layout the network-style
//! decode stage consumes: 8 keypoint heatmap channels, 14 part-affinity
//! channels (7 connections × x/y) and 2 segmentation channels. These
//! encoders both define the training-target semantics and stand in for
//! network inference inside the simulator.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::ComplexField;

use crate::decode::FootInstance;
use crate::geom::Pt2;
use crate::raster::{fill_polygon, point_segment_distance, polygon_is_simple};
use crate::tensor::{Tensor, TensorError};

pub const NUM_KEYPOINTS: usize = 8;
pub const NUM_EDGES: usize = 7;
pub const PAF_CHANNELS: usize = 2 * NUM_EDGES;
pub const SEG_CHANNELS: usize = 2;
/// Segmentation channel holding the leg region.
pub const SEG_LEG: usize = 0;
/// Segmentation channel holding the foot region.
pub const SEG_FOOT: usize = 1;

/// Default Gaussian radius for heatmap encoding, in grid cells.
pub const DEFAULT_SIGMA: f64 = 2.0;
/// Default half-width of the affinity band around each connection, in cells.
pub const DEFAULT_PAF_HALF_WIDTH: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub enum TargetsError {
    SkeletonEdgeOutOfRange { edge: (usize, usize) },
    SkeletonDuplicateEdge { edge: (usize, usize) },
    SkeletonNotConnected,
    /// The toe–side connection (keypoints 1 and 3) must be present.
    SkeletonMissingToeEdge,
    SelfIntersectingPolygon { channel: usize, index: usize },
    Tensor(TensorError),
}

impl fmt::Display for TargetsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetsError::SkeletonEdgeOutOfRange { edge } => {
                write!(f, "skeleton edge ({}, {}) is out of range", edge.0, edge.1)
            }
            TargetsError::SkeletonDuplicateEdge { edge } => {
                write!(f, "skeleton edge ({}, {}) appears twice", edge.0, edge.1)
            }
            TargetsError::SkeletonNotConnected => {
                write!(f, "skeleton edges do not connect all {NUM_KEYPOINTS} keypoints")
            }
            TargetsError::SkeletonMissingToeEdge => {
                write!(f, "skeleton is missing the (1, 3) connection")
            }
            TargetsError::SelfIntersectingPolygon { channel, index } => {
                write!(f, "polygon {index} of channel {channel} self-intersects")
            }
            TargetsError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for TargetsError {}

impl From<TensorError> for TargetsError {
    fn from(e: TensorError) -> Self {
        TargetsError::Tensor(e)
    }
}

/// The seven keypoint connections of one foot.
///
/// Edges are directed `(from, to)` for affinity-field purposes; validation
/// treats them as undirected. The set must connect all eight keypoints,
/// which with seven edges makes it a spanning tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skeleton {
    edges: [(usize, usize); NUM_EDGES],
}

impl Skeleton {
    pub fn new(edges: [(usize, usize); NUM_EDGES]) -> Result<Self, TargetsError> {
        let mut seen = [[false; NUM_KEYPOINTS]; NUM_KEYPOINTS];
        for &(a, b) in &edges {
            if a >= NUM_KEYPOINTS || b >= NUM_KEYPOINTS || a == b {
                return Err(TargetsError::SkeletonEdgeOutOfRange { edge: (a, b) });
            }
            if seen[a][b] {
                return Err(TargetsError::SkeletonDuplicateEdge { edge: (a, b) });
            }
            seen[a][b] = true;
            seen[b][a] = true;
        }

        // Union-find connectivity over the 8 keypoints.
        let mut parent: [usize; NUM_KEYPOINTS] = core::array::from_fn(|i| i);
        fn find(parent: &mut [usize; NUM_KEYPOINTS], i: usize) -> usize {
            let mut root = i;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = i;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        for &(a, b) in &edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        if (1..NUM_KEYPOINTS).any(|i| find(&mut parent, i) != root) {
            return Err(TargetsError::SkeletonNotConnected);
        }

        if !edges
            .iter()
            .any(|&(a, b)| (a, b) == (1, 3) || (a, b) == (3, 1))
        {
            return Err(TargetsError::SkeletonMissingToeEdge);
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[(usize, usize); NUM_EDGES] {
        &self.edges
    }
}

impl Default for Skeleton {
    /// Toe (1) to the front sides (3, 4), sides to the rear sides (5, 6),
    /// rear sides to the heel pair (0, 2), instep (7) to the toe.
    fn default() -> Self {
        Self::new([(1, 3), (1, 4), (3, 5), (4, 6), (5, 0), (6, 2), (7, 1)])
            .expect("default skeleton is valid")
    }
}

/// The three decoded-network grids for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputTensors {
    pub heatmap: Tensor,
    pub pafmap: Tensor,
    pub segmap: Tensor,
}

impl OutputTensors {
    /// Validates the channel layout and that all grids share one size.
    pub fn new(heatmap: Tensor, pafmap: Tensor, segmap: Tensor) -> Result<Self, TargetsError> {
        let (h, w) = (heatmap.height(), heatmap.width());
        heatmap.expect_shape(NUM_KEYPOINTS, h, w)?;
        pafmap.expect_shape(PAF_CHANNELS, h, w)?;
        segmap.expect_shape(SEG_CHANNELS, h, w)?;
        Ok(Self {
            heatmap,
            pafmap,
            segmap,
        })
    }

    pub fn grid_size(&self) -> (usize, usize) {
        (self.heatmap.height(), self.heatmap.width())
    }
}

/// Per-call diagnostics from [`encode_pafs`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PafDiagnostics {
    /// `(instance index, edge index)` pairs skipped for coincident endpoints.
    pub degenerate_edges: Vec<(usize, usize)>,
}

/// Encodes keypoints as per-channel Gaussian peaks, combined across
/// instances by per-pixel maximum so the peak value stays 1.
///
/// `sigma` must be positive. Missing keypoints contribute nothing.
pub fn encode_heatmaps(
    instances: &[FootInstance],
    sigma: f64,
    height: usize,
    width: usize,
) -> Tensor {
    assert!(sigma > 0.0, "sigma must be positive");
    let mut t = Tensor::zeros(NUM_KEYPOINTS, height, width);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for instance in instances {
        for c in 0..NUM_KEYPOINTS {
            let Some(kp) = instance.keypoint(c) else {
                continue;
            };
            for y in 0..height {
                let dy = y as f64 - kp.position.y;
                for x in 0..width {
                    let dx = x as f64 - kp.position.x;
                    let v = ComplexField::exp(-(dx * dx + dy * dy) * inv) as f32;
                    if v > t.at(c, y, x) {
                        t.set(c, y, x, v);
                    }
                }
            }
        }
    }
    t
}

/// Encodes each skeleton connection as a unit direction field on the band
/// of cells within `half_width` of the segment; overlapping instances
/// average.
///
/// Edges with coincident endpoints are skipped and reported in the
/// diagnostics.
pub fn encode_pafs(
    instances: &[FootInstance],
    skeleton: &Skeleton,
    half_width: f64,
    height: usize,
    width: usize,
) -> (Tensor, PafDiagnostics) {
    assert!(half_width > 0.0, "half_width must be positive");
    let mut acc = vec![0.0f64; PAF_CHANNELS * height * width];
    let mut counts = vec![0u32; NUM_EDGES * height * width];
    let mut diagnostics = PafDiagnostics::default();

    for (ii, instance) in instances.iter().enumerate() {
        for (e, &(a, b)) in skeleton.edges().iter().enumerate() {
            let (Some(ka), Some(kb)) = (instance.keypoint(a), instance.keypoint(b)) else {
                continue;
            };
            let dir = kb.position - ka.position;
            let len = dir.norm();
            if len < 1e-9 {
                diagnostics.degenerate_edges.push((ii, e));
                continue;
            }
            let u = dir / len;

            let x0 = ((ka.position.x.min(kb.position.x) - half_width).floor().max(0.0)) as usize;
            let x1 = ((ka.position.x.max(kb.position.x) + half_width).ceil()) as usize;
            let y0 = ((ka.position.y.min(kb.position.y) - half_width).floor().max(0.0)) as usize;
            let y1 = ((ka.position.y.max(kb.position.y) + half_width).ceil()) as usize;
            for y in y0..=y1.min(height.saturating_sub(1)) {
                for x in x0..=x1.min(width.saturating_sub(1)) {
                    let p = Pt2::new(x as f64, y as f64);
                    if point_segment_distance(&p, &ka.position, &kb.position) <= half_width {
                        let cell = y * width + x;
                        acc[(2 * e) * height * width + cell] += u.x;
                        acc[(2 * e + 1) * height * width + cell] += u.y;
                        counts[e * height * width + cell] += 1;
                    }
                }
            }
        }
    }

    let mut t = Tensor::zeros(PAF_CHANNELS, height, width);
    for e in 0..NUM_EDGES {
        for cell in 0..height * width {
            let n = counts[e * height * width + cell];
            if n > 0 {
                let plane = height * width;
                let x_val = acc[(2 * e) * plane + cell] / n as f64;
                let y_val = acc[(2 * e + 1) * plane + cell] / n as f64;
                t.data_mut()[(2 * e) * plane + cell] = x_val as f32;
                t.data_mut()[(2 * e + 1) * plane + cell] = y_val as f32;
            }
        }
    }
    (t, diagnostics)
}

/// Rasterizes leg and foot polygon lists into the two segmentation
/// channels by boundary-inclusive pixel-center membership.
///
/// Every polygon must be simple; empty lists leave their channel zero.
pub fn encode_segmentation(
    leg_polygons: &[Vec<Pt2>],
    foot_polygons: &[Vec<Pt2>],
    height: usize,
    width: usize,
) -> Result<Tensor, TargetsError> {
    let mut t = Tensor::zeros(SEG_CHANNELS, height, width);
    for (channel, polygons) in [(SEG_LEG, leg_polygons), (SEG_FOOT, foot_polygons)] {
        for (index, polygon) in polygons.iter().enumerate() {
            if !polygon_is_simple(polygon) {
                return Err(TargetsError::SelfIntersectingPolygon { channel, index });
            }
            let mask = fill_polygon(polygon, width, height);
            for y in 0..height {
                for x in 0..width {
                    if mask.get(x, y) {
                        t.set(channel, y, x, 1.0);
                    }
                }
            }
        }
    }
    Ok(t)
}
