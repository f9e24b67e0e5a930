//! Keypoint decoding and instance grouping.
//!
//! Recovers per-foot keypoint sets from the output grids: local-maximum
//! peak extraction with sub-pixel refinement, affinity-field scoring of
//! candidate connections, and greedy assembly of scored connections into
//! foot instances.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::ComplexField;

use crate::geom::Pt2;
use crate::targets::{Skeleton, NUM_KEYPOINTS};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum DecodeError {
    /// A connection cannot be scored between coincident endpoints.
    CoincidentEndpoints,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::CoincidentEndpoints => {
                write!(f, "connection endpoints coincide; direction undefined")
            }
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for DecodeError {}

/// A located keypoint with its confidence score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub position: Pt2,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(position: Pt2, confidence: f64) -> Self {
        Self {
            position,
            confidence,
        }
    }
}

/// A heatmap local maximum: keypoint channel, sub-pixel position (grid
/// coordinates) and the peak cell's score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakCandidate {
    pub channel: usize,
    pub position: Pt2,
    pub score: f64,
}

/// One foot's grouped keypoints, indexed by keypoint channel.
///
/// Coordinates are in whatever space the keypoints were produced in (grid
/// cells when decoded from tensors); callers converting to image pixels use
/// [`FootInstance::scaled`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FootInstance {
    keypoints: [Option<Keypoint>; NUM_KEYPOINTS],
}

impl FootInstance {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a complete instance from eight positions at confidence 1.
    pub fn from_positions(positions: [Pt2; NUM_KEYPOINTS]) -> Self {
        let mut inst = Self::empty();
        for (i, p) in positions.into_iter().enumerate() {
            inst.keypoints[i] = Some(Keypoint::new(p, 1.0));
        }
        inst
    }

    pub fn keypoint(&self, index: usize) -> Option<&Keypoint> {
        self.keypoints[index].as_ref()
    }

    pub fn set_keypoint(&mut self, index: usize, kp: Keypoint) {
        self.keypoints[index] = Some(kp);
    }

    pub fn keypoints(&self) -> &[Option<Keypoint>; NUM_KEYPOINTS] {
        &self.keypoints
    }

    /// Number of present keypoints; 8 for a full instance.
    pub fn completeness(&self) -> usize {
        self.keypoints.iter().flatten().count()
    }

    pub fn is_full(&self) -> bool {
        self.completeness() == NUM_KEYPOINTS
    }

    /// Mean confidence over present keypoints, 0 when empty.
    pub fn mean_confidence(&self) -> f64 {
        let present = self.completeness();
        if present == 0 {
            return 0.0;
        }
        self.keypoints
            .iter()
            .flatten()
            .map(|kp| kp.confidence)
            .sum::<f64>()
            / present as f64
    }

    /// The same instance with all positions multiplied by `factor`, e.g.
    /// grid-to-image coordinate conversion.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for kp in out.keypoints.iter_mut().flatten() {
            kp.position = Pt2::new(kp.position.x * factor, kp.position.y * factor);
        }
        out
    }
}

/// Decode-stage tuning; every field is a configuration key.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeParams {
    /// Minimum heatmap value for a peak.
    pub threshold: f64,
    /// Suppression radius between peaks of one channel, in cells.
    pub nms_radius: f64,
    /// Sample count for connection scoring.
    pub n_samples: usize,
    /// Minimum connection score for grouping.
    pub min_score: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            threshold: 0.3,
            nms_radius: 3.0,
            n_samples: 10,
            min_score: 0.4,
        }
    }
}

/// Extracts per-channel heatmap peaks.
///
/// A cell qualifies when its value exceeds `threshold` and is not below any
/// of its 8 neighbors; stronger peaks greedily suppress weaker ones within
/// `nms_radius` (per channel). Surviving peaks are refined to sub-pixel
/// positions by a separable quadratic fit over the 3×3 neighborhood.
pub fn extract_peaks(heatmap: &Tensor, threshold: f64, nms_radius: f64) -> Vec<PeakCandidate> {
    let (channels, height, width) = heatmap.shape();
    let mut raw: Vec<(usize, usize, usize, f64)> = Vec::new();

    for c in 0..channels {
        for y in 0..height {
            for x in 0..width {
                let v = heatmap.at(c, y, x) as f64;
                if v <= threshold {
                    continue;
                }
                let mut is_max = true;
                'scan: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                            continue;
                        }
                        if heatmap.at(c, ny as usize, nx as usize) as f64 > v {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if is_max {
                    raw.push((c, x, y, v));
                }
            }
        }
    }

    // Strongest first; deterministic tie-break on (channel, y, x).
    raw.sort_unstable_by(|a, b| {
        b.3.partial_cmp(&a.3)
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then(a.2.cmp(&b.2))
            .then(a.1.cmp(&b.1))
    });

    let r2 = nms_radius * nms_radius;
    let mut accepted: Vec<(usize, usize, usize, f64)> = Vec::new();
    'next: for cand in raw {
        for kept in &accepted {
            if kept.0 != cand.0 {
                continue;
            }
            let dx = kept.1 as f64 - cand.1 as f64;
            let dy = kept.2 as f64 - cand.2 as f64;
            if dx * dx + dy * dy <= r2 {
                continue 'next;
            }
        }
        accepted.push(cand);
    }

    accepted
        .into_iter()
        .map(|(c, x, y, v)| PeakCandidate {
            channel: c,
            position: refine_subpixel(heatmap, c, x, y),
            score: v,
        })
        .collect()
}

/// Quadratic 1D peak refinement per axis, clamped to ±0.5 cells.
///
/// The parabola is fit in the log domain when the triple is strictly
/// positive (exact for Gaussian-shaped peaks), falling back to the value
/// domain otherwise.
fn refine_subpixel(heatmap: &Tensor, c: usize, x: usize, y: usize) -> Pt2 {
    let (_, height, width) = heatmap.shape();
    let offset = |lo: f64, mid: f64, hi: f64| -> f64 {
        let (lo, mid, hi) = if lo > 1e-20 && mid > 1e-20 && hi > 1e-20 {
            (
                ComplexField::ln(lo),
                ComplexField::ln(mid),
                ComplexField::ln(hi),
            )
        } else {
            (lo, mid, hi)
        };
        let denom = lo - 2.0 * mid + hi;
        if ComplexField::abs(denom) < 1e-12 {
            0.0
        } else {
            (0.5 * (lo - hi) / denom).clamp(-0.5, 0.5)
        }
    };
    let mut px = x as f64;
    let mut py = y as f64;
    if x > 0 && x + 1 < width {
        px += offset(
            heatmap.at(c, y, x - 1) as f64,
            heatmap.at(c, y, x) as f64,
            heatmap.at(c, y, x + 1) as f64,
        );
    }
    if y > 0 && y + 1 < height {
        py += offset(
            heatmap.at(c, y - 1, x) as f64,
            heatmap.at(c, y, x) as f64,
            heatmap.at(c, y + 1, x) as f64,
        );
    }
    Pt2::new(px, py)
}

/// Scores the connection hypothesis `pa → pb` against affinity channels
/// `2·edge_index` and `2·edge_index + 1`.
///
/// Averages, over `n_samples` equidistant points of the segment, the dot
/// product of the bilinearly sampled field with the segment's unit
/// direction. Fully aligned fields score 1, orthogonal or empty fields 0.
pub fn connection_score(
    pafmap: &Tensor,
    edge_index: usize,
    pa: &Pt2,
    pb: &Pt2,
    n_samples: usize,
) -> Result<f64, DecodeError> {
    let dir = pb - pa;
    let len = dir.norm();
    if len < 1e-9 {
        return Err(DecodeError::CoincidentEndpoints);
    }
    let u = dir / len;
    let n = n_samples.max(2);
    let mut total = 0.0;
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        let p = pa + dir * t;
        let vx = pafmap.sample_bilinear(2 * edge_index, p.x, p.y);
        let vy = pafmap.sample_bilinear(2 * edge_index + 1, p.x, p.y);
        total += vx * u.x + vy * u.y;
    }
    Ok(total / n as f64)
}

/// Groups peak candidates into foot instances.
///
/// For every skeleton edge, all cross-channel candidate pairs are scored
/// with [`connection_score`]; pairs at or above `min_score` are accepted
/// greedily (best first) so each candidate joins at most one pair per edge.
/// Accepted pairs merge candidates into instances via connected components.
/// Unconnected candidates become singleton instances. Instances are sorted
/// by completeness, then mean confidence.
pub fn group_keypoints(
    candidates: &[PeakCandidate],
    pafmap: &Tensor,
    skeleton: &Skeleton,
    min_score: f64,
    n_samples: usize,
) -> Vec<FootInstance> {
    let n = candidates.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], i: usize) -> usize {
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

    for (e, &(a, b)) in skeleton.edges().iter().enumerate() {
        let mut scored: Vec<(f64, usize, usize)> = Vec::new();
        for (ia, ca) in candidates.iter().enumerate() {
            if ca.channel != a {
                continue;
            }
            for (ib, cb) in candidates.iter().enumerate() {
                if cb.channel != b {
                    continue;
                }
                let Ok(score) =
                    connection_score(pafmap, e, &ca.position, &cb.position, n_samples)
                else {
                    continue;
                };
                if score >= min_score {
                    scored.push((score, ia, ib));
                }
            }
        }
        scored.sort_unstable_by(|x, y| {
            y.0.partial_cmp(&x.0)
                .unwrap()
                .then(x.1.cmp(&y.1))
                .then(x.2.cmp(&y.2))
        });

        let mut used_a: Vec<usize> = Vec::new();
        let mut used_b: Vec<usize> = Vec::new();
        for (_, ia, ib) in scored {
            if used_a.contains(&ia) || used_b.contains(&ib) {
                continue;
            }
            used_a.push(ia);
            used_b.push(ib);
            let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }

    // Components → instances. Components are keyed by root in first-seen
    // order for determinism.
    let mut roots: Vec<usize> = Vec::new();
    let mut instances: Vec<FootInstance> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let slot = match roots.iter().position(|&r| r == root) {
            Some(s) => s,
            None => {
                roots.push(root);
                instances.push(FootInstance::empty());
                roots.len() - 1
            }
        };
        let cand = &candidates[i];
        let keep = match instances[slot].keypoint(cand.channel) {
            // A tree skeleton cannot merge two same-channel candidates, but
            // stay deterministic if scores ever make it happen.
            Some(existing) => cand.score > existing.confidence,
            None => true,
        };
        if keep {
            instances[slot].set_keypoint(cand.channel, Keypoint::new(cand.position, cand.score));
        }
    }

    instances.sort_by(|x, y| {
        y.completeness()
            .cmp(&x.completeness())
            .then(y.mean_confidence().partial_cmp(&x.mean_confidence()).unwrap())
    });
    instances
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{encode_heatmaps, encode_pafs, NUM_EDGES};
    use approx::assert_relative_eq;

    #[test]
    fn all_zero_channel_yields_no_candidates() {
        let t = Tensor::zeros(NUM_KEYPOINTS, 64, 64);
        assert!(extract_peaks(&t, 0.3, 3.0).is_empty());
    }

    #[test]
    fn single_gaussian_gives_one_candidate_at_center() {
        let mut inst = FootInstance::empty();
        inst.set_keypoint(0, Keypoint::new(Pt2::new(32.0, 32.0), 1.0));
        let t = encode_heatmaps(&[inst], 2.0, 64, 64);
        let peaks = extract_peaks(&t, 0.3, 3.0);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].channel, 0);
        assert!((peaks[0].position.x - 32.0).abs() <= 0.25);
        assert!((peaks[0].position.y - 32.0).abs() <= 0.25);
        assert_eq!(peaks[0].score, 1.0);
    }

    #[test]
    fn two_gaussians_give_exactly_two_candidates() {
        let mut a = FootInstance::empty();
        a.set_keypoint(0, Keypoint::new(Pt2::new(16.0, 16.0), 1.0));
        let mut b = FootInstance::empty();
        b.set_keypoint(0, Keypoint::new(Pt2::new(48.0, 48.0), 1.0));
        let t = encode_heatmaps(&[a, b], 2.0, 64, 64);
        let peaks = extract_peaks(&t, 0.3, 3.0);
        assert_eq!(peaks.len(), 2);

        // Exhaustive oracle: scan every cell for strict local maxima above
        // the threshold; NMS cannot merge peaks this far apart.
        let mut oracle = 0;
        for y in 1..63 {
            for x in 1..63 {
                let v = t.at(0, y, x);
                if v as f64 <= 0.3 {
                    continue;
                }
                let mut greater = true;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        if t.at(0, (y as i64 + dy) as usize, (x as i64 + dx) as usize) > v {
                            greater = false;
                        }
                    }
                }
                if greater {
                    oracle += 1;
                }
            }
        }
        assert_eq!(oracle, 2);
    }

    #[test]
    fn subpixel_refinement_recovers_off_center_peak() {
        let mut inst = FootInstance::empty();
        inst.set_keypoint(0, Keypoint::new(Pt2::new(20.3, 41.6), 1.0));
        let t = encode_heatmaps(&[inst], 2.0, 64, 64);
        let peaks = extract_peaks(&t, 0.3, 3.0);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].position.x - 20.3).abs() < 0.2);
        assert!((peaks[0].position.y - 41.6).abs() < 0.2);
    }

    fn uniform_field(vx: f32, vy: f32, edge: usize) -> Tensor {
        let mut t = Tensor::zeros(2 * NUM_EDGES, 16, 16);
        for y in 0..16 {
            for x in 0..16 {
                t.set(2 * edge, y, x, vx);
                t.set(2 * edge + 1, y, x, vy);
            }
        }
        t
    }

    #[test]
    fn aligned_field_scores_one() {
        let t = uniform_field(1.0, 0.0, 2);
        let s = connection_score(&t, 2, &Pt2::new(2.0, 8.0), &Pt2::new(13.0, 8.0), 10).unwrap();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_field_scores_zero() {
        let t = uniform_field(0.0, 1.0, 0);
        let s = connection_score(&t, 0, &Pt2::new(2.0, 8.0), &Pt2::new(13.0, 8.0), 10).unwrap();
        assert_relative_eq!(s, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_field_scores_zero() {
        let t = Tensor::zeros(2 * NUM_EDGES, 16, 16);
        let s = connection_score(&t, 3, &Pt2::new(1.0, 1.0), &Pt2::new(9.0, 5.0), 10).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn coincident_endpoints_error() {
        let t = Tensor::zeros(2 * NUM_EDGES, 16, 16);
        assert_eq!(
            connection_score(&t, 0, &Pt2::new(3.0, 3.0), &Pt2::new(3.0, 3.0), 10),
            Err(DecodeError::CoincidentEndpoints)
        );
    }

    #[test]
    fn score_is_antisymmetric_under_reversal() {
        let mut t = Tensor::zeros(2 * NUM_EDGES, 16, 16);
        // A non-trivial smooth field.
        for y in 0..16 {
            for x in 0..16 {
                t.set(0, y, x, ((x as f32) / 15.0 - 0.3).sin());
                t.set(1, y, x, ((y as f32) / 9.0).cos() * 0.5);
            }
        }
        let pa = Pt2::new(2.0, 3.0);
        let pb = Pt2::new(12.0, 11.0);
        let fwd = connection_score(&t, 0, &pa, &pb, 10).unwrap();
        let bwd = connection_score(&t, 0, &pb, &pa, 10).unwrap();
        assert_relative_eq!(fwd, -bwd, epsilon = 1e-12);
    }

    /// Spread-out template so every keypoint is ≥ 6σ from the others.
    fn spread_template(offset: Pt2) -> [Pt2; NUM_KEYPOINTS] {
        [
            Pt2::new(6.0, 6.0),
            Pt2::new(6.0, 26.0),
            Pt2::new(6.0, 46.0),
            Pt2::new(26.0, 6.0),
            Pt2::new(26.0, 26.0),
            Pt2::new(26.0, 46.0),
            Pt2::new(46.0, 6.0),
            Pt2::new(46.0, 26.0),
        ]
        .map(|p| Pt2::new(p.x + offset.x, p.y + offset.y))
    }

    #[test]
    fn perfect_tensors_round_trip_single_foot() {
        let skeleton = Skeleton::default();
        let truth = FootInstance::from_positions(spread_template(Pt2::new(4.0, 6.0)));
        let heat = encode_heatmaps(&[truth.clone()], 2.0, 64, 64);
        let (paf, _) = encode_pafs(&[truth.clone()], &skeleton, 2.0, 64, 64);

        let peaks = extract_peaks(&heat, 0.3, 3.0);
        let instances = group_keypoints(&peaks, &paf, &skeleton, 0.4, 10);
        assert_eq!(instances.len(), 1);
        assert!(instances[0].is_full());
        for c in 0..NUM_KEYPOINTS {
            let got = instances[0].keypoint(c).unwrap().position;
            let want = truth.keypoint(c).unwrap().position;
            assert!(
                (got - want).norm() <= 0.5,
                "keypoint {c}: {got:?} vs {want:?}"
            );
        }
    }

    #[test]
    fn below_min_score_yields_singletons() {
        let skeleton = Skeleton::default();
        let two_feet = [
            FootInstance::from_positions(spread_template(Pt2::new(0.0, 0.0))),
            FootInstance::from_positions(spread_template(Pt2::new(11.0, 11.0))),
        ];
        let heat = encode_heatmaps(&two_feet, 2.0, 64, 64);
        let paf = Tensor::zeros(2 * NUM_EDGES, 64, 64);
        let peaks = extract_peaks(&heat, 0.3, 3.0);
        assert_eq!(peaks.len(), 16);
        let instances = group_keypoints(&peaks, &paf, &skeleton, 0.4, 10);
        assert_eq!(instances.len(), 16);
        assert!(instances.iter().all(|i| i.completeness() == 1));
    }

    #[test]
    fn two_separated_feet_group_without_cross_assignments() {
        let skeleton = Skeleton::default();

        // Two compact feet, far apart, so each foot's connections clear its
        // own affinity band but inter-foot pairs do not.
        let foot = |cx: f64, cy: f64| {
            FootInstance::from_positions([
                Pt2::new(cx - 6.0, cy - 9.0),
                Pt2::new(cx, cy + 9.0),
                Pt2::new(cx + 6.0, cy - 9.0),
                Pt2::new(cx - 5.0, cy + 3.0),
                Pt2::new(cx + 5.0, cy + 3.0),
                Pt2::new(cx - 5.0, cy - 4.0),
                Pt2::new(cx + 5.0, cy - 4.0),
                Pt2::new(cx, cy - 1.0),
            ])
        };
        let left = foot(15.0, 28.0);
        let right = foot(47.0, 34.0);
        let both = [left.clone(), right.clone()];
        let heat = encode_heatmaps(&both, 1.5, 64, 64);
        let (paf, _) = encode_pafs(&both, &skeleton, 1.5, 64, 64);
        let peaks = extract_peaks(&heat, 0.3, 3.0);
        assert_eq!(peaks.len(), 16);
        let instances = group_keypoints(&peaks, &paf, &skeleton, 0.4, 10);

        let full: Vec<_> = instances.iter().filter(|i| i.is_full()).collect();
        assert_eq!(full.len(), 2, "expected two full instances");
        for inst in &full {
            // Every keypoint of an instance must come from the same foot.
            let origin = |p: &Pt2| if p.x < 32.0 { 0 } else { 1 };
            let tags: Vec<_> = (0..NUM_KEYPOINTS)
                .map(|c| origin(&inst.keypoint(c).unwrap().position))
                .collect();
            assert!(
                tags.iter().all(|&t| t == tags[0]),
                "cross-foot assignment: {tags:?}"
            );
        }
    }

    #[test]
    fn greedy_matching_is_score_optimal_for_two_feet() {
        // Enumerate, per edge, both bijective assignments between the two
        // candidate pairs (2^7 combinations) and verify that the grouping
        // the greedy stage accepted attains the maximum total score.
        let skeleton = Skeleton::default();
        let foot = |cx: f64, cy: f64| {
            FootInstance::from_positions([
                Pt2::new(cx - 6.0, cy - 9.0),
                Pt2::new(cx, cy + 9.0),
                Pt2::new(cx + 6.0, cy - 9.0),
                Pt2::new(cx - 5.0, cy + 3.0),
                Pt2::new(cx + 5.0, cy + 3.0),
                Pt2::new(cx - 5.0, cy - 4.0),
                Pt2::new(cx + 5.0, cy - 4.0),
                Pt2::new(cx, cy - 1.0),
            ])
        };
        let both = [foot(15.0, 28.0), foot(47.0, 34.0)];
        let heat = encode_heatmaps(&both, 1.5, 64, 64);
        let (paf, _) = encode_pafs(&both, &skeleton, 1.5, 64, 64);
        let peaks = extract_peaks(&heat, 0.3, 3.0);

        // Candidates per channel, in peak order.
        let per_channel: Vec<Vec<&PeakCandidate>> = (0..NUM_KEYPOINTS)
            .map(|c| peaks.iter().filter(|p| p.channel == c).collect())
            .collect();
        assert!(per_channel.iter().all(|v| v.len() == 2));

        let edge_score = |e: usize, a: &PeakCandidate, b: &PeakCandidate| {
            connection_score(&paf, e, &a.position, &b.position, 10)
                .unwrap()
                .max(0.0)
        };

        let mut best_total = f64::NEG_INFINITY;
        let mut straight_total = 0.0;
        for combo in 0..(1u32 << NUM_EDGES) {
            let mut total = 0.0;
            for (e, &(a, b)) in skeleton.edges().iter().enumerate() {
                let crossed = combo & (1 << e) != 0;
                let (ca, cb) = (&per_channel[a], &per_channel[b]);
                if crossed {
                    total += edge_score(e, ca[0], cb[1]) + edge_score(e, ca[1], cb[0]);
                } else {
                    total += edge_score(e, ca[0], cb[0]) + edge_score(e, ca[1], cb[1]);
                }
            }
            if combo == 0 {
                straight_total = total;
            }
            best_total = best_total.max(total);
        }

        // The straight (non-crossed) assignment is the true grouping here;
        // greedy must reach the same optimum.
        assert_relative_eq!(straight_total, best_total, epsilon = 1e-9);
        let instances = group_keypoints(&peaks, &paf, &skeleton, 0.4, 10);
        assert_eq!(instances.iter().filter(|i| i.is_full()).count(), 2);
    }

    #[test]
    fn candidates_never_shared_between_instances() {
        let skeleton = Skeleton::default();
        let both = [
            FootInstance::from_positions(spread_template(Pt2::new(0.0, 0.0))),
            FootInstance::from_positions(spread_template(Pt2::new(12.0, 12.0))),
        ];
        let heat = encode_heatmaps(&both, 2.0, 64, 64);
        let (paf, _) = encode_pafs(&both, &skeleton, 2.0, 64, 64);
        let peaks = extract_peaks(&heat, 0.3, 3.0);
        let instances = group_keypoints(&peaks, &paf, &skeleton, 0.4, 10);
        let total: usize = instances.iter().map(|i| i.completeness()).sum();
        assert_eq!(total, peaks.len());
    }
}
