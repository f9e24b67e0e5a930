//! Monocular foot pose tracking primitives for virtual shoe try-on.
//!
//! The crate covers the geometry and signal-processing path of a shoe
//! try-on pipeline, from network-style output tensors down to a stable
//! 6-DoF pose and an occlusion mask:
//!
//! * [`geom`] — rigid transforms, pinhole projection, Euler conversions.
//! * [`tensor`] — the dense channel/height/width grids the pipeline consumes.
//! * [`targets`] — encoding keypoint/connection/segmentation ground truth
//!   into those grids (the simulator's stand-in for network inference).
//! * [`decode`] — peak extraction and affinity-field grouping of keypoints
//!   into per-foot instances.
//! * [`pnp`] — 6-DoF pose recovery from 2D–3D correspondences plus pose
//!   error metrics.
//! * [`track`] — FAST corners and pyramidal Lucas–Kanade matching between
//!   consecutive frames.
//! * [`stabilize`] — the divergence-weighted pose filter that fuses
//!   flow-predicted motion with the measured pose.
//! * [`occlude`] — silhouette intersection geometry producing the 2D
//!   occlusion region where the leg covers the shoe opening.
//! * [`raster`] — binary masks, point-in-polygon tests and polygon fill
//!   shared by the encoding and occlusion modules.
//!
//! Everything is `no_std` + `alloc`; IO, file formats and the CLI live in
//! the companion `footpose-cli` crate.
//!
//! Quaternions are stored and printed in `(w, x, y, z)` order throughout.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod decode;
pub mod geom;
pub mod occlude;
pub mod pnp;
pub mod raster;
pub mod stabilize;
pub mod targets;
pub mod tensor;
pub mod track;

pub use decode::{DecodeParams, FootInstance, Keypoint, PeakCandidate};
pub use geom::{Intrinsics, PointCloud, Pose};
pub use occlude::{BinaryMask, Contour, ContourAnchor};
pub use pnp::{FootModel, PnpSolution};
pub use stabilize::{Stabilizer, StabilizerConfig};
pub use targets::{OutputTensors, Skeleton};
pub use tensor::Tensor;
pub use track::{FlowParams, FrameImage, MatchedPairs};
