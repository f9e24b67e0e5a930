//! JSON configuration for the simulator and pipeline.
//!
//! Every tunable named by the pipeline stages appears here with its
//! default; a config file only lists the keys it overrides. Unknown keys
//! are rejected to catch typos.

use std::fs;
use std::path::Path;

use footpose::decode::DecodeParams;
use footpose::geom::Intrinsics;
use footpose::stabilize::{PrevPoseSource, StabilizerConfig, TranslationPrediction};
use footpose::targets::Skeleton;
use footpose::track::FlowParams;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub trajectory: TrajectoryConfig,
    pub targets: TargetsConfig,
    pub decode: DecodeConfig,
    pub track: TrackConfig,
    pub stabilize: StabilizeConfig,
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let t = &self.trajectory;
        if t.frames == 0 {
            return Err(HarnessError::Config("frames must be >= 1".into()));
        }
        if t.feet == 0 || t.feet > 2 {
            return Err(HarnessError::Config("feet must be 1 or 2".into()));
        }
        if t.keypoint_noise_px < 0.0 || t.pair_noise_px < 0.0 {
            return Err(HarnessError::Config("noise sigmas must be >= 0".into()));
        }
        if t.tensor_size == 0 || t.image_size == 0 || t.image_size % t.tensor_size != 0 {
            return Err(HarnessError::Config(
                "image_size must be a positive multiple of tensor_size".into(),
            ));
        }
        if self.targets.sigma <= 0.0 || self.targets.paf_half_width <= 0.0 {
            return Err(HarnessError::Config(
                "targets.sigma and targets.paf_half_width must be positive".into(),
            ));
        }
        self.camera()?;
        self.skeleton()?;
        Ok(())
    }

    pub fn camera(&self) -> Result<Intrinsics, HarnessError> {
        let c = &self.trajectory.camera;
        Intrinsics::new(c.fx, c.fy, c.cx, c.cy)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn skeleton(&self) -> Result<Skeleton, HarnessError> {
        let edges = &self.targets.skeleton;
        if edges.len() != 7 {
            return Err(HarnessError::Config(format!(
                "skeleton must have 7 edges, got {}",
                edges.len()
            )));
        }
        let mut array = [(0usize, 0usize); 7];
        for (i, &[a, b]) in edges.iter().enumerate() {
            array[i] = (a, b);
        }
        Skeleton::new(array).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Image-to-tensor coordinate scale (e.g. 4 for 256 → 64).
    pub fn tensor_scale(&self) -> f64 {
        self.trajectory.image_size as f64 / self.trajectory.tensor_size as f64
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fx: 300.0,
            fy: 300.0,
            cx: 128.0,
            cy: 128.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MotionProfile {
    #[default]
    Static,
    Sinusoid,
    Walk,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub frames: usize,
    pub profile: MotionProfile,
    /// Translation amplitude for moving profiles, meters.
    pub amplitude_m: f64,
    /// Rotation amplitude for moving profiles, radians.
    pub amplitude_rad: f64,
    /// Gaussian noise on projected keypoints, image pixels.
    pub keypoint_noise_px: f64,
    /// Gaussian noise on synthesized corner pairs, image pixels.
    pub pair_noise_px: f64,
    pub seed: u64,
    /// Feet in the scene (1 or 2).
    pub feet: usize,
    pub camera: CameraConfig,
    pub image_size: usize,
    pub tensor_size: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            frames: 120,
            profile: MotionProfile::Static,
            amplitude_m: 0.03,
            amplitude_rad: 0.12,
            keypoint_noise_px: 0.0,
            pair_noise_px: 0.0,
            seed: 7,
            feet: 1,
            camera: CameraConfig::default(),
            image_size: 256,
            tensor_size: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TargetsConfig {
    /// Heatmap Gaussian radius in tensor cells.
    pub sigma: f64,
    /// Affinity band half-width in tensor cells.
    pub paf_half_width: f64,
    /// The 7 keypoint connections.
    pub skeleton: Vec<[usize; 2]>,
}

impl Default for TargetsConfig {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            paf_half_width: 2.0,
            skeleton: Skeleton::default()
                .edges()
                .iter()
                .map(|&(a, b)| [a, b])
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub threshold: f64,
    pub nms_radius: f64,
    pub n_samples: usize,
    pub min_score: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        let p = DecodeParams::default();
        Self {
            threshold: p.threshold,
            nms_radius: p.nms_radius,
            n_samples: p.n_samples,
            min_score: p.min_score,
        }
    }
}

impl DecodeConfig {
    pub fn to_params(&self) -> DecodeParams {
        DecodeParams {
            threshold: self.threshold,
            nms_radius: self.nms_radius,
            n_samples: self.n_samples,
            min_score: self.min_score,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub window: usize,
    pub levels: usize,
    pub iterations: usize,
    pub fb_tolerance: f64,
    /// FAST intensity threshold.
    pub fast_threshold: u8,
    pub max_corners: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        let p = FlowParams::default();
        Self {
            window: p.window,
            levels: p.levels,
            iterations: p.iterations,
            fb_tolerance: p.fb_tolerance,
            fast_threshold: 20,
            max_corners: 200,
        }
    }
}

impl TrackConfig {
    pub fn to_flow_params(&self) -> FlowParams {
        FlowParams {
            window: self.window,
            levels: self.levels,
            iterations: self.iterations,
            fb_tolerance: self.fb_tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PrevPoseSourceConfig {
    #[default]
    Refined,
    Raw,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub enum TranslationPredictionConfig {
    #[default]
    #[serde(rename = "propagate_prev")]
    PropagatePrev,
    /// The update formula exactly as printed: base the prediction on the
    /// current measured translation.
    #[serde(rename = "literal_eq5")]
    MeasuredBase,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizeConfig {
    pub alpha: f64,
    pub beta: f64,
    pub d_floor: f64,
    pub weight_clamp: bool,
    pub prev_pose_source: PrevPoseSourceConfig,
    pub translation_prediction: TranslationPredictionConfig,
}

impl Default for StabilizeConfig {
    fn default() -> Self {
        let c = StabilizerConfig::default();
        Self {
            alpha: c.alpha,
            beta: c.beta,
            d_floor: c.d_floor,
            weight_clamp: c.weight_clamp,
            prev_pose_source: PrevPoseSourceConfig::default(),
            translation_prediction: TranslationPredictionConfig::default(),
        }
    }
}

impl StabilizeConfig {
    pub fn to_core(&self) -> StabilizerConfig {
        StabilizerConfig {
            alpha: self.alpha,
            beta: self.beta,
            d_floor: self.d_floor,
            weight_clamp: self.weight_clamp,
            prev_pose_source: match self.prev_pose_source {
                PrevPoseSourceConfig::Refined => PrevPoseSource::Refined,
                PrevPoseSourceConfig::Raw => PrevPoseSource::Raw,
            },
            translation_prediction: match self.translation_prediction {
                TranslationPredictionConfig::PropagatePrev => TranslationPrediction::PropagatePrev,
                TranslationPredictionConfig::MeasuredBase => TranslationPrediction::MeasuredBase,
            },
        }
    }
}
