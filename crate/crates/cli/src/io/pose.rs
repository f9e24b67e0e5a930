//! JSONL pose and corner-pair streams.
//!
//! One JSON object per line keeps fixtures human-diffable. Quaternions are
//! serialized as explicit `qw, qx, qy, qz` fields in that order.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use footpose::geom::{Pt2, Quat, Vec3};
use footpose::{MatchedPairs, Pose};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PoseRecord {
    pub frame: usize,
    #[serde(default)]
    pub foot: usize,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl PoseRecord {
    pub fn from_pose(frame: usize, foot: usize, pose: &Pose, flags: Vec<String>) -> Self {
        let q = pose.rotation.quaternion();
        Self {
            frame,
            foot,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            tx: pose.translation.x,
            ty: pose.translation.y,
            tz: pose.translation.z,
            flags,
        }
    }

    pub fn to_pose(&self) -> Result<Pose, HarnessError> {
        Pose::from_quaternion(
            Quat::new(self.qw, self.qx, self.qy, self.qz),
            Vec3::new(self.tx, self.ty, self.tz),
        )
        .map_err(|e| HarnessError::Format(format!("frame {}: {e}", self.frame)))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PairRecord {
    pub frame: usize,
    #[serde(default)]
    pub foot: usize,
    pub prev: Vec<[f64; 2]>,
    pub cur: Vec<[f64; 2]>,
}

impl PairRecord {
    pub fn from_pairs(frame: usize, foot: usize, pairs: &MatchedPairs) -> Self {
        Self {
            frame,
            foot,
            prev: pairs.prev().iter().map(|p| [p.x, p.y]).collect(),
            cur: pairs.cur().iter().map(|p| [p.x, p.y]).collect(),
        }
    }

    pub fn to_pairs(&self) -> Result<MatchedPairs, HarnessError> {
        MatchedPairs::new(
            self.prev.iter().map(|&[x, y]| Pt2::new(x, y)).collect(),
            self.cur.iter().map(|&[x, y]| Pt2::new(x, y)).collect(),
        )
        .map_err(|e| HarnessError::Format(format!("frame {}: {e}", self.frame)))
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), HarnessError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| HarnessError::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            HarnessError::Format(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use footpose::geom::rotation_from_euler_xyz;

    #[test]
    fn pose_record_round_trip() {
        let pose = Pose::new(
            rotation_from_euler_xyz(0.2, -0.4, 1.1),
            Vec3::new(0.03, -0.02, 0.77),
        );
        let record = PoseRecord::from_pose(4, 1, &pose, vec!["refined".into()]);
        let json = serde_json::to_string(&record).unwrap();
        let back: PoseRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(record, back);
        let pose2 = back.to_pose().unwrap();
        assert!((pose2.rotation.angle_to(&pose.rotation)).abs() < 1e-12);
        assert_eq!(pose2.translation, pose.translation);
    }

    #[test]
    fn jsonl_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.jsonl");
        let records: Vec<PoseRecord> = (0..5)
            .map(|i| {
                PoseRecord::from_pose(
                    i,
                    0,
                    &Pose::new(rotation_from_euler_xyz(0.01 * i as f64, 0.0, 0.0), Vec3::zeros()),
                    vec![],
                )
            })
            .collect();
        write_jsonl(&path, &records).unwrap();
        let back: Vec<PoseRecord> = read_jsonl(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn pair_record_round_trip() {
        let mut pairs = MatchedPairs::empty();
        pairs.push(Pt2::new(1.0, 2.0), Pt2::new(1.5, 2.25));
        pairs.push(Pt2::new(8.0, 3.0), Pt2::new(8.5, 3.25));
        let record = PairRecord::from_pairs(7, 0, &pairs);
        let back = record.to_pairs().unwrap();
        assert_eq!(back, pairs);
    }

    #[test]
    fn zero_quaternion_record_rejected() {
        let record = PoseRecord {
            frame: 0,
            foot: 0,
            qw: 0.0,
            qx: 0.0,
            qy: 0.0,
            qz: 0.0,
            tx: 0.0,
            ty: 0.0,
            tz: 0.0,
            flags: vec![],
        };
        assert!(record.to_pose().is_err());
    }
}
