use footpose_cli::config::{HarnessConfig, MotionProfile};
use footpose_cli::sim::simulate_sequence;
use footpose::decode::{extract_peaks, group_keypoints};
use footpose::geom::{Pt2, Pt3};
use footpose::pnp::{solve_pnp, FootModel, PnpError, mean_reprojection_error};

fn main() {
    let mut cfg = HarnessConfig::default();
    cfg.trajectory.frames = 8;
    cfg.trajectory.feet = 2;
    cfg.trajectory.keypoint_noise_px = 1.0;
    cfg.trajectory.profile = MotionProfile::Walk;
    let frames = simulate_sequence(&cfg).unwrap();
    let f = &frames[4];
    let skeleton = cfg.skeleton().unwrap();
    let p = cfg.decode.to_params();
    let model = FootModel::standard();
    let k = cfg.camera().unwrap();

    let peaks = extract_peaks(&f.tensors.heatmap, p.threshold, p.nms_radius);
    let grouped = group_keypoints(&peaks, &f.tensors.pafmap, &skeleton, p.min_score, p.n_samples);
    for inst in grouped.iter().filter(|i| i.completeness() == 8) {
        let img = inst.scaled(4.0);
        let corr: Vec<(Pt2, Pt3)> = (0..8).map(|c| (img.keypoint(c).unwrap().position, model.keypoints3d()[c])).collect();
        match solve_pnp(&corr, &k) {
            Ok(s) => println!("OK  residual {:.4} iters {} tx {:+.4}", s.residual_px, s.iterations, s.pose.translation.x),
            Err(PnpError::NonConvergence { best }) => {
                println!("STALL residual {:.4} iters {} tx {:+.4} tz {:+.4}", best.residual_px, best.iterations, best.pose.translation.x, best.pose.translation.z);
                // check truth-based residual
                for (foot, pose) in f.true_poses.iter().enumerate() {
                    println!("   truth foot {foot} residual {:.4}", mean_reprojection_error(pose, &corr, &k));
                }
            }
            Err(e) => println!("ERR {e}"),
        }
    }
}
