//! Driving the loop from flow and depth files, as an external estimator would.
//!
//! Oracle files are exported along a reference run, then the same task is
//! replayed reading only those files.

use flowservo::observation::provider::write_oracle_files;
use flowservo::{
    generate_scene, run_servo, sample_task, ControllerConfig, Difficulty, Limits, Method, MethodSpec, Rig, SceneParams,
};

fn main() -> flowservo::Result<()> {
    let rig = Rig::default();
    let cfg = ControllerConfig::default();
    let limits = Limits::default();
    let scene = generate_scene(2, SceneParams::plane())?;
    let task = sample_task(2, Difficulty::Easy, &scene, &rig)?;

    let reference = run_servo(&task, &Method::FlowTrueDepth.into(), &cfg, &limits, &rig)?;
    let dir = std::env::temp_dir().join("flowservo_providers");
    std::fs::create_dir_all(&dir).map_err(|e| flowservo::Error::Io { path: dir.clone(), source: e })?;
    let mut poses: Vec<_> = reference.log.iter().map(|e| e.pose).collect();
    // Spare iterations at the final pose, in case the replay needs a few more.
    poses.extend(std::iter::repeat_n(reference.final_pose(), 5));
    for (i, pose) in poses.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| &poses[j]);
        write_oracle_files(&dir, i, &task.scene, pose, prev, &task.desired_pose, &rig)?;
    }
    println!("wrote {} iterations of .flo/.pfm files to {}", poses.len(), dir.display());

    let spec = MethodSpec {
        method: Method::FlowExternalDepth,
        flow_dir: Some(dir.clone()),
        depth_dir: Some(dir),
    };
    let replay = run_servo(&task, &spec, &cfg, &limits, &rig)?;
    println!("oracle: {} iterations, final t_err {:.5}", reference.iterations, reference.final_t_err);
    println!("files:  {} iterations, final t_err {:.5}, converged {}", replay.iterations, replay.final_t_err, replay.converged);
    Ok(())
}
