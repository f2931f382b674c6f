//! One closed-loop run with flow features and true depth, logged to CSV.

use flowservo::servo::write_trajectory_csv;
use flowservo::{generate_scene, run_servo, sample_task, ControllerConfig, Difficulty, Limits, Method, Rig, SceneParams};

fn main() -> flowservo::Result<()> {
    let rig = Rig::default();
    let scene = generate_scene(11, SceneParams::cloud())?;
    let task = sample_task(11, Difficulty::Medium, &scene, &rig)?;
    let r = run_servo(&task, &Method::FlowTrueDepth.into(), &ControllerConfig::default(), &Limits::default(), &rig)?;
    for e in r.log.iter().step_by(10) {
        println!("iter {:4}  t_err {:.4} m  r_err {:6.3} deg  feat_err {:.5}", e.iteration, e.t_err, e.r_err, e.feat_err);
    }
    println!(
        "{} after {} iterations ({}), path length {:.3} m",
        if r.converged { "converged" } else { "failed" },
        r.iterations,
        r.reason,
        r.traj_len
    );
    let path = std::env::temp_dir().join("flowservo_servo_run.csv");
    std::fs::write(&path, write_trajectory_csv(&r)).map_err(|e| flowservo::Error::Io { path: path.clone(), source: e })?;
    println!("trajectory written to {}", path.display());
    Ok(())
}
