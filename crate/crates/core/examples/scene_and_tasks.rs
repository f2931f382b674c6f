//! Procedural scenes and seeded servo tasks in each difficulty band.

use flowservo::task::observable_fraction;
use flowservo::{generate_scene, sample_task, Difficulty, Rig, SceneParams};

fn main() -> flowservo::Result<()> {
    let rig = Rig::default();
    for params in [SceneParams::plane(), SceneParams::cloud()] {
        let scene = generate_scene(42, params)?;
        for d in Difficulty::ALL {
            let task = sample_task(42, d, &scene, &rig)?;
            let (t, r) = flowservo::pose_error(&task.initial_pose, &task.desired_pose);
            let seen = observable_fraction(&scene, &task.desired_pose, &rig);
            println!("{:>6} {:>6}: {t:.3} m, {r:5.2} deg, {:.0}% of nodes see geometry", kind(&scene), d.as_str(), seen * 100.0);
        }
    }
    let task = sample_task(7, Difficulty::Medium, &generate_scene(7, SceneParams::plane())?, &rig)?;
    println!("\n{}", task.to_toml()?);
    Ok(())
}

fn kind(scene: &flowservo::Scene) -> &'static str {
    if scene.plane().is_some() {
        "plane"
    } else {
        "cloud"
    }
}
