//! Geometric flow and the flow-magnitude depth proxy against true depth.

use flowservo::observation::depth::median_relative_error;
use flowservo::observation::{calibrate_alpha, flow_depth, oracle_flow, true_depth};
use flowservo::{generate_scene, Pose, Rig, SceneParams, Twist};
use nalgebra::Vector3;

fn main() -> flowservo::Result<()> {
    let rig = Rig::default();
    let scene = generate_scene(3, SceneParams::cloud())?;
    let a = Pose::identity();
    for (label, xi) in [
        ("sideways", Twist::new(Vector3::new(0.05, 0.0, 0.0), Vector3::zeros())),
        ("forward", Twist::new(Vector3::new(0.0, 0.0, 0.05), Vector3::zeros())),
        ("rotating", Twist::new(Vector3::new(0.05, 0.0, 0.0), Vector3::new(0.0, 0.02, 0.0))),
    ] {
        let b = a.integrate(&xi, 1.0)?;
        // Flow from the new view back to the old one, aligned with the new nodes.
        let flow = oracle_flow(&scene, &b, &a, &rig);
        let proxy = flow_depth(&flow, calibrate_alpha(&xi, 1.0, rig.intrinsics.fx))?;
        let truth = true_depth(&scene, &b, &rig);
        let err = median_relative_error(&proxy, &truth).unwrap_or(f64::NAN);
        println!("{label:>9}: {} valid flow nodes, proxy median relative depth error {err:.3}", flow.valid_count());
    }
    Ok(())
}
