//! Pose integration with the exponential map, and recovering twists with the log.

use flowservo::{exp_twist, log_pose, pose_error, Pose, Twist};
use nalgebra::Vector3;

fn main() -> flowservo::Result<()> {
    let xi = Twist::new(Vector3::new(0.1, 0.0, 0.05), Vector3::new(0.0, 0.2, 0.0));
    let mut pose = Pose::identity();
    for _ in 0..10 {
        pose = pose.integrate(&xi, 0.5)?;
    }
    println!("after 10 steps: t = {:?}", pose.translation().as_slice());

    // Ten half steps of a constant twist equal one exp of five times the twist.
    let direct = exp_twist(&xi, 5.0)?;
    let (dt, dr) = pose_error(&pose, &direct);
    println!("integrated vs closed form: {dt:.2e} m, {dr:.2e} deg");

    let back = log_pose(&direct)?.scaled(1.0 / 5.0);
    println!("recovered twist {:?}", back.to_vector().as_slice());
    Ok(())
}
