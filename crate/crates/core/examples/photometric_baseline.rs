//! Direct intensity servoing next to the flow method on the same plane tasks.

use flowservo::{generate_scene, run_servo, sample_task, ControllerConfig, Difficulty, Limits, Method, Rig, SceneParams};

fn main() -> flowservo::Result<()> {
    let rig = Rig::default();
    let cfg = ControllerConfig::default();
    // A short budget keeps the example quick; photometric runs that stall
    // would otherwise spend the full default budget.
    let limits = Limits {
        max_iters: 400,
        ..Default::default()
    };
    for seed in 0..4 {
        let scene = generate_scene(seed, SceneParams::plane())?;
        let task = sample_task(seed, Difficulty::Easy, &scene, &rig)?;
        for method in [Method::FlowTrueDepth, Method::Photometric] {
            let r = run_servo(&task, &method.into(), &cfg, &limits, &rig)?;
            let photo = r.log.last().and_then(|e| e.photo_err).unwrap_or(f64::NAN);
            println!(
                "seed {seed} {method:>16}: converged {:5}  t_err {:.4}  photo_err {photo:.4}  ({})",
                r.converged, r.final_t_err, r.reason
            );
        }
    }
    Ok(())
}
