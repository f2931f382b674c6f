//! Convergence ratio against growing translation offsets for a fixed rotation.

use flowservo::bench::{run_sweep, BenchConfig, SweepConfig, SWEEP_PRESETS};
use flowservo::plot::render_plots;
use flowservo::{Method, MethodSpec};

fn main() -> flowservo::Result<()> {
    let cfg = SweepConfig {
        rotation_deg: SWEEP_PRESETS[1],
        step: 0.8,
        max: 4.0,
        environments: 4,
        seed: 3,
    };
    let bench = BenchConfig::new(vec![MethodSpec::new(Method::FlowTrueDepth), MethodSpec::new(Method::FlowDepthProxy)]);
    let result = run_sweep(&cfg, &bench)?;
    let csv = result.to_csv();
    print!("{}", String::from_utf8_lossy(&csv));
    let path = std::env::temp_dir().join("flowservo_sweep.svg");
    std::fs::write(&path, render_plots(&csv)?).map_err(|e| flowservo::Error::Io { path: path.clone(), source: e })?;
    println!("plot written to {}", path.display());
    Ok(())
}
