//! A small seeded suite over several methods, printed as a summary table.

use flowservo::bench::{generate_suite, run_benchmark, BenchConfig};
use flowservo::{Difficulty, Method, MethodSpec, Rig, SceneParams};

fn main() -> flowservo::Result<()> {
    let counts = [(Difficulty::Easy, 3), (Difficulty::Medium, 3), (Difficulty::Hard, 2)];
    let tasks = generate_suite(&counts, SceneParams::cloud(), 1, &Rig::default())?;
    let methods = [Method::FlowTrueDepth, Method::FlowDepthProxy, Method::PbvsOracle];
    let cfg = BenchConfig::new(methods.iter().map(|m| MethodSpec::new(*m)).collect());
    let report = run_benchmark(&tasks, &cfg)?;
    print!("{}", report.format_table());
    println!("\n{}", String::from_utf8_lossy(&report.to_csv()).lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
