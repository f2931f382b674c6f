use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowservo::bench::{
    generate_suite, run_benchmark, run_sweep, BenchConfig, SceneKind, SweepConfig, DEFAULT_SUITE, SWEEP_PRESETS,
};
use flowservo::plot::render_plots;
use flowservo::servo::write_trajectory_csv;
use flowservo::{
    generate_scene, run_servo, sample_task, ControllerConfig, Difficulty, Error, Limits, Method, MethodSpec, Result,
    Rig, ServoTask,
};

/// Flow-based visual servoing benchmark.
#[derive(Parser)]
#[command(name = "flowservo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one servo task and write its trajectory.
    Run(RunArgs),
    /// Run every method on a seeded task suite.
    Bench(BenchArgs),
    /// Convergence ratio versus offset for a rotation set-point.
    Sweep(SweepArgs),
    /// Render an SVG from a trajectory, report or sweep CSV.
    Plots(PlotArgs),
    /// Write a sampled task to a TOML file.
    Task(TaskArgs),
}

#[derive(Args)]
struct Control {
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    mu: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Output directory [default: $FLOWSERVO_OUT or ./out]
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Control {
    fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            lambda: self.lambda,
            mu: self.mu,
            ..Default::default()
        }
    }

    fn limits(&self) -> Limits {
        Limits {
            max_iters: self.max_iters,
            ..Default::default()
        }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| {
            std::env::var_os("FLOWSERVO_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from)
        });
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir)
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_difficulty(s: &str) -> std::result::Result<Difficulty, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scene(s: &str) -> std::result::Result<SceneKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    /// Task file written by `flowservo task`.
    #[arg(long, conflicts_with_all = ["seed", "difficulty"])]
    task: Option<PathBuf>,
    #[arg(long, requires = "difficulty")]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_difficulty, requires = "seed")]
    difficulty: Option<Difficulty>,
    /// auto, plane or cloud.
    #[arg(long, value_parser = parse_scene, default_value = "auto")]
    scene: SceneKind,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Directory of `<iter>_flow_*.flo` files replacing the flow oracle.
    #[arg(long)]
    flow_dir: Option<PathBuf>,
    /// Directory of `<iter>_depth.pfm` files.
    #[arg(long)]
    depth_dir: Option<PathBuf>,
    #[command(flatten)]
    control: Control,
}

#[derive(Args)]
struct BenchArgs {
    /// easy, medium, hard or all.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Tasks per difficulty [default: 10, or 3/4/3 for `all`].
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_method, value_delimiter = ',', default_value = "flow-true-depth,flow-depth-proxy,pbvs-oracle")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_scene, default_value = "auto")]
    scene: SceneKind,
    /// Worker threads [default: available parallelism].
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    control: Control,
}

#[derive(Args)]
struct SweepArgs {
    /// Rotation preset 1, 2 or 3: (10,10,25), (20,20,40), (30,30,50) degrees.
    #[arg(long, conflicts_with = "rotation")]
    preset: Option<usize>,
    /// Rotation set-point in degrees about camera x, y, z, e.g. `20,20,40`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    rotation: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.4)]
    step: f64,
    #[arg(long, default_value_t = 4.0)]
    max: f64,
    #[arg(long, default_value_t = 16)]
    environments: usize,
    #[arg(long, value_parser = parse_method, value_delimiter = ',', default_value = "flow-true-depth,flow-depth-proxy")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    control: Control,
}

#[derive(Args)]
struct PlotArgs {
    csv: PathBuf,
    /// Output SVG [default: input path with an .svg extension].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, value_parser = parse_difficulty)]
    difficulty: Difficulty,
    #[arg(long, value_parser = parse_scene, default_value = "cloud")]
    scene: SceneKind,
    #[arg(long)]
    out: PathBuf,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn sampled_task(seed: u64, difficulty: Difficulty, scene: SceneKind, methods: &[MethodSpec]) -> Result<ServoTask> {
    let scene = generate_scene(seed, scene.resolve(methods))?;
    sample_task(seed, difficulty, &scene, &Rig::default())
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let spec = MethodSpec {
        method: a.method,
        flow_dir: a.flow_dir,
        depth_dir: a.depth_dir,
    };
    let task = match (&a.task, a.seed, a.difficulty) {
        (Some(path), _, _) => ServoTask::load(path)?,
        (None, Some(seed), Some(d)) => sampled_task(seed, d, a.scene, std::slice::from_ref(&spec))?,
        _ => return Err(Error::InvalidArgument("give --task FILE or --seed S --difficulty D".into())),
    };
    let out = a.control.out_dir()?;
    let result = run_servo(&task, &spec, &a.control.controller(), &a.control.limits(), &Rig::default())?;
    let path = out.join(format!("trajectory_{}.csv", a.method));
    write(&path, &write_trajectory_csv(&result))?;
    println!(
        "method={} converged={} t_err={:.4} r_err={:.3} traj_len={:.3} iterations={} reason={} trajectory={}",
        a.method,
        result.converged,
        result.final_t_err,
        result.final_r_err,
        result.traj_len,
        result.iterations,
        result.reason,
        path.display()
    );
    Ok(if result.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_bench(a: BenchArgs) -> Result<ExitCode> {
    let counts: Vec<(Difficulty, usize)> = match (a.suite.as_str(), a.n) {
        ("all", None) => DEFAULT_SUITE.to_vec(),
        ("all", Some(n)) => Difficulty::ALL.iter().map(|d| (*d, n)).collect(),
        (s, n) => vec![(s.parse()?, n.unwrap_or(10))],
    };
    let methods: Vec<MethodSpec> = a.methods.iter().map(|m| MethodSpec::new(*m)).collect();
    let tasks = generate_suite(&counts, a.scene.resolve(&methods), a.seed, &Rig::default())?;
    let cfg = BenchConfig {
        controller: a.control.controller(),
        limits: a.control.limits(),
        jobs: a.jobs,
        ..BenchConfig::new(methods)
    };
    let out = a.control.out_dir()?;
    let report = run_benchmark(&tasks, &cfg)?;
    let path = out.join("report.csv");
    write(&path, &report.to_csv())?;
    print!("{}", report.format_table());
    println!("report={}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let rotation_deg = match (a.preset, &a.rotation) {
        (Some(p), _) => *SWEEP_PRESETS
            .get(p.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidArgument(format!("preset must be 1, 2 or 3, got {p}")))?,
        (None, Some(r)) => [r[0], r[1], r[2]],
        (None, None) => SWEEP_PRESETS[0],
    };
    let cfg = SweepConfig {
        rotation_deg,
        step: a.step,
        max: a.max,
        environments: a.environments,
        seed: a.seed,
    };
    let bench = BenchConfig {
        controller: a.control.controller(),
        limits: a.control.limits(),
        jobs: a.jobs,
        ..BenchConfig::new(a.methods.iter().map(|m| MethodSpec::new(*m)).collect())
    };
    let out = a.control.out_dir()?;
    let result = run_sweep(&cfg, &bench)?;
    let csv = result.to_csv();
    let (csv_path, svg_path) = (out.join("sweep.csv"), out.join("sweep.svg"));
    write(&csv_path, &csv)?;
    write(&svg_path, render_plots(&csv)?.as_bytes())?;
    print!("{}", String::from_utf8_lossy(&csv));
    println!("sweep={} plot={}", csv_path.display(), svg_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_plots(a: PlotArgs) -> Result<ExitCode> {
    let bytes = std::fs::read(&a.csv).map_err(|e| Error::Io {
        path: a.csv.clone(),
        source: e,
    })?;
    let svg = render_plots(&bytes)?;
    let out = a.out.unwrap_or_else(|| a.csv.with_extension("svg"));
    write(&out, svg.as_bytes())?;
    println!("plot={}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_task(a: TaskArgs) -> Result<ExitCode> {
    let scene = generate_scene(a.seed, a.scene.resolve(&[]))?;
    let task = sample_task(a.seed, a.difficulty, &scene, &Rig::default())?;
    task.save(&a.out)?;
    println!("task={}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let r = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plots(a) => cmd_plots(a),
        Command::Task(a) => cmd_task(a),
    };
    r.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
