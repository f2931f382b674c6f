//! Method-versus-task benchmark suites and the convergence-basin sweep.

use std::fmt::Write as _;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ControllerConfig;
use crate::error::{Error, Result};
use crate::observation::Rig;
use crate::scene::{generate_scene, Aabb, CloudParams, SceneParams};
use crate::se3::Pose;
use crate::servo::{fmt_sig, run_servo, Limits, Method, MethodSpec, ServoResult};
use crate::task::{sample_task, Difficulty, ServoTask};

/// Scene family of a benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SceneKind {
    /// Plane when any method is photometric, otherwise point cloud.
    #[default]
    Auto,
    Plane,
    Cloud,
}

impl SceneKind {
    pub fn resolve(self, methods: &[MethodSpec]) -> SceneParams {
        match self {
            SceneKind::Plane => SceneParams::plane(),
            SceneKind::Cloud => SceneParams::cloud(),
            SceneKind::Auto if methods.iter().any(|m| m.method == Method::Photometric) => SceneParams::plane(),
            SceneKind::Auto => SceneParams::cloud(),
        }
    }
}

impl std::str::FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SceneKind::Auto),
            "plane" => Ok(SceneKind::Plane),
            "cloud" => Ok(SceneKind::Cloud),
            _ => Err(Error::invalid(format!("unknown scene kind '{s}'"))),
        }
    }
}

/// Deterministic seed stream; values stay below 2^63 so they fit TOML integers.
pub fn seed_stream(master: u64, stream: u64) -> impl Iterator<Item = u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    std::iter::repeat_with(move || rng.random::<u64>() >> 1)
}

/// Default suite shape: 3 easy, 4 medium and 3 hard tasks.
pub const DEFAULT_SUITE: [(Difficulty, usize); 3] = [(Difficulty::Easy, 3), (Difficulty::Medium, 4), (Difficulty::Hard, 3)];

#[derive(Clone, Debug, PartialEq)]
pub struct BenchTask {
    pub id: String,
    pub task: ServoTask,
}

/// Generates `count` tasks per difficulty; draws rejected by the task sampler
/// are replaced by the next seed of the same stream.
pub fn generate_suite(counts: &[(Difficulty, usize)], params: SceneParams, seed: u64, rig: &Rig) -> Result<Vec<BenchTask>> {
    let mut out = Vec::new();
    for &(d, n) in counts {
        let stream = Difficulty::ALL.iter().position(|x| *x == d).unwrap() as u64;
        let mut seeds = seed_stream(seed, stream);
        let mut failures = 0;
        while out.iter().filter(|t: &&BenchTask| t.task.difficulty == d).count() < n {
            let s = seeds.next().unwrap();
            let scene = generate_scene(s, params)?;
            match sample_task(s, d, &scene, rig) {
                Ok(task) => {
                    let i = out.iter().filter(|t: &&BenchTask| t.task.difficulty == d).count();
                    out.push(BenchTask {
                        id: format!("{d}-{i:02}"),
                        task,
                    });
                }
                Err(Error::TaskGeneration { .. }) if failures < 16 => failures += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub task_id: String,
    pub difficulty: Difficulty,
    pub method: Method,
    pub init_t_err: f64,
    pub init_r_err: f64,
    pub final_t_err: f64,
    pub final_r_err: f64,
    pub traj_len: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: String,
}

impl ReportRow {
    pub fn new(task_id: &str, difficulty: Difficulty, r: &ServoResult) -> Self {
        Self {
            task_id: task_id.to_string(),
            difficulty,
            method: r.method,
            init_t_err: r.initial_t_err,
            init_r_err: r.initial_r_err,
            final_t_err: r.final_t_err,
            final_r_err: r.final_r_err,
            traj_len: r.traj_len,
            iterations: r.iterations,
            converged: r.converged,
            reason: r.reason.to_string(),
        }
    }
}

/// Per (difficulty, method) summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub difficulty: Difficulty,
    pub method: Method,
    pub runs: usize,
    pub converged: usize,
    pub mean_init_t_err: f64,
    pub mean_init_r_err: f64,
    pub mean_final_t_err: f64,
    pub mean_final_r_err: f64,
    pub mean_traj_len: f64,
    pub mean_iterations: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: [&str; 11] = [
    "task_id",
    "difficulty",
    "method",
    "init_t_err",
    "init_r_err",
    "final_t_err",
    "final_r_err",
    "traj_len",
    "iterations",
    "converged",
    "reason",
];

impl BenchmarkReport {
    /// Aggregates in first-appearance order of (difficulty, method).
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(Difficulty, Method)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.difficulty, r.method)) {
                keys.push((r.difficulty, r.method));
            }
        }
        keys.into_iter()
            .map(|(d, m)| {
                let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.difficulty == d && r.method == m).collect();
                Aggregate {
                    difficulty: d,
                    method: m,
                    runs: rows.len(),
                    converged: rows.iter().filter(|r| r.converged).count(),
                    mean_init_t_err: mean(rows.iter().map(|r| r.init_t_err)),
                    mean_init_r_err: mean(rows.iter().map(|r| r.init_r_err)),
                    mean_final_t_err: mean(rows.iter().map(|r| r.final_t_err)),
                    mean_final_r_err: mean(rows.iter().map(|r| r.final_r_err)),
                    mean_traj_len: mean(rows.iter().map(|r| r.traj_len)),
                    mean_iterations: mean(rows.iter().map(|r| r.iterations as f64)),
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER).unwrap();
        for r in &self.rows {
            w.write_record([
                r.task_id.clone(),
                r.difficulty.to_string(),
                r.method.to_string(),
                fmt_sig(r.init_t_err),
                fmt_sig(r.init_r_err),
                fmt_sig(r.final_t_err),
                fmt_sig(r.final_r_err),
                fmt_sig(r.traj_len),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.reason.clone(),
            ])
            .unwrap();
        }
        w.into_inner().unwrap()
    }

    /// Table in the layout of the usual results table: one line per
    /// difficulty and method.
    pub fn format_table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<8} {:<20} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}",
            "suite", "method", "conv", "I.t(m)", "I.r(deg)", "T.err(m)", "R.err(deg)", "Tj.len(m)", "Iter"
        )
        .unwrap();
        for a in self.aggregates() {
            writeln!(
                s,
                "{:<8} {:<20} {:>2}/{:<2} {:>9.3} {:>9.2} {:>9.4} {:>9.3} {:>9.3} {:>8.1}",
                a.difficulty.as_str(),
                a.method.name(),
                a.converged,
                a.runs,
                a.mean_init_t_err,
                a.mean_init_r_err,
                a.mean_final_t_err,
                a.mean_final_r_err,
                a.mean_traj_len,
                a.mean_iterations
            )
            .unwrap();
        }
        s
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Everything a benchmark run needs besides the tasks.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub methods: Vec<MethodSpec>,
    pub controller: ControllerConfig,
    pub limits: Limits,
    pub rig: Rig,
    /// Worker threads; 0 picks the available parallelism.
    pub jobs: usize,
}

impl BenchConfig {
    pub fn new(methods: Vec<MethodSpec>) -> Self {
        Self {
            methods,
            controller: ControllerConfig::default(),
            limits: Limits::default(),
            rig: Rig::default(),
            jobs: 0,
        }
    }
}

/// Runs every method on every task; rows are in task-major, method-minor order.
pub fn run_benchmark(tasks: &[BenchTask], cfg: &BenchConfig) -> Result<BenchmarkReport> {
    let jobs: Vec<(&BenchTask, &MethodSpec)> = tasks.iter().flat_map(|t| cfg.methods.iter().map(move |m| (t, m))).collect();
    let rows = pool(cfg.jobs)?.install(|| {
        jobs.par_iter()
            .map(|(t, m)| {
                let r = run_servo(&t.task, m, &cfg.controller, &cfg.limits, &cfg.rig)?;
                Ok(ReportRow::new(&t.id, t.task.difficulty, &r))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BenchmarkReport { rows })
}

/// Rotation set-point presets, degrees about the camera x, y and z axes.
pub const SWEEP_PRESETS: [[f64; 3]; 3] = [[10.0, 10.0, 25.0], [20.0, 20.0, 40.0], [30.0, 30.0, 50.0]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rotation_deg: [f64; 3],
    pub step: f64,
    pub max: f64,
    pub environments: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            rotation_deg: SWEEP_PRESETS[0],
            step: 0.4,
            max: 4.0,
            environments: 16,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("sweep step must be positive, got {}", self.step)));
        }
        if !(self.max >= self.step && self.max.is_finite()) {
            return Err(Error::invalid(format!("sweep max {} is below the step {}", self.max, self.step)));
        }
        if self.environments == 0 {
            return Err(Error::invalid("a sweep batch needs at least one environment"));
        }
        if !self.rotation_deg.iter().all(|a| a.is_finite()) {
            return Err(Error::invalid("rotation set-point must be finite"));
        }
        Ok(())
    }

    /// `ceil(max / step)`, robust to the rounding of e.g. `4.0 / 0.4`.
    pub fn batches(&self) -> usize {
        (self.max / self.step - 1e-9).ceil() as usize
    }

    pub fn offset(&self, batch: usize) -> f64 {
        batch as f64 * self.step
    }

    /// Rotation `Rz * Ry * Rx` of the set-point, about the initial camera axes.
    pub fn rotation(&self) -> Rotation3<f64> {
        let [x, y, z] = self.rotation_deg.map(f64::to_radians);
        Rotation3::from_euler_angles(x, y, z)
    }

    /// Desired pose of a batch relative to the identity initial pose.
    pub fn desired_pose(&self, batch: usize) -> Pose {
        let o = self.offset(batch);
        Pose::new(*self.rotation().matrix(), Vector3::new(o, o, o)).expect("rotation is proper")
    }
}

/// Point-cloud scenes for the sweep: deep and wide enough that every batch
/// keeps the scene in view from both poses.
pub fn sweep_scene_params() -> SceneParams {
    SceneParams::PointCloud(CloudParams {
        points: 20_000,
        bounds: Aabb {
            min: [-8.0, -8.0, 9.0],
            max: [14.0, 12.0, 15.0],
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepBatch {
    pub batch: usize,
    pub offset: f64,
    /// Converged count per method, in method order.
    pub converged: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub methods: Vec<Method>,
    pub batches: Vec<SweepBatch>,
}

impl SweepResult {
    pub fn ratio(&self, batch: usize, method: usize) -> f64 {
        self.batches[batch].converged[method] as f64 / self.config.environments as f64
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = format!(
            "# offset: simultaneous displacement of offset_m along each camera axis x, y, z; \
             rotation set-point [{}, {}, {}] deg about the initial camera axes (Rz*Ry*Rx); \
             {} environments per batch; seed {}\n",
            c.rotation_deg[0], c.rotation_deg[1], c.rotation_deg[2], c.environments, c.seed
        )
        .into_bytes();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["batch".to_string(), "offset_m".to_string()];
        header.extend(self.methods.iter().map(|m| m.name().to_string()));
        w.write_record(&header).unwrap();
        for (bi, b) in self.batches.iter().enumerate() {
            let mut rec = vec![b.batch.to_string(), fmt_sig(b.offset)];
            rec.extend((0..self.methods.len()).map(|m| fmt_sig(self.ratio(bi, m))));
            w.write_record(&rec).unwrap();
        }
        out.extend(w.into_inner().unwrap());
        out
    }
}

/// Environment `env` of the sweep: a seeded scene with the batch's desired pose.
pub fn sweep_task(cfg: &SweepConfig, batch: usize, env_seed: u64) -> Result<ServoTask> {
    let scene = generate_scene(env_seed, sweep_scene_params())?;
    Ok(ServoTask {
        scene,
        initial_pose: Pose::identity(),
        desired_pose: cfg.desired_pose(batch),
        difficulty: Difficulty::Hard,
        seed: env_seed,
    })
}

/// Runs every batch of the sweep; each environment is shared by all batches.
pub fn run_sweep(cfg: &SweepConfig, bench: &BenchConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let env_seeds: Vec<u64> = seed_stream(cfg.seed, 7).take(cfg.environments).collect();
    let nb = cfg.batches();
    let jobs: Vec<(usize, u64, &MethodSpec)> = (1..=nb)
        .flat_map(|b| env_seeds.iter().flat_map(move |&s| bench.methods.iter().map(move |m| (b, s, m))))
        .collect();
    let flags = pool(bench.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(b, s, m)| {
                let task = sweep_task(cfg, b, s)?;
                Ok(run_servo(&task, m, &bench.controller, &bench.limits, &bench.rig)?.converged)
            })
            .collect::<Result<Vec<bool>>>()
    })?;
    let nm = bench.methods.len();
    let batches = (1..=nb)
        .map(|b| {
            let mut converged = vec![0; nm];
            for (j, &(jb, _, _)) in jobs.iter().enumerate() {
                if jb == b && flags[j] {
                    converged[j % nm] += 1;
                }
            }
            SweepBatch {
                batch: b,
                offset: cfg.offset(b),
                converged,
            }
        })
        .collect();
    Ok(SweepResult {
        config: cfg.clone(),
        methods: bench.methods.iter().map(|m| m.method).collect(),
        batches,
    })
}
