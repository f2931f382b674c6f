//! Closed-loop kinematic simulation of a servoing run.
//!
//! Each iteration observes the scene from the current pose, computes a twist
//! with the selected method, logs the step and integrates
//! `pose <- pose * exp(twist * dt)`.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::{
    clamp_twist, flow_system, lm_velocity, pbvs_oracle_velocity, photometric_controller, ControllerConfig,
};
use crate::error::{Error, Result};
use crate::observation::depth::{median_relative_error, true_depth_from_view, Z_DEFAULT};
use crate::observation::flow::oracle_flow_from_view;
use crate::observation::image::{node_stencil_mask, plane_intensity, render_masked};
use crate::observation::provider::{load_depth, load_flow, ProviderFile};
use crate::observation::{calibrate_alpha, flow_depth, render_image, DepthMap, FlowField, Image, Rig};
use crate::scene::Scene;
use crate::se3::{pose_error, Pose, Twist};
use crate::task::ServoTask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    FlowTrueDepth,
    FlowDepthProxy,
    FlowExternalDepth,
    Photometric,
    PbvsOracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::FlowTrueDepth,
        Method::FlowDepthProxy,
        Method::FlowExternalDepth,
        Method::Photometric,
        Method::PbvsOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::FlowTrueDepth => "flow-true-depth",
            Method::FlowDepthProxy => "flow-depth-proxy",
            Method::FlowExternalDepth => "flow-external-depth",
            Method::Photometric => "photometric",
            Method::PbvsOracle => "pbvs-oracle",
        }
    }

    pub fn is_flow(self) -> bool {
        matches!(
            self,
            Method::FlowTrueDepth | Method::FlowDepthProxy | Method::FlowExternalDepth
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// A method plus the directories of externally supplied observations.
///
/// With `flow_dir` set, flow methods read `<iter>_flow_cur_to_desired.flo`
/// (and `<iter>_flow_prev_to_cur.flo` for the depth proxy) instead of using
/// the geometric oracle. `depth_dir` holds `<iter>_depth.pfm` and is required
/// by [`Method::FlowExternalDepth`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodSpec {
    pub method: Method,
    pub flow_dir: Option<PathBuf>,
    pub depth_dir: Option<PathBuf>,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            flow_dir: None,
            depth_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::FlowExternalDepth && self.depth_dir.is_none() {
            return Err(Error::invalid("flow-external-depth needs a depth directory"));
        }
        if self.flow_dir.is_some() && !self.method.is_flow() {
            return Err(Error::invalid(format!("{} does not use flow files", self.method)));
        }
        Ok(())
    }
}

impl From<Method> for MethodSpec {
    fn from(method: Method) -> Self {
        Self::new(method)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Meters.
    pub translation: f64,
    /// Degrees.
    pub rotation_deg: f64,
}

impl Thresholds {
    pub const fn new(translation: f64, rotation_deg: f64) -> Self {
        Self {
            translation,
            rotation_deg,
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::new(0.04, 1.0)
    }
}

/// Stopping rules of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_iters: usize,
    /// Success criterion reported as `converged`.
    pub convergence: Thresholds,
    /// The loop stops once the pose error drops below these.
    pub settle: Thresholds,
    /// Diverged once `t_err > factor * max(initial t_err, convergence.translation)`.
    pub divergence_factor: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            convergence: Thresholds::default(),
            settle: Thresholds::new(0.01, 0.25),
            divergence_factor: 3.0,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        let t = [self.convergence, self.settle];
        if t.iter().any(|t| !(t.translation > 0.0 && t.rotation_deg > 0.0)) {
            return Err(Error::invalid("thresholds must be positive"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::invalid("divergence factor must exceed 1"));
        }
        Ok(())
    }
}

/// Strict comparison against both thresholds.
pub fn check_convergence(t_err: f64, r_err_deg: f64, thresholds: &Thresholds) -> bool {
    t_err < thresholds.translation && r_err_deg < thresholds.rotation_deg
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StopReason {
    Settled,
    MaxIters,
    Diverged,
    IllConditioned,
    Degenerate,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Settled => "settled",
            StopReason::MaxIters => "max-iters",
            StopReason::Diverged => "diverged",
            StopReason::IllConditioned => "ill-conditioned",
            StopReason::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// State at the start of an iteration and the twist applied from it.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    pub pose: Pose,
    pub twist: Twist,
    /// RMS normalized flow error over valid nodes.
    pub feat_err: f64,
    /// Mean absolute intensity error at the grid nodes (plane scenes).
    pub photo_err: Option<f64>,
    /// Median relative error of the depth the controller used.
    pub depth_err: Option<f64>,
    pub t_err: f64,
    pub r_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServoResult {
    pub method: Method,
    pub converged: bool,
    pub reason: StopReason,
    /// Number of twists applied; the log has one more row.
    pub iterations: usize,
    pub initial_t_err: f64,
    pub initial_r_err: f64,
    pub final_t_err: f64,
    pub final_r_err: f64,
    pub traj_len: f64,
    pub log: Vec<LogEntry>,
}

impl ServoResult {
    pub fn final_pose(&self) -> Pose {
        self.log.last().expect("log is never empty").pose
    }
}

fn rms_feature_error(flow: &FlowField, rig: &Rig) -> f64 {
    let k = &rig.intrinsics;
    let n = flow.valid_count();
    if n == 0 {
        return f64::NAN;
    }
    let sum: f64 = flow
        .iter_valid()
        .map(|(_, [du, dv])| (du / k.fx).powi(2) + (dv / k.fy).powi(2))
        .sum();
    (sum / n as f64).sqrt()
}

fn node_intensities(scene: &Scene, pose: &Pose, rig: &Rig) -> Option<Vec<Option<f64>>> {
    let plane = scene.plane()?;
    let k = &rig.intrinsics;
    Some(rig.grid.nodes().map(|(_, (u, v))| plane_intensity(plane, pose, u, v, k)).collect())
}

/// Mean `|I - I*|` over nodes seen in both views.
fn photo_error(current: &[Option<f64>], desired: &[Option<f64>]) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (a, b) in current.iter().zip(desired) {
        if let (Some(a), Some(b)) = (a, b) {
            sum += (a - b).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

struct Step {
    twist: std::result::Result<Twist, Error>,
    feat_err: f64,
    depth_err: Option<f64>,
}

struct Runner<'a> {
    scene: &'a Scene,
    desired: Pose,
    spec: &'a MethodSpec,
    cfg: &'a ControllerConfig,
    rig: &'a Rig,
    desired_image: Option<Image>,
    stencil: Vec<bool>,
}

impl Runner<'_> {
    fn current_flow(&self, view: &crate::scene::SceneView<'_>, iter: usize) -> Result<FlowField> {
        match &self.spec.flow_dir {
            Some(dir) => load_flow(ProviderFile::FlowCurToDesired, dir, iter, self.rig),
            None => Ok(oracle_flow_from_view(view, &self.desired, self.rig)),
        }
    }

    fn proxy_depth(
        &self,
        view: &crate::scene::SceneView<'_>,
        iter: usize,
        prev: Option<(Pose, Twist)>,
    ) -> Result<DepthMap> {
        let g = &self.rig.grid;
        let Some((prev_pose, prev_twist)) = prev else {
            return Ok(DepthMap::constant(g.grid_w, g.grid_h, Z_DEFAULT));
        };
        let flow = match &self.spec.flow_dir {
            Some(dir) => load_flow(ProviderFile::FlowPrevToCur, dir, iter, self.rig)?,
            // Current-to-previous keeps the flow aligned with the current nodes.
            None => oracle_flow_from_view(view, &prev_pose, self.rig),
        };
        flow_depth(&flow, calibrate_alpha(&prev_twist, self.cfg.dt, self.rig.intrinsics.fx))
    }

    fn step(&self, pose: &Pose, iter: usize, prev: Option<(Pose, Twist)>) -> Result<Step> {
        let view = self.scene.view(pose, &self.rig.intrinsics);
        let truth = true_depth_from_view(&view, self.rig);
        let flow = self.current_flow(&view, iter)?;
        let feat_err = rms_feature_error(&flow, self.rig);
        let k = &self.rig.intrinsics;
        let method = self.spec.method;
        if method.is_flow() {
            let depth = match method {
                Method::FlowTrueDepth => truth.clone(),
                Method::FlowDepthProxy => self.proxy_depth(&view, iter, prev)?,
                _ => load_depth(self.spec.depth_dir.as_deref().expect("validated"), iter, self.rig)?,
            };
            let twist = flow_system(&self.rig.grid, &flow, &depth, k).and_then(|(l, e)| lm_velocity(&l, &e, self.cfg));
            return Ok(Step {
                twist,
                feat_err,
                depth_err: median_relative_error(&depth, &truth),
            });
        }
        let twist = match method {
            Method::Photometric => {
                let image = render_masked(self.scene, pose, k, &self.stencil)?;
                let desired = self.desired_image.as_ref().expect("rendered for photometric runs");
                photometric_controller(&image, desired, &truth, &self.rig.grid, k, self.cfg)
            }
            _ => pbvs_oracle_velocity(pose, &self.desired, self.cfg.lambda)
                .map(|v| clamp_twist(&v, self.cfg.max_linear, self.cfg.max_angular)),
        };
        let depth_err = (method == Method::Photometric).then_some(0.0);
        Ok(Step {
            twist,
            feat_err,
            depth_err,
        })
    }
}

/// Runs one servoing task to completion.
///
/// Observation and controller failures end the run with a reason code;
/// unreadable provider files and invalid configuration are errors.
pub fn run_servo(
    task: &ServoTask,
    spec: &MethodSpec,
    cfg: &ControllerConfig,
    limits: &Limits,
    rig: &Rig,
) -> Result<ServoResult> {
    cfg.validate()?;
    limits.validate()?;
    spec.validate()?;
    let desired_image = match spec.method {
        Method::Photometric => Some(render_image(&task.scene, &task.desired_pose, &rig.intrinsics)?),
        _ => None,
    };
    let stencil = match spec.method {
        Method::Photometric => node_stencil_mask(&rig.grid, &rig.intrinsics),
        _ => Vec::new(),
    };
    let runner = Runner {
        scene: &task.scene,
        desired: task.desired_pose,
        spec,
        cfg,
        rig,
        desired_image,
        stencil,
    };
    let desired_nodes = node_intensities(&task.scene, &task.desired_pose, rig);

    let (t0, r0) = pose_error(&task.initial_pose, &task.desired_pose);
    let blowup = limits.divergence_factor * t0.max(limits.convergence.translation);
    let mut pose = task.initial_pose;
    let mut prev: Option<(Pose, Twist)> = None;
    let mut log = Vec::new();
    let mut traj_len = 0.0;
    let reason = loop {
        let iter = log.len();
        let (t_err, r_err) = pose_error(&pose, &task.desired_pose);
        let step = runner.step(&pose, iter, prev)?;
        let mut entry = LogEntry {
            iteration: iter,
            pose,
            twist: Twist::zero(),
            feat_err: step.feat_err,
            photo_err: desired_nodes
                .as_ref()
                .and_then(|d| photo_error(&node_intensities(&task.scene, &pose, rig)?, d)),
            depth_err: step.depth_err,
            t_err,
            r_err,
        };
        let stop = if check_convergence(t_err, r_err, &limits.settle) {
            Some(StopReason::Settled)
        } else if t_err > blowup {
            Some(StopReason::Diverged)
        } else if iter >= limits.max_iters {
            Some(StopReason::MaxIters)
        } else {
            match step.twist {
                Ok(_) => None,
                Err(Error::IllConditioned { .. }) => Some(StopReason::IllConditioned),
                Err(Error::DegenerateObservation { .. }) => Some(StopReason::Degenerate),
                Err(e) => return Err(e),
            }
        };
        if let Some(reason) = stop {
            log.push(entry);
            break reason;
        }
        let twist = step.twist.expect("checked above");
        entry.twist = twist;
        log.push(entry);
        let next = pose.integrate(&twist, cfg.dt)?;
        traj_len += (next.translation() - pose.translation()).norm();
        prev = Some((pose, twist));
        pose = next;
    };

    let last = log.last().unwrap();
    Ok(ServoResult {
        method: spec.method,
        converged: check_convergence(last.t_err, last.r_err, &limits.convergence),
        reason,
        iterations: log.len() - 1,
        initial_t_err: t0,
        initial_r_err: r0,
        final_t_err: last.t_err,
        final_r_err: last.r_err,
        traj_len,
        log,
    })
}

/// Formats a number with 9 significant digits; missing values are `nan`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let v: f64 = format!("{x:.8e}").parse().unwrap();
    if (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub const TRAJECTORY_HEADER: [&str; 19] = [
    "iter", "px", "py", "pz", "qw", "qx", "qy", "qz", "v1", "v2", "v3", "v4", "v5", "v6", "feat_err", "photo_err",
    "t_err", "r_err", "depth_err",
];

/// Per-iteration trajectory log as CSV.
pub fn write_trajectory_csv(result: &ServoResult) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{}", TRAJECTORY_HEADER.join(",")).unwrap();
    for e in &result.log {
        let t = e.pose.translation();
        let q = e.pose.quaternion();
        let v = e.twist.to_vector();
        let mut cols = vec![e.iteration.to_string()];
        cols.extend([t.x, t.y, t.z, q.w, q.i, q.j, q.k].iter().map(|x| fmt_sig(*x)));
        cols.extend(v.iter().map(|x| fmt_sig(*x)));
        cols.push(fmt_sig(e.feat_err));
        cols.push(fmt_sig(e.photo_err.unwrap_or(f64::NAN)));
        cols.push(fmt_sig(e.t_err));
        cols.push(fmt_sig(e.r_err));
        cols.push(fmt_sig(e.depth_err.unwrap_or(f64::NAN)));
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
    out
}

/// Feature errors of the log rows, for descent checks.
pub fn feature_errors(result: &ServoResult) -> DVector<f64> {
    DVector::from_iterator(result.log.len(), result.log.iter().map(|e| e.feat_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, SceneParams};
    use crate::task::{sample_task, Difficulty};

    fn task(seed: u64, d: Difficulty, params: SceneParams) -> ServoTask {
        let scene = generate_scene(seed, params).unwrap();
        sample_task(seed, d, &scene, &Rig::default()).unwrap()
    }

    #[test]
    fn convergence_check_is_strict() {
        let th = Thresholds::default();
        assert!(check_convergence(0.03, 0.5, &th));
        assert!(!check_convergence(0.04, 0.5, &th));
        assert!(!check_convergence(0.01, 1.0, &th));
        assert!(check_convergence(0.0, 0.0, &th));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn goal_start_converges_immediately() {
        let mut t = task(1, Difficulty::Easy, SceneParams::cloud());
        t.initial_pose = t.desired_pose;
        let r = run_servo(&t, &Method::FlowTrueDepth.into(), &Default::default(), &Default::default(), &Rig::default())
            .unwrap();
        assert!(r.converged);
        assert_eq!((r.iterations, r.traj_len, r.log.len()), (0, 0.0, 1));
        assert_eq!(r.reason, StopReason::Settled);
        assert_eq!(r.log[0].feat_err, 0.0);
    }

    #[test]
    fn easy_task_converges_and_is_deterministic() {
        let t = task(3, Difficulty::Easy, SceneParams::cloud());
        let run = || {
            run_servo(&t, &Method::FlowTrueDepth.into(), &Default::default(), &Default::default(), &Rig::default())
                .unwrap()
        };
        let a = run();
        assert!(a.converged, "{:?} after {} iters", a.reason, a.iterations);
        assert!(a.final_t_err < 0.04 && a.final_r_err < 1.0);
        let b = run();
        assert_eq!(a, b);
        assert_eq!(write_trajectory_csv(&a), write_trajectory_csv(&b));
        // Trajectory length against logged positions.
        let len: f64 = a
            .log
            .windows(2)
            .map(|w| (w[1].pose.translation() - w[0].pose.translation()).norm())
            .sum();
        assert_eq!(len, a.traj_len);
        assert!(a.log.last().unwrap().feat_err <= a.log[0].feat_err);
    }

    #[test]
    fn external_depth_requires_directory() {
        let t = task(1, Difficulty::Easy, SceneParams::cloud());
        let r = run_servo(&t, &Method::FlowExternalDepth.into(), &Default::default(), &Default::default(), &Rig::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn missing_provider_file_names_iteration() {
        let t = task(1, Difficulty::Easy, SceneParams::cloud());
        let dir = tempfile::tempdir().unwrap();
        let spec = MethodSpec {
            method: Method::FlowExternalDepth,
            flow_dir: None,
            depth_dir: Some(dir.path().to_path_buf()),
        };
        let r = run_servo(&t, &spec, &Default::default(), &Default::default(), &Rig::default());
        assert!(matches!(r, Err(Error::Provider { iteration: 0, .. })));
    }

    #[test]
    fn photometric_needs_a_plane() {
        let t = task(1, Difficulty::Easy, SceneParams::cloud());
        let r = run_servo(&t, &Method::Photometric.into(), &Default::default(), &Default::default(), &Rig::default());
        assert!(matches!(r, Err(Error::UnsupportedScene(_))));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.1234567891234), "0.123456789");
        assert_eq!(fmt_sig(-2.0), "-2");
        assert_eq!(fmt_sig(1.23456789123e-20), "1.23456789e-20");
        assert_eq!(fmt_sig(123456.7891234), "123456.789");
        assert_eq!(fmt_sig(f64::NAN), "nan");
    }
}
