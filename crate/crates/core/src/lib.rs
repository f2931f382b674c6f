//! Optical-flow-driven image-based visual servoing in simulation.
//!
//! A camera is steered from an initial pose to a desired pose using dense
//! flow between the current and desired views as the visual feature, with a
//! Levenberg-Marquardt velocity law over stacked point interaction matrices.
//! Flow and depth come from exact geometric oracles over procedural scenes,
//! or from `.flo` and PFM files produced by external estimators.
//!
//! Modules, bottom up:
//!
//! - [`se3`]: poses, twists, exponential and logarithm maps
//! - [`camera`], [`scene`], [`task`]: pinhole model, procedural scenes, benchmark tasks
//! - [`observation`]: oracle flow and depth, rendering, file formats
//! - [`control`]: interaction matrices and velocity laws
//! - [`servo`]: the closed loop and its trajectory log
//! - [`bench`], [`plot`]: suites, sweeps, CSV reports and SVG charts

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod camera;
pub mod control;
pub mod error;
pub mod observation;
pub mod plot;
pub mod scene;
pub mod se3;
pub mod servo;
pub mod task;

pub use camera::{project, Intrinsics};
pub use control::{lm_velocity, point_interaction, stack_interaction, ControllerConfig, InteractionMatrix};
pub use error::{Error, Result};
pub use observation::Rig;
pub use scene::{generate_scene, Scene, SceneParams};
pub use se3::{exp_twist, log_pose, pose_error, Pose, Twist};
pub use servo::{check_convergence, run_servo, Limits, Method, MethodSpec, ServoResult, Thresholds};
pub use task::{sample_task, Difficulty, ServoTask};
