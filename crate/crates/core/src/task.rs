//! Benchmark servoing tasks and their on-disk config format.
//!
//! A task file is TOML:
//!
//! ```toml
//! seed = 7
//! difficulty = "easy"
//! initial_pose = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]
//! desired_pose = [[...], [...], [...]]   # 3x4 row-major [R | t], world-from-camera
//!
//! [scene]
//! variant = "point-cloud"                # or "textured-plane"
//! seed = 7
//!
//! [scene.params]
//! points = 20000
//! bounds = { min = [-6.0, -6.0, 3.0], max = [6.0, 6.0, 8.0] }
//! ```
//!
//! The scene itself is regenerated from `(variant, seed, params)`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::grid::Rig;
use crate::scene::{generate_scene, Scene, SceneParams};
use crate::se3::Pose;

/// Minimum fraction of feature nodes that must see geometry at the desired pose.
pub const MIN_OBSERVABLE_FRACTION: f64 = 0.8;
pub const MAX_TASK_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// Translation (m) and rotation (degrees) offset intervals of a difficulty band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub translation: (f64, f64),
    pub rotation_deg: (f64, f64),
}

impl Band {
    pub fn contains(&self, t_err: f64, r_err_deg: f64) -> bool {
        let eps = 1e-9;
        t_err >= self.translation.0 - eps
            && t_err <= self.translation.1 + eps
            && r_err_deg >= self.rotation_deg.0 - eps
            && r_err_deg <= self.rotation_deg.1 + eps
    }
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn band(self) -> Band {
        match self {
            Difficulty::Easy => Band {
                translation: (1.0, 1.4),
                rotation_deg: (5.0, 15.0),
            },
            Difficulty::Medium => Band {
                translation: (1.4, 1.6),
                rotation_deg: (15.0, 25.0),
            },
            Difficulty::Hard => Band {
                translation: (2.0, 3.0),
                rotation_deg: (30.0, 50.0),
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(Error::invalid(format!("unknown difficulty '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServoTask {
    pub scene: Scene,
    pub initial_pose: Pose,
    pub desired_pose: Pose,
    pub difficulty: Difficulty,
    pub seed: u64,
}

/// Fraction of feature nodes whose back-projection hits scene geometry.
pub fn observable_fraction(scene: &Scene, pose: &Pose, rig: &Rig) -> f64 {
    let view = scene.view(pose, &rig.intrinsics);
    let hits = rig.grid.nodes().filter(|(_, (u, v))| view.hit(*u, *v).is_some()).count();
    hits as f64 / rig.grid.len() as f64
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vector3::new(x, y, z)
}

/// Draws a task whose offset lies in the difficulty band.
///
/// The initial camera sits at the world origin facing the scene; the desired
/// pose is offset by a uniformly drawn translation magnitude and rotation
/// angle, with uniformly random direction and axis. Draws whose desired view
/// sees too little geometry are rejected.
pub fn sample_task(seed: u64, difficulty: Difficulty, scene: &Scene, rig: &Rig) -> Result<ServoTask> {
    let band = difficulty.band();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = Pose::identity();
    let mut best = 0.0f64;
    for _ in 0..MAX_TASK_ATTEMPTS {
        let t = rng.random_range(band.translation.0..=band.translation.1);
        let angle = rng.random_range(band.rotation_deg.0..=band.rotation_deg.1).to_radians();
        let dir = unit_vector(&mut rng);
        let axis = unit_vector(&mut rng);
        let desired = initial * Pose::from_axis_angle(&axis, angle, dir * t);
        let frac = observable_fraction(scene, &desired, rig);
        if frac >= MIN_OBSERVABLE_FRACTION {
            return Ok(ServoTask {
                scene: scene.clone(),
                initial_pose: initial,
                desired_pose: desired,
                difficulty,
                seed,
            });
        }
        best = best.max(frac);
    }
    Err(Error::TaskGeneration {
        attempts: MAX_TASK_ATTEMPTS,
        reason: format!("best observable fraction {best:.3} below {MIN_OBSERVABLE_FRACTION}"),
    })
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    seed: u64,
    #[serde(flatten)]
    params: SceneParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    seed: u64,
    difficulty: Difficulty,
    initial_pose: [[f64; 4]; 3],
    desired_pose: [[f64; 4]; 3],
    scene: SceneFile,
}

impl ServoTask {
    pub fn to_toml(&self) -> Result<String> {
        let file = TaskFile {
            seed: self.seed,
            difficulty: self.difficulty,
            initial_pose: self.initial_pose.to_rows(),
            desired_pose: self.desired_pose.to_rows(),
            scene: SceneFile {
                seed: self.scene.seed,
                params: self.scene.params,
            },
        };
        toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: TaskFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            scene: generate_scene(file.scene.seed, file.scene.params)?,
            initial_pose: Pose::from_rows(&file.initial_pose)?,
            desired_pose: Pose::from_rows(&file.desired_pose)?,
            difficulty: file.difficulty,
            seed: file.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
