use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::observation::flow::FlowField;
use crate::observation::grid::Rig;
use crate::scene::{Scene, SceneView};
use crate::se3::{Pose, Twist};

/// Clamp range (m) applied by the flow-based depth proxy.
pub const Z_MIN: f64 = 0.1;
pub const Z_MAX: f64 = 10.0;
/// Depth assigned where flow gives no usable magnitude.
pub const Z_DEFAULT: f64 = 1.0;
/// Flow magnitudes (pixels) below this fall back to [`Z_DEFAULT`].
pub const MIN_FLOW: f64 = 1e-6;
/// Linear speeds (m/s) below this give no usable depth scale.
pub const MIN_SPEED: f64 = 1e-9;

/// Per-node depth (m) with a validity mask, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, z: f64) -> Self {
        Self {
            width,
            height,
            depth: vec![z; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.valid[index].then_some(self.depth[index])
    }

    /// Stores `z` if it is a usable depth, otherwise marks the node invalid.
    pub fn set(&mut self, index: usize, z: f64) {
        if z > 0.0 && z.is_finite() {
            self.depth[index] = z;
            self.valid[index] = true;
        } else {
            self.depth[index] = 0.0;
            self.valid[index] = false;
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.depth
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (z, v))| v.then_some((i, *z)))
    }
}

/// Scale turning inverse flow magnitude into depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowScale {
    /// `alpha` in meter-pixels: `z = alpha / |flow|`.
    Calibrated(f64),
    /// No usable scale; every node gets [`Z_DEFAULT`].
    Fallback,
}

/// Scale under which a pure lateral step of `commanded * dt` over a frontal
/// plane maps flow magnitude to exact depth: `|v| * dt * fx`.
pub fn calibrate_alpha(commanded: &Twist, dt: f64, fx: f64) -> FlowScale {
    let speed = commanded.linear.norm();
    if speed < MIN_SPEED || !(dt > 0.0) {
        FlowScale::Fallback
    } else {
        FlowScale::Calibrated(speed * dt * fx)
    }
}

/// Depth proxy from the magnitude of two-view flow: `z = alpha / |flow|`,
/// clamped to `[Z_MIN, Z_MAX]`. Nodes with no usable flow get [`Z_DEFAULT`]
/// and stay valid.
pub fn flow_depth(flow: &FlowField, scale: FlowScale) -> Result<DepthMap> {
    let alpha = match scale {
        FlowScale::Calibrated(a) if a > 0.0 && a.is_finite() => Some(a),
        FlowScale::Calibrated(a) => {
            return Err(Error::invalid(format!("flow depth scale must be positive, got {a}")))
        }
        FlowScale::Fallback => None,
    };
    let mut out = DepthMap::constant(flow.width(), flow.height(), Z_DEFAULT);
    let Some(alpha) = alpha else { return Ok(out) };
    for (i, d) in flow.iter_valid() {
        let mag = d[0].hypot(d[1]);
        if mag >= MIN_FLOW {
            out.depth[i] = (alpha / mag).clamp(Z_MIN, Z_MAX);
        }
    }
    Ok(out)
}

/// Ground-truth depth at every feature node; misses are invalid.
pub fn true_depth(scene: &Scene, pose: &Pose, rig: &Rig) -> DepthMap {
    true_depth_from_view(&scene.view(pose, &rig.intrinsics), rig)
}

pub(crate) fn true_depth_from_view(view: &SceneView<'_>, rig: &Rig) -> DepthMap {
    let grid = &rig.grid;
    let mut out = DepthMap::invalid(grid.grid_w, grid.grid_h);
    for (i, (u, v)) in grid.nodes() {
        if let Some(h) = view.hit(u, v) {
            out.set(i, h.depth);
        }
    }
    out
}

/// Ground-truth depth at every pixel centre; misses are invalid.
pub fn dense_true_depth(scene: &Scene, pose: &Pose, k: &Intrinsics) -> DepthMap {
    let view = scene.view(pose, k);
    let mut out = DepthMap::invalid(k.width, k.height);
    for r in 0..k.height {
        for c in 0..k.width {
            if let Some(h) = view.hit(c as f64, r as f64) {
                out.set(r * k.width + c, h.depth);
            }
        }
    }
    out
}

/// Median relative error `|est - truth| / truth` over nodes valid in both maps.
pub fn median_relative_error(estimate: &DepthMap, truth: &DepthMap) -> Option<f64> {
    let mut errs: Vec<f64> = truth
        .iter_valid()
        .filter_map(|(i, t)| estimate.get(i).map(|e| (e - t).abs() / t))
        .collect();
    if errs.is_empty() {
        return None;
    }
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    Some(if n % 2 == 1 {
        errs[n / 2]
    } else {
        0.5 * (errs[n / 2 - 1] + errs[n / 2])
    })
}
