use nalgebra::Vector2;

use crate::camera::{project, Intrinsics};
use crate::error::{Error, Result};
use crate::observation::grid::Rig;
use crate::scene::{Scene, SceneView};
use crate::se3::Pose;

/// Per-node 2D displacements (pixels) with a validity mask, row-major.
///
/// A field computed from view `a` to view `b` maps pixels of `a` to pixels
/// of `b`. Invalid nodes always hold `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    disp: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

impl FlowField {
    /// All nodes invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            disp: vec![[0.0; 2]; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Every node valid with displacement `(du, dv)`.
    pub fn uniform(width: usize, height: usize, du: f64, dv: f64) -> Self {
        Self {
            width,
            height,
            disp: vec![[du, dv]; width * height],
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
        self.disp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disp.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<[f64; 2]> {
        self.valid[index].then_some(self.disp[index])
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.valid[index]
    }

    pub fn set(&mut self, index: usize, d: [f64; 2]) -> Result<()> {
        if !(d[0].is_finite() && d[1].is_finite()) {
            return Err(Error::invalid("flow displacement must be finite"));
        }
        self.disp[index] = d;
        self.valid[index] = true;
        Ok(())
    }

    pub fn invalidate(&mut self, index: usize) {
        self.disp[index] = [0.0; 2];
        self.valid[index] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// `(index, displacement)` over valid nodes.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
        self.disp
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (d, v))| v.then_some((i, *d)))
    }
}

/// Displacement of the scene point seen through `(u, v)` from `view_a` into
/// the camera at `pose_b`.
fn flow_from_view(view_a: &SceneView<'_>, pose_b: &Pose, u: f64, v: f64, k: &Intrinsics) -> Option<[f64; 2]> {
    let hit = view_a.hit(u, v)?;
    let pa = project(&view_a.pose().inverse_transform_point(&hit.world), k).ok()?;
    let pb = project(&pose_b.inverse_transform_point(&hit.world), k).ok()?;
    if !k.contains(pb.x, pb.y) {
        return None;
    }
    let d: Vector2<f64> = pb - pa;
    Some([d.x, d.y])
}

/// Geometric optical flow at a single pixel of view `a`.
pub fn flow_at_pixel(scene: &Scene, pose_a: &Pose, pose_b: &Pose, u: f64, v: f64, k: &Intrinsics) -> Option<[f64; 2]> {
    if !k.contains(u, v) {
        return None;
    }
    let view = scene.view(pose_a, k);
    flow_from_view(&view, pose_b, u, v, k)
}

/// Geometric optical flow from view `a` to view `b` sampled on the feature grid.
///
/// Each node is back-projected through `pose_a` onto the scene and the hit
/// point is reprojected through `pose_b`; the displacement is measured from
/// the point's own projection in `a`, so identical poses give exactly zero.
pub fn oracle_flow(scene: &Scene, pose_a: &Pose, pose_b: &Pose, rig: &Rig) -> FlowField {
    let view = scene.view(pose_a, &rig.intrinsics);
    oracle_flow_from_view(&view, pose_b, rig)
}

pub(crate) fn oracle_flow_from_view(view_a: &SceneView<'_>, pose_b: &Pose, rig: &Rig) -> FlowField {
    let grid = &rig.grid;
    let mut field = FlowField::invalid(grid.grid_w, grid.grid_h);
    for (i, (u, v)) in grid.nodes() {
        if let Some(d) = flow_from_view(view_a, pose_b, u, v, &rig.intrinsics) {
            field.disp[i] = d;
            field.valid[i] = true;
        }
    }
    field
}

/// Geometric optical flow from view `a` to view `b` at every pixel centre.
pub fn dense_oracle_flow(scene: &Scene, pose_a: &Pose, pose_b: &Pose, k: &Intrinsics) -> FlowField {
    let view = scene.view(pose_a, k);
    let mut field = FlowField::invalid(k.width, k.height);
    for r in 0..k.height {
        for c in 0..k.width {
            if let Some(d) = flow_from_view(&view, pose_b, c as f64, r as f64, k) {
                let i = r * k.width + c;
                field.disp[i] = d;
                field.valid[i] = true;
            }
        }
    }
    field
}
