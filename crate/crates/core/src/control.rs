//! Image-based controller: point interaction matrices, the damped
//! least-squares velocity law, and the photometric and pose-based baselines.
//!
//! All feature quantities are in normalized image coordinates; pixel flow is
//! converted with [`flow_to_error`].

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, Vector6};
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::observation::{DepthMap, FeatureGrid, FlowField, Image};
use crate::se3::{log_pose, Pose, Twist};

/// Largest condition number of the damped normal matrix that is still solved.
pub const MAX_CONDITION: f64 = 1e12;
/// Fewest valid nodes a point-feature system needs.
pub const MIN_NODES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Gain, 1/s.
    pub lambda: f64,
    /// Levenberg-Marquardt damping.
    pub mu: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Bound on the linear speed, m/s.
    pub max_linear: f64,
    /// Bound on the angular speed, rad/s.
    pub max_angular: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            mu: 1e-3,
            dt: 1.0,
            max_linear: 0.5,
            max_angular: 0.3,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.lambda) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be non-negative, got {}", self.mu)));
        }
        if !ok(self.dt) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !ok(self.max_linear) || !ok(self.max_angular) {
            return Err(Error::invalid("velocity bounds must be positive"));
        }
        Ok(())
    }
}

/// Stacked image Jacobian; node `nodes[k]` owns rows `k*rows_per_node..`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    pub matrix: DMatrix<f64>,
    pub nodes: Vec<usize>,
    pub rows_per_node: usize,
}

impl InteractionMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }
}

pub type Matrix2x6 = SMatrix<f64, 2, 6>;

/// Interaction matrix of a point at normalized `(x, y)` and depth `z`.
pub fn point_interaction(x: f64, y: f64, z: f64) -> Result<Matrix2x6> {
    if !(z > 0.0 && z.is_finite()) || !x.is_finite() || !y.is_finite() {
        return Err(Error::invalid(format!("point interaction needs z > 0, got z = {z}")));
    }
    let iz = 1.0 / z;
    #[rustfmt::skip]
    let m = Matrix2x6::new(
        -iz, 0.0, x * iz, x * y, -(1.0 + x * x), y,
        0.0, -iz, y * iz, 1.0 + y * y, -x * y, -x,
    );
    Ok(m)
}

fn stack_nodes(nodes: Vec<usize>, grid: &FeatureGrid, depth: &DepthMap, k: &Intrinsics) -> Result<InteractionMatrix> {
    if nodes.len() < MIN_NODES {
        return Err(Error::DegenerateObservation {
            valid: nodes.len(),
            required: MIN_NODES,
        });
    }
    let mut matrix = DMatrix::zeros(2 * nodes.len(), 6);
    for (row, &i) in nodes.iter().enumerate() {
        let (u, v) = grid.node_pixel(i);
        let (x, y) = k.normalize(u, v);
        let z = depth.get(i).expect("node has valid depth");
        matrix.fixed_view_mut::<2, 6>(2 * row, 0).copy_from(&point_interaction(x, y, z)?);
    }
    Ok(InteractionMatrix {
        matrix,
        nodes,
        rows_per_node: 2,
    })
}

fn check_grid_dims(w: usize, h: usize, grid: &FeatureGrid, what: &str) -> Result<()> {
    if (w, h) != (grid.grid_w, grid.grid_h) {
        return Err(Error::invalid(format!(
            "{what} is {w}x{h}, grid is {}x{}",
            grid.grid_w, grid.grid_h
        )));
    }
    Ok(())
}

/// Stacks the point interaction matrices of every node with valid depth.
pub fn stack_interaction(grid: &FeatureGrid, depth: &DepthMap, k: &Intrinsics) -> Result<InteractionMatrix> {
    check_grid_dims(depth.width(), depth.height(), grid, "depth map")?;
    let nodes = depth.iter_valid().map(|(i, _)| i).collect();
    stack_nodes(nodes, grid, depth, k)
}

/// Normalized feature error `s - s*` at every valid flow node, in node order.
pub fn flow_to_error(flow: &FlowField, k: &Intrinsics) -> DVector<f64> {
    let mut e = Vec::with_capacity(2 * flow.valid_count());
    for (_, [du, dv]) in flow.iter_valid() {
        e.push(-du / k.fx);
        e.push(-dv / k.fy);
    }
    DVector::from_vec(e)
}

/// Interaction matrix and error over nodes where both flow and depth are valid.
pub fn flow_system(
    grid: &FeatureGrid,
    flow: &FlowField,
    depth: &DepthMap,
    k: &Intrinsics,
) -> Result<(InteractionMatrix, DVector<f64>)> {
    check_grid_dims(flow.width(), flow.height(), grid, "flow field")?;
    check_grid_dims(depth.width(), depth.height(), grid, "depth map")?;
    let nodes: Vec<usize> = flow
        .iter_valid()
        .filter(|(i, _)| depth.get(*i).is_some())
        .map(|(i, _)| i)
        .collect();
    let mut e = DVector::zeros(2 * nodes.len());
    for (row, &i) in nodes.iter().enumerate() {
        let [du, dv] = flow.get(i).unwrap();
        e[2 * row] = -du / k.fx;
        e[2 * row + 1] = -dv / k.fy;
    }
    Ok((stack_nodes(nodes, grid, depth, k)?, e))
}

/// Scales the whole twist uniformly so both speed bounds hold exactly.
pub fn clamp_twist(xi: &Twist, max_linear: f64, max_angular: f64) -> Twist {
    let (nv, nw) = (xi.linear.norm(), xi.angular.norm());
    let mut s: f64 = 1.0;
    if nv > max_linear {
        s = s.min(max_linear / nv);
    }
    if nw > max_angular {
        s = s.min(max_angular / nw);
    }
    let mut out = xi.scaled(s);
    while out.linear.norm() > max_linear || out.angular.norm() > max_angular {
        s = f64::from_bits(s.to_bits() - 1);
        out = xi.scaled(s);
    }
    // Normalizes -0.0 so logs and CSVs never show a signed zero.
    Twist::from_vector(&(out.to_vector().add_scalar(0.0)))
}

/// Damped least-squares velocity `-lambda (H + mu diag H)^-1 L^T e`, clamped.
pub fn lm_velocity(l: &InteractionMatrix, error: &DVector<f64>, cfg: &ControllerConfig) -> Result<Twist> {
    if error.len() != l.rows() {
        return Err(Error::invalid(format!(
            "error has {} entries, interaction matrix has {} rows",
            error.len(),
            l.rows()
        )));
    }
    if !error.iter().all(|x| x.is_finite()) || !l.matrix.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("non-finite entries in controller input"));
    }
    let h: Matrix6<f64> = (l.matrix.transpose() * &l.matrix).fixed_view::<6, 6>(0, 0).into_owned();
    let mut a = h;
    for i in 0..6 {
        a[(i, i)] += cfg.mu * h[(i, i)];
    }
    let sv = a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let g: Vector6<f64> = (l.matrix.transpose() * error).fixed_rows::<6>(0).into_owned();
    let x = a
        .lu()
        .solve(&g)
        .ok_or(Error::IllConditioned { condition })?;
    let v = Twist::from_vector(&(x * -cfg.lambda));
    Ok(clamp_twist(&v, cfg.max_linear, cfg.max_angular))
}

/// Central-difference gradient `(dI/du, dI/dv)` at a pixel, if all samples exist.
fn image_gradient(img: &Image, c: isize, r: isize) -> Option<(f64, f64)> {
    let gx = (img.sample(c + 1, r)? - img.sample(c - 1, r)?) * 0.5;
    let gy = (img.sample(c, r + 1)? - img.sample(c, r - 1)?) * 0.5;
    Some((gx, gy))
}

/// Photometric interaction matrix and error `I - I*` at the grid nodes.
pub fn photometric_system(
    image: &Image,
    desired: &Image,
    depth: &DepthMap,
    grid: &FeatureGrid,
    k: &Intrinsics,
) -> Result<(InteractionMatrix, DVector<f64>)> {
    if (image.width(), image.height()) != (k.width, k.height)
        || (desired.width(), desired.height()) != (k.width, k.height)
    {
        return Err(Error::invalid("photometric images must match the camera size"));
    }
    check_grid_dims(depth.width(), depth.height(), grid, "depth map")?;
    let mut rows: Vec<[f64; 6]> = Vec::new();
    let mut err = Vec::new();
    let mut nodes = Vec::new();
    for (i, (u, v)) in grid.nodes() {
        let (c, r) = (u.round() as isize, v.round() as isize);
        let (Some(z), Some(ic), Some(id), Some((gx, gy))) = (
            depth.get(i),
            image.sample(c, r),
            desired.sample(c, r),
            image_gradient(image, c, r),
        ) else {
            continue;
        };
        let (x, y) = k.normalize(u, v);
        let lx = point_interaction(x, y, z)?;
        let (ix, iy) = (gx * k.fx, gy * k.fy);
        let mut row = [0.0; 6];
        for (j, out) in row.iter_mut().enumerate() {
            *out = -(ix * lx[(0, j)] + iy * lx[(1, j)]);
        }
        rows.push(row);
        err.push(ic - id);
        nodes.push(i);
    }
    let matrix = DMatrix::from_fn(rows.len(), 6, |r, c| rows[r][c]);
    if matrix.iter().all(|x| *x == 0.0) || nodes.len() < 6 {
        return Err(Error::DegenerateObservation {
            valid: if matrix.iter().all(|x| *x == 0.0) { 0 } else { nodes.len() },
            required: 6,
        });
    }
    Ok((
        InteractionMatrix {
            matrix,
            nodes,
            rows_per_node: 1,
        },
        DVector::from_vec(err),
    ))
}

/// Photometric visual servoing velocity.
pub fn photometric_controller(
    image: &Image,
    desired: &Image,
    depth: &DepthMap,
    grid: &FeatureGrid,
    k: &Intrinsics,
    cfg: &ControllerConfig,
) -> Result<Twist> {
    let (l, e) = photometric_system(image, desired, depth, grid, k)?;
    lm_velocity(&l, &e, cfg)
}

/// Pose-based velocity from ground-truth poses, in the current camera frame.
///
/// Unclamped; the servo loop applies the configured bounds.
pub fn pbvs_oracle_velocity(current: &Pose, desired: &Pose, lambda: f64) -> Result<Twist> {
    let rel = desired.inverse() * *current;
    let xi = log_pose(&rel)?;
    Ok(Twist::from_vector(&(xi.to_vector() * -lambda).add_scalar(0.0)))
}
