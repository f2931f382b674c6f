//! Procedural synthetic scenes: textured planes and intensity point clouds.

use std::f64::consts::TAU;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{project, Intrinsics};
use crate::error::{Error, Result};
use crate::se3::Pose;

/// Pixel radius within which a projected cloud point answers a depth query.
pub const MATCH_RADIUS: f64 = 1.5;

/// DC level of every procedural texture.
pub const TEXTURE_DC: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Cycles per meter along the plane's two texture axes.
    pub frequency: [f64; 2],
    pub phase: f64,
}

/// Sum of sinusoids over plane coordinates, clamped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProceduralTexture {
    pub terms: Vec<Sinusoid>,
}

impl ProceduralTexture {
    /// Unclamped texture value.
    pub fn raw(&self, a: f64, b: f64) -> f64 {
        self.terms.iter().fold(TEXTURE_DC, |acc, s| {
            acc + s.amplitude * (TAU * (s.frequency[0] * a + s.frequency[1] * b) + s.phase).sin()
        })
    }

    pub fn value(&self, a: f64, b: f64) -> f64 {
        self.raw(a, b).clamp(0.0, 1.0)
    }

    /// Analytic gradient of [`ProceduralTexture::raw`] with respect to `(a, b)`.
    pub fn gradient(&self, a: f64, b: f64) -> Vector2<f64> {
        self.terms.iter().fold(Vector2::zeros(), |acc, s| {
            let c = s.amplitude * TAU * (TAU * (s.frequency[0] * a + s.frequency[1] * b) + s.phase).cos();
            acc + Vector2::new(c * s.frequency[0], c * s.frequency[1])
        })
    }
}

/// Infinite plane `normal . p = offset` carrying a procedural texture.
#[derive(Clone, Debug, PartialEq)]
pub struct TexturedPlane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub texture: ProceduralTexture,
    axes: [Vector3<f64>; 2],
}

impl TexturedPlane {
    pub fn new(normal: Vector3<f64>, offset: f64, texture: ProceduralTexture) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) || !offset.is_finite() {
            return Err(Error::invalid("plane needs a non-zero normal and finite offset"));
        }
        let normal = normal / n;
        // Texture axes: world x projected onto the plane (or y if x is nearly normal).
        let helper = if normal.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let e1 = (helper - normal * helper.dot(&normal)).normalize();
        let e2 = normal.cross(&e1);
        Ok(Self {
            normal,
            offset,
            texture,
            axes: [e1, e2],
        })
    }

    /// Texture coordinates of a world point, relative to the plane's foot point.
    pub fn coordinates(&self, p: &Vector3<f64>) -> (f64, f64) {
        let rel = p - self.normal * self.offset;
        (rel.dot(&self.axes[0]), rel.dot(&self.axes[1]))
    }

    pub fn intensity(&self, p: &Vector3<f64>) -> f64 {
        let (a, b) = self.coordinates(p);
        self.texture.value(a, b)
    }

    /// Camera z-depth of the intersection of pixel `(u, v)`'s ray with the plane.
    pub fn ray_depth(&self, pose: &Pose, u: f64, v: f64, k: &Intrinsics) -> Option<f64> {
        let dir = pose.rotation() * k.ray(u, v);
        let denom = self.normal.dot(&dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        // The camera-frame ray has unit z, so the ray parameter is the z-depth.
        let s = (self.offset - self.normal.dot(pose.translation())) / denom;
        (s > 0.0 && s.is_finite()).then_some(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub intensities: Vec<f64>,
    pub bounds: Aabb,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneParams {
    /// Distance of the plane from the origin along its normal (m).
    pub distance: f64,
    /// Maximum tilt of the normal away from the optical axis (degrees).
    pub max_tilt_deg: f64,
    pub sinusoids: usize,
    /// Range of spatial frequency magnitudes (cycles/m).
    pub min_frequency: f64,
    pub max_frequency: f64,
}

impl Default for PlaneParams {
    fn default() -> Self {
        Self {
            distance: 4.0,
            max_tilt_deg: 15.0,
            sinusoids: 8,
            min_frequency: 0.4,
            max_frequency: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudParams {
    pub points: usize,
    pub bounds: Aabb,
}

impl Default for CloudParams {
    fn default() -> Self {
        Self {
            points: 20_000,
            bounds: Aabb {
                min: [-6.0, -6.0, 3.0],
                max: [6.0, 6.0, 8.0],
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "kebab-case")]
pub enum SceneParams {
    TexturedPlane(PlaneParams),
    PointCloud(CloudParams),
}

impl SceneParams {
    pub fn plane() -> Self {
        SceneParams::TexturedPlane(PlaneParams::default())
    }

    pub fn cloud() -> Self {
        SceneParams::PointCloud(CloudParams::default())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    TexturedPlane(TexturedPlane),
    PointCloud(PointCloud),
}

/// A generated scene. Fully determined by `(seed, params)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub seed: u64,
    pub params: SceneParams,
    pub geometry: Geometry,
}

/// A successful back-projection onto scene geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Camera z-depth (m).
    pub depth: f64,
    pub world: Vector3<f64>,
}

pub fn generate_scene(seed: u64, params: SceneParams) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = match params {
        SceneParams::TexturedPlane(p) => Geometry::TexturedPlane(generate_plane(&mut rng, &p)?),
        SceneParams::PointCloud(p) => Geometry::PointCloud(generate_cloud(&mut rng, &p)?),
    };
    Ok(Scene {
        seed,
        params,
        geometry,
    })
}

fn generate_plane(rng: &mut ChaCha8Rng, p: &PlaneParams) -> Result<TexturedPlane> {
    if !(p.distance > 0.0) || !p.distance.is_finite() {
        return Err(Error::invalid("plane distance must be positive"));
    }
    if p.sinusoids < 8 {
        return Err(Error::invalid("texture needs at least 8 sinusoids"));
    }
    if !(p.min_frequency > 0.0 && p.max_frequency >= p.min_frequency) {
        return Err(Error::invalid("invalid texture frequency range"));
    }
    if !(0.0..90.0).contains(&p.max_tilt_deg) {
        return Err(Error::invalid("plane tilt must be in [0, 90) degrees"));
    }
    let tilt = rng.random_range(0.0..=p.max_tilt_deg.to_radians());
    let azimuth = rng.random_range(0.0..TAU);
    let normal = Vector3::new(tilt.sin() * azimuth.cos(), tilt.sin() * azimuth.sin(), tilt.cos());
    // Amplitudes sum to at most 0.45, below the DC level, so the texture never saturates.
    let amp_max = 0.9 / p.sinusoids as f64;
    let terms = (0..p.sinusoids)
        .map(|_| {
            let mag = rng.random_range(p.min_frequency..=p.max_frequency);
            let dir = rng.random_range(0.0..TAU);
            Sinusoid {
                amplitude: rng.random_range(0.25 * amp_max..=0.5 * amp_max),
                frequency: [mag * dir.cos(), mag * dir.sin()],
                phase: rng.random_range(0.0..TAU),
            }
        })
        .collect();
    TexturedPlane::new(normal, p.distance, ProceduralTexture { terms })
}

fn generate_cloud(rng: &mut ChaCha8Rng, p: &CloudParams) -> Result<PointCloud> {
    if !(500..=100_000).contains(&p.points) {
        return Err(Error::invalid(format!(
            "point cloud size {} outside [500, 100000]",
            p.points
        )));
    }
    let b = &p.bounds;
    for i in 0..3 {
        if !(b.max[i] - b.min[i] >= 4.0) || !b.min[i].is_finite() || !b.max[i].is_finite() {
            return Err(Error::invalid("point cloud box must span at least 4 m per axis"));
        }
    }
    if b.min[2] < 2.0 {
        return Err(Error::invalid("point cloud must start at least 2 m in front of the camera"));
    }
    let mut points = Vec::with_capacity(p.points);
    let mut intensities = Vec::with_capacity(p.points);
    for _ in 0..p.points {
        points.push(Vector3::new(
            rng.random_range(b.min[0]..=b.max[0]),
            rng.random_range(b.min[1]..=b.max[1]),
            rng.random_range(b.min[2]..=b.max[2]),
        ));
        intensities.push(rng.random_range(0.0..=1.0));
    }
    Ok(PointCloud {
        points,
        intensities,
        bounds: *b,
    })
}

impl Scene {
    pub fn bounding_box(&self) -> Option<Aabb> {
        match &self.geometry {
            Geometry::TexturedPlane(_) => None,
            Geometry::PointCloud(c) => Some(c.bounds),
        }
    }

    pub fn plane(&self) -> Option<&TexturedPlane> {
        match &self.geometry {
            Geometry::TexturedPlane(p) => Some(p),
            Geometry::PointCloud(_) => None,
        }
    }

    /// Depth of pixel `(u, v)` seen from `pose`, or `None` on a miss.
    pub fn query_depth(&self, pose: &Pose, u: f64, v: f64, k: &Intrinsics) -> Option<f64> {
        self.hit(pose, u, v, k).map(|h| h.depth)
    }

    /// Single-pixel back-projection. Point clouds are scanned exhaustively;
    /// use [`Scene::view`] for many queries from one pose.
    pub fn hit(&self, pose: &Pose, u: f64, v: f64, k: &Intrinsics) -> Option<Hit> {
        match &self.geometry {
            Geometry::TexturedPlane(plane) => plane_hit(plane, pose, u, v, k),
            Geometry::PointCloud(cloud) => {
                let mut best: Option<(f64, usize)> = None;
                for (i, p) in cloud.points.iter().enumerate() {
                    let pc = pose.inverse_transform_point(p);
                    let Ok(px) = project(&pc, k) else { continue };
                    let d2 = (px.x - u).powi(2) + (px.y - v).powi(2);
                    if d2 <= MATCH_RADIUS * MATCH_RADIUS && best.is_none_or(|(z, _)| pc.z < z) {
                        best = Some((pc.z, i));
                    }
                }
                best.map(|(depth, i)| Hit {
                    depth,
                    world: cloud.points[i],
                })
            }
        }
    }

    /// Precomputes whatever is needed to answer many queries from one pose.
    pub fn view<'a>(&'a self, pose: &Pose, k: &Intrinsics) -> SceneView<'a> {
        let index = match &self.geometry {
            Geometry::TexturedPlane(_) => None,
            Geometry::PointCloud(cloud) => Some(ProjectedCloud::build(cloud, pose, k)),
        };
        SceneView {
            scene: self,
            pose: *pose,
            k: *k,
            index,
        }
    }
}

fn plane_hit(plane: &TexturedPlane, pose: &Pose, u: f64, v: f64, k: &Intrinsics) -> Option<Hit> {
    let depth = plane.ray_depth(pose, u, v, k)?;
    Some(Hit {
        depth,
        world: pose.transform_point(&k.unproject(u, v, depth)),
    })
}

/// Scene queries from a fixed pose.
pub struct SceneView<'a> {
    scene: &'a Scene,
    pose: Pose,
    k: Intrinsics,
    index: Option<ProjectedCloud>,
}

impl SceneView<'_> {
    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn hit(&self, u: f64, v: f64) -> Option<Hit> {
        match (&self.scene.geometry, &self.index) {
            (Geometry::TexturedPlane(plane), _) => plane_hit(plane, &self.pose, u, v, &self.k),
            (Geometry::PointCloud(cloud), Some(index)) => {
                index.nearest(u, v).map(|(depth, i)| Hit {
                    depth,
                    world: cloud.points[i],
                })
            }
            (Geometry::PointCloud(_), None) => unreachable!("cloud view always carries an index"),
        }
    }
}

const BIN: f64 = 2.0;

/// Cloud points projected into one camera and bucketed by pixel bins.
struct ProjectedCloud {
    bins_x: usize,
    bins_y: usize,
    /// CSR offsets into `entries`, one slot per bin plus a terminator.
    starts: Vec<u32>,
    /// `(u, v, z, point index)`.
    entries: Vec<(f64, f64, f64, u32)>,
}

impl ProjectedCloud {
    fn build(cloud: &PointCloud, pose: &Pose, k: &Intrinsics) -> Self {
        let origin = -0.5 - MATCH_RADIUS;
        let bins_x = ((k.width as f64 + 2.0 * MATCH_RADIUS) / BIN).ceil() as usize + 1;
        let bins_y = ((k.height as f64 + 2.0 * MATCH_RADIUS) / BIN).ceil() as usize + 1;
        let mut projected = Vec::new();
        for (i, p) in cloud.points.iter().enumerate() {
            let pc = pose.inverse_transform_point(p);
            let Ok(px) = project(&pc, k) else { continue };
            let bx = ((px.x - origin) / BIN).floor();
            let by = ((px.y - origin) / BIN).floor();
            if bx < 0.0 || by < 0.0 || bx >= bins_x as f64 || by >= bins_y as f64 {
                continue;
            }
            let bin = by as usize * bins_x + bx as usize;
            projected.push((bin, (px.x, px.y, pc.z, i as u32)));
        }

        let mut starts = vec![0u32; bins_x * bins_y + 1];
        for (bin, _) in &projected {
            starts[bin + 1] += 1;
        }
        for b in 0..bins_x * bins_y {
            starts[b + 1] += starts[b];
        }
        let mut fill = starts.clone();
        let mut entries = vec![(0.0, 0.0, 0.0, 0u32); projected.len()];
        for (bin, e) in projected {
            entries[fill[bin] as usize] = e;
            fill[bin] += 1;
        }
        Self {
            bins_x,
            bins_y,
            starts,
            entries,
        }
    }

    /// Smallest depth among points projecting within the match radius;
    /// ties go to the lower point index.
    fn nearest(&self, u: f64, v: f64) -> Option<(f64, usize)> {
        let origin = -0.5 - MATCH_RADIUS;
        let bin_range = |c: f64, n: usize| {
            let lo = ((c - MATCH_RADIUS - origin) / BIN).floor().max(0.0) as usize;
            let hi = ((c + MATCH_RADIUS - origin) / BIN).floor();
            if hi < 0.0 {
                return (1, 0);
            }
            (lo, (hi as usize).min(n - 1))
        };
        let (x0, x1) = bin_range(u, self.bins_x);
        let (y0, y1) = bin_range(v, self.bins_y);
        let mut best: Option<(f64, u32)> = None;
        for by in y0..=y1 {
            for bx in x0..=x1 {
                let b = by * self.bins_x + bx;
                let (s, e) = (self.starts[b] as usize, self.starts[b + 1] as usize);
                for &(pu, pv, z, i) in &self.entries[s..e] {
                    let d2 = (pu - u).powi(2) + (pv - v).powi(2);
                    if d2 <= MATCH_RADIUS * MATCH_RADIUS
                        && best.is_none_or(|(bz, bi)| z < bz || (z == bz && i < bi))
                    {
                        best = Some((z, i));
                    }
                }
            }
        }
        best.map(|(z, i)| (z, i as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn frontal_plane(z: f64) -> Scene {
        let texture = ProceduralTexture {
            terms: vec![Sinusoid {
                amplitude: 0.1,
                frequency: [1.0, 0.0],
                phase: 0.0,
            }],
        };
        Scene {
            seed: 0,
            params: SceneParams::plane(),
            geometry: Geometry::TexturedPlane(TexturedPlane::new(Vector3::z(), z, texture).unwrap()),
        }
    }

    #[test]
    fn same_seed_same_scene() {
        for params in [SceneParams::plane(), SceneParams::cloud()] {
            let a = generate_scene(11, params).unwrap();
            let b = generate_scene(11, params).unwrap();
            assert_eq!(a, b);
        }
        assert_ne!(
            generate_scene(11, SceneParams::cloud()).unwrap(),
            generate_scene(12, SceneParams::cloud()).unwrap()
        );
    }

    #[test]
    fn cloud_respects_count_and_bounds() {
        let params = SceneParams::PointCloud(CloudParams {
            points: 1000,
            ..CloudParams::default()
        });
        let scene = generate_scene(5, params).unwrap();
        let Geometry::PointCloud(c) = &scene.geometry else { panic!() };
        assert_eq!(c.points.len(), 1000);
        assert!(c.points.iter().all(|p| c.bounds.contains(p)));
        assert!(c.intensities.iter().all(|i| (0.0..=1.0).contains(i)));
    }

    #[test]
    fn invalid_params_rejected() {
        let small = SceneParams::PointCloud(CloudParams {
            points: 499,
            ..CloudParams::default()
        });
        assert!(matches!(generate_scene(0, small), Err(Error::InvalidArgument(_))));
        let thin = SceneParams::PointCloud(CloudParams {
            points: 1000,
            bounds: Aabb {
                min: [0.0, 0.0, 3.0],
                max: [3.0, 5.0, 8.0],
            },
        });
        assert!(generate_scene(0, thin).is_err());
        let few = SceneParams::TexturedPlane(PlaneParams {
            sinusoids: 7,
            ..PlaneParams::default()
        });
        assert!(generate_scene(0, few).is_err());
    }

    #[test]
    fn plane_texture_at_origin_matches_hand_sum() {
        let scene = generate_scene(3, SceneParams::plane()).unwrap();
        let plane = scene.plane().unwrap();
        assert_abs_diff_eq!(plane.normal.norm(), 1.0, epsilon = 1e-12);
        let mut expected = 0.5;
        for s in &plane.texture.terms {
            expected += s.amplitude * s.phase.sin();
        }
        let expected = expected.clamp(0.0, 1.0);
        assert_eq!(plane.texture.value(0.0, 0.0), expected);
        // The foot point of the plane has texture coordinates (0, 0).
        let foot = plane.normal * plane.offset;
        let (a, b) = plane.coordinates(&foot);
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn texture_gradient_matches_finite_difference() {
        let scene = generate_scene(9, SceneParams::plane()).unwrap();
        let tex = &scene.plane().unwrap().texture;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-6;
        for _ in 0..200 {
            let a = rng.random_range(-5.0..5.0);
            let b = rng.random_range(-5.0..5.0);
            let g = tex.gradient(a, b);
            let ga = (tex.raw(a + h, b) - tex.raw(a - h, b)) / (2.0 * h);
            let gb = (tex.raw(a, b + h) - tex.raw(a, b - h)) / (2.0 * h);
            assert_abs_diff_eq!(g.x, ga, epsilon = 1e-6);
            assert_abs_diff_eq!(g.y, gb, epsilon = 1e-6);
        }
    }

    #[test]
    fn frontal_plane_depth() {
        let scene = frontal_plane(2.0);
        let k = Intrinsics::default();
        let pose = Pose::identity();
        assert_eq!(scene.query_depth(&pose, k.cx, k.cy, &k), Some(2.0));
        // 45 degrees off-axis: z-depth, not ray length.
        assert_eq!(scene.query_depth(&pose, k.cx + k.fx, k.cy, &k), Some(2.0));
    }

    #[test]
    fn plane_behind_or_parallel_misses() {
        let scene = frontal_plane(2.0);
        let k = Intrinsics::default();
        let behind = Pose::from_translation(Vector3::new(0.0, 0.0, 3.0));
        assert_eq!(scene.query_depth(&behind, k.cx, k.cy, &k), None);
        let sideways = Pose::from_axis_angle(&Vector3::y(), std::f64::consts::FRAC_PI_2, Vector3::zeros());
        assert_eq!(scene.query_depth(&sideways, k.cx, k.cy, &k), None);
    }

    #[test]
    fn cloud_index_agrees_with_exhaustive_scan() {
        let scene = generate_scene(21, SceneParams::cloud()).unwrap();
        let k = Intrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let pose = Pose::from_axis_angle(
                &Vector3::new(rng.random(), rng.random(), rng.random()),
                rng.random_range(0.0..0.3),
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0),
            );
            let view = scene.view(&pose, &k);
            for _ in 0..200 {
                let u = rng.random_range(-0.5..127.5);
                let v = rng.random_range(-0.5..127.5);
                assert_eq!(view.hit(u, v), scene.hit(&pose, u, v, &k));
            }
        }
    }

    #[test]
    fn cloud_depth_is_matched_point_camera_z() {
        let scene = generate_scene(4, SceneParams::cloud()).unwrap();
        let k = Intrinsics::default();
        let pose = Pose::from_axis_angle(&Vector3::y(), 0.1, Vector3::new(0.2, 0.0, 0.5));
        let view = scene.view(&pose, &k);
        let mut hits = 0;
        for v in (0..128).step_by(7) {
            for u in (0..128).step_by(7) {
                if let Some(h) = view.hit(u as f64, v as f64) {
                    let pc = pose.inverse_transform_point(&h.world);
                    assert_abs_diff_eq!(h.depth, pc.z, epsilon = 1e-9);
                    let px = project(&pc, &k).unwrap();
                    assert!((px.x - u as f64).hypot(px.y - v as f64) <= MATCH_RADIUS);
                    hits += 1;
                }
            }
        }
        assert!(hits > 200);
    }
}
