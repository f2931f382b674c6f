use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::observation::grid::FeatureGrid;
use crate::scene::{Geometry, Scene, TexturedPlane};
use crate::se3::Pose;

/// Grayscale image with intensities in `[0, 1]` and a miss mask for pixels
/// that saw no geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
    miss: Vec<bool>,
}

impl Image {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut data = Vec::with_capacity(width * height);
        let mut miss = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                match f(c, r) {
                    Some(i) => {
                        data.push(i.clamp(0.0, 1.0));
                        miss.push(false);
                    }
                    None => {
                        data.push(0.0);
                        miss.push(true);
                    }
                }
            }
        }
        Self {
            width,
            height,
            data,
            miss,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn is_miss(&self, col: usize, row: usize) -> bool {
        self.miss[row * self.width + col]
    }

    /// Intensity if `(col, row)` is on the image and not a miss.
    pub fn sample(&self, col: isize, row: isize) -> Option<f64> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return None;
        }
        let i = row as usize * self.width + col as usize;
        (!self.miss[i]).then_some(self.data[i])
    }

    pub fn miss_count(&self) -> usize {
        self.miss.iter().filter(|m| **m).count()
    }
}

/// Texture intensity seen through pixel `(u, v)`, or `None` on a miss.
pub fn plane_intensity(plane: &TexturedPlane, pose: &Pose, u: f64, v: f64, k: &Intrinsics) -> Option<f64> {
    let z = plane.ray_depth(pose, u, v, k)?;
    Some(plane.intensity(&pose.transform_point(&k.unproject(u, v, z))))
}

/// Renders a textured-plane scene. Point clouds are not rendered photometrically.
pub fn render_image(scene: &Scene, pose: &Pose, k: &Intrinsics) -> Result<Image> {
    let Geometry::TexturedPlane(plane) = &scene.geometry else {
        return Err(Error::UnsupportedScene("point clouds have no photometric rendering"));
    };
    Ok(Image::from_fn(k.width, k.height, |c, r| {
        plane_intensity(plane, pose, c as f64, r as f64, k)
    }))
}

/// Renders only the pixels where `mask` is set; the rest are misses.
pub fn render_masked(scene: &Scene, pose: &Pose, k: &Intrinsics, mask: &[bool]) -> Result<Image> {
    let Geometry::TexturedPlane(plane) = &scene.geometry else {
        return Err(Error::UnsupportedScene("point clouds have no photometric rendering"));
    };
    if mask.len() != k.width * k.height {
        return Err(Error::invalid("render mask does not match the image size"));
    }
    Ok(Image::from_fn(k.width, k.height, |c, r| {
        if mask[r * k.width + c] {
            plane_intensity(plane, pose, c as f64, r as f64, k)
        } else {
            None
        }
    }))
}

/// Pixels read by the photometric controller: each rounded node pixel and its
/// four neighbours.
pub fn node_stencil_mask(grid: &FeatureGrid, k: &Intrinsics) -> Vec<bool> {
    let mut mask = vec![false; k.width * k.height];
    for (_, (u, v)) in grid.nodes() {
        let (c, r) = (u.round() as isize, v.round() as isize);
        for (dc, dr) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (cc, rr) = (c + dc, r + dr);
            if cc >= 0 && rr >= 0 && (cc as usize) < k.width && (rr as usize) < k.height {
                mask[rr as usize * k.width + cc as usize] = true;
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, SceneParams};
    use nalgebra::Vector3;

    #[test]
    fn rendering_is_deterministic() {
        let scene = generate_scene(2, SceneParams::plane()).unwrap();
        let k = Intrinsics::default();
        let p = Pose::from_axis_angle(&Vector3::y(), 0.2, Vector3::new(0.1, 0.0, 0.3));
        let a = render_image(&scene, &p, &k).unwrap();
        assert_eq!(a, render_image(&scene, &p, &k).unwrap());
        assert_eq!(a, render_image(&scene, &(p * Pose::identity()), &k).unwrap());
        assert_eq!(a.miss_count(), 0);
    }

    #[test]
    fn pixel_equals_depth_located_texture() {
        let scene = generate_scene(6, SceneParams::plane()).unwrap();
        let plane = scene.plane().unwrap();
        let k = Intrinsics::default();
        let p = Pose::from_axis_angle(&Vector3::new(1.0, 0.5, 0.0), 0.3, Vector3::new(-0.4, 0.2, 0.1));
        let img = render_image(&scene, &p, &k).unwrap();
        for (c, r) in [(0, 0), (17, 90), (64, 64), (127, 127), (100, 3)] {
            let z = scene.query_depth(&p, c as f64, r as f64, &k).unwrap();
            let world = p.transform_point(&k.unproject(c as f64, r as f64, z));
            let (a, b) = plane.coordinates(&world);
            assert!((img.at(c, r) - plane.texture.value(a, b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn misses_are_black_and_masked() {
        let scene = generate_scene(6, SceneParams::plane()).unwrap();
        let k = Intrinsics::default();
        // Looking straight away from the plane.
        let p = Pose::from_axis_angle(&Vector3::y(), std::f64::consts::PI, Vector3::zeros());
        let img = render_image(&scene, &p, &k).unwrap();
        assert_eq!(img.miss_count(), k.width * k.height);
        assert!(img.is_miss(3, 3) && img.at(3, 3) == 0.0);
    }

    #[test]
    fn point_cloud_is_unsupported() {
        let scene = generate_scene(6, SceneParams::cloud()).unwrap();
        let r = render_image(&scene, &Pose::identity(), &Intrinsics::default());
        assert!(matches!(r, Err(Error::UnsupportedScene(_))));
    }

    #[test]
    fn masked_render_agrees_on_stencil() {
        let scene = generate_scene(4, SceneParams::plane()).unwrap();
        let k = Intrinsics::default();
        let grid = FeatureGrid::new(32, 32, &k).unwrap();
        let p = Pose::from_axis_angle(&Vector3::x(), 0.1, Vector3::new(0.2, 0.0, 0.0));
        let mask = node_stencil_mask(&grid, &k);
        let full = render_image(&scene, &p, &k).unwrap();
        let part = render_masked(&scene, &p, &k, &mask).unwrap();
        for r in 0..k.height {
            for c in 0..k.width {
                let i = r * k.width + c;
                if mask[i] {
                    assert_eq!(part.at(c, r), full.at(c, r));
                } else {
                    assert!(part.is_miss(c, r));
                }
            }
        }
        assert_eq!(mask.iter().filter(|m| **m).count(), 5 * 1024);
    }
}
