use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};

/// Regular grid of feature nodes laid over the image with a half-cell margin.
///
/// Node `i` (row-major, `i = row * grid_w + col`) sits at pixel
/// `((col + 0.5) * width / grid_w, (row + 0.5) * height / grid_h)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub grid_w: usize,
    pub grid_h: usize,
    pub width: usize,
    pub height: usize,
}

impl FeatureGrid {
    pub fn new(grid_w: usize, grid_h: usize, k: &Intrinsics) -> Result<Self> {
        if grid_w * grid_h < 6 {
            return Err(Error::invalid(format!(
                "feature grid {grid_w}x{grid_h} has fewer than 6 nodes"
            )));
        }
        Ok(Self {
            grid_w,
            grid_h,
            width: k.width,
            height: k.height,
        })
    }

    pub fn len(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_pixel(&self, index: usize) -> (f64, f64) {
        let (col, row) = (index % self.grid_w, index / self.grid_w);
        (
            (col as f64 + 0.5) * self.width as f64 / self.grid_w as f64,
            (row as f64 + 0.5) * self.height as f64 / self.grid_h as f64,
        )
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, (f64, f64))> + '_ {
        (0..self.len()).map(|i| (i, self.node_pixel(i)))
    }
}

/// Camera intrinsics together with the feature grid used for control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub intrinsics: Intrinsics,
    pub grid: FeatureGrid,
}

impl Default for Rig {
    /// Default intrinsics with a 32x32 feature grid.
    fn default() -> Self {
        let intrinsics = Intrinsics::default();
        Self {
            intrinsics,
            grid: FeatureGrid::new(32, 32, &intrinsics).expect("default grid is valid"),
        }
    }
}

impl Rig {
    pub fn new(intrinsics: Intrinsics, grid_w: usize, grid_h: usize) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self {
            intrinsics,
            grid: FeatureGrid::new(grid_w, grid_h, &intrinsics)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        let k = Intrinsics::default();
        assert!(FeatureGrid::new(2, 2, &k).is_err());
        assert!(FeatureGrid::new(3, 2, &k).is_ok());
    }

    #[test]
    fn nodes_are_uniform_with_half_cell_margin() {
        let g = Rig::default().grid;
        assert_eq!(g.len(), 1024);
        assert_eq!(g.node_pixel(0), (2.0, 2.0));
        assert_eq!(g.node_pixel(31), (126.0, 2.0));
        assert_eq!(g.node_pixel(32), (2.0, 6.0));
        assert_eq!(g.node_pixel(1023), (126.0, 126.0));
    }
}
