//! Externally computed flow and depth, supplied as per-iteration files.
//!
//! A provider directory holds, for each servo iteration `<iter>` (plain
//! decimal, starting at 0):
//!
//! - `<iter>_flow_cur_to_desired.flo`: flow from the current to the desired image
//! - `<iter>_flow_prev_to_cur.flo`: flow between consecutive images
//! - `<iter>_depth.pfm`: depth at the current pose
//!
//! Files are full image resolution and are reduced to the feature grid by
//! nearest-node sampling.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::observation::depth::{dense_true_depth, DepthMap};
use crate::observation::flo::{read_flo, write_flo};
use crate::observation::flow::{dense_oracle_flow, FlowField};
use crate::observation::grid::Rig;
use crate::observation::pfm::{read_pfm, write_pfm};
use crate::scene::Scene;
use crate::se3::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProviderFile {
    FlowCurToDesired,
    FlowPrevToCur,
    Depth,
}

impl ProviderFile {
    pub fn file_name(self, iteration: usize) -> String {
        match self {
            ProviderFile::FlowCurToDesired => format!("{iteration}_flow_cur_to_desired.flo"),
            ProviderFile::FlowPrevToCur => format!("{iteration}_flow_prev_to_cur.flo"),
            ProviderFile::Depth => format!("{iteration}_depth.pfm"),
        }
    }

    pub fn path(self, dir: &Path, iteration: usize) -> PathBuf {
        dir.join(self.file_name(iteration))
    }
}

fn nearest_pixel(rig: &Rig, index: usize) -> usize {
    let (u, v) = rig.grid.node_pixel(index);
    let k = &rig.intrinsics;
    let c = (u.round().max(0.0) as usize).min(k.width - 1);
    let r = (v.round().max(0.0) as usize).min(k.height - 1);
    r * k.width + c
}

fn check_size(w: usize, h: usize, rig: &Rig) -> Result<()> {
    let k = &rig.intrinsics;
    if (w, h) != (k.width, k.height) {
        return Err(Error::invalid(format!(
            "provider map is {w}x{h}, camera image is {}x{}",
            k.width, k.height
        )));
    }
    Ok(())
}

/// Samples a full-resolution flow field at the feature-grid nodes.
pub fn flow_to_grid(full: &FlowField, rig: &Rig) -> Result<FlowField> {
    check_size(full.width(), full.height(), rig)?;
    let mut out = FlowField::invalid(rig.grid.grid_w, rig.grid.grid_h);
    for i in 0..rig.grid.len() {
        if let Some(d) = full.get(nearest_pixel(rig, i)) {
            out.set(i, d)?;
        }
    }
    Ok(out)
}

/// Samples a full-resolution depth map at the feature-grid nodes.
pub fn depth_to_grid(full: &DepthMap, rig: &Rig) -> Result<DepthMap> {
    check_size(full.width(), full.height(), rig)?;
    let mut out = DepthMap::invalid(rig.grid.grid_w, rig.grid.grid_h);
    for i in 0..rig.grid.len() {
        if let Some(z) = full.get(nearest_pixel(rig, i)) {
            out.set(i, z);
        }
    }
    Ok(out)
}

fn read_file(kind: ProviderFile, dir: &Path, iteration: usize) -> Result<Vec<u8>> {
    let path = kind.path(dir, iteration);
    std::fs::read(&path).map_err(|e| Error::Provider {
        iteration,
        path: path.clone(),
        source: Box::new(Error::io(&path, e)),
    })
}

fn wrap(kind: ProviderFile, dir: &Path, iteration: usize) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Provider {
        iteration,
        path: kind.path(dir, iteration),
        source: Box::new(e),
    }
}

/// Loads a provider flow file and reduces it to the feature grid.
pub fn load_flow(kind: ProviderFile, dir: &Path, iteration: usize, rig: &Rig) -> Result<FlowField> {
    let bytes = read_file(kind, dir, iteration)?;
    read_flo(&bytes)
        .and_then(|f| flow_to_grid(&f, rig))
        .map_err(wrap(kind, dir, iteration))
}

/// Loads the provider depth map for `iteration` and reduces it to the feature grid.
pub fn load_depth(dir: &Path, iteration: usize, rig: &Rig) -> Result<DepthMap> {
    let kind = ProviderFile::Depth;
    let bytes = read_file(kind, dir, iteration)?;
    read_pfm(&bytes)
        .and_then(|d| depth_to_grid(&d, rig))
        .map_err(wrap(kind, dir, iteration))
}

/// Writes oracle provider files for one iteration at `pose`.
///
/// `prev` is the pose of the previous iteration; the consecutive-flow file
/// is skipped at iteration 0 where there is none.
pub fn write_oracle_files(
    dir: &Path,
    iteration: usize,
    scene: &Scene,
    pose: &Pose,
    prev: Option<&Pose>,
    desired: &Pose,
    rig: &Rig,
) -> Result<()> {
    let k = &rig.intrinsics;
    let put = |kind: ProviderFile, bytes: Vec<u8>| {
        let path = kind.path(dir, iteration);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    put(ProviderFile::FlowCurToDesired, write_flo(&dense_oracle_flow(scene, pose, desired, k)))?;
    if let Some(prev) = prev {
        put(ProviderFile::FlowPrevToCur, write_flo(&dense_oracle_flow(scene, prev, pose, k)))?;
    }
    put(ProviderFile::Depth, write_pfm(&dense_true_depth(scene, pose, k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::flo::write_flo;
    use crate::observation::pfm::write_pfm;

    #[test]
    fn file_names() {
        assert_eq!(ProviderFile::FlowCurToDesired.file_name(3), "3_flow_cur_to_desired.flo");
        assert_eq!(ProviderFile::FlowPrevToCur.file_name(0), "0_flow_prev_to_cur.flo");
        assert_eq!(ProviderFile::Depth.file_name(12), "12_depth.pfm");
    }

    #[test]
    fn nearest_node_sampling() {
        let rig = Rig::default();
        let k = rig.intrinsics;
        let mut full = FlowField::invalid(k.width, k.height);
        for r in 0..k.height {
            for c in 0..k.width {
                full.set(r * k.width + c, [c as f64, r as f64]).unwrap();
            }
        }
        let g = flow_to_grid(&full, &rig).unwrap();
        for (i, (u, v)) in rig.grid.nodes() {
            assert_eq!(g.get(i), Some([u.round(), v.round()]));
        }
        assert!(flow_to_grid(&FlowField::invalid(3, 3), &rig).is_err());
    }

    #[test]
    fn missing_file_names_the_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let rig = Rig::default();
        match load_depth(dir.path(), 7, &rig) {
            Err(Error::Provider { iteration, path, .. }) => {
                assert_eq!(iteration, 7);
                assert!(path.ends_with("7_depth.pfm"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rig = Rig::default();
        let k = rig.intrinsics;
        let depth = DepthMap::constant(k.width, k.height, 2.5);
        std::fs::write(ProviderFile::Depth.path(dir.path(), 0), write_pfm(&depth)).unwrap();
        let flow = FlowField::uniform(k.width, k.height, 0.5, -0.25);
        std::fs::write(ProviderFile::FlowCurToDesired.path(dir.path(), 0), write_flo(&flow)).unwrap();
        let d = load_depth(dir.path(), 0, &rig).unwrap();
        assert!(d.iter_valid().all(|(_, z)| z == 2.5));
        assert_eq!(d.valid_count(), rig.grid.len());
        let f = load_flow(ProviderFile::FlowCurToDesired, dir.path(), 0, &rig).unwrap();
        assert!(f.iter_valid().all(|(_, d)| d == [0.5, -0.25]));
    }
}
