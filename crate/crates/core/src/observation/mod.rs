//! What the flow and depth networks would provide: dense flow between two
//! views and depth maps, computed here by exact geometric oracles, plus the
//! file formats through which external estimates can be substituted.

pub mod depth;
pub mod flo;
pub mod flow;
pub mod grid;
pub mod image;
pub mod pfm;
pub mod provider;

pub use depth::{calibrate_alpha, dense_true_depth, flow_depth, true_depth, DepthMap, FlowScale};
pub use flo::{read_flo, write_flo};
pub use flow::{dense_oracle_flow, flow_at_pixel, oracle_flow, FlowField};
pub use grid::{FeatureGrid, Rig};
pub use image::{render_image, Image};
pub use pfm::{read_pfm, write_pfm};
