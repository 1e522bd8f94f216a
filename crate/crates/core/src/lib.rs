pub mod deform;
pub mod error;
pub mod fields;
pub mod geom;
pub mod graphline;
pub mod metrics;
pub mod nn;
pub mod phantom;
pub mod scpr;
pub mod segment;
pub mod skeleton;
pub mod volume;

pub use error::{Error, Result};
pub use geom::{GridFrame, Point, PointCloud, Space, Vec3};
pub use volume::{Grid, Mask, Volume, VoxelCoord};
