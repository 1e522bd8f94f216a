//! Continuous points and the two coordinate spaces they live in.
//!
//! Voxel space spans `[0, n-1]` along each axis with voxel centers on the
//! integer lattice. Normalized space maps that range onto `[0, 1]`.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Voxel,
    Normalized,
}

/// Maps between voxel and normalized coordinates for a grid of given dims.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridFrame {
    pub dims: [usize; 3],
}

impl GridFrame {
    pub fn new(dims: [usize; 3]) -> Self {
        GridFrame { dims }
    }

    /// Voxel units per normalized unit, per axis.
    pub fn scale(&self) -> Vec3 {
        Vec3::new(
            (self.dims[0].max(2) - 1) as f64,
            (self.dims[1].max(2) - 1) as f64,
            (self.dims[2].max(2) - 1) as f64,
        )
    }

    pub fn to_normalized(&self, p: &Point) -> Point {
        let s = self.scale();
        Point::new(p.x / s.x, p.y / s.y, p.z / s.z)
    }

    pub fn to_voxel(&self, p: &Point) -> Point {
        let s = self.scale();
        Point::new(p.x * s.x, p.y * s.y, p.z * s.z)
    }

    pub fn convert(&self, p: &Point, from: Space, to: Space) -> Point {
        match (from, to) {
            (Space::Voxel, Space::Normalized) => self.to_normalized(p),
            (Space::Normalized, Space::Voxel) => self.to_voxel(p),
            _ => *p,
        }
    }

    pub fn convert_all(&self, pts: &[Point], from: Space, to: Space) -> Vec<Point> {
        pts.iter().map(|p| self.convert(p, from, to)).collect()
    }
}

/// Unordered points tagged with their coordinate space.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub space: Space,
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(space: Space, points: Vec<Point>) -> Self {
        PointCloud { space, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_space(&self, frame: &GridFrame, space: Space) -> PointCloud {
        PointCloud {
            space,
            points: frame.convert_all(&self.points, self.space, space),
        }
    }
}

/// Euclidean distance from `p` to the segment `[a, b]` and the segment
/// parameter of the closest point.
pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p - (a + ab * t)).norm(), t)
}

/// Index of the coordinate with the smallest magnitude; ties go to the
/// lowest index.
pub(crate) fn least_aligned_axis(v: &Vec3) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() < v[best].abs() {
            best = i;
        }
    }
    best
}
