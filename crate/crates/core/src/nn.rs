//! Exact nearest-neighbour lookups over 3D point sets.

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;

use crate::geom::Point;

/// Static k-d tree over a point set. Queries are exact.
pub struct PointIndex {
    tree: ImmutableKdTree<f64, u32, 3, 32>,
    len: usize,
}

impl PointIndex {
    /// Builds an index; returns `None` for an empty slice.
    pub fn new(points: &[Point]) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Some(PointIndex {
            tree: ImmutableKdTree::new_from_slice(&coords),
            len: points.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Squared distance to, and index of, the nearest indexed point.
    pub fn nearest_sq(&self, q: &Point) -> (f64, usize) {
        let nn = self.tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        (nn.distance, nn.item as usize)
    }

    pub fn nearest(&self, q: &Point) -> (f64, usize) {
        let (d2, i) = self.nearest_sq(q);
        (d2.sqrt(), i)
    }

    /// Indices of the `k` nearest points, closest first.
    pub fn nearest_k(&self, q: &Point, k: usize) -> Vec<(f64, usize)> {
        let Some(k) = std::num::NonZero::new(k.min(self.len)) else {
            return Vec::new();
        };
        self.tree
            .nearest_n::<SquaredEuclidean>(&[q.x, q.y, q.z], k)
            .into_iter()
            .map(|nn| (nn.distance.sqrt(), nn.item as usize))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_and_singletons() {
        let pts = vec![Point::new(1.0, 1.0, 1.0); 100];
        let idx = PointIndex::new(&pts).unwrap();
        let (d, _) = idx.nearest(&Point::new(1.0, 1.0, 2.0));
        assert!((d - 1.0).abs() < 1e-12);

        let one = PointIndex::new(&[Point::new(0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(one.nearest_sq(&Point::new(1.0, 1.0, 1.0)), (3.0, 0));
        assert!(PointIndex::new(&[]).is_none());
    }

    #[test]
    fn nearest_k_sorted() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
        let idx = PointIndex::new(&pts).unwrap();
        let got = idx.nearest_k(&Point::new(3.2, 0.0, 0.0), 3);
        let ids: Vec<usize> = got.iter().map(|g| g.1).collect();
        assert_eq!(ids, vec![3, 4, 2]);
    }
}
