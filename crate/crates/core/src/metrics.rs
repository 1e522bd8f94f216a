//! Volumetric, topological, distance and centerline evaluation metrics.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::nn::PointIndex;
use crate::skeleton::{extract_surface, thin_3d};
use crate::volume::Mask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub b0: i64,
    pub b1: i64,
    pub b2: i64,
    pub euler: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiErrors {
    pub b0: i64,
    pub b1: i64,
    pub euler: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterlineScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dice: f64,
    pub cl_dice: f64,
    pub betti0_err: f64,
    pub betti1_err: f64,
    pub euler_err: f64,
    pub hd95: f64,
    pub chamfer: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsReport {
    /// Unweighted mean over several reports (one per structure).
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(MetricsReport {
            dice: avg(|r| r.dice),
            cl_dice: avg(|r| r.cl_dice),
            betti0_err: avg(|r| r.betti0_err),
            betti1_err: avg(|r| r.betti1_err),
            euler_err: avg(|r| r.euler_err),
            hd95: avg(|r| r.hd95),
            chamfer: avg(|r| r.chamfer),
            precision: avg(|r| r.precision),
            recall: avg(|r| r.recall),
            f1: avg(|r| r.f1),
        })
    }
}

/// `2|P ∩ G| / (|P| + |G|)`; two empty masks score 1.
pub fn dice(pred: &Mask, gt: &Mask) -> Result<f64> {
    pred.same_shape(gt)?;
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        a += p as usize;
        b += g as usize;
        inter += (p & g) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}

fn inclusion(skel: &Mask, other: &Mask) -> Option<f64> {
    let total = skel.count();
    if total == 0 {
        return None;
    }
    let hit = skel
        .data()
        .iter()
        .zip(other.data())
        .filter(|(&s, &o)| s != 0 && o != 0)
        .count();
    Some(hit as f64 / total as f64)
}

/// Harmonic mean of topology precision and sensitivity on 3D skeletons.
pub fn cl_dice(pred: &Mask, gt: &Mask) -> Result<f64> {
    pred.same_shape(gt)?;
    if pred.count() == 0 && gt.count() == 0 {
        return Ok(1.0);
    }
    let (sp, sg) = (thin_3d(pred), thin_3d(gt));
    let (Some(tprec), Some(tsens)) = (inclusion(&sp, gt), inclusion(&sg, pred)) else {
        return Ok(0.0);
    };
    if tprec + tsens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tprec * tsens / (tprec + tsens))
}

const N26: [(isize, isize, isize); 26] = {
    let mut out = [(0, 0, 0); 26];
    let mut n = 0;
    let mut k = -1;
    while k <= 1 {
        let mut j = -1;
        while j <= 1 {
            let mut i = -1;
            while i <= 1 {
                if !(i == 0 && j == 0 && k == 0) {
                    out[n] = (i, j, k);
                    n += 1;
                }
                i += 1;
            }
            j += 1;
        }
        k += 1;
    }
    out
};

const N6: [(isize, isize, isize); 6] = [
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
];

/// Labels connected components of voxels where `member` holds. Returns the
/// component count and per-voxel labels (0 = not a member).
fn label_components(
    dims: [usize; 3],
    member: impl Fn(usize) -> bool,
    neighbours: &[(isize, isize, isize)],
) -> (usize, Vec<u32>) {
    let [nx, ny, nz] = dims;
    let mut labels = vec![0u32; nx * ny * nz];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if labels[start] != 0 || !member(start) {
            continue;
        }
        count += 1;
        labels[start] = count as u32;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            let (i, j, k) = (
                (v % nx) as isize,
                ((v / nx) % ny) as isize,
                (v / (nx * ny)) as isize,
            );
            for &(di, dj, dk) in neighbours {
                let (a, b, c) = (i + di, j + dj, k + dk);
                if a < 0
                    || b < 0
                    || c < 0
                    || a >= nx as isize
                    || b >= ny as isize
                    || c >= nz as isize
                {
                    continue;
                }
                let u = a as usize + nx * (b as usize + ny * c as usize);
                if labels[u] == 0 && member(u) {
                    labels[u] = count as u32;
                    queue.push_back(u);
                }
            }
        }
    }
    (count, labels)
}

/// Number of 26-connected foreground components.
pub fn components_26(m: &Mask) -> usize {
    label_components(m.dims(), |i| m.data()[i] != 0, &N26).0
}

/// Per-voxel 26-component labels (0 for background) and the count.
pub fn label_26(m: &Mask) -> (usize, Vec<u32>) {
    label_components(m.dims(), |i| m.data()[i] != 0, &N26)
}

/// Euler characteristic of the union of closed unit cubes at foreground
/// voxels: `V - E + F - C`.
pub fn euler_characteristic(m: &Mask) -> i64 {
    let [nx, ny, nz] = m.dims();
    let fg = |i: isize, j: isize, k: isize| m.is_set_signed(i, j, k);
    let any = |cells: &[(isize, isize, isize)]| cells.iter().any(|&(i, j, k)| fg(i, j, k));
    let (nx, ny, nz) = (nx as isize, ny as isize, nz as isize);
    let mut v = 0i64;
    let mut e = 0i64;
    let mut f = 0i64;
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                // Vertex at lattice corner (i, j, k) touches voxels i-1..i etc.
                if any(&[
                    (i - 1, j - 1, k - 1),
                    (i, j - 1, k - 1),
                    (i - 1, j, k - 1),
                    (i, j, k - 1),
                    (i - 1, j - 1, k),
                    (i, j - 1, k),
                    (i - 1, j, k),
                    (i, j, k),
                ]) {
                    v += 1;
                }
                // Edges leaving the corner along +x, +y, +z.
                if i < nx && any(&[(i, j - 1, k - 1), (i, j, k - 1), (i, j - 1, k), (i, j, k)]) {
                    e += 1;
                }
                if j < ny && any(&[(i - 1, j, k - 1), (i, j, k - 1), (i - 1, j, k), (i, j, k)]) {
                    e += 1;
                }
                if k < nz && any(&[(i - 1, j - 1, k), (i, j - 1, k), (i - 1, j, k), (i, j, k)]) {
                    e += 1;
                }
                // Faces spanning +x+y, +x+z, +y+z from the corner.
                if i < nx && j < ny && any(&[(i, j, k - 1), (i, j, k)]) {
                    f += 1;
                }
                if i < nx && k < nz && any(&[(i, j - 1, k), (i, j, k)]) {
                    f += 1;
                }
                if j < ny && k < nz && any(&[(i - 1, j, k), (i, j, k)]) {
                    f += 1;
                }
            }
        }
    }
    v - e + f - m.count() as i64
}

/// Betti numbers under 26-foreground / 6-background connectivity.
pub fn betti(m: &Mask) -> TopologySummary {
    let b0 = components_26(m) as i64;
    let [nx, ny, nz] = m.dims();
    // Pad with background so every border-touching cavity merges with the
    // outside component.
    let pd = [nx + 2, ny + 2, nz + 2];
    let padded_bg = |lin: usize| {
        let (i, j, k) = (lin % pd[0], (lin / pd[0]) % pd[1], lin / (pd[0] * pd[1]));
        if i == 0 || j == 0 || k == 0 || i == pd[0] - 1 || j == pd[1] - 1 || k == pd[2] - 1 {
            return true;
        }
        !m.is_set(i - 1, j - 1, k - 1)
    };
    let (bg_components, _) = label_components(pd, padded_bg, &N6);
    let b2 = bg_components as i64 - 1;
    let euler = euler_characteristic(m);
    let b1 = b0 + b2 - euler;
    let t = TopologySummary { b0, b1, b2, euler };
    debug_assert_eq!(t.euler, t.b0 - t.b1 + t.b2);
    t
}

pub fn betti_errors(pred: &Mask, gt: &Mask) -> BettiErrors {
    let (p, g) = (betti(pred), betti(gt));
    BettiErrors {
        b0: (p.b0 - g.b0).abs(),
        b1: (p.b1 - g.b1).abs(),
        euler: (p.euler - g.euler).abs(),
    }
}

fn nn_distances(from: &[Point], to: &PointIndex) -> Vec<f64> {
    from.iter().map(|p| to.nearest(p).0).collect()
}

/// 95th percentile (nearest rank) of the pooled nearest-neighbour distances
/// in both directions.
pub fn hd95(a: &[Point], b: &[Point]) -> Result<f64> {
    let ia = PointIndex::new(a).ok_or(Error::Empty("hd95 point set"))?;
    let ib = PointIndex::new(b).ok_or(Error::Empty("hd95 point set"))?;
    let mut d = nn_distances(a, &ib);
    d.extend(nn_distances(b, &ia));
    Ok(nearest_rank(&mut d, 0.95))
}

pub(crate) fn nearest_rank(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

/// HD95 between the surfaces of two segmentation masks.
pub fn hd95_masks(a: &Mask, b: &Mask) -> Result<f64> {
    a.same_shape(b)?;
    hd95(&extract_surface(a).points(), &extract_surface(b).points())
}

/// Mean of the bidirectional nearest-neighbour distances, unsquared:
/// `(mean_a d(a, B) + mean_b d(b, A)) / 2`.
pub fn chamfer_metric(a: &[Point], b: &[Point]) -> Result<f64> {
    let ia = PointIndex::new(a).ok_or(Error::Empty("chamfer point set"))?;
    let ib = PointIndex::new(b).ok_or(Error::Empty("chamfer point set"))?;
    let fwd: f64 = nn_distances(a, &ib).iter().sum::<f64>() / a.len() as f64;
    let bwd: f64 = nn_distances(b, &ia).iter().sum::<f64>() / b.len() as f64;
    Ok(0.5 * (fwd + bwd))
}

/// Precision, recall and F1 of predicted centerline points against ground
/// truth points with a distance tolerance (voxels, inclusive).
pub fn centerline_f1(pred: &[Point], gt: &[Point], tol: f64) -> Result<CenterlineScore> {
    let ip = PointIndex::new(pred).ok_or(Error::Empty("centerline prediction"))?;
    let ig = PointIndex::new(gt).ok_or(Error::Empty("centerline ground truth"))?;
    let tol2 = tol * tol;
    let hits = |from: &[Point], to: &PointIndex| {
        from.iter().filter(|p| to.nearest_sq(p).0 <= tol2).count()
    };
    let precision = hits(pred, &ig) as f64 / pred.len() as f64;
    let recall = hits(gt, &ip) as f64 / gt.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(CenterlineScore {
        precision,
        recall,
        f1,
    })
}

/// Mean distance from each predicted point to the nearest ground-truth point.
pub fn mean_point_error(pred: &[Point], gt: &[Point]) -> Result<f64> {
    let ig = PointIndex::new(gt).ok_or(Error::Empty("ground truth points"))?;
    if pred.is_empty() {
        return Err(Error::Empty("predicted points"));
    }
    Ok(nn_distances(pred, &ig).iter().sum::<f64>() / pred.len() as f64)
}

pub const DEFAULT_F1_TOLERANCE: f64 = 3.0;

/// Full report for one structure.
pub fn evaluate(
    pred: &Mask,
    gt: &Mask,
    pred_centerline: &[Point],
    gt_centerline: &[Point],
    tol: f64,
) -> Result<MetricsReport> {
    let errs = betti_errors(pred, gt);
    let score = centerline_f1(pred_centerline, gt_centerline, tol)?;
    let hd = if pred.count() > 0 && gt.count() > 0 {
        hd95_masks(pred, gt)?
    } else {
        return Err(Error::Empty("hd95 needs nonempty masks"));
    };
    Ok(MetricsReport {
        dice: dice(pred, gt)?,
        cl_dice: cl_dice(pred, gt)?,
        betti0_err: errs.b0 as f64,
        betti1_err: errs.b1 as f64,
        euler_err: errs.euler as f64,
        hd95: hd,
        chamfer: chamfer_metric(pred_centerline, gt_centerline)?,
        precision: score.precision,
        recall: score.recall,
        f1: score.f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(n: usize, r: f64) -> Mask {
        let c = (n as f64 - 1.0) / 2.0;
        Mask::from_fn([n, n, n], |i, j, k| {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2) + (k as f64 - c).powi(2);
            u8::from(d2 <= r * r)
        })
    }

    fn torus(n: usize, big: f64, small: f64) -> Mask {
        let c = (n as f64 - 1.0) / 2.0;
        Mask::from_fn([n, n, n], |i, j, k| {
            let (x, y, z) = (i as f64 - c, j as f64 - c, k as f64 - c);
            let q = (x * x + y * y).sqrt() - big;
            u8::from(q * q + z * z <= small * small)
        })
    }

    #[test]
    fn canonical_topologies() {
        assert_eq!(
            betti(&ball(15, 5.0)),
            TopologySummary {
                b0: 1,
                b1: 0,
                b2: 0,
                euler: 1
            }
        );
        assert_eq!(
            betti(&torus(32, 9.0, 3.0)),
            TopologySummary {
                b0: 1,
                b1: 1,
                b2: 0,
                euler: 0
            }
        );
        let shell = {
            let outer = ball(17, 6.5);
            let inner = ball(17, 4.0);
            outer
                .map(|v| v)
                .with_data(
                    outer
                        .data()
                        .iter()
                        .zip(inner.data())
                        .map(|(&o, &i)| o & !i & 1)
                        .collect(),
                )
                .unwrap()
        };
        assert_eq!(
            betti(&shell),
            TopologySummary {
                b0: 1,
                b1: 0,
                b2: 1,
                euler: 2
            }
        );
        assert_eq!(
            betti(&Mask::filled([4, 4, 4], 0)),
            TopologySummary {
                b0: 0,
                b1: 0,
                b2: 0,
                euler: 0
            }
        );
    }

    #[test]
    fn diagonal_voxels_are_one_component() {
        let mut m = Mask::filled([3, 3, 3], 0);
        m.set(0, 0, 0, 1);
        m.set(1, 1, 1, 1);
        let t = betti(&m);
        assert_eq!((t.b0, t.b1, t.euler), (1, 0, 1));
    }

    #[test]
    fn dice_cases() {
        let a = Mask::from_fn([4, 4, 4], |i, _, _| u8::from(i < 2));
        let b = Mask::from_fn([4, 4, 4], |i, _, _| u8::from(i >= 2));
        let c = Mask::from_fn([4, 4, 4], |i, _, _| u8::from((1..3).contains(&i)));
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(dice(&a, &c).unwrap(), 0.5);
        let e = Mask::filled([4, 4, 4], 0);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert!(dice(&a, &Mask::filled([2, 2, 2], 0)).is_err());
    }

    fn tube(len: std::ops::Range<usize>) -> Mask {
        Mask::from_fn([11, 11, 40], |i, j, k| {
            let d2 = (i as f64 - 5.0).powi(2) + (j as f64 - 5.0).powi(2);
            u8::from(d2 <= 9.0 && len.contains(&k))
        })
    }

    #[test]
    fn cl_dice_penalizes_broken_tubes_more_than_dice() {
        let gt = tube(4..36);
        let broken = gt
            .with_data(
                gt.data()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if (15..25).contains(&gt.coord(i).0[2]) {
                            0
                        } else {
                            v
                        }
                    })
                    .collect(),
            )
            .unwrap();
        assert_eq!(cl_dice(&gt, &gt).unwrap(), 1.0);
        let (d, cd) = (dice(&broken, &gt).unwrap(), cl_dice(&broken, &gt).unwrap());
        assert!(cd < d, "cl_dice {cd} should be below dice {d}");
    }

    #[test]
    fn cl_dice_of_dilated_prediction_is_one() {
        let gt = tube(4..36);
        let dilated = Mask::from_fn(gt.dims(), |i, j, k| {
            let (i, j, k) = (i as isize, j as isize, k as isize);
            let hit = N26
                .iter()
                .chain(std::iter::once(&(0, 0, 0)))
                .any(|&(a, b, c)| gt.is_set_signed(i + a, j + b, k + c));
            u8::from(hit)
        });
        assert_eq!(cl_dice(&dilated, &gt).unwrap(), 1.0);
    }

    #[test]
    fn betti_error_cases() {
        let gt = tube(4..36);
        let gap = tube(4..36)
            .with_data(
                gt.data()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if (18..23).contains(&gt.coord(i).0[2]) {
                            0
                        } else {
                            v
                        }
                    })
                    .collect(),
            )
            .unwrap();
        assert_eq!(
            betti_errors(&gt, &gt),
            BettiErrors {
                b0: 0,
                b1: 0,
                euler: 0
            }
        );
        assert_eq!(betti_errors(&gap, &gt).b0, 1);
        let e = betti_errors(&torus(32, 9.0, 3.0), &ball(32, 8.0));
        assert_eq!((e.b1, e.euler), (1, 1));
    }

    #[test]
    fn distance_metric_cases() {
        let a: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(hd95(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer_metric(&a, &a).unwrap(), 0.0);
        let planes_a: Vec<Point> = (0..25)
            .map(|i| Point::new((i % 5) as f64, (i / 5) as f64, 0.0))
            .collect();
        let planes_b: Vec<Point> = planes_a
            .iter()
            .map(|p| p + crate::Vec3::new(0.0, 0.0, 1.0))
            .collect();
        assert_eq!(hd95(&planes_a, &planes_b).unwrap(), 1.0);
        let s = chamfer_metric(&[Point::new(0.0, 0.0, 0.0)], &[Point::new(3.0, 4.0, 0.0)]).unwrap();
        assert_eq!(s, 5.0);
        assert!(hd95(&[], &a).is_err());
        assert!(chamfer_metric(&a, &[]).is_err());
    }

    #[test]
    fn centerline_f1_cases() {
        let gt: Vec<Point> = (0..20).map(|i| Point::new(i as f64, 5.0, 5.0)).collect();
        assert_eq!(
            centerline_f1(&gt, &gt, 3.0).unwrap(),
            CenterlineScore {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        let far: Vec<Point> = gt
            .iter()
            .map(|p| p + crate::Vec3::new(0.0, 4.0, 0.0))
            .collect();
        let s = centerline_f1(&far, &gt, 3.0).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let near: Vec<Point> = gt
            .iter()
            .map(|p| p + crate::Vec3::new(0.0, 2.0, 0.0))
            .collect();
        assert_eq!(centerline_f1(&near, &gt, 3.0).unwrap().f1, 1.0);
    }

    #[test]
    fn report_mean_is_unweighted() {
        let r = |d: f64| MetricsReport {
            dice: d,
            cl_dice: d,
            betti0_err: 0.0,
            betti1_err: 0.0,
            euler_err: 0.0,
            hd95: 2.0 * d,
            chamfer: 1.0,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
        let m = MetricsReport::mean(&[r(0.5), r(1.0)]).unwrap();
        assert_eq!(m.dice, 0.75);
        assert_eq!(m.hd95, 1.5);
        assert!(MetricsReport::mean(&[]).is_none());
    }
}
