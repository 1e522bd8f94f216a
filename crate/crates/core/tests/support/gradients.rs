//! Random energy fixtures and central finite differences.

use centerline::deform::{
    local_chamfer, reg_energy, sdf_energy, total_energy, DeformConfig, Patch, PatchSet,
};
use centerline::fields::{sdf_grid, SdfGrid};
use centerline::{GridFrame, Mask, Point, PointCloud, Space, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: usize = 21;
pub const H: f64 = 1e-4;
pub const REL: f64 = 1e-4;
pub const FIXTURES: u64 = 50;

fn frame() -> GridFrame {
    GridFrame::new([N; 3])
}

/// Squared or plain SDF of a radius-4 tube along z.
pub fn tube_sdf(exponent: u8) -> SdfGrid {
    let m = Mask::from_fn([N; 3], |i, j, _| {
        let d2 = (i as f64 - 10.0).powi(2) + (j as f64 - 10.0).powi(2);
        u8::from(d2 <= 16.0)
    });
    sdf_grid(&m, exponent).unwrap()
}

/// Normalized point whose voxel coordinates stay clear of cell faces by
/// `margin` voxels and away from the grid border.
fn interior_point(rng: &mut impl Rng, margin: f64) -> Point {
    let f = frame();
    loop {
        let v = Point::new(
            rng.random_range(1.0..(N - 2) as f64),
            rng.random_range(1.0..(N - 2) as f64),
            rng.random_range(1.0..(N - 2) as f64),
        );
        if v.iter().all(|x| {
            let r = x - x.floor();
            r > margin && r < 1.0 - margin
        }) {
            return f.to_normalized(&v);
        }
    }
}

fn cloud(pts: Vec<Point>) -> PointCloud {
    PointCloud::new(Space::Normalized, pts)
}

fn patch_set(centers: &[Point], half: f64) -> PatchSet {
    PatchSet {
        space: Space::Normalized,
        size: 2.0 * half * (N - 1) as f64,
        half: Vec3::repeat(half),
        seed: 0,
        patches: centers
            .iter()
            .enumerate()
            .map(|(source, &center)| Patch { center, source })
            .collect(),
    }
}

fn inside(ps: &PatchSet, k: usize, pts: &[Point]) -> Vec<usize> {
    (0..pts.len())
        .filter(|&i| ps.contains(k, &pts[i]))
        .collect()
}

fn nearest_two(p: &Point, pts: &[Point], idx: &[usize]) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::INFINITY);
    for &i in idx {
        let d = (p - pts[i]).norm();
        if d < best.0 {
            best = (d, best.0);
        } else if d < best.1 {
            best.1 = d;
        }
    }
    best
}

/// Rejects configurations where a step of `H` could change patch
/// membership or a nearest-neighbour assignment.
fn well_separated(pred: &[Point], gt: &[Point], ps: &PatchSet) -> bool {
    let gap = 10.0 * H;
    for k in 0..ps.len() {
        let c = ps.patches[k].center;
        for p in pred {
            let d = p - c;
            if d.iter().any(|x| (x.abs() - ps.half.x).abs() < gap) {
                return false;
            }
        }
        let pi = inside(ps, k, pred);
        let gi = inside(ps, k, gt);
        for &i in &pi {
            let (a, b) = nearest_two(&pred[i], gt, &gi);
            if b.is_finite() && b - a < gap {
                return false;
            }
        }
        for &j in &gi {
            let (a, b) = nearest_two(&gt[j], pred, &pi);
            if b.is_finite() && b - a < gap {
                return false;
            }
        }
    }
    true
}

pub struct Fixture {
    pub pred: PointCloud,
    pub gt: PointCloud,
    pub patches: PatchSet,
}

pub fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let np = rng.random_range(4..20);
        let ng = rng.random_range(4..30);
        let pred: Vec<Point> = (0..np).map(|_| interior_point(&mut rng, 0.02)).collect();
        let gt: Vec<Point> = (0..ng).map(|_| interior_point(&mut rng, 0.0)).collect();
        let centers: Vec<Point> = (0..rng.random_range(1..5))
            .map(|_| gt[rng.random_range(0..ng)])
            .collect();
        let patches = patch_set(&centers, rng.random_range(0.2..0.6));
        if well_separated(&pred, &gt, &patches) {
            return Fixture {
                pred: cloud(pred),
                gt: cloud(gt),
                patches,
            };
        }
    }
}

/// Central differences of `f` at every coordinate of `pred`.
pub fn fd_gradient(pred: &PointCloud, f: impl Fn(&PointCloud) -> f64) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); pred.len()];
    for i in 0..pred.len() {
        for a in 0..3 {
            let mut plus = pred.clone();
            plus.points[i][a] += H;
            let mut minus = pred.clone();
            minus.points[i][a] -= H;
            out[i][a] = (f(&plus) - f(&minus)) / (2.0 * H);
        }
    }
    out
}

/// `|fd - analytic| <= REL * max(|analytic|, 1e-3)` over the whole field.
pub fn close(analytic: &[Vec3], fd: &[Vec3], what: &str) -> Result<(), String> {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>().sqrt();
    let num = norm(&mut analytic.iter().zip(fd).map(|(a, b)| (a - b).norm_squared()));
    let den = norm(&mut analytic.iter().map(|a| a.norm_squared()));
    if num <= REL * den.max(1e-3) {
        Ok(())
    } else {
        Err(format!(
            "{what}: |fd - analytic| = {num:e}, |analytic| = {den:e}"
        ))
    }
}

fn ok<T>(r: centerline::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn brute_chamfer(pred: &[Point], gt: &[Point], ps: &PatchSet) -> f64 {
    let mut total = 0.0;
    for k in 0..ps.len() {
        let pi = inside(ps, k, pred);
        let gi = inside(ps, k, gt);
        let dir = |from: &[usize], a: &[Point], to: &[usize], b: &[Point]| -> f64 {
            if to.is_empty() {
                return 0.0;
            }
            from.iter()
                .map(|&i| nearest_two(&a[i], b, to).0.powi(2))
                .sum()
        };
        total += dir(&pi, pred, &gi, gt) + dir(&gi, gt, &pi, pred);
    }
    total / ps.len() as f64
}

pub fn chamfer_value_case(seed: u64) -> Result<(), String> {
    let fx = fixture(seed);
    let got = ok(local_chamfer(&fx.pred, &fx.gt, &fx.patches))?.value;
    let want = brute_chamfer(&fx.pred.points, &fx.gt.points, &fx.patches);
    if (got - want).abs() <= 1e-12 * want.max(1.0) {
        Ok(())
    } else {
        Err(format!("chamfer {got}, brute force {want}"))
    }
}

pub fn chamfer_grad_case(seed: u64) -> Result<(), String> {
    let fx = fixture(seed);
    let g = ok(local_chamfer(&fx.pred, &fx.gt, &fx.patches))?.grad;
    let fd = fd_gradient(&fx.pred, |p| {
        local_chamfer(p, &fx.gt, &fx.patches).unwrap().value
    });
    close(&g, &fd, "chamfer")
}

pub fn sdf_grad_case(seed: u64, sdf: &SdfGrid) -> Result<(), String> {
    let fx = fixture(1000 + seed);
    let g = ok(sdf_energy(&fx.pred, sdf))?.grad;
    let fd = fd_gradient(&fx.pred, |p| sdf_energy(p, sdf).unwrap().value);
    close(&g, &fd, "sdf")
}

pub fn reg_grad_case(seed: u64) -> Result<(), String> {
    let fx = fixture(2000 + seed);
    let g = ok(reg_energy(&fx.pred))?.grad;
    let fd = fd_gradient(&fx.pred, |p| reg_energy(p).unwrap().value);
    close(&g, &fd, "reg")
}

pub fn total_grad_case(seed: u64, sdf: &SdfGrid) -> Result<(), String> {
    let cfg = DeformConfig::default();
    let fx = fixture(3000 + seed);
    let g = ok(total_energy(&fx.pred, &fx.gt, &fx.patches, sdf, &cfg))?.grad;
    let fd = fd_gradient(&fx.pred, |p| {
        total_energy(p, &fx.gt, &fx.patches, sdf, &cfg)
            .unwrap()
            .total
    });
    close(&g, &fd, "total")
}

/// Reordering ground truth and patches leaves energy and gradient alone.
pub fn order_case(seed: u64, sdf: &SdfGrid) -> Result<(), String> {
    let cfg = DeformConfig::default();
    let fx = fixture(4000 + seed);
    let base = ok(total_energy(&fx.pred, &fx.gt, &fx.patches, sdf, &cfg))?;
    let mut gt = fx.gt.clone();
    gt.points.reverse();
    let n = gt.points.len();
    gt.points.swap(0, n / 2);
    let mut patches = fx.patches.clone();
    patches.patches.reverse();
    let other = ok(total_energy(&fx.pred, &gt, &patches, sdf, &cfg))?;
    if (base.total - other.total).abs() > 1e-12 * base.total.abs().max(1.0) {
        return Err(format!("total {} vs {}", base.total, other.total));
    }
    for (a, b) in base.grad.iter().zip(&other.grad) {
        if (a - b).norm() > 1e-10 * a.norm().max(1.0) {
            return Err("gradient depends on order".into());
        }
    }
    Ok(())
}
