//! Centerline energies with analytic gradients.
//!
//! Nearest-neighbour assignments are held fixed when differentiating, so
//! every gradient is exact wherever those assignments do not change.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::PatchSet;
use super::DeformConfig;
use crate::error::{Error, Result};
use crate::fields::{sample_trilinear, SdfGrid};
use crate::geom::{GridFrame, Point, PointCloud, Space, Vec3};
use crate::nn::PointIndex;

/// One energy term and its gradient with respect to each predicted point.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub value: f64,
    pub grad: Vec<Vec3>,
}

impl Term {
    fn zero(n: usize) -> Term {
        Term {
            value: 0.0,
            grad: vec![Vec3::zeros(); n],
        }
    }
}

fn check_space(a: Space, b: Space) -> Result<()> {
    if a != b {
        return Err(Error::SpaceMismatch(a, b));
    }
    Ok(())
}

struct PatchTerm {
    value: f64,
    grad: Vec<(usize, Vec3)>,
}

fn patch_chamfer(pred: &[Point], gt: &[Point], pi: &[usize], gi: &[usize]) -> PatchTerm {
    let mut out = PatchTerm {
        value: 0.0,
        grad: Vec::with_capacity(pi.len() + gi.len()),
    };
    let local =
        |idx: &[usize], pts: &[Point]| -> Vec<Point> { idx.iter().map(|&i| pts[i]).collect() };
    if let Some(gt_index) = PointIndex::new(&local(gi, gt)) {
        for &i in pi {
            let (d2, j) = gt_index.nearest_sq(&pred[i]);
            out.value += d2;
            out.grad.push((i, 2.0 * (pred[i] - gt[gi[j]])));
        }
    }
    if let Some(pred_index) = PointIndex::new(&local(pi, pred)) {
        for &j in gi {
            let (d2, i) = pred_index.nearest_sq(&gt[j]);
            let i = pi[i];
            out.value += d2;
            out.grad.push((i, 2.0 * (pred[i] - gt[j])));
        }
    }
    out
}

/// Chamfer distance restricted to each patch, averaged over patches.
///
/// Per patch the squared nearest distances are summed, not averaged. A
/// patch with one empty side keeps only the other direction; a patch with
/// both sides empty contributes zero but still counts in the average.
pub fn local_chamfer(pred: &PointCloud, gt: &PointCloud, patches: &PatchSet) -> Result<Term> {
    check_space(pred.space, gt.space)?;
    check_space(pred.space, patches.space)?;
    let n = pred.len();
    if patches.is_empty() {
        return Ok(Term::zero(n));
    }
    let per_patch: Vec<PatchTerm> = (0..patches.len())
        .into_par_iter()
        .map(|k| {
            let inside = |pts: &[Point]| -> Vec<usize> {
                (0..pts.len())
                    .filter(|&i| patches.contains(k, &pts[i]))
                    .collect()
            };
            patch_chamfer(
                &pred.points,
                &gt.points,
                &inside(&pred.points),
                &inside(&gt.points),
            )
        })
        .collect();
    let mut term = Term::zero(n);
    for p in per_patch {
        term.value += p.value;
        for (i, g) in p.grad {
            term.grad[i] += g;
        }
    }
    let inv = 1.0 / patches.len() as f64;
    term.value *= inv;
    term.grad.iter_mut().for_each(|g| *g *= inv);
    Ok(term)
}

/// Mean trilinear SDF value at the points.
///
/// Normalized points are sampled in voxel space and the gradient is
/// returned with respect to the input coordinates.
pub fn sdf_energy(pred: &PointCloud, sdf: &SdfGrid) -> Result<Term> {
    if pred.is_empty() {
        return Err(Error::Empty("sdf energy points"));
    }
    let frame = GridFrame::new(sdf.grid.dims());
    let chain = match pred.space {
        Space::Voxel => Vec3::repeat(1.0),
        Space::Normalized => frame.scale(),
    };
    let samples: Vec<(f64, Vec3)> = pred
        .points
        .par_iter()
        .map(|p| sample_trilinear(&sdf.grid, &frame.convert(p, pred.space, Space::Voxel)))
        .collect::<Result<_>>()?;
    let inv = 1.0 / pred.len() as f64;
    let mut term = Term::zero(pred.len());
    for (i, (v, g)) in samples.into_iter().enumerate() {
        term.value += v;
        term.grad[i] = g.component_mul(&chain) * inv;
    }
    term.value *= inv;
    Ok(term)
}

/// Sum of squared consecutive edge lengths divided by the point count.
pub fn reg_energy(p: &PointCloud) -> Result<Term> {
    let n = p.len();
    if n < 2 {
        return Err(Error::Degenerate(
            "regularization needs at least two points",
        ));
    }
    let inv = 1.0 / n as f64;
    let mut term = Term::zero(n);
    for i in 1..n {
        let e = p.points[i] - p.points[i - 1];
        term.value += e.norm_squared();
        let g = 2.0 * inv * e;
        term.grad[i] += g;
        term.grad[i - 1] -= g;
    }
    term.value *= inv;
    Ok(term)
}

/// Weighted energy breakdown at one configuration of the points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub chamfer: f64,
    pub sdf: f64,
    pub reg: f64,
    pub total: f64,
    #[serde(skip)]
    pub grad: Vec<Vec3>,
}

/// `λ_cha·cha + λ_sdf·sdf + λ_reg·reg` with the matching gradient.
///
/// The SDF term includes the configured scale factor.
pub fn total_energy(
    pred: &PointCloud,
    gt: &PointCloud,
    patches: &PatchSet,
    sdf: &SdfGrid,
    cfg: &DeformConfig,
) -> Result<EnergyReport> {
    let cha = local_chamfer(pred, gt, patches)?;
    let mut sd = sdf_energy(pred, sdf)?;
    sd.value *= cfg.sdf_scale;
    sd.grad.iter_mut().for_each(|g| *g *= cfg.sdf_scale);
    let reg = reg_energy(pred)?;
    let (lc, ls, lr) = (cfg.lambda_chamfer, cfg.lambda_sdf, cfg.lambda_reg);
    let grad = (0..pred.len())
        .map(|i| lc * cha.grad[i] + ls * sd.grad[i] + lr * reg.grad[i])
        .collect();
    Ok(EnergyReport {
        chamfer: cha.value,
        sdf: sd.value,
        reg: reg.value,
        total: lc * cha.value + ls * sd.value + lr * reg.value,
        grad,
    })
}
