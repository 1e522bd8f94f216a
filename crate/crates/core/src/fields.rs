//! Exact distance transforms, signed distance grids and trilinear sampling.
//!
//! All distances are in voxel units; grid spacing is ignored here.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point, Vec3};
use crate::nn::PointIndex;
use crate::skeleton::{extract_surface, VoxelSet};
use crate::volume::{Grid, Mask};

/// What a distance grid measures the distance to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ToVoxels,
    ToSurface,
    ToPoints,
}

/// Non-negative per-voxel distances, zero exactly on the sources.
#[derive(Clone, Debug)]
pub struct DistanceGrid {
    pub grid: Grid<f64>,
    pub provenance: Provenance,
}

/// Signed distance to the mask surface raised to `exponent`: negative
/// inside, positive outside, zero on surface voxels.
#[derive(Clone, Debug)]
pub struct SdfGrid {
    pub grid: Grid<f64>,
    pub exponent: u8,
}

/// Anything sampleable on the voxel lattice.
pub trait ScalarField: Sync {
    fn dims(&self) -> [usize; 3];
    fn at(&self, i: usize, j: usize, k: usize) -> f64;
}

impl ScalarField for Grid<f64> {
    fn dims(&self) -> [usize; 3] {
        Grid::dims(self)
    }
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.get(i, j, k)
    }
}

impl ScalarField for Grid<f32> {
    fn dims(&self) -> [usize; 3] {
        Grid::dims(self)
    }
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.get(i, j, k) as f64
    }
}

impl ScalarField for Grid<u8> {
    fn dims(&self) -> [usize; 3] {
        Grid::dims(self)
    }
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.get(i, j, k) as f64
    }
}

impl ScalarField for DistanceGrid {
    fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.grid.get(i, j, k)
    }
}

impl ScalarField for SdfGrid {
    fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.grid.get(i, j, k)
    }
}

const FAR: f64 = 1e30;

/// Squared distance transform of one line (lower envelope of parabolas).
fn edt_line(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    v.push(0);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    for q in 1..n {
        // z[0] is -inf, so the envelope never empties.
        loop {
            let p = *v.last().unwrap();
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[v.len() - 1] {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                *z.last_mut().unwrap() = s;
                z.push(f64::INFINITY);
                break;
            }
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = (d * d + f[p]).min(FAR);
    }
}

/// One separable pass along `axis`, in place.
fn edt_pass(data: &mut [f64], dims: [usize; 3], axis: usize) {
    let [nx, ny, nz] = dims;
    let (len, stride) = match axis {
        0 => (nx, 1),
        1 => (ny, nx),
        _ => (nz, nx * ny),
    };
    let line_starts: Vec<usize> = match axis {
        0 => (0..ny * nz).map(|l| l * nx).collect(),
        1 => (0..nz)
            .flat_map(|k| (0..nx).map(move |i| i + nx * ny * k))
            .collect(),
        _ => (0..nx * ny).collect(),
    };
    let src: &[f64] = data;
    let results: Vec<Vec<f64>> = line_starts
        .par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), vec![0.0; len]),
            |(v, z, f), &start| {
                for (q, slot) in f.iter_mut().enumerate() {
                    *slot = src[start + q * stride];
                }
                let mut out = vec![0.0; len];
                edt_line(f, &mut out, v, z);
                out
            },
        )
        .collect();
    for (start, line) in line_starts.iter().zip(results) {
        for (q, val) in line.into_iter().enumerate() {
            data[start + q * stride] = val;
        }
    }
}

fn squared_edt(dims: [usize; 3], is_source: impl Fn(usize) -> bool) -> Vec<f64> {
    let n = dims[0] * dims[1] * dims[2];
    let mut data: Vec<f64> = (0..n)
        .map(|i| if is_source(i) { 0.0 } else { FAR })
        .collect();
    for axis in 0..3 {
        edt_pass(&mut data, dims, axis);
    }
    data
}

/// Exact Euclidean distance from every voxel to the nearest foreground voxel.
pub fn edt(m: &Mask) -> Result<DistanceGrid> {
    if m.count() == 0 {
        return Err(Error::Empty("edt source set"));
    }
    let sq = squared_edt(m.dims(), |i| m.data()[i] != 0);
    Ok(DistanceGrid {
        grid: m.with_data(sq.into_iter().map(f64::sqrt).collect())?,
        provenance: Provenance::ToVoxels,
    })
}

/// Exact Euclidean distance to the nearest voxel of `set`.
pub fn edt_from_voxels(set: &VoxelSet) -> Result<DistanceGrid> {
    if set.is_empty() {
        return Err(Error::Empty("edt source set"));
    }
    let m = set.to_mask();
    edt(&m)
}

/// Signed distance to the mask surface, `|value| = d^exponent`.
pub fn sdf_grid(m: &Mask, exponent: u8) -> Result<SdfGrid> {
    if exponent != 1 && exponent != 2 {
        return Err(Error::InvalidArgument(format!(
            "sdf exponent must be 1 or 2, got {exponent}"
        )));
    }
    let surface = extract_surface(m);
    if surface.is_empty() {
        return Err(Error::Empty("sdf mask"));
    }
    let surf_mask = surface.to_mask();
    let sq = squared_edt(m.dims(), |i| surf_mask.data()[i] != 0);
    let values = sq
        .into_iter()
        .zip(m.data())
        .map(|(d2, &inside)| {
            let mag = if exponent == 2 { d2 } else { d2.sqrt() };
            if inside != 0 {
                -mag
            } else {
                mag
            }
        })
        .collect();
    Ok(SdfGrid {
        grid: m.with_data(values)?.with_spacing(m.spacing())?,
        exponent,
    })
}

/// Trilinear value and analytic gradient at a voxel-space point.
///
/// Coordinates are clamped to `[0, n-1]`; along a clamped axis the field
/// is constant-extended, so that gradient component is zero.
pub fn sample_trilinear<F: ScalarField + ?Sized>(g: &F, p: &Point) -> Result<(f64, Vec3)> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(Error::NonFinite(p.x, p.y, p.z));
    }
    Ok(sample_trilinear_unchecked(g, p))
}

pub(crate) fn sample_trilinear_unchecked<F: ScalarField + ?Sized>(g: &F, p: &Point) -> (f64, Vec3) {
    let dims = g.dims();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut t = [0.0f64; 3];
    let mut live = [0.0f64; 3];
    for a in 0..3 {
        let n = dims[a];
        if n == 1 {
            continue;
        }
        let max = (n - 1) as f64;
        let x = p[a];
        let xc = x.clamp(0.0, max);
        let i0 = (xc.floor() as usize).min(n - 2);
        lo[a] = i0;
        hi[a] = i0 + 1;
        t[a] = xc - i0 as f64;
        live[a] = if (0.0..=max).contains(&x) { 1.0 } else { 0.0 };
    }
    let c = |i: usize, j: usize, k: usize| g.at(i, j, k);
    let c000 = c(lo[0], lo[1], lo[2]);
    let c100 = c(hi[0], lo[1], lo[2]);
    let c010 = c(lo[0], hi[1], lo[2]);
    let c110 = c(hi[0], hi[1], lo[2]);
    let c001 = c(lo[0], lo[1], hi[2]);
    let c101 = c(hi[0], lo[1], hi[2]);
    let c011 = c(lo[0], hi[1], hi[2]);
    let c111 = c(hi[0], hi[1], hi[2]);
    let [tx, ty, tz] = t;

    let c00 = c000 + (c100 - c000) * tx;
    let c10 = c010 + (c110 - c010) * tx;
    let c01 = c001 + (c101 - c001) * tx;
    let c11 = c011 + (c111 - c011) * tx;
    let c0 = c00 + (c10 - c00) * ty;
    let c1 = c01 + (c11 - c01) * ty;
    let value = c0 + (c1 - c0) * tz;

    let dx0 = (c100 - c000) + ((c110 - c010) - (c100 - c000)) * ty;
    let dx1 = (c101 - c001) + ((c111 - c011) - (c101 - c001)) * ty;
    let gx = dx0 + (dx1 - dx0) * tz;
    let gy = (c10 - c00) + ((c11 - c01) - (c10 - c00)) * tz;
    let gz = c1 - c0;
    (value, Vec3::new(gx * live[0], gy * live[1], gz * live[2]))
}

/// Per-voxel distance to the nearest point, and that point's index.
pub fn nearest_point_map(points: &[Point], dims: [usize; 3]) -> Result<(DistanceGrid, Vec<u32>)> {
    let index = PointIndex::new(points).ok_or(Error::Empty("distance map points"))?;
    let [nx, ny, _] = dims;
    let n = dims[0] * dims[1] * dims[2];
    let pairs: Vec<(f64, u32)> = (0..n)
        .into_par_iter()
        .map(|lin| {
            let q = Point::new(
                (lin % nx) as f64,
                ((lin / nx) % ny) as f64,
                (lin / (nx * ny)) as f64,
            );
            let (d, i) = index.nearest(&q);
            (d, i as u32)
        })
        .collect();
    let (dist, idx): (Vec<f64>, Vec<u32>) = pairs.into_iter().unzip();
    Ok((
        DistanceGrid {
            grid: Grid::new(dims, [1.0; 3], dist)?,
            provenance: Provenance::ToPoints,
        },
        idx,
    ))
}

/// `D[x] = min_v |x - v|` over continuous voxel-space points.
pub fn distance_map_from_points(points: &[Point], dims: [usize; 3]) -> Result<DistanceGrid> {
    nearest_point_map(points, dims).map(|(d, _)| d)
}
