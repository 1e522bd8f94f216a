//! Synthetic tubes with known centerlines.
//!
//! A tube is the set of voxel centers within the local radius of a densely
//! resampled curve, cut flat at the curve ends. Ground-truth centerlines
//! are the same curves resampled at half-voxel spacing.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, Point, Space, Vec3};
use crate::graphline::{resample_arclength, Polyline};
use crate::nn::PointIndex;
use crate::volume::{Mask, Volume};

const DENSE_SPACING: f64 = 0.1;
const GT_SPACING: f64 = 0.5;
const GENERATION_SAMPLES: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Straight,
    Helix,
    Coswave,
    Bifurcation,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Straight => "straight",
            CurveKind::Helix => "helix",
            CurveKind::Coswave => "coswave",
            CurveKind::Bifurcation => "bifurcation",
        }
    }
}

impl FromStr for CurveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(CurveKind::Straight),
            "helix" => Ok(CurveKind::Helix),
            "coswave" => Ok(CurveKind::Coswave),
            "bifurcation" => Ok(CurveKind::Bifurcation),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Curve geometry, radius profile and noise for one phantom.
///
/// Curves are placed relative to the volume center. `axis` is the main
/// direction of straight, coswave and bifurcation curves; the wave and the
/// branches bend toward axis `(axis + 1) % 3`. Helices wind around z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub dims: [usize; 3],
    pub axis: usize,
    /// Straight/coswave length; trunk length for bifurcations.
    pub length: f64,
    pub helix_radius: f64,
    pub pitch: f64,
    pub turns: f64,
    pub amplitude: f64,
    pub periods: f64,
    /// Full opening angle between the two branches, degrees.
    pub branch_angle: f64,
    pub branch_length: f64,
    /// Tube radius at the curve start.
    pub radius: f64,
    /// Tube radius at the curve end; equal to `radius` for constant tubes.
    pub radius_end: f64,
    pub noise: f64,
    pub seed: u64,
}

impl CurveSpec {
    pub fn preset(kind: CurveKind) -> CurveSpec {
        let base = CurveSpec {
            kind,
            dims: [64, 64, 64],
            axis: 2,
            length: 48.0,
            helix_radius: 16.0,
            pitch: 32.0,
            turns: 1.0,
            amplitude: 6.0,
            periods: 1.5,
            branch_angle: 60.0,
            branch_length: 20.0,
            radius: 3.0,
            radius_end: 3.0,
            noise: 0.1,
            seed: 0,
        };
        match kind {
            CurveKind::Straight => CurveSpec {
                dims: [33, 33, 32],
                length: 20.0,
                ..base
            },
            CurveKind::Bifurcation => CurveSpec {
                length: 24.0,
                ..base
            },
            _ => base,
        }
    }

    fn center(&self) -> Point {
        Point::new(
            (self.dims[0] as f64 - 1.0) / 2.0,
            (self.dims[1] as f64 - 1.0) / 2.0,
            (self.dims[2] as f64 - 1.0) / 2.0,
        )
    }

    fn frame(&self) -> (Vec3, Vec3) {
        let mut a = Vec3::zeros();
        let mut b = Vec3::zeros();
        a[self.axis] = 1.0;
        b[(self.axis + 1) % 3] = 1.0;
        (a, b)
    }

    /// Tube radius at arc-length fraction `t`.
    pub fn radius_at(&self, t: f64) -> f64 {
        self.radius + (self.radius_end - self.radius) * t.clamp(0.0, 1.0)
    }

    fn check_params(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.axis > 2 {
            return bad(format!("axis {} out of range", self.axis));
        }
        if self.dims.iter().any(|&d| d < 2) {
            return bad(format!("phantom dims {:?}", self.dims));
        }
        if self.radius.min(self.radius_end) < 1.5 {
            return bad(format!(
                "tube radius below 1.5 ({}, {})",
                self.radius, self.radius_end
            ));
        }
        if self.noise < 0.0 || !self.noise.is_finite() {
            return bad(format!("noise {}", self.noise));
        }
        let positive = match self.kind {
            CurveKind::Straight | CurveKind::Coswave => vec![self.length],
            CurveKind::Helix => vec![self.helix_radius, self.turns],
            CurveKind::Bifurcation => vec![self.length, self.branch_length],
        };
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("curve extents must be positive".into());
        }
        if self.kind == CurveKind::Bifurcation
            && !(self.branch_angle > 0.0 && self.branch_angle < 180.0)
        {
            return bad(format!("branch angle {}", self.branch_angle));
        }
        Ok(())
    }

    fn check_margin(&self, pts: &[Point]) -> Result<()> {
        let margin = self.radius.max(self.radius_end) + 2.0;
        for p in pts {
            for a in 0..3 {
                let max = self.dims[a] as f64 - 1.0;
                if p[a] < margin || p[a] > max - margin {
                    return Err(Error::InvalidArgument(format!(
                        "curve point ({:.2}, {:.2}, {:.2}) closer than {margin} to the border",
                        p.x, p.y, p.z
                    )));
                }
            }
        }
        Ok(())
    }

    /// Text form of one field, as accepted by `set`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value {v:?} for {key}")))
        }
        match key {
            "kind" => self.kind = value.trim().parse()?,
            "dims" => {
                let d: Vec<usize> = value
                    .split(',')
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?;
                self.dims = match d.as_slice() {
                    [n] => [*n; 3],
                    [x, y, z] => [*x, *y, *z],
                    _ => return Err(Error::InvalidArgument(format!("dims {value:?}"))),
                };
            }
            "axis" => self.axis = num(key, value)?,
            "length" => self.length = num(key, value)?,
            "helix_radius" => self.helix_radius = num(key, value)?,
            "pitch" => self.pitch = num(key, value)?,
            "turns" => self.turns = num(key, value)?,
            "amplitude" => self.amplitude = num(key, value)?,
            "periods" => self.periods = num(key, value)?,
            "branch_angle" => self.branch_angle = num(key, value)?,
            "branch_length" => self.branch_length = num(key, value)?,
            "radius" => {
                let r = num(key, value)?;
                if self.radius_end == self.radius {
                    self.radius_end = r;
                }
                self.radius = r;
            }
            "radius_end" => self.radius_end = num(key, value)?,
            "noise" => self.noise = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn sample(samples: usize, f: impl Fn(f64) -> Point) -> Vec<Point> {
    (0..samples)
        .map(|i| f(i as f64 / (samples - 1) as f64))
        .collect()
}

/// Every branch of the curve, each sampled at equal parameter steps.
///
/// Bifurcations give two branches that share the trunk; every other kind
/// gives one.
pub fn gen_branches(spec: &CurveSpec, samples: usize) -> Result<Vec<Polyline>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "curve needs at least two samples".into(),
        ));
    }
    spec.check_params()?;
    let c = spec.center();
    let (a, b) = spec.frame();
    let branches: Vec<Vec<Point>> = match spec.kind {
        CurveKind::Straight => {
            let s = c - a * (spec.length / 2.0);
            vec![sample(samples, |t| s + a * (spec.length * t))]
        }
        CurveKind::Coswave => {
            let s = c - a * (spec.length / 2.0);
            let w = 2.0 * PI * spec.periods;
            vec![sample(samples, |t| {
                s + a * (spec.length * t) + b * (spec.amplitude * (w * t).cos())
            })]
        }
        CurveKind::Helix => {
            let h = spec.pitch * spec.turns;
            let th = 2.0 * PI * spec.turns;
            let r = spec.helix_radius;
            vec![sample(samples, |t| {
                Point::new(
                    c.x + r * (th * t).cos(),
                    c.y + r * (th * t).sin(),
                    c.z - h / 2.0 + h * t,
                )
            })]
        }
        CurveKind::Bifurcation => {
            let s = c - a * spec.length;
            let total = spec.length + spec.branch_length;
            let half = spec.branch_angle.to_radians() / 2.0;
            [1.0, -1.0]
                .iter()
                .map(|&sign| {
                    let dir = a * half.cos() + b * (sign * half.sin());
                    sample(samples, |t| {
                        let d = total * t;
                        if d <= spec.length {
                            s + a * d
                        } else {
                            c + dir * (d - spec.length)
                        }
                    })
                })
                .collect()
        }
    };
    let mut out = Vec::with_capacity(branches.len());
    for pts in branches {
        spec.check_margin(&pts)?;
        out.push(Polyline::new(Space::Voxel, dedup(pts))?);
    }
    Ok(out)
}

/// Samples can repeat at the bifurcation junction for few samples.
fn dedup(mut pts: Vec<Point>) -> Vec<Point> {
    pts.dedup();
    pts
}

/// The first (or only) branch of the curve.
pub fn gen_curve(spec: &CurveSpec, samples: usize) -> Result<Polyline> {
    Ok(gen_branches(spec, samples)?.swap_remove(0))
}

/// Intensity, mask and ground-truth centerlines of a phantom.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub spec: CurveSpec,
    pub intensity: Volume,
    pub mask: Mask,
    /// One ground-truth polyline per branch, 0.5-voxel arc spacing.
    pub centerlines: Vec<Polyline>,
}

impl Phantom {
    pub fn generate(spec: &CurveSpec) -> Result<Phantom> {
        let branches = gen_branches(spec, GENERATION_SAMPLES)?;
        rasterize_tube(spec, &branches)
    }

    /// All ground-truth points of every branch.
    pub fn gt_points(&self) -> Vec<Point> {
        self.centerlines
            .iter()
            .flat_map(|p| p.points().iter().copied())
            .collect()
    }
}

struct Dense {
    points: Vec<Point>,
    /// Branch id and arc-length fraction of each point.
    owner: Vec<(usize, f64)>,
    ends: Vec<(Point, Vec3)>,
    /// Index ranges of each branch inside `points`.
    ranges: Vec<std::ops::Range<usize>>,
}

fn densify(curves: &[Polyline]) -> Result<Dense> {
    let mut d = Dense {
        points: Vec::new(),
        owner: Vec::new(),
        ends: Vec::new(),
        ranges: Vec::new(),
    };
    for (b, c) in curves.iter().enumerate() {
        let r = resample_arclength(c, DENSE_SPACING)?;
        let pts = r.points();
        let n = pts.len();
        let start = d.points.len();
        let mut acc = 0.0;
        let total = r.length();
        for i in 0..n {
            if i > 0 {
                acc += (pts[i] - pts[i - 1]).norm();
            }
            d.points.push(pts[i]);
            d.owner
                .push((b, if total > 0.0 { acc / total } else { 0.0 }));
        }
        d.ranges.push(start..start + n);
        d.ends.push((pts[0], (pts[0] - pts[1]).normalize()));
        d.ends
            .push((pts[n - 1], (pts[n - 1] - pts[n - 2]).normalize()));
    }
    Ok(d)
}

/// Voxel value before noise: `0.5 + signed depth`, clamped to `[0, 1]`,
/// kept below 0.5 outside the tube.
fn voxel_value(spec: &CurveSpec, dense: &Dense, index: &PointIndex, x: &Point) -> (bool, f32) {
    let (_, i) = index.nearest(x);
    let (b, _) = dense.owner[i];
    let range = &dense.ranges[b];
    let mut best = (f64::INFINITY, dense.owner[i].1);
    for j in [i.saturating_sub(1).max(range.start), i] {
        if j + 1 < range.end {
            let (dist, t) = point_segment_distance(x, &dense.points[j], &dense.points[j + 1]);
            if dist < best.0 {
                let frac = dense.owner[j].1 + (dense.owner[j + 1].1 - dense.owner[j].1) * t;
                best = (dist, frac);
            }
        }
    }
    let (dist, frac) = best;
    let r = spec.radius_at(frac);
    let mut depth = r - dist;
    let mut cut = false;
    for (end, out) in &dense.ends {
        let beyond = (x - end).dot(out);
        if beyond > 0.0 && (x - end).norm() <= r + 1.0 + 1e-9 {
            // Flat cap: past the end plane, depth is bounded by the overshoot.
            let radial = ((x - end) - out * beyond).norm();
            let capped = (r - radial).min(-beyond);
            if capped < depth {
                depth = capped;
                cut = true;
            }
        }
    }
    let inside = !cut && dist <= r;
    let v = (0.5 + depth).clamp(0.0, 1.0) as f32;
    let v = if inside {
        v.max(0.5)
    } else {
        v.min(0.5 - f32::EPSILON)
    };
    (inside, v)
}

/// Rasterizes tubes around `curves` (voxel space) and adds noise.
pub fn rasterize_tube(spec: &CurveSpec, curves: &[Polyline]) -> Result<Phantom> {
    if curves.is_empty() {
        return Err(Error::Empty("phantom curves"));
    }
    if curves.iter().any(|c| c.space() != Space::Voxel) {
        return Err(Error::SpaceMismatch(Space::Normalized, Space::Voxel));
    }
    let dense = densify(curves)?;
    let index = PointIndex::new(&dense.points).ok_or(Error::Empty("phantom curves"))?;
    let [nx, ny, nz] = spec.dims;
    let slab = nx * ny;
    let mut inside = vec![0u8; nx * ny * nz];
    let mut values = vec![0f32; nx * ny * nz];
    inside
        .par_chunks_mut(slab)
        .zip(values.par_chunks_mut(slab))
        .enumerate()
        .for_each(|(k, (m, v))| {
            for j in 0..ny {
                for i in 0..nx {
                    let (hit, val) = voxel_value(
                        spec,
                        &dense,
                        &index,
                        &Point::new(i as f64, j as f64, k as f64),
                    );
                    m[i + nx * j] = hit as u8;
                    v[i + nx * j] = val;
                }
            }
        });
    let centerlines = curves
        .iter()
        .map(|c| resample_arclength(c, GT_SPACING))
        .collect::<Result<Vec<_>>>()?;
    // The nearest voxel of every ground-truth point belongs to the tube,
    // including those that fall just past a flat cap.
    for c in &centerlines {
        for p in c.points() {
            let q = [
                p.x.round() as usize,
                p.y.round() as usize,
                p.z.round() as usize,
            ];
            let lin = q[0] + nx * (q[1] + ny * q[2]);
            inside[lin] = 1;
            values[lin] = values[lin].max(0.5);
        }
    }
    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal =
            Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for v in values.iter_mut() {
            *v = (*v as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
        }
    }
    Ok(Phantom {
        spec: spec.clone(),
        intensity: Volume::new(spec.dims, [1.0; 3], values)?,
        mask: Mask::new_mask(spec.dims, [1.0; 3], inside)?,
        centerlines,
    })
}
