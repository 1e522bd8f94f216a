//! Straightened curved planar reformation.
//!
//! Frames are transported along the centerline by double reflection, which
//! keeps the in-plane axes from twisting where the curvature vanishes.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{sample_trilinear_unchecked, ScalarField};
use crate::geom::{least_aligned_axis, Point, Space, Vec3};
use crate::graphline::{resample_arclength, Polyline};
use crate::volume::Volume;

/// Orthonormal triad at one centerline sample, voxel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub position: Point,
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    /// Arc spacing between consecutive samples, voxel units.
    pub spacing: f64,
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Rotates every normal/binormal pair by `angle` radians about the
    /// tangent.
    pub fn rotated(&self, angle: f64) -> FrameSequence {
        let (s, c) = angle.sin_cos();
        FrameSequence {
            spacing: self.spacing,
            frames: self
                .frames
                .iter()
                .map(|f| Frame {
                    normal: f.normal * c + f.binormal * s,
                    binormal: f.binormal * c - f.normal * s,
                    ..*f
                })
                .collect(),
        }
    }
}

fn unit(v: Vec3) -> Option<Vec3> {
    let n = v.norm();
    (n > 1e-12).then(|| v / n)
}

/// Component of `v` orthogonal to the unit vector `t`, normalized.
fn orthonormal(v: Vec3, t: &Vec3) -> Option<Vec3> {
    unit(v - t * v.dot(t))
}

fn reflect(v: Vec3, axis: &Vec3, c: f64) -> Vec3 {
    v - axis * (2.0 / c * axis.dot(&v))
}

/// Rotation-minimizing frames at arc spacing `spacing` along a voxel-space
/// polyline.
///
/// Tangents are central differences of the resampled positions (one-sided
/// at the ends). The first normal is the world axis least aligned with the
/// first tangent, made orthogonal to it.
pub fn rm_frames(p: &Polyline, spacing: f64) -> Result<FrameSequence> {
    if p.space() != Space::Voxel {
        return Err(Error::SpaceMismatch(p.space(), Space::Voxel));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!("frame spacing {spacing}")));
    }
    let length = p.length();
    if length <= 0.0 {
        return Err(Error::Degenerate("zero-length polyline"));
    }
    if length < 2.0 * spacing {
        return Err(Error::InvalidArgument(format!(
            "polyline length {length} is shorter than twice the frame spacing {spacing}"
        )));
    }
    let pos = resample_arclength(p, spacing)?.into_points();
    let m = pos.len();
    let tangents: Vec<Vec3> = (0..m)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(m - 1));
            unit(pos[b] - pos[a]).ok_or(Error::Degenerate("repeated centerline samples"))
        })
        .collect::<Result<_>>()?;

    let t0 = tangents[0];
    let mut axis = Vec3::zeros();
    axis[least_aligned_axis(&t0)] = 1.0;
    let mut normal = orthonormal(axis, &t0).expect("least aligned axis is not parallel");
    let mut frames = Vec::with_capacity(m);
    frames.push(Frame {
        position: pos[0],
        tangent: t0,
        normal,
        binormal: t0.cross(&normal),
    });
    for i in 0..m - 1 {
        let (ti, tj) = (tangents[i], tangents[i + 1]);
        let v1 = pos[i + 1] - pos[i];
        let c1 = v1.norm_squared();
        let (rl, tl) = if c1 > 0.0 {
            (reflect(normal, &v1, c1), reflect(ti, &v1, c1))
        } else {
            (normal, ti)
        };
        let v2 = tj - tl;
        let c2 = v2.norm_squared();
        let r = if c2 > 1e-24 { reflect(rl, &v2, c2) } else { rl };
        // Re-projection only removes rounding drift.
        normal = orthonormal(r, &tj)
            .or_else(|| orthonormal(normal, &tj))
            .ok_or(Error::Degenerate("centerline reverses direction"))?;
        frames.push(Frame {
            position: pos[i + 1],
            tangent: tj,
            normal,
            binormal: tj.cross(&normal),
        });
    }
    Ok(FrameSequence { spacing, frames })
}

/// Row-major grayscale image, `x` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2D {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image2D {
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[x + self.width * y]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Binary 8-bit PGM. Values map linearly from `window` (or the image range)
/// onto 0..=255 and saturate outside it.
pub fn write_pgm(img: &Image2D, path: impl AsRef<Path>, window: Option<(f32, f32)>) -> Result<()> {
    let path = path.as_ref();
    let (lo, hi) = window.unwrap_or_else(|| img.min_max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut buf = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    buf.extend(
        img.data
            .iter()
            .map(|v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct Scpr {
    /// `(width, width, frames)`: `u` along the normal, `w` along the
    /// binormal, `s` along the centerline.
    pub straightened: Volume,
    /// The `w = c` slab, `width` columns by `frames` rows.
    pub longitudinal: Image2D,
    /// Fraction of samples that fell outside the volume and were clamped.
    pub clamped_fraction: f64,
}

/// Samples `v` on the cross-section grid of every frame.
///
/// `pixel_spacing` is in physical units; the in-plane step is divided by
/// the volume spacing per axis to reach voxel coordinates. `angle` rotates
/// the normal/binormal pair first.
pub fn scpr_resample<F: ScalarField + ?Sized>(
    v: &F,
    volume_spacing: [f64; 3],
    frames: &FrameSequence,
    width: usize,
    pixel_spacing: f64,
    angle: f64,
) -> Result<Scpr> {
    if width.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "scpr width {width} must be odd"
        )));
    }
    if !(pixel_spacing > 0.0 && pixel_spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pixel spacing {pixel_spacing}"
        )));
    }
    if frames.is_empty() {
        return Err(Error::Empty("scpr frames"));
    }
    let frames = if angle == 0.0 {
        frames.clone()
    } else {
        frames.rotated(angle)
    };
    let dims = v.dims();
    let inv = Vec3::from(volume_spacing).map(|s| pixel_spacing / s);
    let c = (width - 1) as f64 / 2.0;
    let outside = |p: &Point| (0..3).any(|a| p[a] < -1e-9 || p[a] > (dims[a] - 1) as f64 + 1e-9);
    let slices: Vec<(Vec<f32>, usize)> = frames
        .frames
        .par_iter()
        .map(|f| {
            let n = f.normal.component_mul(&inv);
            let b = f.binormal.component_mul(&inv);
            let mut out = Vec::with_capacity(width * width);
            let mut clamped = 0;
            for w in 0..width {
                for u in 0..width {
                    let q = f.position + n * (u as f64 - c) + b * (w as f64 - c);
                    clamped += usize::from(outside(&q));
                    out.push(sample_trilinear_unchecked(v, &q).0 as f32);
                }
            }
            (out, clamped)
        })
        .collect();
    let m = frames.len();
    let mut data = Vec::with_capacity(width * width * m);
    let mut clamped = 0;
    for (s, k) in slices {
        data.extend(s);
        clamped += k;
    }
    let wc = width / 2;
    let longitudinal = Image2D {
        width,
        height: m,
        data: (0..m)
            .flat_map(|s| {
                let base = width * (wc + width * s);
                data[base..base + width].to_vec()
            })
            .collect(),
    };
    let straightened = Volume::new(
        [width, width, m],
        [pixel_spacing, pixel_spacing, frames.spacing],
        data,
    )?;
    Ok(Scpr {
        straightened,
        longitudinal,
        clamped_fraction: clamped as f64 / (width * width * m) as f64,
    })
}
