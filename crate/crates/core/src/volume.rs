//! Dense 3D grids and the two-file volume container.
//!
//! A container is a pair `<name>.json` + `<name>.raw`. The header carries
//! `dims`, `spacing`, `dtype` (`"u8"` or `"f32"`) and `order`
//! (`"xyz-row-major"`). The payload is little-endian with no padding, x
//! varying fastest: `linear = i + nx * (j + ny * k)`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ORDER_XYZ: &str = "xyz-row-major";

/// Integer voxel index `(i, j, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoxelCoord(pub [usize; 3]);

impl VoxelCoord {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        VoxelCoord([i, j, k])
    }

    pub fn as_point(&self) -> crate::geom::Point {
        crate::geom::Point::new(self.0[0] as f64, self.0[1] as f64, self.0[2] as f64)
    }
}

/// Dense grid of `T` with per-axis spacing (mm per voxel).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<T>,
}

/// Scalar intensities or distances.
pub type Volume = Grid<f32>;
/// Binary grid; every element is 0 or 1.
pub type Mask = Grid<u8>;

fn check_geometry(dims: [usize; 3], spacing: [f64; 3], len: usize) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::InvalidGrid(format!(
            "dims must be >= 1, got {dims:?}"
        )));
    }
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidGrid(format!(
            "spacing must be positive, got {spacing:?}"
        )));
    }
    let n = dims[0] * dims[1] * dims[2];
    if len != n {
        return Err(Error::InvalidGrid(format!(
            "data length {len} != {}x{}x{}",
            dims[0], dims[1], dims[2]
        )));
    }
    Ok(())
}

impl<T: Copy> Grid<T> {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<T>) -> Result<Self> {
        check_geometry(dims, spacing, data.len())?;
        Ok(Grid {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: [usize; 3], value: T) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Grid {
            dims,
            spacing: [1.0; 3],
            data: vec![value; n],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Grid {
            dims,
            spacing: [1.0; 3],
            data,
        }
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_geometry(self.dims, spacing, self.data.len())?;
        self.spacing = spacing;
        Ok(self)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coord(&self, linear: usize) -> VoxelCoord {
        let nx = self.dims[0];
        let ny = self.dims[1];
        VoxelCoord([linear % nx, (linear / nx) % ny, linear / (nx * ny)])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.index(i, j, k)]
    }

    /// Value at a signed coordinate, `None` when out of bounds.
    #[inline]
    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> Option<T> {
        if i < 0 || j < 0 || k < 0 {
            return None;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return None;
        }
        Some(self.get(i, j, k))
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            dims: self.dims,
            spacing: self.spacing,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same geometry, new payload.
    pub fn with_data<U: Copy>(&self, data: Vec<U>) -> Result<Grid<U>> {
        Grid::new(self.dims, self.spacing, data)
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(self.dims, other.dims));
        }
        Ok(())
    }
}

impl Grid<u8> {
    /// Builds a mask, rejecting any element outside {0, 1}.
    pub fn new_mask(dims: [usize; 3], spacing: [f64; 3], data: Vec<u8>) -> Result<Mask> {
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidGrid(format!(
                "mask value {bad} not in {{0,1}}"
            )));
        }
        Grid::new(dims, spacing, data)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_set(&self, i: usize, j: usize, k: usize) -> bool {
        self.get(i, j, k) != 0
    }

    pub fn is_set_signed(&self, i: isize, j: isize, k: isize) -> bool {
        self.get_signed(i, j, k).is_some_and(|v| v != 0)
    }

    /// Foreground coordinates in linear (x-fastest) order.
    pub fn foreground(&self) -> Vec<VoxelCoord> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| self.coord(i))
            .collect()
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a | b)
            .collect();
        self.with_data(data)
    }
}

/// `output[p] = 1` iff `v[p] >= threshold`.
pub fn binarize(v: &Volume, threshold: f32) -> Mask {
    v.map(|x| u8::from(x >= threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    F32,
}

impl Dtype {
    pub fn tag(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::F32 => "f32",
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 => 4,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "u8" | "uint8" => Ok(Dtype::U8),
            "f32" | "float32" => Ok(Dtype::F32),
            other => Err(Error::UnknownDtype(other.to_string())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    dims: [usize; 3],
    spacing: [f64; 3],
    dtype: String,
    order: String,
}

/// Contents of a volume container.
#[derive(Clone, Debug, PartialEq)]
pub enum VolumeFile {
    Scalar(Volume),
    Mask(Mask),
}

impl VolumeFile {
    pub fn dtype(&self) -> Dtype {
        match self {
            VolumeFile::Scalar(_) => Dtype::F32,
            VolumeFile::Mask(_) => Dtype::U8,
        }
    }

    /// Float view of either payload.
    pub fn into_scalar(self) -> Volume {
        match self {
            VolumeFile::Scalar(v) => v,
            VolumeFile::Mask(m) => m.map(f32::from),
        }
    }

    /// Mask view; float payloads are binarized at 0.5.
    pub fn into_mask(self) -> Mask {
        match self {
            VolumeFile::Scalar(v) => binarize(&v, 0.5),
            VolumeFile::Mask(m) => m,
        }
    }
}

impl From<Volume> for VolumeFile {
    fn from(v: Volume) -> Self {
        VolumeFile::Scalar(v)
    }
}

impl From<Mask> for VolumeFile {
    fn from(m: Mask) -> Self {
        VolumeFile::Mask(m)
    }
}

/// Header and payload paths for a container name. Accepts the bare name or
/// either of the two file names.
pub fn container_paths(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let p = path.as_ref();
    let base = match p.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => p.with_extension(""),
        _ => p.to_path_buf(),
    };
    let mut header = base.clone().into_os_string();
    header.push(".json");
    let mut raw = base.into_os_string();
    raw.push(".raw");
    (header.into(), raw.into())
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<VolumeFile> {
    let (hpath, rpath) = container_paths(path);
    let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| Error::Header {
        path: hpath.clone(),
        reason: e.to_string(),
    })?;
    if header.order != ORDER_XYZ {
        return Err(Error::Header {
            path: hpath,
            reason: format!("unsupported order `{}`", header.order),
        });
    }
    let dtype = Dtype::parse(&header.dtype)?;
    let bytes = fs::read(&rpath).map_err(|e| Error::io(&rpath, e))?;
    let n: usize = header.dims.iter().product();
    let expected = n * dtype.width();
    if bytes.len() != expected {
        return Err(Error::LengthMismatch {
            path: rpath,
            expected,
            found: bytes.len(),
        });
    }
    let header_err = |e: Error| Error::Header {
        path: hpath.clone(),
        reason: e.to_string(),
    };
    Ok(match dtype {
        Dtype::U8 => VolumeFile::Mask(
            Mask::new_mask(header.dims, header.spacing, bytes).map_err(header_err)?,
        ),
        Dtype::F32 => {
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            VolumeFile::Scalar(Volume::new(header.dims, header.spacing, data).map_err(header_err)?)
        }
    })
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    load_volume(path).map(VolumeFile::into_mask)
}

pub fn load_scalar(path: impl AsRef<Path>) -> Result<Volume> {
    load_volume(path).map(VolumeFile::into_scalar)
}

fn write_container(
    path: &Path,
    dims: [usize; 3],
    spacing: [f64; 3],
    dtype: Dtype,
    payload: &[u8],
) -> Result<()> {
    let (hpath, rpath) = container_paths(path);
    let header = Header {
        dims,
        spacing,
        dtype: dtype.tag().to_string(),
        order: ORDER_XYZ.to_string(),
    };
    let mut text = serde_json::to_string_pretty(&header).expect("header serializes");
    text.push('\n');
    fs::write(&hpath, text).map_err(|e| Error::io(&hpath, e))?;
    fs::write(&rpath, payload).map_err(|e| Error::io(&rpath, e))?;
    Ok(())
}

pub fn save_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::with_capacity(v.len() * 4);
    for x in v.data() {
        payload.extend_from_slice(&x.to_le_bytes());
    }
    write_container(path.as_ref(), v.dims(), v.spacing(), Dtype::F32, &payload)
}

pub fn save_mask(m: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_container(path.as_ref(), m.dims(), m.spacing(), Dtype::U8, m.data())
}

/// Writes an f64 field by narrowing to f32.
pub fn save_field(g: &Grid<f64>, path: impl AsRef<Path>) -> Result<()> {
    save_volume(&g.map(|x| x as f32), path)
}

pub fn save_file(f: &VolumeFile, path: impl AsRef<Path>) -> Result<()> {
    match f {
        VolumeFile::Scalar(v) => save_volume(v, path),
        VolumeFile::Mask(m) => save_mask(m, path),
    }
}
