//! Topology-preserving 3D thinning and surface extraction.
//!
//! Thinning peels border voxels in six directional sub-iterations
//! (+x, -x, +y, -y, +z, -z). A voxel is deleted when it is a border voxel
//! for the current direction, is not a curve endpoint, and is simple for
//! the (26, 6) adjacency pair: its foreground 26-neighbours form exactly
//! one 26-component and the background voxels of its 18-neighbourhood
//! form exactly one 6-component touching it. Candidates are marked in
//! parallel and then re-checked and deleted sequentially in linear order,
//! which keeps deletions topology-safe and the output deterministic.
//! Out-of-bounds voxels count as background.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::geom::Point;
use crate::volume::{Mask, VoxelCoord};

/// Sorted, deduplicated set of in-bounds voxel coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelSet {
    dims: [usize; 3],
    coords: Vec<VoxelCoord>,
}

impl VoxelSet {
    pub fn new(dims: [usize; 3], mut coords: Vec<VoxelCoord>) -> Self {
        coords.retain(|c| (0..3).all(|a| c.0[a] < dims[a]));
        coords.sort_unstable();
        coords.dedup();
        VoxelSet { dims, coords }
    }

    pub fn from_mask(m: &Mask) -> Self {
        VoxelSet::new(m.dims(), m.foreground())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn coords(&self) -> &[VoxelCoord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn contains(&self, c: &VoxelCoord) -> bool {
        self.coords.binary_search(c).is_ok()
    }

    /// Voxel-space points at the voxel centers.
    pub fn points(&self) -> Vec<Point> {
        self.coords.iter().map(VoxelCoord::as_point).collect()
    }

    pub fn to_mask(&self) -> Mask {
        let mut m = Mask::filled(self.dims, 0);
        for c in &self.coords {
            m.set(c.0[0], c.0[1], c.0[2], 1);
        }
        m
    }
}

const CENTER: usize = 13;

#[inline]
fn offset_of(idx: usize) -> [i32; 3] {
    [
        (idx % 3) as i32 - 1,
        ((idx / 3) % 3) as i32 - 1,
        (idx / 9) as i32 - 1,
    ]
}

struct NeighbourTables {
    /// 26-adjacency among the 26 neighbours (center excluded).
    adj26: [u32; 27],
    /// 6-adjacency among the 18-neighbourhood (center excluded).
    adj6: [u32; 27],
    n18: u32,
    n6: u32,
}

fn tables() -> &'static NeighbourTables {
    static T: OnceLock<NeighbourTables> = OnceLock::new();
    T.get_or_init(|| {
        let mut adj26 = [0u32; 27];
        let mut adj6 = [0u32; 27];
        let mut n18 = 0u32;
        let mut n6 = 0u32;
        for a in 0..27 {
            if a == CENTER {
                continue;
            }
            let oa = offset_of(a);
            let l1a: i32 = oa.iter().map(|v| v.abs()).sum();
            if l1a <= 2 {
                n18 |= 1 << a;
            }
            if l1a == 1 {
                n6 |= 1 << a;
            }
            for b in 0..27 {
                if b == CENTER || b == a {
                    continue;
                }
                let ob = offset_of(b);
                let d: Vec<i32> = (0..3).map(|i| (oa[i] - ob[i]).abs()).collect();
                if d.iter().all(|&x| x <= 1) {
                    adj26[a] |= 1 << b;
                }
                let l1b: i32 = ob.iter().map(|v| v.abs()).sum();
                if d.iter().sum::<i32>() == 1 && l1a <= 2 && l1b <= 2 {
                    adj6[a] |= 1 << b;
                }
            }
        }
        NeighbourTables {
            adj26,
            adj6,
            n18,
            n6,
        }
    })
}

/// Number of connected components of `set` under `adj`; when `seeds` is
/// given only components touching a seed bit are counted.
fn count_components(set: u32, adj: &[u32; 27], seeds: Option<u32>) -> u32 {
    let mut remaining = set;
    let mut count = 0;
    while remaining != 0 {
        let start = remaining.trailing_zeros() as usize;
        let mut comp = 1u32 << start;
        let mut frontier = comp;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let nb = adj[v] & set & !comp;
            comp |= nb;
            frontier |= nb;
        }
        remaining &= !comp;
        if seeds.is_none_or(|s| comp & s != 0) {
            count += 1;
        }
    }
    count
}

/// Simple-point test on a 27-bit neighbourhood word (bit 13 is the center).
pub(crate) fn is_simple(neigh: u32) -> bool {
    let t = tables();
    let fg = neigh & !(1 << CENTER) & ((1 << 27) - 1);
    if count_components(fg, &t.adj26, None) != 1 {
        return false;
    }
    let bg = !neigh & t.n18;
    count_components(bg, &t.adj6, Some(t.n6)) == 1
}

/// Padded binary working grid (one voxel of background on every side).
struct Padded {
    dims: [usize; 3],
    data: Vec<u8>,
    strides: [isize; 3],
    offsets: [isize; 27],
}

impl Padded {
    fn from_mask(m: &Mask) -> Self {
        let d = m.dims();
        let dims = [d[0] + 2, d[1] + 2, d[2] + 2];
        let mut data = vec![0u8; dims[0] * dims[1] * dims[2]];
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    data[(i + 1) + dims[0] * ((j + 1) + dims[1] * (k + 1))] = m.get(i, j, k);
                }
            }
        }
        let strides = [1, dims[0] as isize, (dims[0] * dims[1]) as isize];
        let mut offsets = [0isize; 27];
        for (idx, o) in offsets.iter_mut().enumerate() {
            let d = offset_of(idx);
            *o = d[0] as isize * strides[0]
                + d[1] as isize * strides[1]
                + d[2] as isize * strides[2];
        }
        Padded {
            dims,
            data,
            strides,
            offsets,
        }
    }

    #[inline]
    fn neighbourhood(&self, idx: usize) -> u32 {
        let mut w = 0u32;
        for (b, o) in self.offsets.iter().enumerate() {
            if self.data[(idx as isize + o) as usize] != 0 {
                w |= 1 << b;
            }
        }
        w
    }

    fn to_mask(&self, like: &Mask) -> Mask {
        let d = like.dims();
        let mut out = like.clone();
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let v = self.data[(i + 1) + self.dims[0] * ((j + 1) + self.dims[1] * (k + 1))];
                    out.set(i, j, k, v);
                }
            }
        }
        out
    }
}

#[inline]
fn deletable(neigh: u32) -> bool {
    let fg_neighbours = (neigh & !(1 << CENTER)).count_ones();
    fg_neighbours > 1 && is_simple(neigh)
}

/// Thins `m` to a unit-width curve skeleton with the same topology.
pub fn thin_3d(m: &Mask) -> Mask {
    if m.count() == 0 {
        return m.clone();
    }
    let mut g = Padded::from_mask(m);
    let [px, py, pz] = g.dims;
    // Direction offsets in the padded grid: +x, -x, +y, -y, +z, -z.
    let dirs: [isize; 6] = [
        g.strides[0],
        -g.strides[0],
        g.strides[1],
        -g.strides[1],
        g.strides[2],
        -g.strides[2],
    ];
    loop {
        let mut changed = false;
        for &dir in &dirs {
            let grid = &g;
            let candidates: Vec<usize> = (1..pz - 1)
                .into_par_iter()
                .flat_map_iter(|k| {
                    let mut out = Vec::new();
                    for j in 1..py - 1 {
                        for i in 1..px - 1 {
                            let idx = i + px * (j + py * k);
                            if grid.data[idx] == 0 || grid.data[(idx as isize + dir) as usize] != 0
                            {
                                continue;
                            }
                            if deletable(grid.neighbourhood(idx)) {
                                out.push(idx);
                            }
                        }
                    }
                    out
                })
                .collect();
            for idx in candidates {
                if deletable(g.neighbourhood(idx)) {
                    g.data[idx] = 0;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    g.to_mask(m)
}

/// Foreground voxels with at least one background 6-neighbour.
pub fn extract_surface(m: &Mask) -> VoxelSet {
    let [nx, ny, nz] = m.dims();
    let mut coords = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !m.is_set(i, j, k) {
                    continue;
                }
                let (si, sj, sk) = (i as isize, j as isize, k as isize);
                let boundary = [
                    (si - 1, sj, sk),
                    (si + 1, sj, sk),
                    (si, sj - 1, sk),
                    (si, sj + 1, sk),
                    (si, sj, sk - 1),
                    (si, sj, sk + 1),
                ]
                .iter()
                .any(|&(a, b, c)| !m.is_set_signed(a, b, c));
                if boundary {
                    coords.push(VoxelCoord::new(i, j, k));
                }
            }
        }
    }
    VoxelSet::new(m.dims(), coords)
}

/// Coordinates of the thinned skeleton.
pub fn skeleton_points(m: &Mask) -> VoxelSet {
    VoxelSet::from_mask(&thin_3d(m))
}
