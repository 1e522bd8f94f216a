//! Direct quadratic or exhaustive versions of the grid, metric and graph
//! routines.

use std::collections::HashSet;

use centerline::fields::{distance_map_from_points, edt};
use centerline::graphline::mst_reconstruct;
use centerline::metrics::{betti, chamfer_metric, euler_characteristic, hd95};
use centerline::skeleton::extract_surface;
use centerline::{Mask, Point, Space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: u64 = 100;
pub const MAX_DIM: usize = 16;
pub const MAX_POINTS: usize = 200;
pub const TOL: f64 = 1e-6;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dims(rng: &mut impl Rng) -> [usize; 3] {
    [
        rng.random_range(1..=MAX_DIM),
        rng.random_range(1..=MAX_DIM),
        rng.random_range(1..=MAX_DIM),
    ]
}

pub fn random_mask(rng: &mut impl Rng) -> Mask {
    let dims = random_dims(rng);
    let density = rng.random_range(0.02..0.7);
    Mask::from_fn(dims, |_, _, _| u8::from(rng.random_bool(density)))
}

pub fn random_points(rng: &mut impl Rng, dims: [usize; 3], n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| {
            Point::new(
                rng.random_range(0.0..dims[0] as f64),
                rng.random_range(0.0..dims[1] as f64),
                rng.random_range(0.0..dims[2] as f64),
            )
        })
        .collect()
}

fn lattice(dims: [usize; 3]) -> impl Iterator<Item = (usize, usize, usize)> {
    let [nx, ny, nz] = dims;
    (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..nx).map(move |i| (i, j, k))))
}

fn nearest(p: &Point, set: &[Point]) -> f64 {
    set.iter()
        .map(|q| (p - q).norm())
        .fold(f64::INFINITY, f64::min)
}

fn compare(got: &[f64], want: &[f64], what: &str) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{what}: {} values, want {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if (g - w).abs() > TOL {
            return Err(format!("{what}[{i}] = {g}, brute force {w}"));
        }
    }
    Ok(())
}

pub fn edt_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let mut m = random_mask(&mut r);
    if m.count() == 0 {
        m.set(0, 0, 0, 1);
    }
    let sources: Vec<Point> = m.foreground().iter().map(|c| c.as_point()).collect();
    let want: Vec<f64> = lattice(m.dims())
        .map(|(i, j, k)| nearest(&Point::new(i as f64, j as f64, k as f64), &sources))
        .collect();
    let got = edt(&m).map_err(|e| e.to_string())?;
    compare(got.grid.data(), &want, "edt")
}

pub fn distance_map_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let dims = random_dims(&mut r);
    let n = r.random_range(1..=MAX_POINTS);
    let pts = random_points(&mut r, dims, n);
    let want: Vec<f64> = lattice(dims)
        .map(|(i, j, k)| nearest(&Point::new(i as f64, j as f64, k as f64), &pts))
        .collect();
    let got = distance_map_from_points(&pts, dims).map_err(|e| e.to_string())?;
    compare(got.grid.data(), &want, "distance map")
}

fn point_pair(seed: u64) -> (Vec<Point>, Vec<Point>) {
    let mut r = rng(seed);
    let dims = random_dims(&mut r);
    let na = r.random_range(1..=MAX_POINTS);
    let nb = r.random_range(1..=MAX_POINTS);
    (
        random_points(&mut r, dims, na),
        random_points(&mut r, dims, nb),
    )
}

/// Nearest-rank 95th percentile of all pairwise-minimum distances pooled
/// over both directions.
pub fn hd95_brute(a: &[Point], b: &[Point]) -> f64 {
    let mut d: Vec<f64> = a.iter().map(|p| nearest(p, b)).collect();
    d.extend(b.iter().map(|p| nearest(p, a)));
    d.sort_by(f64::total_cmp);
    let rank = (0.95 * d.len() as f64).ceil() as usize;
    d[rank.max(1) - 1]
}

pub fn chamfer_brute(a: &[Point], b: &[Point]) -> f64 {
    let fwd = a.iter().map(|p| nearest(p, b)).sum::<f64>() / a.len() as f64;
    let bwd = b.iter().map(|p| nearest(p, a)).sum::<f64>() / b.len() as f64;
    0.5 * (fwd + bwd)
}

pub fn hd95_case(seed: u64) -> Result<(), String> {
    let (a, b) = point_pair(seed);
    let got = hd95(&a, &b).map_err(|e| e.to_string())?;
    compare(&[got], &[hd95_brute(&a, &b)], "hd95")
}

pub fn chamfer_metric_case(seed: u64) -> Result<(), String> {
    let (a, b) = point_pair(seed);
    let got = chamfer_metric(&a, &b).map_err(|e| e.to_string())?;
    compare(&[got], &[chamfer_brute(&a, &b)], "chamfer")
}

/// Tree encoded by a Prüfer sequence over `n` labels.
pub fn prufer_decode(seq: &[usize], n: usize) -> Vec<[usize; 2]> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push([leaf.min(s), leaf.max(s)]);
        degree[leaf] = 0;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push([rest[0], rest[1]]);
    edges.sort_unstable();
    edges
}

/// Minimum-weight spanning tree by enumerating all `n^(n-2)` labeled trees.
pub fn mst_brute(points: &[Point]) -> (f64, Vec<[usize; 2]>) {
    let n = points.len();
    let weight = |edges: &[[usize; 2]]| -> f64 {
        edges
            .iter()
            .map(|&[a, b]| (points[a] - points[b]).norm())
            .sum()
    };
    let mut best = (f64::INFINITY, Vec::new());
    let len = n - 2;
    let mut seq = vec![0usize; len];
    loop {
        let edges = prufer_decode(&seq, n);
        let w = weight(&edges);
        if w < best.0 {
            best = (w, edges);
        }
        // Odometer increment over base-n digits.
        let mut pos = 0;
        loop {
            if pos == len {
                return best;
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

pub fn mst_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(2..=7);
    let pts = random_points(&mut r, [MAX_DIM; 3], n);
    let (w, want) = mst_brute(&pts);
    let g = mst_reconstruct(Space::Voxel, &pts).map_err(|e| e.to_string())?;
    let mut got: Vec<[usize; 2]> = g
        .edges()
        .iter()
        .map(|&[a, b]| [a.min(b), a.max(b)])
        .collect();
    got.sort_unstable();
    if got != want {
        return Err(format!("edges {got:?}, enumeration {want:?} (weight {w})"));
    }
    Ok(())
}

pub fn surface_brute(m: &Mask) -> Vec<[usize; 3]> {
    lattice(m.dims())
        .filter(|&(i, j, k)| m.is_set(i, j, k))
        .filter(|&(i, j, k)| {
            let (i, j, k) = (i as isize, j as isize, k as isize);
            [(1, 0, 0), (0, 1, 0), (0, 0, 1)].iter().any(|&(a, b, c)| {
                !m.is_set_signed(i + a, j + b, k + c) || !m.is_set_signed(i - a, j - b, k - c)
            })
        })
        .map(|(i, j, k)| [i, j, k])
        .collect()
}

pub fn surface_case(seed: u64) -> Result<(), String> {
    let m = random_mask(&mut rng(seed));
    let mut want = surface_brute(&m);
    want.sort_unstable();
    let mut got: Vec<[usize; 3]> = extract_surface(&m).coords().iter().map(|c| c.0).collect();
    got.sort_unstable();
    if got != want {
        return Err(format!(
            "{} surface voxels, brute force {}",
            got.len(),
            want.len()
        ));
    }
    Ok(())
}

/// Euler characteristic of the closed-cube complex from explicit cell sets.
pub fn euler_brute(m: &Mask) -> i64 {
    let mut verts = HashSet::new();
    let mut edges = HashSet::new();
    let mut faces = HashSet::new();
    let mut cubes = 0i64;
    for (i, j, k) in lattice(m.dims()).filter(|&(i, j, k)| m.is_set(i, j, k)) {
        cubes += 1;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    verts.insert((i + a, j + b, k + c));
                }
                edges.insert((i, j + a, k + b, 0));
                edges.insert((i + a, j, k + b, 1));
                edges.insert((i + a, j + b, k, 2));
            }
            faces.insert((i, j, k + a, 2));
            faces.insert((i, j + a, k, 1));
            faces.insert((i + a, j, k, 0));
        }
    }
    verts.len() as i64 - edges.len() as i64 + faces.len() as i64 - cubes
}

/// Cell-count Euler characteristic and the Betti identity on one mask.
pub fn euler_case(m: &Mask) -> Result<(), String> {
    let got = euler_characteristic(m);
    let want = euler_brute(m);
    if got != want {
        return Err(format!("euler {got}, cell count {want}"));
    }
    let t = betti(m);
    if t.euler != t.b0 - t.b1 + t.b2 || t.euler != want {
        return Err(format!("betti {t:?} against euler {want}"));
    }
    Ok(())
}

pub fn random_euler_case(seed: u64) -> Result<(), String> {
    euler_case(&random_mask(&mut rng(seed)))
}
