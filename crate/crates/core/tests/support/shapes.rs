//! Masks with known Betti numbers.

use centerline::phantom::{CurveKind, CurveSpec, Phantom};
use centerline::Mask;

fn centered(dims: [usize; 3], f: impl Fn(f64, f64, f64) -> bool) -> Mask {
    let c = |n: usize| (n as f64 - 1.0) / 2.0;
    Mask::from_fn(dims, |i, j, k| {
        u8::from(f(
            i as f64 - c(dims[0]),
            j as f64 - c(dims[1]),
            k as f64 - c(dims[2]),
        ))
    })
}

/// Solid ball, radius 5.
pub fn ball() -> Mask {
    centered([15; 3], |x, y, z| x * x + y * y + z * z <= 25.0)
}

/// Solid torus in the xy plane, ring radius 7, tube radius 2.5.
pub fn torus() -> Mask {
    centered([25, 25, 11], |x, y, z| {
        let r = (x * x + y * y).sqrt() - 7.0;
        r * r + z * z <= 6.25
    })
}

/// Hollow shell between radii 3 and 6.
pub fn shell() -> Mask {
    centered([17; 3], |x, y, z| {
        let d2 = x * x + y * y + z * z;
        d2 > 9.0 && d2 <= 36.0
    })
}

/// Noise-free phantom mask for `kind` at its preset geometry.
pub fn phantom_mask(kind: CurveKind) -> Mask {
    let spec = CurveSpec {
        noise: 0.0,
        ..CurveSpec::preset(kind)
    };
    Phantom::generate(&spec).unwrap().mask
}

/// Expected `(b0, b1, b2)` of every named shape.
pub fn catalogue() -> Vec<(&'static str, Mask, [i64; 3])> {
    vec![
        ("ball", ball(), [1, 0, 0]),
        ("torus", torus(), [1, 1, 0]),
        ("shell", shell(), [1, 0, 1]),
        ("tube", phantom_mask(CurveKind::Straight), [1, 0, 0]),
        ("helix", phantom_mask(CurveKind::Helix), [1, 0, 0]),
    ]
}
