mod support;

use centerline::metrics::betti;
use centerline::skeleton::thin_3d;
use support::brute::euler_case;
use support::shapes;

#[test]
fn betti_of_canonical_shapes() {
    for (name, m, [b0, b1, b2]) in shapes::catalogue() {
        let t = betti(&m);
        assert_eq!((t.b0, t.b1, t.b2), (b0, b1, b2), "{name}");
        assert_eq!(t.euler, b0 - b1 + b2, "{name}");
    }
}

#[test]
fn thinning_preserves_components_and_tunnels() {
    for (name, m, _) in shapes::catalogue() {
        if name == "ball" || name == "shell" {
            continue;
        }
        let (a, s) = (betti(&m), betti(&thin_3d(&m)));
        assert_eq!((s.b0, s.b1), (a.b0, a.b1), "{name}");
    }
}

#[test]
fn euler_identity_on_shapes_and_skeletons() {
    for (name, m, _) in shapes::catalogue() {
        euler_case(&m).unwrap_or_else(|e| panic!("{name}: {e}"));
        euler_case(&thin_3d(&m)).unwrap_or_else(|e| panic!("{name} skeleton: {e}"));
    }
}
