mod support;

use support::all_seeds;
use support::brute::{self as b, INSTANCES};

#[test]
fn edt_matches_brute_force() {
    all_seeds(0..INSTANCES, b::edt_case).unwrap();
}

#[test]
fn distance_map_matches_brute_force() {
    all_seeds(0..INSTANCES, b::distance_map_case).unwrap();
}

#[test]
fn hd95_matches_brute_force() {
    all_seeds(0..INSTANCES, b::hd95_case).unwrap();
}

#[test]
fn chamfer_metric_matches_brute_force() {
    all_seeds(0..INSTANCES, b::chamfer_metric_case).unwrap();
}

#[test]
fn mst_matches_tree_enumeration() {
    all_seeds(0..INSTANCES, b::mst_case).unwrap();
}

#[test]
fn surface_matches_brute_force() {
    all_seeds(0..INSTANCES, b::surface_case).unwrap();
}

#[test]
fn euler_matches_cell_count() {
    all_seeds(0..INSTANCES, b::random_euler_case).unwrap();
}

#[test]
fn prufer_decoding_yields_trees() {
    // 4^2 sequences give 16 distinct labeled trees on 4 nodes.
    let mut seen = std::collections::HashSet::new();
    for a in 0..4 {
        for c in 0..4 {
            let t = b::prufer_decode(&[a, c], 4);
            assert_eq!(t.len(), 3);
            seen.insert(t);
        }
    }
    assert_eq!(seen.len(), 16);
}
