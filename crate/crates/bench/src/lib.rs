//! Fixtures shared by the benchmarks.

use centerline::deform::{sample_patches, DeformConfig, PatchSet};
use centerline::fields::{sdf_grid, SdfGrid};
use centerline::graphline::{
    interpolate_template, mst_reconstruct, select_control_points, Interpolation, Polyline,
};
use centerline::phantom::{CurveKind, CurveSpec, Phantom};
use centerline::skeleton::skeleton_points;
use centerline::{GridFrame, Mask, PointCloud, Space};

/// Noise-free helix phantom at its preset geometry.
pub fn helix() -> Phantom {
    let spec = CurveSpec {
        noise: 0.0,
        ..CurveSpec::preset(CurveKind::Helix)
    };
    Phantom::generate(&spec).expect("preset phantom")
}

/// Everything one cascade run needs, built from a mask.
pub struct DeformInputs {
    pub template: Polyline,
    pub target: PointCloud,
    pub sdf: SdfGrid,
}

pub fn deform_inputs(mask: &Mask) -> DeformInputs {
    let skeleton = skeleton_points(mask).points();
    let g = mst_reconstruct(Space::Voxel, &skeleton).expect("skeleton tree");
    let cp = select_control_points(&g, 4).expect("control points");
    let template = interpolate_template(&cp, Interpolation::Linear, 100).expect("template");
    DeformInputs {
        template,
        target: PointCloud::new(Space::Voxel, skeleton),
        sdf: sdf_grid(mask, 2).expect("sdf"),
    }
}

/// Template and target in normalized space with one stage's patches.
pub fn energy_inputs(
    inputs: &DeformInputs,
    cfg: &DeformConfig,
) -> (PointCloud, PointCloud, PatchSet) {
    let frame = GridFrame::new(inputs.sdf.grid.dims());
    let pred = inputs
        .template
        .to_cloud()
        .to_space(&frame, Space::Normalized);
    let gt = inputs.target.to_space(&frame, Space::Normalized);
    let patches =
        sample_patches(&gt, cfg.patch_count, cfg.patch_size, &frame, cfg.seed).expect("patches");
    (pred, gt, patches)
}
