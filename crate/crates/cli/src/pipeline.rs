//! End-to-end run: coarse mask, skeleton, template, cascade, refinement,
//! metrics and optional reformation, each written to the output tree.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use centerline::deform::{run_cascade, DeformConfig, DeformTrace, StageSummary};
use centerline::fields::sdf_grid;
use centerline::graphline::{
    interpolate_template, mst_reconstruct, resample_arclength, select_control_points,
    CenterlineFile, CenterlineGraph, Interpolation, Polyline,
};
use centerline::metrics::{evaluate, mean_point_error, MetricsReport};
use centerline::phantom::Phantom;
use centerline::scpr::{rm_frames, scpr_resample, write_pgm, Scpr};
use centerline::segment::{estimate_radius_clamped, refine_segmentation, RadiusProfile};
use centerline::skeleton::skeleton_points;
use centerline::volume::{binarize, load_volume, save_mask, save_volume, VolumeFile};
use centerline::{Error, GridFrame, Mask, Point, PointCloud, Result, Space, Volume};

use crate::config::PipelineConfig;

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Scalar inputs become masks at `threshold`; masks pass through.
pub fn load_mask_thresholded(path: &Path, threshold: f32) -> Result<Mask> {
    Ok(match load_volume(path)? {
        VolumeFile::Mask(m) => m,
        VolumeFile::Scalar(v) => binarize(&v, threshold),
    })
}

/// Loads every node of a centerline file (chain or graph) in voxel space.
pub fn load_centerline_points(path: &Path, dims: [usize; 3]) -> Result<Vec<Point>> {
    let f = CenterlineFile::load(path)?;
    let g = f.to_graph()?;
    Ok(GridFrame::new(dims).convert_all(g.vertices(), g.space(), Space::Voxel))
}

pub fn load_polyline(path: &Path, dims: [usize; 3]) -> Result<Polyline> {
    let p = CenterlineFile::load(path)?.to_polyline()?;
    Ok(p.to_space(&GridFrame::new(dims), Space::Voxel))
}

/// MST over the skeleton, then the template along its longest path.
pub fn build_template(
    skeleton: &[Point],
    control_points: usize,
    points: usize,
    method: Interpolation,
) -> Result<(CenterlineGraph, Polyline)> {
    let g = mst_reconstruct(Space::Voxel, skeleton)?;
    let cp = select_control_points(&g, control_points)?;
    let t = interpolate_template(&cp, method, points)?;
    Ok((g, t))
}

/// Fits `template` to the skeleton of `coarse` under the squared SDF of
/// `coarse`.
pub fn deform_centerline(
    template: &Polyline,
    target: &[Point],
    coarse: &Mask,
    cfg: &DeformConfig,
) -> Result<(Polyline, DeformTrace)> {
    let sdf = sdf_grid(coarse, 2)?;
    let gt = PointCloud::new(Space::Voxel, target.to_vec());
    run_cascade(template, &gt, &sdf, cfg)
}

/// Refines `coarse` along `centerline` resampled every `spacing` voxels.
///
/// Deformation can thin the points out where the coarse mask is broken;
/// evenly spaced samples keep every stretch of the curve covered.
pub fn segment(
    coarse: &Mask,
    centerline: &Polyline,
    min_radius: f64,
    spacing: f64,
) -> Result<(Mask, RadiusProfile)> {
    let voxel = centerline.to_space(&GridFrame::new(coarse.dims()), Space::Voxel);
    let samples = resample_arclength(&voxel, spacing)?;
    let sdf = sdf_grid(coarse, 1)?;
    let radii = estimate_radius_clamped(&samples, &sdf, min_radius)?;
    let refined = refine_segmentation(coarse, &samples, &radii)?;
    Ok((refined, radii))
}

pub fn reformat(v: &Volume, centerline: &Polyline, cfg: &PipelineConfig) -> Result<Scpr> {
    let voxel = centerline.to_space(&GridFrame::new(v.dims()), Space::Voxel);
    let frames = rm_frames(&voxel, cfg.frame_spacing)?;
    scpr_resample(
        v,
        v.spacing(),
        &frames,
        cfg.scpr_width,
        cfg.scpr_spacing,
        cfg.scpr_angle.to_radians(),
    )
}

/// Writes the straightened container and longitudinal image under `dir`.
pub fn save_scpr(s: &Scpr, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let vol = dir.join("straightened");
    save_volume(&s.straightened, &vol)?;
    let pgm = dir.join("longitudinal.pgm");
    write_pgm(&s.longitudinal, &pgm, None)?;
    Ok(vec![
        vol.with_extension("json"),
        vol.with_extension("raw"),
        pgm,
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct CenterlineErrors {
    pub template: f64,
    pub r#final: f64,
    /// `template / final`.
    pub improvement: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineMetrics {
    pub refined: MetricsReport,
    pub coarse: MetricsReport,
    pub centerline_error: CenterlineErrors,
    pub final_points: usize,
    pub radius_median: f64,
    pub weighted_energy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineOutcome {
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub final_points: usize,
    pub metrics: Option<PipelineMetrics>,
}

#[derive(Serialize)]
struct TraceFile<'a> {
    weighted_energy: f64,
    stages: &'a [StageSummary],
}

struct Inputs {
    volume: Option<Volume>,
    coarse: Mask,
    gt_mask: Option<Mask>,
    gt_points: Option<Vec<Point>>,
}

fn load_inputs(cfg: &PipelineConfig, files: &mut Vec<PathBuf>) -> Result<Inputs> {
    if let Some(spec) = cfg.phantom_spec()? {
        let ph = Phantom::generate(&spec)?;
        let dir = cfg.out.join("phantom");
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        save_volume(&ph.intensity, dir.join("intensity"))?;
        save_mask(&ph.mask, dir.join("mask"))?;
        files.push(dir.join("intensity.json"));
        files.push(dir.join("mask.json"));
        for (i, c) in ph.centerlines.iter().enumerate() {
            let p = dir.join(branch_name("centerline", i));
            CenterlineFile::from_polyline(c, Some(spec.kind.as_str())).save(&p)?;
            files.push(p);
        }
        let coarse = binarize(&ph.intensity, cfg.threshold);
        let gt_points = ph.gt_points();
        return Ok(Inputs {
            volume: Some(ph.intensity),
            coarse,
            gt_mask: Some(ph.mask),
            gt_points: Some(gt_points),
        });
    }
    let volume = match &cfg.volume {
        Some(p) => Some(load_volume(p)?.into_scalar()),
        None => None,
    };
    let coarse = match (&cfg.coarse, &volume) {
        (Some(p), _) => load_mask_thresholded(p, cfg.threshold)?,
        (None, Some(v)) => binarize(v, cfg.threshold),
        (None, None) => return Err(Error::InvalidArgument("no coarse input".into())),
    };
    if let Some(v) = &volume {
        if v.dims() != coarse.dims() {
            return Err(Error::DimMismatch(v.dims(), coarse.dims()));
        }
    }
    let gt_mask = match &cfg.gt_mask {
        Some(p) => Some(load_mask_thresholded(p, 0.5)?),
        None => None,
    };
    let gt_points = match &cfg.gt_centerline {
        Some(p) => Some(load_centerline_points(p, coarse.dims())?),
        None => None,
    };
    Ok(Inputs {
        volume,
        coarse,
        gt_mask,
        gt_points,
    })
}

/// `name.json` for the first branch, `name_<i>.json` for later ones.
pub fn branch_name(name: &str, i: usize) -> String {
    if i == 0 {
        format!("{name}.json")
    } else {
        format!("{name}_{i}.json")
    }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut files = Vec::new();
    let config_path = out.join("config.txt");
    fs::write(&config_path, cfg.to_text()).map_err(|e| io_err(&config_path, e))?;
    files.push(config_path);

    let inputs = load_inputs(cfg, &mut files)?;
    let coarse = &inputs.coarse;
    if coarse.count() == 0 {
        return Err(Error::Empty("coarse mask"));
    }
    save_mask(coarse, out.join("coarse"))?;
    files.push(out.join("coarse.json"));

    let skeleton = skeleton_points(coarse);
    save_mask(&skeleton.to_mask(), out.join("skeleton"))?;
    files.push(out.join("skeleton.json"));
    let target = skeleton.points();

    let (graph, template) = build_template(
        &target,
        cfg.control_points,
        cfg.template_points,
        cfg.interpolation,
    )?;
    let graph_path = out.join("skeleton_graph.json");
    CenterlineFile::from_graph(&graph).save(&graph_path)?;
    files.push(graph_path);
    let template_path = out.join("template.json");
    CenterlineFile::from_polyline(&template, Some("template")).save(&template_path)?;
    files.push(template_path);

    let (centerline, trace) = deform_centerline(&template, &target, coarse, &cfg.deform)?;
    let stages_dir = out.join("stages");
    fs::create_dir_all(&stages_dir).map_err(|e| io_err(&stages_dir, e))?;
    for s in &trace.stages {
        let p = stages_dir.join(format!("stage_{}.json", s.stage));
        CenterlineFile::from_polyline(&s.output, Some(&format!("stage {}", s.stage))).save(&p)?;
        files.push(p);
    }
    let summary = trace.summary();
    let trace_path = out.join("trace.json");
    write_json(
        &TraceFile {
            weighted_energy: trace.weighted_energy(),
            stages: &summary,
        },
        &trace_path,
    )?;
    files.push(trace_path);
    let cl_path = out.join("centerline.json");
    CenterlineFile::from_polyline(&centerline, Some("centerline")).save(&cl_path)?;
    files.push(cl_path);

    let (refined, radii) = segment(coarse, &centerline, cfg.min_radius, cfg.refine_spacing)?;
    save_mask(&refined, out.join("refined"))?;
    files.push(out.join("refined.json"));
    write_json(&radii, &out.join("radii.json"))?;
    files.push(out.join("radii.json"));

    let metrics = match (&inputs.gt_mask, &inputs.gt_points) {
        (Some(gm), Some(gp)) => {
            let pred = centerline.points();
            let refined_report = evaluate(&refined, gm, pred, gp, cfg.f1_tolerance)?;
            let coarse_report = evaluate(coarse, gm, pred, gp, cfg.f1_tolerance)?;
            let t_err = mean_point_error(template.points(), gp)?;
            let f_err = mean_point_error(pred, gp)?;
            let m = PipelineMetrics {
                refined: refined_report,
                coarse: coarse_report,
                centerline_error: CenterlineErrors {
                    template: t_err,
                    r#final: f_err,
                    improvement: t_err / f_err,
                },
                final_points: centerline.len(),
                radius_median: radii.median,
                weighted_energy: trace.weighted_energy(),
            };
            let p = out.join("metrics.json");
            write_json(&m, &p)?;
            files.push(p);
            Some(m)
        }
        _ => None,
    };

    if cfg.scpr {
        let v = inputs.volume.unwrap_or_else(|| coarse.map(f32::from));
        let s = reformat(&v, &centerline, cfg)?;
        files.extend(save_scpr(&s, &out.join("scpr"))?);
    }

    Ok(PipelineOutcome {
        out: out.clone(),
        files,
        final_points: centerline.len(),
        metrics,
    })
}
