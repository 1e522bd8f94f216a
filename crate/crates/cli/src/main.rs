use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use centerline::graphline::{interpolate_template, select_control_points};
use centerline::graphline::{split_branches, CenterlineFile, Polyline};
use centerline::metrics::evaluate;
use centerline::phantom::Phantom;
use centerline::skeleton::skeleton_points;
use centerline::volume::{load_scalar, save_mask, save_volume};
use centerline::{Error, Result, Space};
use centerline_cli::config::PipelineConfig;
use centerline_cli::pipeline::{
    branch_name, build_template, deform_centerline, load_centerline_points, load_mask_thresholded,
    load_polyline, reformat, save_scpr, segment, write_json,
};
use centerline_cli::{error_json, resolve_threads, run_pipeline, EXIT_FAILURE, THREADS_ENV};

/// Deformable centerline extraction on 3D voxel volumes.
#[derive(Parser)]
#[command(name = "deformcl", version)]
struct Cli {
    /// Worker threads; falls back to DEFORMCL_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// `key = value` config file applied over the defaults, below flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tube: intensity, mask and centerline.
    Phantom(PhantomCmd),
    /// Thin a mask to a one-voxel skeleton.
    Skeletonize(SkeletonizeCmd),
    /// Build a template centerline from a skeleton mask.
    Template(TemplateCmd),
    /// Fit a template to a target with the cascaded deformation.
    Deform(DeformCmd),
    /// Refine a coarse mask around a centerline.
    Segment(SegmentCmd),
    /// Overlap, topology, distance and centerline scores.
    Metrics(MetricsCmd),
    /// Straightened reformation along a centerline.
    Scpr(ScprCmd),
    /// Run every step end to end.
    Pipeline(PipelineCmd),
}

type Pairs = Vec<(&'static str, String)>;

macro_rules! pairs {
    ($out:ident, $s:expr, { $($field:ident => $key:literal),* $(,)? }) => {
        $( if let Some(v) = &$s.$field { $out.push(($key, v.to_string())); } )*
    };
}

#[derive(Args, Default)]
struct DeformFlags {
    /// Deformation stages L.
    #[arg(long)]
    stages: Option<usize>,
    /// Inner updates per stage T.
    #[arg(long)]
    steps: Option<usize>,
    /// Gradient step size, normalized units.
    #[arg(long)]
    step_size: Option<f64>,
    /// Per-step, per-coordinate offset bound, normalized units.
    #[arg(long)]
    max_offset: Option<f64>,
    #[arg(long)]
    lambda_chamfer: Option<f64>,
    #[arg(long)]
    lambda_sdf: Option<f64>,
    #[arg(long)]
    lambda_reg: Option<f64>,
    /// Comma-separated weights, one per stage.
    #[arg(long)]
    stage_weights: Option<String>,
    #[arg(long)]
    patch_min: Option<usize>,
    #[arg(long)]
    patch_max: Option<usize>,
    /// Patch edge in voxels.
    #[arg(long)]
    patch_size: Option<f64>,
    #[arg(long)]
    sdf_scale: Option<f64>,
    /// Unpool after the last stage too.
    #[arg(long)]
    unpool_final: Option<bool>,
    /// Backtrack steps that would raise the energy.
    #[arg(long)]
    line_search: Option<bool>,
    /// Seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
}

impl DeformFlags {
    fn pairs(&self, out: &mut Pairs) {
        pairs!(out, self, {
            stages => "stages", steps => "steps", step_size => "step_size",
            max_offset => "max_offset", lambda_chamfer => "lambda_chamfer",
            lambda_sdf => "lambda_sdf", lambda_reg => "lambda_reg",
            stage_weights => "stage_weights", patch_min => "patch_min",
            patch_max => "patch_max", patch_size => "patch_size", sdf_scale => "sdf_scale",
            unpool_final => "unpool_final", line_search => "line_search", seed => "seed",
        });
    }
}

#[derive(Args, Default)]
struct TemplateFlags {
    /// Control points k.
    #[arg(long, short = 'k')]
    control_points: Option<usize>,
    /// Template size N_c.
    #[arg(long)]
    template_points: Option<usize>,
    /// linear, bspline2 or bspline3.
    #[arg(long)]
    interpolation: Option<String>,
}

impl TemplateFlags {
    fn pairs(&self, out: &mut Pairs) {
        pairs!(out, self, {
            control_points => "control_points", template_points => "template_points",
            interpolation => "interpolation",
        });
    }
}

#[derive(Args, Default)]
struct ShapeFlags {
    /// Grid size as `n` or `x,y,z`.
    #[arg(long)]
    dims: Option<String>,
    /// Main axis (0, 1 or 2) of straight, coswave and bifurcation curves.
    #[arg(long)]
    axis: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    helix_radius: Option<f64>,
    #[arg(long)]
    pitch: Option<f64>,
    #[arg(long)]
    turns: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    periods: Option<f64>,
    /// Full opening angle in degrees.
    #[arg(long)]
    branch_angle: Option<f64>,
    #[arg(long)]
    branch_length: Option<f64>,
    /// Tube radius in voxels.
    #[arg(long)]
    radius: Option<f64>,
    /// Radius at the curve end, for tapered tubes.
    #[arg(long)]
    radius_end: Option<f64>,
    /// Gaussian intensity noise sigma.
    #[arg(long)]
    noise: Option<f64>,
}

impl ShapeFlags {
    fn pairs(&self, out: &mut Pairs) {
        pairs!(out, self, {
            dims => "phantom.dims", axis => "phantom.axis", length => "phantom.length",
            helix_radius => "phantom.helix_radius", pitch => "phantom.pitch",
            turns => "phantom.turns", amplitude => "phantom.amplitude",
            periods => "phantom.periods", branch_angle => "phantom.branch_angle",
            branch_length => "phantom.branch_length", radius => "phantom.radius",
            radius_end => "phantom.radius_end", noise => "phantom.noise",
        });
    }
}

#[derive(Args)]
struct PhantomCmd {
    /// straight, helix, coswave or bifurcation.
    #[arg(long, default_value = "helix")]
    kind: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    shape: ShapeFlags,
}

#[derive(Args)]
struct SkeletonizeCmd {
    /// Mask (or scalar volume, thresholded) container.
    #[arg(long)]
    mask: PathBuf,
    /// Output skeleton mask container.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threshold: Option<f32>,
}

#[derive(Args)]
struct TemplateCmd {
    /// Skeleton mask container.
    #[arg(long)]
    skeleton: PathBuf,
    /// Output template JSON; with --split-branches, one file per branch.
    #[arg(long)]
    out: PathBuf,
    /// Also write the spanning tree of the skeleton.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Build one template per branch between junctions and endpoints.
    #[arg(long)]
    split_branches: bool,
    #[command(flatten)]
    template: TemplateFlags,
}

#[derive(Args)]
struct DeformCmd {
    /// Template centerline JSON.
    #[arg(long)]
    template: PathBuf,
    /// Coarse mask container; its SDF drives the fit.
    #[arg(long)]
    coarse: PathBuf,
    /// Target skeleton mask; defaults to the skeleton of the coarse mask.
    #[arg(long, conflicts_with = "target_centerline")]
    target_mask: Option<PathBuf>,
    /// Target centerline JSON instead of a skeleton mask.
    #[arg(long)]
    target_centerline: Option<PathBuf>,
    /// Output centerline JSON.
    #[arg(long)]
    out: PathBuf,
    /// Per-stage energy trace JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f32>,
    #[command(flatten)]
    deform: DeformFlags,
}

#[derive(Args)]
struct SegmentCmd {
    #[arg(long)]
    coarse: PathBuf,
    #[arg(long)]
    centerline: PathBuf,
    /// Output mask container.
    #[arg(long)]
    out: PathBuf,
    /// Per-point radius JSON.
    #[arg(long)]
    radii: Option<PathBuf>,
    #[arg(long)]
    min_radius: Option<f64>,
    /// Arc-length step of the refinement samples, voxels.
    #[arg(long)]
    refine_spacing: Option<f64>,
    #[arg(long)]
    threshold: Option<f32>,
}

#[derive(Args)]
struct MetricsCmd {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred_centerline: PathBuf,
    #[arg(long)]
    gt_centerline: PathBuf,
    /// Centerline match tolerance in voxels.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ScprFlags {
    /// Cross-section width in pixels; odd.
    #[arg(long)]
    width: Option<usize>,
    /// In-plane pixel spacing, physical units.
    #[arg(long)]
    spacing: Option<f64>,
    /// Rotation of the cross-section axes, degrees.
    #[arg(long)]
    angle: Option<f64>,
    /// Arc spacing between cross-sections, voxels.
    #[arg(long)]
    frame_spacing: Option<f64>,
}

impl ScprFlags {
    fn pairs(&self, out: &mut Pairs) {
        pairs!(out, self, {
            width => "scpr_width", spacing => "scpr_spacing", angle => "scpr_angle",
            frame_spacing => "frame_spacing",
        });
    }
}

#[derive(Args)]
struct ScprCmd {
    /// Volume to reformat.
    #[arg(long)]
    volume: PathBuf,
    #[arg(long)]
    centerline: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scpr: ScprFlags,
}

#[derive(Args)]
struct PipelineCmd {
    /// Synthesize the input: straight, helix, coswave or bifurcation.
    #[arg(long, conflicts_with_all = ["volume", "coarse"])]
    phantom: Option<String>,
    /// Intensity volume; thresholded when no coarse mask is given.
    #[arg(long)]
    volume: Option<PathBuf>,
    #[arg(long)]
    coarse: Option<PathBuf>,
    #[arg(long)]
    gt_mask: Option<PathBuf>,
    #[arg(long)]
    gt_centerline: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the straightened reformation.
    #[arg(long)]
    scpr: bool,
    #[arg(long)]
    threshold: Option<f32>,
    #[arg(long)]
    min_radius: Option<f64>,
    /// Arc-length step of the refinement samples, voxels.
    #[arg(long)]
    refine_spacing: Option<f64>,
    /// Centerline match tolerance in voxels.
    #[arg(long)]
    tolerance: Option<f64>,
    #[command(flatten)]
    deform: DeformFlags,
    #[command(flatten)]
    template: TemplateFlags,
    #[command(flatten)]
    shape: ShapeFlags,
    #[command(flatten)]
    reformat: ScprFlags,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn opt<T: ToString>(out: &mut Pairs, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

impl Command {
    fn pairs(&self) -> Pairs {
        let mut out = Pairs::new();
        match self {
            Command::Phantom(c) => {
                out.push(("phantom", c.kind.clone()));
                opt(&mut out, "seed", &c.seed);
                c.shape.pairs(&mut out);
            }
            Command::Skeletonize(c) => opt(&mut out, "threshold", &c.threshold),
            Command::Template(c) => c.template.pairs(&mut out),
            Command::Deform(c) => {
                opt(&mut out, "threshold", &c.threshold);
                c.deform.pairs(&mut out);
            }
            Command::Segment(c) => {
                opt(&mut out, "min_radius", &c.min_radius);
                opt(&mut out, "refine_spacing", &c.refine_spacing);
                opt(&mut out, "threshold", &c.threshold);
            }
            Command::Metrics(c) => opt(&mut out, "f1_tolerance", &c.tolerance),
            Command::Scpr(c) => c.scpr.pairs(&mut out),
            Command::Pipeline(c) => {
                opt(&mut out, "phantom", &c.phantom);
                opt(&mut out, "volume", &c.volume.as_deref().map(path_str));
                opt(&mut out, "coarse", &c.coarse.as_deref().map(path_str));
                opt(&mut out, "gt_mask", &c.gt_mask.as_deref().map(path_str));
                opt(
                    &mut out,
                    "gt_centerline",
                    &c.gt_centerline.as_deref().map(path_str),
                );
                opt(&mut out, "out", &c.out.as_deref().map(path_str));
                if c.scpr {
                    out.push(("scpr", "true".into()));
                }
                opt(&mut out, "threshold", &c.threshold);
                opt(&mut out, "min_radius", &c.min_radius);
                opt(&mut out, "refine_spacing", &c.refine_spacing);
                opt(&mut out, "f1_tolerance", &c.tolerance);
                c.deform.pairs(&mut out);
                c.template.pairs(&mut out);
                c.shape.pairs(&mut out);
                c.reformat.pairs(&mut out);
            }
        }
        out
    }
}

fn resolve(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(p) = &cli.config {
        cfg.apply_file(p)?;
    }
    for (k, v) in cli.command.pairs() {
        cfg.set(k, &v)?;
    }
    Ok(cfg)
}

fn parent_dir(p: &Path) -> Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| Error::Io {
            path: d.to_path_buf(),
            source: e,
        })?;
    }
    Ok(())
}

fn mkdir(d: &Path) -> Result<()> {
    std::fs::create_dir_all(d).map_err(|e| Error::Io {
        path: d.to_path_buf(),
        source: e,
    })
}

fn run(cli: &Cli) -> Result<Value> {
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::Phantom(c) => {
            let spec = cfg.phantom_spec()?.expect("kind is always set");
            let ph = Phantom::generate(&spec)?;
            mkdir(&c.out)?;
            save_volume(&ph.intensity, c.out.join("intensity"))?;
            save_mask(&ph.mask, c.out.join("mask"))?;
            let mut files = vec![c.out.join("intensity.json"), c.out.join("mask.json")];
            for (i, cl) in ph.centerlines.iter().enumerate() {
                let p = c.out.join(branch_name("centerline", i));
                CenterlineFile::from_polyline(cl, Some(spec.kind.as_str())).save(&p)?;
                files.push(p);
            }
            Ok(json!({
                "kind": spec.kind.as_str(),
                "dims": spec.dims,
                "mask_voxels": ph.mask.count(),
                "branches": ph.centerlines.len(),
                "files": files,
            }))
        }
        Command::Skeletonize(c) => {
            let m = load_mask_thresholded(&c.mask, cfg.threshold)?;
            let skel = skeleton_points(&m);
            parent_dir(&c.out)?;
            save_mask(&skel.to_mask(), &c.out)?;
            Ok(json!({ "input_voxels": m.count(), "skeleton_voxels": skel.len() }))
        }
        Command::Template(c) => {
            let m = load_mask_thresholded(&c.skeleton, 0.5)?;
            let pts = centerline::skeleton::VoxelSet::from_mask(&m).points();
            let (graph, template) = build_template(
                &pts,
                cfg.control_points,
                cfg.template_points,
                cfg.interpolation,
            )?;
            parent_dir(&c.out)?;
            if let Some(g) = &c.graph {
                parent_dir(g)?;
                CenterlineFile::from_graph(&graph).save(g)?;
            }
            let templates: Vec<Polyline> = if c.split_branches {
                split_branches(&graph)?
                    .iter()
                    .map(|b| {
                        let cp = select_control_points(&b.to_graph(), cfg.control_points)?;
                        interpolate_template(&cp, cfg.interpolation, cfg.template_points)
                    })
                    .collect::<Result<_>>()?
            } else {
                vec![template]
            };
            let stem = c
                .out
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("template")
                .to_string();
            let dir = c.out.parent().unwrap_or(Path::new(""));
            let mut files = Vec::new();
            for (i, t) in templates.iter().enumerate() {
                let p = dir.join(branch_name(&stem, i));
                CenterlineFile::from_polyline(t, Some("template")).save(&p)?;
                files.push(p);
            }
            Ok(json!({
                "skeleton_points": pts.len(),
                "templates": templates.len(),
                "points": cfg.template_points,
                "interpolation": cfg.interpolation.as_str(),
                "files": files,
            }))
        }
        Command::Deform(c) => {
            let coarse = load_mask_thresholded(&c.coarse, cfg.threshold)?;
            let template = load_polyline(&c.template, coarse.dims())?;
            let target = match (&c.target_mask, &c.target_centerline) {
                (Some(p), _) => {
                    centerline::skeleton::VoxelSet::from_mask(&load_mask_thresholded(p, 0.5)?)
                        .points()
                }
                (None, Some(p)) => load_centerline_points(p, coarse.dims())?,
                (None, None) => skeleton_points(&coarse).points(),
            };
            let (out, trace) = deform_centerline(&template, &target, &coarse, &cfg.deform)?;
            let out = if template.space() == Space::Voxel {
                out
            } else {
                out.to_space(&centerline::GridFrame::new(coarse.dims()), template.space())
            };
            parent_dir(&c.out)?;
            CenterlineFile::from_polyline(&out, Some("centerline")).save(&c.out)?;
            let summary = trace.summary();
            if let Some(t) = &c.trace {
                parent_dir(t)?;
                write_json(
                    &json!({ "weighted_energy": trace.weighted_energy(), "stages": summary }),
                    t,
                )?;
            }
            let last = summary
                .last()
                .and_then(|s| s.energies.last())
                .map(|e| e.total);
            Ok(json!({
                "template_points": template.len(),
                "points": out.len(),
                "stages": summary.len(),
                "final_energy": last,
                "weighted_energy": trace.weighted_energy(),
            }))
        }
        Command::Segment(c) => {
            let coarse = load_mask_thresholded(&c.coarse, cfg.threshold)?;
            let cl = load_polyline(&c.centerline, coarse.dims())?;
            let (refined, radii) = segment(&coarse, &cl, cfg.min_radius, cfg.refine_spacing)?;
            parent_dir(&c.out)?;
            save_mask(&refined, &c.out)?;
            if let Some(p) = &c.radii {
                parent_dir(p)?;
                write_json(&radii, p)?;
            }
            Ok(json!({
                "coarse_voxels": coarse.count(),
                "refined_voxels": refined.count(),
                "radius_median": radii.median,
            }))
        }
        Command::Metrics(c) => {
            let pred = load_mask_thresholded(&c.pred, 0.5)?;
            let gt = load_mask_thresholded(&c.gt, 0.5)?;
            let pc = load_centerline_points(&c.pred_centerline, pred.dims())?;
            let gc = load_centerline_points(&c.gt_centerline, gt.dims())?;
            let report = evaluate(&pred, &gt, &pc, &gc, cfg.f1_tolerance)?;
            let v = serde_json::to_value(&report).expect("report serializes");
            if let Some(p) = &c.out {
                parent_dir(p)?;
                write_json(&v, p)?;
            }
            Ok(v)
        }
        Command::Scpr(c) => {
            let v = load_scalar(&c.volume)?;
            let cl = load_polyline(&c.centerline, v.dims())?;
            let s = reformat(&v, &cl, &cfg)?;
            let files = save_scpr(&s, &c.out)?;
            Ok(json!({
                "dims": s.straightened.dims(),
                "clamped_fraction": s.clamped_fraction,
                "files": files,
            }))
        }
        Command::Pipeline(_) => {
            let outcome = run_pipeline(&cfg)?;
            Ok(serde_json::to_value(&outcome).expect("outcome serializes"))
        }
    }
}

fn print_human(v: &Value, prefix: &str) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                match x {
                    Value::Object(_) => print_human(x, &key),
                    Value::Array(items) if items.iter().all(|i| !i.is_object()) => {
                        let parts: Vec<String> = items
                            .iter()
                            .map(|i| match i {
                                Value::String(s) => s.clone(),
                                other => other.to_string(),
                            })
                            .collect();
                        println!("{key}: {}", parts.join(", "));
                    }
                    Value::String(s) => println!("{key}: {s}"),
                    other => println!("{key}: {other}"),
                }
            }
        }
        other => println!("{other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env = std::env::var(THREADS_ENV).ok();
    let result = resolve_threads(cli.threads, env.as_deref()).and_then(|n| {
        if let Some(n) = n {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        }
        run(&cli)
    });
    match result {
        Ok(v) => {
            if cli.json {
                println!("{v}");
            } else {
                print_human(&v, "");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use centerline::phantom::CurveKind;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        std::fs::write(&cfg, "steps = 5\nlambda_sdf = 2\nphantom = straight\n").unwrap();
        let cli = Cli::parse_from([
            "deformcl",
            "--config",
            cfg.to_str().unwrap(),
            "pipeline",
            "--steps",
            "9",
            "--phantom",
            "helix",
        ]);
        let c = resolve(&cli).unwrap();
        assert_eq!(c.deform.steps, 9);
        assert_eq!(c.deform.lambda_sdf, 2.0);
        assert_eq!(c.phantom, Some(CurveKind::Helix));
    }

    #[test]
    fn unknown_flags_fail() {
        assert!(Cli::try_parse_from(["deformcl", "pipeline", "--bogus", "1"]).is_err());
    }
}
