//! Offset prediction, single stages and the full cascade.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::energy::{total_energy, EnergyReport};
use super::sampling::{sample_patches_with, PatchSet};
use super::DeformConfig;
use crate::error::{Error, Result};
use crate::fields::SdfGrid;
use crate::geom::{GridFrame, PointCloud, Space, Vec3};
use crate::graphline::{unpool, Polyline};

/// Target data shared by every step of one stage.
#[derive(Clone, Copy)]
pub struct StageContext<'a> {
    pub gt: &'a PointCloud,
    pub patches: &'a PatchSet,
    pub sdf: &'a SdfGrid,
}

/// Offsets for one update plus the energies the predictor evaluated.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub offsets: Vec<Vec3>,
    /// Energy at the input points.
    pub report: EnergyReport,
    /// Energy at the displaced points, when already known.
    pub next: Option<EnergyReport>,
}

/// Produces per-point offsets for the current points.
///
/// `known` is the energy at `points` when the stage already has it.
pub trait OffsetPredictor {
    fn predict(
        &mut self,
        points: &PointCloud,
        known: Option<EnergyReport>,
        ctx: &StageContext<'_>,
        cfg: &DeformConfig,
    ) -> Result<Prediction>;
}

const MAX_HALVINGS: usize = 10;

/// `δ = clamp(-η ∇E, ±δ_max)` per coordinate.
///
/// With `cfg.line_search` the step is halved until the energy does not
/// increase; after `MAX_HALVINGS` failures the points stay put.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradientDescent;

fn displaced(points: &PointCloud, offsets: &[Vec3], alpha: f64) -> PointCloud {
    PointCloud::new(
        points.space,
        points
            .points
            .iter()
            .zip(offsets)
            .map(|(p, d)| p + d * alpha)
            .collect(),
    )
}

impl OffsetPredictor for GradientDescent {
    fn predict(
        &mut self,
        points: &PointCloud,
        known: Option<EnergyReport>,
        ctx: &StageContext<'_>,
        cfg: &DeformConfig,
    ) -> Result<Prediction> {
        let report = match known {
            Some(r) => r,
            None => total_energy(points, ctx.gt, ctx.patches, ctx.sdf, cfg)?,
        };
        let m = cfg.max_offset;
        let base: Vec<Vec3> = report
            .grad
            .iter()
            .map(|g| (-cfg.step_size * g).map(|x| x.clamp(-m, m)))
            .collect();
        if !cfg.line_search {
            return Ok(Prediction {
                offsets: base,
                report,
                next: None,
            });
        }
        let mut alpha = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let trial = displaced(points, &base, alpha);
            let r = total_energy(&trial, ctx.gt, ctx.patches, ctx.sdf, cfg)?;
            if r.total <= report.total {
                return Ok(Prediction {
                    offsets: base.iter().map(|d| d * alpha).collect(),
                    report,
                    next: Some(r),
                });
            }
            alpha *= 0.5;
        }
        Ok(Prediction {
            offsets: vec![Vec3::zeros(); points.len()],
            next: Some(report.clone()),
            report,
        })
    }
}

#[derive(Clone, Debug)]
pub struct StageTrace {
    pub stage: usize,
    pub weight: f64,
    pub patches: usize,
    pub input: Polyline,
    /// Points after the offset updates, before unpooling.
    pub deformed: Polyline,
    pub output: Polyline,
    /// Energy before each update and once after the last.
    pub reports: Vec<EnergyReport>,
}

#[derive(Clone, Debug, Default)]
pub struct DeformTrace {
    pub stages: Vec<StageTrace>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    pub weight: f64,
    pub patches: usize,
    pub input_points: usize,
    pub output_points: usize,
    pub energies: Vec<EnergyReport>,
}

impl DeformTrace {
    /// `Σ_l w_l · E_l` over each stage's final energy.
    pub fn weighted_energy(&self) -> f64 {
        self.stages
            .iter()
            .filter_map(|s| s.reports.last().map(|r| s.weight * r.total))
            .sum()
    }

    pub fn summary(&self) -> Vec<StageSummary> {
        self.stages
            .iter()
            .map(|s| StageSummary {
                stage: s.stage,
                weight: s.weight,
                patches: s.patches,
                input_points: s.input.len(),
                output_points: s.output.len(),
                energies: s.reports.clone(),
            })
            .collect()
    }
}

fn check(space: Space, other: Space) -> Result<()> {
    if space != other {
        return Err(Error::SpaceMismatch(space, other));
    }
    Ok(())
}

pub fn deform_stage(
    p: &Polyline,
    ctx: &StageContext<'_>,
    cfg: &DeformConfig,
    stage: usize,
) -> Result<StageTrace> {
    deform_stage_with(p, ctx, cfg, stage, &mut GradientDescent)
}

/// Runs `cfg.steps` offset updates, then unpools unless this is the last
/// stage and `cfg.unpool_final` is off.
///
/// A non-finite energy or point aborts with `Error::Diverged` carrying the
/// partial stage.
pub fn deform_stage_with(
    p: &Polyline,
    ctx: &StageContext<'_>,
    cfg: &DeformConfig,
    stage: usize,
    predictor: &mut dyn OffsetPredictor,
) -> Result<StageTrace> {
    check(p.space(), ctx.gt.space)?;
    check(p.space(), ctx.patches.space)?;
    let mut cur = p.to_cloud();
    let mut reports = Vec::with_capacity(cfg.steps + 1);
    let weight = cfg.stage_weights.get(stage).copied().unwrap_or(1.0);
    let diverged = |step: usize, cur: &PointCloud, reports: Vec<EnergyReport>| {
        let partial = StageTrace {
            stage,
            weight,
            patches: ctx.patches.len(),
            input: p.clone(),
            deformed: Polyline::from_raw(p.space(), cur.points.clone()),
            output: Polyline::from_raw(p.space(), cur.points.clone()),
            reports,
        };
        Error::Diverged {
            stage,
            step,
            trace: Box::new(DeformTrace {
                stages: vec![partial],
            }),
        }
    };
    let mut known = None;
    for step in 0..=cfg.steps {
        let finite_points = cur.points.iter().all(|q| q.iter().all(|x| x.is_finite()));
        if !finite_points {
            return Err(diverged(step, &cur, reports));
        }
        let (offsets, report) = if step < cfg.steps {
            let pred = predictor.predict(&cur, known.take(), ctx, cfg)?;
            known = pred.next;
            (Some(pred.offsets), pred.report)
        } else {
            let r = match known.take() {
                Some(r) => r,
                None => total_energy(&cur, ctx.gt, ctx.patches, ctx.sdf, cfg)?,
            };
            (None, r)
        };
        let finite =
            report.total.is_finite() && report.grad.iter().all(|g| g.iter().all(|x| x.is_finite()));
        reports.push(report);
        if !finite {
            return Err(diverged(step, &cur, reports));
        }
        if let Some(offsets) = offsets {
            for (q, d) in cur.points.iter_mut().zip(offsets) {
                *q += d;
            }
        }
    }
    let deformed = Polyline::from_raw(p.space(), cur.points);
    let last = stage + 1 >= cfg.stages;
    let output = if last && !cfg.unpool_final {
        deformed.clone()
    } else {
        unpool(&deformed)
    };
    Ok(StageTrace {
        stage,
        weight,
        patches: ctx.patches.len(),
        input: p.clone(),
        deformed,
        output,
        reports,
    })
}

pub fn run_cascade(
    template: &Polyline,
    gt: &PointCloud,
    sdf: &SdfGrid,
    cfg: &DeformConfig,
) -> Result<(Polyline, DeformTrace)> {
    run_cascade_with(template, gt, sdf, cfg, &mut GradientDescent)
}

/// Fits `template` to the target over `cfg.stages` stages.
///
/// Work happens in normalized coordinates; the result and every polyline
/// in the trace are returned in the template's space. Stage `l` draws its
/// patches from stream `l` of the seeded generator.
pub fn run_cascade_with(
    template: &Polyline,
    gt: &PointCloud,
    sdf: &SdfGrid,
    cfg: &DeformConfig,
    predictor: &mut dyn OffsetPredictor,
) -> Result<(Polyline, DeformTrace)> {
    cfg.validate()?;
    if gt.is_empty() {
        return Err(Error::Empty("cascade target points"));
    }
    let frame = GridFrame::new(sdf.grid.dims());
    let space = template.space();
    let back = |p: &Polyline| p.to_space(&frame, space);
    let gt_n = gt.to_space(&frame, Space::Normalized);
    let mut cur = template.to_space(&frame, Space::Normalized);
    let mut trace = DeformTrace::default();
    for stage in 0..cfg.stages {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stage as u64);
        let mut patches =
            sample_patches_with(&gt_n, cfg.patch_count, cfg.patch_size, &frame, &mut rng)?;
        patches.seed = cfg.seed;
        let ctx = StageContext {
            gt: &gt_n,
            patches: &patches,
            sdf,
        };
        let st = match deform_stage_with(&cur, &ctx, cfg, stage, predictor) {
            Ok(st) => st,
            Err(Error::Diverged {
                stage,
                step,
                trace: partial,
            }) => {
                trace
                    .stages
                    .extend(partial.stages.into_iter().map(|s| to_space(s, &back)));
                return Err(Error::Diverged {
                    stage,
                    step,
                    trace: Box::new(trace),
                });
            }
            Err(e) => return Err(e),
        };
        cur = st.output.clone();
        trace.stages.push(to_space(st, &back));
    }
    Ok((back(&cur), trace))
}

fn to_space(s: StageTrace, back: &impl Fn(&Polyline) -> Polyline) -> StageTrace {
    StageTrace {
        input: back(&s.input),
        deformed: back(&s.deformed),
        output: back(&s.output),
        ..s
    }
}
