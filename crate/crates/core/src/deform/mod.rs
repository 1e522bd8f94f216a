//! Cascaded template deformation.
//!
//! Each stage samples local patches on the target, runs a fixed number of
//! offset updates and then unpools. Energies are evaluated in normalized
//! coordinates; SDF lookups happen in voxel space.

mod cascade;
mod energy;
mod sampling;

pub use cascade::{
    deform_stage, deform_stage_with, run_cascade, run_cascade_with, DeformTrace, GradientDescent,
    OffsetPredictor, Prediction, StageContext, StageSummary, StageTrace,
};
pub use energy::{local_chamfer, reg_energy, sdf_energy, total_energy, EnergyReport, Term};
pub use sampling::{fps, fps_from, sample_patches, Patch, PatchSet};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DeformConfig {
    pub stages: usize,
    pub steps: usize,
    /// Gradient step size, normalized units.
    pub step_size: f64,
    /// Per-step, per-coordinate offset bound, normalized units.
    pub max_offset: f64,
    pub lambda_chamfer: f64,
    pub lambda_sdf: f64,
    pub lambda_reg: f64,
    /// Reporting weights, one per stage.
    pub stage_weights: Vec<f64>,
    /// Inclusive range for the number of patches per stage.
    pub patch_count: (usize, usize),
    /// Patch edge length in voxels.
    pub patch_size: f64,
    /// Multiplier on the SDF term.
    pub sdf_scale: f64,
    /// Whether the last stage is followed by unpooling too.
    pub unpool_final: bool,
    /// Halve steps that would increase the energy.
    pub line_search: bool,
    pub seed: u64,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            stages: 4,
            steps: 25,
            step_size: 0.01,
            max_offset: 0.05,
            lambda_chamfer: 30.0,
            lambda_sdf: 0.5,
            lambda_reg: 60.0,
            stage_weights: vec![0.05, 0.60, 0.95, 1.00],
            patch_count: (60, 80),
            patch_size: 32.0,
            sdf_scale: 1.0,
            unpool_final: true,
            line_search: true,
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

pub(crate) fn format_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl DeformConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.stages == 0 {
            return bad("stages must be at least 1".into());
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step_size {} must be positive", self.step_size));
        }
        if !(self.max_offset > 0.0 && self.max_offset < 1.0) {
            return bad(format!("max_offset {} must lie in (0, 1)", self.max_offset));
        }
        if self.stage_weights.len() != self.stages {
            return bad(format!(
                "{} stage weights for {} stages",
                self.stage_weights.len(),
                self.stages
            ));
        }
        let (lo, hi) = self.patch_count;
        if lo == 0 || lo > hi {
            return bad(format!("patch count range ({lo}, {hi})"));
        }
        if !(self.patch_size > 0.0 && self.patch_size.is_finite()) {
            return bad(format!("patch_size {} must be positive", self.patch_size));
        }
        let finite = [
            self.lambda_chamfer,
            self.lambda_sdf,
            self.lambda_reg,
            self.sdf_scale,
        ];
        if finite
            .iter()
            .chain(&self.stage_weights)
            .any(|x| !x.is_finite())
        {
            return bad("weights must be finite".into());
        }
        Ok(())
    }

    /// Sets one field from its text form. Returns `Ok(false)` for keys this
    /// config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "stages" => self.stages = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "step_size" => self.step_size = parse(key, value)?,
            "max_offset" => self.max_offset = parse(key, value)?,
            "lambda_chamfer" => self.lambda_chamfer = parse(key, value)?,
            "lambda_sdf" => self.lambda_sdf = parse(key, value)?,
            "lambda_reg" => self.lambda_reg = parse(key, value)?,
            "stage_weights" => {
                self.stage_weights = value
                    .split(',')
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "patch_min" => self.patch_count.0 = parse(key, value)?,
            "patch_max" => self.patch_count.1 = parse(key, value)?,
            "patch_size" => self.patch_size = parse(key, value)?,
            "sdf_scale" => self.sdf_scale = parse(key, value)?,
            "unpool_final" => self.unpool_final = parse(key, value)?,
            "line_search" => self.line_search = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Key/value pairs in a fixed order, readable back through `set`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("stages", self.stages.to_string()),
            ("steps", self.steps.to_string()),
            ("step_size", self.step_size.to_string()),
            ("max_offset", self.max_offset.to_string()),
            ("lambda_chamfer", self.lambda_chamfer.to_string()),
            ("lambda_sdf", self.lambda_sdf.to_string()),
            ("lambda_reg", self.lambda_reg.to_string()),
            ("stage_weights", format_list(&self.stage_weights)),
            ("patch_min", self.patch_count.0.to_string()),
            ("patch_max", self.patch_count.1.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("sdf_scale", self.sdf_scale.to_string()),
            ("unpool_final", self.unpool_final.to_string()),
            ("line_search", self.line_search.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let d = DeformConfig::default();
        d.validate().unwrap();
        assert_eq!(
            (d.lambda_chamfer, d.lambda_sdf, d.lambda_reg),
            (30.0, 0.5, 60.0)
        );
        assert_eq!(d.stage_weights, vec![0.05, 0.60, 0.95, 1.00]);
        assert_eq!(d.patch_count, (60, 80));
    }

    #[test]
    fn invalid_configs() {
        let cases: Vec<fn(&mut DeformConfig)> = vec![
            |c| c.stages = 0,
            |c| c.steps = 0,
            |c| c.step_size = 0.0,
            |c| c.max_offset = 1.0,
            |c| c.stage_weights.pop().map(drop).unwrap_or(()),
            |c| c.patch_count = (5, 4),
            |c| c.patch_size = -1.0,
        ];
        for f in cases {
            let mut c = DeformConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn entries_round_trip() {
        let mut c = DeformConfig {
            seed: 17,
            stage_weights: vec![0.1, 0.2, 0.3, 0.4],
            unpool_final: false,
            line_search: false,
            ..DeformConfig::default()
        };
        c.step_size = 0.0125;
        let mut back = DeformConfig::default();
        for (k, v) in c.entries() {
            assert!(back.set(k, &v).unwrap());
        }
        assert_eq!(back, c);
        assert!(!back.set("nope", "1").unwrap());
        assert!(back.set("steps", "x").is_err());
    }
}
