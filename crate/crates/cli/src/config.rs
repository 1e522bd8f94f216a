//! Flat `key = value` configuration shared by every subcommand.
//!
//! Keys are the deformation fields, the template and segmentation settings,
//! the I/O paths and `phantom.<field>` overrides for the synthetic input.
//! `seed` drives every random choice.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use centerline::deform::DeformConfig;
use centerline::graphline::Interpolation;
use centerline::metrics::DEFAULT_F1_TOLERANCE;
use centerline::phantom::{CurveKind, CurveSpec};
use centerline::segment::DEFAULT_MIN_RADIUS;
use centerline::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub deform: DeformConfig,
    /// Control points k.
    pub control_points: usize,
    /// Template size N_c.
    pub template_points: usize,
    pub interpolation: Interpolation,
    pub min_radius: f64,
    /// Arc-length step of the centerline samples used for refinement.
    pub refine_spacing: f64,
    /// Intensity threshold that turns a scalar input into the coarse mask.
    pub threshold: f32,
    pub f1_tolerance: f64,
    pub phantom: Option<CurveKind>,
    /// `phantom.<field>` overrides, applied in order over the preset.
    pub phantom_overrides: Vec<(String, String)>,
    pub volume: Option<PathBuf>,
    pub coarse: Option<PathBuf>,
    pub gt_mask: Option<PathBuf>,
    pub gt_centerline: Option<PathBuf>,
    pub out: PathBuf,
    pub scpr: bool,
    pub scpr_width: usize,
    pub scpr_spacing: f64,
    pub scpr_angle: f64,
    pub frame_spacing: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            deform: DeformConfig::default(),
            control_points: 4,
            template_points: 100,
            interpolation: Interpolation::Linear,
            min_radius: DEFAULT_MIN_RADIUS,
            refine_spacing: 0.5,
            threshold: 0.5,
            f1_tolerance: DEFAULT_F1_TOLERANCE,
            phantom: None,
            phantom_overrides: Vec::new(),
            volume: None,
            coarse: None,
            gt_mask: None,
            gt_centerline: None,
            out: PathBuf::from("out"),
            scpr: false,
            scpr_width: 31,
            scpr_spacing: 1.0,
            scpr_angle: 0.0,
            frame_spacing: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

fn opt_path(v: &Option<PathBuf>) -> String {
    v.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

fn path_value(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl PipelineConfig {
    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if let Some(field) = key.strip_prefix("phantom.") {
            if field == "kind" || field == "seed" {
                return Err(Error::InvalidArgument(format!(
                    "{key} is set through `phantom` and `seed`"
                )));
            }
            // Validate the field name and value now; apply later.
            let mut probe = CurveSpec::preset(CurveKind::Helix);
            if !probe.set(field, value)? {
                return Err(Error::InvalidArgument(format!("unknown key `{key}`")));
            }
            self.phantom_overrides
                .push((field.to_string(), value.trim().to_string()));
            return Ok(());
        }
        if self.deform.set(key, value)? {
            return Ok(());
        }
        match key {
            "control_points" => self.control_points = parse(key, value)?,
            "template_points" => self.template_points = parse(key, value)?,
            "interpolation" => self.interpolation = value.trim().parse()?,
            "min_radius" => self.min_radius = parse(key, value)?,
            "refine_spacing" => self.refine_spacing = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "f1_tolerance" => self.f1_tolerance = parse(key, value)?,
            "phantom" => {
                let v = value.trim();
                self.phantom = if v.is_empty() || v == "none" {
                    None
                } else {
                    Some(v.parse()?)
                }
            }
            "volume" => self.volume = path_value(value),
            "coarse" => self.coarse = path_value(value),
            "gt_mask" => self.gt_mask = path_value(value),
            "gt_centerline" => self.gt_centerline = path_value(value),
            "out" => {
                self.out = path_value(value)
                    .ok_or_else(|| Error::InvalidArgument("out must not be empty".into()))?
            }
            "scpr" => self.scpr = parse(key, value)?,
            "scpr_width" => self.scpr_width = parse(key, value)?,
            "scpr_spacing" => self.scpr_spacing = parse(key, value)?,
            "scpr_angle" => self.scpr_angle = parse(key, value)?,
            "frame_spacing" => self.frame_spacing = parse(key, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file body. Blank lines and `#` comments are
    /// skipped; every other line must be `key = value` with a known key.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                reason: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(k, v).map_err(|e| Error::Config {
                line: i + 1,
                reason: match e {
                    Error::InvalidArgument(m) => m,
                    other => other.to_string(),
                },
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.deform.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.control_points < 2 {
            return bad(format!(
                "control_points {} must be at least 2",
                self.control_points
            ));
        }
        if self.template_points < self.control_points {
            return bad(format!(
                "template_points {} is below control_points {}",
                self.template_points, self.control_points
            ));
        }
        if !(self.min_radius > 0.0) {
            return bad(format!("min_radius {} must be positive", self.min_radius));
        }
        if !(self.refine_spacing > 0.0 && self.refine_spacing.is_finite()) {
            return bad(format!(
                "refine_spacing {} must be positive",
                self.refine_spacing
            ));
        }
        if self.scpr_width.is_multiple_of(2) {
            return bad(format!("scpr_width {} must be odd", self.scpr_width));
        }
        if !(self.scpr_spacing > 0.0 && self.frame_spacing > 0.0) {
            return bad("scpr spacings must be positive".into());
        }
        match (
            self.phantom.is_some(),
            self.coarse.is_some() || self.volume.is_some(),
        ) {
            (true, true) => bad("give either a phantom or input volumes, not both".into()),
            (false, false) => bad("no input: set `phantom` or `coarse`/`volume`".into()),
            _ => Ok(()),
        }
    }

    /// The phantom spec: preset for the kind, then overrides, then the seed.
    pub fn phantom_spec(&self) -> Result<Option<CurveSpec>> {
        let Some(kind) = self.phantom else {
            return Ok(None);
        };
        let mut spec = CurveSpec::preset(kind);
        for (k, v) in &self.phantom_overrides {
            spec.set(k, v)?;
        }
        spec.seed = self.deform.seed;
        Ok(Some(spec))
    }

    /// Resolved settings in a fixed order, readable back by `apply_text`.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .deform
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let own = [
            ("control_points", self.control_points.to_string()),
            ("template_points", self.template_points.to_string()),
            ("interpolation", self.interpolation.as_str().to_string()),
            ("min_radius", self.min_radius.to_string()),
            ("refine_spacing", self.refine_spacing.to_string()),
            ("threshold", self.threshold.to_string()),
            ("f1_tolerance", self.f1_tolerance.to_string()),
            (
                "phantom",
                self.phantom
                    .map(|k| k.as_str())
                    .unwrap_or("none")
                    .to_string(),
            ),
            ("volume", opt_path(&self.volume)),
            ("coarse", opt_path(&self.coarse)),
            ("gt_mask", opt_path(&self.gt_mask)),
            ("gt_centerline", opt_path(&self.gt_centerline)),
            ("out", self.out.display().to_string()),
            ("scpr", self.scpr.to_string()),
            ("scpr_width", self.scpr_width.to_string()),
            ("scpr_spacing", self.scpr_spacing.to_string()),
            ("scpr_angle", self.scpr_angle.to_string()),
            ("frame_spacing", self.frame_spacing.to_string()),
        ];
        out.extend(own.into_iter().map(|(k, v)| (k.to_string(), v)));
        out.extend(
            self.phantom_overrides
                .iter()
                .map(|(k, v)| (format!("phantom.{k}"), v.clone())),
        );
        out
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
