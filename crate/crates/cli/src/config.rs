//! Experiment configuration: JSON schema, dotted-path overrides, and
//! resolution of auto-sized defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use toric_envelopes::Polytope;

/// Every runnable experiment, by its external name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "envelope")]
    Envelope,
    #[serde(rename = "equilibrium")]
    Equilibrium,
    #[serde(rename = "exhaustion")]
    Exhaustion,
    #[serde(rename = "bergman-converge")]
    BergmanConverge,
    #[serde(rename = "bergman-measure")]
    BergmanMeasure,
    #[serde(rename = "h0-growth")]
    H0Growth,
    #[serde(rename = "section-H")]
    SectionH,
    #[serde(rename = "phong-sturm")]
    PhongSturm,
    #[serde(rename = "geodesic")]
    Geodesic,
    #[serde(rename = "ray-envelope")]
    RayEnvelope,
    #[serde(rename = "product")]
    Product,
    #[serde(rename = "pushforward")]
    Pushforward,
    #[serde(rename = "suite")]
    Suite,
}

impl Experiment {
    pub const ALL: [Experiment; 13] = [
        Experiment::Envelope,
        Experiment::Equilibrium,
        Experiment::Exhaustion,
        Experiment::BergmanConverge,
        Experiment::BergmanMeasure,
        Experiment::H0Growth,
        Experiment::SectionH,
        Experiment::PhongSturm,
        Experiment::Geodesic,
        Experiment::RayEnvelope,
        Experiment::Product,
        Experiment::Pushforward,
        Experiment::Suite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Envelope => "envelope",
            Experiment::Equilibrium => "equilibrium",
            Experiment::Exhaustion => "exhaustion",
            Experiment::BergmanConverge => "bergman-converge",
            Experiment::BergmanMeasure => "bergman-measure",
            Experiment::H0Growth => "h0-growth",
            Experiment::SectionH => "section-H",
            Experiment::PhongSturm => "phong-sturm",
            Experiment::Geodesic => "geodesic",
            Experiment::RayEnvelope => "ray-envelope",
            Experiment::Product => "product",
            Experiment::Pushforward => "pushforward",
            Experiment::Suite => "suite",
        }
    }

    pub fn from_name(name: &str) -> Option<Experiment> {
        Experiment::ALL.iter().copied().find(|e| e.name() == name)
    }
}

/// Moment polytope: a named built-in or an explicit vertex list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolytopeSpec {
    Named(String),
    Vertices {
        vertices: Vec<Vec<f64>>,
    },
}

impl Default for PolytopeSpec {
    fn default() -> Self {
        PolytopeSpec::Named("interval".into())
    }
}

impl PolytopeSpec {
    pub fn build(&self) -> Result<Polytope> {
        match self {
            PolytopeSpec::Named(name) => match name.as_str() {
                "interval" => Ok(Polytope::unit_box(1)),
                "square" => Ok(Polytope::unit_box(2)),
                "simplex" => Ok(Polytope::standard_simplex(2)),
                other => bail!(
                    "unknown polytope {other:?}; expected \"interval\", \"square\", \
                     \"simplex\", or an explicit {{\"vertices\": [...]}} list"
                ),
            },
            PolytopeSpec::Vertices { vertices } => {
                let n = vertices
                    .first()
                    .map(|v| v.len())
                    .context("vertex list is empty")?;
                Ok(Polytope::from_f64_vertices(n, vertices)?)
            }
        }
    }
}

/// Metric data on top of the polytope: optional per-vertex weights of the
/// softmax potential.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

/// Symmetric primal grid; `points = 0` picks a dimension-based default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub points: usize,
}

fn default_radius() -> f64 {
    20.0
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radius: default_radius(),
            points: 0,
        }
    }
}

impl GridSpec {
    pub fn points_for(&self, dim: usize, experiment: Experiment) -> usize {
        if self.points > 0 {
            return self.points;
        }
        match (dim, experiment) {
            // the product comparison works on the two-dimensional joint grid,
            // so its one-dimensional factors stay coarser
            (1, Experiment::Product) => 129,
            (1, _) => 513,
            _ => 129,
        }
    }
}

/// Time grid of the ray experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TSchedule {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_points")]
    pub points: usize,
}

fn default_t_max() -> f64 {
    2.5
}

fn default_t_points() -> usize {
    9
}

impl Default for TSchedule {
    fn default() -> Self {
        TSchedule {
            t_max: default_t_max(),
            points: default_t_points(),
        }
    }
}

/// Pass/fail thresholds.  Most are dimensionless factors multiplying the
/// relevant resolution scale; the rest are absolute bounds.  `cdf_distance`
/// at `0` resolves to `0.02` in one dimension and `0.03` in two.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Bound on `envelope - potential`, in units of the contact threshold.
    #[serde(default = "d_envelope_gap_factor")]
    pub envelope_gap_factor: f64,
    /// Off-contact and matched-mass bounds, as a fraction of the polytope
    /// volume.
    #[serde(default = "d_equilibrium_mass")]
    pub equilibrium_mass: f64,
    /// Grid-scale slack of the exhaustion-gradient comparison: the bound is
    /// `dlam + factor * h`.
    #[serde(default = "d_gradient_slack_h")]
    pub gradient_slack_h: f64,
    /// Constant `c` in the log-asymptotics bound `(n ln k + c) / k`.
    #[serde(default = "d_bergman_log_c")]
    pub bergman_log_c: f64,
    /// Final `L1` distance of the section measure comparison.
    #[serde(default = "d_measure_l1")]
    pub measure_l1: f64,
    /// Relative defect of the norm self-test.
    #[serde(default = "d_parseval")]
    pub parseval: f64,
    /// Lattice-count error factor: the bound at level `k` is `factor / k`.
    #[serde(default = "d_h0_error_factor")]
    pub h0_error_factor: f64,
    /// Sup bound on `section transition - exhaustion` over the window.
    #[serde(default = "d_section_h_gap")]
    pub section_h_gap: f64,
    /// Sup bound on `section metric - ray` over the window, per time node.
    #[serde(default = "d_phong_sturm_gap")]
    pub phong_sturm_gap: f64,
    /// Degeneracy-residual bound in units of the joint grid spacing.
    #[serde(default = "d_hmae_h_factor")]
    pub hmae_h_factor: f64,
    /// Ray-versus-joint-envelope bound in units of `h + dlam * t_max`.
    #[serde(default = "d_ray_envelope_factor")]
    pub ray_envelope_factor: f64,
    /// Product-splitting bound in units of `h + dlam`.
    #[serde(default = "d_product_factor")]
    pub product_factor: f64,
    /// One-sided containment slack of the product check, in units of `h`.
    #[serde(default = "d_containment_h_factor")]
    pub containment_h_factor: f64,
    /// Sup CDF distance of the pushforward comparison; `0` = auto by
    /// dimension.
    #[serde(default)]
    pub cdf_distance: f64,
    /// Relative mass-conservation bound of the pushforward.
    #[serde(default = "d_mass_conservation")]
    pub mass_conservation: f64,
}

fn d_envelope_gap_factor() -> f64 {
    1.0
}
fn d_equilibrium_mass() -> f64 {
    0.02
}
fn d_gradient_slack_h() -> f64 {
    3.0
}
fn d_bergman_log_c() -> f64 {
    3.0
}
fn d_measure_l1() -> f64 {
    0.1
}
fn d_parseval() -> f64 {
    1e-6
}
fn d_h0_error_factor() -> f64 {
    3.0
}
fn d_section_h_gap() -> f64 {
    0.05
}
fn d_phong_sturm_gap() -> f64 {
    0.15
}
fn d_hmae_h_factor() -> f64 {
    10.0
}
fn d_ray_envelope_factor() -> f64 {
    5.0
}
fn d_product_factor() -> f64 {
    5.0
}
fn d_containment_h_factor() -> f64 {
    2.0
}
fn d_mass_conservation() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default()))
            .expect("tolerance defaults deserialize")
    }
}

impl Tolerances {
    pub fn cdf_distance_for(&self, dim: usize) -> f64 {
        if self.cdf_distance > 0.0 {
            self.cdf_distance
        } else if dim == 1 {
            0.02
        } else {
            0.03
        }
    }
}

fn default_lambda() -> f64 {
    0.5
}

fn default_dlam() -> f64 {
    1.0 / 256.0
}

fn default_ks() -> Vec<u32> {
    vec![8, 16, 32, 64]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment run, fully described.  Unknown keys are rejected so a
/// typo'd config fails loudly instead of silently running defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub polytope: PolytopeSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub axis: usize,
    #[serde(default = "default_dlam")]
    pub dlam: f64,
    /// Per-axis dual resolution; `0` picks the library default.
    #[serde(default)]
    pub dual_points: usize,
    #[serde(default = "default_ks")]
    pub k_schedule: Vec<u32>,
    #[serde(default)]
    pub t_schedule: TSchedule,
    /// Histogram bins; `0` resolves to 64.
    #[serde(default)]
    pub bins: usize,
    /// Compact comparison window, one `[lo, hi]` pair per axis; empty
    /// resolves to `[-8, 8]` on every axis.
    #[serde(default)]
    pub window: Vec<[f64; 2]>,
    /// Where the run writes its outputs.  Serialized reports omit it (the
    /// actual location lands in `meta.json` with the other run
    /// circumstances), so payload bytes do not depend on where a run landed.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    /// Minimal config for an experiment, everything else at defaults.
    pub fn for_experiment(experiment: Experiment) -> ExperimentConfig {
        serde_json::from_value(serde_json::json!({ "experiment": experiment.name() }))
            .expect("minimal config deserializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            bail!("lambda must be finite");
        }
        if !(self.dlam > 0.0) || !self.dlam.is_finite() {
            bail!("dlam must be a positive number");
        }
        if !(self.grid.radius > 0.0) || !self.grid.radius.is_finite() {
            bail!("grid radius must be a positive number");
        }
        if self.k_schedule.is_empty() {
            bail!("k_schedule must not be empty");
        }
        if self.k_schedule.iter().any(|&k| k == 0) {
            bail!("k_schedule entries must be positive");
        }
        if !(self.t_schedule.t_max > 0.0) || self.t_schedule.points < 3 {
            bail!("t_schedule needs a positive horizon and at least three points");
        }
        for w in &self.window {
            if !(w[0] < w[1]) {
                bail!("window pairs must satisfy lo < hi");
            }
        }
        Ok(())
    }

    /// Window resolved to one pair per axis.
    pub fn window_for(&self, dim: usize) -> Result<Vec<(f64, f64)>> {
        if self.window.is_empty() {
            return Ok(vec![(-8.0, 8.0); dim]);
        }
        if self.window.len() != dim {
            bail!(
                "window has {} pairs but the polytope has dimension {dim}",
                self.window.len()
            );
        }
        Ok(self.window.iter().map(|w| (w[0], w[1])).collect())
    }

    pub fn bins_resolved(&self) -> usize {
        if self.bins == 0 {
            64
        } else {
            self.bins
        }
    }
}

/// Set `value[key path] = parsed val` for a dotted-path `key=val` override.
/// The value parses as JSON when possible and falls back to a string, so
/// `--override grid.points=257` and `--override polytope=simplex` both work.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .with_context(|| format!("override {spec:?} is not of the form key=val"))?;
    if key.is_empty() {
        bail!("override {spec:?} has an empty key");
    }
    let parsed: Value =
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .with_context(|| format!("override {spec:?} descends into a non-object"))?;
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur
        .as_object_mut()
        .with_context(|| format!("override {spec:?} descends into a non-object"))?;
    obj.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Read a config file, apply overrides, and deserialize with full
/// validation.  Every failure here is a configuration error.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text)
        .with_context(|| format!("config {} is not valid JSON", path.display()))?;
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(value)
        .with_context(|| format!("config {} does not match the schema", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}
