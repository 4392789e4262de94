//! Experiment runners: each builds its objects through the library, writes
//! CSV tables, evaluates its pass/fail checks, and reports metrics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use toric_envelopes::{
    bergman_log_convergence, bergman_measure_convergence, cdf_distance, equilibrium_check,
    exhaustion, filtration_threshold, h0_growth, legendre_ray, legendre_transform, ma_measure,
    max_envelope, max_envelope_from_dual, monomial_norms, parseval_defect, phong_sturm_metric,
    product_envelope_check, pushforward_h, pushforward_polytope, ray_as_envelope_check,
    rat_to_f64, right_derivative, section_exhaustion, BoxGrid, EnvelopeResult, GridFn,
    Histogram1D, Polytope, TestCurve, VertexSoftmax,
};

use crate::config::{Experiment, ExperimentConfig};

/// Everything a run emits besides its CSV files.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub passed: bool,
    /// One entry per violated check, empty on success.
    pub failures: Vec<String>,
    /// Scalar observables, sorted by name.
    pub metrics: BTreeMap<String, f64>,
    /// CSV files written next to the report.
    pub files: Vec<String>,
    /// The fully resolved configuration (defaults materialized).
    pub config: ExperimentConfig,
    /// Sub-run summaries; only the suite fills this.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<SuiteRow>,
}

#[derive(Debug, Serialize)]
pub struct SuiteRow {
    pub label: String,
    pub experiment: String,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Objects shared by most runners.
struct Ctx {
    polytope: Polytope,
    metric: VertexSoftmax,
    phi: GridFn,
    /// Largest primal spacing.
    h: f64,
    /// Comparison window, one pair per axis.
    window: Vec<(f64, f64)>,
}

fn build_ctx(cfg: &ExperimentConfig) -> Result<Ctx> {
    let polytope = cfg.polytope.build()?;
    let n = polytope.dim();
    if cfg.axis >= n {
        bail!("axis {} is out of range for dimension {n}", cfg.axis);
    }
    let metric = VertexSoftmax::new(polytope.clone(), cfg.metric.weights.clone())?;
    let points = cfg.grid.points_for(n, cfg.experiment);
    let grid = BoxGrid::symmetric(n, cfg.grid.radius, points)?;
    let phi = metric.sample(grid)?;
    let h = phi.grid.max_spacing();
    let window = cfg.window_for(n)?;
    Ok(Ctx {
        polytope,
        metric,
        phi,
        h,
        window,
    })
}

/// Nodes inside the comparison window.
fn window_mask(grid: &BoxGrid, window: &[(f64, f64)]) -> Vec<bool> {
    let n = grid.dim();
    let mut mask = vec![true; grid.node_count()];
    let mut x = Vec::new();
    for (i, m) in mask.iter_mut().enumerate() {
        grid.node(i, &mut x);
        for j in 0..n {
            if x[j] < window[j].0 || x[j] > window[j].1 {
                *m = false;
                break;
            }
        }
    }
    mask
}

fn sup_on(mask: &[bool], values: impl Fn(usize) -> f64) -> f64 {
    let mut sup = f64::NEG_INFINITY;
    for (i, &m) in mask.iter().enumerate() {
        if m {
            sup = sup.max(values(i));
        }
    }
    sup
}

/// Envelope at `lambda`, honoring an explicit dual resolution.
fn envelope_at(cfg: &ExperimentConfig, ctx: &Ctx, lambda: f64) -> Result<EnvelopeResult> {
    if cfg.dual_points == 0 {
        return Ok(max_envelope(&ctx.phi, &ctx.polytope, cfg.axis, lambda)?);
    }
    let (lo, hi) = ctx.polytope.axis_range(cfg.axis);
    if lambda <= rat_to_f64(&lo) || lambda >= rat_to_f64(&hi) {
        // endpoint conventions need no transform
        return Ok(max_envelope(&ctx.phi, &ctx.polytope, cfg.axis, lambda)?);
    }
    ctx.phi.check_convex()?;
    let dual = legendre_transform(&ctx.phi, &ctx.polytope, cfg.dual_points)?;
    Ok(max_envelope_from_dual(&ctx.phi, &dual, cfg.axis, lambda)?)
}

// ---------------------------------------------------------------------------
// output helpers

fn write_grid_csv(dir: &Path, name: &str, f: &GridFn, files: &mut Vec<String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    f.write_csv(&mut w)?;
    w.flush()?;
    files.push(name.to_string());
    Ok(())
}

fn write_rows_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: &[String],
    files: &mut Vec<String>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    files.push(name.to_string());
    Ok(())
}

fn write_hist_csv(
    dir: &Path,
    name: &str,
    hist: &Histogram1D,
    files: &mut Vec<String>,
) -> Result<()> {
    let rows: Vec<String> = (0..hist.masses.len())
        .map(|b| format!("{},{},{}", hist.edges[b], hist.edges[b + 1], hist.masses[b]))
        .collect();
    write_rows_csv(dir, name, "bin_lo,bin_hi,mass", &rows, files)
}

/// Check helper: records a failure line when `value > bound`.
fn check_le(failures: &mut Vec<String>, what: &str, value: f64, bound: f64) {
    if !(value <= bound) {
        failures.push(format!("{what}: {value} exceeds {bound}"));
    }
}

// ---------------------------------------------------------------------------
// runners

struct RunParts {
    failures: Vec<String>,
    metrics: BTreeMap<String, f64>,
    files: Vec<String>,
}

impl RunParts {
    fn new() -> Self {
        RunParts {
            failures: Vec::new(),
            metrics: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }
}

fn run_envelope(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let result = envelope_at(cfg, &ctx, cfg.lambda)?;
    let (lo, _) = ctx.polytope.axis_range(cfg.axis);
    let vacuous = cfg.lambda <= rat_to_f64(&lo);

    write_grid_csv(out, "phi.csv", &ctx.phi, &mut parts.files)?;
    write_grid_csv(out, "envelope.csv", &result.envelope, &mut parts.files)?;
    let contact_rows: Vec<String> = result
        .contact_mask
        .iter()
        .enumerate()
        .map(|(i, &c)| format!("{i},{}", c as u8))
        .collect();
    write_rows_csv(
        out,
        "contact.csv",
        "node,contact",
        &contact_rows,
        &mut parts.files,
    )?;

    let sup_over = sup_on(&vec![true; ctx.phi.values.len()], |i| {
        result.envelope.values[i] - ctx.phi.values[i]
    });
    let sup_defect = sup_on(&vec![true; ctx.phi.values.len()], |i| {
        ctx.phi.values[i] - result.envelope.values[i]
    });
    let contact_fraction =
        result.contact_count() as f64 / ctx.phi.values.len() as f64;
    parts.metric("sup_envelope_minus_phi", sup_over);
    parts.metric("sup_phi_minus_envelope", sup_defect);
    parts.metric("contact_fraction", contact_fraction);
    parts.metric("contact_tolerance", result.contact_tolerance);

    let gap_bound = cfg.tolerances.envelope_gap_factor * result.contact_tolerance;
    check_le(
        &mut parts.failures,
        "envelope exceeds the potential",
        sup_over,
        gap_bound,
    );
    if let Err(e) = result.envelope.check_convex() {
        parts.failures.push(format!("envelope is not convex: {e}"));
    }
    if vacuous && result.envelope.values != ctx.phi.values {
        parts
            .failures
            .push("vacuous constraint did not return the potential itself".into());
    }
    Ok(parts)
}

fn run_equilibrium(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let result = envelope_at(cfg, &ctx, cfg.lambda)?;
    let report = equilibrium_check(&ctx.phi, &result)?;
    write_grid_csv(out, "envelope.csv", &result.envelope, &mut parts.files)?;

    let vol = ctx.polytope.volume();
    let bound = cfg.tolerances.equilibrium_mass * vol;
    parts.metric("mass_on_contact", report.mass_on_contact);
    parts.metric("mass_off_contact", report.mass_off_contact);
    parts.metric("matched_mass_error", report.matched_mass_error);
    parts.metric("envelope_total", report.envelope_total);
    parts.metric("phi_total", report.phi_total);
    parts.metric("polytope_volume", vol);
    check_le(
        &mut parts.failures,
        "off-contact envelope mass",
        report.mass_off_contact,
        bound,
    );
    check_le(
        &mut parts.failures,
        "matched mass error on the contact set",
        report.matched_mass_error,
        bound,
    );
    Ok(parts)
}

fn run_exhaustion(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let h_fn = exhaustion(&ctx.phi, &ctx.polytope, cfg.axis, cfg.dlam)?;
    write_grid_csv(out, "exhaustion.csv", &h_fn.values, &mut parts.files)?;

    if let Err(e) = h_fn.check_monotone_along_axis() {
        parts.failures.push(format!("monotonicity: {e}"));
    }
    let mask = window_mask(&ctx.phi.grid, &ctx.window);
    let mut x = Vec::new();
    let mut sup_gap = f64::NEG_INFINITY;
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        ctx.phi.grid.node(i, &mut x);
        let g = ctx.metric.gradient(&x);
        sup_gap = sup_gap.max((h_fn.values.values[i] - g[cfg.axis]).abs());
    }
    let bound = cfg.dlam + cfg.tolerances.gradient_slack_h * ctx.h;
    parts.metric("sup_gradient_gap", sup_gap);
    parts.metric("gradient_gap_bound", bound);
    check_le(
        &mut parts.failures,
        "exhaustion-gradient gap on the window",
        sup_gap,
        bound,
    );
    Ok(parts)
}

fn run_bergman_converge(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let conv = bergman_log_convergence(
        &ctx.metric,
        &ctx.phi,
        &ctx.polytope,
        cfg.lambda,
        cfg.axis,
        &cfg.k_schedule,
        &ctx.window,
    )?;
    let rows: Vec<String> = conv
        .rows
        .iter()
        .map(|r| format!("{},{}", r.k, r.deviation))
        .collect();
    write_rows_csv(out, "convergence.csv", "k,deviation", &rows, &mut parts.files)?;

    let n = ctx.polytope.dim() as f64;
    let last = conv.rows.last().context("empty convergence table")?;
    let bound = (n * (last.k as f64).ln() + cfg.tolerances.bergman_log_c) / last.k as f64;
    parts.metric("fit_c0", conv.c0);
    parts.metric("fit_c1", conv.c1);
    parts.metric("last_deviation", last.deviation);
    parts.metric("last_deviation_bound", bound);
    if !conv.decreasing {
        parts
            .failures
            .push("deviation does not decrease along the level schedule".into());
    }
    check_le(
        &mut parts.failures,
        "final log-asymptotics deviation",
        last.deviation,
        bound,
    );
    Ok(parts)
}

fn run_bergman_measure(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let mut rows = Vec::new();
    let mut l1s = Vec::new();
    let mut last_basis = None;
    for &k in &cfg.k_schedule {
        let basis = monomial_norms(&ctx.metric, &ctx.phi.grid, &ctx.polytope, k, cfg.axis)?;
        let rep = bergman_measure_convergence(&basis, &ctx.phi, &ctx.polytope, cfg.lambda)?;
        rows.push(format!(
            "{},{},{},{},{}",
            rep.k, rep.l1_distance, rep.bergman_total, rep.contact_mass, rep.section_count
        ));
        l1s.push(rep.l1_distance);
        last_basis = Some(basis);
    }
    write_rows_csv(
        out,
        "measure.csv",
        "k,l1_distance,bergman_total,contact_mass,section_count",
        &rows,
        &mut parts.files,
    )?;

    let basis = last_basis.context("empty level schedule")?;
    let parseval_full = parseval_defect(&basis, &ctx.metric, &ctx.phi.grid, None)?;
    let (threshold, _) = filtration_threshold(basis.k, cfg.lambda)?;
    let parseval_filtered =
        parseval_defect(&basis, &ctx.metric, &ctx.phi.grid, Some(threshold))?;

    let last_l1 = *l1s.last().unwrap();
    parts.metric("last_l1_distance", last_l1);
    parts.metric("parseval_full", parseval_full);
    parts.metric("parseval_filtered", parseval_filtered);
    if l1s.windows(2).any(|w| w[1] >= w[0]) {
        parts
            .failures
            .push("L1 distance does not decrease along the level schedule".into());
    }
    check_le(
        &mut parts.failures,
        "final L1 distance",
        last_l1,
        cfg.tolerances.measure_l1,
    );
    check_le(
        &mut parts.failures,
        "norm self-test defect (full basis)",
        parseval_full,
        cfg.tolerances.parseval,
    );
    check_le(
        &mut parts.failures,
        "norm self-test defect (filtered basis)",
        parseval_filtered,
        cfg.tolerances.parseval,
    );
    Ok(parts)
}

fn run_h0_growth(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let polytope = cfg.polytope.build()?;
    if cfg.axis >= polytope.dim() {
        bail!("axis {} is out of range", cfg.axis);
    }
    let mut parts = RunParts::new();
    let table = h0_growth(&polytope, cfg.axis, cfg.lambda, &cfg.k_schedule)?;
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{},{},{},{}", r.k, r.count, r.normalized, r.error))
        .collect();
    write_rows_csv(
        out,
        "h0.csv",
        "k,count,normalized,error",
        &rows,
        &mut parts.files,
    )?;

    let last = table.rows.last().context("empty growth table")?;
    let bound = cfg.tolerances.h0_error_factor / last.k as f64;
    parts.metric("target_slice_volume", table.target);
    parts.metric("last_normalized", last.normalized);
    parts.metric("last_error", last.error);
    parts.metric("last_error_bound", bound);
    check_le(
        &mut parts.failures,
        "normalized count error at the top level",
        last.error,
        bound,
    );
    Ok(parts)
}

fn run_section_h(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let k = *cfg.k_schedule.last().unwrap();
    let basis = monomial_norms(&ctx.metric, &ctx.phi.grid, &ctx.polytope, k, cfg.axis)?;
    let transition = section_exhaustion(&basis, &ctx.phi)?;
    let h_fn = exhaustion(&ctx.phi, &ctx.polytope, cfg.axis, cfg.dlam)?;
    write_grid_csv(out, "section_H.csv", &transition, &mut parts.files)?;
    write_grid_csv(out, "exhaustion.csv", &h_fn.values, &mut parts.files)?;

    let mask = window_mask(&ctx.phi.grid, &ctx.window);
    let sup_gap = sup_on(&mask, |i| {
        (transition.values[i] - h_fn.values.values[i]).abs()
    });
    parts.metric("sup_gap", sup_gap);
    check_le(
        &mut parts.failures,
        "section transition versus exhaustion",
        sup_gap,
        cfg.tolerances.section_h_gap,
    );
    Ok(parts)
}

fn divisorial_curve(cfg: &ExperimentConfig, polytope: &Polytope) -> Result<TestCurve> {
    let (_, hi) = polytope.axis_range(cfg.axis);
    Ok(TestCurve::divisorial(
        polytope,
        cfg.axis,
        rat_to_f64(&hi),
        cfg.dlam,
    )?)
}

fn run_phong_sturm(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let k = *cfg.k_schedule.last().unwrap();
    let basis = monomial_norms(&ctx.metric, &ctx.phi.grid, &ctx.polytope, k, cfg.axis)?;
    let curve = divisorial_curve(cfg, &ctx.polytope)?;
    let ray = legendre_ray(
        &ctx.phi,
        &ctx.polytope,
        &curve,
        cfg.t_schedule.t_max,
        cfg.t_schedule.points,
        cfg.dual_points,
    )?;
    let mask = window_mask(&ctx.phi.grid, &ctx.window);
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (i, &t) in ray.times.iter().enumerate() {
        let metric_t = phong_sturm_metric(&basis, &ctx.phi.grid, t)?;
        let slice = ray.slice(i);
        let gap = sup_on(&mask, |j| (metric_t.values[j] - slice.values[j]).abs());
        worst = worst.max(gap);
        rows.push(format!("{t},{gap}"));
    }
    write_rows_csv(out, "phong_sturm.csv", "t,sup_gap", &rows, &mut parts.files)?;

    parts.metric("worst_sup_gap", worst);
    check_le(
        &mut parts.failures,
        "section metric versus ray",
        worst,
        cfg.tolerances.phong_sturm_gap,
    );
    Ok(parts)
}

fn run_geodesic(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let curve = divisorial_curve(cfg, &ctx.polytope)?;
    let ray = legendre_ray(
        &ctx.phi,
        &ctx.polytope,
        &curve,
        cfg.t_schedule.t_max,
        cfg.t_schedule.points,
        cfg.dual_points,
    )?;
    write_grid_csv(out, "ray_start.csv", &ray.slice(0), &mut parts.files)?;
    write_grid_csv(
        out,
        "ray_end.csv",
        &ray.slice(ray.times.len() - 1),
        &mut parts.files,
    )?;

    let residual = ray.hmae_residual()?;
    let joint_h = ray.joint.grid.max_spacing();
    let residual_bound = cfg.tolerances.hmae_h_factor * joint_h;
    parts.metric("degeneracy_residual", residual);
    parts.metric("degeneracy_residual_bound", residual_bound);
    check_le(
        &mut parts.failures,
        "joint degeneracy residual",
        residual,
        residual_bound,
    );

    match right_derivative(&ray) {
        Err(e) => parts
            .failures
            .push(format!("difference quotients are not monotone: {e}")),
        Ok(rd) => {
            write_grid_csv(out, "right_derivative.csv", &rd, &mut parts.files)?;
            let h_fn = exhaustion(&ctx.phi, &ctx.polytope, cfg.axis, cfg.dlam)?;
            let mask = window_mask(&ctx.phi.grid, &ctx.window);
            let sup_gap = sup_on(&mask, |i| (rd.values[i] - h_fn.values.values[i]).abs());
            let dt = cfg.t_schedule.t_max / (cfg.t_schedule.points - 1) as f64;
            let bound = cfg.dlam + dt + cfg.tolerances.gradient_slack_h * ctx.h;
            parts.metric("right_derivative_gap", sup_gap);
            parts.metric("right_derivative_bound", bound);
            check_le(
                &mut parts.failures,
                "right derivative versus exhaustion",
                sup_gap,
                bound,
            );
        }
    }
    Ok(parts)
}

fn run_ray_envelope(cfg: &ExperimentConfig, _out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let curve = divisorial_curve(cfg, &ctx.polytope)?;
    let sup = ray_as_envelope_check(
        &ctx.phi,
        &ctx.polytope,
        &curve,
        cfg.t_schedule.t_max,
        cfg.t_schedule.points,
        cfg.dual_points,
    )?;
    let bound =
        cfg.tolerances.ray_envelope_factor * (ctx.h + cfg.dlam * cfg.t_schedule.t_max);
    parts.metric("sup_difference", sup);
    parts.metric("sup_difference_bound", bound);
    check_le(
        &mut parts.failures,
        "ray versus joint-variable envelope",
        sup,
        bound,
    );
    Ok(parts)
}

fn run_product(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    if ctx.polytope.dim() != 1 {
        bail!("the product comparison needs a one-dimensional factor polytope");
    }
    let mut parts = RunParts::new();
    let (lo, hi) = ctx.polytope.axis_range(0);
    let (lo, hi) = (rat_to_f64(&lo), rat_to_f64(&hi));
    let count = ((hi - lo) / cfg.dlam).round() as usize;
    let lambdas: Vec<f64> = (0..=count)
        .map(|i| lo + i as f64 * cfg.dlam)
        .filter(|&l| l <= hi + 1e-12)
        .collect();
    let report = product_envelope_check(
        &ctx.phi,
        &ctx.polytope,
        &ctx.phi,
        &ctx.polytope,
        &lambdas,
        cfg.dual_points,
    )?;
    write_grid_csv(out, "product_joint.csv", &report.joint, &mut parts.files)?;
    write_grid_csv(out, "product_split.csv", &report.split, &mut parts.files)?;

    let sup_bound = cfg.tolerances.product_factor * (ctx.h + cfg.dlam);
    let excess_bound = cfg.tolerances.containment_h_factor * ctx.h;
    parts.metric("sup_difference", report.sup_difference);
    parts.metric("sup_difference_bound", sup_bound);
    parts.metric("split_excess", report.split_excess);
    parts.metric("split_excess_bound", excess_bound);
    check_le(
        &mut parts.failures,
        "joint versus split envelope",
        report.sup_difference,
        sup_bound,
    );
    check_le(
        &mut parts.failures,
        "split exceeds the joint envelope",
        report.split_excess,
        excess_bound,
    );
    Ok(parts)
}

fn run_pushforward(cfg: &ExperimentConfig, out: &Path) -> Result<RunParts> {
    let ctx = build_ctx(cfg)?;
    let mut parts = RunParts::new();
    let h_fn = exhaustion(&ctx.phi, &ctx.polytope, cfg.axis, cfg.dlam)?;
    let measure = ma_measure(&ctx.phi)?;
    let bins = cfg.bins_resolved();
    let hist = pushforward_h(&h_fn, &measure, bins)?;
    let reference = pushforward_polytope(&ctx.polytope, cfg.axis, bins)?;
    write_hist_csv(out, "histogram.csv", &hist, &mut parts.files)?;
    write_hist_csv(out, "reference.csv", &reference, &mut parts.files)?;

    let distance = cdf_distance(&hist, &reference)?;
    let bound = cfg.tolerances.cdf_distance_for(ctx.polytope.dim());
    let mass_gap = (hist.total - measure.total).abs() / (1.0 + measure.total.abs());
    parts.metric("cdf_distance", distance);
    parts.metric("cdf_distance_bound", bound);
    parts.metric("histogram_total", hist.total);
    parts.metric("measure_total", measure.total);
    parts.metric("mass_conservation_gap", mass_gap);
    check_le(
        &mut parts.failures,
        "CDF distance to the polytope marginal",
        distance,
        bound,
    );
    check_le(
        &mut parts.failures,
        "pushforward mass conservation",
        mass_gap,
        cfg.tolerances.mass_conservation,
    );
    Ok(parts)
}

// ---------------------------------------------------------------------------
// dispatch

/// Run one experiment into `out` and write `report.json` plus `meta.json`.
pub fn run_single(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let parts = match cfg.experiment {
        Experiment::Envelope => run_envelope(cfg, out)?,
        Experiment::Equilibrium => run_equilibrium(cfg, out)?,
        Experiment::Exhaustion => run_exhaustion(cfg, out)?,
        Experiment::BergmanConverge => run_bergman_converge(cfg, out)?,
        Experiment::BergmanMeasure => run_bergman_measure(cfg, out)?,
        Experiment::H0Growth => run_h0_growth(cfg, out)?,
        Experiment::SectionH => run_section_h(cfg, out)?,
        Experiment::PhongSturm => run_phong_sturm(cfg, out)?,
        Experiment::Geodesic => run_geodesic(cfg, out)?,
        Experiment::RayEnvelope => run_ray_envelope(cfg, out)?,
        Experiment::Product => run_product(cfg, out)?,
        Experiment::Pushforward => run_pushforward(cfg, out)?,
        Experiment::Suite => return run_suite(cfg, out),
    };
    let report = RunReport {
        experiment: cfg.experiment.name().to_string(),
        passed: parts.failures.is_empty(),
        failures: parts.failures,
        metrics: parts.metrics,
        files: parts.files,
        config: resolved_config(cfg),
        runs: Vec::new(),
    };
    write_report(out, &report)?;
    Ok(report)
}

/// The configuration as actually used: auto-sized fields filled in.
fn resolved_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut resolved = cfg.clone();
    if let Ok(polytope) = cfg.polytope.build() {
        let n = polytope.dim();
        resolved.grid.points = cfg.grid.points_for(n, cfg.experiment);
        if let Ok(w) = cfg.window_for(n) {
            resolved.window = w.iter().map(|&(a, b)| [a, b]).collect();
        }
    }
    resolved.bins = cfg.bins_resolved();
    resolved
}

fn write_report(out: &Path, report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(out.join("report.json"), text + "\n")?;
    // run circumstances live apart from the payloads so payload bytes stay
    // reproducible across thread counts and wall clocks
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({
        "threads": rayon::current_num_threads(),
        "unix_time": unix_time,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "output_dir": out.display().to_string(),
    });
    std::fs::write(
        out.join("meta.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// suite

/// The default battery: every experiment with its stock configuration, plus
/// the two-dimensional equilibrium and pushforward variants.
fn suite_entries() -> Vec<(&'static str, &'static str, Vec<(&'static str, &'static str)>)> {
    vec![
        ("envelope", "envelope", vec![]),
        ("equilibrium", "equilibrium", vec![]),
        (
            "equilibrium-square",
            "equilibrium",
            vec![
                ("polytope", "\"square\""),
                ("grid.points", "65"),
                ("dual_points", "513"),
            ],
        ),
        ("exhaustion", "exhaustion", vec![]),
        ("bergman-converge", "bergman-converge", vec![]),
        ("bergman-measure", "bergman-measure", vec![]),
        ("h0-growth", "h0-growth", vec![("k_schedule", "[10,100]")]),
        ("section-H", "section-H", vec![("window", "[[-6.0,6.0]]")]),
        ("phong-sturm", "phong-sturm", vec![]),
        ("geodesic", "geodesic", vec![]),
        ("ray-envelope", "ray-envelope", vec![]),
        ("product", "product", vec![]),
        ("pushforward", "pushforward", vec![]),
        (
            "pushforward-simplex",
            "pushforward",
            vec![("polytope", "\"simplex\"")],
        ),
    ]
}

fn run_suite(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (label, experiment, overrides) in suite_entries() {
        let mut value = serde_json::to_value(ExperimentConfig::for_experiment(
            Experiment::from_name(experiment).expect("suite entries name real experiments"),
        ))?;
        for (key, val) in &overrides {
            crate::config::apply_override(&mut value, &format!("{key}={val}"))?;
        }
        let mut sub_cfg: ExperimentConfig = serde_json::from_value(value)?;
        sub_cfg.tolerances = cfg.tolerances.clone();
        sub_cfg.output_dir = out.join(label);
        let sub_out = sub_cfg.output_dir.clone();
        let report = run_single(&sub_cfg, &sub_out)?;
        println!(
            "suite {label}: {}",
            if report.passed { "pass" } else { "FAIL" }
        );
        files.push(format!("{label}/report.json"));
        rows.push(SuiteRow {
            label: label.to_string(),
            experiment: experiment.to_string(),
            passed: report.passed,
            failures: report.failures,
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    let mut metrics = BTreeMap::new();
    metrics.insert("runs".to_string(), rows.len() as f64);
    metrics.insert(
        "failed_runs".to_string(),
        rows.iter().filter(|r| !r.passed).count() as f64,
    );
    let report = RunReport {
        experiment: "suite".to_string(),
        passed,
        failures: rows
            .iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{}: {} check(s) failed", r.label, r.failures.len()))
            .collect(),
        metrics,
        files,
        config: resolved_config(cfg),
        runs: rows,
    };
    write_report(out, &report)?;
    Ok(report)
}

/// Output directory resolution: the command-line `--out` wins over the
/// config's `output_dir`.
pub fn output_dir(cfg: &ExperimentConfig, cli_out: Option<&Path>) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.clone())
}
