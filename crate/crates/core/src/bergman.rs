//! Finite-level section spaces for a lattice polytope: monomial bases,
//! quadrature norms against a fixed reference density, partial sums over the
//! vanishing-order filtration, their large-level asymptotics, and the
//! section-built counterparts of the envelope, exhaustion, and ray objects.
//!
//! Level `k` sections are the lattice points of the dilated polytope `k*dom`;
//! the section attached to `alpha` is the exponential `e^{<alpha, x>}` and its
//! squared norm is `int e^{<alpha,x> - k phi(x)} rho(x) dx` for the reference
//! density `rho`.  Monomials are orthogonal under any such weight, so the
//! diagonal norms determine the whole inner-product structure.

use crate::envelope::max_envelope;
use crate::error::{Error, Result};
use crate::grid::{AxisSpec, BoxGrid, GridFn};
use crate::ma::ma_measure;
use crate::metric::Potential;
use crate::numeric::LogSumExp;
use crate::polytope::{rat_from_f64, Polytope, Rat, SliceConstraint};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

/// Reference density `rho(x) = prod_i e^{x_i} / (1 + e^{x_i})^2`: the product
/// logistic density.  Each factor integrates to one over the line, every
/// exponential `e^{<alpha, x>}` with `alpha/k` in the gradient range has a
/// finite norm against it (boundary lattice points included), and on the
/// interval it turns monomial norms into Beta integrals, which the tests use
/// as closed-form oracles.
#[derive(Debug, Clone, Copy)]
pub struct WeightDensity {
    pub dim: usize,
}

impl WeightDensity {
    pub fn new(dim: usize) -> Self {
        WeightDensity { dim }
    }

    /// `ln rho(x)`; each factor is `x - 2 ln(1 + e^x)`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        x.iter()
            .map(|&t| t - 2.0 * crate::numeric::softplus(t))
            .sum()
    }
}

/// Monomial section basis at level `k` with quadrature norms.
#[derive(Debug, Clone)]
pub struct SectionBasis {
    pub k: u32,
    /// Lattice points of the dilated polytope, lexicographic order.
    pub alphas: Vec<Vec<i64>>,
    /// Squared norms against the reference density, one per lattice point.
    pub norms2: Vec<f64>,
    /// `ln norms2`, kept alongside to avoid round trips through `exp`.
    pub log_norms2: Vec<f64>,
    /// Axis whose coordinate is the vanishing order of a section.
    pub filtration_axis: usize,
}

impl SectionBasis {
    pub fn count(&self) -> usize {
        self.alphas.len()
    }

    /// Vanishing order of section `i`: its lattice coordinate along the
    /// filtration axis.
    pub fn nu(&self, i: usize) -> i64 {
        self.alphas[i][self.filtration_axis]
    }
}

/// Quadrature mesh: the base grid refined `refine`-fold per axis and padded
/// outward to at least `+-pad` so the truncation tail under the reference
/// density stays far below the quadrature target.
fn quadrature_grid(base: &BoxGrid, refine: usize, pad: f64) -> Result<BoxGrid> {
    let mut axes = Vec::with_capacity(base.dim());
    for j in 0..base.dim() {
        let spec = base.axis(j);
        let hq = base.spacing(j) / refine as f64;
        let (lo, hi) = (spec.lo, spec.hi);
        let more_lo = if lo > -pad {
            ((lo + pad) / hq).ceil() as usize
        } else {
            0
        };
        let more_hi = if hi < pad {
            ((pad - hi) / hq).ceil() as usize
        } else {
            0
        };
        let points = (spec.points - 1) * refine + 1 + more_lo + more_hi;
        axes.push(AxisSpec::new(
            lo - more_lo as f64 * hq,
            hi + more_hi as f64 * hq,
            points,
        )?);
    }
    BoxGrid::new(axes)
}

/// Per-node log-integrand baseline and the log volume element for a composite
/// trapezoid rule on `quad`: `base[i] = -k phi(x_i) + ln rho(x_i) + ln w_i`
/// where `w_i` is the product of the per-axis end weights.
fn quadrature_base(
    quad: &BoxGrid,
    pot: &dyn Potential,
    k: f64,
) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let n = quad.dim();
    let rho = WeightDensity::new(n);
    let mut log_cell = 0.0;
    for j in 0..n {
        log_cell += quad.spacing(j).ln();
    }
    let nodes: Vec<usize> = (0..quad.node_count()).collect();
    let pairs: Vec<(Vec<f64>, f64)> = nodes
        .par_iter()
        .map(|&i| {
            let mut idx = [0usize; 4];
            quad.unflat(i, &mut idx[..n]);
            let mut x = Vec::with_capacity(n);
            let mut logw = 0.0;
            for j in 0..n {
                x.push(quad.coords(j)[idx[j]]);
                if idx[j] == 0 || idx[j] + 1 == quad.axis(j).points {
                    logw += 0.5f64.ln();
                }
            }
            let base = -k * pot.eval(&x) + rho.log_density(&x) + logw;
            (x, base)
        })
        .collect();
    let mut xs = Vec::with_capacity(pairs.len());
    let mut base = Vec::with_capacity(pairs.len());
    for (x, b) in pairs {
        xs.push(x);
        base.push(b);
    }
    (xs, base, log_cell)
}

/// `ln int e^{<alpha,x> - k phi} rho dx` by the composite trapezoid rule over
/// the prepared nodes.
fn log_norm_integral(xs: &[Vec<f64>], base: &[f64], log_cell: f64, alpha: &[f64]) -> f64 {
    let mut acc = LogSumExp::new();
    for (x, b) in xs.iter().zip(base) {
        let mut dot = 0.0;
        for (a, c) in alpha.iter().zip(x) {
            dot += a * c;
        }
        acc.push(b + dot);
    }
    acc.value() + log_cell
}

/// Padding radius for quadrature boxes: far enough out that the integrand's
/// `e^{-|x|}` tails under the reference density are below `1e-12` relative
/// for every built-in metric at desk-scale levels.
const QUAD_PAD: f64 = 30.0;

/// Squared norms of every level-`k` monomial section by composite trapezoid
/// quadrature at `4x` the grid resolution on a padded box.  The potential is
/// evaluated in closed form at the quadrature nodes (an interpolated grid
/// surrogate would cap the attainable accuracy far above the `1e-8` relative
/// target that the Beta-integral oracles pin down).
pub fn monomial_norms(
    pot: &dyn Potential,
    grid: &BoxGrid,
    dom: &Polytope,
    k: u32,
    filtration_axis: usize,
) -> Result<SectionBasis> {
    let n = grid.dim();
    if pot.dim() != n || dom.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pot.dim().max(dom.dim()),
        });
    }
    if filtration_axis >= n {
        return Err(Error::invalid("filtration axis out of range"));
    }
    let alphas = dom.lattice_points(k)?;
    if alphas.is_empty() {
        return Err(Error::invalid("no lattice points at this level"));
    }
    if alphas.len() > 100_000 {
        return Err(Error::Unsupported(format!(
            "basis of {} sections exceeds the desk-scale cap",
            alphas.len()
        )));
    }
    let quad = quadrature_grid(grid, 4, QUAD_PAD)?;
    let (xs, base, log_cell) = quadrature_base(&quad, pot, k as f64);
    let log_norms2: Vec<f64> = alphas
        .par_iter()
        .map(|alpha| {
            let af: Vec<f64> = alpha.iter().map(|&a| a as f64).collect();
            log_norm_integral(&xs, &base, log_cell, &af)
        })
        .collect();
    let norms2: Vec<f64> = log_norms2.iter().map(|l| l.exp()).collect();
    if norms2.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid(
            "monomial norm integral is not positive finite",
        ));
    }
    Ok(SectionBasis {
        k,
        alphas,
        norms2,
        log_norms2,
        filtration_axis,
    })
}

/// Exact filtration threshold: sections with vanishing order `>= ceil(k
/// lambda)` survive at level `lambda`; also reports whether `k lambda` is an
/// integer (a potential jumping level, where runs are worth comparing against
/// neighbouring non-jumping levels).
pub fn filtration_threshold(k: u32, lambda: f64) -> Result<(i64, bool)> {
    let klam: Rat = rat_from_f64(lambda)? * Rat::from_integer(BigInt::from(k));
    let jumping = klam.is_integer();
    let t = klam
        .ceil()
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::invalid("filtration threshold does not fit in i64"))?;
    Ok((t, jumping))
}

/// Partial Bergman function at level `lambda`: the filtered section sum
/// `B(x) = sum_{nu_alpha >= ceil(k lambda)} e^{<alpha,x> - k phi(x)} /
/// norms2_alpha`, with its logarithm kept alongside.
#[derive(Debug, Clone)]
pub struct BergmanFn {
    pub values: GridFn,
    /// `ln` of the values; `-inf` where the filtered sum is empty.
    pub log_values: GridFn,
    pub k: u32,
    pub lambda: f64,
    pub threshold: i64,
    /// Number of sections surviving the filtration.
    pub count: usize,
    pub empty: bool,
    /// `k lambda` integral: a potential jumping level.
    pub jumping: bool,
}

pub fn partial_bergman(basis: &SectionBasis, phi: &GridFn, lambda: f64) -> Result<BergmanFn> {
    let n = phi.grid.dim();
    if basis.alphas[0].len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: basis.alphas[0].len(),
        });
    }
    let (threshold, jumping) = filtration_threshold(basis.k, lambda)?;
    let keep: Vec<usize> = (0..basis.count())
        .filter(|&i| basis.nu(i) >= threshold)
        .collect();
    if keep.is_empty() {
        return Ok(BergmanFn {
            values: GridFn::constant(phi.grid.clone(), 0.0),
            log_values: GridFn::constant(phi.grid.clone(), f64::NEG_INFINITY),
            k: basis.k,
            lambda,
            threshold,
            count: 0,
            empty: true,
            jumping,
        });
    }
    let terms: Vec<(Vec<f64>, f64)> = keep
        .iter()
        .map(|&i| {
            let af: Vec<f64> = basis.alphas[i].iter().map(|&a| a as f64).collect();
            (af, basis.log_norms2[i])
        })
        .collect();
    let kf = basis.k as f64;
    let log_values: Vec<f64> = (0..phi.grid.node_count())
        .into_par_iter()
        .map_init(Vec::new, |x, i| {
            phi.grid.node(i, x);
            let shift = -kf * phi.values[i];
            let mut acc = LogSumExp::new();
            for (af, logn2) in &terms {
                let mut dot = 0.0;
                for (a, c) in af.iter().zip(x.iter()) {
                    dot += a * c;
                }
                acc.push(dot + shift - logn2);
            }
            acc.value()
        })
        .collect();
    let values: Vec<f64> = log_values.iter().map(|l| l.exp()).collect();
    Ok(BergmanFn {
        values: GridFn {
            grid: phi.grid.clone(),
            values,
            tail: None,
        },
        log_values: GridFn {
            grid: phi.grid.clone(),
            values: log_values,
            tail: None,
        },
        k: basis.k,
        lambda,
        threshold,
        count: keep.len(),
        empty: false,
        jumping,
    })
}

/// Mask of grid nodes inside a compact window, one `(lo, hi)` pair per axis.
fn window_mask(grid: &BoxGrid, window: &[(f64, f64)]) -> Result<Vec<bool>> {
    if window.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: window.len(),
        });
    }
    let n = grid.dim();
    let mut mask = vec![true; grid.node_count()];
    let mut idx = [0usize; 4];
    for (i, m) in mask.iter_mut().enumerate() {
        grid.unflat(i, &mut idx[..n]);
        for j in 0..n {
            let c = grid.coords(j)[idx[j]];
            if c < window[j].0 - 1e-12 || c > window[j].1 + 1e-12 {
                *m = false;
                break;
            }
        }
    }
    Ok(mask)
}

#[derive(Debug, Clone, Serialize)]
pub struct LogConvRow {
    pub k: u32,
    /// `sup_K | ln(B_k)/k - (envelope - phi) |`
    pub deviation: f64,
}

/// Large-level log-asymptotics table: how fast `ln(B_k)/k` approaches the
/// envelope defect `envelope - phi` on a compact window.
#[derive(Debug, Clone, Serialize)]
pub struct LogConvergence {
    pub rows: Vec<LogConvRow>,
    /// Least-squares fit `deviation ~ c0/k + c1 ln(k)/k` over the schedule.
    pub c0: f64,
    pub c1: f64,
    pub decreasing: bool,
}

pub fn bergman_log_convergence(
    pot: &dyn Potential,
    phi: &GridFn,
    dom: &Polytope,
    lambda: f64,
    axis: usize,
    ks: &[u32],
    window: &[(f64, f64)],
) -> Result<LogConvergence> {
    if ks.is_empty() {
        return Err(Error::invalid("empty level schedule"));
    }
    let env = max_envelope(phi, dom, axis, lambda)?;
    let mask = window_mask(&phi.grid, window)?;
    if !mask.iter().any(|&b| b) {
        return Err(Error::invalid("compact window contains no grid nodes"));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let basis = monomial_norms(pot, &phi.grid, dom, k, axis)?;
        let bk = partial_bergman(&basis, phi, lambda)?;
        if bk.empty {
            return Err(Error::invalid("empty filtered basis in the schedule"));
        }
        let mut dev = 0.0f64;
        for i in 0..phi.grid.node_count() {
            if !mask[i] {
                continue;
            }
            let gap = env.envelope.values[i] - phi.values[i];
            dev = dev.max((bk.log_values.values[i] / k as f64 - gap).abs());
        }
        rows.push(LogConvRow { k, deviation: dev });
    }
    // normal equations for the two-parameter decay model
    let (mut suu, mut suv, mut svv, mut sud, mut svd) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for row in &rows {
        let kf = row.k as f64;
        let (u, v) = (1.0 / kf, kf.ln() / kf);
        suu += u * u;
        suv += u * v;
        svv += v * v;
        sud += u * row.deviation;
        svd += v * row.deviation;
    }
    let det = suu * svv - suv * suv;
    let (c0, c1) = if det.abs() > 1e-30 {
        (
            (sud * svv - svd * suv) / det,
            (svd * suu - sud * suv) / det,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    let decreasing = rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
    Ok(LogConvergence {
        rows,
        c0,
        c1,
        decreasing,
    })
}

/// Weak measure comparison at one level: `L1` distance between the cellwise
/// integrals of `k^{-n} B_k rho` and the gradient-volume measure of `phi`
/// restricted to the contact set.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    pub k: u32,
    pub lambda: f64,
    pub l1_distance: f64,
    /// Total `k^{-n} int B_k rho` over the box, cellwise trapezoid.
    pub bergman_total: f64,
    /// Gradient-volume mass inside the contact set.
    pub contact_mass: f64,
    pub section_count: usize,
}

pub fn bergman_measure_convergence(
    basis: &SectionBasis,
    phi: &GridFn,
    dom: &Polytope,
    lambda: f64,
) -> Result<MeasureReport> {
    let n = phi.grid.dim();
    let bk = partial_bergman(basis, phi, lambda)?;
    let env = max_envelope(phi, dom, basis.filtration_axis, lambda)?;
    let ma = ma_measure(phi)?;
    let rho = WeightDensity::new(n);

    // per-node density of the section measure
    let mut node_density = vec![0.0f64; phi.grid.node_count()];
    let kn = (basis.k as f64).powi(n as i32);
    let mut x = Vec::new();
    for (i, d) in node_density.iter_mut().enumerate() {
        phi.grid.node(i, &mut x);
        *d = bk.values.values[i] * rho.log_density(&x).exp() / kn;
    }

    let mut cell_vol = 1.0;
    for j in 0..n {
        cell_vol *= phi.grid.spacing(j);
    }
    let mut corners = Vec::new();
    let mut l1 = 0.0;
    let mut total = 0.0;
    let mut contact_mass = 0.0;
    for cell in 0..phi.grid.cell_count() {
        phi.grid.cell_corners(cell, &mut corners);
        let mean = corners.iter().map(|&c| node_density[c]).sum::<f64>()
            / corners.len() as f64;
        let bmass = mean * cell_vol;
        let in_contact = corners.iter().all(|&c| env.contact_mask[c]);
        let target = if in_contact { ma.masses[cell] } else { 0.0 };
        l1 += (bmass - target).abs();
        total += bmass;
        contact_mass += target;
    }
    Ok(MeasureReport {
        k: basis.k,
        lambda,
        l1_distance: l1,
        bergman_total: total,
        contact_mass,
        section_count: bk.count,
    })
}

/// Independent quadrature self-test: each section contributes exactly one to
/// `int B rho`, so the integral of the (optionally filtered) section sum must
/// equal the section count.  Integrates on a `2x`-refined padded mesh — a
/// different rule than the `4x` mesh used for the norms — and returns the
/// relative defect.
pub fn parseval_defect(
    basis: &SectionBasis,
    pot: &dyn Potential,
    grid: &BoxGrid,
    min_nu: Option<i64>,
) -> Result<f64> {
    let keep: Vec<usize> = (0..basis.count())
        .filter(|&i| min_nu.map_or(true, |t| basis.nu(i) >= t))
        .collect();
    if keep.is_empty() {
        return Err(Error::invalid("no sections selected for the self-test"));
    }
    let quad = quadrature_grid(grid, 2, QUAD_PAD)?;
    let (xs, base, log_cell) = quadrature_base(&quad, pot, basis.k as f64);
    let total: f64 = keep
        .par_iter()
        .map(|&i| {
            let af: Vec<f64> = basis.alphas[i].iter().map(|&a| a as f64).collect();
            (log_norm_integral(&xs, &base, log_cell, &af) - basis.log_norms2[i]).exp()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((total / keep.len() as f64 - 1.0).abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct H0Row {
    pub k: u32,
    pub count: usize,
    /// `count / k^n`
    pub normalized: f64,
    /// `|normalized - target|`
    pub error: f64,
}

/// Growth of the filtered section count against the slice volume of the
/// polytope.
#[derive(Debug, Clone, Serialize)]
pub struct H0Table {
    pub rows: Vec<H0Row>,
    /// `vol{ a in dom : a_axis >= lambda }`
    pub target: f64,
}

pub fn h0_growth(dom: &Polytope, axis: usize, lambda: f64, ks: &[u32]) -> Result<H0Table> {
    if ks.is_empty() {
        return Err(Error::invalid("empty level schedule"));
    }
    let target = dom.slice_volume(&SliceConstraint::new(axis, lambda)?)?;
    let n = dom.dim() as i32;
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let (t, _) = filtration_threshold(k, lambda)?;
        let count = dom
            .lattice_points(k)?
            .iter()
            .filter(|alpha| alpha[axis] >= t)
            .count();
        let normalized = count as f64 / (k as f64).powi(n);
        rows.push(H0Row {
            k,
            count,
            normalized,
            error: (normalized - target).abs(),
        });
    }
    Ok(H0Table { rows, target })
}

/// Section-built exhaustion estimator: the vanishing-order mean
/// `sum nu_alpha e^{w_alpha(x)} / (k sum e^{w_alpha(x)})` with
/// `w_alpha = <alpha, x> - k phi(x) - ln norms2_alpha`.  Values are convex
/// combinations of `nu/k`, so they stay inside the filtration-axis range of
/// the polytope.
pub fn section_exhaustion(basis: &SectionBasis, phi: &GridFn) -> Result<GridFn> {
    let n = phi.grid.dim();
    if basis.alphas[0].len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: basis.alphas[0].len(),
        });
    }
    let kf = basis.k as f64;
    let terms: Vec<(Vec<f64>, f64, f64)> = (0..basis.count())
        .map(|i| {
            let af: Vec<f64> = basis.alphas[i].iter().map(|&a| a as f64).collect();
            (af, basis.log_norms2[i], basis.nu(i) as f64)
        })
        .collect();
    let values: Vec<f64> = (0..phi.grid.node_count())
        .into_par_iter()
        .map_init(Vec::new, |x, i| {
            phi.grid.node(i, x);
            let mut w = Vec::with_capacity(terms.len());
            let mut m = f64::NEG_INFINITY;
            for (af, logn2, _) in &terms {
                let mut dot = 0.0;
                for (a, c) in af.iter().zip(x.iter()) {
                    dot += a * c;
                }
                let e = dot - logn2;
                w.push(e);
                m = m.max(e);
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for ((_, _, nu), e) in terms.iter().zip(&w) {
                let p = (e - m).exp();
                num += nu * p;
                den += p;
            }
            num / (kf * den)
        })
        .collect();
    Ok(GridFn {
        grid: phi.grid.clone(),
        values,
        tail: None,
    })
}

/// Finite-level ray metric
/// `(1/k) ln sum_alpha e^{t nu_alpha + <alpha, x>} / norms2_alpha`,
/// an absolute convex potential in `(x, t)`.
pub fn phong_sturm_metric(basis: &SectionBasis, grid: &BoxGrid, t: f64) -> Result<GridFn> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::invalid("ray time must be nonnegative"));
    }
    let n = grid.dim();
    if basis.alphas[0].len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: basis.alphas[0].len(),
        });
    }
    let kf = basis.k as f64;
    let terms: Vec<(Vec<f64>, f64)> = (0..basis.count())
        .map(|i| {
            let af: Vec<f64> = basis.alphas[i].iter().map(|&a| a as f64).collect();
            let shift = t * basis.nu(i) as f64 - basis.log_norms2[i];
            (af, shift)
        })
        .collect();
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map_init(Vec::new, |x, i| {
            grid.node(i, x);
            let mut acc = LogSumExp::new();
            for (af, shift) in &terms {
                let mut dot = 0.0;
                for (a, c) in af.iter().zip(x.iter()) {
                    dot += a * c;
                }
                acc.push(dot + shift);
            }
            acc.value() / kf
        })
        .collect();
    Ok(GridFn {
        grid: grid.clone(),
        values,
        tail: None,
    })
}

/// Two-sided sandwich constants on a compact window: the smallest `C` with
/// `B_k <= C k^n e^{k (envelope - phi)}` and the largest `c` with
/// `B_k >= c e^{k (envelope - phi)}` over the window.
#[derive(Debug, Clone, Serialize)]
pub struct TameReport {
    pub k: u32,
    pub upper_c: f64,
    pub lower_c: f64,
}

pub fn tame_bounds(
    bk: &BergmanFn,
    phi: &GridFn,
    envelope: &GridFn,
    window: &[(f64, f64)],
) -> Result<TameReport> {
    if bk.empty {
        return Err(Error::invalid("empty section sum has no sandwich constants"));
    }
    let n = phi.grid.dim();
    let mask = window_mask(&phi.grid, window)?;
    let kf = bk.k as f64;
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut seen = false;
    for i in 0..phi.grid.node_count() {
        if !mask[i] {
            continue;
        }
        seen = true;
        // ln( B e^{k(phi - envelope)} )
        let e = bk.log_values.values[i] + kf * (phi.values[i] - envelope.values[i]);
        hi = hi.max(e);
        lo = lo.min(e);
    }
    if !seen {
        return Err(Error::invalid("compact window contains no grid nodes"));
    }
    Ok(TameReport {
        k: bk.k,
        upper_c: (hi - (n as f64) * kf.ln()).exp(),
        lower_c: lo.exp(),
    })
}
