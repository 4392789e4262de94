//! Maximal envelopes with a divisorial slice constraint, their contact
//! sets, equilibrium mass accounting, and the exhaustion function.
//!
//! The envelope at level `lambda` along `axis` is the biconjugate with dual
//! domain restricted to `{a_axis >= lambda}`.  Contact is decided relative
//! to the unconstrained biconjugate (the baseline): wherever the slice
//! constraint does not bind, the constrained and unconstrained maxima run
//! over the same active candidates and agree to rounding error, so a tight
//! relative threshold separates contact from non-contact regardless of the
//! O(h^2) gap between the baseline and the original sample values.

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridFn};
use crate::legendre::{
    biconjugate, constrained_biconjugate, legendre_transform, DualConstraint, DualFn, LevelSweep,
};
use crate::ma::ma_measure;
use crate::polytope::{rat_to_f64, Polytope};

/// Dual-grid resolution used when none is specified: fine enough that the
/// level spacing 1/256 of the threshold family lands on exact dual nodes.
pub fn default_dual_points(dim: usize) -> usize {
    match dim {
        1 => 2049,
        2 => 257,
        _ => 65,
    }
}

/// Relative contact threshold for a potential of the given magnitude.
pub fn contact_threshold(phi: &GridFn) -> f64 {
    1e-9 * (1.0 + phi.max_abs())
}

/// A maximal envelope together with its contact data.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    /// The constrained biconjugate (convex, `<= phi` nodewise).
    pub envelope: GridFn,
    /// The unconstrained biconjugate on the same grid, used as the contact
    /// reference.
    pub baseline: GridFn,
    pub lambda: f64,
    pub axis: usize,
    /// Nodes where the envelope attains the baseline within the detection
    /// threshold.
    pub contact_mask: Vec<bool>,
    /// Observed bound for `phi - envelope` over the contact set.
    pub contact_tolerance: f64,
}

impl EnvelopeResult {
    pub fn contact_count(&self) -> usize {
        self.contact_mask.iter().filter(|&&b| b).count()
    }
}

fn finish_result(
    phi: &GridFn,
    envelope: GridFn,
    baseline: GridFn,
    axis: usize,
    lambda: f64,
) -> EnvelopeResult {
    let eps = contact_threshold(phi);
    let contact_mask: Vec<bool> = envelope
        .values
        .iter()
        .zip(&baseline.values)
        .map(|(e, b)| e.is_finite() && *e >= b - eps)
        .collect();
    // observed guarantee: on the contact set the envelope reaches phi up to
    // the baseline's own discretization gap
    let mut gap = 0.0f64;
    for ((&m, e), p) in contact_mask.iter().zip(&envelope.values).zip(&phi.values) {
        if m {
            gap = gap.max(p - e);
        }
    }
    EnvelopeResult {
        envelope,
        baseline,
        lambda,
        axis,
        contact_mask,
        contact_tolerance: gap + eps,
    }
}

/// Maximal envelope from a precomputed Legendre transform.
pub fn max_envelope_from_dual(
    phi: &GridFn,
    dual: &DualFn,
    axis: usize,
    lambda: f64,
) -> Result<EnvelopeResult> {
    if axis >= phi.grid.dim() {
        return Err(Error::invalid("envelope axis out of range"));
    }
    let (lo, hi) = dual.domain.axis_range(axis);
    let (lam_min, lam_max) = (rat_to_f64(&lo), rat_to_f64(&hi));
    if lambda <= lam_min {
        // vacuous constraint: the envelope is phi itself
        return Ok(finish_result(
            phi,
            phi.clone(),
            phi.clone(),
            axis,
            lambda,
        ));
    }
    if lambda >= lam_max {
        // the dual region degenerates: all-sentinel envelope, empty contact
        let sentinel = GridFn::constant(phi.grid.clone(), f64::NEG_INFINITY);
        return Ok(EnvelopeResult {
            envelope: sentinel.clone(),
            baseline: sentinel,
            lambda,
            axis,
            contact_mask: vec![false; phi.grid.node_count()],
            contact_tolerance: contact_threshold(phi),
        });
    }
    let baseline = biconjugate(dual, &phi.grid);
    let constraint = DualConstraint::slice(axis, lambda)?;
    let envelope = constrained_biconjugate(dual, &phi.grid, &constraint)?;
    Ok(finish_result(phi, envelope, baseline, axis, lambda))
}

/// Maximal envelope of a convex potential with gradient range `domain`,
/// slice constraint `a_axis >= lambda`.
pub fn max_envelope(
    phi: &GridFn,
    domain: &Polytope,
    axis: usize,
    lambda: f64,
) -> Result<EnvelopeResult> {
    phi.check_convex()?;
    if axis >= phi.grid.dim() {
        return Err(Error::invalid("envelope axis out of range"));
    }
    let (lo, hi) = domain.axis_range(axis);
    let (lam_min, lam_max) = (rat_to_f64(&lo), rat_to_f64(&hi));
    if lambda <= lam_min || lambda >= lam_max {
        // endpoint conventions need no transform
        let dual = DualFn {
            domain: domain.clone(),
            grid: phi.grid.clone(),
            values: Vec::new(),
            feasible: Vec::new(),
        };
        return max_envelope_from_dual(phi, &dual, axis, lambda);
    }
    let dual = legendre_transform(phi, domain, default_dual_points(phi.grid.dim()))?;
    max_envelope_from_dual(phi, &dual, axis, lambda)
}

/// Equilibrium mass accounting for an envelope result.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EquilibriumReport {
    /// Total envelope mass minus the strictly-off-contact mass.
    pub mass_on_contact: f64,
    /// Envelope mass over cells strictly outside the contact set (the mask
    /// dilated by one cell); vanishes when the envelope is affine there.
    pub mass_off_contact: f64,
    /// Sum of per-cell discrepancies between the envelope measure and the
    /// potential's measure over cells fully inside the contact set.
    pub matched_mass_error: f64,
    /// Total envelope mass (for volume-identity cross checks).
    pub envelope_total: f64,
    /// Total mass of the potential itself.
    pub phi_total: f64,
}

/// Chebyshev-1 dilation of a node mask.
fn dilate_mask(grid: &BoxGrid, mask: &[bool]) -> Vec<bool> {
    let n = grid.dim();
    let mut out = vec![false; mask.len()];
    let mut idx = [0usize; 4];
    let mut nb = [0usize; 4];
    for node in 0..mask.len() {
        if !mask[node] {
            continue;
        }
        grid.unflat(node, &mut idx[..n]);
        // mark the full neighborhood, offsets in {-1,0,1}^n
        let mut offs = [0i64; 4];
        loop {
            let mut ok = true;
            for j in 0..n {
                let v = idx[j] as i64 + offs[j];
                if v < 0 || v >= grid.axis(j).points as i64 {
                    ok = false;
                    break;
                }
                nb[j] = v as usize;
            }
            if ok {
                out[grid.flat(&nb[..n])] = true;
            }
            // advance the offset counter
            let mut j = 0;
            loop {
                if j == n {
                    break;
                }
                offs[j] += 1;
                if offs[j] <= 1 {
                    break;
                }
                offs[j] = -1;
                j += 1;
            }
            if j == n {
                break;
            }
        }
    }
    out
}

/// Verify the equilibrium identity: the envelope's Monge-Ampere measure
/// lives on the contact set and agrees there with the potential's measure.
pub fn equilibrium_check(phi: &GridFn, result: &EnvelopeResult) -> Result<EquilibriumReport> {
    if phi.grid.axes() != result.envelope.grid.axes() {
        return Err(Error::invalid(
            "envelope result was computed on a different grid",
        ));
    }
    let env_measure = ma_measure(&result.envelope)?;
    let phi_measure = ma_measure(phi)?;
    let grid = &phi.grid;
    let dilated = dilate_mask(grid, &result.contact_mask);

    let mut corners = Vec::new();
    let mut mass_off = 0.0f64;
    let mut matched = 0.0f64;
    for cell in 0..grid.cell_count() {
        grid.cell_corners(cell, &mut corners);
        let fully_inside = corners.iter().all(|&c| result.contact_mask[c]);
        let fully_clear = corners.iter().all(|&c| !dilated[c]);
        if fully_inside {
            matched += (env_measure.masses[cell] - phi_measure.masses[cell]).abs();
        }
        if fully_clear {
            mass_off += env_measure.masses[cell];
        }
    }
    Ok(EquilibriumReport {
        mass_on_contact: env_measure.total - mass_off,
        mass_off_contact: mass_off,
        matched_mass_error: matched,
        envelope_total: env_measure.total,
        phi_total: phi_measure.total,
    })
}

/// The exhaustion function: per node, the largest slice threshold whose
/// envelope still touches the baseline there.
#[derive(Debug, Clone)]
pub struct ExhaustionFn {
    /// H values per node.
    pub values: GridFn,
    pub axis: usize,
    pub dlam: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl ExhaustionFn {
    /// H is non-decreasing along the slice axis (monotone contact growth
    /// for strictly convex potentials).
    pub fn check_monotone_along_axis(&self) -> Result<()> {
        let grid = &self.values.grid;
        let n = grid.dim();
        let mut idx = [0usize; 4];
        let stride: usize = (self.axis + 1..n).map(|j| grid.axis(j).points).product();
        for node in 0..grid.node_count() {
            grid.unflat(node, &mut idx[..n]);
            if idx[self.axis] + 1 >= grid.axis(self.axis).points {
                continue;
            }
            let next = node + stride;
            if self.values.values[next] + 1e-12 < self.values.values[node] {
                return Err(Error::invalid(format!(
                    "exhaustion decreases along axis {} at node {node}",
                    self.axis
                )));
            }
        }
        Ok(())
    }
}

/// Compute the exhaustion function of `phi` along `axis` at threshold
/// resolution `dlam`, resolving every level of the ascending family in a
/// single sweep of the dual nodes (levels merge top-down, so the result per
/// node is the largest level still in contact, exactly as a per-node
/// bisection over the same level grid would return).
pub fn exhaustion(
    phi: &GridFn,
    domain: &Polytope,
    axis: usize,
    dlam: f64,
) -> Result<ExhaustionFn> {
    phi.check_convex()?;
    if axis >= phi.grid.dim() {
        return Err(Error::invalid("exhaustion axis out of range"));
    }
    if !(dlam > 0.0) || !dlam.is_finite() {
        return Err(Error::invalid("threshold resolution must be positive"));
    }
    let (lo, hi) = domain.axis_range(axis);
    let (lam_min, lam_max) = (rat_to_f64(&lo), rat_to_f64(&hi));
    let count = ((lam_max - lam_min) / dlam).round().max(1.0) as usize;
    // levels cover [lambda_min, lambda_max); the top level is excluded since
    // its envelope degenerates
    let lambdas: Vec<f64> = (0..count)
        .map(|k| lam_min + k as f64 * dlam)
        .filter(|&l| l < lam_max)
        .collect();
    let dual = legendre_transform(phi, domain, default_dual_points(phi.grid.dim()))?;
    let sweep = LevelSweep::new(&dual, axis, &lambdas)?;
    let (tops, _baseline) = sweep.contact_top(&phi.grid, contact_threshold(phi));
    let values: Vec<f64> = tops.iter().map(|&t| lambdas[t]).collect();
    Ok(ExhaustionFn {
        values: GridFn {
            grid: phi.grid.clone(),
            values,
            tail: None,
        },
        axis,
        dlam,
        lambda_min: lam_min,
        lambda_max: lam_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGrid;
    use crate::metric::VertexSoftmax;
    use crate::numeric::logistic;
    use crate::polytope::Polytope;

    fn interval_softplus() -> (GridFn, Polytope) {
        let grid = BoxGrid::symmetric(1, 20.0, 513).unwrap();
        let p = Polytope::unit_box(1);
        let f = VertexSoftmax::new(p.clone(), None).unwrap().sample(grid).unwrap();
        (f, p)
    }

    #[test]
    fn envelope_values_match_the_closed_form_glue() {
        let (phi, p) = interval_softplus();
        let res = max_envelope(&phi, &p, 0, 0.5).unwrap();
        // left of the contact point the envelope is the line x/2 + ln 2
        let ln2 = std::f64::consts::LN_2;
        let interp = res.envelope.eval_interp(&[-2.0]);
        assert!(
            (interp - (-1.0 + ln2)).abs() < 1e-12,
            "left branch {interp}"
        );
        for (i, &x) in phi.grid.coords(0).iter().enumerate() {
            if x <= -0.5 {
                let want = 0.5 * x + ln2;
                assert!(
                    (res.envelope.values[i] - want).abs() < 1e-12,
                    "line mismatch at {x}"
                );
                assert!(!res.contact_mask[i], "false contact at {x}");
            }
        }
        // right of the contact point the envelope returns phi
        let right = res.envelope.eval_interp(&[2.0]);
        let want = (1.0 + 2.0f64.exp()).ln();
        assert!((right - want).abs() < 1e-3, "right branch {right} vs {want}");
        // x = 0 sits exactly at the contact boundary
        let mid = phi.grid.node_count() / 2;
        assert!(res.contact_mask[mid]);
        // envelope below phi, convex
        for (e, v) in res.envelope.values.iter().zip(&phi.values) {
            assert!(e - v <= 1e-12);
        }
        res.envelope.check_convex().unwrap();
        // contact gap stays at discretization scale
        assert!(res.contact_tolerance < 1e-3, "gap {}", res.contact_tolerance);
    }

    #[test]
    fn lambda_zero_returns_phi_exactly() {
        let (phi, p) = interval_softplus();
        let res = max_envelope(&phi, &p, 0, 0.0).unwrap();
        assert_eq!(res.envelope.values, phi.values);
        assert!(res.contact_mask.iter().all(|&b| b));
    }

    #[test]
    fn lambda_above_max_returns_sentinel() {
        let (phi, p) = interval_softplus();
        let res = max_envelope(&phi, &p, 0, 1.0).unwrap();
        assert!(res.envelope.is_all_sentinel());
        assert!(res.contact_mask.iter().all(|&b| !b));
    }

    #[test]
    fn contact_sets_shrink_as_lambda_grows() {
        let (phi, p) = interval_softplus();
        let lams = [0.125, 0.25, 0.375, 0.5, 0.75];
        let masks: Vec<Vec<bool>> = lams
            .iter()
            .map(|&l| max_envelope(&phi, &p, 0, l).unwrap().contact_mask)
            .collect();
        for w in masks.windows(2) {
            for (hi, lo) in w[1].iter().zip(&w[0]) {
                assert!(!hi | lo, "contact sets are not nested");
            }
        }
    }

    #[test]
    fn equilibrium_accounting_on_the_interval() {
        let (phi, p) = interval_softplus();
        let res = max_envelope(&phi, &p, 0, 0.5).unwrap();
        let rep = equilibrium_check(&phi, &res).unwrap();
        assert!(
            rep.mass_off_contact <= 1e-10,
            "off-contact mass {}",
            rep.mass_off_contact
        );
        assert!(
            rep.matched_mass_error <= 0.02,
            "matched error {}",
            rep.matched_mass_error
        );
        // volume identity: total envelope mass is the slice volume 1/2,
        // up to the e^{-R} tail truncation of the box
        assert!(
            (rep.envelope_total - 0.5).abs() < 1e-3,
            "envelope total {}",
            rep.envelope_total
        );

        let identity = max_envelope(&phi, &p, 0, 0.0).unwrap();
        let rep0 = equilibrium_check(&phi, &identity).unwrap();
        assert_eq!(rep0.mass_off_contact, 0.0);
        assert_eq!(rep0.matched_mass_error, 0.0);
    }

    #[test]
    fn exhaustion_tracks_the_gradient_on_the_interval() {
        // the level sets of H are read off the discrete transform, whose
        // argmax is flat over windows of width ~ phi'' * h / 2; a 2049-node
        // grid pushes that window below the level spacing 1/256
        let grid = BoxGrid::symmetric(1, 20.0, 2049).unwrap();
        let p = Polytope::unit_box(1);
        let phi = VertexSoftmax::new(p.clone(), None).unwrap().sample(grid).unwrap();
        let dlam = 1.0 / 256.0;
        let h = exhaustion(&phi, &p, 0, dlam).unwrap();
        let mid = phi.grid.node_count() / 2;
        assert_eq!(h.values.values[mid], 0.5, "H at the center");
        h.check_monotone_along_axis().unwrap();
        for (i, &x) in phi.grid.coords(0).iter().enumerate() {
            let hv = h.values.values[i];
            assert!((0.0..=1.0 - dlam).contains(&hv));
            if x.abs() <= 5.0 {
                let want = logistic(x);
                assert!(
                    (hv - want).abs() <= 2.0 * dlam,
                    "H({x}) = {hv}, gradient {want}"
                );
            }
        }
    }

    #[test]
    fn two_dim_envelope_respects_the_slice_volume_identity() {
        let grid = BoxGrid::symmetric(2, 16.0, 65).unwrap();
        let p = Polytope::standard_simplex(2);
        let phi = VertexSoftmax::new(p.clone(), None).unwrap().sample(grid).unwrap();
        let res = max_envelope(&phi, &p, 0, 0.5).unwrap();
        let rep = equilibrium_check(&phi, &res).unwrap();
        // dual region: simplex cut at a_1 >= 1/2, area 1/8
        assert!(
            (rep.envelope_total - 0.125).abs() < 5e-3,
            "envelope total {}",
            rep.envelope_total
        );
        assert!(rep.mass_off_contact < 0.03, "off mass {}", rep.mass_off_contact);
    }
}
