//! Splitting identity for separable convex data.
//!
//! For `F(x1, x2) = phi1(x1) + phi2(x2)` with the union singularity on the
//! first coordinate of each factor, the constrained envelope of `F` (dual
//! constraint `a1 + b1 >= 1` over the product of the factor gradient ranges)
//! coincides with the upper envelope of split-level sums
//! `sup_lambda [ env1(lambda)(x1) + env2(1 - lambda)(x2) ]`.
//! [`product_envelope_check`] computes both sides on the product grid and
//! reports how far apart they are.

use crate::envelope::default_dual_points;
use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridFn};
use crate::legendre::{constrained_biconjugate, legendre_transform, DualConstraint, DualFn, LevelSweep};
use crate::polytope::{rat_to_f64, Polytope};

/// Outcome of a product-splitting comparison.
#[derive(Debug)]
pub struct ProductReport {
    /// `sup |joint - split|` over the product grid.
    pub sup_difference: f64,
    /// `sup (split - joint)`, signed.  Each split candidate uses a dual pair
    /// admitted by the joint constraint, so this is rounding-level whenever
    /// both sides share the same dual nodes.
    pub split_excess: f64,
    /// Joint-constraint envelope on the product grid.
    pub joint: GridFn,
    /// Upper envelope of split-level sums on the product grid.
    pub split: GridFn,
}

fn product_dual(d1: &DualFn, d2: &DualFn, domain: Polytope) -> Result<DualFn> {
    let grid = BoxGrid::new(vec![d1.grid.axis(0).clone(), d2.grid.axis(0).clone()])?;
    let m2 = d2.grid.node_count();
    let mut values = Vec::with_capacity(grid.node_count());
    let mut feasible = Vec::with_capacity(grid.node_count());
    for p in 0..d1.grid.node_count() {
        for q in 0..m2 {
            let ok = d1.feasible[p] && d2.feasible[q];
            feasible.push(ok);
            values.push(if ok {
                d1.values[p] + d2.values[q]
            } else {
                f64::NEG_INFINITY
            });
        }
    }
    Ok(DualFn {
        domain,
        grid,
        values,
        feasible,
    })
}

/// Compare the joint constrained envelope of `phi1(x1) + phi2(x2)` with the
/// upper envelope of split-level sums over `lambdas`.
///
/// Both factors must be one-dimensional convex grid functions; `dom1`, `dom2`
/// are their gradient ranges.  The factor transforms are combined additively
/// on the product dual grid (the transform of a separable function is the sum
/// of the factor transforms; a direct product-grid transform agrees up to
/// rounding, which the tests pin down).  `dual_points` is the per-axis dual
/// resolution, `0` for the two-dimensional default.
///
/// Levels at the ends of the range stay finite here: a threshold equal to the
/// top of a factor's gradient range keeps exactly the top face of its dual
/// interval, which is the closed-family limit of the envelopes, not the empty
/// set.
pub fn product_envelope_check(
    phi1: &GridFn,
    dom1: &Polytope,
    phi2: &GridFn,
    dom2: &Polytope,
    lambdas: &[f64],
    dual_points: usize,
) -> Result<ProductReport> {
    if phi1.grid.dim() != 1 || phi2.grid.dim() != 1 {
        return Err(Error::Unsupported(
            "product comparison expects one-dimensional factors".into(),
        ));
    }
    if dom1.dim() != 1 || dom2.dim() != 1 {
        return Err(Error::invalid("factor dual domains must be intervals"));
    }
    if lambdas.is_empty() {
        return Err(Error::invalid("empty split-level grid"));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("split levels must be strictly ascending"));
    }
    phi1.check_convex()?;
    phi2.check_convex()?;

    let points = if dual_points == 0 {
        default_dual_points(2)
    } else {
        dual_points
    };
    let d1 = legendre_transform(phi1, dom1, points)?;
    let d2 = legendre_transform(phi2, dom2, points)?;

    // joint side: biconjugate of the separable sum under `a1 + b1 >= 1`
    let pgrid = BoxGrid::new(vec![phi1.grid.axis(0).clone(), phi2.grid.axis(0).clone()])?;
    let m2 = phi2.grid.node_count();
    let mut fvals = Vec::with_capacity(pgrid.node_count());
    for i in 0..phi1.grid.node_count() {
        for j in 0..m2 {
            fvals.push(phi1.values[i] + phi2.values[j]);
        }
    }
    let (lo2, hi2) = dom2.axis_range(0);
    let pdom = dom1.prism(rat_to_f64(&lo2), rat_to_f64(&hi2))?;
    let dual = product_dual(&d1, &d2, pdom)?;
    let constraint = DualConstraint::Linear {
        coeffs: vec![1.0, 1.0],
        min: 1.0,
    };
    let joint = constrained_biconjugate(&dual, &pgrid, &constraint)?;

    // split side: factor envelopes for every level in one sweep each, then a
    // nodewise maximum of the complementary sums
    let sweep1 = LevelSweep::new(&d1, 0, lambdas)?;
    let env1 = sweep1.envelopes(&phi1.grid);
    let mus: Vec<f64> = lambdas.iter().rev().map(|&l| 1.0 - l).collect();
    let sweep2 = LevelSweep::new(&d2, 0, &mus)?;
    let env2 = sweep2.envelopes(&phi2.grid);

    let m = lambdas.len();
    let mut svals = vec![f64::NEG_INFINITY; pgrid.node_count()];
    for l in 0..m {
        let e1 = &env1[l].values;
        let e2 = &env2[m - 1 - l].values;
        let mut node = 0;
        for &v1 in e1.iter() {
            for &v2 in e2.iter() {
                let cand = v1 + v2;
                if cand > svals[node] {
                    svals[node] = cand;
                }
                node += 1;
            }
        }
    }
    let split = GridFn {
        grid: pgrid,
        values: svals,
        tail: joint.tail.clone(),
    };

    let mut sup_difference = 0.0f64;
    let mut split_excess = f64::NEG_INFINITY;
    for (a, b) in joint.values.iter().zip(&split.values) {
        if a.is_finite() && b.is_finite() {
            sup_difference = sup_difference.max((a - b).abs());
            split_excess = split_excess.max(b - a);
        } else if a.is_finite() != b.is_finite() {
            sup_difference = f64::INFINITY;
        }
    }
    Ok(ProductReport {
        sup_difference,
        split_excess,
        joint,
        split,
    })
}
