//! Geodesic rays from ascending envelope families, their degeneracy
//! residual, and right-derivative extraction.
//!
//! The ray value at `(x, t)` is the supremum over threshold levels of
//! `envelope_level(x) + level * t`, followed by one joint biconjugation in
//! `(x, t)` that realizes the upper regularization.  Each candidate is
//! jointly convex, so the pass only removes the discretization overshoot.

use crate::envelope::default_dual_points;
use crate::error::{Error, Result};
use crate::grid::{AxisSpec, BoxGrid, GridFn};
use crate::legendre::{
    biconjugate, legendre_transform, DualConstraint, LevelSweep,
};
use crate::numeric::symmetric_eigenvalues;
use crate::polytope::{rat_to_f64, Polytope};
use rayon::prelude::*;

/// An ascending family of divisorial thresholds along one axis, capped at
/// `cap`: level values sit strictly below the cap, the family member at and
/// above the cap being identically `-inf`.
#[derive(Debug, Clone)]
pub struct TestCurve {
    pub axis: usize,
    /// Cap `c` of the threshold range; at most the axis maximum over the
    /// dual polytope.
    pub cap: f64,
    pub dlam: f64,
    pub lambda_min: f64,
    /// Levels `lambda_min + k * dlam`, strictly below `cap`.
    pub lambdas: Vec<f64>,
}

impl TestCurve {
    pub fn divisorial(domain: &Polytope, axis: usize, cap: f64, dlam: f64) -> Result<Self> {
        if axis >= domain.dim() {
            return Err(Error::invalid("test curve axis out of range"));
        }
        if !(dlam > 0.0) || !dlam.is_finite() {
            return Err(Error::invalid("level resolution must be positive"));
        }
        let (lo, hi) = domain.axis_range(axis);
        let (lam_min, lam_max) = (rat_to_f64(&lo), rat_to_f64(&hi));
        if cap > lam_max + 1e-12 {
            return Err(Error::invalid(format!(
                "cap {cap} exceeds the axis maximum {lam_max}"
            )));
        }
        if cap <= lam_min {
            return Err(Error::invalid("cap must exceed the axis minimum"));
        }
        let count = ((cap - lam_min) / dlam).ceil() as usize + 1;
        let lambdas: Vec<f64> = (0..count)
            .map(|k| lam_min + k as f64 * dlam)
            .filter(|&l| l < cap)
            .collect();
        Ok(TestCurve {
            axis,
            cap,
            dlam,
            lambda_min: lam_min,
            lambdas,
        })
    }
}

/// Ray values on the joint `(x, t)` grid; the time axis is last, so the
/// per-node time series is contiguous.
#[derive(Debug, Clone)]
pub struct GeodesicRay {
    pub joint: GridFn,
    pub space: BoxGrid,
    pub times: Vec<f64>,
    pub curve: TestCurve,
}

impl GeodesicRay {
    /// Spatial slice at time index `k`.
    pub fn slice(&self, k: usize) -> GridFn {
        let m = self.times.len();
        let values = self
            .joint
            .values
            .iter()
            .skip(k)
            .step_by(m)
            .copied()
            .collect();
        GridFn {
            grid: self.space.clone(),
            values,
            tail: None,
        }
    }

    pub fn hmae_residual(&self) -> Result<f64> {
        hmae_residual(&self.joint)
    }
}

/// Build the joint grid: spatial axes followed by a time axis on `[0, T]`.
fn joint_grid(space: &BoxGrid, t_max: f64, t_points: usize) -> Result<BoxGrid> {
    let mut axes = space.axes().to_vec();
    axes.push(AxisSpec::new(0.0, t_max, t_points)?);
    BoxGrid::new(axes)
}

/// Legendre-transform ray of the divisorial family over `phi`.
///
/// `joint_dual_points` sets the per-axis resolution of the dual grid in the
/// joint convexification pass (0 picks a dimension-based default).
pub fn legendre_ray(
    phi: &GridFn,
    domain: &Polytope,
    curve: &TestCurve,
    t_max: f64,
    t_points: usize,
    joint_dual_points: usize,
) -> Result<GeodesicRay> {
    phi.check_convex()?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid("ray horizon must be positive"));
    }
    let jgrid = joint_grid(&phi.grid, t_max, t_points)?;
    let times: Vec<f64> = jgrid.coords(phi.grid.dim()).to_vec();

    // envelope values of every level at every spatial node, one dual sweep
    let dual = legendre_transform(phi, domain, default_dual_points(phi.grid.dim()))?;
    let sweep = LevelSweep::new(&dual, curve.axis, &curve.lambdas)?;
    let levels = sweep.envelopes(&phi.grid);

    // pointwise sup over levels; the bottom level follows the identity
    // convention (envelope at the axis minimum is phi itself)
    let m = times.len();
    let lam0 = curve.lambda_min;
    let values: Vec<f64> = (0..phi.grid.node_count())
        .into_par_iter()
        .flat_map_iter(|x| {
            let phi_x = phi.values[x];
            let times = &times;
            let levels = &levels;
            let curve = &curve;
            (0..m).map(move |k| {
                let t = times[k];
                let mut best = phi_x + lam0 * t;
                for (l, lam) in curve.lambdas.iter().enumerate().skip(1) {
                    let v = levels[l].values[x];
                    if v == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = v + lam * t;
                    if cand > best {
                        best = cand;
                    }
                }
                best
            })
        })
        .collect();
    let prelim = GridFn {
        grid: jgrid.clone(),
        values,
        tail: None,
    };

    // joint convexification pass
    let joint_domain = domain.prism(curve.lambda_min, curve.cap)?;
    let points = if joint_dual_points > 0 {
        joint_dual_points
    } else {
        match jgrid.dim() {
            2 => 257,
            _ => 33,
        }
    };
    let jdual = legendre_transform(&prelim, &joint_domain, points)?;
    let mut joint = biconjugate(&jdual, &jgrid);
    joint.tail = Some(joint_domain);

    Ok(GeodesicRay {
        joint,
        space: phi.grid.clone(),
        times,
        curve: curve.clone(),
    })
}

/// Degeneracy residual: the largest determinant of the central-difference
/// Hessian in all joint coordinates over interior nodes, with eigenvalues
/// floored at -1e-8 to absorb convexity rounding noise.
pub fn hmae_residual(joint: &GridFn) -> Result<f64> {
    let grid = &joint.grid;
    let n = grid.dim();
    if grid.axes().iter().any(|a| a.points < 3) {
        return Err(Error::invalid(
            "degeneracy residual needs at least three nodes per axis",
        ));
    }
    let mut strides = [0usize; 4];
    {
        let mut s = 1usize;
        for j in (0..n).rev() {
            strides[j] = s;
            s *= grid.axis(j).points;
        }
    }
    let residual = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            let mut idx = [0usize; 4];
            grid.unflat(node, &mut idx[..n]);
            if (0..n).any(|j| idx[j] == 0 || idx[j] == grid.axis(j).points - 1) {
                return f64::NEG_INFINITY;
            }
            let v = |off: &[i64]| {
                let mut f = node as i64;
                for j in 0..n {
                    f += off[j] * strides[j] as i64;
                }
                joint.values[f as usize]
            };
            let mut hess = vec![vec![0.0f64; n]; n];
            let mut off = [0i64; 4];
            for i in 0..n {
                for j in 0..n {
                    off[..n].fill(0);
                    let (hi, hj) = (grid.spacing(i), grid.spacing(j));
                    let entry = if i == j {
                        off[i] = 1;
                        let p = v(&off[..n]);
                        off[i] = -1;
                        let q = v(&off[..n]);
                        (p - 2.0 * joint.values[node] + q) / (hi * hi)
                    } else {
                        off[i] = 1;
                        off[j] = 1;
                        let pp = v(&off[..n]);
                        off[j] = -1;
                        let pm = v(&off[..n]);
                        off[i] = -1;
                        off[j] = 1;
                        let mp = v(&off[..n]);
                        off[j] = -1;
                        let mm = v(&off[..n]);
                        (pp - pm - mp + mm) / (4.0 * hi * hj)
                    };
                    if !entry.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    hess[i][j] = entry;
                }
            }
            symmetric_eigenvalues(&hess)
                .into_iter()
                .map(|e| e.max(-1e-8))
                .product()
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if residual == f64::NEG_INFINITY {
        return Err(Error::invalid("no interior node admits a full stencil"));
    }
    // normalize a possible negative zero so serialized output is stable
    Ok(residual + 0.0)
}

/// One-sided time derivative at `t = 0` per spatial node, from the two
/// smallest positive time steps.  By convexity in time the difference
/// quotient from the smaller step must not exceed the larger one; a
/// violation beyond rounding tolerance is reported as an error.
pub fn right_derivative(ray: &GeodesicRay) -> Result<GridFn> {
    if ray.times.len() < 3 {
        return Err(Error::invalid(
            "right derivative needs at least three time nodes",
        ));
    }
    let (t0, t1, t2) = (ray.times[0], ray.times[1], ray.times[2]);
    let base = ray.slice(0);
    let s1 = ray.slice(1);
    let s2 = ray.slice(2);
    let tol = 1e-9 * (1.0 + base.max_abs());
    let mut out = Vec::with_capacity(base.values.len());
    for i in 0..base.values.len() {
        let q1 = (s1.values[i] - base.values[i]) / (t1 - t0);
        let q2 = (s2.values[i] - base.values[i]) / (t2 - t0);
        if q1 > q2 + tol {
            return Err(Error::invalid(format!(
                "difference quotients increase as the step shrinks at node {i}: {q1} > {q2}"
            )));
        }
        out.push(q1);
    }
    Ok(GridFn {
        grid: ray.space.clone(),
        values: out,
        tail: None,
    })
}

/// Largest `lambda` on the given level grid for which
/// `min_t (u(t) - lambda t) >= u(0) - tol`: the right derivative of a convex
/// one-variable function that is constant for `t <= 0`.  The boolean flags
/// an empty feasible set (the level-grid minimum is returned in that case).
pub fn convex_sup_lambda(
    ts: &[f64],
    us: &[f64],
    lambdas: &[f64],
    tol: f64,
) -> Result<(f64, bool)> {
    if ts.len() != us.len() || ts.is_empty() || lambdas.is_empty() {
        return Err(Error::invalid("sample and level arrays must be nonempty"));
    }
    let zero = ts
        .iter()
        .position(|&t| t == 0.0)
        .ok_or_else(|| Error::invalid("samples must include t = 0"))?;
    let u0 = us[zero];
    let mut best: Option<f64> = None;
    for &lam in lambdas {
        let v = ts
            .iter()
            .zip(us)
            .map(|(&t, &u)| u - lam * t)
            .fold(f64::INFINITY, f64::min);
        if v >= u0 - tol {
            best = Some(best.map_or(lam, |b: f64| b.max(lam)));
        }
    }
    match best {
        Some(lam) => Ok((lam, false)),
        None => Ok((
            lambdas.iter().copied().fold(f64::INFINITY, f64::min),
            true,
        )),
    }
}

/// Compare the ray against the same object computed as a single
/// joint-variable envelope: the constrained biconjugate of
/// `phi(x) + cap * t` with dual constraint `a_axis - s >= 0` over the prism
/// dual domain.  Returns the supremum difference over interior nodes.
pub fn ray_as_envelope_check(
    phi: &GridFn,
    domain: &Polytope,
    curve: &TestCurve,
    t_max: f64,
    t_points: usize,
    joint_dual_points: usize,
) -> Result<f64> {
    let ray = legendre_ray(phi, domain, curve, t_max, t_points, joint_dual_points)?;
    let jgrid = ray.joint.grid.clone();
    let n = phi.grid.dim();

    // base function phi(x) + cap * t on the joint grid
    let m = ray.times.len();
    let mut values = Vec::with_capacity(jgrid.node_count());
    for x in 0..phi.grid.node_count() {
        for k in 0..m {
            values.push(phi.values[x] + curve.cap * ray.times[k]);
        }
    }
    let base = GridFn {
        grid: jgrid.clone(),
        values,
        tail: None,
    };
    let joint_domain = domain.prism(curve.lambda_min, curve.cap)?;
    let points = if joint_dual_points > 0 {
        joint_dual_points
    } else {
        match jgrid.dim() {
            2 => 257,
            _ => 33,
        }
    };
    let dual = legendre_transform(&base, &joint_domain, points)?;
    let mut coeffs = vec![0.0f64; n + 1];
    coeffs[curve.axis] = 1.0;
    coeffs[n] = -1.0;
    let constraint = DualConstraint::Linear { coeffs, min: 0.0 };
    let direct = crate::legendre::constrained_biconjugate(&dual, &jgrid, &constraint)?;

    // interior comparison
    let mut sup = 0.0f64;
    let mut idx = [0usize; 4];
    let jn = jgrid.dim();
    for node in 0..jgrid.node_count() {
        jgrid.unflat(node, &mut idx[..jn]);
        if (0..jn).any(|j| idx[j] == 0 || idx[j] == jgrid.axis(j).points - 1) {
            continue;
        }
        sup = sup.max((direct.values[node] - ray.joint.values[node]).abs());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::exhaustion;
    use crate::metric::VertexSoftmax;
    use crate::numeric::softplus;

    fn interval_setup() -> (GridFn, Polytope, TestCurve) {
        let grid = BoxGrid::symmetric(1, 20.0, 513).unwrap();
        let p = Polytope::unit_box(1);
        let phi = VertexSoftmax::new(p.clone(), None).unwrap().sample(grid).unwrap();
        let curve = TestCurve::divisorial(&p, 0, 1.0, 1.0 / 256.0).unwrap();
        (phi, p, curve)
    }

    #[test]
    fn full_cap_ray_is_a_translation() {
        let (phi, p, curve) = interval_setup();
        // time step 4h keeps x + t on the grid exactly
        let ray = legendre_ray(&phi, &p, &curve, 2.5, 9, 0).unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in ray.times.iter().enumerate() {
            let slice = ray.slice(k);
            for (i, &x) in phi.grid.coords(0).iter().enumerate() {
                if x + t > 20.0 || x.abs() > 15.0 {
                    continue;
                }
                let want = softplus(x + t);
                worst = worst.max((slice.values[i] - want).abs());
            }
        }
        assert!(worst < 0.02, "translation mismatch {worst}");
    }

    #[test]
    fn ray_starts_at_phi_and_grows_convexly() {
        let (phi, p, curve) = interval_setup();
        let ray = legendre_ray(&phi, &p, &curve, 2.5, 9, 0).unwrap();
        let base = ray.slice(0);
        let h = phi.grid.spacing(0);
        assert!(base.sup_diff(&phi) <= 2.0 * h, "slice at t=0 off by {}", base.sup_diff(&phi));
        // non-decreasing and midpoint convex in t at every spatial node
        let m = ray.times.len();
        for x in 0..phi.grid.node_count() {
            let series = &ray.joint.values[x * m..(x + 1) * m];
            for k in 1..m {
                assert!(series[k] + 1e-12 >= series[k - 1], "decreasing in t");
            }
            for k in 1..m - 1 {
                assert!(
                    series[k - 1] + series[k + 1] - 2.0 * series[k] >= -1e-9,
                    "not convex in t"
                );
            }
        }
        ray.joint.check_convex().unwrap();
    }

    #[test]
    fn dense_level_oracle_agrees() {
        let (phi, p, curve) = interval_setup();
        let fine = TestCurve::divisorial(&p, 0, 1.0, 1.0 / 2560.0).unwrap();
        let a = legendre_ray(&phi, &p, &curve, 2.5, 9, 0).unwrap();
        let b = legendre_ray(&phi, &p, &fine, 2.5, 9, 0).unwrap();
        let va = a.joint.eval_interp(&[-1.0, 1.0]);
        let vb = b.joint.eval_interp(&[-1.0, 1.0]);
        assert!(
            (va - vb).abs() <= 1.0 / 256.0,
            "level-refinement oracle gap {}",
            (va - vb).abs()
        );
    }

    #[test]
    fn degeneracy_residual_is_small_and_affine_is_exact() {
        let (phi, p, curve) = interval_setup();
        let ray = legendre_ray(&phi, &p, &curve, 2.5, 9, 0).unwrap();
        let res = ray.hmae_residual().unwrap();
        let h = phi.grid.spacing(0);
        assert!(res <= 10.0 * h, "residual {res}");
        assert!(res >= -1e-8);

        // affine joint data is flat in every direction; the residual is pure
        // rounding noise from the difference stencils
        let jg = joint_grid(&phi.grid, 1.0, 5).unwrap();
        let affine = GridFn::sample(jg, None, |z| 0.3 * z[0] + 0.7 * z[1] - 1.0);
        assert!(hmae_residual(&affine).unwrap().abs() <= 1e-24);
    }

    #[test]
    fn right_derivative_matches_exhaustion() {
        let (phi, p, curve) = interval_setup();
        let ray = legendre_ray(&phi, &p, &curve, 2.5, 9, 0).unwrap();
        let rd = right_derivative(&ray).unwrap();
        let hfun = exhaustion(&phi, &p, 0, curve.dlam).unwrap();
        let dt = ray.times[1];
        let mut worst = 0.0f64;
        for (i, &x) in phi.grid.coords(0).iter().enumerate() {
            if x.abs() > 10.0 {
                continue;
            }
            worst = worst.max((rd.values[i] - hfun.values.values[i]).abs());
        }
        assert!(worst <= dt, "right derivative vs exhaustion gap {worst}");
    }

    #[test]
    fn affine_time_dependence_returns_the_slope() {
        let (phi, _p, curve) = interval_setup();
        let jg = joint_grid(&phi.grid, 1.0, 5).unwrap();
        let mut values = Vec::new();
        for x in 0..phi.grid.node_count() {
            for k in 0..5 {
                let t = jg.coords(1)[k];
                values.push(phi.values[x] + 1.5 * t);
            }
        }
        let ray = GeodesicRay {
            joint: GridFn {
                grid: jg,
                values,
                tail: None,
            },
            space: phi.grid.clone(),
            times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            curve,
        };
        let rd = right_derivative(&ray).unwrap();
        for &v in &rd.values {
            assert!((v - 1.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn sup_lambda_recovers_right_derivatives() {
        let lambdas: Vec<f64> = (0..=768).map(|k| k as f64 / 256.0).collect();
        let ts: Vec<f64> = (-128..=128).map(|k| k as f64 / 64.0).collect();

        let kink: Vec<f64> = ts.iter().map(|&t| (2.0 * t).max(0.0)).collect();
        let (lam, flag) = convex_sup_lambda(&ts, &kink, &lambdas, 1e-12).unwrap();
        assert!(!flag);
        assert_eq!(lam, 2.0);

        // the recoverable slope is floored by the first chord u(dt)/dt, so a
        // one-sided quadratic reads back dt/2 rather than an exact zero
        let quad: Vec<f64> = ts.iter().map(|&t| if t > 0.0 { t * t / 2.0 } else { 0.0 }).collect();
        let (lam, flag) = convex_sup_lambda(&ts, &quad, &lambdas, 1e-12).unwrap();
        assert!(!flag);
        assert_eq!(lam, 1.0 / 128.0);

        let ln2 = std::f64::consts::LN_2;
        let soft: Vec<f64> = ts
            .iter()
            .map(|&t| if t > 0.0 { softplus(3.0 * t) - ln2 } else { 0.0 })
            .collect();
        let (lam, flag) = convex_sup_lambda(&ts, &soft, &lambdas, 1e-9).unwrap();
        assert!(!flag);
        assert!((lam - 1.5).abs() <= 0.02, "soft slope {lam}");
    }

    #[test]
    fn joint_envelope_formulation_agrees_with_the_ray() {
        let (phi, p, curve) = interval_setup();
        let sup = ray_as_envelope_check(&phi, &p, &curve, 2.5, 9, 0).unwrap();
        assert!(sup <= 0.02, "pipelines disagree by {sup}");
    }
}
