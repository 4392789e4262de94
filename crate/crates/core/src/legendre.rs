//! Discrete Legendre transforms on box grids with polytope dual domains.
//!
//! The transform is the direct constrained one: for a dual node `a` inside
//! the domain polytope, `f*(a) = sup_x <a, x> - f(x)` over the grid nodes,
//! plus tail candidates along the outward axis rays when the primal function
//! carries a polytope tail model.  Feasibility of dual nodes is decided in
//! exact rational arithmetic so that filtration boundaries `a_j >= lambda`
//! land exactly on dual grid levels.

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridFn};
use crate::polytope::{rat_from_f64, rat_to_f64, Polytope, Rat, SliceConstraint};
use rayon::prelude::*;

/// Legendre transform values over a bounding-box grid of the dual domain.
#[derive(Debug, Clone)]
pub struct DualFn {
    pub domain: Polytope,
    pub grid: BoxGrid,
    /// Transform values; `-inf` at infeasible nodes.
    pub values: Vec<f64>,
    /// Exact-membership mask for the domain polytope.
    pub feasible: Vec<bool>,
}

/// Additional restriction of the dual domain.
#[derive(Debug, Clone)]
pub enum DualConstraint {
    /// `a_axis >= lambda`
    Slice(SliceConstraint),
    /// `<coeffs, a> >= min`
    Linear { coeffs: Vec<f64>, min: f64 },
}

impl DualConstraint {
    pub fn slice(axis: usize, lambda: f64) -> Result<Self> {
        Ok(DualConstraint::Slice(SliceConstraint::new(axis, lambda)?))
    }

    fn admits_exact(&self, a: &[Rat]) -> Result<bool> {
        match self {
            DualConstraint::Slice(s) => Ok(a[s.axis] >= s.lambda_exact()),
            DualConstraint::Linear { coeffs, min } => {
                let mut acc = rat_from_f64(0.0)?;
                for (c, x) in coeffs.iter().zip(a) {
                    acc += rat_from_f64(*c)? * x;
                }
                Ok(acc >= rat_from_f64(*min)?)
            }
        }
    }
}

/// Exact rational coordinates of every node along every axis.
pub fn exact_axis_coords(grid: &BoxGrid) -> Result<Vec<Vec<Rat>>> {
    (0..grid.dim())
        .map(|j| {
            grid.coords(j)
                .iter()
                .copied()
                .map(rat_from_f64)
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

impl DualFn {
    pub fn feasible_count(&self) -> usize {
        self.feasible.iter().filter(|&&b| b).count()
    }

    /// Node coordinates as exact rationals, one entry per axis.
    pub fn exact_coords(&self) -> Result<Vec<Vec<Rat>>> {
        exact_axis_coords(&self.grid)
    }

    /// Feasibility mask further restricted by a constraint, decided exactly.
    pub fn constrained_mask(&self, constraint: &DualConstraint) -> Result<Vec<bool>> {
        let exact = self.exact_coords()?;
        let n = self.grid.dim();
        let mut mask = vec![false; self.feasible.len()];
        let mut idx = [0usize; 4];
        let mut a = Vec::with_capacity(n);
        for node in 0..self.feasible.len() {
            if !self.feasible[node] {
                continue;
            }
            self.grid.unflat(node, &mut idx[..n]);
            a.clear();
            for j in 0..n {
                a.push(exact[j][idx[j]].clone());
            }
            mask[node] = constraint.admits_exact(&a)?;
        }
        Ok(mask)
    }

    /// Discrete convexity restricted to stencils whose three nodes are all
    /// feasible.
    pub fn check_convex_on_domain(&self) -> Result<()> {
        let masked = GridFn::from_values(
            self.grid.clone(),
            self.values.clone(),
            None,
        )?;
        let dirs = self.grid.stencil_directions();
        let tol = 1e-10 * (1.0 + masked.max_abs());
        for center in 0..self.grid.node_count() {
            if !self.feasible[center] {
                continue;
            }
            for dir in &dirs {
                // second_difference returns None when a neighbor is -inf,
                // which covers infeasible nodes as well
                if let Some(sd) = masked.second_difference(center, dir) {
                    let step_sq: f64 = dir
                        .iter()
                        .enumerate()
                        .map(|(j, &d)| {
                            let s = d as f64 * self.grid.spacing(j);
                            s * s
                        })
                        .sum();
                    if sd * step_sq < -tol {
                        return Err(Error::invalid(format!(
                            "dual function not convex at node {center} along {dir:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bounding-box grid over the dual domain with `points` nodes per axis.
pub fn dual_grid(domain: &Polytope, points: usize) -> Result<BoxGrid> {
    let axes = (0..domain.dim())
        .map(|j| {
            let (lo, hi) = domain.axis_range(j);
            crate::grid::AxisSpec::new(rat_to_f64(&lo), rat_to_f64(&hi), points)
        })
        .collect::<Result<_>>()?;
    BoxGrid::new(axes)
}

/// Face nodes of the grid: flat index together with the outward axis and sign.
fn face_nodes(grid: &BoxGrid) -> Vec<(usize, usize, f64)> {
    let n = grid.dim();
    let mut out = Vec::new();
    let mut idx = [0usize; 4];
    for node in 0..grid.node_count() {
        grid.unflat(node, &mut idx[..n]);
        for j in 0..n {
            if idx[j] == 0 {
                out.push((node, j, -1.0));
            }
            if idx[j] == grid.axis(j).points - 1 {
                out.push((node, j, 1.0));
            }
        }
    }
    out
}

/// Best value along the outward ray `x_F + s e` of
/// `<a, x> - h_tail(x) - c_F` for `s >= 0`, where `h_tail` is the support
/// function of the tail polytope.  The function is concave piecewise linear
/// in `s`, so the maximum sits at `s = 0` or at a breakpoint.
fn tail_ray_candidate(
    a: &[f64],
    x_face: &[f64],
    axis: usize,
    sign: f64,
    tail: &Polytope,
    c_face: f64,
) -> f64 {
    let verts = tail.vertices_f64();
    // line v: intercept <v, x_F>, slope sign * v_axis
    let lines: Vec<(f64, f64)> = verts
        .iter()
        .map(|v| {
            let b: f64 = v.iter().zip(x_face).map(|(p, q)| p * q).sum();
            (b, sign * v[axis])
        })
        .collect();
    let a_dot: f64 = a.iter().zip(x_face).map(|(p, q)| p * q).sum();
    let a_slope = sign * a[axis];
    let eval = |s: f64| -> f64 {
        let h = lines
            .iter()
            .map(|(b, m)| b + m * s)
            .fold(f64::NEG_INFINITY, f64::max);
        a_dot + a_slope * s - h - c_face
    };
    let mut best = eval(0.0);
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (b1, m1) = lines[i];
            let (b2, m2) = lines[j];
            if m1 == m2 {
                continue;
            }
            let s = (b1 - b2) / (m2 - m1);
            if s > 0.0 && s.is_finite() {
                best = best.max(eval(s));
            }
        }
    }
    best
}

/// Direct constrained Legendre transform of `f` over the dual domain.
///
/// A grid function that is `-inf` everywhere yields an empty `DualFn`
/// (no feasible nodes).
pub fn legendre_transform(f: &GridFn, domain: &Polytope, points: usize) -> Result<DualFn> {
    if domain.dim() != f.grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.grid.dim(),
            got: domain.dim(),
        });
    }
    let dgrid = dual_grid(domain, points)?;
    let n = f.grid.dim();

    // exact feasibility of dual nodes
    let exact = exact_axis_coords(&dgrid)?;
    let mut feasible = vec![false; dgrid.node_count()];
    if !f.is_all_sentinel() {
        let mut idx = [0usize; 4];
        let mut a = Vec::with_capacity(n);
        for node in 0..dgrid.node_count() {
            dgrid.unflat(node, &mut idx[..n]);
            a.clear();
            for j in 0..n {
                a.push(exact[j][idx[j]].clone());
            }
            feasible[node] = domain.contains(&a);
        }
    }

    // flat coordinate table of the primal grid
    let mut coords = vec![0.0f64; f.grid.node_count() * n];
    {
        let mut x = Vec::new();
        for i in 0..f.grid.node_count() {
            f.grid.node(i, &mut x);
            coords[i * n..(i + 1) * n].copy_from_slice(&x);
        }
    }

    // tail data: face node, axis, sign, constant offset f - h_tail
    let tail_faces: Vec<(Vec<f64>, usize, f64, f64)> = match &f.tail {
        Some(tail) => face_nodes(&f.grid)
            .into_iter()
            .filter_map(|(node, axis, sign)| {
                let v = f.values[node];
                if v == f64::NEG_INFINITY {
                    return None;
                }
                let x = f.grid.node_vec(node);
                let c = v - tail.support(&x);
                Some((x, axis, sign, c))
            })
            .collect(),
        None => Vec::new(),
    };

    let fvals = &f.values;
    let tail = f.tail.as_ref();
    let values: Vec<f64> = (0..dgrid.node_count())
        .into_par_iter()
        .map(|anode| {
            if !feasible[anode] {
                return f64::NEG_INFINITY;
            }
            let mut aidx = [0usize; 4];
            dgrid.unflat(anode, &mut aidx[..n]);
            let mut a = [0.0f64; 4];
            for j in 0..n {
                a[j] = dgrid.coords(j)[aidx[j]];
            }
            let mut best = f64::NEG_INFINITY;
            for (i, &fv) in fvals.iter().enumerate() {
                if fv == f64::NEG_INFINITY {
                    continue;
                }
                let x = &coords[i * n..(i + 1) * n];
                let mut d = 0.0;
                for j in 0..n {
                    d += a[j] * x[j];
                }
                let cand = d - fv;
                if cand > best {
                    best = cand;
                }
            }
            if let Some(tail) = tail {
                for (x, axis, sign, c) in &tail_faces {
                    let cand = tail_ray_candidate(&a[..n], x, *axis, *sign, tail, *c);
                    if cand > best {
                        best = cand;
                    }
                }
            }
            best
        })
        .collect();

    Ok(DualFn {
        domain: domain.clone(),
        grid: dgrid,
        values,
        feasible,
    })
}

fn biconjugate_masked(dual: &DualFn, grid: &BoxGrid, mask: &[bool]) -> GridFn {
    let n = grid.dim();
    let dn = dual.grid.dim();
    debug_assert_eq!(n, dn);
    // flat dual coordinates restricted to admitted nodes
    let mut anodes: Vec<(f64, [f64; 4])> = Vec::new();
    {
        let mut idx = [0usize; 4];
        for node in 0..dual.grid.node_count() {
            if !mask[node] {
                continue;
            }
            dual.grid.unflat(node, &mut idx[..n]);
            let mut a = [0.0f64; 4];
            for j in 0..n {
                a[j] = dual.grid.coords(j)[idx[j]];
            }
            anodes.push((dual.values[node], a));
        }
    }
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let x = grid.node_vec(i);
            let mut best = f64::NEG_INFINITY;
            for (fs, a) in &anodes {
                let mut d = 0.0;
                for j in 0..n {
                    d += a[j] * x[j];
                }
                let cand = d - fs;
                if cand > best {
                    best = cand;
                }
            }
            best
        })
        .collect();
    GridFn {
        grid: grid.clone(),
        values,
        tail: Some(dual.domain.clone()),
    }
}

/// Biconjugate over the full feasible dual set: the discrete convex
/// regularization of the original function.
pub fn biconjugate(dual: &DualFn, grid: &BoxGrid) -> GridFn {
    let mut f = biconjugate_masked(dual, grid, &dual.feasible);
    if f.is_all_sentinel() {
        f.tail = None;
    }
    f
}

/// Biconjugate restricted to dual nodes admitted by `constraint`.
/// Errors when the constraint removes every feasible node.
pub fn constrained_biconjugate(
    dual: &DualFn,
    grid: &BoxGrid,
    constraint: &DualConstraint,
) -> Result<GridFn> {
    let mask = dual.constrained_mask(constraint)?;
    if mask.iter().all(|&b| !b) {
        return Err(Error::EmptyDual(
            "constraint removes every feasible dual node".into(),
        ));
    }
    let mut f = biconjugate_masked(dual, grid, &mask);
    // tighten the tail model to the constrained dual region when possible
    if let DualConstraint::Slice(s) = constraint {
        f.tail = dual
            .domain
            .intersect_lower_bound(s.axis, s.lambda)
            .or_else(|| Some(dual.domain.clone()));
    }
    Ok(f)
}

/// Smallest Fenchel-Young residual `f(x) + f*(a) - <a, x>` over all grid
/// nodes `x` (subsampled by `stride`) and feasible dual nodes.  Nonnegative
/// up to rounding by construction of the discrete transform.
pub fn fenchel_young_min(f: &GridFn, dual: &DualFn, stride: usize) -> f64 {
    let n = f.grid.dim();
    let mut min = f64::INFINITY;
    let mut aidx = [0usize; 4];
    for anode in 0..dual.grid.node_count() {
        if !dual.feasible[anode] {
            continue;
        }
        dual.grid.unflat(anode, &mut aidx[..n]);
        let mut a = [0.0f64; 4];
        for j in 0..n {
            a[j] = dual.grid.coords(j)[aidx[j]];
        }
        let fs = dual.values[anode];
        let mut x = Vec::new();
        for i in (0..f.grid.node_count()).step_by(stride.max(1)) {
            let fv = f.values[i];
            if fv == f64::NEG_INFINITY {
                continue;
            }
            f.grid.node(i, &mut x);
            let mut d = 0.0;
            for j in 0..n {
                d += a[j] * x[j];
            }
            min = min.min(fv + fs - d);
        }
    }
    min
}

/// Envelope values for a whole ascending family of slice thresholds in one
/// pass: dual nodes are bucketed by the largest threshold they satisfy and
/// merged from the top level down with a running maximum per primal node.
pub struct LevelSweep {
    /// Ascending thresholds; level `l` corresponds to `a_axis >= lambdas[l]`.
    pub lambdas: Vec<f64>,
    /// For each dual node, the largest level it belongs to (`None` if below
    /// the first threshold or infeasible).
    buckets: Vec<Vec<usize>>,
    anodes: Vec<(f64, [f64; 4])>,
    dim: usize,
}

impl LevelSweep {
    pub fn new(dual: &DualFn, axis: usize, lambdas: &[f64]) -> Result<Self> {
        if axis >= dual.grid.dim() {
            return Err(Error::invalid("sweep axis out of range"));
        }
        if lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("thresholds must be strictly ascending"));
        }
        let exact_lams: Vec<Rat> = lambdas
            .iter()
            .copied()
            .map(rat_from_f64)
            .collect::<Result<_>>()?;
        let exact = dual.exact_coords()?;
        let n = dual.grid.dim();
        let mut anodes = Vec::new();
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); lambdas.len()];
        let mut idx = [0usize; 4];
        for node in 0..dual.grid.node_count() {
            if !dual.feasible[node] {
                continue;
            }
            dual.grid.unflat(node, &mut idx[..n]);
            let aj = &exact[axis][idx[axis]];
            // top level: the largest l with lambdas[l] <= a_axis
            let top = exact_lams.partition_point(|lam| lam <= aj);
            if top == 0 {
                continue;
            }
            let mut a = [0.0f64; 4];
            for j in 0..n {
                a[j] = dual.grid.coords(j)[idx[j]];
            }
            buckets[top - 1].push(anodes.len());
            anodes.push((dual.values[node], a));
        }
        Ok(LevelSweep {
            lambdas: lambdas.to_vec(),
            buckets,
            anodes,
            dim: n,
        })
    }

    /// Envelope value at `x` for every level, written into `out` (one entry
    /// per threshold, same order).  Entries for levels whose dual set is
    /// empty are `-inf`.
    fn values_at(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut running = f64::NEG_INFINITY;
        for l in (0..self.lambdas.len()).rev() {
            for &k in &self.buckets[l] {
                let (fs, a) = &self.anodes[k];
                let mut d = 0.0;
                for j in 0..n {
                    d += a[j] * x[j];
                }
                let cand = d - fs;
                if cand > running {
                    running = cand;
                }
            }
            out[l] = running;
        }
    }

    /// Materialize the envelope of every level on `grid`.
    pub fn envelopes(&self, grid: &BoxGrid) -> Vec<GridFn> {
        let levels = self.lambdas.len();
        let rows: Vec<Vec<f64>> = (0..grid.node_count())
            .into_par_iter()
            .map_init(
                || vec![0.0f64; levels],
                |scratch, i| {
                    let x = grid.node_vec(i);
                    self.values_at(&x, scratch);
                    scratch.clone()
                },
            )
            .collect();
        (0..levels)
            .map(|l| GridFn {
                grid: grid.clone(),
                values: rows.iter().map(|r| r[l]).collect(),
                tail: None,
            })
            .collect()
    }

    /// For every node of `grid`: the largest level still in contact with the
    /// level-0 envelope (within `eps`), together with the level-0 envelope
    /// itself.  Contact is decided against the level-0 value, which absorbs
    /// the discretization deficit of the unconstrained biconjugate.
    pub fn contact_top(&self, grid: &BoxGrid, eps: f64) -> (Vec<usize>, GridFn) {
        let levels = self.lambdas.len();
        let pairs: Vec<(usize, f64)> = (0..grid.node_count())
            .into_par_iter()
            .map_init(
                || vec![0.0f64; levels],
                |scratch, i| {
                    let x = grid.node_vec(i);
                    self.values_at(&x, scratch);
                    let base = scratch[0];
                    let mut top = 0;
                    for l in (0..levels).rev() {
                        if scratch[l] >= base - eps {
                            top = l;
                            break;
                        }
                    }
                    (top, base)
                },
            )
            .collect();
        let tops = pairs.iter().map(|p| p.0).collect();
        let base = GridFn {
            grid: grid.clone(),
            values: pairs.iter().map(|p| p.1).collect(),
            tail: None,
        };
        (tops, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisSpec;
    use crate::metric::VertexSoftmax;
    use crate::numeric::softplus;
    use crate::polytope::Polytope;

    fn softplus_fn(points: usize) -> GridFn {
        let grid = BoxGrid::symmetric(1, 20.0, points).unwrap();
        VertexSoftmax::new(Polytope::unit_box(1), None)
            .unwrap()
            .sample(grid)
            .unwrap()
    }

    #[test]
    fn transform_at_one_half_is_minus_ln_two() {
        let f = softplus_fn(513);
        let dual = legendre_transform(&f, &Polytope::unit_box(1), 257).unwrap();
        // dual node 128 sits exactly at a = 1/2
        assert_eq!(dual.grid.coords(0)[128], 0.5);
        let got = dual.values[128];

        // independent oracle 1: closed form a ln a + (1-a) ln(1-a)
        let a: f64 = 0.5;
        let closed = a * a.ln() + (1.0 - a) * (1.0 - a).ln();
        // independent oracle 2: golden-section maximization of a x - softplus(x)
        let (mut lo, mut hi) = (-20.0f64, 20.0f64);
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        for _ in 0..200 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if 0.5 * m1 - softplus(m1) < 0.5 * m2 - softplus(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let numeric = 0.5 * lo - softplus(lo);

        assert!((closed - (-std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((numeric - closed).abs() < 1e-10);
        assert!((got - closed).abs() < 1e-6, "got {got}, want {closed}");
    }

    #[test]
    fn involution_error_is_grid_scale() {
        for points in [257usize, 513] {
            let f = softplus_fn(points);
            let h = f.grid.spacing(0);
            let dual = legendre_transform(&f, &Polytope::unit_box(1), 257).unwrap();
            let back = biconjugate(&dual, &f.grid);
            let err = back.sup_diff(&f);
            assert!(err <= 2.0 * h, "involution error {err} > 2h at {points} points");
            // biconjugate never exceeds the original at the nodes
            for (b, v) in back.values.iter().zip(&f.values) {
                assert!(b - v <= 1e-12);
            }
        }
    }

    #[test]
    fn double_well_biconjugate_is_the_convex_hull() {
        let grid = BoxGrid::new(vec![AxisSpec::new(-2.0, 2.0, 129).unwrap()]).unwrap();
        let f = GridFn::sample(grid.clone(), None, |x| {
            let t = x[0] * x[0] - 1.0;
            t * t
        });
        let domain = Polytope::from_f64_vertices(1, &[vec![-24.0], vec![24.0]]).unwrap();
        let dual = legendre_transform(&f, &domain, 513).unwrap();
        let hull = biconjugate(&dual, &grid);

        // oracle: lower convex hull of the sample points by monotone chain
        let xs: Vec<f64> = grid.coords(0).to_vec();
        let mut chain: Vec<(f64, f64)> = Vec::new();
        for (&x, &y) in xs.iter().zip(&f.values) {
            while chain.len() >= 2 {
                let (x1, y1) = chain[chain.len() - 2];
                let (x2, y2) = chain[chain.len() - 1];
                if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0 {
                    chain.pop();
                } else {
                    break;
                }
            }
            chain.push((x, y));
        }
        let hull_at = |x: f64| -> f64 {
            let k = chain.partition_point(|p| p.0 <= x);
            if k == 0 {
                return chain[0].1;
            }
            if k >= chain.len() {
                return chain[chain.len() - 1].1;
            }
            let (x1, y1) = chain[k - 1];
            let (x2, y2) = chain[k];
            y1 + (y2 - y1) * (x - x1) / (x2 - x1)
        };

        let mut sup = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            sup = sup.max((hull.values[i] - hull_at(x)).abs());
        }
        assert!(sup < 1e-2, "hull mismatch {sup}");
        // flat segment at zero over [-1, 1]
        for (i, &x) in xs.iter().enumerate() {
            if (-1.0..=1.0).contains(&x) {
                assert!(hull.values[i].abs() < 1e-2);
                assert!(hull.values[i] <= f.values[i] + 1e-12);
            }
        }
    }

    #[test]
    fn fenchel_young_holds_at_machine_precision() {
        let f = softplus_fn(257);
        let dual = legendre_transform(&f, &Polytope::unit_box(1), 129).unwrap();
        let min = fenchel_young_min(&f, &dual, 3);
        assert!(min >= -1e-12, "Fenchel-Young violated: {min}");
    }

    #[test]
    fn transform_reverses_order() {
        let grid = BoxGrid::symmetric(1, 20.0, 257).unwrap();
        let f = GridFn::sample(grid.clone(), None, |x| softplus(x[0]));
        let g = GridFn::sample(grid, None, |x| softplus(x[0]) + 0.3);
        let domain = Polytope::unit_box(1);
        let fd = legendre_transform(&f, &domain, 129).unwrap();
        let gd = legendre_transform(&g, &domain, 129).unwrap();
        for node in 0..fd.values.len() {
            if fd.feasible[node] {
                assert!(fd.values[node] >= gd.values[node] - 1e-12);
            }
        }
    }

    #[test]
    fn all_sentinel_input_gives_empty_dual() {
        let grid = BoxGrid::symmetric(1, 5.0, 17).unwrap();
        let f = GridFn::constant(grid.clone(), f64::NEG_INFINITY);
        let dual = legendre_transform(&f, &Polytope::unit_box(1), 17).unwrap();
        assert_eq!(dual.feasible_count(), 0);
        let back = biconjugate(&dual, &grid);
        assert!(back.is_all_sentinel());
        assert!(back.tail.is_none());
    }

    #[test]
    fn disjoint_constraint_is_an_error() {
        let f = softplus_fn(129);
        let dual = legendre_transform(&f, &Polytope::unit_box(1), 65).unwrap();
        let constraint = DualConstraint::slice(0, 2.5).unwrap();
        match constrained_biconjugate(&dual, &f.grid, &constraint) {
            Err(Error::EmptyDual(_)) => {}
            other => panic!("expected empty-dual error, got {other:?}"),
        }
    }

    #[test]
    fn scaling_identity_for_small_integer_factors() {
        // (k phi)* over k Delta at k a equals k phi*(a), so the constrained
        // biconjugates satisfy env_{k phi, k lambda} = k env_{phi, lambda}
        let base = softplus_fn(257);
        let domain = Polytope::unit_box(1);
        for k in [2.0f64, 3.0] {
            let scaled = GridFn {
                grid: base.grid.clone(),
                values: base.values.iter().map(|v| k * v).collect(),
                tail: Some(
                    Polytope::from_f64_vertices(1, &[vec![0.0], vec![k]]).unwrap(),
                ),
            };
            let sdomain = Polytope::from_f64_vertices(1, &[vec![0.0], vec![k]]).unwrap();
            let d1 = legendre_transform(&base, &domain, 257).unwrap();
            let dk = legendre_transform(&scaled, &sdomain, 257).unwrap();
            let c1 = DualConstraint::slice(0, 0.5).unwrap();
            let ck = DualConstraint::slice(0, 0.5 * k).unwrap();
            let e1 = constrained_biconjugate(&d1, &base.grid, &c1).unwrap();
            let ek = constrained_biconjugate(&dk, &base.grid, &ck).unwrap();
            for (a, b) in e1.values.iter().zip(&ek.values) {
                let scale = 1.0 + a.abs().max(b.abs());
                assert!(
                    (k * a - b).abs() <= 1e-9 * scale,
                    "scaling identity off: {a} vs {b} at k = {k}"
                );
            }
        }
    }

    #[test]
    fn dual_is_convex_on_its_domain() {
        let f = softplus_fn(257);
        let dual = legendre_transform(&f, &Polytope::unit_box(1), 129).unwrap();
        dual.check_convex_on_domain().unwrap();
    }

    #[test]
    fn sweep_matches_direct_constrained_biconjugate() {
        let f = softplus_fn(257);
        let dual = legendre_transform(&f, &Polytope::unit_box(1), 129).unwrap();
        let lambdas: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let sweep = LevelSweep::new(&dual, 0, &lambdas).unwrap();
        let levels = sweep.envelopes(&f.grid);
        for (l, lam) in lambdas.iter().enumerate() {
            let c = DualConstraint::slice(0, *lam).unwrap();
            let direct = constrained_biconjugate(&dual, &f.grid, &c).unwrap();
            assert_eq!(
                levels[l].values, direct.values,
                "sweep level {l} deviates from the direct computation"
            );
        }
    }
}
