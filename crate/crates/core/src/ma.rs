//! Monge-Ampere cell measures of convex grid functions.
//!
//! The measure of a cell is the Lebesgue volume of the local subdifferential
//! image: the convex hull of the forward-difference gradients at the cell's
//! corners (backward differences at the top faces).  For a convex function
//! the node-to-gradient map is monotone, so neighboring hulls tile the
//! gradient range without overlap and the cell masses sum to its volume.
//! When the function carries a tail polytope, each hull is clipped to it,
//! which removes the O(h) spill of boundary cells outside the gradient range.

use crate::error::{Error, Result};
use crate::grid::GridFn;
use rayon::prelude::*;

/// Nonnegative mass per grid cell, in lexicographic cell order.
#[derive(Debug, Clone)]
pub struct CellMeasure {
    pub grid: crate::grid::BoxGrid,
    pub masses: Vec<f64>,
    pub total: f64,
}

impl CellMeasure {
    /// Sum of masses over cells selected by `mask` (one flag per cell).
    pub fn restricted_total(&self, mask: &[bool]) -> Result<f64> {
        if mask.len() != self.masses.len() {
            return Err(Error::invalid("cell mask length mismatch"));
        }
        Ok(self
            .masses
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v)
            .sum())
    }
}

/// Forward-difference gradient at every node; the difference turns backward
/// on the top face of each axis.  Entries touching a sentinel are NaN.
fn forward_gradients(f: &GridFn) -> Vec<[f64; 2]> {
    let n = f.grid.dim();
    let mut out = vec![[f64::NAN; 2]; f.grid.node_count()];
    let mut idx = [0usize; 4];
    let mut strides = [0usize; 4];
    {
        let mut s = 1usize;
        for j in (0..n).rev() {
            strides[j] = s;
            s *= f.grid.axis(j).points;
        }
    }
    for node in 0..f.grid.node_count() {
        f.grid.unflat(node, &mut idx[..n]);
        for j in 0..n {
            let h = f.grid.spacing(j);
            let top = idx[j] == f.grid.axis(j).points - 1;
            let (a, b) = if top {
                (f.values[node], f.values[node - strides[j]])
            } else {
                (f.values[node + strides[j]], f.values[node])
            };
            if a.is_finite() && b.is_finite() {
                out[node][j] = (a - b) / h;
            }
        }
    }
    out
}

/// Convex hull of a small planar point set (monotone chain), counterclockwise.
fn hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    pts.dedup_by(|p, q| (p[0] - q[0]).abs() < 1e-15 && (p[1] - q[1]).abs() < 1e-15);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Clip a counterclockwise polygon against `<normal, p> <= offset`.
fn clip_polygon(poly: &[[f64; 2]], normal: &[f64], offset: f64) -> Vec<[f64; 2]> {
    if poly.is_empty() {
        return Vec::new();
    }
    let side = |p: &[f64; 2]| normal[0] * p[0] + normal[1] * p[1] - offset;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (sc, sn) = (side(&cur), side(&next));
        if sc <= 0.0 {
            out.push(cur);
        }
        if (sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0) {
            let t = sc / (sc - sn);
            out.push([
                cur[0] + t * (next[0] - cur[0]),
                cur[1] + t * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        twice += p[0] * q[1] - p[1] * q[0];
    }
    (0.5 * twice).max(0.0)
}

/// Monge-Ampere measure of a convex grid function, one mass per cell.
///
/// Rejects non-convex input with a convexity-violation report.  Supports
/// dimensions 1 and 2; higher dimensions return an unsupported error.
pub fn ma_measure(f: &GridFn) -> Result<CellMeasure> {
    f.check_convex()?;
    let n = f.grid.dim();
    if n > 2 {
        return Err(Error::Unsupported(
            "Monge-Ampere cell measures are implemented for dimensions 1 and 2".into(),
        ));
    }
    let grads = forward_gradients(f);
    let clip: Option<Vec<(Vec<f64>, f64)>> = f.tail.as_ref().map(|t| t.halfspaces_f64());
    let clip_range_1d: Option<(f64, f64)> = f.tail.as_ref().map(|t| {
        let (lo, hi) = t.axis_range(0);
        (
            crate::polytope::rat_to_f64(&lo),
            crate::polytope::rat_to_f64(&hi),
        )
    });

    let grid = &f.grid;
    let masses: Vec<f64> = (0..grid.cell_count())
        .into_par_iter()
        .map_init(Vec::new, |corners, cell| {
            grid.cell_corners(cell, corners);
            match n {
                1 => {
                    let g0 = grads[corners[0]][0];
                    let g1 = grads[corners[1]][0];
                    if !(g0.is_finite() && g1.is_finite()) {
                        return 0.0;
                    }
                    let (mut lo, mut hi) = (g0.min(g1), g0.max(g1));
                    if let Some((clo, chi)) = clip_range_1d {
                        lo = lo.max(clo);
                        hi = hi.min(chi);
                    }
                    (hi - lo).max(0.0)
                }
                _ => {
                    let mut pts = [[0.0f64; 2]; 4];
                    for (k, &c) in corners.iter().enumerate() {
                        let g = grads[c];
                        if !(g[0].is_finite() && g[1].is_finite()) {
                            return 0.0;
                        }
                        pts[k] = g;
                    }
                    let mut hull = hull_2d(&pts);
                    if let Some(planes) = &clip {
                        for (normal, offset) in planes {
                            hull = clip_polygon(&hull, normal, *offset);
                            if hull.is_empty() {
                                break;
                            }
                        }
                    }
                    polygon_area(&hull)
                }
            }
        })
        .collect();
    let total = masses.iter().sum();
    Ok(CellMeasure {
        grid: f.grid.clone(),
        masses,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AxisSpec, BoxGrid};
    use crate::metric::VertexSoftmax;
    use crate::numeric::{logistic, softplus};
    use crate::polytope::Polytope;

    #[test]
    fn total_mass_matches_slope_range_in_one_dim() {
        let grid = BoxGrid::symmetric(1, 20.0, 513).unwrap();
        let f = VertexSoftmax::new(Polytope::unit_box(1), None)
            .unwrap()
            .sample(grid)
            .unwrap();
        let m = ma_measure(&f).unwrap();
        // oracle: integral of the second derivative over the box
        let expect = logistic(20.0) - logistic(-20.0);
        assert!((m.total - expect).abs() < 1e-9, "total {} vs {expect}", m.total);
        assert!((m.total - 1.0).abs() < 0.01);
        assert!(m.masses.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn kink_mass_sits_in_the_kink_cell() {
        let grid = BoxGrid::symmetric(1, 20.0, 513).unwrap();
        let f = GridFn::sample(grid.clone(), Some(Polytope::unit_box(1)), |x| {
            x[0].max(0.0)
        });
        let m = ma_measure(&f).unwrap();
        assert!((m.total - 1.0).abs() < 1e-12);
        // node 256 sits at x = 0; the jump registers in the adjacent cell
        for (cell, &mass) in m.masses.iter().enumerate() {
            if (255..=256).contains(&cell) {
                continue;
            }
            assert!(mass.abs() < 1e-12, "stray mass {mass} in cell {cell}");
        }
    }

    #[test]
    fn affine_function_has_zero_measure() {
        let grid = BoxGrid::symmetric(2, 5.0, 33).unwrap();
        let f = GridFn::sample(grid, None, |x| 0.25 * x[0] - 0.5 * x[1] + 1.0);
        let m = ma_measure(&f).unwrap();
        assert!(m.total.abs() < 1e-12);
    }

    #[test]
    fn two_dim_total_mass_close_to_polytope_volume() {
        let grid = BoxGrid::symmetric(2, 20.0, 129).unwrap();
        let f = VertexSoftmax::new(Polytope::unit_box(2), None)
            .unwrap()
            .sample(grid)
            .unwrap();
        let m = ma_measure(&f).unwrap();
        assert!((m.total - 1.0).abs() < 0.01, "total {}", m.total);
    }

    #[test]
    fn affine_shift_preserves_total_mass() {
        let grid = BoxGrid::symmetric(2, 12.0, 65).unwrap();
        let base = VertexSoftmax::new(Polytope::unit_box(2), None)
            .unwrap()
            .sample(grid.clone())
            .unwrap();
        let mut shifted_vals = Vec::with_capacity(base.values.len());
        let mut x = Vec::new();
        for i in 0..grid.node_count() {
            grid.node(i, &mut x);
            shifted_vals.push(base.values[i] + 0.31 * x[0] - 0.17 * x[1] + 2.0);
        }
        // the shifted gradient range moves off the unit box, so drop the tail
        let shifted = GridFn::from_values(grid, shifted_vals, None).unwrap();
        let mut base_unclipped = base.clone();
        base_unclipped.tail = None;
        let m0 = ma_measure(&base_unclipped).unwrap();
        let m1 = ma_measure(&shifted).unwrap();
        let rel = (m0.total - m1.total).abs() / m0.total;
        assert!(rel < 1e-9, "affine shift changed total mass by {rel}");
    }

    #[test]
    fn non_convex_input_is_rejected() {
        let grid = BoxGrid::new(vec![AxisSpec::new(-2.0, 2.0, 9).unwrap()]).unwrap();
        let f = GridFn::sample(grid, None, |x| -x[0] * x[0]);
        match ma_measure(&f) {
            Err(crate::error::Error::ConvexityViolation(report)) => {
                assert!(report.second_difference < 0.0);
            }
            other => panic!("expected convexity rejection, got {other:?}"),
        }
    }

    #[test]
    fn clipping_to_the_tail_removes_edge_spill() {
        // softplus tilted so its slope range [0,1] is clipped to [1/4, 1]
        let grid = BoxGrid::symmetric(1, 20.0, 513).unwrap();
        let clip = Polytope::from_f64_vertices(1, &[vec![0.25], vec![1.0]]).unwrap();
        let f = GridFn::sample(grid, Some(clip), |x| softplus(x[0]));
        let m = ma_measure(&f).unwrap();
        let expect = logistic(20.0) - 0.25;
        assert!((m.total - expect).abs() < 1e-9, "total {}", m.total);
    }
}
