//! Uniform box grids and grid-sampled functions.
//!
//! Nodes are ordered lexicographically by index tuple with the first axis
//! slowest, so the storage order equals the row order of the CSV dumps.
//! The value `-inf` is an allowed sentinel meaning "identically minus
//! infinity here"; suprema and stencils skip it.

use crate::error::{ConvexityReport, Error, Result};
use crate::polytope::Polytope;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Hard cap on the number of nodes in a single grid.
pub const NODE_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!("bad axis range [{lo}, {hi}]")));
        }
        if points < 3 {
            return Err(Error::invalid(format!(
                "axis needs at least 3 points, got {points}"
            )));
        }
        Ok(AxisSpec { lo, hi, points })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    axes: Vec<AxisSpec>,
    #[serde(skip)]
    coords: Vec<Vec<f64>>,
}

impl BoxGrid {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 4 {
            return Err(Error::invalid(format!(
                "grid dimension {} outside 1..=4",
                axes.len()
            )));
        }
        let count: usize = axes.iter().map(|a| a.points).product();
        if count > NODE_BUDGET {
            return Err(Error::PointBudget {
                requested: count,
                budget: NODE_BUDGET,
            });
        }
        let mut g = BoxGrid {
            axes,
            coords: Vec::new(),
        };
        g.rebuild_coords();
        Ok(g)
    }

    fn rebuild_coords(&mut self) {
        self.coords = self
            .axes
            .iter()
            .map(|a| {
                let h = a.spacing();
                (0..a.points).map(|i| a.lo + i as f64 * h).collect()
            })
            .collect();
    }

    /// `[-radius, radius]^n` with `points` nodes per axis.
    pub fn symmetric(n: usize, radius: f64, points: usize) -> Result<Self> {
        let axis = AxisSpec::new(-radius, radius, points)?;
        Self::new(vec![axis; n])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &AxisSpec {
        &self.axes[j]
    }

    pub fn spacing(&self, j: usize) -> f64 {
        self.axes[j].spacing()
    }

    pub fn max_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(AxisSpec::spacing)
            .fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.points - 1).product()
    }

    /// Coordinates of all nodes along one axis.
    pub fn coords(&self, j: usize) -> &[f64] {
        &self.coords[j]
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        let mut f = 0;
        for (j, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.axes[j].points);
            f = f * self.axes[j].points + i;
        }
        f
    }

    pub fn unflat(&self, mut flat: usize, out: &mut [usize]) {
        for j in (0..self.dim()).rev() {
            out[j] = flat % self.axes[j].points;
            flat /= self.axes[j].points;
        }
    }

    pub fn node(&self, flat: usize, out: &mut Vec<f64>) {
        let n = self.dim();
        out.clear();
        out.resize(n, 0.0);
        let mut rem = flat;
        for j in (0..n).rev() {
            let i = rem % self.axes[j].points;
            rem /= self.axes[j].points;
            out[j] = self.coords[j][i];
        }
    }

    pub fn node_vec(&self, flat: usize) -> Vec<f64> {
        let mut v = Vec::new();
        self.node(flat, &mut v);
        v
    }

    /// Same box, `factor` times the cell resolution per axis.
    pub fn refine(&self, factor: usize) -> Result<BoxGrid> {
        assert!(factor >= 1);
        let axes = self
            .axes
            .iter()
            .map(|a| AxisSpec::new(a.lo, a.hi, factor * (a.points - 1) + 1))
            .collect::<Result<_>>()?;
        BoxGrid::new(axes)
    }

    /// Flat indices of the `2^n` corner nodes of a cell, given the cell's
    /// lexicographic index.
    pub fn cell_corners(&self, cell: usize, out: &mut Vec<usize>) {
        let n = self.dim();
        let mut base = [0usize; 4];
        let mut rem = cell;
        for j in (0..n).rev() {
            base[j] = rem % (self.axes[j].points - 1);
            rem /= self.axes[j].points - 1;
        }
        out.clear();
        for mask in 0..(1usize << n) {
            let mut idx = 0;
            for j in 0..n {
                let i = base[j] + (mask >> j & 1);
                idx = idx * self.axes[j].points + i;
            }
            out.push(idx);
        }
    }

    /// All signed stencil directions: axis, face-diagonal, and body-diagonal
    /// steps with the first nonzero component positive.
    pub fn stencil_directions(&self) -> Vec<Vec<i64>> {
        let n = self.dim();
        let mut dirs = Vec::new();
        let mut d = vec![0i64; n];
        fn rec(j: usize, d: &mut Vec<i64>, dirs: &mut Vec<Vec<i64>>) {
            if j == d.len() {
                if let Some(first) = d.iter().find(|&&c| c != 0) {
                    if *first > 0 {
                        dirs.push(d.clone());
                    }
                }
                return;
            }
            for c in [-1i64, 0, 1] {
                d[j] = c;
                rec(j + 1, d, dirs);
            }
            d[j] = 0;
        }
        rec(0, &mut d, &mut dirs);
        dirs
    }
}

/// A function sampled on a box grid, with an optional polytope tail model
/// describing its slope behaviour outside the box (the function is extended
/// by the polytope's support function plus a matching constant).
#[derive(Debug, Clone)]
pub struct GridFn {
    pub grid: BoxGrid,
    pub values: Vec<f64>,
    pub tail: Option<Polytope>,
}

impl GridFn {
    pub fn from_values(grid: BoxGrid, values: Vec<f64>, tail: Option<Polytope>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::invalid(
                "grid values must be finite or the -inf sentinel",
            ));
        }
        if let Some(t) = &tail {
            if t.dim() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    got: t.dim(),
                });
            }
        }
        Ok(GridFn { grid, values, tail })
    }

    pub fn sample(grid: BoxGrid, tail: Option<Polytope>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        let mut x = Vec::new();
        for i in 0..grid.node_count() {
            grid.node(i, &mut x);
            values.push(f(&x));
        }
        GridFn { grid, values, tail }
    }

    pub fn constant(grid: BoxGrid, c: f64) -> Self {
        let values = vec![c; grid.node_count()];
        GridFn {
            grid,
            values,
            tail: None,
        }
    }

    pub fn is_all_sentinel(&self) -> bool {
        self.values.iter().all(|&v| v == f64::NEG_INFINITY)
    }

    pub fn finite_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Largest absolute nodewise difference; sentinel-on-both counts as zero.
    pub fn sup_diff(&self, other: &GridFn) -> f64 {
        assert_eq!(self.grid, other.grid, "grids must match");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
                    0.0
                } else {
                    (a - b).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Multilinear interpolation.  Outside the box the coordinate is clamped
    /// and, when a tail model is present, the support-function extension
    /// `f(clamp(x)) + h(x) - h(clamp(x))` is used.
    pub fn eval_interp(&self, x: &[f64]) -> f64 {
        let n = self.grid.dim();
        debug_assert_eq!(x.len(), n);
        let mut clamped = [0.0f64; 4];
        let mut base = [0usize; 4];
        let mut frac = [0.0f64; 4];
        for j in 0..n {
            let a = self.grid.axis(j);
            let c = x[j].clamp(a.lo, a.hi);
            clamped[j] = c;
            let h = a.spacing();
            let t = (c - a.lo) / h;
            let i = (t.floor() as usize).min(a.points - 2);
            base[j] = i;
            frac[j] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0f64;
        let mut hit_sentinel = false;
        for mask in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            for j in 0..n {
                let up = mask >> j & 1;
                w *= if up == 1 { frac[j] } else { 1.0 - frac[j] };
                idx = idx * self.grid.axis(j).points + base[j] + up as usize;
            }
            let v = self.values[idx];
            if v == f64::NEG_INFINITY {
                if w > 0.0 {
                    hit_sentinel = true;
                }
                continue;
            }
            acc += w * v;
        }
        if hit_sentinel {
            return f64::NEG_INFINITY;
        }
        if let Some(tail) = &self.tail {
            let outside = (0..n).any(|j| x[j] != clamped[j]);
            if outside {
                return acc + tail.support(x) - tail.support(&clamped[..n]);
            }
        }
        acc
    }

    /// Centered second difference along `dir` at flat node `center`, divided
    /// by the squared step length.  `None` when the stencil leaves the grid
    /// or touches a sentinel.
    pub fn second_difference(&self, center: usize, dir: &[i64]) -> Option<f64> {
        let n = self.grid.dim();
        let mut idx = [0usize; 4];
        self.grid.unflat(center, &mut idx[..n]);
        let mut plus = 0usize;
        let mut minus = 0usize;
        let mut step_sq = 0.0;
        for j in 0..n {
            let i = idx[j] as i64;
            let p = i + dir[j];
            let m = i - dir[j];
            let points = self.grid.axis(j).points as i64;
            if p < 0 || p >= points || m < 0 || m >= points {
                return None;
            }
            plus = plus * points as usize + p as usize;
            minus = minus * points as usize + m as usize;
            let s = dir[j] as f64 * self.grid.spacing(j);
            step_sq += s * s;
        }
        let (a, b, c) = (self.values[plus], self.values[center], self.values[minus]);
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return None;
        }
        Some((a - 2.0 * b + c) / step_sq)
    }

    /// Discrete midpoint convexity along every stencil direction, with
    /// tolerance `1e-10 * (1 + max |f|)`.
    pub fn check_convex(&self) -> Result<()> {
        let tol = 1e-10 * (1.0 + self.max_abs());
        let dirs = self.grid.stencil_directions();
        let mut worst: Option<ConvexityReport> = None;
        for center in 0..self.grid.node_count() {
            for dir in &dirs {
                if let Some(sd) = self.second_difference(center, dir) {
                    let step_sq: f64 = dir
                        .iter()
                        .enumerate()
                        .map(|(j, &d)| {
                            let s = d as f64 * self.grid.spacing(j);
                            s * s
                        })
                        .sum();
                    let raw = sd * step_sq; // un-normalized second difference
                    if raw < -tol {
                        let report = ConvexityReport {
                            node: center,
                            direction: dir.clone(),
                            second_difference: raw,
                            tolerance: tol,
                        };
                        if worst
                            .as_ref()
                            .map_or(true, |w| raw < w.second_difference)
                        {
                            worst = Some(report);
                        }
                    }
                }
            }
        }
        match worst {
            Some(w) => Err(Error::ConvexityViolation(w)),
            None => Ok(()),
        }
    }

    /// Supremum over nodes (optionally masked) and stencil directions of the
    /// normalized centered second difference.
    pub fn second_difference_sup(&self, region: Option<&[bool]>) -> Result<f64> {
        if let Some(r) = region {
            if r.len() != self.grid.node_count() {
                return Err(Error::invalid("region mask length mismatch"));
            }
        }
        let dirs = self.grid.stencil_directions();
        let mut sup = f64::NEG_INFINITY;
        for center in 0..self.grid.node_count() {
            if let Some(r) = region {
                if !r[center] {
                    continue;
                }
            }
            for dir in &dirs {
                if let Some(sd) = self.second_difference(center, dir) {
                    sup = sup.max(sd);
                }
            }
        }
        if sup == f64::NEG_INFINITY {
            return Err(Error::invalid(
                "no admissible stencil in the requested region",
            ));
        }
        Ok(sup)
    }

    /// CSV dump with header `x1,...,xn,value` in node order.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let n = self.grid.dim();
        let header: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
        writeln!(w, "{},value", header.join(","))?;
        let mut x = Vec::new();
        for i in 0..self.grid.node_count() {
            self.grid.node(i, &mut x);
            for c in &x {
                write!(w, "{c},")?;
            }
            writeln!(w, "{}", self.values[i])?;
        }
        Ok(())
    }

    /// Sidecar metadata describing the grid and tail model.
    pub fn sidecar(&self) -> GridSidecar {
        GridSidecar {
            axes: self.grid.axes().to_vec(),
            tail: self.tail.clone(),
        }
    }

    /// Read back a CSV produced by [`write_csv`] onto a known grid.
    pub fn read_csv(grid: BoxGrid, tail: Option<Polytope>, r: &mut impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let _header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::invalid("empty csv"))?;
        let mut values = Vec::with_capacity(grid.node_count());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let last = line
                .rsplit(',')
                .next()
                .ok_or_else(|| Error::invalid("malformed csv row"))?;
            values.push(
                last.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad value: {e}")))?,
            );
        }
        GridFn::from_values(grid, values, tail)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSidecar {
    pub axes: Vec<AxisSpec>,
    pub tail: Option<Polytope>,
}

/// Nodewise gradient with centered differences inside and one-sided
/// differences on the faces.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub grid: BoxGrid,
    /// `components[axis][node]`
    pub components: Vec<Vec<f64>>,
}

pub fn gradient(f: &GridFn) -> Result<GradientField> {
    if f.finite_count() != f.values.len() {
        return Err(Error::invalid("gradient requires a finite grid function"));
    }
    let n = f.grid.dim();
    let mut components = vec![vec![0.0; f.grid.node_count()]; n];
    let mut idx = [0usize; 4];
    for node in 0..f.grid.node_count() {
        f.grid.unflat(node, &mut idx[..n]);
        for j in 0..n {
            let points = f.grid.axis(j).points;
            let h = f.grid.spacing(j);
            let stride: usize = f.grid.axes()[j + 1..].iter().map(|a| a.points).product();
            let i = idx[j];
            components[j][node] = if i == 0 {
                (f.values[node + stride] - f.values[node]) / h
            } else if i == points - 1 {
                (f.values[node] - f.values[node - stride]) / h
            } else {
                (f.values[node + stride] - f.values[node - stride]) / (2.0 * h)
            };
        }
    }
    Ok(GradientField {
        grid: f.grid.clone(),
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_order_is_lexicographic() {
        let g = BoxGrid::new(vec![
            AxisSpec::new(0.0, 1.0, 3).unwrap(),
            AxisSpec::new(0.0, 2.0, 3).unwrap(),
        ])
        .unwrap();
        assert_eq!(g.node_vec(0), vec![0.0, 0.0]);
        assert_eq!(g.node_vec(1), vec![0.0, 1.0]);
        assert_eq!(g.node_vec(3), vec![0.5, 0.0]);
        assert_eq!(g.node_vec(8), vec![1.0, 2.0]);
    }

    #[test]
    fn budget_is_enforced() {
        let axis = AxisSpec::new(0.0, 1.0, 2049).unwrap();
        assert!(BoxGrid::new(vec![axis.clone(), axis]).is_err());
    }

    #[test]
    fn spacing_is_exact_for_dyadic_boxes() {
        let g = BoxGrid::symmetric(1, 20.0, 513).unwrap();
        assert_eq!(g.spacing(0), 0.078125);
        assert_eq!(g.coords(0)[256], 0.0);
        assert_eq!(g.coords(0)[512], 20.0);
    }

    #[test]
    fn convexity_check_flags_a_dent() {
        let g = BoxGrid::symmetric(1, 2.0, 5).unwrap();
        let convex = GridFn::sample(g.clone(), None, |x| x[0] * x[0]);
        assert!(convex.check_convex().is_ok());
        let mut dented = convex.clone();
        dented.values[2] += 3.0; // node values become [4, 1, 3, 1, 4]
        assert!(dented.check_convex().is_err());
    }

    #[test]
    fn second_difference_sup_of_quadratic() {
        let g = BoxGrid::symmetric(2, 2.0, 9).unwrap();
        let f = GridFn::sample(g, None, |x| x[0] * x[0] + 0.5 * x[1] * x[1]);
        // along e1 the normalized second difference is 2, along e2 it is 1,
        // along the diagonals (2 h^2 + 1 h^2) / (2 h^2) = 1.5
        let sup = f.second_difference_sup(None).unwrap();
        assert!((sup - 2.0).abs() < 1e-10);
    }

    #[test]
    fn interpolation_and_tail_extension() {
        let g = BoxGrid::symmetric(1, 1.0, 5).unwrap();
        let tail = Polytope::unit_box(1);
        let f = GridFn::sample(g, Some(tail), |x| x[0].max(0.0));
        assert_eq!(f.eval_interp(&[0.25]), 0.25);
        // outside: support function of [0,1] is max(0, x), anchored at x = 1
        assert!((f.eval_interp(&[3.0]) - 3.0).abs() < 1e-12);
        assert!((f.eval_interp(&[-4.0]) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let g = BoxGrid::symmetric(2, 1.0, 3).unwrap();
        let f = GridFn::sample(g.clone(), None, |x| x[0] + 2.0 * x[1]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,value\n"));
        let back = GridFn::read_csv(g, None, &mut std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.values, f.values);
    }

    #[test]
    fn gradient_of_affine_is_exact() {
        let g = BoxGrid::symmetric(2, 2.0, 9).unwrap();
        let f = GridFn::sample(g, None, |x| 3.0 * x[0] - 1.5 * x[1] + 0.25);
        let grad = gradient(&f).unwrap();
        for node in 0..f.grid.node_count() {
            assert!((grad.components[0][node] - 3.0).abs() < 1e-12);
            assert!((grad.components[1][node] + 1.5).abs() < 1e-12);
        }
    }
}
