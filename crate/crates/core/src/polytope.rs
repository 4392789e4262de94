//! Bounded rational polytopes in dimension 1 to 3.
//!
//! A `Polytope` is stored in both representations at once: the vertex list the
//! caller supplied and the list of supporting halfspaces derived from it.  All
//! membership and lattice queries use exact rational arithmetic; floating point
//! enters only for volumes and quadrature.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rat = BigRational;

/// Exact conversion; every finite f64 is a rational number.
pub fn rat_from_f64(x: f64) -> Result<Rat> {
    BigRational::from_f64(x).ok_or_else(|| Error::invalid(format!("non-finite coordinate {x}")))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row rank of a rational matrix via Gaussian elimination.
fn rank(rows: &[Vec<Rat>]) -> usize {
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let factor = &m[i][c] / &pivot;
                for j in c..ncols {
                    let sub = &factor * &m[r][j];
                    m[i][j] = &m[i][j] - sub;
                }
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Closed halfspace `{ a : <normal, a> <= offset }` with integer normal data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Halfspace {
    pub normal: Vec<Rat>,
    pub offset: Rat,
}

impl Halfspace {
    /// Scale so the normal is a primitive integer vector; used for dedup.
    fn canonical_key(&self) -> (Vec<BigInt>, BigInt, BigInt) {
        let mut denom_lcm = BigInt::one();
        for r in self.normal.iter().chain(std::iter::once(&self.offset)) {
            denom_lcm = denom_lcm.lcm(r.denom());
        }
        let ints: Vec<BigInt> = self
            .normal
            .iter()
            .map(|r| r.numer() * (&denom_lcm / r.denom()))
            .collect();
        let off = self.offset.numer() * (&denom_lcm / self.offset.denom());
        let mut g = off.clone().abs();
        for v in &ints {
            g = g.gcd(v);
        }
        if g.is_zero() {
            g = BigInt::one();
        }
        (ints.iter().map(|v| v / &g).collect(), &off / &g, BigInt::one())
    }

    pub fn contains(&self, p: &[Rat]) -> bool {
        dot(&self.normal, p) <= self.offset
    }

    pub fn on_boundary(&self, p: &[Rat]) -> bool {
        dot(&self.normal, p) == self.offset
    }
}

/// Axis-aligned slice constraint `{ a : a_axis >= lambda }` on the dual side.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SliceConstraint {
    pub axis: usize,
    pub lambda: f64,
}

impl SliceConstraint {
    pub fn new(axis: usize, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::invalid("slice threshold must be finite"));
        }
        Ok(SliceConstraint { axis, lambda })
    }

    pub fn lambda_exact(&self) -> Rat {
        rat_from_f64(self.lambda).expect("validated on construction")
    }
}

/// Bounded full-dimensional polytope with exact dual representation.
#[derive(Debug, Clone)]
pub struct Polytope {
    n: usize,
    vertices: Vec<Vec<Rat>>,
    halfspaces: Vec<Halfspace>,
    vertices_f64: Vec<Vec<f64>>,
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.vertices == other.vertices
    }
}

impl Polytope {
    /// Build from a vertex list; the halfspace representation is derived by a
    /// brute-force supporting-hyperplane scan (exact, fine at these sizes) and
    /// both representations are cross-checked before returning.
    pub fn from_vertices(n: usize, points: Vec<Vec<Rat>>) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::invalid(format!("dimension {n} outside 1..=3")));
        }
        for p in &points {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
        }
        let mut pts: Vec<Vec<Rat>> = Vec::new();
        for p in points {
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        if pts.len() < n + 1 {
            return Err(Error::invalid(format!(
                "need at least {} distinct points for a full-dimensional set, got {}",
                n + 1,
                pts.len()
            )));
        }
        let diffs: Vec<Vec<Rat>> = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| a - b).collect())
            .collect();
        if rank(&diffs) < n {
            return Err(Error::invalid(
                "points are affinely degenerate (not full-dimensional)",
            ));
        }

        let halfspaces = derive_halfspaces(n, &pts)?;

        // True vertices are the points whose tight supporting normals span R^n.
        let mut vertices: Vec<Vec<Rat>> = Vec::new();
        for p in &pts {
            let tight: Vec<Vec<Rat>> = halfspaces
                .iter()
                .filter(|h| h.on_boundary(p))
                .map(|h| h.normal.clone())
                .collect();
            if rank(&tight) >= n {
                vertices.push(p.clone());
            }
        }
        if vertices.len() < n + 1 {
            return Err(Error::invalid("fewer than n+1 vertices after hull pass"));
        }
        for v in &vertices {
            if !halfspaces.iter().all(|h| h.contains(v)) {
                return Err(Error::invalid(
                    "representation cross-check failed: vertex violates a derived halfspace",
                ));
            }
        }
        let vertices_f64 = vertices
            .iter()
            .map(|v| v.iter().map(rat_to_f64).collect())
            .collect();
        Ok(Polytope {
            n,
            vertices,
            halfspaces,
            vertices_f64,
        })
    }

    pub fn from_f64_vertices(n: usize, points: &[Vec<f64>]) -> Result<Self> {
        let pts = points
            .iter()
            .map(|p| p.iter().copied().map(rat_from_f64).collect::<Result<_>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_vertices(n, pts)
    }

    /// Unit box `[0,1]^n`.
    pub fn unit_box(n: usize) -> Self {
        let mut verts = Vec::new();
        for mask in 0..(1usize << n) {
            verts.push(
                (0..n)
                    .map(|j| {
                        if mask >> j & 1 == 1 {
                            Rat::one()
                        } else {
                            Rat::zero()
                        }
                    })
                    .collect(),
            );
        }
        Self::from_vertices(n, verts).expect("unit box is valid")
    }

    /// Standard simplex `conv{0, e_1, ..., e_n}`.
    pub fn standard_simplex(n: usize) -> Self {
        let mut verts = vec![vec![Rat::zero(); n]];
        for j in 0..n {
            let mut v = vec![Rat::zero(); n];
            v[j] = Rat::one();
            verts.push(v);
        }
        Self::from_vertices(n, verts).expect("standard simplex is valid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[Vec<Rat>] {
        &self.vertices
    }

    pub fn vertices_f64(&self) -> &[Vec<f64>] {
        &self.vertices_f64
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// Halfspace data `(normal, offset)` meaning `<normal, p> <= offset`,
    /// rounded to floating point for geometric post-processing.
    pub fn halfspaces_f64(&self) -> Vec<(Vec<f64>, f64)> {
        self.halfspaces
            .iter()
            .map(|h| {
                (
                    h.normal.iter().map(rat_to_f64).collect(),
                    rat_to_f64(&h.offset),
                )
            })
            .collect()
    }

    pub fn contains(&self, p: &[Rat]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(p))
    }

    pub fn contains_f64(&self, p: &[f64]) -> Result<bool> {
        let q: Vec<Rat> = p
            .iter()
            .copied()
            .map(rat_from_f64)
            .collect::<Result<_>>()?;
        Ok(self.contains(&q))
    }

    /// Inexact membership used by Monte-Carlo volume estimates only.
    fn contains_float(&self, p: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| {
            let lhs: f64 = h
                .normal
                .iter()
                .zip(p)
                .map(|(c, x)| rat_to_f64(c) * x)
                .sum();
            lhs <= rat_to_f64(&h.offset) + 1e-12
        })
    }

    /// Exact per-axis range `[min_j, max_j]` over the vertex set.
    /// Product with an interval appended as a new last axis.
    pub fn prism(&self, lo: f64, hi: f64) -> Result<Polytope> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("prism interval must satisfy lo < hi"));
        }
        let mut verts = Vec::with_capacity(2 * self.vertices.len());
        for v in &self.vertices {
            for &end in &[lo, hi] {
                let mut w = v.clone();
                w.push(rat_from_f64(end)?);
                verts.push(w);
            }
        }
        Polytope::from_vertices(self.n + 1, verts)
    }

    pub fn axis_range(&self, axis: usize) -> (Rat, Rat) {
        let mut lo = self.vertices[0][axis].clone();
        let mut hi = lo.clone();
        for v in &self.vertices[1..] {
            if v[axis] < lo {
                lo = v[axis].clone();
            }
            if v[axis] > hi {
                hi = v[axis].clone();
            }
        }
        (lo, hi)
    }

    /// Support function `h(x) = max_v <v, x>`, evaluated in floating point.
    pub fn support(&self, x: &[f64]) -> f64 {
        self.vertices_f64
            .iter()
            .map(|v| v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// All lattice points `alpha` with `alpha / k` in the polytope, in
    /// lexicographic order.  Exact; `k = 0` is rejected.
    pub fn lattice_points(&self, k: u32) -> Result<Vec<Vec<i64>>> {
        if k == 0 {
            return Err(Error::invalid("lattice scale k must be positive"));
        }
        let kq = Rat::from_integer(BigInt::from(k));
        let mut lo = Vec::with_capacity(self.n);
        let mut hi = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let (a, b) = self.axis_range(j);
            lo.push((a * &kq).ceil().to_integer().to_i64().ok_or_else(|| {
                Error::invalid("lattice bound does not fit in i64")
            })?);
            hi.push((b * &kq).floor().to_integer().to_i64().ok_or_else(|| {
                Error::invalid("lattice bound does not fit in i64")
            })?);
        }
        let mut out = Vec::new();
        let mut alpha = lo.clone();
        'scan: loop {
            let p: Vec<Rat> = alpha
                .iter()
                .map(|&a| Rat::new(BigInt::from(a), BigInt::from(k)))
                .collect();
            if self.contains(&p) {
                out.push(alpha.clone());
            }
            // lexicographic increment with the last axis fastest
            for j in (0..self.n).rev() {
                if alpha[j] < hi[j] {
                    alpha[j] += 1;
                    continue 'scan;
                }
                if j == 0 {
                    break 'scan;
                }
                alpha[j] = lo[j];
            }
            break;
        }
        Ok(out)
    }

    /// Vertices ordered counterclockwise (2-D only).
    pub fn ordered_vertices_2d(&self) -> Vec<Vec<Rat>> {
        assert_eq!(self.n, 2, "ordered hull is a 2-D operation");
        convex_hull_2d(&self.vertices)
    }

    /// Exact area of an ordered rational polygon, as a rational.
    fn polygon_area(poly: &[Vec<Rat>]) -> Rat {
        if poly.len() < 3 {
            return Rat::zero();
        }
        let mut twice = Rat::zero();
        for i in 0..poly.len() {
            let a = &poly[i];
            let b = &poly[(i + 1) % poly.len()];
            twice += &a[0] * &b[1] - &a[1] * &b[0];
        }
        twice.abs() / Rat::from_integer(BigInt::from(2))
    }

    /// Total volume.  Exact for n <= 2; quasi-Monte-Carlo for n = 3.
    pub fn volume(&self) -> f64 {
        match self.n {
            1 => {
                let (lo, hi) = self.axis_range(0);
                rat_to_f64(&(hi - lo))
            }
            2 => rat_to_f64(&Self::polygon_area(&self.ordered_vertices_2d())),
            _ => self.qmc_volume(None).0,
        }
    }

    /// Volume of `{ a in P : a_axis >= lambda }`.
    ///
    /// Exact polygon/interval arithmetic for n <= 2; quasi-Monte-Carlo with a
    /// reported standard error for n = 3.  Out-of-range thresholds clamp to
    /// the full volume or zero and are logged.
    pub fn slice_volume(&self, slice: &SliceConstraint) -> Result<f64> {
        if slice.axis >= self.n {
            return Err(Error::invalid(format!(
                "slice axis {} out of range for dimension {}",
                slice.axis, self.n
            )));
        }
        let lam = slice.lambda_exact();
        let (lo, hi) = self.axis_range(slice.axis);
        if lam <= lo {
            if lam < lo {
                log::debug!(
                    "slice threshold {} below axis minimum, clamping to full volume",
                    slice.lambda
                );
            }
            return Ok(self.volume());
        }
        if lam >= hi {
            if lam > hi {
                log::debug!(
                    "slice threshold {} above axis maximum, clamping to zero",
                    slice.lambda
                );
            }
            return Ok(0.0);
        }
        match self.n {
            1 => Ok(rat_to_f64(&(hi - lam))),
            2 => {
                let clipped = clip_polygon_lower_bound(
                    &self.ordered_vertices_2d(),
                    slice.axis,
                    &lam,
                );
                Ok(rat_to_f64(&Self::polygon_area(&clipped)))
            }
            _ => {
                let (v, se) = self.qmc_volume(Some((slice.axis, slice.lambda)));
                log::info!(
                    "qmc slice volume {:.6} (standard error {:.2e})",
                    v,
                    se
                );
                Ok(v)
            }
        }
    }

    /// Intersection with `{ a_axis >= lambda }` as a new polytope (n <= 2).
    /// Returns `None` when the intersection is empty or degenerate.
    pub fn intersect_lower_bound(&self, axis: usize, lambda: f64) -> Option<Polytope> {
        let lam = rat_from_f64(lambda).ok()?;
        match self.n {
            1 => {
                let (lo, hi) = self.axis_range(0);
                let new_lo = if lam > lo { lam } else { lo };
                if new_lo >= hi {
                    return None;
                }
                Polytope::from_vertices(1, vec![vec![new_lo], vec![hi]]).ok()
            }
            2 => {
                let clipped = clip_polygon_lower_bound(&self.ordered_vertices_2d(), axis, &lam);
                if Self::polygon_area(&clipped).is_zero() {
                    return None;
                }
                Polytope::from_vertices(2, clipped).ok()
            }
            _ => None,
        }
    }

    /// Halton-sequence volume estimate over the bounding box, with the
    /// optional lower-bound slice applied.  Returns (estimate, standard error).
    fn qmc_volume(&self, slice: Option<(usize, f64)>) -> (f64, f64) {
        const SAMPLES: usize = 1_000_000;
        const BASES: [u64; 3] = [2, 3, 5];
        let ranges: Vec<(f64, f64)> = (0..self.n)
            .map(|j| {
                let (lo, hi) = self.axis_range(j);
                (rat_to_f64(&lo), rat_to_f64(&hi))
            })
            .collect();
        let box_vol: f64 = ranges.iter().map(|(lo, hi)| hi - lo).product();
        let mut hits = 0usize;
        let mut p = vec![0.0; self.n];
        for i in 0..SAMPLES {
            for (j, (lo, hi)) in ranges.iter().enumerate() {
                let u = halton(i as u64 + 1, BASES[j]);
                p[j] = lo + u * (hi - lo);
            }
            let mut ok = self.contains_float(&p);
            if let Some((axis, lam)) = slice {
                ok = ok && p[axis] >= lam;
            }
            if ok {
                hits += 1;
            }
        }
        let frac = hits as f64 / SAMPLES as f64;
        let se = box_vol * (frac * (1.0 - frac) / SAMPLES as f64).sqrt();
        (box_vol * frac, se)
    }
}

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Supporting halfspaces of the convex hull of `pts`, by brute force over
/// pairs (2-D) or triples (3-D) with exact one-sided tests.
fn derive_halfspaces(n: usize, pts: &[Vec<Rat>]) -> Result<Vec<Halfspace>> {
    let mut out: Vec<Halfspace> = Vec::new();
    let mut keys: Vec<(Vec<BigInt>, BigInt, BigInt)> = Vec::new();
    let mut push = |h: Halfspace| {
        let key = h.canonical_key();
        if !keys.contains(&key) {
            keys.push(key);
            out.push(h);
        }
    };
    match n {
        1 => {
            let mut lo = pts[0][0].clone();
            let mut hi = lo.clone();
            for p in &pts[1..] {
                if p[0] < lo {
                    lo = p[0].clone();
                }
                if p[0] > hi {
                    hi = p[0].clone();
                }
            }
            push(Halfspace {
                normal: vec![-Rat::one()],
                offset: -lo,
            });
            push(Halfspace {
                normal: vec![Rat::one()],
                offset: hi,
            });
        }
        2 => {
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let d0 = &pts[j][0] - &pts[i][0];
                    let d1 = &pts[j][1] - &pts[i][1];
                    if d0.is_zero() && d1.is_zero() {
                        continue;
                    }
                    let normal = vec![d1.clone(), -d0.clone()];
                    try_supporting(&mut push, pts, normal, &pts[i]);
                }
            }
        }
        3 => {
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    for k in (j + 1)..pts.len() {
                        let u: Vec<Rat> =
                            (0..3).map(|c| &pts[j][c] - &pts[i][c]).collect();
                        let v: Vec<Rat> =
                            (0..3).map(|c| &pts[k][c] - &pts[i][c]).collect();
                        let normal = vec![
                            &u[1] * &v[2] - &u[2] * &v[1],
                            &u[2] * &v[0] - &u[0] * &v[2],
                            &u[0] * &v[1] - &u[1] * &v[0],
                        ];
                        if normal.iter().all(Rat::is_zero) {
                            continue;
                        }
                        try_supporting(&mut push, pts, normal, &pts[i]);
                    }
                }
            }
        }
        _ => unreachable!("dimension validated by caller"),
    }
    if out.is_empty() {
        return Err(Error::invalid("no supporting halfspaces found"));
    }
    Ok(out)
}

/// Keep the candidate hyperplane if every point lies on one side of it.
fn try_supporting(
    push: &mut impl FnMut(Halfspace),
    pts: &[Vec<Rat>],
    normal: Vec<Rat>,
    anchor: &[Rat],
) {
    let offset = dot(&normal, anchor);
    let mut any_below = false;
    let mut any_above = false;
    for p in pts {
        let s = dot(&normal, p);
        if s < offset {
            any_below = true;
        } else if s > offset {
            any_above = true;
        }
        if any_below && any_above {
            return;
        }
    }
    if !any_above {
        push(Halfspace { normal, offset });
    } else {
        push(Halfspace {
            normal: normal.into_iter().map(|c| -c).collect(),
            offset: -offset,
        });
    }
}

/// Andrew monotone chain on rational points; counterclockwise output.
pub fn convex_hull_2d(points: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let mut pts: Vec<Vec<Rat>> = Vec::new();
    for p in points {
        if !pts.contains(p) {
            pts.push(p.clone());
        }
    }
    pts.sort_by(|a, b| a[0].cmp(&b[0]).then(a[1].cmp(&b[1])));
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: &[Rat], a: &[Rat], b: &[Rat]| -> Rat {
        (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
    };
    let mut lower: Vec<Vec<Rat>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= Rat::zero()
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<Rat>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= Rat::zero()
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Clip an ordered rational polygon against `{ p_axis >= lambda }` exactly.
fn clip_polygon_lower_bound(poly: &[Vec<Rat>], axis: usize, lambda: &Rat) -> Vec<Vec<Rat>> {
    let inside = |p: &[Rat]| &p[axis] >= lambda;
    let mut out: Vec<Vec<Rat>> = Vec::new();
    for i in 0..poly.len() {
        let cur = &poly[i];
        let next = &poly[(i + 1) % poly.len()];
        let cur_in = inside(cur);
        let next_in = inside(next);
        if cur_in {
            out.push(cur.clone());
        }
        if cur_in != next_in {
            // intersection of the edge with the clipping line, exact
            let denom = &next[axis] - &cur[axis];
            let t = (lambda - &cur[axis]) / denom;
            let pt: Vec<Rat> = (0..cur.len())
                .map(|c| &cur[c] + &t * (&next[c] - &cur[c]))
                .collect();
            out.push(pt);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr {
    n: usize,
    vertices: Vec<Vec<f64>>,
}

impl Serialize for Polytope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolytopeRepr {
            n: self.n,
            vertices: self.vertices_f64.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PolytopeRepr::deserialize(d)?;
        Polytope::from_f64_vertices(repr.n, &repr.vertices).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> Rat {
        Rat::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn unit_interval_lattice_points_scale_three() {
        let p = Polytope::unit_box(1);
        let pts = p.lattice_points(3).unwrap();
        assert_eq!(pts, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn simplex_lattice_points_scale_four() {
        let p = Polytope::standard_simplex(2);
        let pts = p.lattice_points(4).unwrap();
        // Independent oracle: brute-force scan of the surrounding integer box.
        let mut expected = Vec::new();
        for a in 0..=4i64 {
            for b in 0..=4i64 {
                if a + b <= 4 {
                    expected.push(vec![a, b]);
                }
            }
        }
        assert_eq!(pts.len(), 15);
        assert_eq!(pts, expected);
    }

    #[test]
    fn lattice_scale_zero_rejected() {
        let p = Polytope::unit_box(1);
        assert!(p.lattice_points(0).is_err());
    }

    #[test]
    fn simplex_slice_volume_exact() {
        let p = Polytope::standard_simplex(2);
        let s = SliceConstraint::new(0, 0.5).unwrap();
        // The region {a1 >= 1/2} inside the standard simplex is the triangle
        // (1/2,0), (1,0), (1/2,1/2) with legs 1/2, so its area is 1/8.
        let v = p.slice_volume(&s).unwrap();
        assert_eq!(v, 0.125);
    }

    #[test]
    fn slice_volume_clamps_out_of_range() {
        let p = Polytope::unit_box(2);
        let below = SliceConstraint::new(0, -3.0).unwrap();
        let above = SliceConstraint::new(0, 7.0).unwrap();
        assert_eq!(p.slice_volume(&below).unwrap(), 1.0);
        assert_eq!(p.slice_volume(&above).unwrap(), 0.0);
    }

    #[test]
    fn support_function_of_square() {
        let p = Polytope::unit_box(2);
        assert_eq!(p.support(&[3.0, -2.0]), 3.0);
        assert_eq!(p.support(&[-1.0, -1.0]), 0.0);
        assert_eq!(p.support(&[2.0, 2.0]), 4.0);
    }

    #[test]
    fn halfspaces_of_simplex() {
        let p = Polytope::standard_simplex(2);
        assert_eq!(p.halfspaces().len(), 3);
        assert!(p.contains(&[rat(1, 4), rat(1, 4)]));
        assert!(!p.contains(&[rat(3, 4), rat(3, 4)]));
        assert!(p.contains(&[rat(1, 2), rat(1, 2)]));
    }

    #[test]
    fn interior_point_is_not_a_vertex() {
        let mut verts = vec![
            vec![rat(0, 1)],
            vec![rat(1, 1)],
            vec![rat(1, 2)], // midpoint, must be dropped
        ];
        let p = Polytope::from_vertices(1, std::mem::take(&mut verts)).unwrap();
        assert_eq!(p.vertices().len(), 2);
    }

    #[test]
    fn degenerate_points_rejected() {
        let line = vec![
            vec![rat(0, 1), rat(0, 1)],
            vec![rat(1, 1), rat(1, 1)],
            vec![rat(2, 1), rat(2, 1)],
        ];
        assert!(Polytope::from_vertices(2, line).is_err());
    }

    #[test]
    fn cube_volume_and_halfspaces() {
        let p = Polytope::unit_box(3);
        assert_eq!(p.halfspaces().len(), 6);
        let v = p.volume();
        assert!((v - 1.0).abs() < 5e-3, "qmc volume {v} too far from 1");
    }

    #[test]
    fn square_slice_matches_length() {
        let p = Polytope::unit_box(2);
        for (lam, want) in [(0.25, 0.75), (0.5, 0.5), (0.875, 0.125)] {
            let s = SliceConstraint::new(1, lam).unwrap();
            assert_eq!(p.slice_volume(&s).unwrap(), want);
        }
    }

    #[test]
    fn polytope_json_round_trip() {
        let p = Polytope::standard_simplex(2);
        let text = serde_json::to_string(&p).unwrap();
        let q: Polytope = serde_json::from_str(&text).unwrap();
        assert_eq!(p, q);
        // documented input form also parses
        let r: Polytope =
            serde_json::from_str(r#"{"n":2,"vertices":[[0,0],[1,0],[0,1]]}"#).unwrap();
        assert_eq!(r, p);
    }
}
