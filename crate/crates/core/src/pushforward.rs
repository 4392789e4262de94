//! One-dimensional pushforward measures: the gradient-volume measure of a
//! potential pushed through its exhaustion function, the axis marginal of
//! Lebesgue measure on the gradient polytope, and a CDF sup-distance for
//! comparing the two.

use crate::envelope::ExhaustionFn;
use crate::error::{Error, Result};
use crate::ma::CellMeasure;
use crate::polytope::{rat_to_f64, Polytope, SliceConstraint};
use serde::Serialize;

pub const DEFAULT_BINS: usize = 64;

/// Uniform-bin histogram over a closed interval.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram1D {
    /// `bins + 1` uniform edges.
    pub edges: Vec<f64>,
    /// Nonnegative mass per bin.
    pub masses: Vec<f64>,
    pub total: f64,
}

impl Histogram1D {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("bad histogram range [{lo}, {hi}]")));
        }
        if bins == 0 {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        Ok(Histogram1D {
            edges,
            masses: vec![0.0; bins],
            total: 0.0,
        })
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    /// Bin index for a value, end bins absorbing anything out of range.
    pub fn bin_of(&self, v: f64) -> usize {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        let bins = self.bins();
        if v <= lo {
            return 0;
        }
        if v >= hi {
            return bins - 1;
        }
        let width = (hi - lo) / bins as f64;
        (((v - lo) / width) as usize).min(bins - 1)
    }

    pub fn add(&mut self, v: f64, mass: f64) {
        let b = self.bin_of(v);
        self.masses[b] += mass;
        self.total += mass;
    }

    /// Cumulative mass at every edge, normalized to end at one.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.edges.len());
        let mut acc = 0.0;
        out.push(0.0);
        for &m in &self.masses {
            acc += m;
            out.push(acc);
        }
        if self.total != 0.0 {
            for v in &mut out {
                *v /= self.total;
            }
        }
        out
    }

    /// Mass in bins whose lower edge is at or above `threshold`.
    pub fn tail_mass(&self, threshold: f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .filter(|(i, _)| self.edges[*i] >= threshold - 1e-12)
            .map(|(_, m)| m)
            .sum()
    }
}

/// Pushforward of a cell measure through the exhaustion function: each cell's
/// mass lands in the bin of the cell-averaged exhaustion value (continuous
/// exhaustions make corner averaging a half-cell-accurate quadrature of the
/// level).  `bins = 0` selects the default.
pub fn pushforward_h(h: &ExhaustionFn, m: &CellMeasure, bins: usize) -> Result<Histogram1D> {
    if h.values.grid != m.grid {
        return Err(Error::invalid(
            "exhaustion and measure live on different grids",
        ));
    }
    let bins = if bins == 0 { DEFAULT_BINS } else { bins };
    let mut hist = Histogram1D::new(h.lambda_min, h.lambda_max, bins)?;
    let mut corners = Vec::new();
    for cell in 0..m.grid.cell_count() {
        let mass = m.masses[cell];
        m.grid.cell_corners(cell, &mut corners);
        let mut sum = 0.0;
        let mut defined = true;
        for &c in &corners {
            let v = h.values.values[c];
            if !v.is_finite() {
                defined = false;
                break;
            }
            sum += v;
        }
        if !defined {
            if mass > 0.0 {
                return Err(Error::invalid(format!(
                    "exhaustion undefined on a cell carrying mass {mass}"
                )));
            }
            continue;
        }
        hist.add(sum / corners.len() as f64, mass);
    }
    Ok(hist)
}

/// Axis marginal of Lebesgue measure on the polytope: per-bin masses are
/// exact slice-volume differences, so they telescope to the full volume.
/// `bins = 0` selects the default.
pub fn pushforward_polytope(dom: &Polytope, axis: usize, bins: usize) -> Result<Histogram1D> {
    if axis >= dom.dim() {
        return Err(Error::invalid("marginal axis out of range"));
    }
    let bins = if bins == 0 { DEFAULT_BINS } else { bins };
    let (lo, hi) = dom.axis_range(axis);
    let (lo, hi) = (rat_to_f64(&lo), rat_to_f64(&hi));
    let mut hist = Histogram1D::new(lo, hi, bins)?;
    let mut above = Vec::with_capacity(bins + 1);
    for &e in &hist.edges {
        above.push(dom.slice_volume(&SliceConstraint::new(axis, e)?)?);
    }
    for b in 0..bins {
        let mass = (above[b] - above[b + 1]).max(0.0);
        hist.masses[b] = mass;
        hist.total += mass;
    }
    Ok(hist)
}

/// Kolmogorov-style sup distance between two histograms on the same edges,
/// after normalizing both to unit mass.  A total-mass mismatch beyond 5% is
/// its own failure, reported before any distance.
pub fn cdf_distance(h1: &Histogram1D, h2: &Histogram1D) -> Result<f64> {
    if h1.edges.len() != h2.edges.len()
        || h1
            .edges
            .iter()
            .zip(&h2.edges)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::invalid("histogram edges do not match"));
    }
    let scale = h1.total.abs().max(h2.total.abs());
    if scale == 0.0 {
        return Err(Error::invalid("both histograms are empty"));
    }
    if (h1.total - h2.total).abs() > 0.05 * scale {
        return Err(Error::invalid(format!(
            "total mass mismatch: {} vs {}",
            h1.total, h2.total
        )));
    }
    let (c1, c2) = (h1.cdf(), h2.cdf());
    let mut sup = 0.0f64;
    for (a, b) in c1.iter().zip(&c2) {
        sup = sup.max((a - b).abs());
    }
    Ok(sup)
}
