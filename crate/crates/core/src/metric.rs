//! Reference potentials: smooth convex functions whose gradient ranges over a
//! prescribed polytope.

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridFn};
use crate::numeric::LogSumExp;
use crate::polytope::Polytope;
use serde::{Deserialize, Serialize};

/// Anything that can be evaluated at an arbitrary point of the box.
pub trait Potential: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

impl Potential for GridFn {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_interp(x)
    }
}

/// Smooth strictly convex potential
/// `phi(x) = ln sum_v w_v e^{<v, x>}` over the vertices of a polytope.
///
/// Its gradient range is the interior of the polytope and it tracks the
/// support function within `ln sum_v w_v`, which makes it the canonical
/// reference weight for that polytope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexSoftmax {
    polytope: Polytope,
    weights: Vec<f64>,
}

impl VertexSoftmax {
    pub fn new(polytope: Polytope, weights: Option<Vec<f64>>) -> Result<Self> {
        let count = polytope.vertices().len();
        let weights = weights.unwrap_or_else(|| vec![1.0; count]);
        if weights.len() != count {
            return Err(Error::invalid(format!(
                "{} weights for {} vertices",
                weights.len(),
                count
            )));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::invalid("softmax weights must be positive"));
        }
        Ok(VertexSoftmax { polytope, weights })
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    /// Exact gradient: the softmax-weighted average of the vertices.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let verts = self.polytope.vertices_f64();
        let exponents: Vec<f64> = verts
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w.ln())
            .collect();
        let m = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = exponents.iter().map(|e| (e - m).exp()).collect();
        let total: f64 = probs.iter().sum();
        let mut g = vec![0.0; self.dim()];
        for (v, p) in verts.iter().zip(&probs) {
            for (j, c) in v.iter().enumerate() {
                g[j] += c * p / total;
            }
        }
        g
    }

    /// Sample onto a grid, carrying the polytope as the tail model.
    pub fn sample(&self, grid: BoxGrid) -> Result<GridFn> {
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: grid.dim(),
            });
        }
        let mut f = GridFn::sample(grid, Some(self.polytope.clone()), |x| self.eval(x));
        f.tail = Some(self.polytope.clone());
        Ok(f)
    }
}

impl Potential for VertexSoftmax {
    fn dim(&self) -> usize {
        self.polytope.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = LogSumExp::new();
        for (v, w) in self.polytope.vertices_f64().iter().zip(&self.weights) {
            acc.push(v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w.ln());
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{logistic, softplus};

    #[test]
    fn interval_softmax_is_softplus() {
        let m = VertexSoftmax::new(Polytope::unit_box(1), None).unwrap();
        for x in [-12.0, -1.0, 0.0, 0.5, 9.0] {
            assert!((m.eval(&[x]) - softplus(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_logistic_on_the_interval() {
        let m = VertexSoftmax::new(Polytope::unit_box(1), None).unwrap();
        for x in [-5.0, 0.0, 2.5] {
            let g = m.gradient(&[x]);
            assert!((g[0] - logistic(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_gradient_at_origin() {
        let m = VertexSoftmax::new(Polytope::standard_simplex(2), None).unwrap();
        let g = m.gradient(&[0.0, 0.0]);
        assert!((g[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((g[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tracks_support_function_within_log_weight_sum() {
        let m = VertexSoftmax::new(Polytope::standard_simplex(2), None).unwrap();
        let bound = (3.0f64).ln();
        for x in [[8.0, -3.0], [-10.0, -10.0], [5.0, 5.0]] {
            let gap = m.eval(&x) - m.polytope().support(&x);
            assert!(gap >= -1e-12 && gap <= bound + 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn square_softmax_splits_into_factors() {
        // ln sum over the square's corners of e^{<v,x>} = softplus(x1) + softplus(x2)
        let m = VertexSoftmax::new(Polytope::unit_box(2), None).unwrap();
        for x in [[0.3, -1.7], [4.0, 4.0], [-6.0, 2.0]] {
            let want = softplus(x[0]) + softplus(x[1]);
            assert!((m.eval(&x) - want).abs() < 1e-12);
        }
    }
}
