//! Discrete convex analysis on moment polytopes.
//!
//! The crate realizes, at desk scale, the finite-dimensional reduction of
//! envelope constructions for torus-invariant metrics: potentials are convex
//! functions on a box grid, their Legendre transforms live on a lattice
//! polytope, and filtration constraints become half-space restrictions of the
//! dual domain.  On top of the transform sit maximal envelopes with contact
//! sets, exhaustion functions, Monge-Ampere cell measures, geodesic-ray
//! grids, weighted section bases, and pushforward histograms.

pub mod bergman;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod legendre;
pub mod ma;
pub mod metric;
pub mod numeric;
pub mod polytope;
pub mod product;
pub mod pushforward;
pub mod ray;

pub use bergman::{
    bergman_log_convergence, bergman_measure_convergence, filtration_threshold, h0_growth,
    monomial_norms, parseval_defect, partial_bergman, phong_sturm_metric, section_exhaustion,
    tame_bounds, BergmanFn, H0Table, LogConvergence, MeasureReport, SectionBasis, TameReport,
    WeightDensity,
};
pub use envelope::{
    contact_threshold, default_dual_points, equilibrium_check, exhaustion, max_envelope,
    max_envelope_from_dual, EnvelopeResult, EquilibriumReport, ExhaustionFn,
};
pub use error::{Error, Result};
pub use grid::{AxisSpec, BoxGrid, GradientField, GridFn};
pub use legendre::{
    biconjugate, constrained_biconjugate, dual_grid, legendre_transform, DualConstraint, DualFn,
    LevelSweep,
};
pub use ma::{ma_measure, CellMeasure};
pub use metric::{Potential, VertexSoftmax};
pub use polytope::{rat_from_f64, rat_to_f64, Polytope, Rat, SliceConstraint};
pub use product::{product_envelope_check, ProductReport};
pub use pushforward::{cdf_distance, pushforward_h, pushforward_polytope, Histogram1D};
pub use ray::{
    convex_sup_lambda, hmae_residual, legendre_ray, ray_as_envelope_check, right_derivative,
    GeodesicRay, TestCurve,
};
