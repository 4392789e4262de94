//! Static descriptions: what each experiment computes and which identity it
//! checks.

use crate::config::Experiment;

pub fn describe(experiment: Experiment) -> &'static str {
    match experiment {
        Experiment::Envelope => {
            "envelope: computes the largest convex function below the potential whose \
             gradient stays in the moment polytope and, along the chosen axis, at or above \
             the threshold.  Checks that the result never exceeds the potential, stays \
             convex, and degenerates to the potential itself when the threshold is vacuous."
        }
        Experiment::Equilibrium => {
            "equilibrium: compares the second-difference cell measures of the constrained \
             envelope and of the potential.  The envelope's measure must concentrate on the \
             contact set and agree there with the potential's measure; both the off-contact \
             mass and the on-contact mismatch are bounded by a fraction of the polytope \
             volume."
        }
        Experiment::Exhaustion => {
            "exhaustion: resolves every threshold level in one sweep and records, per grid \
             node, the largest threshold whose envelope still touches the potential there.  \
             Checks monotonicity along the axis and agreement with the matching component \
             of the potential's gradient, to threshold-plus-grid resolution."
        }
        Experiment::BergmanConverge => {
            "bergman-converge: tabulates sup | ln(B_k)/k - (envelope - potential) | on a \
             compact window over a doubling level schedule, where B_k is the filtered \
             section sum.  The deviation must decrease along the schedule and end below \
             (n ln k + c)/k."
        }
        Experiment::BergmanMeasure => {
            "bergman-measure: integrates k^{-n} B_k against the reference density cell by \
             cell and compares with the potential's gradient-volume measure restricted to \
             the contact set; the L1 distance must shrink along the level schedule.  Also \
             runs the norm self-test: every normalized section integrates to one, so the \
             averaged defect must vanish to quadrature accuracy."
        }
        Experiment::H0Growth => {
            "h0-growth: counts lattice points of the k-dilated polytope whose filtration \
             coordinate clears the scaled threshold and compares count / k^n with the \
             exact slice volume of the polytope."
        }
        Experiment::SectionH => {
            "section-H: forms the ratio of filtered to full section sums at the largest \
             level of the schedule; the ratio's transition profile estimates the \
             exhaustion function and must match it uniformly on the window."
        }
        Experiment::PhongSturm => {
            "phong-sturm: builds the metric whose value at time t is the filtration-shifted \
             section sum, ln of sum_s e^{t nu_s} |s|^2 / norms, scaled by 1/k, and compares \
             it time by time against the Legendre-transform ray of the divisorial test \
             curve on a compact window."
        }
        Experiment::Geodesic => {
            "geodesic: builds the Legendre-transform ray over the divisorial test curve, \
             checks that the determinant of the joint space-time Hessian stays at grid \
             scale (the degeneracy identity for the ray), and matches its right \
             time-derivative at t = 0 against the exhaustion function."
        }
        Experiment::RayEnvelope => {
            "ray-envelope: recomputes the ray as a single joint-variable constrained \
             envelope of potential + cap * t, with the time slope constrained below the \
             threshold coordinate, and bounds the supremum difference between the two \
             constructions."
        }
        Experiment::Product => {
            "product: checks the splitting identity on a product of intervals.  The \
             joint-constraint envelope of a separable potential (sum of the two threshold \
             coordinates at least one) must equal the upper envelope over split levels of \
             complementary factor envelopes, and every split candidate must stay below the \
             joint envelope."
        }
        Experiment::Pushforward => {
            "pushforward: pushes the potential's cell measure forward through the \
             exhaustion function and compares the histogram's CDF against the exact \
             marginal of Lebesgue measure on the polytope along the chosen axis; total \
             mass must be conserved to rounding."
        }
        Experiment::Suite => {
            "suite: runs the full battery with stock configurations into per-experiment \
             subdirectories, including the two-dimensional equilibrium and pushforward \
             variants, and aggregates pass/fail."
        }
    }
}
