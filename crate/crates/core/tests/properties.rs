//! Randomized structural properties of the transform stack: inequalities and
//! conservation laws that must hold for every grid resolution, vertex weight,
//! and constraint level, not just the tuned configurations of the unit tests.

use proptest::prelude::*;
use toric_envelopes::{
    biconjugate, exhaustion, h0_growth, legendre_transform, ma_measure, max_envelope,
    pushforward_h, BoxGrid, GridFn, Polytope, SliceConstraint, VertexSoftmax,
};

/// Weighted softplus potential on the unit interval, sampled symmetrically.
fn weighted_interval(w0: f64, w1: f64, points: usize) -> (Polytope, VertexSoftmax, GridFn) {
    let dom = Polytope::unit_box(1);
    let metric = VertexSoftmax::new(dom.clone(), Some(vec![w0, w1])).expect("metric");
    let grid = BoxGrid::symmetric(1, 20.0, points).expect("grid");
    let phi = metric.sample(grid).expect("sample");
    (dom, metric, phi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Fenchel--Young: `phi(x) + phi*(a) >= x a` at every primal/dual node
    /// pair, up to roundoff on the magnitudes involved.
    #[test]
    fn fenchel_young_inequality(
        points in 33usize..128,
        dual_points in 65usize..256,
        w0 in 0.1f64..4.0,
        w1 in 0.1f64..4.0,
    ) {
        let (dom, _, phi) = weighted_interval(w0, w1, points);
        let dual = legendre_transform(&phi, &dom, dual_points).expect("dual");
        let xs = phi.grid.coords(0);
        let slack = 1e-12 * (1.0 + phi.max_abs() + dual.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        for (i, &x) in xs.iter().enumerate() {
            for (j, &a) in dual.grid.coords(0).iter().enumerate() {
                prop_assert!(
                    phi.values[i] + dual.values[j] >= x * a - slack,
                    "violated at x={x}, a={a}"
                );
            }
        }
    }

    /// The biconjugate is a convex minorant of the sampled potential.
    #[test]
    fn biconjugate_is_convex_minorant(
        points in 33usize..128,
        dual_points in 65usize..256,
        w0 in 0.1f64..4.0,
        w1 in 0.1f64..4.0,
    ) {
        let (dom, _, phi) = weighted_interval(w0, w1, points);
        let dual = legendre_transform(&phi, &dom, dual_points).expect("dual");
        let back = biconjugate(&dual, &phi.grid);
        for (b, p) in back.values.iter().zip(&phi.values) {
            prop_assert!(b <= &(p + 1e-12), "biconjugate exceeds potential");
        }
        prop_assert!(back.check_convex().is_ok(), "biconjugate not convex");
    }

    /// Raising the constraint level only shrinks the admissible dual set, so
    /// envelopes are pointwise non-increasing in the level.
    #[test]
    fn envelope_monotone_in_level(
        points in 33usize..96,
        lo in 0u32..7,
        step in 1u32..4,
        w0 in 0.1f64..4.0,
        w1 in 0.1f64..4.0,
    ) {
        let (dom, _, phi) = weighted_interval(w0, w1, points);
        let l1 = f64::from(lo) / 8.0;
        let l2 = (f64::from(lo + step) / 8.0).min(1.0);
        let e1 = max_envelope(&phi, &dom, 0, l1).expect("envelope");
        let e2 = max_envelope(&phi, &dom, 0, l2).expect("envelope");
        for (hi, lo) in e2.envelope.values.iter().zip(&e1.envelope.values) {
            prop_assert!(hi <= &(lo + 1e-12), "higher level produced a larger envelope");
        }
    }

    /// The total gradient mass of the potential is the polytope volume: the
    /// gradient sweeps the whole interval up to boundary saturation.
    #[test]
    fn gradient_mass_is_polytope_volume(
        points in 33usize..256,
        w0 in 0.1f64..4.0,
        w1 in 0.1f64..4.0,
    ) {
        let (dom, _, phi) = weighted_interval(w0, w1, points);
        let measure = ma_measure(&phi).expect("measure");
        prop_assert!(
            (measure.total - dom.volume()).abs() <= 1e-6,
            "total {} vs volume {}",
            measure.total,
            dom.volume()
        );
    }

    /// Binning the gradient mass by exhaustion level conserves it exactly.
    #[test]
    fn pushforward_conserves_mass(
        points in 33usize..128,
        bins in 8usize..128,
        w0 in 0.1f64..4.0,
        w1 in 0.1f64..4.0,
    ) {
        let (dom, _, phi) = weighted_interval(w0, w1, points);
        let ex = exhaustion(&phi, &dom, 0, 1.0 / 64.0).expect("exhaustion");
        let measure = ma_measure(&phi).expect("measure");
        let hist = pushforward_h(&ex, &measure, bins).expect("histogram");
        prop_assert!(
            (hist.total - measure.total).abs() <= 1e-12 * (1.0 + measure.total.abs()),
            "histogram total {} vs measure total {}",
            hist.total,
            measure.total
        );
    }

    /// The exhaustion level function is monotone along its slice axis and
    /// confined to the level range it was built from.
    #[test]
    fn exhaustion_monotone_and_bounded(
        points in 33usize..96,
        w0 in 0.1f64..4.0,
        w1 in 0.1f64..4.0,
    ) {
        let (dom, _, phi) = weighted_interval(w0, w1, points);
        let ex = exhaustion(&phi, &dom, 0, 1.0 / 64.0).expect("exhaustion");
        prop_assert!(ex.check_monotone_along_axis().is_ok());
        for v in &ex.values.values {
            prop_assert!((ex.lambda_min..=ex.lambda_max).contains(v));
        }
    }

    /// Filtered lattice counts converge to the slice length at rate 2/k for
    /// every level and degree, because the count is exact integer arithmetic.
    #[test]
    fn lattice_count_tracks_slice_volume(
        k in 8u32..256,
        level_num in 0u32..=8,
    ) {
        let dom = Polytope::unit_box(1);
        let lambda = f64::from(level_num) / 8.0;
        let table = h0_growth(&dom, 0, lambda, &[k]).expect("table");
        let row = &table.rows[0];
        prop_assert!(
            row.error <= 2.0 / f64::from(k) + 1e-12,
            "count error {} at k={k}, lambda={lambda}",
            row.error
        );
    }

    /// Slice volumes are non-increasing in the threshold on both planar
    /// built-ins, starting from the full volume at threshold zero.
    #[test]
    fn slice_volume_monotone_in_threshold(
        lo in 0u32..7,
        step in 1u32..4,
    ) {
        for dom in [Polytope::unit_box(2), Polytope::standard_simplex(2)] {
            let l1 = f64::from(lo) / 8.0;
            let l2 = (f64::from(lo + step) / 8.0).min(1.0);
            let v0 = dom.slice_volume(&SliceConstraint::new(0, 0.0).expect("slice")).expect("volume");
            let v1 = dom.slice_volume(&SliceConstraint::new(0, l1).expect("slice")).expect("volume");
            let v2 = dom.slice_volume(&SliceConstraint::new(0, l2).expect("slice")).expect("volume");
            prop_assert!((v0 - dom.volume()).abs() <= 1e-12);
            prop_assert!(v2 <= v1 + 1e-12);
        }
    }
}
