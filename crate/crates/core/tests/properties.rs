use approx::assert_relative_eq;
use proptest::prelude::*;
use wplap_core::coefficients::{ap_membership, truncate_horizon, truncate_weight, WeightSpec};
use wplap_core::funcspace::{embedding_predicate, hardy_check_1d, nonlocal_seminorm, EnergySpec, FnField, HardyBranch, PiecewiseLinear, Setup};
use wplap_core::geometry::{Domain, Label, LabeledSet, Region};
use wplap_core::numerics::Point;
use wplap_core::transport::capacities;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn capacities_split_evenly(n in 1usize..200, extra in 0usize..2000) {
        let m = n + extra;
        let c = capacities(m, n).unwrap();
        prop_assert_eq!(c.iter().sum::<usize>(), m);
        prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
    }

    #[test]
    fn truncation_is_a_floor(v in 0.0f64..2.0, tau in 1e-6f64..1.0, delta in 0.01f64..0.3) {
        let w = truncate_weight(v, tau).unwrap();
        prop_assert!(w >= tau && w >= v);
        prop_assert!(w == v || w == tau);
        assert_relative_eq!(truncate_horizon(v, delta, tau).unwrap(), delta * w);
    }

    #[test]
    fn weight_profile_is_monotone_and_bounded(r in 0.01f64..0.5, s in 0.0f64..1.5, ds in 0.0f64..0.1) {
        let w = WeightSpec::new(r, 1.0).unwrap();
        prop_assert!(w.profile(s) <= w.profile(s + ds) + 1e-12);
        prop_assert!(w.profile(s) <= 1.0 + 1e-12);
        prop_assert!(w.profile(s) >= s.min(r) - 1e-12);
    }

    #[test]
    fn compact_embedding_implies_continuous(d in 1usize..4, p in 1.1f64..4.0, t in 0.0f64..1.0, alpha in -2.0f64..3.0, beta in -2.0f64..3.0) {
        let df = d as f64;
        let qmax = if p < df { df * p / (df - p) } else { 8.0 };
        let q = 1.0 + t * (qmax - 1.0);
        let e = embedding_predicate(d, p, q, alpha, beta).unwrap();
        prop_assert!(!e.compact || e.continuous);
    }

    #[test]
    fn ap_range_matches_closed_form(d in 1usize..4, p in 1.1f64..4.0, beta in -8.0f64..4.0) {
        for ell in 0..d {
            let k = (d - ell) as f64;
            prop_assert_eq!(ap_membership(d, p, beta, ell).unwrap(), -k * (p - 1.0) < beta && beta < k);
        }
    }

    #[test]
    fn hardy_holds_for_piecewise_linear(vals in prop::collection::vec(-1.0f64..1.0, 2..6), gaps in prop::collection::vec(0.05f64..1.0, 5), p in 1.2f64..3.5, b in 0.1f64..2.0) {
        let mut knots = vec![0.0];
        for g in gaps.iter().take(vals.len() - 1) {
            knots.push(knots.last().unwrap() + g);
        }
        let v = PiecewiseLinear::new(knots.clone(), vals.clone()).unwrap();
        prop_assert!(hardy_check_1d(&v, 2, p, 2.0 - p + b, HardyBranch::AtZero).unwrap().holds);
        let mut tail = vals.clone();
        *tail.last_mut().unwrap() = 0.0;
        let w = PiecewiseLinear::new(knots, tail).unwrap();
        prop_assert!(hardy_check_1d(&w, 2, p, 2.0 - p - b, HardyBranch::AtInfinity).unwrap().holds);
    }
}

fn setup() -> Setup {
    let g = LabeledSet::new(2, vec![Label::point(&[0.4, 0.6], 0.0)], 0.1).unwrap();
    Setup::new(Region::new(Domain::unit_box(2), g).unwrap(), 24).unwrap()
}

#[test]
fn seminorm_is_p_homogeneous_and_shift_invariant() {
    let s = setup();
    let spec = EnergySpec::standard(2, 3.0, 0.5, 0.2, 0.1).unwrap();
    let u = |x: &Point| (2.0 * x[0]).sin() + x[1] * x[1];
    let base = nonlocal_seminorm(&s, &FnField::new(u), &spec);
    let scaled = nonlocal_seminorm(&s, &FnField::new(move |x: &Point| -2.5 * u(x) + 4.0), &spec);
    assert!(base > 0.0);
    assert_relative_eq!(scaled, 2.5f64.powi(3) * base, max_relative = 1e-10);
    assert_eq!(nonlocal_seminorm(&s, &FnField::new(|_: &Point| 3.0), &spec), 0.0);
}
