use proptest::prelude::*;

use branchstop::correspondence::invert_to_offspring;
use branchstop::inhomogeneous::MoebiusCoefficients;
use branchstop::stopping::{threshold_rule_value, value_iid_sequence, value_sequence};
use branchstop::{OffspringLaw, PayoffMode, StoppingLaw};

fn pmf_law() -> impl Strategy<Value = OffspringLaw> {
    prop::collection::vec(0.05f64..1.0, 2..6).prop_map(|w| {
        let total: f64 = w.iter().sum();
        OffspringLaw::from_pmf(w.iter().map(|x| x / total).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generating_function_is_increasing_and_convex(law in pmf_law()) {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let g: Vec<f64> = grid.iter().map(|&s| law.eval(s)).collect();
        for w in g.windows(3) {
            prop_assert!(w[1] >= w[0] - 1e-15);
            prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-14);
        }
        prop_assert!((g[100] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extinction_rises_to_fixed_point(law in pmf_law()) {
        let pi = law.eventual_extinction();
        let q = law.extinction_sequence(40);
        for w in q.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(q.iter().all(|&x| x <= pi + 1e-12));
        prop_assert!((law.eval(pi) - pi).abs() < 1e-9);
    }

    #[test]
    fn stopping_value_equals_extinction(law in pmf_law(), n in 1usize..15) {
        let x = StoppingLaw::from_offspring(&law);
        let v = value_iid_sequence(&x, n, PayoffMode::Quadrature).unwrap();
        let q = law.extinction_sequence(n);
        for (a, b) in v.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn payoff_paths_agree(law in pmf_law(), a in 0.0f64..1.0) {
        let x = StoppingLaw::from_offspring(&law);
        let closed = x.payoff_h(a, PayoffMode::ClosedForm).unwrap();
        let quad = x.payoff_h(a, PayoffMode::Quadrature).unwrap();
        prop_assert!((closed - quad).abs() < 1e-9, "{closed} vs {quad}");
        prop_assert!(closed >= a - 1e-15);
    }

    #[test]
    fn inversion_recovers_the_pmf(law in pmf_law()) {
        let candidate = StoppingLaw::from_offspring(&law).to_candidate(16);
        let inversion = invert_to_offspring(&candidate);
        let back = inversion.law().expect("accepted");
        for k in 0..6 {
            prop_assert!((back.pmf(k) - law.pmf(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_thresholds_never_beat_the_optimum(law in pmf_law(), tau in 0.0f64..1.0, n in 1usize..8) {
        let x = vec![StoppingLaw::from_offspring(&law); n];
        let best = value_sequence(&x, PayoffMode::ClosedForm).unwrap().value();
        let rule = threshold_rule_value(&x, tau, n).unwrap();
        prop_assert!(rule <= best + 1e-12);
    }

    #[test]
    fn moebius_composition_matches_nesting(
        b1 in 0.05f64..0.5, c1 in 0.05f64..0.5,
        b2 in 0.05f64..0.5, c2 in 0.05f64..0.5,
        s in 0.0f64..1.0,
    ) {
        let outer = MoebiusCoefficients::from_gg(b1, c1);
        let inner = MoebiusCoefficients::from_gg(b2, c2);
        let composed = outer.compose(&inner).eval(s);
        prop_assert!((composed - outer.eval(inner.eval(s))).abs() < 1e-12);
    }
}
