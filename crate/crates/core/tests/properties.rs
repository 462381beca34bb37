use proptest::prelude::*;

use cevpolar::config::parse_grid;
use cevpolar::diagnostics::StepFunction;
use cevpolar::geometry::{elliptical_curve, lp_curve, AngularLaw};
use cevpolar::limits::LimitLaw;
use cevpolar::model::MixtureModel;
use cevpolar::radial::RadialLaw;

fn limit_law() -> impl Strategy<Value = LimitLaw> {
    (1.1f64..5.0, 0.2f64..4.0, 0.05f64..0.95, 0.3f64..3.0)
        .prop_map(|(eta, zeta, wm, sm)| LimitLaw::asymmetric(eta, zeta, wm, 1.0 - wm, sm).unwrap())
}

proptest! {
    #[test]
    fn limit_cdf_is_monotone(law in limit_law(), a in -6.0f64..6.0, d in 0.0f64..3.0) {
        let (fa, fb) = (law.cdf(a), law.cdf(a + d));
        prop_assert!((0.0..=1.0).contains(&fa));
        prop_assert!(fb >= fa - 1e-14);
    }

    #[test]
    fn limit_quantile_inverts_cdf(law in limit_law(), q in 1e-6f64..(1.0 - 1e-6)) {
        let y = law.quantile(q).unwrap();
        prop_assert!((law.cdf(y) - q).abs() < 1e-9, "q = {q}, y = {y}");
    }

    #[test]
    fn limit_pdf_is_nonnegative(law in limit_law(), y in -8.0f64..8.0) {
        prop_assert!(law.pdf(y) >= 0.0);
    }

    #[test]
    fn angular_quantile_inverts_cdf(
        t0 in 0.1f64..0.9,
        tau in -0.8f64..2.0,
        frac in 0.1f64..0.9,
        q in 1e-6f64..(1.0 - 1e-6),
    ) {
        let g = AngularLaw::power(t0, tau, frac).unwrap();
        let t = g.quantile(q).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert!((g.cdf(t) - q).abs() < 1e-9);
    }

    #[test]
    fn radial_quantile_inverts_log_survival(k in 0.4f64..4.0, x in 0.05f64..20.0) {
        let law = RadialLaw::weibull(k).unwrap();
        let ls = law.log_survival(x);
        prop_assume!(ls > -700.0);
        let b = law.quantile_from_log_survival(ls);
        prop_assert!((b / x - 1.0).abs() < 1e-10);
    }

    #[test]
    fn curve_touches_the_unit_line_once(rho in -0.95f64..0.95, p in 1.2f64..6.0, t in 0.0f64..1.0) {
        for c in [elliptical_curve(rho).unwrap(), lp_curve(p, rho).unwrap()] {
            prop_assert!(c.u(t) <= 1.0 + 1e-12);
            if (t - c.t0()).abs() > c.window() {
                prop_assert!(c.u(t) <= 1.0 - c.eta() + 1e-12);
            }
        }
    }

    #[test]
    fn grid_syntax(lo in -50.0f64..50.0, span in 0.0f64..20.0, step in 0.01f64..5.0) {
        let hi = lo + span;
        let g = parse_grid(&format!("{lo}:{hi}:{step}")).unwrap();
        prop_assert_eq!(g[0], lo);
        prop_assert!(*g.last().unwrap() <= hi + 1e-9 * hi.abs().max(1.0));
        prop_assert!(*g.last().unwrap() + step > hi - 1e-9 * hi.abs().max(1.0));
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn step_function_is_a_cdf(points in prop::collection::vec((-10.0f64..10.0, 0.0f64..5.0), 1..60), y in -12.0f64..12.0) {
        prop_assume!(points.iter().any(|p| p.1 > 0.0));
        let f = StepFunction::from_weighted(points).unwrap();
        prop_assert!(f.levels().windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(f.jumps().windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(f.eval(10.0), 1.0);
        prop_assert_eq!(f.eval(-10.5), 0.0);
        let v = f.eval(y);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn mixture_cdf_is_monotone_in_z(
        p in 0.0f64..1.0,
        rho in -0.9f64..0.9,
        tau in -0.9f64..0.9,
        x in 1.0f64..20.0,
        z in -4.0f64..4.0,
        d in 0.0f64..2.0,
    ) {
        let m = MixtureModel::new(p, rho, tau, None).unwrap();
        let (a, b) = (m.conditional_cdf(x, z).unwrap(), m.conditional_cdf(x, z + d).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn limit_law_serde_round_trip(law in limit_law()) {
        let text = serde_json::to_string(&law).unwrap();
        let back: LimitLaw = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, law);
    }
}
