use cvst::estimators::{cross_statistics, estimate_l2, mc_envelope, Denominator, Stat, StatCurve};
use cvst::grid::{ball_mass, erode, GridSpec, ScalarField};
use cvst::laws::{LambdaLaw, ScalarLaw};
use cvst::measure::{reweight, MeasurePair, P1Source};
use cvst::oracles::{compound_j12, compound_k12, compound_laplace};
use cvst::randfield::{thinning_weights, MeanSurface};
use proptest::prelude::*;

fn small_grid() -> GridSpec {
    GridSpec::new(0.0, 3.0, 0.0, 2.0, 0.1, 0.0).unwrap()
}

fn field(values: Vec<f64>) -> ScalarField<f64> {
    ScalarField::new(small_grid(), values).unwrap()
}

fn densities(max: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..max, small_grid().len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplace_estimators_lie_in_unit_interval(a in densities(3.0), b in densities(3.0)) {
        let t = [0.0, 0.2, 0.5, 0.9];
        let (phi1, phi2) = (field(a), field(b));
        let l2 = estimate_l2(&phi2, &t).unwrap();
        prop_assert!(l2.values.iter().all(|v| matches!(v, Some(x) if *x > 0.0 && *x <= 1.0)));
        if phi1.integral() > 0.0 {
            if let Ok(c) = cross_statistics(&phi1, &phi2, &t, Denominator::Hamilton, 1.0) {
                prop_assert!(c.l12.values.iter().all(|v| matches!(v, Some(x) if *x > 0.0 && *x <= 1.0 + 1e-12)));
                prop_assert!(c.k12.values.iter().all(|v| v.unwrap() >= 0.0));
            }
        }
    }

    #[test]
    fn ball_mass_is_additive(a in densities(2.0), b in densities(2.0), t in 0.0f64..0.9, cx in 0.9f64..2.1) {
        let (f, g) = (field(a), field(b));
        let sum = f.zip_with(&g, |x, y| x + y).unwrap();
        let c = [cx, 1.0];
        let lhs = ball_mass(&sum, c, t).unwrap();
        let rhs = ball_mass(&f, c, t).unwrap() + ball_mass(&g, c, t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn erosion_is_monotone(s in 0.0f64..0.95, d in 0.0f64..0.5) {
        let g = small_grid();
        let a = erode(&g, s).unwrap();
        if let Ok(b) = erode(&g, s + d) {
            prop_assert!(b.area() <= a.area());
            prop_assert!(b.pixels().all(|(i, j)| a.contains(i, j)));
        }
    }

    #[test]
    fn reweighting_round_trips(a in densities(5.0), p in prop::collection::vec(0.01f64..2.0, small_grid().len())) {
        let psi = field(a);
        let p1 = field(p);
        let m = MeasurePair::new(psi.clone(), psi.clone(), p1.clone(), p1.clone(), P1Source::Analytic).unwrap();
        let (phi, _) = reweight(&m).unwrap();
        let back = phi.zip_with(&p1, |x, y| x * y).unwrap();
        for (u, v) in back.values().iter().zip(psi.values()) {
            prop_assert!((u - v).abs() <= 1e-12 * v.max(1.0));
        }
    }

    #[test]
    fn thinning_weights_sum_to_one(scale in 2.0f64..50.0) {
        let (w1, w2) = thinning_weights(&small_grid(), &MeanSurface::Ramp { scale }).unwrap();
        prop_assert!(w1.values().iter().zip(w2.values()).all(|(a, b)| a + b == 1.0));
    }

    #[test]
    fn envelopes_bracket_the_mean(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 2..20), q in 0.01f64..0.99) {
        let t: Vec<f64> = (0..6).map(|k| k as f64 * 0.1).collect();
        let curves: Vec<StatCurve> =
            rows.into_iter().map(|r| StatCurve::new(Stat::K12, t.clone(), r.into_iter().map(Some).collect())).collect();
        let env = mc_envelope(&curves, q).unwrap();
        for k in 0..t.len() {
            let (lo, m, hi) = (env.lower[k].unwrap(), env.mean[k].unwrap(), env.upper[k].unwrap());
            prop_assert!(lo <= m && m <= hi);
        }
    }

    #[test]
    fn compound_series_identity(shape in 0.3f64..8.0, rate in 0.2f64..5.0, scale in 0.2f64..4.0) {
        // First term of the J series: K₁₂(t) − πt², read off the closed forms.
        let law = LambdaLaw::Linked { scale, base: ScalarLaw::Gamma { shape, rate } };
        let t = [0.25, 0.5, 1.0];
        let k = compound_k12(&law, &t, 2).unwrap();
        for (v, t) in k.values.iter().zip(t) {
            let s = std::f64::consts::PI * t * t;
            prop_assert!(((v - s) - s / shape).abs() <= 1e-12 * s);
        }
        let j = compound_j12(&law, &t, 2).unwrap();
        let [l2, l12, _] = compound_laplace(&law, &t, 2).unwrap();
        for k in 0..3 {
            prop_assert!((j.values[k] - l12.values[k] / l2.values[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn denominators_agree_for_unit_weights() {
    let one = ScalarField::constant(small_grid(), 1.0).unwrap();
    let t = [0.3, 0.6];
    let a = cross_statistics(&one, &one, &t, Denominator::ErosionVolume, 1.0).unwrap();
    let b = cross_statistics(&one, &one, &t, Denominator::Hamilton, 1.0).unwrap();
    for k in 0..2 {
        assert!((a.k12.values[k].unwrap() - b.k12.values[k].unwrap()).abs() < 1e-12);
        assert_eq!(a.l2.values[k], a.l12.values[k]);
    }
}
