use cavity_ef::factorization::factorize;
use cavity_ef::model::qbo_point;
use cavity_ef::*;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qbo_eigenpairs(c in 0.0f64..0.6, q in -15.0f64..15.0) {
        let p = ModelParams::single_mode(0.4, c).unwrap();
        let s = qbo_point(&p, &[q]);
        let h = p.qbo_matrix(&[q]);
        for (e, v) in [(s.lower, s.v_lower), (s.upper, s.v_upper)] {
            let r0 = h[0][0] * v[0] + h[0][1] * v[1] - e * v[0];
            let r1 = h[1][0] * v[0] + h[1][1] * v[1] - e * v[1];
            prop_assert!(r0.abs().max(r1.abs()) < 1e-12 * (1.0 + e.abs()));
        }
        prop_assert!(s.upper >= s.lower);
        prop_assert!((s.v_lower[0] * s.v_upper[0] + s.v_lower[1] * s.v_upper[1]).abs() < 1e-15);
    }

    #[test]
    fn factorization_identities_on_smooth_states(
        x0 in -2.0f64..2.0,
        k0 in -1.5f64..1.5,
        mix in 0.0f64..1.0,
        chirp in -0.3f64..0.3,
    ) {
        let g = QGrid::line(15.0, 257).unwrap();
        let mut psi = SpinorField::zeros(g.clone(), 0.0);
        for (v, q) in psi.values.iter_mut().zip(g.axis(0).coords()) {
            let env = (-0.5 * (q - x0).powi(2)).exp();
            let a = Complex64::from_polar(env, k0 * q);
            let b = Complex64::from_polar(mix * env * (q - 0.3), chirp * q * q);
            *v = [a, b];
        }
        psi.normalize();
        let r = factorize(&psi).unwrap().report();
        prop_assert!(r.pnc < 1e-10);
        prop_assert!(r.reconstruction < 1e-12);
        prop_assert!(r.marginal < 1e-15);
        prop_assert!(r.zero_gauge < 1e-8, "{:?}", r);
    }
}
