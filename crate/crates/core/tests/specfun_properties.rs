use std::f64::consts::PI;

use casimir_sphere::scaled::Scaled;
use casimir_sphere::specfun::*;
use num_complex::Complex64;
use proptest::prelude::*;

const KINDS: [RadialFunctionKind; 3] = [
    RadialFunctionKind::BesselJ,
    RadialFunctionKind::HankelOut,
    RadialFunctionKind::HankelIn,
];

fn arg() -> impl Strategy<Value = Complex64> {
    (0.1f64.ln()..50f64.ln(), -PI..PI).prop_map(|(lr, a)| Complex64::from_polar(lr.exp(), a))
}

fn values(kind: RadialFunctionKind, l_max: usize, z: Complex64) -> Vec<Scaled> {
    radial_sequence(kind, l_max, z, DEFAULT_L_CAP)
        .unwrap()
        .iter()
        .map(|s| s.value_scaled())
        .collect()
}

fn ratio(num: Scaled, den: Scaled) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    (num.ln_abs() - den.ln_abs()).exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn recurrence_holds_for_every_kind(l in 1usize..100, z in arg()) {
        for kind in KINDS {
            let s = values(kind, l + 1, z);
            let mid = s[l].scale_by((2 * l + 1) as f64 / z);
            let res = s[l - 1].add(s[l + 1]).sub(mid);
            let size = [s[l - 1], s[l + 1], mid]
                .into_iter()
                .max_by(|a, b| a.ln_abs().total_cmp(&b.ln_abs()))
                .unwrap();
            prop_assert!(ratio(res, size) < 1e-10, "{kind:?} l={l} z={z}");
        }
    }

    #[test]
    fn bessel_j_commutes_with_conjugation(l in 0usize..100, z in arg()) {
        let a = values(RadialFunctionKind::BesselJ, l, z)[l];
        let b = values(RadialFunctionKind::BesselJ, l, z.conj())[l];
        let b = Scaled::new(b.mant.conj(), b.log_scale);
        prop_assert!(ratio(a.sub(b), a) < 1e-12, "l={l} z={z}");
    }

    #[test]
    fn hankels_average_to_bessel_j(l in 0usize..60, z in arg()) {
        let j = values(RadialFunctionKind::BesselJ, l, z)[l];
        let h1 = values(RadialFunctionKind::HankelOut, l, z)[l];
        let h2 = values(RadialFunctionKind::HankelIn, l, z)[l];
        let avg = h1.add(h2).scale_by(Complex64::new(0.5, 0.0));
        let size = if h1.ln_abs() > h2.ln_abs() { h1 } else { h2 };
        prop_assert!(ratio(avg.sub(j), size) < 1e-12, "l={l} z={z}");
    }

    #[test]
    fn wronskian_is_exact_up_to_cancellation(l in 0usize..100, z in arg()) {
        prop_assert!(wronskian_residual_relative(l, z).unwrap() < 1e-11);
        if z.im > -5.0 {
            prop_assert!(wronskian_residual(l, z).unwrap() < 1e-10, "l={l} z={z}");
        }
    }

    #[test]
    fn derivative_identity(l in 1usize..100, z in arg()) {
        for kind in KINDS {
            let seq = radial_sequence(kind, l, z, DEFAULT_L_CAP).unwrap();
            let s = seq[l];
            let prev = seq[l - 1].value_scaled();
            let want = prev.sub(s.value_scaled().scale_by((l + 1) as f64 / z));
            let got = Scaled::new(s.derivative, s.log_scale);
            prop_assert!(ratio(got.sub(want), want) < 1e-10, "{kind:?} l={l} z={z}");
        }
    }
}
