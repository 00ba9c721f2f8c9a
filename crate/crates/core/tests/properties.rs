use std::f64::consts::{FRAC_PI_2, PI};

use lpkin_core::collision::r_alpha;
use lpkin_core::flow::{bernoulli_envelope, gronwall_envelope, longtime_bound};
use lpkin_core::geometry::{collide, dot, norm, EquatorRule};
use lpkin_core::inequalities::{kappa1, optimal_mu, Estim3Constants, L1Bounds};
use lpkin_core::state::{lp_power, maxwellian, NormSpec, VelocityGrid};
use proptest::prelude::*;

fn unit3(a: f64, z: f64) -> [f64; 3] {
    let s = (1.0 - z * z).sqrt();
    [s * a.cos(), s * a.sin(), z]
}

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-50.0f64..50.0)
}

proptest! {
    #[test]
    fn collisions_conserve_momentum_energy_and_relative_speed(
        v in vec3(), vs in vec3(), a in 0.0..2.0 * PI, z in -1.0f64..1.0,
    ) {
        let sigma = unit3(a, z);
        let (vp, vsp) = collide(&v, &vs, &sigma);
        let scale = dot(&v, &v) + dot(&vs, &vs) + 1.0;
        for i in 0..3 {
            prop_assert!((vp[i] + vsp[i] - v[i] - vs[i]).abs() <= 1e-12 * scale.sqrt());
        }
        let e = dot(&vp, &vp) + dot(&vsp, &vsp) - dot(&v, &v) - dot(&vs, &vs);
        prop_assert!(e.abs() <= 1e-12 * scale);
        let d = |x: &[f64; 3], y: &[f64; 3]| norm(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
        prop_assert!((d(&vp, &vsp) - d(&v, &vs)).abs() <= 1e-12 * scale.sqrt());
    }

    #[test]
    fn r_alpha_vanishes_at_zero_and_is_even_in_x(v in vec3(), vs in vec3(), x in 0.0f64..0.7, alpha in 1.0f64..3.0) {
        let eq = EquatorRule::new(3, 16).unwrap();
        let scale = (1.0 + dot(&v, &v)).powf(alpha) * (1.0 + dot(&vs, &vs)).powf(alpha);
        prop_assert!(r_alpha(0.0, &v, &vs, alpha, &eq).unwrap().abs() <= 1e-12 * scale);
        let plus = r_alpha(x, &v, &vs, alpha, &eq).unwrap();
        let minus = r_alpha(-x, &v, &vs, alpha, &eq).unwrap();
        prop_assert!((plus - minus).abs() <= 1e-10 * scale);
    }

    #[test]
    fn lp_power_is_homogeneous(lambda in 0.1f64..10.0, p in 1.1f64..3.0, q in 0.0f64..3.0) {
        let g = VelocityGrid::new(2, 12, 5.0).unwrap();
        let m = maxwellian(g, 1.0, &[0.3, -0.2], 0.8).unwrap();
        let spec = NormSpec::new(p, q).unwrap();
        let a = lp_power(&m.scaled(lambda), spec);
        let b = lambda.powf(p) * lp_power(&m, spec);
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn young_parameter_and_kappa1_bounds(theta in 0.0..FRAC_PI_2, p in 1.05f64..4.0, gamma in 0.0f64..1.0) {
        prop_assert!(optimal_mu(theta, p, 3, gamma) >= 1.0);
        let spec = NormSpec::new(p, 1.0).unwrap();
        let k = kappa1(spec, 3, gamma);
        let e = (3.0 + gamma) / spec.conjugate();
        prop_assert!(k >= e / 4.0);
        let ratio = ((0.5 * theta).cos().powf(-e) - 1.0) / (1.0 - theta.cos()).max(1e-300);
        prop_assert!(theta < 1e-6 || ratio <= k * (1.0 + 1e-9));
    }

    #[test]
    fn estim3_constants_close_the_bracket(
        p in 1.1f64..3.0, gamma in 0.0f64..1.0, theta0 in 0.01f64..1.5,
        mass in 0.1f64..5.0, extra in 1.0f64..50.0, dim in 2usize..4,
    ) {
        let spec = NormSpec::new(p, 2.0 / p).unwrap();
        let b = L1Bounds { mass_lower: mass, moment_upper: mass * extra };
        let c = Estim3Constants::from_parts(b, spec, dim, gamma, theta0, 1.0).unwrap();
        prop_assert!(c.closing <= 0.5 * c.k0);
        prop_assert!(c.c_plus.is_finite() && c.c_plus > 0.0);
        prop_assert!((c.k_minus - 0.5 * c.k0).abs() <= 1e-15 * c.k0);
    }

    #[test]
    fn envelopes_are_monotone(y0 in 0.01f64..10.0, c in 0.01f64..5.0, t in 0.01f64..5.0, dt in 0.01f64..1.0) {
        prop_assert!(gronwall_envelope(y0, c, t + dt) >= gronwall_envelope(y0, c, t));
        let a = bernoulli_envelope(t, c, 0.5, 2.0, 2.0, 1.0).unwrap();
        let b = bernoulli_envelope(t + dt, c, 0.5, 2.0, 2.0, 1.0).unwrap();
        prop_assert!(b <= a);
        prop_assert!(b >= (c / 0.5).powf(2.0) * (1.0 - 1e-12));
    }

    #[test]
    fn longtime_bound_dominates_start(y in 0.0f64..10.0, c in 0.1f64..10.0, k in 0.1f64..10.0, eps in 0.01f64..0.99) {
        let b = longtime_bound(y, c, k, eps).unwrap();
        prop_assert!(b >= y && b >= (c / k).powf(1.0 / eps) * (1.0 - 1e-12));
    }
}
