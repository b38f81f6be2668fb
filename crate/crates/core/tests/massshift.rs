use std::sync::Arc;

use mirror_core::massshift::{flux_pair, mu0_closed_form, mu_direct, mu_dot_strong, mu_dot_weak, Form};
use mirror_core::taylor::Jet;
use mirror_core::trajectory::{rapidity_profile, rescale, Hyperbolic, Trajectory, Uniform};
use mirror_core::QuadratureSpec;
use proptest::prelude::*;

fn tight() -> QuadratureSpec {
    QuadratureSpec { rel_tol: 1e-10, abs_tol: 1e-15, ..Default::default() }
}

fn wobble(beta: f64, eps: f64, omega: f64) -> Arc<dyn Trajectory> {
    let eta0 = beta.atanh();
    Arc::new(
        rapidity_profile(move |t: Jet| Jet::constant(eta0) + t.scale(omega).sin().scale(eps), "wobble", None, 0.5).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn uniform_motion_has_no_rate(beta in -0.95f64..0.95, tau in -10.0f64..10.0, a in 0.2f64..5.0) {
        let u = Uniform::new(beta).unwrap();
        let spec = QuadratureSpec::default();
        let s = mu_dot_strong(&u, tau, a, &spec).unwrap();
        let w = mu_dot_weak(&u, tau, a, &spec).unwrap();
        prop_assert!(s.mu_dot.abs() < 1e-10 * a * a);
        prop_assert!(w.mu_dot.abs() < 1e-10 * a * a);
    }

    #[test]
    fn hyperbolic_interior_has_no_rate(alpha_over_a in 0.05f64..1.0, tau in 0.0f64..5.0, a in 0.5f64..3.0) {
        let h = Hyperbolic::new(alpha_over_a * a, None).unwrap();
        let r = mu_dot_strong(&h, tau, a, &QuadratureSpec::default()).unwrap();
        prop_assert!(r.mu_dot.abs() < 1e-10 * a * a, "{:?}", r);
    }
}

#[test]
fn weak_and_strong_forms_agree_on_a_smooth_wobble() {
    let traj = wobble(0.3, 0.2, 0.6);
    let spec = tight();
    for tau in [0.0, 1.3, 4.0] {
        let s = mu_dot_strong(traj.as_ref(), tau, 1.0, &spec).unwrap();
        let w = mu_dot_weak(traj.as_ref(), tau, 1.0, &spec).unwrap();
        assert!((s.mu_dot - w.mu_dot).abs() < 1e-6 * s.mu_dot.abs(), "{s:?} {w:?}");
        assert!((s.flux_plus - w.flux_plus).abs() < 1e-6 * s.flux_plus.abs().max(s.mu_dot.abs()));
        assert!((s.flux_plus + s.flux_minus + s.mu_dot).abs() < 1e-12 * s.flux_plus.abs().max(1e-12));
    }
}

#[test]
fn rate_scales_as_inverse_square_under_rescaling() {
    let traj = wobble(-0.2, 0.25, 0.4);
    let spec = tight();
    let lambda = 2.0;
    let scaled = rescale(&traj, lambda).unwrap();
    for tau in [0.5, 2.5] {
        let r = mu_dot_strong(traj.as_ref(), tau, 1.5, &spec).unwrap();
        let rs = mu_dot_strong(scaled.as_ref(), lambda * tau, 1.5 / lambda, &spec).unwrap();
        let tol = 1e-7 * r.mu_dot.abs() + r.error + rs.error * lambda * lambda;
        assert!((rs.mu_dot * lambda * lambda - r.mu_dot).abs() <= tol, "{r:?} {rs:?}");
    }
}

#[test]
fn flux_pair_routes_past_breakpoints_to_the_weak_form() {
    let kinked = Hyperbolic::new(0.5, Some(0.0)).unwrap();
    let spec = QuadratureSpec::default();
    assert_eq!(flux_pair(&kinked, 3.0, 1.0, &spec).unwrap().form, Form::Weak);
    let smooth = wobble(0.0, 0.1, 0.3);
    assert_eq!(flux_pair(smooth.as_ref(), 3.0, 1.0, &spec).unwrap().form, Form::Strong);
}

#[test]
fn direct_form_reproduces_the_uniform_constant() {
    let spec = QuadratureSpec { rel_tol: 1e-11, abs_tol: 1e-15, window_lambda: 60.0, ..Default::default() };
    for (a, beta) in [(1.0, 0.0), (2.0, 0.6)] {
        let u = Uniform::new(beta).unwrap();
        let d = mu_direct(&u, 0.3, a, &spec).unwrap();
        let expected = mu0_closed_form(a);
        assert!((d.raw - expected).abs() < 1e-8 * expected.abs(), "a={a}: {d:?} vs {expected}");
        assert!(d.mu.abs() < 1e-9 * a);
    }
}
