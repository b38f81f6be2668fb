use std::sync::Arc;

use mirror_core::kernel::{branches, kernel_k, kernel_mixed, kernel_mixed_derivative, near_diagonal_threshold};
use mirror_core::taylor::Jet;
use mirror_core::trajectory::{rapidity_profile, rescale, Trajectory};
use proptest::prelude::*;

fn sine(eps: f64, omega: f64) -> Arc<dyn Trajectory> {
    Arc::new(rapidity_profile(move |t: Jet| t.scale(omega).sin().scale(eps), "sine", None, 0.5).unwrap())
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixed_derivative_is_symmetric(
        eps in 0.01f64..0.8, omega in 0.05f64..1.5, t1 in -5.0f64..5.0, t2 in -5.0f64..5.0, a in 0.3f64..5.0,
    ) {
        let traj = sine(eps, omega);
        let m12 = kernel_mixed_derivative(traj.as_ref(), t1, t2, a).unwrap();
        let m21 = kernel_mixed_derivative(traj.as_ref(), t2, t1, a).unwrap();
        prop_assert!(rel_close(m12, m21, 1e-12), "{} vs {}", m12, m21);
    }

    #[test]
    fn branches_agree_around_the_switch(
        eps in 0.01f64..0.6, omega in 0.05f64..1.0, tau in -4.0f64..4.0, frac in 0.5f64..2.0, a in 0.3f64..4.0,
    ) {
        let traj = sine(eps, omega);
        let h = frac * near_diagonal_threshold(a);
        let (t1, t2) = (tau + h, tau);
        let near = branches::mixed_near_branch(traj.as_ref(), t1, t2).unwrap();
        let far = branches::mixed_direct_branch(traj.as_ref(), t1, t2).unwrap();
        // The direct branch subtracts terms of size 1/h² built from position
        // chords with absolute error ~ε(1 + |τ|), so it carries an absolute
        // roundoff floor on top of the relative agreement.
        let floor = 64.0 * f64::EPSILON * (1.0 + tau.abs() + h) / (h * h * h);
        let tol = 1e-9 * near.plus.abs().max(near.minus.abs()) + floor;
        prop_assert!((near.plus - far.plus).abs() <= tol, "{:?} vs {:?}", near, far);
        prop_assert!((near.minus - far.minus).abs() <= tol, "{:?} vs {:?}", near, far);
        let kn = branches::k_near_branch(traj.as_ref(), t1, t2).unwrap();
        let kd = branches::k_direct_branch(traj.as_ref(), t1, t2).unwrap();
        prop_assert!(rel_close(kn[0], kd[0], 1e-9) && rel_close(kn[1], kd[1], 1e-9));
    }

    #[test]
    fn rescaling_is_exact(t1 in -4.0f64..4.0, t2 in -4.0f64..4.0, a in 0.3f64..4.0) {
        let traj = sine(0.3, 0.5);
        let lambda = 2.0;
        let scaled = rescale(&traj, lambda).unwrap();
        let k = kernel_k(traj.as_ref(), t1, t2, a).unwrap();
        let ks = kernel_k(scaled.as_ref(), lambda * t1, lambda * t2, a / lambda).unwrap();
        prop_assert!(rel_close(ks.kplus * lambda, k.kplus, 4.0 * f64::EPSILON));
        prop_assert!(rel_close(ks.kminus * lambda, k.kminus, 4.0 * f64::EPSILON));
        let m = kernel_mixed_derivative(traj.as_ref(), t1, t2, a).unwrap();
        let ms = kernel_mixed_derivative(scaled.as_ref(), lambda * t1, lambda * t2, a / lambda).unwrap();
        // Scaling by a power of two is exact in every input, but the direct
        // form cancels terms of size 1/d² (at most a² once the series takes
        // over), so rounding of those terms shows up at the ε level.
        let d = (t1 - t2).abs();
        let terms = m.abs().max((1.0 / (d * d)).min(a * a));
        prop_assert!((ms * lambda.powi(3) - m).abs() <= 8.0 * f64::EPSILON * terms, "{} vs {}", ms * 8.0, m);
    }
}

#[test]
fn mixed_derivative_matches_finite_difference_stencil() {
    let traj = sine(0.3, 0.5);
    let a = 1.0;
    let h = 1e-4;
    let k = |x: f64, y: f64| kernel_k(traj.as_ref(), x, y, a).unwrap();
    for (t1, t2) in [(0.7, -0.4), (2.0, 0.5), (1.0, -2.5), (3.3, 3.0), (-1.0, -4.0)] {
        let m = kernel_mixed(traj.as_ref(), t1, t2, a).unwrap();
        let corners = [(h, h, 1.0), (h, -h, -1.0), (-h, h, -1.0), (-h, -h, 1.0)];
        let (mut fp, mut fm) = (0.0, 0.0);
        for (d1, d2, w) in corners {
            let v = k(t1 + d1, t2 + d2);
            fp += w * v.kplus;
            fm += w * v.kminus;
        }
        let (fp, fm) = (fp / (4.0 * h * h), fm / (4.0 * h * h));
        assert!(rel_close(m.plus, fp, 1e-6), "({t1},{t2}) plus: {} vs {fp}", m.plus);
        assert!(rel_close(m.minus, fm, 1e-6), "({t1},{t2}) minus: {} vs {fm}", m.minus);
    }
}
