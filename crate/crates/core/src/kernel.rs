//! Memory kernels `K±(τ₁,τ₂) = (ż±(τ₁) - ż±(τ₂)) / (z±(τ₁) - z±(τ₂))` and
//! their mixed derivative `∂τ₁∂τ₂ K±`.
//!
//! Far from the diagonal both are evaluated from closed-form expressions in
//! the endpoint data. Close to it those expressions cancel catastrophically,
//! so `K±` is written as a ratio of divided differences,
//! `K = ż[τ₁,τ₂] / z[τ₁,τ₂]`, and the mixed derivative as the matching
//! combination of confluent divided differences
//!
//! ```text
//! ∂₁∂₂(P/Q) = P₁₂/Q - (P₁Q₂ + P₂Q₁)/Q² - P·Q₁₂/Q² + 2P·Q₁Q₂/Q³
//! ```
//!
//! with `P = ż[1,2]`, `P₁ = ż[1,1,2]`, `P₁₂ = ż[1,1,2,2]` and likewise for `Q`
//! from `z`. Each divided difference is a weighted average of a derivative
//! along the segment (Hermite–Genocchi), e.g. `z[1,1,2,2] = ∫₀¹ u(1-u) z⃛ du`,
//! which is integrated numerically. No differences of nearly equal numbers
//! remain, so the near branch is accurate to rounding on the diagonal itself.

use crate::error::KernelError;
use crate::quadrature::{integrate_vec, Tolerance};
use crate::trajectory::{BreakpointKind, RapidityJet, Trajectory, WorldlinePoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub kplus: f64,
    pub kminus: f64,
    pub sum: f64,
    pub mixed_deriv_sum: Option<f64>,
}

/// `∂τ₁∂τ₂ K⁺` and `∂τ₁∂τ₂ K⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MixedDerivative {
    pub plus: f64,
    pub minus: f64,
}

impl MixedDerivative {
    pub fn sum(&self) -> f64 {
        self.plus + self.minus
    }
}

/// Damping factor `exp(a((τ₁+τ₂)/2 - τ))`; at most one for `τ₁, τ₂ ≤ τ`.
pub fn damping_weight(tau1: f64, tau2: f64, tau: f64, a: f64) -> f64 {
    (a * (0.5 * (tau1 + tau2) - tau)).exp()
}

/// Separations below this use the divided-difference branch. Tying it to
/// `1/a` alone keeps branch selection invariant under rescaling.
pub fn near_diagonal_threshold(a: f64) -> f64 {
    1.0 / a
}

const SEGMENT_TOL: Tolerance = Tolerance { rel: 1e-13, abs: 0.0, max_subdivisions: 256 };

/// Breakpoints in the closed interval `[lo, hi]`.
fn breaks_between(traj: &dyn Trajectory, lo: f64, hi: f64) -> (Option<f64>, Vec<f64>) {
    let mut jump = None;
    let mut kinks = Vec::new();
    for b in traj.breakpoints_between(lo, hi) {
        match b.kind {
            BreakpointKind::VelocityJump => jump = jump.or(Some(b.tau)),
            BreakpointKind::AccelerationJump => kinks.push(b.tau),
        }
    }
    (jump, kinks)
}

fn jets(traj: &dyn Trajectory, tau: f64) -> Result<[[f64; 4]; 2], KernelError> {
    let j: RapidityJet = traj.rapidity(tau)?;
    Ok([j.null_derivatives(1.0), j.null_derivatives(-1.0)])
}

/// Endpoint data reused across many kernel evaluations: null-coordinate
/// derivatives `[ż, z̈, z⃛, z⁗]` for both signs and the position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub tau: f64,
    pub alpha: f64,
    pub d: [[f64; 4]; 2],
    pub z: WorldlinePoint,
}

impl KernelPoint {
    pub fn new(traj: &dyn Trajectory, tau: f64) -> Result<Self, KernelError> {
        let j = traj.rapidity(tau)?;
        Ok(KernelPoint {
            tau,
            alpha: j.alpha,
            d: [j.null_derivatives(1.0), j.null_derivatives(-1.0)],
            z: traj.position(tau)?,
        })
    }

    fn separation(&self, other: &KernelPoint) -> [f64; 2] {
        [self.z.zplus - other.z.zplus, self.z.zminus - other.z.zminus]
    }
}

/// Both points strictly inside the frozen uniform past, where every kernel
/// quantity vanishes identically.
fn in_uniform_past(traj: &dyn Trajectory, hi: &KernelPoint) -> bool {
    traj.uniform_before().is_some_and(|t| hi.tau < t)
}

fn ordered_points<'p>(p: &'p KernelPoint, q: &'p KernelPoint) -> (&'p KernelPoint, &'p KernelPoint) {
    if p.tau >= q.tau {
        (p, q)
    } else {
        (q, p)
    }
}

/// `Δz±` between two points, exact when the trajectory offers it.
fn separation(traj: &dyn Trajectory, hi: &KernelPoint, lo: &KernelPoint) -> Result<[f64; 2], KernelError> {
    if traj.exact_separation() {
        let (p, m) = traj.null_separation(hi.tau, lo.tau)?;
        return Ok([p, m]);
    }
    Ok(hi.separation(lo))
}

/// `K±` from endpoint data.
fn k_direct(hi: &KernelPoint, lo: &KernelPoint, dz: [f64; 2]) -> [f64; 2] {
    [(hi.d[0][0] - lo.d[0][0]) / dz[0], (hi.d[1][0] - lo.d[1][0]) / dz[1]]
}

/// Divided differences `z±[τ₁,τ₂]` and `ż±[τ₁,τ₂]`, each integrated along
/// the segment: `[Q⁺, P⁺, Q⁻, P⁻]`.
fn first_differences(traj: &dyn Trajectory, hi: &KernelPoint, lo: &KernelPoint, cuts: &[f64]) -> Result<[f64; 4], KernelError> {
    if hi.tau == lo.tau {
        return Ok([hi.d[0][0], hi.d[0][1], hi.d[1][0], hi.d[1][1]]);
    }
    // The stretch inside the frozen uniform past contributes exactly.
    let (start, frozen) = match traj.uniform_before() {
        Some(ub) if lo.tau < ub && ub < hi.tau => {
            let w = ub - lo.tau;
            (ub, [w * lo.d[0][0], 0.0, w * lo.d[1][0], 0.0])
        }
        _ => (lo.tau, [0.0; 4]),
    };
    let mut failure = None;
    let r = integrate_vec::<4, _>(
        |t| match jets(traj, t) {
            Ok(j) => [j[0][0], j[0][1], j[1][0], j[1][1]],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0; 4]
            }
        },
        start,
        hi.tau,
        cuts,
        &SEGMENT_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let h = hi.tau - lo.tau;
    Ok(std::array::from_fn(|i| (frozen[i] + r.value[i]) / h))
}

/// `K±` as `ż[1,2] / z[1,2]`.
fn k_near(traj: &dyn Trajectory, hi: &KernelPoint, lo: &KernelPoint, cuts: &[f64]) -> Result<[f64; 2], KernelError> {
    let dd = first_differences(traj, hi, lo, cuts)?;
    Ok([dd[1] / dd[0], dd[3] / dd[2]])
}

/// Mixed derivative from endpoint data:
/// `(z̈₁ż₂ + z̈₂ż₁)/Δz² - 2Δż·ż₁ż₂/Δz³`.
fn mixed_direct(hi: &KernelPoint, lo: &KernelPoint, dz: [f64; 2]) -> [f64; 2] {
    let one = |d1: &[f64; 4], d2: &[f64; 4], dz: f64| {
        let (v1, v2, a1, a2) = (d1[0], d2[0], d1[1], d2[1]);
        ((a1 * v2 + a2 * v1) * dz - 2.0 * (v1 - v2) * v1 * v2) / (dz * dz * dz)
    };
    [one(&hi.d[0], &lo.d[0], dz[0]), one(&hi.d[1], &lo.d[1], dz[1])]
}

#[allow(clippy::too_many_arguments)]
fn combine(q: f64, q1: f64, q2: f64, q12: f64, p: f64, p1: f64, p2: f64, p12: f64) -> f64 {
    let iq = 1.0 / q;
    let iq2 = iq * iq;
    p12 * iq - (p1 * q2 + p2 * q1) * iq2 - p * q12 * iq2 + 2.0 * p * q1 * q2 * iq2 * iq
}

/// Mixed derivative from confluent divided differences along the segment.
fn mixed_near(traj: &dyn Trajectory, hi: &KernelPoint, lo: &KernelPoint) -> Result<[f64; 2], KernelError> {
    let h = hi.tau - lo.tau;
    // Layout per sign: [Q, Q1, Q2, Q12, P, P1, P2, P12].
    let mut dd = [0.0; 16];
    if h == 0.0 {
        for s in 0..2 {
            let d = &hi.d[s];
            dd[8 * s..8 * s + 8].copy_from_slice(&[
                d[0],
                0.5 * d[1],
                0.5 * d[1],
                d[2] / 6.0,
                d[1],
                0.5 * d[2],
                0.5 * d[2],
                d[3] / 6.0,
            ]);
        }
    } else {
        let mut failure = None;
        let r = integrate_vec::<16, _>(
            |u| {
                let j = match jets(traj, lo.tau + u * h) {
                    Ok(j) => j,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return [0.0; 16];
                    }
                };
                let w = u * (1.0 - u);
                let mut out = [0.0; 16];
                for s in 0..2 {
                    let d = &j[s];
                    out[8 * s..8 * s + 8].copy_from_slice(&[
                        d[0],
                        u * d[1],
                        (1.0 - u) * d[1],
                        w * d[2],
                        d[1],
                        u * d[2],
                        (1.0 - u) * d[2],
                        w * d[3],
                    ]);
                }
                out
            },
            0.0,
            1.0,
            &[],
            &SEGMENT_TOL,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        dd = r.value;
    }
    let m = |s: usize| {
        let v = &dd[8 * s..8 * s + 8];
        combine(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7])
    };
    Ok([m(0), m(1)])
}

/// `K±` between two cached points.
pub fn kernel_k_at(traj: &dyn Trajectory, p: &KernelPoint, q: &KernelPoint, a: f64) -> Result<[f64; 2], KernelError> {
    let (hi, lo) = ordered_points(p, q);
    if in_uniform_past(traj, hi) {
        return Ok([0.0, 0.0]);
    }
    let precise = traj.precise_after().filter(|t| *t < hi.tau);
    if hi.tau - lo.tau >= near_diagonal_threshold(a) || (hi.tau > lo.tau && precise.is_some_and(|t| t <= lo.tau)) {
        return Ok(k_direct(hi, lo, separation(traj, hi, lo)?));
    }
    let split = precise.filter(|t| *t > lo.tau);
    let (jump, kinks) = breaks_between(traj, lo.tau, split.unwrap_or(hi.tau));
    let straddles_jump = jump.is_some_and(|t| hi.tau > lo.tau && t > lo.tau);
    if straddles_jump {
        return Ok(k_direct(hi, lo, separation(traj, hi, lo)?));
    }
    match split {
        None => k_near(traj, hi, lo, &kinks),
        Some(t) => {
            // Integrate up to the split, take exact differences beyond it.
            let mid = KernelPoint::new(traj, t)?;
            let part = first_differences(traj, &mid, lo, &kinks)?;
            let w = (t - lo.tau) / (hi.tau - lo.tau);
            let dz = separation(traj, hi, &mid)?;
            let rest = [dz[0], hi.d[0][0] - mid.d[0][0], dz[1], hi.d[1][0] - mid.d[1][0]];
            let dd: [f64; 4] = std::array::from_fn(|i| w * part[i] + rest[i] / (hi.tau - lo.tau));
            Ok([dd[1] / dd[0], dd[3] / dd[2]])
        }
    }
}

/// `∂τ₁∂τ₂ K±` between two cached points; see [`kernel_mixed`].
pub fn kernel_mixed_at(traj: &dyn Trajectory, p: &KernelPoint, q: &KernelPoint, a: f64) -> Result<MixedDerivative, KernelError> {
    let (hi, lo) = ordered_points(p, q);
    if in_uniform_past(traj, hi) {
        return Ok(MixedDerivative { plus: 0.0, minus: 0.0 });
    }
    let (jump, kinks) = breaks_between(traj, lo.tau, hi.tau);
    if let Some(at) = jump {
        return Err(KernelError::InsufficientSmoothness { lo: lo.tau, hi: hi.tau, at });
    }
    let interior_kink = kinks.iter().any(|t| *t > lo.tau && *t < hi.tau);
    let m = if hi.tau - lo.tau >= near_diagonal_threshold(a) || interior_kink {
        mixed_direct(hi, lo, separation(traj, hi, lo)?)
    } else {
        mixed_near(traj, hi, lo)?
    };
    Ok(MixedDerivative { plus: m[0], minus: m[1] })
}

/// `ln(z⁺[τ₁,τ₂]·z⁻[τ₁,τ₂])`, the part of `ln(Δz⁺Δz⁻)` left after removing
/// `ln(τ₁-τ₂)²`. Zero on the diagonal and for uniform motion.
pub fn log_chord_ratio_at(traj: &dyn Trajectory, p: &KernelPoint, q: &KernelPoint, a: f64) -> Result<f64, KernelError> {
    let (hi, lo) = ordered_points(p, q);
    if in_uniform_past(traj, hi) {
        return Ok(0.0);
    }
    let h = hi.tau - lo.tau;
    let (jump, kinks) = breaks_between(traj, lo.tau, hi.tau);
    let straddles_jump = jump.is_some_and(|t| h > 0.0 && t > lo.tau);
    if h >= near_diagonal_threshold(a) || straddles_jump {
        let dz = separation(traj, hi, lo)?;
        return Ok((dz[0] / h).ln() + (dz[1] / h).ln());
    }
    let dd = first_differences(traj, hi, lo, &kinks)?;
    Ok(dd[0].ln() + dd[2].ln())
}

/// `K±(τ₁,τ₂)` and their sum. Symmetric in the arguments by construction.
/// Defined across breakpoints (velocity jumps give a `1/|τ₁-τ₂|`-type
/// singularity near the jump), so this never refuses for smoothness.
pub fn kernel_k(traj: &dyn Trajectory, tau1: f64, tau2: f64, a: f64) -> Result<KernelValue, KernelError> {
    let (p, q) = (KernelPoint::new(traj, tau1)?, KernelPoint::new(traj, tau2)?);
    let k = kernel_k_at(traj, &p, &q, a)?;
    Ok(KernelValue { kplus: k[0], kminus: k[1], sum: k[0] + k[1], mixed_deriv_sum: None })
}

/// `∂τ₁∂τ₂ K±` for both signs.
///
/// Needs a velocity that is continuous on `[min τ, max τ]`; a velocity jump in
/// that range (endpoints included) is rejected, and callers should switch to
/// the weak form. Acceleration jumps are tolerated: the near branch is skipped
/// for segments containing one, since the closed form only needs smoothness
/// at the endpoints.
pub fn kernel_mixed(traj: &dyn Trajectory, tau1: f64, tau2: f64, a: f64) -> Result<MixedDerivative, KernelError> {
    let (p, q) = (KernelPoint::new(traj, tau1)?, KernelPoint::new(traj, tau2)?);
    kernel_mixed_at(traj, &p, &q, a)
}

/// `∂τ₁∂τ₂ (K⁺ + K⁻)`.
pub fn kernel_mixed_derivative(traj: &dyn Trajectory, tau1: f64, tau2: f64, a: f64) -> Result<f64, KernelError> {
    Ok(kernel_mixed(traj, tau1, tau2, a)?.sum())
}

/// Kernel value together with its mixed derivative.
pub fn kernel_full(traj: &dyn Trajectory, tau1: f64, tau2: f64, a: f64) -> Result<KernelValue, KernelError> {
    let mut k = kernel_k(traj, tau1, tau2, a)?;
    k.mixed_deriv_sum = Some(kernel_mixed_derivative(traj, tau1, tau2, a)?);
    Ok(k)
}

/// Branch-forced evaluations, exposed for cross-checking the two branches.
pub mod branches {
    use super::*;

    fn points(traj: &dyn Trajectory, tau1: f64, tau2: f64) -> Result<(KernelPoint, KernelPoint), KernelError> {
        let (p, q) = (KernelPoint::new(traj, tau1)?, KernelPoint::new(traj, tau2)?);
        Ok(if p.tau >= q.tau { (p, q) } else { (q, p) })
    }

    pub fn mixed_near_branch(traj: &dyn Trajectory, tau1: f64, tau2: f64) -> Result<MixedDerivative, KernelError> {
        let (hi, lo) = points(traj, tau1, tau2)?;
        let m = mixed_near(traj, &hi, &lo)?;
        Ok(MixedDerivative { plus: m[0], minus: m[1] })
    }

    pub fn mixed_direct_branch(traj: &dyn Trajectory, tau1: f64, tau2: f64) -> Result<MixedDerivative, KernelError> {
        let (hi, lo) = points(traj, tau1, tau2)?;
        let m = mixed_direct(&hi, &lo, separation(traj, &hi, &lo)?);
        Ok(MixedDerivative { plus: m[0], minus: m[1] })
    }

    pub fn k_near_branch(traj: &dyn Trajectory, tau1: f64, tau2: f64) -> Result<[f64; 2], KernelError> {
        let (hi, lo) = points(traj, tau1, tau2)?;
        k_near(traj, &hi, &lo, &[])
    }

    pub fn k_direct_branch(traj: &dyn Trajectory, tau1: f64, tau2: f64) -> Result<[f64; 2], KernelError> {
        let (hi, lo) = points(traj, tau1, tau2)?;
        Ok(k_direct(&hi, &lo, separation(traj, &hi, &lo)?))
    }
}
