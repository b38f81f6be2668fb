//! Mass shift `μ(τ)`, its rate `μ̇`, and the flux split `F±`.
//!
//! The rate is a damped double integral over the past history,
//!
//! ```text
//! μ̇(τ) = -(a/8π) ∬ ∂τ₁∂τ₂(K⁺ + K⁻) · e^{a((τ₁+τ₂)/2 - τ)} dτ₁dτ₂,
//! ```
//!
//! with `F± = +(a/8π) ∬ ∂τ₁∂τ₂K± · e^{…}` so that `μ̇ = -(F⁺ + F⁻)`. Two
//! integrations by parts give the weak form, which only needs the kernel
//! itself and so survives velocity jumps:
//!
//! ```text
//! ∬ ∂₁∂₂K·E = K(τ,τ) - a ∫ K(s,τ) e^{a(s-τ)/2} ds + (a²/4) ∬ K·E.
//! ```
//!
//! `K±(τ,τ) = ±α(τ)` cancels in the sum but not in the individual fluxes.
//! `μ` itself is accumulated from `μ̇` starting at zero in the uniform past,
//! and independently available from the log-separation form
//! ([`mu_direct`]).

use crate::error::{KernelError, MassShiftError};
use crate::kernel::{kernel_k_at, kernel_mixed_at, log_chord_ratio_at, KernelPoint};
use crate::quadrature::{history_1d_vec, history_2d_vec, integrate_log_singular, tanh_sinh_from_singular, QuadratureSpec};
use crate::trajectory::{BreakpointKind, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Mirror–field coupling `a > 0` (inverse length).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling(f64);

impl Coupling {
    pub fn new(a: f64) -> Result<Self, MassShiftError> {
        if a > 0.0 && a.is_finite() {
            Ok(Coupling(a))
        } else {
            Err(MassShiftError::InvalidCoupling(a))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Strong,
    Weak,
}

/// `μ̇` and the flux split at one proper time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub tau: f64,
    pub mu_dot: f64,
    pub flux_plus: f64,
    pub flux_minus: f64,
    /// Local part `(a/8π)·α(τ)` contained in `flux_plus` (and with opposite
    /// sign in `flux_minus`).
    pub local: f64,
    pub alpha: f64,
    /// Quadrature error estimate plus truncated-tail bound on `μ̇`.
    pub error: f64,
    pub converged: bool,
    pub form: Form,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassShiftSample {
    pub tau: f64,
    pub mu: f64,
    pub mu_dot: f64,
    pub flux_plus: f64,
    pub flux_minus: f64,
    pub alpha: f64,
    pub err: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassShiftSeries {
    pub coupling: f64,
    pub trajectory: String,
    pub samples: Vec<MassShiftSample>,
}

impl MassShiftSeries {
    pub fn converged(&self) -> bool {
        self.samples.iter().all(|s| s.converged)
    }
}

/// Result of the log-separation evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectMassShift {
    /// Renormalized value `μ₁ + μ₂ - μ₀`.
    pub mu: f64,
    /// `μ₁ + μ₂` with the logarithmic parts integrated numerically.
    pub raw: f64,
    pub mu0: f64,
    /// Error estimate for `mu`, including the truncated-window tail.
    pub error: f64,
    /// Error estimate for `raw`: `error` plus the logarithmic parts and their
    /// tails beyond the window.
    pub raw_error: f64,
    pub converged: bool,
}

fn prefactor(a: f64) -> f64 {
    a / (8.0 * PI)
}

fn check(a: f64, spec: &QuadratureSpec) -> Result<(), MassShiftError> {
    Coupling::new(a)?;
    spec.validate()?;
    Ok(())
}

fn breakpoint_times(traj: &dyn Trajectory) -> Vec<f64> {
    traj.breakpoints().iter().map(|b| b.tau).collect()
}

fn window_has_breakpoint(traj: &dyn Trajectory, tau: f64, a: f64, spec: &QuadratureSpec) -> Option<f64> {
    let lo = spec.window_start(tau, a);
    traj.breakpoints().into_iter().map(|b| b.tau).find(|t| *t >= lo && *t <= tau)
}

/// Reuses the endpoint data of the outer quadrature variable, which stays
/// fixed over a whole inner integration.
struct PointCache<'t> {
    traj: &'t dyn Trajectory,
    last: RefCell<Option<KernelPoint>>,
    failure: RefCell<Option<MassShiftError>>,
    /// Only samples reaching back beyond this time enter the envelope, which
    /// stands in for the kernel on the truncated tail.
    far: f64,
    sup: RefCell<[f64; 3]>,
}

impl<'t> PointCache<'t> {
    fn new(traj: &'t dyn Trajectory, tau: f64, a: f64, spec: &QuadratureSpec) -> Self {
        let far = tau - 0.5 * spec.window_lambda / a;
        PointCache { traj, last: RefCell::new(None), failure: RefCell::new(None), far, sup: RefCell::new([0.0; 3]) }
    }

    fn outer(&self, tau: f64) -> Result<KernelPoint, KernelError> {
        if let Some(p) = *self.last.borrow() {
            if p.tau == tau {
                return Ok(p);
            }
        }
        let p = KernelPoint::new(self.traj, tau)?;
        *self.last.borrow_mut() = Some(p);
        Ok(p)
    }

    fn record(&self, earliest: f64, v: [f64; 3]) {
        if earliest > self.far {
            return;
        }
        let mut sup = self.sup.borrow_mut();
        for i in 0..3 {
            sup[i] = sup[i].max(v[i].abs());
        }
    }

    fn fail(&self, e: impl Into<MassShiftError>) {
        self.failure.borrow_mut().get_or_insert(e.into());
    }

    fn finish(&self) -> Result<[f64; 3], MassShiftError> {
        match self.failure.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(*self.sup.borrow()),
        }
    }
}

/// Strong form. Rejects windows containing any breakpoint.
pub fn mu_dot_strong(traj: &dyn Trajectory, tau: f64, a: f64, spec: &QuadratureSpec) -> Result<Rate, MassShiftError> {
    check(a, spec)?;
    if window_has_breakpoint(traj, tau, a, spec).is_some() {
        return Err(MassShiftError::NotSmooth { tau });
    }
    let alpha = traj.rapidity(tau)?.alpha;
    let cache = PointCache::new(traj, tau, a, spec);
    let r = history_2d_vec::<3, _>(
        |s1, s2| {
            let m = cache
                .outer(s1)
                .and_then(|p| KernelPoint::new(traj, s2).and_then(|q| kernel_mixed_at(traj, &p, &q, a)));
            match m {
                Ok(m) => {
                    let v = [m.plus, m.minus, m.sum()];
                    cache.record(s1.min(s2), v);
                    let e = (a * (0.5 * (s1 + s2) - tau)).exp();
                    v.map(|x| x * e)
                }
                Err(err) => {
                    cache.fail(err);
                    [0.0; 3]
                }
            }
        },
        tau,
        a,
        spec,
        &[],
        true,
        [1.0; 3],
    );
    let sup = cache.finish()?;
    let c = prefactor(a);
    let err = c * (r.error[2] + sup[2].max(sup[0] + sup[1]) * r.tail_bound[2]);
    Ok(Rate {
        tau,
        mu_dot: -c * r.value[2],
        flux_plus: c * r.value[0],
        flux_minus: c * r.value[1],
        local: c * alpha,
        alpha,
        error: err,
        converged: r.converged,
        form: Form::Strong,
    })
}

/// Weak form; valid for piecewise-smooth worldlines with velocity jumps.
pub fn mu_dot_weak(traj: &dyn Trajectory, tau: f64, a: f64, spec: &QuadratureSpec) -> Result<Rate, MassShiftError> {
    check(a, spec)?;
    let here = KernelPoint::new(traj, tau)?;
    let alpha = here.alpha;
    let breaks = breakpoint_times(traj);

    let cache1 = PointCache::new(traj, tau, a, spec);
    let r1 = history_1d_vec::<3, _>(
        |s| match KernelPoint::new(traj, s).and_then(|q| kernel_k_at(traj, &here, &q, a)) {
            Ok(k) => {
                let v = [k[0], k[1], k[0] + k[1]];
                cache1.record(s, v);
                let e = (0.5 * a * (s - tau)).exp();
                v.map(|x| x * e)
            }
            Err(err) => {
                cache1.fail(err);
                [0.0; 3]
            }
        },
        tau,
        a,
        spec,
        &breaks,
        [1.0; 3],
    );
    let sup1 = cache1.finish()?;

    let cache2 = PointCache::new(traj, tau, a, spec);
    let r2 = history_2d_vec::<3, _>(
        |s1, s2| {
            let k = cache2
                .outer(s1)
                .and_then(|p| KernelPoint::new(traj, s2).and_then(|q| kernel_k_at(traj, &p, &q, a)));
            match k {
                Ok(k) => {
                    let v = [k[0], k[1], k[0] + k[1]];
                    cache2.record(s1.min(s2), v);
                    let e = (a * (0.5 * (s1 + s2) - tau)).exp();
                    v.map(|x| x * e)
                }
                Err(err) => {
                    cache2.fail(err);
                    [0.0; 3]
                }
            }
        },
        tau,
        a,
        spec,
        &breaks,
        true,
        [1.0; 3],
    );
    let sup2 = cache2.finish()?;

    let c = prefactor(a);
    let hist = |i: usize| -a * r1.value[i] + 0.25 * a * a * r2.value[i];
    let env1 = sup1[2].max(sup1[0] + sup1[1]);
    let env2 = sup2[2].max(sup2[0] + sup2[1]);
    let err = c * (a * (r1.error[2] + env1 * r1.tail_bound[2]) + 0.25 * a * a * (r2.error[2] + env2 * r2.tail_bound[2]));
    Ok(Rate {
        tau,
        mu_dot: -c * hist(2),
        flux_plus: c * (alpha + hist(0)),
        flux_minus: c * (-alpha + hist(1)),
        local: c * alpha,
        alpha,
        error: err,
        converged: r1.converged && r2.converged,
        form: Form::Weak,
    })
}

/// `μ̇` and `F±`, routed to the weak form whenever a breakpoint lies in the
/// history window (or at `τ` itself) and to the strong form otherwise.
pub fn flux_pair(traj: &dyn Trajectory, tau: f64, a: f64, spec: &QuadratureSpec) -> Result<Rate, MassShiftError> {
    if window_has_breakpoint(traj, tau, a, spec).is_some() {
        mu_dot_weak(traj, tau, a, spec)
    } else {
        mu_dot_strong(traj, tau, a, spec)
    }
}

/// Accumulation budget on one interval: the quadrature tolerances, capped at
/// `1e-9·a` per unit of `aτ`.
fn interval_budget(a: f64, len: f64, scale: f64, spec: &QuadratureSpec) -> f64 {
    (spec.rel_tol * scale).max(spec.abs_tol * a * len).min(1e-9 * a * a * len)
}

struct Accumulator<'t> {
    traj: &'t dyn Trajectory,
    a: f64,
    spec: QuadratureSpec,
}

impl Accumulator<'_> {
    fn rate(&self, tau: f64) -> Result<Rate, MassShiftError> {
        flux_pair(self.traj, tau, self.a, &self.spec)
    }

    fn sample(&self, tau: f64) -> Result<(f64, f64), MassShiftError> {
        self.rate(tau).map(|r| (r.mu_dot, r.error))
    }

    /// Adaptive Simpson with Richardson correction; endpoint samples supplied.
    /// Refinement stops once the estimate is below the budget or below the
    /// quadrature noise of the samples themselves.
    fn simpson(&self, lo: f64, hi: f64, flo: (f64, f64), fhi: (f64, f64), depth: u32) -> Result<(f64, f64, bool), MassShiftError> {
        let fm = self.sample(0.5 * (lo + hi))?;
        self.simpson_rec(lo, hi, flo, fm, fhi, depth)
    }

    fn simpson_rec(
        &self,
        lo: f64,
        hi: f64,
        flo: (f64, f64),
        fm: (f64, f64),
        fhi: (f64, f64),
        depth: u32,
    ) -> Result<(f64, f64, bool), MassShiftError> {
        let h = hi - lo;
        let mid = 0.5 * (lo + hi);
        let fl = self.sample(0.5 * (lo + mid))?;
        let fr = self.sample(0.5 * (mid + hi))?;
        let whole = h / 6.0 * (flo.0 + 4.0 * fm.0 + fhi.0);
        let left = h / 12.0 * (flo.0 + 4.0 * fl.0 + fm.0);
        let right = h / 12.0 * (fm.0 + 4.0 * fr.0 + fhi.0);
        let refined = left + right;
        let err = (refined - whole).abs() / 15.0;
        let scale = h / 12.0 * (flo.0.abs() + 4.0 * fl.0.abs() + 2.0 * fm.0.abs() + 4.0 * fr.0.abs() + fhi.0.abs());
        let noise = h * [flo.1, fl.1, fm.1, fr.1, fhi.1].into_iter().fold(0.0, f64::max);
        if err <= interval_budget(self.a, h, scale, &self.spec).max(noise) {
            return Ok((refined + (refined - whole) / 15.0, err + noise, true));
        }
        if depth == 0 {
            return Ok((refined + (refined - whole) / 15.0, err + noise, false));
        }
        let (l, le, lc) = self.simpson_rec(lo, mid, flo, fl, fm, depth - 1)?;
        let (r, re, rc) = self.simpson_rec(mid, hi, fm, fr, fhi, depth - 1)?;
        Ok((l + r, le + re, lc && rc))
    }

    /// Double-exponential rule; tolerates integrable endpoint singularities.
    fn tanh_sinh(&self, lo: f64, hi: f64) -> Result<(f64, f64, bool), MassShiftError> {
        let failure = RefCell::new(None);
        let len = hi - lo;
        let r = tanh_sinh_from_singular(
            |u| match self.rate(lo + u) {
                Ok(r) => r.mu_dot,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            len,
            self.spec.rel_tol,
            interval_budget(self.a, len, 0.0, &self.spec),
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok((r.value, r.error_estimate, r.converged))
    }
}

const SIMPSON_DEPTH: u32 = 12;

/// `μ(τ)` on a grid by accumulating `μ̇` from the start of the uniform past,
/// where `μ = 0`.
pub fn mu_series(traj: &dyn Trajectory, a: f64, tau_grid: &[f64], spec: &QuadratureSpec) -> Result<MassShiftSeries, MassShiftError> {
    check(a, spec)?;
    if tau_grid.is_empty() || tau_grid.windows(2).any(|w| !(w[1] > w[0])) || tau_grid.iter().any(|t| !t.is_finite()) {
        return Err(MassShiftError::InvalidGrid);
    }
    let start = traj.uniform_before().ok_or(MassShiftError::MissingUniformPast)?;
    let rates: Vec<Rate> = tau_grid.par_iter().map(|t| flux_pair(traj, *t, a, spec)).collect::<Result<_, _>>()?;

    // Accumulation nodes: the uniform-past boundary, every breakpoint after
    // it, and the grid samples.
    let last = *tau_grid.last().unwrap();
    let breaks: Vec<(f64, BreakpointKind)> =
        traj.breakpoints().into_iter().filter(|b| b.tau >= start && b.tau < last).map(|b| (b.tau, b.kind)).collect();
    let mut nodes: Vec<f64> = tau_grid.iter().copied().filter(|t| *t > start).collect();
    if start.is_finite() && start < last {
        nodes.push(start);
    }
    nodes.extend(breaks.iter().map(|b| b.0));
    // Past a velocity jump μ̇ diverges logarithmically; that stretch gets its
    // own node so only a short piece needs the endpoint-singular rule.
    let jumps: Vec<f64> = breaks.iter().filter(|b| b.1 == BreakpointKind::VelocityJump).map(|b| b.0).collect();
    nodes.extend(jumps.iter().map(|t| t + 1.0 / a).filter(|t| *t < last));
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    nodes.dedup();

    let acc = Accumulator { traj, a, spec: *spec };
    let pieces: Vec<(f64, f64, bool)> = nodes.windows(2).map(|w| (w[0], w[1], jumps.contains(&w[0]))).collect();
    let integrals: Vec<(f64, f64, bool)> = pieces
        .par_iter()
        .map(|&(lo, hi, singular)| {
            if singular {
                acc.tanh_sinh(lo, hi)
            } else {
                let flo = acc.sample(lo)?;
                let fhi = acc.sample(hi)?;
                acc.simpson(lo, hi, flo, fhi, SIMPSON_DEPTH)
            }
        })
        .collect::<Result<_, _>>()?;

    let mut mu_at = Vec::with_capacity(nodes.len());
    let (mut mu, mut err, mut ok) = (0.0, 0.0, true);
    if let Some(first) = nodes.first() {
        mu_at.push((*first, mu, err, ok));
    }
    for (piece, (v, e, c)) in pieces.iter().zip(&integrals) {
        mu += v;
        err += e;
        ok &= c;
        mu_at.push((piece.1, mu, err, ok));
    }

    let samples = tau_grid
        .iter()
        .zip(&rates)
        .map(|(t, r)| {
            let (mu, acc_err, acc_ok) = if *t <= start {
                (0.0, 0.0, true)
            } else {
                let (_, m, e, c) = mu_at.iter().find(|n| n.0 == *t).copied().unwrap();
                (m, e, c)
            };
            MassShiftSample {
                tau: *t,
                mu,
                mu_dot: r.mu_dot,
                flux_plus: r.flux_plus,
                flux_minus: r.flux_minus,
                alpha: r.alpha,
                err: acc_err + r.error,
                converged: acc_ok && r.converged,
            }
        })
        .collect();
    Ok(MassShiftSeries { coupling: a, trajectory: traj.descriptor(), samples })
}

/// Log-separation evaluation of the mass shift,
///
/// ```text
/// μ₁ = (a²/8π) ∫ ln[Δz⁺Δz⁻](τ,s) e^{a(s-τ)/2} ds,
/// μ₂ = -(a³/32π) ∬ ln[Δz⁺Δz⁻](τ₁,τ₂) e^{a((τ₁+τ₂)/2-τ)} dτ₁dτ₂,
/// ```
///
/// split as `ln[Δz⁺Δz⁻] = ln(τ₁-τ₂)² + ln(z⁺[τ₁,τ₂]·z⁻[τ₁,τ₂])`. The first
/// piece reproduces `μ₀` exactly and is integrated numerically only for
/// `raw`; the second is smooth and gives `μ - μ₀` directly.
pub fn mu_direct(traj: &dyn Trajectory, tau: f64, a: f64, spec: &QuadratureSpec) -> Result<DirectMassShift, MassShiftError> {
    check(a, spec)?;
    let here = KernelPoint::new(traj, tau)?;
    let breaks = breakpoint_times(traj);

    let cache1 = PointCache::new(traj, tau, a, spec);
    let r1 = history_1d_vec::<1, _>(
        |s| match KernelPoint::new(traj, s).and_then(|q| log_chord_ratio_at(traj, &here, &q, a)) {
            Ok(l) => {
                cache1.record(s, [l, 0.0, 0.0]);
                [l * (0.5 * a * (s - tau)).exp()]
            }
            Err(e) => {
                cache1.fail(e);
                [0.0]
            }
        },
        tau,
        a,
        spec,
        &breaks,
        [1.0],
    );
    let sup1 = cache1.finish()?[0];

    let cache2 = PointCache::new(traj, tau, a, spec);
    let r2 = history_2d_vec::<1, _>(
        |s1, s2| {
            let l = cache2
                .outer(s1)
                .and_then(|p| KernelPoint::new(traj, s2).and_then(|q| log_chord_ratio_at(traj, &p, &q, a)));
            match l {
                Ok(l) => {
                    cache2.record(s1.min(s2), [l, 0.0, 0.0]);
                    [l * (a * (0.5 * (s1 + s2) - tau)).exp()]
                }
                Err(e) => {
                    cache2.fail(e);
                    [0.0]
                }
            }
        },
        tau,
        a,
        spec,
        &breaks,
        true,
        [1.0],
    );
    let sup2 = cache2.finish()?[0];

    let c1 = a * a / (8.0 * PI);
    let c2 = -a * a * a / (32.0 * PI);
    let mu = c1 * r1.value[0] + c2 * r2.value[0];
    let error = c1 * (r1.error[0] + sup1 * r1.tail_bound[0]) + c2.abs() * (r2.error[0] + sup2 * r2.tail_bound[0]);

    // ln(τ-s)² against e^{-aq/2}, and the diagonal log against the damping
    // reduced to one dimension along q = τ₁ - τ₂.
    let len = spec.window_lambda / a;
    let l1 = integrate_log_singular(|q| 2.0 * (-0.5 * a * q).exp(), 0.0, 0.0, len, spec)?;
    let l2 = integrate_log_singular(
        |q| 4.0 / a * ((-0.5 * a * q).exp() - (-0.5 * a * (2.0 * len - q)).exp()),
        0.0,
        0.0,
        len,
        spec,
    )?;
    let log_part = c1 * l1.value + c2 * l2.value;
    let raw_error = error
        + c1 * l1.error_estimate
        + c2.abs() * l2.error_estimate
        + (c1 + c2.abs() * 2.0 / a) * log_tail_bound(a, len);
    let mu0 = mu0_closed_form(a);
    Ok(DirectMassShift {
        mu,
        raw: mu + log_part,
        mu0,
        error,
        raw_error,
        converged: r1.converged && r2.converged && l1.converged && l2.converged,
    })
}

/// Bound on `∫_L^∞ 2|ln q| e^{-aq/2} dq` plus the part of the square's
/// truncation that falls inside `[0, L]`, using `ln q ≤ ln L + (q - L)/L`.
fn log_tail_bound(a: f64, len: f64) -> f64 {
    let l = len.max(1.0);
    let decay = (-0.5 * a * len).exp();
    let outside = 2.0 * decay * (2.0 / a * l.ln() + 4.0 / (a * a * l));
    let inside = 2.0 * decay * ((-0.5 * a * (len - 1.0)).exp().min(1.0) + 2.0 / a * l.ln());
    outside + inside
}

/// Uniform-motion value `(a/4π)(-ln(a/2) - γ_E)`, independent of velocity.
pub fn mu0_closed_form(a: f64) -> f64 {
    a / (4.0 * PI) * (-(0.5 * a).ln() - EULER_GAMMA)
}

/// Slow-motion rate `(1/24π)[αα̇/a - (αα̈ + α̇²)/a²]`.
pub fn mu_dot_asymptotic(alpha: f64, alpha_dot: f64, alpha_ddot: f64, a: f64) -> f64 {
    (alpha * alpha_dot / a - (alpha * alpha_ddot + alpha_dot * alpha_dot) / (a * a)) / (24.0 * PI)
}

/// Slow-motion value `α²/(48πa)`.
pub fn mu_asymptotic(alpha: f64, a: f64) -> f64 {
    alpha * alpha / (48.0 * PI * a)
}

/// Coefficient `C` of `-aτ·ln(aτ)` in the early-time mass shift after a sharp
/// velocity step: `(a/4π)[γᵢγ_f(1 - βᵢβ_f) - 1]`.
pub fn step_coefficient(beta_i: f64, beta_f: f64, a: f64) -> f64 {
    let gi = 1.0 / (1.0 - beta_i * beta_i).sqrt();
    let gf = 1.0 / (1.0 - beta_f * beta_f).sqrt();
    a / (4.0 * PI) * (gi * gf * (1.0 - beta_i * beta_f) - 1.0)
}
