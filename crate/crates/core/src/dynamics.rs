//! Self-consistent backreaction: the mirror's rapidity and total mass evolve
//! under the fluxes computed from its own past.
//!
//! The equations of motion are `m_total η̇ = F⁺ − F⁻` and `ṁ_total = −(F⁺ + F⁻)`.
//! Each flux contains a local piece `±(a/8π)α` proportional to the current
//! acceleration, so the rapidity equation is solved for `α` in closed form:
//! `α = R / (m_total − a/4π)`, where `R` is the purely historical part of
//! `F⁺ − F⁻`. The fluxes themselves come from the weak form, which keeps the
//! local piece separate and only needs first derivatives of the stored path.
//!
//! The past is stored on the step grid as `(η, α, z±)` and interpolated by
//! cubic Hermite polynomials in `η`; `α̈` is constant per cell and therefore
//! only approximate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{DynamicsError, MassShiftError, TrajectoryError};
use crate::massshift::{mu_dot_weak, mu_series};
use crate::quadrature::QuadratureSpec;
use crate::trajectory::{Breakpoint, BreakpointKind, RapidityJet, Trajectory, WorldlinePoint};

/// Gauss–Legendre nodes and weights on `[0, 1]` (8 points).
const GL8: [(f64, f64); 8] = [
    (0.019_855_071_751_231_856, 0.050_614_268_145_188_13),
    (0.101_666_761_293_186_63, 0.111_190_517_226_687_24),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_64),
    (0.408_282_678_752_175_1, 0.181_341_891_689_180_99),
    (0.591_717_321_247_824_9, 0.181_341_891_689_180_99),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_64),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
    (0.980_144_928_248_768_1, 0.050_614_268_145_188_13),
];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    eta: f64,
    alpha: f64,
    z: WorldlinePoint,
}

/// Cubic Hermite coefficients of `η(τ_k + u·h)` in `u`.
fn hermite(n0: &Node, n1: &Node, h: f64) -> [f64; 4] {
    let d = n1.eta - n0.eta;
    [
        n0.eta,
        h * n0.alpha,
        3.0 * d - h * (2.0 * n0.alpha + n1.alpha),
        -2.0 * d + h * (n0.alpha + n1.alpha),
    ]
}

fn poly(c: &[f64; 4], u: f64) -> f64 {
    c[0] + u * (c[1] + u * (c[2] + u * c[3]))
}

/// `∫₀^{u} e^{±η} dτ` along one Hermite cell.
fn cell_displacement(c: &[f64; 4], h: f64, u: f64) -> WorldlinePoint {
    let (mut p, mut m) = (0.0, 0.0);
    for (x, w) in GL8 {
        let e = poly(c, u * x).exp();
        p += w * e;
        m += w / e;
    }
    WorldlinePoint { zplus: h * u * p, zminus: h * u * m }
}

/// Past worldline: a prescribed trajectory before `start`, stored steps after.
#[derive(Clone)]
pub struct History {
    initial: Arc<dyn Trajectory>,
    start: f64,
    step: f64,
    nodes: Vec<Node>,
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("History")
            .field("initial", &self.initial.descriptor())
            .field("start", &self.start)
            .field("step", &self.step)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl History {
    fn new(initial: Arc<dyn Trajectory>, start: f64, step: f64, first: Node) -> Self {
        History { initial, start, step, nodes: vec![first] }
    }

    /// Last stored proper time.
    pub fn end(&self) -> f64 {
        self.start + (self.nodes.len() - 1) as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn last(&self) -> &Node {
        self.nodes.last().expect("history holds at least the initial node")
    }

    fn last_mut(&mut self) -> &mut Node {
        self.nodes.last_mut().expect("history holds at least the initial node")
    }

    /// Appends a node one step ahead; positions follow from the interpolant.
    fn push(&mut self, eta: f64, alpha: f64) {
        let prev = *self.last();
        let mut next = Node { eta, alpha, z: prev.z };
        next.z = self.advance(&prev, &next);
        self.nodes.push(next);
    }

    /// Replaces `(η, α)` of the newest node and recomputes its position.
    fn amend_last(&mut self, eta: f64, alpha: f64) {
        let n = self.nodes.len();
        if n == 1 {
            let node = self.last_mut();
            node.alpha = alpha;
            return;
        }
        let prev = self.nodes[n - 2];
        let mut next = Node { eta, alpha, z: prev.z };
        next.z = self.advance(&prev, &next);
        self.nodes[n - 1] = next;
    }

    fn advance(&self, prev: &Node, next: &Node) -> WorldlinePoint {
        let c = hermite(prev, next, self.step);
        let d = cell_displacement(&c, self.step, 1.0);
        WorldlinePoint { zplus: prev.z.zplus + d.zplus, zminus: prev.z.zminus + d.zminus }
    }

    /// Cell index and local coordinate `u ∈ [0, 1]` for a stored time.
    fn locate(&self, tau: f64) -> Result<(usize, f64), TrajectoryError> {
        let end = self.end();
        if !(tau <= end + 1e-12 * self.step) || !tau.is_finite() {
            return Err(TrajectoryError::OutOfDomain { tau });
        }
        let n = self.nodes.len();
        if n == 1 {
            return Ok((0, 0.0));
        }
        let x = ((tau - self.start) / self.step).max(0.0);
        let k = (x.floor() as usize).min(n - 2);
        Ok((k, (x - k as f64).min(1.0)))
    }
}

impl Trajectory for History {
    fn rapidity(&self, tau: f64) -> Result<RapidityJet, TrajectoryError> {
        if tau < self.start {
            return self.initial.rapidity(tau);
        }
        let (k, u) = self.locate(tau)?;
        if self.nodes.len() == 1 {
            let n = self.nodes[0];
            return Ok(RapidityJet { eta: n.eta, alpha: n.alpha, ..Default::default() });
        }
        let h = self.step;
        let c = hermite(&self.nodes[k], &self.nodes[k + 1], h);
        Ok(RapidityJet {
            eta: poly(&c, u),
            alpha: (c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])) / h,
            alpha_dot: (2.0 * c[2] + 6.0 * u * c[3]) / (h * h),
            alpha_ddot: 6.0 * c[3] / (h * h * h),
        })
    }

    fn position(&self, tau: f64) -> Result<WorldlinePoint, TrajectoryError> {
        if tau < self.start {
            return self.initial.position(tau);
        }
        let (k, u) = self.locate(tau)?;
        let n0 = self.nodes[k];
        if self.nodes.len() == 1 || u == 0.0 {
            return Ok(n0.z);
        }
        let c = hermite(&n0, &self.nodes[k + 1], self.step);
        let d = cell_displacement(&c, self.step, u);
        Ok(WorldlinePoint { zplus: n0.z.zplus + d.zplus, zminus: n0.z.zminus + d.zminus })
    }

    fn breakpoints(&self) -> Vec<Breakpoint> {
        let mut b: Vec<Breakpoint> = self.initial.breakpoints().into_iter().filter(|b| b.tau < self.start).collect();
        b.push(Breakpoint { tau: self.start, kind: BreakpointKind::AccelerationJump });
        b
    }

    fn breakpoints_between(&self, lo: f64, hi: f64) -> Vec<Breakpoint> {
        let mut b = self.initial.breakpoints_between(lo, hi.min(self.start));
        b.retain(|b| b.tau < self.start);
        let first = ((lo - self.start) / self.step).ceil().max(0.0) as usize;
        let last = ((hi - self.start) / self.step).floor();
        if last >= 0.0 {
            let last = (last as usize).min(self.nodes.len() - 1);
            b.extend((first..=last).map(|k| Breakpoint {
                tau: self.start + k as f64 * self.step,
                kind: BreakpointKind::AccelerationJump,
            }));
        }
        b
    }

    /// Stored positions are sums of per-cell Gauss–Legendre integrals of an
    /// explicit interpolant, so nearby differences keep relative accuracy.
    fn precise_after(&self) -> Option<f64> {
        Some(self.start)
    }

    fn uniform_before(&self) -> Option<f64> {
        self.initial.uniform_before().map(|t| t.min(self.start))
    }

    fn descriptor(&self) -> String {
        format!("history({} until {}, {} steps of {})", self.initial.descriptor(), self.start, self.nodes.len() - 1, self.step)
    }
}

/// Parameters of a backreaction run.
#[derive(Debug, Clone)]
pub struct DynamicsConfig {
    /// Bare mass `m > 0` (inverse length).
    pub bare_mass: f64,
    pub coupling: f64,
    /// Prescribed motion before `tau_start` (e.g. a uniform past or a kick).
    pub initial: Arc<dyn Trajectory>,
    pub tau_start: f64,
    pub dtau: f64,
    pub spec: QuadratureSpec,
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let invalid = |s: String| Err(DynamicsError::InvalidConfig(s));
        if !(self.bare_mass > 0.0 && self.bare_mass.is_finite()) {
            return invalid(format!("bare mass must be positive, got {}", self.bare_mass));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return invalid(format!("coupling must be positive, got {}", self.coupling));
        }
        if !(self.dtau > 0.0 && self.dtau <= 0.1 / self.coupling) {
            return invalid(format!("step {} must lie in (0, 0.1/a = {}]", self.dtau, 0.1 / self.coupling));
        }
        if !self.tau_start.is_finite() {
            return invalid("start time must be finite".into());
        }
        if self.initial.uniform_before().is_none() {
            return invalid("initial trajectory must be uniform in the far past".into());
        }
        self.spec.validate().map_err(MassShiftError::from)?;
        Ok(())
    }

    /// `a/4π`: the mass below which the implicit rapidity equation degenerates.
    pub fn local_mass(&self) -> f64 {
        self.coupling / (4.0 * PI)
    }
}

/// Instantaneous state of the evolving mirror, with its full past.
#[derive(Debug, Clone)]
pub struct DynamicsState {
    pub tau: f64,
    pub eta: f64,
    pub alpha: f64,
    pub z: WorldlinePoint,
    pub m_total: f64,
    pub history: History,
}

/// Right-hand side of the equations of motion at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub eta_dot: f64,
    pub m_dot: f64,
    pub flux_plus: f64,
    pub flux_minus: f64,
    pub error: f64,
    pub converged: bool,
}

/// One accepted step of an evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsSample {
    pub tau: f64,
    pub eta: f64,
    pub alpha: f64,
    pub z: WorldlinePoint,
    pub m_total: f64,
    /// `m_total − m`.
    pub mu: f64,
    pub m_dot: f64,
    pub flux_plus: f64,
    pub flux_minus: f64,
    pub err: f64,
}

#[derive(Debug, Clone)]
pub struct DynamicsRun {
    pub samples: Vec<DynamicsSample>,
    pub state: DynamicsState,
}

/// Initial state: prescribed position and rapidity at `tau_start`, total mass
/// `m + μ(tau_start)` from the prescribed past, and the acceleration solved
/// from the fluxes of that past.
pub fn initial_state(config: &DynamicsConfig) -> Result<DynamicsState, DynamicsError> {
    config.validate()?;
    let t0 = config.tau_start;
    let jet = config.initial.rapidity(t0).map_err(MassShiftError::from)?;
    let z = config.initial.position(t0).map_err(MassShiftError::from)?;
    let mu0 = match config.initial.uniform_before() {
        Some(u) if u >= t0 => 0.0,
        _ => {
            let s = mu_series(config.initial.as_ref(), config.coupling, &[t0], &config.spec)?;
            if !s.converged() {
                return Err(DynamicsError::NonConvergence { tau: t0 });
            }
            s.samples[0].mu
        }
    };
    let node = Node { eta: jet.eta, alpha: jet.alpha, z };
    let mut state = DynamicsState {
        tau: t0,
        eta: jet.eta,
        alpha: jet.alpha,
        z,
        m_total: config.bare_mass + mu0,
        history: History::new(config.initial.clone(), t0, config.dtau, node),
    };
    let r = derive_rates(&state, config)?;
    state.alpha = r.eta_dot;
    state.history.amend_last(state.eta, state.alpha);
    Ok(state)
}

/// Solves `m_total α = F⁺ − F⁻` for the current acceleration and returns the
/// rates. The newest history node supplies the provisional acceleration used
/// inside the kernel near the diagonal.
pub fn derive_rates(state: &DynamicsState, config: &DynamicsConfig) -> Result<Rates, DynamicsError> {
    rates_on(&state.history, state.tau, state.m_total, config)
}

fn rates_on(history: &History, tau: f64, m_total: f64, config: &DynamicsConfig) -> Result<Rates, DynamicsError> {
    if !(m_total > 0.0) {
        return Err(DynamicsError::NegativeMass { tau, m_total });
    }
    let effective = m_total - config.local_mass();
    if !(effective > 0.0) {
        return Err(DynamicsError::Degenerate { tau, m_total, threshold: config.local_mass() });
    }
    let r = mu_dot_weak(history, tau, config.coupling, &config.spec)?;
    let hist_plus = r.flux_plus - r.local;
    let hist_minus = r.flux_minus + r.local;
    let alpha = (hist_plus - hist_minus) / effective;
    let local = config.coupling / (8.0 * PI) * alpha;
    let flux_plus = local + hist_plus;
    let flux_minus = -local + hist_minus;
    Ok(Rates {
        eta_dot: alpha,
        m_dot: -(flux_plus + flux_minus),
        flux_plus,
        flux_minus,
        error: r.error,
        converged: r.converged,
    })
}

fn sample(state: &DynamicsState, rates: &Rates, bare: f64) -> DynamicsSample {
    DynamicsSample {
        tau: state.tau,
        eta: state.eta,
        alpha: state.alpha,
        z: state.z,
        m_total: state.m_total,
        mu: state.m_total - bare,
        m_dot: rates.m_dot,
        flux_plus: rates.flux_plus,
        flux_minus: rates.flux_minus,
        err: rates.error,
    }
}

/// Advances the state by one step (Heun predictor with a single corrector
/// pass) and returns the rates at the accepted point.
pub fn step(state: &mut DynamicsState, rates: &Rates, config: &DynamicsConfig) -> Result<Rates, DynamicsError> {
    let h = config.dtau;
    let tau = state.history.start + state.history.nodes.len() as f64 * h;
    let eta_p = state.eta + h * rates.eta_dot;
    let m_p = state.m_total + h * rates.m_dot;
    let n = state.history.nodes.len();
    let alpha_p = if n >= 2 { 2.0 * rates.eta_dot - state.history.nodes[n - 2].alpha } else { rates.eta_dot };
    state.history.push(eta_p, alpha_p);
    let rp = rates_on(&state.history, tau, m_p, config)?;

    state.tau = tau;
    state.eta += 0.5 * h * (rates.eta_dot + rp.eta_dot);
    state.m_total += 0.5 * h * (rates.m_dot + rp.m_dot);
    state.history.amend_last(state.eta, rp.eta_dot);
    let rc = derive_rates(state, config)?;
    state.alpha = rc.eta_dot;
    state.history.amend_last(state.eta, rc.eta_dot);
    state.z = state.history.last().z;
    if !(rp.converged && rc.converged) {
        return Err(DynamicsError::NonConvergence { tau });
    }
    Ok(rc)
}

/// Integrates from `config.tau_start` to `tau_end` (inclusive, rounded to
/// whole steps). The first sample is the initial state.
pub fn evolve(config: &DynamicsConfig, tau_end: f64) -> Result<DynamicsRun, DynamicsError> {
    let mut state = initial_state(config)?;
    let steps = ((tau_end - config.tau_start) / config.dtau - 1e-9).ceil().max(0.0) as usize;
    let mut rates = derive_rates(&state, config)?;
    if !rates.converged {
        return Err(DynamicsError::NonConvergence { tau: state.tau });
    }
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(sample(&state, &rates, config.bare_mass));
    for _ in 0..steps {
        rates = step(&mut state, &rates, config)?;
        samples.push(sample(&state, &rates, config.bare_mass));
    }
    Ok(DynamicsRun { samples, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Uniform;

    fn node(eta: f64, alpha: f64) -> Node {
        Node { eta, alpha, z: WorldlinePoint::default() }
    }

    #[test]
    fn hermite_reproduces_cubic_rapidity() {
        // η = τ³ − τ is reproduced exactly by one Hermite cell.
        let eta = |t: f64| t * t * t - t;
        let alpha = |t: f64| 3.0 * t * t - 1.0;
        let mut h = History::new(Arc::new(Uniform::new(0.0).unwrap()), 0.0, 0.5, node(eta(0.0), alpha(0.0)));
        h.push(eta(0.5), alpha(0.5));
        h.push(eta(1.0), alpha(1.0));
        for t in [0.1, 0.3, 0.5, 0.77, 1.0] {
            let j = h.rapidity(t).unwrap();
            assert!((j.eta - eta(t)).abs() < 1e-14);
            assert!((j.alpha - alpha(t)).abs() < 1e-13);
            assert!((j.alpha_dot - 6.0 * t).abs() < 1e-12);
            assert!((j.alpha_ddot - 6.0).abs() < 1e-11);
        }
        assert!(h.rapidity(1.1).is_err());
    }

    #[test]
    fn positions_integrate_null_velocities() {
        // Constant rapidity: z± grow linearly with slope e^{±η}.
        let mut h = History::new(Arc::new(Uniform::new(0.0).unwrap()), 0.0, 0.1, node(0.3, 0.0));
        for _ in 0..10 {
            h.push(0.3, 0.0);
        }
        let p = h.position(0.73).unwrap();
        assert!((p.zplus - 0.73 * 0.3f64.exp()).abs() < 1e-14);
        assert!((p.zminus - 0.73 * (-0.3f64).exp()).abs() < 1e-14);
        let before = h.position(-1.0).unwrap();
        assert_eq!(before.zplus, -1.0);
    }

    fn config(initial: Arc<dyn Trajectory>) -> DynamicsConfig {
        DynamicsConfig {
            bare_mass: 1.0,
            coupling: 1.0,
            initial,
            tau_start: 0.0,
            dtau: 0.1,
            spec: QuadratureSpec { rel_tol: 1e-8, abs_tol: 1e-14, ..Default::default() },
        }
    }

    #[test]
    fn uniform_past_is_a_fixed_point() {
        let run = evolve(&config(Arc::new(Uniform::new(0.4).unwrap())), 2.0).unwrap();
        assert_eq!(run.samples.len(), 21);
        for s in &run.samples {
            assert!((s.eta - 0.4f64.atanh()).abs() < 1e-14);
            assert!(s.mu.abs() < 1e-14);
            assert!(s.flux_plus.abs() < 1e-14 && s.flux_minus.abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let mut c = config(Arc::new(Uniform::new(0.0).unwrap()));
        c.dtau = 0.2;
        assert!(matches!(c.validate(), Err(DynamicsError::InvalidConfig(_))));
        let mut c = config(Arc::new(Uniform::new(0.0).unwrap()));
        c.bare_mass = -1.0;
        assert!(matches!(c.validate(), Err(DynamicsError::InvalidConfig(_))));
    }

    #[test]
    fn light_mirror_is_degenerate() {
        let mut c = config(Arc::new(Uniform::new(0.2).unwrap()));
        c.bare_mass = 0.5 * c.local_mass();
        assert!(matches!(evolve(&c, 0.2), Err(DynamicsError::Degenerate { .. })));
    }
}
