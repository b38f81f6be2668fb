//! Mirror worldlines in null coordinates `z± = z⁰ ± z¹`.
//!
//! Every trajectory is specified through its rapidity `η(τ)`, so that
//! `ż⁺ = e^{η}`, `ż⁻ = e^{-η}` and the proper-time normalization `ż⁺ż⁻ = 1`
//! holds identically. Proper acceleration is `α = η̇`.
//!
//! At a declared breakpoint, quantities are right-continuous: evaluating at the
//! breakpoint itself returns the values of the later segment.

use crate::error::TrajectoryError;
use crate::quadrature::{integrate_vec, Tolerance};
use crate::taylor::Jet;
use std::fmt;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Rapidity and its first three proper-time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RapidityJet {
    pub eta: f64,
    pub alpha: f64,
    pub alpha_dot: f64,
    pub alpha_ddot: f64,
}

impl RapidityJet {
    pub fn uniform(eta: f64) -> Self {
        RapidityJet { eta, ..Default::default() }
    }

    fn from_jet(j: &Jet) -> Self {
        RapidityJet {
            eta: j.derivative(0),
            alpha: j.derivative(1),
            alpha_dot: j.derivative(2),
            alpha_ddot: j.derivative(3),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.alpha.is_finite() && self.alpha_dot.is_finite() && self.alpha_ddot.is_finite()
    }

    /// Derivatives `[ż, z̈, z⃛, z⁗]` of `z⁺` (sign = +1) or `z⁻` (sign = -1).
    pub fn null_derivatives(&self, sign: f64) -> [f64; 4] {
        let e = (sign * self.eta).exp();
        let a = sign * self.alpha;
        let ad = sign * self.alpha_dot;
        let add = sign * self.alpha_ddot;
        [e, a * e, (ad + a * a) * e, (add + 3.0 * a * ad + a * a * a) * e]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldlinePoint {
    pub zplus: f64,
    pub zminus: f64,
}

impl WorldlinePoint {
    pub fn time(&self) -> f64 {
        0.5 * (self.zplus + self.zminus)
    }

    pub fn space(&self) -> f64 {
        0.5 * (self.zplus - self.zminus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub tau: f64,
    pub z: WorldlinePoint,
    pub d1plus: f64,
    pub d1minus: f64,
    pub d2plus: f64,
    pub d2minus: f64,
    pub d3plus: f64,
    pub d3minus: f64,
    pub d4plus: f64,
    pub d4minus: f64,
    pub eta: f64,
    pub alpha: f64,
}

impl TrajectoryState {
    pub fn new(tau: f64, z: WorldlinePoint, jet: &RapidityJet) -> Result<Self, TrajectoryError> {
        if !jet.is_finite() {
            return Err(TrajectoryError::NonFinite { what: "rapidity derivative", tau });
        }
        if !(z.zplus.is_finite() && z.zminus.is_finite()) {
            return Err(TrajectoryError::NonFinite { what: "position", tau });
        }
        let p = jet.null_derivatives(1.0);
        let m = jet.null_derivatives(-1.0);
        if !p.iter().chain(m.iter()).all(|v| v.is_finite()) {
            return Err(TrajectoryError::NonFinite { what: "null-coordinate derivative", tau });
        }
        Ok(TrajectoryState {
            tau,
            z,
            d1plus: p[0],
            d1minus: m[0],
            d2plus: p[1],
            d2minus: m[1],
            d3plus: p[2],
            d3minus: m[2],
            d4plus: p[3],
            d4minus: m[3],
            eta: jet.eta,
            alpha: jet.alpha,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakpointKind {
    /// Rapidity (velocity) is discontinuous.
    VelocityJump,
    /// Rapidity is continuous but acceleration or a higher derivative jumps.
    AccelerationJump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub tau: f64,
    pub kind: BreakpointKind,
}

/// A timelike, future-directed worldline parametrized by proper time.
pub trait Trajectory: Send + Sync + fmt::Debug {
    fn rapidity(&self, tau: f64) -> Result<RapidityJet, TrajectoryError>;

    fn position(&self, tau: f64) -> Result<WorldlinePoint, TrajectoryError>;

    /// Proper times where smoothness drops below C³, in increasing order.
    fn breakpoints(&self) -> Vec<Breakpoint> {
        Vec::new()
    }

    /// Breakpoints with `lo ≤ τ_b ≤ hi`, plus any further points in that range
    /// where a derivative of `α` jumps (e.g. interpolation nodes). Kernel
    /// evaluation splits its local integrals there.
    fn breakpoints_between(&self, lo: f64, hi: f64) -> Vec<Breakpoint> {
        self.breakpoints().into_iter().filter(|b| b.tau >= lo && b.tau <= hi).collect()
    }

    /// Proper time from which positions are accurate enough that `Δż/Δz` may
    /// be formed directly even for nearby arguments.
    fn precise_after(&self) -> Option<f64> {
        None
    }

    /// Proper time before which the motion is exactly uniform. `+∞` for
    /// globally uniform motion.
    fn uniform_before(&self) -> Option<f64> {
        None
    }

    fn descriptor(&self) -> String;

    /// `z±(τ₁) - z±(τ₂)`.
    fn null_separation(&self, tau1: f64, tau2: f64) -> Result<(f64, f64), TrajectoryError> {
        if tau1 == tau2 {
            return Ok((0.0, 0.0));
        }
        let p = self.position(tau1)?;
        let q = self.position(tau2)?;
        Ok((p.zplus - q.zplus, p.zminus - q.zminus))
    }

    /// Whether [`Trajectory::null_separation`] avoids subtracting positions.
    /// The kernel then prefers it, which matters at large rapidity.
    fn exact_separation(&self) -> bool {
        false
    }

    /// Exact rescaled member of the same family, when one exists.
    fn rescaled_family(&self, _lambda: f64) -> Option<Arc<dyn Trajectory>> {
        None
    }
}

pub fn state(traj: &dyn Trajectory, tau: f64) -> Result<TrajectoryState, TrajectoryError> {
    if !tau.is_finite() {
        return Err(TrajectoryError::OutOfDomain { tau });
    }
    let jet = traj.rapidity(tau)?;
    let z = traj.position(tau)?;
    TrajectoryState::new(tau, z, &jet)
}

pub fn null_separation(traj: &dyn Trajectory, tau1: f64, tau2: f64) -> Result<(f64, f64), TrajectoryError> {
    traj.null_separation(tau1, tau2)
}

/// Trajectory with `z±_new(τ) = λ·z±(τ/λ)`.
pub fn rescale(traj: &Arc<dyn Trajectory>, lambda: f64) -> Result<Arc<dyn Trajectory>, TrajectoryError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(TrajectoryError::InvalidParameter(format!("rescale factor must be positive, got {lambda}")));
    }
    Ok(traj
        .rescaled_family(lambda)
        .unwrap_or_else(|| Arc::new(Rescaled { inner: traj.clone(), lambda })))
}

/// Breakpoints with `lo < τ_b ≤ hi`.
pub fn breakpoints_in(traj: &dyn Trajectory, lo: f64, hi: f64) -> Vec<Breakpoint> {
    traj.breakpoints().into_iter().filter(|b| b.tau > lo && b.tau <= hi).collect()
}

fn rapidity_of_velocity(beta: f64) -> Result<f64, TrajectoryError> {
    if !(beta.abs() < 1.0) {
        return Err(TrajectoryError::InvalidParameter(format!("velocity must satisfy |beta| < 1, got {beta}")));
    }
    Ok(beta.atanh())
}

#[derive(Debug, Clone)]
pub struct Uniform {
    beta: f64,
    eta: f64,
}

impl Uniform {
    pub fn new(beta: f64) -> Result<Self, TrajectoryError> {
        Ok(Uniform { beta, eta: rapidity_of_velocity(beta)? })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Trajectory for Uniform {
    fn rapidity(&self, _tau: f64) -> Result<RapidityJet, TrajectoryError> {
        Ok(RapidityJet::uniform(self.eta))
    }

    fn position(&self, tau: f64) -> Result<WorldlinePoint, TrajectoryError> {
        Ok(WorldlinePoint { zplus: self.eta.exp() * tau, zminus: (-self.eta).exp() * tau })
    }

    fn uniform_before(&self) -> Option<f64> {
        Some(f64::INFINITY)
    }

    fn descriptor(&self) -> String {
        format!("uniform(beta={})", self.beta)
    }

    fn rescaled_family(&self, _lambda: f64) -> Option<Arc<dyn Trajectory>> {
        Some(Arc::new(self.clone()))
    }
}

/// Constant proper acceleration `α₀` for `τ ≥ τ₀` with `η = α₀τ`; uniform
/// motion at `η = α₀τ₀` before `τ₀` (or hyperbolic for all `τ` when `τ₀` is
/// absent). Null coordinates are anchored at `z±(0) = 0` on the hyperbola.
#[derive(Debug, Clone)]
pub struct Hyperbolic {
    alpha0: f64,
    tau0: Option<f64>,
}

impl Hyperbolic {
    pub fn new(alpha0: f64, tau0: Option<f64>) -> Result<Self, TrajectoryError> {
        if !alpha0.is_finite() || tau0.is_some_and(|t| !t.is_finite()) {
            return Err(TrajectoryError::InvalidParameter("hyperbolic parameters must be finite".into()));
        }
        Ok(Hyperbolic { alpha0, tau0 })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn tau0(&self) -> Option<f64> {
        self.tau0
    }

    /// Hyperbolic motion switched on through a C∞ ramp of the acceleration
    /// over `[τ₀, τ₀ + ramp]`.
    pub fn smoothly_joined(alpha0: f64, tau0: f64, ramp: f64) -> Result<ProfileTrajectory, TrajectoryError> {
        if !(ramp > 0.0) {
            return Err(TrajectoryError::InvalidParameter("ramp must be positive".into()));
        }
        let profile = AccelerationProfile::new(
            move |t: Jet| smoothstep(&(t - Jet::constant(tau0)).scale(1.0 / ramp)).scale(alpha0),
            tau0,
            0.0,
            format!("hyperbolic_smooth(alpha0={alpha0}, tau0={tau0}, ramp={ramp})"),
        );
        ProfileTrajectory::new(Arc::new(profile), Some(Onset { tau: tau0, eta_before: 0.0 }), 0.25 * ramp.min(1.0))
    }

    fn in_hyperbolic_region(&self, tau: f64) -> bool {
        self.tau0.map_or(true, |t0| tau >= t0)
    }

    fn hyperbolic_position(&self, tau: f64) -> WorldlinePoint {
        let a = self.alpha0;
        if a == 0.0 {
            return WorldlinePoint { zplus: tau, zminus: tau };
        }
        WorldlinePoint { zplus: (a * tau).exp_m1() / a, zminus: -(-a * tau).exp_m1() / a }
    }
}

impl Trajectory for Hyperbolic {
    fn rapidity(&self, tau: f64) -> Result<RapidityJet, TrajectoryError> {
        if self.in_hyperbolic_region(tau) {
            Ok(RapidityJet { eta: self.alpha0 * tau, alpha: self.alpha0, ..Default::default() })
        } else {
            Ok(RapidityJet::uniform(self.alpha0 * self.tau0.unwrap()))
        }
    }

    fn position(&self, tau: f64) -> Result<WorldlinePoint, TrajectoryError> {
        if self.in_hyperbolic_region(tau) {
            return Ok(self.hyperbolic_position(tau));
        }
        let t0 = self.tau0.unwrap();
        let z0 = self.hyperbolic_position(t0);
        let eta0 = self.alpha0 * t0;
        Ok(WorldlinePoint {
            zplus: z0.zplus + eta0.exp() * (tau - t0),
            zminus: z0.zminus + (-eta0).exp() * (tau - t0),
        })
    }

    fn null_separation(&self, tau1: f64, tau2: f64) -> Result<(f64, f64), TrajectoryError> {
        if tau1 == tau2 {
            return Ok((0.0, 0.0));
        }
        if self.in_hyperbolic_region(tau1) && self.in_hyperbolic_region(tau2) && self.alpha0 != 0.0 {
            let a = self.alpha0;
            let d = tau1 - tau2;
            return Ok(((a * tau2).exp() * (a * d).exp_m1() / a, -(-a * tau2).exp() * (-a * d).exp_m1() / a));
        }
        let p = self.position(tau1)?;
        let q = self.position(tau2)?;
        Ok((p.zplus - q.zplus, p.zminus - q.zminus))
    }

    fn exact_separation(&self) -> bool {
        true
    }

    fn breakpoints(&self) -> Vec<Breakpoint> {
        match self.tau0 {
            Some(t) if self.alpha0 != 0.0 => vec![Breakpoint { tau: t, kind: BreakpointKind::AccelerationJump }],
            _ => Vec::new(),
        }
    }

    fn uniform_before(&self) -> Option<f64> {
        if self.alpha0 == 0.0 {
            return Some(f64::INFINITY);
        }
        self.tau0
    }

    fn descriptor(&self) -> String {
        match self.tau0 {
            Some(t) => format!("hyperbolic(alpha0={}, tau0={})", self.alpha0, t),
            None => format!("hyperbolic(alpha0={})", self.alpha0),
        }
    }

    fn rescaled_family(&self, lambda: f64) -> Option<Arc<dyn Trajectory>> {
        Some(Arc::new(Hyperbolic { alpha0: self.alpha0 / lambda, tau0: self.tau0.map(|t| t * lambda) }))
    }
}

/// C∞ unit smoothstep: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smoothstep(x: &Jet) -> Jet {
    // exp(-1/x) underflows to exactly zero (with all derivatives) below this
    const FLAT: f64 = 1.4e-3;
    let v = x.value();
    if v <= FLAT {
        return Jet::constant(0.0);
    }
    if v >= 1.0 - FLAT {
        return Jet::constant(1.0);
    }
    let psi = |y: Jet| (-(Jet::constant(1.0) / y)).exp();
    let left = psi(*x);
    let right = psi(Jet::constant(1.0) - *x);
    left / (left + right)
}

/// Velocity change from `β_i` to `β_f` around `τ = 0`:
/// `η(τ) = η_i + (η_f - η_i)·s(τ/w)` with the C∞ smoothstep `s`, or a sharp
/// jump at `τ = 0` when `w = 0`.
#[derive(Debug)]
pub struct VelocityStep {
    beta_i: f64,
    beta_f: f64,
    width: f64,
    eta_i: f64,
    eta_f: f64,
    ramp: Option<ProfileTrajectory>,
}

impl VelocityStep {
    pub fn new(beta_i: f64, beta_f: f64, width: f64) -> Result<Self, TrajectoryError> {
        let eta_i = rapidity_of_velocity(beta_i)?;
        let eta_f = rapidity_of_velocity(beta_f)?;
        if !(width >= 0.0 && width.is_finite()) {
            return Err(TrajectoryError::InvalidParameter(format!("step width must be non-negative, got {width}")));
        }
        let ramp = if width > 0.0 {
            let de = eta_f - eta_i;
            let profile = JetProfile::new(
                move |t: Jet| Jet::constant(eta_i) + smoothstep(&t.scale(1.0 / width)).scale(de),
                format!("step_ramp(eta_i={eta_i}, eta_f={eta_f}, width={width})"),
            );
            Some(ProfileTrajectory::new(
                Arc::new(profile),
                Some(Onset { tau: 0.0, eta_before: eta_i }),
                width / 64.0,
            )?)
        } else {
            None
        };
        Ok(VelocityStep { beta_i, beta_f, width, eta_i, eta_f, ramp })
    }

    pub fn params(&self) -> (f64, f64, f64) {
        (self.beta_i, self.beta_f, self.width)
    }
}

impl Trajectory for VelocityStep {
    fn rapidity(&self, tau: f64) -> Result<RapidityJet, TrajectoryError> {
        match &self.ramp {
            Some(r) if tau > 0.0 && tau < self.width => r.rapidity(tau),
            _ if tau < 0.0 => Ok(RapidityJet::uniform(self.eta_i)),
            _ if self.width == 0.0 || tau >= self.width => Ok(RapidityJet::uniform(self.eta_f)),
            _ => Ok(RapidityJet::uniform(self.eta_i)),
        }
    }

    fn position(&self, tau: f64) -> Result<WorldlinePoint, TrajectoryError> {
        if tau <= 0.0 {
            return Ok(WorldlinePoint { zplus: self.eta_i.exp() * tau, zminus: (-self.eta_i).exp() * tau });
        }
        match &self.ramp {
            None => Ok(WorldlinePoint { zplus: self.eta_f.exp() * tau, zminus: (-self.eta_f).exp() * tau }),
            Some(r) if tau < self.width => r.position(tau),
            Some(r) => {
                let zw = r.position(self.width)?;
                let dt = tau - self.width;
                Ok(WorldlinePoint {
                    zplus: zw.zplus + self.eta_f.exp() * dt,
                    zminus: zw.zminus + (-self.eta_f).exp() * dt,
                })
            }
        }
    }

    fn breakpoints(&self) -> Vec<Breakpoint> {
        if self.width == 0.0 && self.eta_i != self.eta_f {
            vec![Breakpoint { tau: 0.0, kind: BreakpointKind::VelocityJump }]
        } else {
            Vec::new()
        }
    }

    fn uniform_before(&self) -> Option<f64> {
        if self.eta_i == self.eta_f {
            Some(f64::INFINITY)
        } else {
            Some(0.0)
        }
    }

    fn descriptor(&self) -> String {
        format!("step(beta_i={}, beta_f={}, width={})", self.beta_i, self.beta_f, self.width)
    }

    fn rescaled_family(&self, lambda: f64) -> Option<Arc<dyn Trajectory>> {
        VelocityStep::new(self.beta_i, self.beta_f, self.width * lambda)
            .ok()
            .map(|t| Arc::new(t) as Arc<dyn Trajectory>)
    }
}

/// Source of rapidity derivatives for [`ProfileTrajectory`].
pub trait RapidityProfile: Send + Sync + fmt::Debug {
    fn jet(&self, tau: f64) -> Result<RapidityJet, TrajectoryError>;
    fn describe(&self) -> String;
}

type JetFn = dyn Fn(Jet) -> Result<Jet, TrajectoryError> + Send + Sync;

/// Rapidity given as a function over Taylor jets; derivatives come from
/// forward-mode propagation.
pub struct JetProfile {
    eta: Box<JetFn>,
    name: String,
}

impl JetProfile {
    pub fn new(eta: impl Fn(Jet) -> Jet + Send + Sync + 'static, name: impl Into<String>) -> Self {
        JetProfile { eta: Box::new(move |t| Ok(eta(t))), name: name.into() }
    }

    pub fn fallible(
        eta: impl Fn(Jet) -> Result<Jet, TrajectoryError> + Send + Sync + 'static,
        name: impl Into<String>,
    ) -> Self {
        JetProfile { eta: Box::new(eta), name: name.into() }
    }
}

impl fmt::Debug for JetProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetProfile({})", self.name)
    }
}

impl RapidityProfile for JetProfile {
    fn jet(&self, tau: f64) -> Result<RapidityJet, TrajectoryError> {
        let j = (self.eta)(Jet::variable(tau))?;
        if !j.is_finite() {
            return Err(TrajectoryError::NonFinite { what: "rapidity", tau });
        }
        Ok(RapidityJet::from_jet(&j))
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Acceleration given as a jet function; `η(τ) = η_anchor + ∫_{anchor}^{τ} α`.
pub struct AccelerationProfile {
    alpha: Arc<JetFn>,
    eta_table: CumulativeTable<1>,
    name: String,
}

impl AccelerationProfile {
    pub fn new(
        alpha: impl Fn(Jet) -> Jet + Send + Sync + 'static,
        anchor: f64,
        eta_anchor: f64,
        name: impl Into<String>,
    ) -> Self {
        Self::fallible(move |t| Ok(alpha(t)), anchor, eta_anchor, name)
    }

    pub fn fallible(
        alpha: impl Fn(Jet) -> Result<Jet, TrajectoryError> + Send + Sync + 'static,
        anchor: f64,
        eta_anchor: f64,
        name: impl Into<String>,
    ) -> Self {
        let alpha: Arc<JetFn> = Arc::new(alpha);
        let a2 = alpha.clone();
        let eta_table = CumulativeTable::new(
            anchor,
            0.25,
            [eta_anchor],
            Box::new(move |t| {
                let v = a2(Jet::variable(t))?.value();
                if v.is_finite() {
                    Ok([v])
                } else {
                    Err(TrajectoryError::NonFinite { what: "acceleration", tau: t })
                }
            }),
        );
        AccelerationProfile { alpha, eta_table, name: name.into() }
    }
}

impl fmt::Debug for AccelerationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AccelerationProfile({})", self.name)
    }
}

impl RapidityProfile for AccelerationProfile {
    fn jet(&self, tau: f64) -> Result<RapidityJet, TrajectoryError> {
        let a = (self.alpha)(Jet::variable(tau))?;
        if !a.is_finite() {
            return Err(TrajectoryError::NonFinite { what: "acceleration", tau });
        }
        let eta = self.eta_table.value(tau)?[0];
        Ok(RapidityJet { eta, alpha: a.derivative(0), alpha_dot: a.derivative(1), alpha_ddot: a.derivative(2) })
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

type VecFn<const K: usize> = dyn Fn(f64) -> Result<[f64; K], TrajectoryError> + Send + Sync;

const CHEB_NODES: usize = 24;

/// Chebyshev expansion of the running integral over one panel.
#[derive(Debug, Clone, Copy)]
struct PanelFit<const K: usize> {
    coeffs: [[f64; CHEB_NODES + 1]; K],
}

impl<const K: usize> PanelFit<K> {
    /// Fits `f` on `[lo, lo + width]`; `None` when the expansion does not
    /// converge to rounding level (the caller then falls back to adaptive
    /// quadrature).
    fn build(f: &VecFn<K>, lo: f64, width: f64) -> Result<Option<Self>, TrajectoryError> {
        use std::f64::consts::PI;
        let n = CHEB_NODES;
        let mut samples = [[0.0; CHEB_NODES]; K];
        for i in 0..n {
            let u = (PI * (i as f64 + 0.5) / n as f64).cos();
            let v = f(lo + 0.5 * width * (u + 1.0))?;
            for c in 0..K {
                samples[c][i] = v[c];
            }
        }
        let mut coeffs = [[0.0; CHEB_NODES + 1]; K];
        for c in 0..K {
            let mut cheb = [0.0; CHEB_NODES + 2];
            for (j, cj) in cheb.iter_mut().enumerate().take(n) {
                let mut acc = 0.0;
                for (i, fi) in samples[c].iter().enumerate() {
                    acc += fi * (PI * j as f64 * (i as f64 + 0.5) / n as f64).cos();
                }
                *cj = 2.0 * acc / n as f64;
            }
            cheb[0] *= 0.5;
            let scale = cheb.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if !scale.is_finite() || cheb[n - 1].abs() + cheb[n - 2].abs() > 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Ok(None);
            }
            // Antiderivative from u = -1, scaled to proper time.
            let b = &mut coeffs[c];
            b[1] = cheb[0] - 0.5 * cheb[2];
            for j in 2..=n {
                b[j] = (cheb[j - 1] - cheb[j + 1]) / (2.0 * j as f64);
            }
            let mut at_minus_one = 0.0;
            for (j, bj) in b.iter().enumerate().skip(1) {
                at_minus_one += if j % 2 == 0 { *bj } else { -*bj };
            }
            b[0] = -at_minus_one;
            for bj in b.iter_mut() {
                *bj *= 0.5 * width;
            }
        }
        Ok(Some(PanelFit { coeffs }))
    }

    fn eval(&self, u: f64) -> [f64; K] {
        let mut out = [0.0; K];
        for (c, o) in out.iter_mut().enumerate() {
            let b = &self.coeffs[c];
            let (mut b1, mut b2) = (0.0, 0.0);
            for j in (1..b.len()).rev() {
                let t = 2.0 * u * b1 - b2 + b[j];
                b2 = b1;
                b1 = t;
            }
            *o = u * b1 - b2 + b[0];
        }
        out
    }
}

/// Running integral `F(τ) = F(anchor) + ∫_{anchor}^{τ} f`, tabulated lazily
/// on panels `[anchor + k·panel, anchor + (k+1)·panel]`. Each panel carries a
/// Chebyshev expansion of the running integral, so evaluations cost a short
/// recurrence; panels where the expansion does not resolve `f` fall back to
/// adaptive quadrature at `1e-12·panel` absolute.
pub struct CumulativeTable<const K: usize> {
    anchor: f64,
    panel: f64,
    start: [f64; K],
    f: Box<VecFn<K>>,
    panels: RwLock<HashMap<i64, TablePanel<K>>>,
}

#[derive(Debug, Clone, Copy)]
struct TablePanel<const K: usize> {
    base: [f64; K],
    fit: Option<PanelFit<K>>,
}

impl<const K: usize> CumulativeTable<K> {
    pub fn new(anchor: f64, panel: f64, start: [f64; K], f: Box<VecFn<K>>) -> Self {
        CumulativeTable { anchor, panel, start, f, panels: RwLock::new(HashMap::new()) }
    }

    fn integrate(&self, lo: f64, hi: f64) -> Result<[f64; K], TrajectoryError> {
        let mut failure = None;
        let tol = Tolerance { rel: 1e-14, abs: 1e-12 * self.panel, max_subdivisions: 200 };
        let res = integrate_vec::<K, _>(
            |t| match (self.f)(t) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    [f64::NAN; K]
                }
            },
            lo,
            hi,
            &[],
            &tol,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if !res.value.iter().all(|v| v.is_finite()) {
            return Err(TrajectoryError::NonFinite { what: "position quadrature", tau: hi });
        }
        Ok(res.value)
    }

    fn edge(&self, k: i64) -> f64 {
        self.anchor + k as f64 * self.panel
    }

    fn increment(&self, k: i64, fit: &Option<PanelFit<K>>) -> Result<[f64; K], TrajectoryError> {
        match fit {
            Some(p) => Ok(p.eval(1.0)),
            None => self.integrate(self.edge(k), self.edge(k + 1)),
        }
    }

    fn get_panel(&self, k: i64) -> Result<TablePanel<K>, TrajectoryError> {
        if let Some(p) = self.panels.read().unwrap().get(&k) {
            return Ok(*p);
        }
        let mut table = self.panels.write().unwrap();
        if !table.contains_key(&0) {
            let fit = PanelFit::build(&*self.f, self.edge(0), self.panel)?;
            table.insert(0, TablePanel { base: self.start, fit });
        }
        // Walk outward from the nearest tabulated panel.
        if k > 0 {
            let mut j = (0..k).rev().find(|j| table.contains_key(j)).unwrap();
            while j < k {
                let prev = table[&j];
                let inc = self.increment(j, &prev.fit)?;
                let mut base = prev.base;
                for i in 0..K {
                    base[i] += inc[i];
                }
                let fit = PanelFit::build(&*self.f, self.edge(j + 1), self.panel)?;
                table.insert(j + 1, TablePanel { base, fit });
                j += 1;
            }
        } else if k < 0 {
            let mut j = (k + 1..=0).find(|j| table.contains_key(j)).unwrap();
            while j > k {
                let fit = PanelFit::build(&*self.f, self.edge(j - 1), self.panel)?;
                let inc = self.increment(j - 1, &fit)?;
                let mut base = table[&j].base;
                for i in 0..K {
                    base[i] -= inc[i];
                }
                table.insert(j - 1, TablePanel { base, fit });
                j -= 1;
            }
        }
        Ok(table[&k])
    }

    pub fn value(&self, tau: f64) -> Result<[f64; K], TrajectoryError> {
        if !tau.is_finite() {
            return Err(TrajectoryError::OutOfDomain { tau });
        }
        if tau == self.anchor {
            return Ok(self.start);
        }
        let k = ((tau - self.anchor) / self.panel).floor() as i64;
        let p = self.get_panel(k)?;
        let t_k = self.edge(k);
        if tau == t_k {
            return Ok(p.base);
        }
        let piece = match &p.fit {
            Some(fit) => fit.eval(((2.0 * (tau - t_k) / self.panel) - 1.0).clamp(-1.0, 1.0)),
            None => self.integrate(t_k, tau)?,
        };
        let mut out = p.base;
        for i in 0..K {
            out[i] += piece[i];
        }
        Ok(out)
    }
}

/// Frozen uniform motion before `tau` with rapidity `eta_before`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Onset {
    pub tau: f64,
    pub eta_before: f64,
}

/// Trajectory driven by a user-supplied rapidity profile; positions come from
/// anchored quadrature of `e^{±η}`.
pub struct ProfileTrajectory {
    profile: Arc<dyn RapidityProfile>,
    onset: Option<Onset>,
    positions: CumulativeTable<2>,
    breakpoints: Vec<Breakpoint>,
}

impl fmt::Debug for ProfileTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfileTrajectory")
            .field("profile", &self.profile)
            .field("onset", &self.onset)
            .finish()
    }
}

impl ProfileTrajectory {
    /// `panel` is the checkpoint spacing of the position table; it should be
    /// small compared to the time scale of the profile.
    pub fn new(profile: Arc<dyn RapidityProfile>, onset: Option<Onset>, panel: f64) -> Result<Self, TrajectoryError> {
        if !(panel > 0.0 && panel.is_finite()) {
            return Err(TrajectoryError::InvalidParameter("position panel must be positive".into()));
        }
        let mut breakpoints = Vec::new();
        let anchor = onset.map_or(0.0, |o| o.tau);
        if let Some(o) = onset {
            let j = profile.jet(o.tau)?;
            if j.eta != o.eta_before {
                breakpoints.push(Breakpoint { tau: o.tau, kind: BreakpointKind::VelocityJump });
            } else if j.alpha != 0.0 || j.alpha_dot != 0.0 || j.alpha_ddot != 0.0 {
                breakpoints.push(Breakpoint { tau: o.tau, kind: BreakpointKind::AccelerationJump });
            }
        }
        let p2 = profile.clone();
        let positions = CumulativeTable::new(
            anchor,
            panel,
            [0.0, 0.0],
            Box::new(move |t| {
                let eta = p2.jet(t)?.eta;
                Ok([eta.exp(), (-eta).exp()])
            }),
        );
        Ok(ProfileTrajectory { profile, onset, positions, breakpoints })
    }

    pub fn profile(&self) -> &Arc<dyn RapidityProfile> {
        &self.profile
    }
}

impl Trajectory for ProfileTrajectory {
    fn rapidity(&self, tau: f64) -> Result<RapidityJet, TrajectoryError> {
        match self.onset {
            Some(o) if tau < o.tau => Ok(RapidityJet::uniform(o.eta_before)),
            _ => self.profile.jet(tau),
        }
    }

    fn position(&self, tau: f64) -> Result<WorldlinePoint, TrajectoryError> {
        match self.onset {
            Some(o) if tau < o.tau => {
                let dt = tau - o.tau;
                Ok(WorldlinePoint { zplus: o.eta_before.exp() * dt, zminus: (-o.eta_before).exp() * dt })
            }
            _ => {
                let [zp, zm] = self.positions.value(tau)?;
                Ok(WorldlinePoint { zplus: zp, zminus: zm })
            }
        }
    }

    fn breakpoints(&self) -> Vec<Breakpoint> {
        self.breakpoints.clone()
    }

    fn uniform_before(&self) -> Option<f64> {
        self.onset.map(|o| o.tau)
    }

    fn descriptor(&self) -> String {
        match self.onset {
            Some(o) => format!("profile({}; onset={}, eta_before={})", self.profile.describe(), o.tau, o.eta_before),
            None => format!("profile({})", self.profile.describe()),
        }
    }
}

/// Generic `z±_new(τ) = λ·z±(τ/λ)` wrapper.
#[derive(Debug)]
pub struct Rescaled {
    inner: Arc<dyn Trajectory>,
    lambda: f64,
}

impl Trajectory for Rescaled {
    fn rapidity(&self, tau: f64) -> Result<RapidityJet, TrajectoryError> {
        let l = self.lambda;
        let j = self.inner.rapidity(tau / l)?;
        Ok(RapidityJet {
            eta: j.eta,
            alpha: j.alpha / l,
            alpha_dot: j.alpha_dot / (l * l),
            alpha_ddot: j.alpha_ddot / (l * l * l),
        })
    }

    fn position(&self, tau: f64) -> Result<WorldlinePoint, TrajectoryError> {
        let z = self.inner.position(tau / self.lambda)?;
        Ok(WorldlinePoint { zplus: self.lambda * z.zplus, zminus: self.lambda * z.zminus })
    }

    fn null_separation(&self, tau1: f64, tau2: f64) -> Result<(f64, f64), TrajectoryError> {
        let (p, m) = self.inner.null_separation(tau1 / self.lambda, tau2 / self.lambda)?;
        Ok((self.lambda * p, self.lambda * m))
    }

    fn exact_separation(&self) -> bool {
        self.inner.exact_separation()
    }

    fn breakpoints(&self) -> Vec<Breakpoint> {
        self.inner
            .breakpoints()
            .into_iter()
            .map(|b| Breakpoint { tau: b.tau * self.lambda, kind: b.kind })
            .collect()
    }

    fn uniform_before(&self) -> Option<f64> {
        self.inner.uniform_before().map(|t| t * self.lambda)
    }

    fn descriptor(&self) -> String {
        format!("rescaled(lambda={}, {})", self.lambda, self.inner.descriptor())
    }

    fn rescaled_family(&self, lambda: f64) -> Option<Arc<dyn Trajectory>> {
        Some(Arc::new(Rescaled { inner: self.inner.clone(), lambda: self.lambda * lambda }))
    }
}

/// Convenience constructor: rapidity profile from a jet function with an
/// optional frozen past.
pub fn rapidity_profile(
    eta: impl Fn(Jet) -> Jet + Send + Sync + 'static,
    name: impl Into<String>,
    onset: Option<Onset>,
    panel: f64,
) -> Result<ProfileTrajectory, TrajectoryError> {
    ProfileTrajectory::new(Arc::new(JetProfile::new(eta, name)), onset, panel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_profile(eps: f64, omega: f64, onset: Option<Onset>) -> ProfileTrajectory {
        rapidity_profile(move |t| t.scale(omega).sin().scale(eps), "sine", onset, 0.1).unwrap()
    }

    #[test]
    fn rest_frame_state() {
        let s = state(&Uniform::new(0.0).unwrap(), 1.0).unwrap();
        assert_eq!((s.d1plus, s.d1minus, s.alpha), (1.0, 1.0, 0.0));
    }

    #[test]
    fn uniform_normalization() {
        let s = state(&Uniform::new(0.5).unwrap(), -7.3).unwrap();
        assert!((s.d1plus - 3f64.sqrt()).abs() < 1e-15);
        assert!((s.d1minus - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((s.d1plus * s.d1minus - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_defining_property() {
        let s = state(&Hyperbolic::new(0.3, None).unwrap(), 2.0).unwrap();
        assert!((s.alpha - 0.3).abs() < 1e-15);
        assert!((s.eta - 0.6).abs() < 1e-15);
        assert!((s.d2plus / s.d1plus - 0.3).abs() < 1e-15);
        assert!((-s.d2minus / s.d1minus - 0.3).abs() < 1e-15);
    }

    #[test]
    fn null_separation_examples() {
        let u = Uniform::new(0.0).unwrap();
        assert_eq!(null_separation(&u, 3.0, 1.0).unwrap(), (2.0, 2.0));
        assert_eq!(null_separation(&u, 1.0, 1.0).unwrap(), (0.0, 0.0));
        let h = Hyperbolic::new(0.5, None).unwrap();
        let (dp, _) = null_separation(&h, 1.0, 0.0).unwrap();
        assert!((dp - 2.0 * (0.5f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_secant_ratio_is_constant() {
        let h = Hyperbolic::new(0.7, Some(-5.0)).unwrap();
        for (t1, t2) in [(0.3, 0.1), (4.0, -4.0), (-1.0, 2.5)] {
            let (dp, _) = h.null_separation(t1, t2).unwrap();
            let d1 = h.rapidity(t1).unwrap().eta.exp() - h.rapidity(t2).unwrap().eta.exp();
            assert!((d1 / dp - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_positions_match_closed_form_for_constant_rapidity() {
        let eta = 0.4;
        let p = rapidity_profile(move |_| Jet::constant(eta), "const", None, 0.3).unwrap();
        for tau in [-5.1, -0.2, 0.0, 0.7, 12.34] {
            let z = p.position(tau).unwrap();
            assert!((z.zplus - eta.exp() * tau).abs() < 1e-12 * (1.0 + tau.abs()));
            assert!((z.zminus - (-eta).exp() * tau).abs() < 1e-12 * (1.0 + tau.abs()));
        }
    }

    #[test]
    fn profile_onset_declares_breakpoints() {
        let p = sine_profile(0.1, 0.5, Some(Onset { tau: 0.0, eta_before: 0.0 }));
        assert_eq!(p.breakpoints()[0].kind, BreakpointKind::AccelerationJump);
        let q = rapidity_profile(|t| t.scale(0.1) + Jet::constant(0.2), "jump", Some(Onset { tau: 0.0, eta_before: 0.0 }), 0.1)
            .unwrap();
        assert_eq!(q.breakpoints()[0].kind, BreakpointKind::VelocityJump);
        assert_eq!(q.uniform_before(), Some(0.0));
        assert_eq!(q.rapidity(-1.0).unwrap().eta, 0.0);
    }

    #[test]
    fn smooth_step_is_monotone_and_flat_outside() {
        let step = VelocityStep::new(-0.2, 0.6, 2.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in -5..30 {
            let t = k as f64 * 0.1;
            let j = step.rapidity(t).unwrap();
            assert!(j.eta >= prev);
            prev = j.eta;
        }
        assert_eq!(step.rapidity(-0.1).unwrap().eta, (-0.2f64).atanh());
        assert_eq!(step.rapidity(2.5).unwrap().eta, 0.6f64.atanh());
        assert!(step.breakpoints().is_empty());
        // position continuity across the end of the ramp
        let a = step.position(2.0 - 1e-9).unwrap();
        let b = step.position(2.0 + 1e-9).unwrap();
        assert!((a.zplus - b.zplus).abs() < 1e-8);
    }

    #[test]
    fn smoothly_joined_hyperbola_reaches_constant_acceleration() {
        let h = Hyperbolic::smoothly_joined(0.2, 1.0, 2.0).unwrap();
        let j = h.rapidity(10.0).unwrap();
        assert!((j.alpha - 0.2).abs() < 1e-14);
        // η = 0.2·(τ - τ₀ - ramp/2) once the symmetric ramp is complete
        assert!((j.eta - 0.2 * (10.0 - 1.0 - 1.0)).abs() < 1e-10, "{}", j.eta);
        assert_eq!(h.rapidity(0.5).unwrap().alpha, 0.0);
    }

    #[test]
    fn rescale_maps_families() {
        let h: Arc<dyn Trajectory> = Arc::new(Hyperbolic::new(0.4, Some(-1.0)).unwrap());
        let r = rescale(&h, 2.0).unwrap();
        assert_eq!(r.descriptor(), "hyperbolic(alpha0=0.2, tau0=-2)");
        let s: Arc<dyn Trajectory> = Arc::new(VelocityStep::new(0.0, 0.5, 1.5).unwrap());
        assert_eq!(rescale(&s, 2.0).unwrap().descriptor(), "step(beta_i=0, beta_f=0.5, width=3)");
        let u: Arc<dyn Trajectory> = Arc::new(Uniform::new(0.3).unwrap());
        assert_eq!(rescale(&u, 3.0).unwrap().descriptor(), u.descriptor());
        assert!(rescale(&u, 0.0).is_err());
    }

    #[test]
    fn generic_rescale_scales_positions_and_derivatives() {
        let p: Arc<dyn Trajectory> = Arc::new(sine_profile(0.3, 0.7, None));
        let r = rescale(&p, 2.0).unwrap();
        let a = p.rapidity(1.5).unwrap();
        let b = r.rapidity(3.0).unwrap();
        assert_eq!(a.eta, b.eta);
        assert_eq!(a.alpha / 2.0, b.alpha);
        assert_eq!(a.alpha_ddot / 8.0, b.alpha_ddot);
        let za = p.position(1.5).unwrap();
        let zb = r.position(3.0).unwrap();
        assert_eq!(2.0 * za.zplus, zb.zplus);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Uniform::new(1.0).is_err());
        assert!(VelocityStep::new(0.0, 0.5, -1.0).is_err());
        assert!(Hyperbolic::new(f64::NAN, None).is_err());
    }
}
