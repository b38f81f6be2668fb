//! Adaptive integration over the damped past history.
//!
//! History integrals `∫_{-∞}^{τ} f(s) ds` run over the window `[τ - Λ/a, τ]`
//! in proper time, with the damping left in the integrand so that adaptive
//! refinement concentrates on the recent past. The neglected tail is bounded
//! from a caller-supplied envelope constant. Everything is built on one vector-valued adaptive
//! Gauss–Kronrod (7/15) integrator so that several related integrands can share
//! a node set.

use crate::error::QuadratureError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// History cutoff in units of `1/a`.
    pub window_lambda: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            window_lambda: 40.0,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(QuadratureError::InvalidSpec("tolerances must be positive".into()));
        }
        if !(self.window_lambda >= 10.0) {
            return Err(QuadratureError::InvalidSpec("window_lambda must be at least 10".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(QuadratureError::InvalidSpec("max_subdivisions must be positive".into()));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_window(mut self, window_lambda: f64) -> Self {
        self.window_lambda = window_lambda;
        self
    }

    /// Lower end of the truncated history window for coupling `a`.
    pub fn window_start(&self, tau: f64, a: f64) -> f64 {
        tau - self.window_lambda / a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub tail_bound: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl IntegralResult {
    /// Total uncertainty: quadrature error plus truncated tail.
    pub fn total_error(&self) -> f64 {
        self.error_estimate + self.tail_bound
    }
}

/// Vector-valued result; `value[i]` and `error[i]` per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VecResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub tail_bound: [f64; N],
    pub evaluations: usize,
    pub converged: bool,
}

impl<const N: usize> VecResult<N> {
    pub fn component(&self, i: usize) -> IntegralResult {
        IntegralResult {
            value: self.value[i],
            error_estimate: self.error[i],
            tail_bound: self.tail_bound[i],
            evaluations: self.evaluations,
            converged: self.converged,
        }
    }

    fn scaled(mut self, s: f64) -> Self {
        for i in 0..N {
            self.value[i] *= s;
            self.error[i] *= s.abs();
            self.tail_bound[i] *= s.abs();
        }
        self
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    lo: f64,
    hi: f64,
    value: [f64; N],
    error: [f64; N],
}

impl<const N: usize> Panel<N> {
    fn worst(&self) -> f64 {
        self.error.iter().fold(0.0_f64, |m, e| m.max(*e))
    }
}

fn gk15<const N: usize, F>(f: &mut F, lo: f64, hi: f64) -> Panel<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut resk = [0.0; N];
    let mut resg = [0.0; N];
    let mut resabs = [0.0; N];
    let mut fv1 = [[0.0; N]; 7];
    let mut fv2 = [[0.0; N]; 7];
    for i in 0..N {
        resk[i] = fc[i] * WGK[7];
        resg[i] = fc[i] * WG[3];
        resabs[i] = fc[i].abs() * WGK[7];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        for i in 0..N {
            resk[i] += WGK[j] * (f1[i] + f2[i]);
            resabs[i] += WGK[j] * (f1[i].abs() + f2[i].abs());
            if j % 2 == 1 {
                resg[i] += WG[j / 2] * (f1[i] + f2[i]);
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        let mean = resk[i] * 0.5;
        let mut resasc = WGK[7] * (fc[i] - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv1[j][i] - mean).abs() + (fv2[j][i] - mean).abs());
        }
        let resasc = resasc * half.abs();
        let resabs_i = resabs[i] * half.abs();
        let mut err = ((resk[i] - resg[i]) * half).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs_i > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs_i);
        }
        value[i] = resk[i] * half;
        error[i] = if value[i].is_finite() { err } else { f64::INFINITY };
    }
    Panel { lo, hi, value, error }
}

/// Tolerance pair used by the low-level integrator.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl From<&QuadratureSpec> for Tolerance {
    fn from(s: &QuadratureSpec) -> Self {
        Tolerance { rel: s.rel_tol, abs: s.abs_tol, max_subdivisions: s.max_subdivisions }
    }
}

fn accepted<const N: usize>(value: &[f64; N], error: &[f64; N], tol: &Tolerance) -> bool {
    let scale = value.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let budget = (tol.rel * scale).max(tol.abs);
    error.iter().sum::<f64>() <= budget
}

/// Adaptive vector Gauss–Kronrod integration of `f` over `[lo, hi]`.
///
/// `breakpoints` strictly inside the interval start as panel boundaries. The
/// error budget is `max(rel·max_i|I_i|, abs)` on the summed component errors.
/// Final assembly sums panels in order of their left endpoint.
pub fn integrate_vec<const N: usize, F>(
    mut f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tol: &Tolerance,
) -> VecResult<N>
where
    F: FnMut(f64) -> [f64; N],
{
    if !(hi > lo) {
        return VecResult {
            value: [0.0; N],
            error: [0.0; N],
            tail_bound: [0.0; N],
            evaluations: 0,
            converged: hi == lo,
        };
    }
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > lo && *b < hi).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut edges = vec![lo];
    edges.extend(cuts);
    edges.push(hi);

    let mut panels: Vec<Panel<N>> = edges.windows(2).map(|w| gk15(&mut f, w[0], w[1])).collect();
    let mut evaluations = 15 * panels.len();
    let mut converged = false;
    let mut finite = true;
    loop {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for p in &panels {
            for i in 0..N {
                value[i] += p.value[i];
                error[i] += p.error[i];
            }
        }
        if !error.iter().all(|e| e.is_finite()) || !value.iter().all(|v| v.is_finite()) {
            finite = false;
        }
        if finite && accepted(&value, &error, tol) {
            converged = true;
            break;
        }
        if !finite || panels.len() >= tol.max_subdivisions {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.worst().partial_cmp(&b.worst()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.lo + p.hi);
        if !(mid > p.lo && mid < p.hi) {
            // Panel below floating-point resolution; keep it and stop refining.
            panels.push(p);
            break;
        }
        panels.push(gk15(&mut f, p.lo, mid));
        panels.push(gk15(&mut f, mid, p.hi));
        evaluations += 30;
    }
    panels.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
    let mut sums = [CompensatedSum::default(); N];
    let mut error = [0.0; N];
    for p in &panels {
        for i in 0..N {
            sums[i].add(p.value[i]);
            error[i] += p.error[i];
        }
    }
    let mut value = [0.0; N];
    for i in 0..N {
        value[i] = sums[i].total();
    }
    VecResult { value, error, tail_bound: [0.0; N], evaluations, converged: converged && finite }
}

/// Scalar adaptive integration.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, breakpoints: &[f64], tol: &Tolerance) -> IntegralResult
where
    F: FnMut(f64) -> f64,
{
    integrate_vec::<1, _>(|x| [f(x)], lo, hi, breakpoints, tol).component(0)
}

/// Initial panel count over the history window; adaptivity refines from here.
const WINDOW_PANELS: usize = 8;

/// Initial cuts in `(lo, hi)`: equal panels plus caller breakpoints.
fn window_cuts(lo: f64, hi: f64, breakpoints: &[f64]) -> Vec<f64> {
    let step = (hi - lo) / WINDOW_PANELS as f64;
    let mut cuts: Vec<f64> = (1..WINDOW_PANELS).map(|k| lo + k as f64 * step).collect();
    cuts.extend(breakpoints.iter().copied().filter(|b| *b > lo && *b < hi));
    cuts
}

/// `∫_{-∞}^{τ} f(s) ds` for integrands carrying the damping `e^{a(s-τ)/2}`.
///
/// The window `[τ - Λ/a, τ]` starts out split into equal panels (plus the
/// breakpoints) and is refined adaptively. `envelope` is the constant `M` in
/// `|f(s)| ≤ M e^{a(s-τ)/2}(1 + |ln(τ-s)|)`; the reported tail bound is
/// `(2M/a)·e^{-Λ/2}·(1 + |ln(Λ/a)|)`.
pub fn history_1d_vec<const N: usize, F>(
    f: F,
    tau: f64,
    a: f64,
    spec: &QuadratureSpec,
    breakpoints: &[f64],
    envelope: [f64; N],
) -> VecResult<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let x_min = (-0.5 * spec.window_lambda).exp();
    let lo = spec.window_start(tau, a);
    let mut res = integrate_vec::<N, _>(f, lo, tau, &window_cuts(lo, tau, breakpoints), &Tolerance::from(spec));
    let tail_log = 1.0 + (spec.window_lambda / a).ln().abs();
    for i in 0..N {
        res.tail_bound[i] = 2.0 * envelope[i].abs() / a * x_min * tail_log;
    }
    res
}

pub fn integrate_history_1d<F>(
    mut f: F,
    tau: f64,
    a: f64,
    spec: &QuadratureSpec,
    breakpoints: &[f64],
    envelope: f64,
) -> IntegralResult
where
    F: FnMut(f64) -> f64,
{
    history_1d_vec::<1, _>(|s| [f(s)], tau, a, spec, breakpoints, [envelope]).component(0)
}

/// Panel caps for the iterated 2D rule. Together they bound the work spent on
/// tolerances below the integrand's roundoff, which then report non-convergence.
const INNER_MAX_PANELS: usize = 100;
const OUTER_MAX_PANELS: usize = 400;

/// `∬_{(-∞,τ]²} g(τ₁,τ₂) dτ₁dτ₂` for integrands carrying `e^{a((τ₁+τ₂)/2-τ)}`.
///
/// Iterated: the outer variable runs over the window, the inner one up to the
/// diagonal when `symmetric` (result doubled), otherwise over the whole window
/// with the diagonal as a panel boundary. Singularities on the diagonal
/// therefore always sit at an inner panel edge. Inner integrals run at a tenth
/// of the outer tolerance; their error estimates are integrated over the
/// outer variable and added to the reported error.
pub fn history_2d_vec<const N: usize, G>(
    g: G,
    tau: f64,
    a: f64,
    spec: &QuadratureSpec,
    breakpoints: &[f64],
    symmetric: bool,
    envelope: [f64; N],
) -> VecResult<N>
where
    G: Fn(f64, f64) -> [f64; N],
{
    let x_min = (-0.5 * spec.window_lambda).exp();
    let lo = spec.window_start(tau, a);
    let cuts = window_cuts(lo, tau, breakpoints);
    let inner_tol = Tolerance {
        rel: spec.rel_tol * 0.1,
        abs: spec.abs_tol * 0.1,
        max_subdivisions: spec.max_subdivisions.min(INNER_MAX_PANELS),
    };
    let mut inner_err: Vec<(f64, [f64; N])> = Vec::new();
    let mut inner_evals = 0usize;
    let mut inner_ok = true;
    let outer = integrate_vec::<N, _>(
        |s1| {
            let (hi, inner_cuts) = if symmetric {
                (s1, cuts.clone())
            } else {
                let mut c = cuts.clone();
                c.push(s1);
                (tau, c)
            };
            let r = integrate_vec::<N, _>(|s2| g(s1, s2), lo, hi, &inner_cuts, &inner_tol);
            inner_evals += r.evaluations;
            inner_ok &= r.converged;
            inner_err.push((s1, r.error));
            r.value
        },
        lo,
        tau,
        &cuts,
        &Tolerance { max_subdivisions: spec.max_subdivisions.min(OUTER_MAX_PANELS), ..Tolerance::from(spec) },
    );
    let mut res = VecResult {
        value: outer.value,
        error: outer.error,
        tail_bound: [0.0; N],
        evaluations: inner_evals,
        converged: outer.converged && inner_ok,
    };
    inner_err.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for w in inner_err.windows(2) {
        let ds = w[1].0 - w[0].0;
        for i in 0..N {
            res.error[i] += 0.5 * ds * (w[0].1[i] + w[1].1[i]);
        }
    }
    for i in 0..N {
        // Strip of width Λ/a beyond the window on either side, damped by e^{-Λ/2}.
        res.tail_bound[i] = 2.0 * (2.0 * envelope[i].abs() / a) * (2.0 / a) * x_min;
    }
    if symmetric {
        res = res.scaled(2.0);
    }
    res
}

pub fn integrate_history_2d<G>(
    g: G,
    tau: f64,
    a: f64,
    spec: &QuadratureSpec,
    breakpoints: &[f64],
    symmetric: bool,
    envelope: f64,
) -> IntegralResult
where
    G: Fn(f64, f64) -> f64,
{
    history_2d_vec::<1, _>(|s1, s2| [g(s1, s2)], tau, a, spec, breakpoints, symmetric, [envelope]).component(0)
}

/// Double-exponential (tanh-sinh) integration of `F(u)` over `(0, len]` where
/// `F` may carry an integrable singularity at `u = 0`. `u` is passed exactly
/// (no cancellation near the singular end).
pub fn tanh_sinh_from_singular<F>(mut f: F, len: f64, rel_tol: f64, abs_tol: f64) -> IntegralResult
where
    F: FnMut(f64) -> f64,
{
    use std::f64::consts::FRAC_PI_2;
    let t_max = 4.0;
    let node = |t: f64| -> (f64, f64) {
        let g = FRAC_PI_2 * t.sinh();
        let u = len / (1.0 + (-2.0 * g).exp());
        let ch = g.cosh();
        let w = len * FRAC_PI_2 * t.cosh() / (2.0 * ch * ch);
        (u, w)
    };
    let mut evaluations = 0usize;
    let mut eval = |t: f64, evals: &mut usize| -> f64 {
        let (u, w) = node(t);
        if !(u > 0.0) || w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        *evals += 1;
        let v = f(u) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut h = 0.5;
    let mut sum = CompensatedSum::default();
    let n0 = (t_max / h) as i64;
    for k in -n0..=n0 {
        sum.add(eval(k as f64 * h, &mut evaluations));
    }
    let mut estimate = sum.total() * h;
    let mut error = f64::INFINITY;
    let mut converged = false;
    for _level in 0..10 {
        h *= 0.5;
        let n = (t_max / h) as i64;
        for k in (-n..=n).filter(|k| k % 2 != 0) {
            sum.add(eval(k as f64 * h, &mut evaluations));
        }
        let next = sum.total() * h;
        error = (next - estimate).abs();
        estimate = next;
        if error <= (rel_tol * estimate.abs()).max(abs_tol) {
            converged = true;
            break;
        }
    }
    IntegralResult { value: estimate, error_estimate: error, tail_bound: 0.0, evaluations, converged }
}

/// `∫_{lo}^{hi} f(s)·ln|s - c| ds` with singularity-adapted nodes on each side
/// of `c` (which may coincide with an endpoint).
pub fn integrate_log_singular<F>(
    mut f_regular: F,
    singular_at: f64,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<IntegralResult, QuadratureError>
where
    F: FnMut(f64) -> f64,
{
    if !(hi > lo) {
        return Err(QuadratureError::InvalidRange { lo, hi });
    }
    if singular_at < lo || singular_at > hi {
        // Singularity outside the range: the integrand is smooth.
        return Ok(integrate(|s| f_regular(s) * (s - singular_at).abs().ln(), lo, hi, &[], &Tolerance::from(spec)));
    }
    let c = singular_at;
    let mut total = IntegralResult { converged: true, ..Default::default() };
    let mut add = |r: IntegralResult| {
        total.value += r.value;
        total.error_estimate += r.error_estimate;
        total.evaluations += r.evaluations;
        total.converged &= r.converged;
    };
    if c > lo {
        add(tanh_sinh_from_singular(|u| f_regular(c - u) * u.ln(), c - lo, spec.rel_tol, spec.abs_tol));
    }
    if hi > c {
        add(tanh_sinh_from_singular(|u| f_regular(c + u) * u.ln(), hi - c, spec.rel_tol, spec.abs_tol));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn plain_integration_of_polynomial_is_exact() {
        let r = integrate(|x| x * x * x - x, 0.0, 2.0, &[], &Tolerance::from(&QuadratureSpec::default()));
        assert!((r.value - 2.0).abs() < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn damping_alone_integrates_to_one() {
        let tau = 3.0;
        let a = 2.0;
        let spec = QuadratureSpec::default();
        let r = integrate_history_1d(|s| (0.5 * a * (s - tau)).exp(), tau, a, &spec, &[], 1.0);
        assert!((r.value - 1.0).abs() < 1e-10 + r.tail_bound, "{r:?}");
    }

    #[test]
    fn log_weight_gives_euler_gamma() {
        let tau = -1.5;
        let a = 2.0;
        let spec = QuadratureSpec::default();
        let r = integrate_history_1d(
            |s| (tau - s).ln() * (0.5 * a * (s - tau)).exp(),
            tau,
            a,
            &spec,
            &[],
            1.0,
        );
        assert!((r.value + EULER_GAMMA).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn presplitting_does_not_change_result() {
        let tau = 0.0;
        let a = 1.0;
        let spec = QuadratureSpec::default();
        let f = |s: f64| if s < -3.0 { 0.5 } else { 1.0 + s.sin() } * (0.5 * a * (s - tau)).exp();
        let split = integrate_history_1d(f, tau, a, &spec, &[-3.0], 2.0);
        let unsplit = integrate_history_1d(f, tau, a, &spec, &[], 2.0);
        assert!(split.converged);
        assert!((split.value - unsplit.value).abs() < 1e-7, "{split:?} {unsplit:?}");
    }

    #[test]
    fn log_singular_closed_forms() {
        let spec = QuadratureSpec::default();
        let r = integrate_log_singular(|_| 1.0, 4.0, 3.0, 4.0, &spec).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12, "{r:?}");
        let r = integrate_log_singular(|s| 4.0 - s, 4.0, 3.0, 4.0, &spec).unwrap();
        assert!((r.value + 0.25).abs() < 1e-12, "{r:?}");
        let tau = 0.0;
        let a = 2.0;
        let r = integrate_log_singular(|s| (0.5 * a * (s - tau)).exp(), tau, tau - 40.0 / a, tau, &spec).unwrap();
        // The window drops e^{-20}·ln 20 + E1(20) of the full integral.
        let dropped = (-20f64).exp() * 20f64.ln() + 9.835_525_290_649_88e-11;
        assert!((r.value + EULER_GAMMA + dropped).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn two_dimensional_damping_and_log_diagonal() {
        let tau = 0.7;
        let a = 2.0;
        let spec = QuadratureSpec::default();
        let e = |s1: f64, s2: f64| (a * (0.5 * (s1 + s2) - tau)).exp();
        let r = integrate_history_2d(e, tau, a, &spec, &[], true, 1.0);
        assert!((r.value - 1.0).abs() < 1e-10 + r.tail_bound, "{r:?}");
        let general = integrate_history_2d(e, tau, a, &spec, &[], false, 1.0);
        assert!((general.value - r.value).abs() < 1e-9);
        let lg = |s1: f64, s2: f64| ((s1 - s2) * (s1 - s2)).ln() * e(s1, s2);
        let r = integrate_history_2d(lg, tau, a, &spec, &[], true, 1.0);
        assert!((r.value + 2.0 * EULER_GAMMA).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn invalid_spec_is_rejected() {
        assert!(QuadratureSpec::default().with_window(5.0).validate().is_err());
        assert!(QuadratureSpec::default().with_rel_tol(0.0).validate().is_err());
    }
}
