//! Invariant battery behind `mirror check`.

use std::sync::Arc;
use std::time::Instant;

use mirror_core::dsl;
use mirror_core::massshift::{mu0_closed_form, mu_direct, mu_dot_strong, mu_dot_weak};
use mirror_core::trajectory::rescale;
use mirror_core::{Hyperbolic, QuadratureSpec, Trajectory, Uniform};

use crate::args::CheckArgs;
use crate::{CliError, Status};

type Outcome = Result<(bool, String), String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fault {
    None,
    Mu0Prefactor,
}

struct Ctx {
    quick: bool,
    fault: Fault,
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn profile(src: &str, onset: Option<f64>) -> Result<Arc<dyn Trajectory>, String> {
    let spec = dsl::parse(src).map_err(err)?;
    Ok(Arc::new(spec.trajectory(onset, 0.25).map_err(err)?))
}

fn tight() -> QuadratureSpec {
    QuadratureSpec { rel_tol: 1e-10, abs_tol: 1e-15, ..Default::default() }
}

fn direct_spec() -> QuadratureSpec {
    QuadratureSpec { rel_tol: 1e-11, abs_tol: 1e-15, window_lambda: 60.0, ..Default::default() }
}

fn uniform_null(ctx: &Ctx) -> Outcome {
    let spec = QuadratureSpec::default();
    let betas: &[f64] = if ctx.quick { &[0.0, 0.8] } else { &[0.0, 0.6, -0.9] };
    let mut worst = 0.0f64;
    for &beta in betas {
        let u = Uniform::new(beta).map_err(err)?;
        for a in [0.7, 2.0] {
            for tau in [-1.0, 3.0] {
                let s = mu_dot_strong(&u, tau, a, &spec).map_err(err)?.mu_dot;
                let w = mu_dot_weak(&u, tau, a, &spec).map_err(err)?.mu_dot;
                worst = worst.max(s.abs().max(w.abs()) / (a * a));
            }
        }
    }
    Ok((worst < 1e-10, format!("max |mu_dot|/a^2 = {worst:.1e}")))
}

fn hyperbolic_null(ctx: &Ctx) -> Outcome {
    let spec = QuadratureSpec::default();
    let ratios: &[f64] = if ctx.quick { &[0.3] } else { &[0.1, 0.3, 1.0] };
    let mut worst = 0.0f64;
    for &r in ratios {
        let h = Hyperbolic::new(r, None).map_err(err)?;
        for tau in [-2.0, 0.5, 4.0] {
            worst = worst.max(mu_dot_strong(&h, tau, 1.0, &spec).map_err(err)?.mu_dot.abs());
        }
    }
    Ok((worst < 1e-10, format!("max |mu_dot|/a^2 = {worst:.1e}")))
}

fn weak_strong(ctx: &Ctx) -> Outcome {
    let traj = profile("eta = 0.3 + 0.2*sin(0.5*tau)", None)?;
    let taus: &[f64] = if ctx.quick { &[0.7] } else { &[0.7, 2.9, 5.3] };
    let mut worst = 0.0f64;
    for &tau in taus {
        let s = mu_dot_strong(traj.as_ref(), tau, 1.0, &tight()).map_err(err)?.mu_dot;
        let w = mu_dot_weak(traj.as_ref(), tau, 1.0, &tight()).map_err(err)?.mu_dot;
        worst = worst.max((s - w).abs() / s.abs());
    }
    Ok((worst < 1e-6, format!("max rel. difference = {worst:.1e}")))
}

fn rescaling(ctx: &Ctx) -> Outcome {
    let traj = profile("eta = 0.2*sin(0.4*tau) + 0.1*tau", None)?;
    let lambda = 2.0;
    let scaled = rescale(&traj, lambda).map_err(err)?;
    let spec = tight();
    let taus: &[f64] = if ctx.quick { &[0.5] } else { &[0.5, 1.7] };
    let mut worst = 0.0f64;
    for &tau in taus {
        let r = mu_dot_strong(traj.as_ref(), tau, 1.5, &spec).map_err(err)?.mu_dot;
        let rs = mu_dot_strong(scaled.as_ref(), lambda * tau, 1.5 / lambda, &spec).map_err(err)?.mu_dot;
        worst = worst.max((rs * lambda * lambda - r).abs() / r.abs());
    }
    Ok((worst < 1e-7, format!("max rel. deviation from 1/lambda^2 = {worst:.1e}")))
}

fn mu0(ctx: &Ctx) -> Outcome {
    let spec = direct_spec();
    let coups: &[f64] = if ctx.quick { &[1.0] } else { &[0.5, 1.0, 3.0] };
    let (mut worst, mut spread) = (0.0f64, 0.0f64);
    for &a in coups {
        let mut closed = mu0_closed_form(a);
        if ctx.fault == Fault::Mu0Prefactor {
            closed *= 1.01;
        }
        let rest = mu_direct(&Uniform::new(0.0).map_err(err)?, 0.3, a, &spec).map_err(err)?.raw;
        let fast = mu_direct(&Uniform::new(0.9).map_err(err)?, 0.3, a, &spec).map_err(err)?.raw;
        worst = worst.max((rest - closed).abs() / closed.abs());
        spread = spread.max((rest - fast).abs() / rest.abs());
    }
    Ok((worst < 1e-8 && spread < 1e-6, format!("rel. error {worst:.1e}, beta 0 vs 0.9 spread {spread:.1e}")))
}

fn nonrelativistic(ctx: &Ctx) -> Outcome {
    let spec = direct_spec();
    let taus: &[f64] = if ctx.quick { &[0.3] } else { &[0.3, 1.1, 2.0] };
    let mut scaled = Vec::new();
    for eps in [0.02, 0.01] {
        let traj = profile(&format!("eta = {eps}*sin(tau)"), None)?;
        let mut v = Vec::new();
        for &tau in taus {
            v.push(mu_direct(traj.as_ref(), tau, 1.0, &spec).map_err(err)?.mu / (eps * eps));
        }
        scaled.push(v);
    }
    let worst = scaled[0].iter().zip(&scaled[1]).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0f64, f64::max);
    Ok((worst < 0.05, format!("max rel. spread of mu/eps^2 = {worst:.1e}")))
}

fn perfect_mirror(ctx: &Ctx) -> Outcome {
    let traj = profile("eta = 0.15*tanh(tau)", None)?;
    let spec = direct_spec();
    let (coups, n): (&[f64], usize) = if ctx.quick { (&[10.0, 40.0], 20) } else { (&[5.0, 10.0, 20.0, 40.0], 40) };
    let mut pts = Vec::new();
    for &a in coups {
        let mut peak = 0.0f64;
        for k in 0..=n {
            let tau = -2.0 + 4.0 * k as f64 / n as f64;
            peak = peak.max(mu_direct(traj.as_ref(), tau, a, &spec).map_err(err)?.mu.abs());
        }
        pts.push((a.ln(), peak.ln()));
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Ok(((slope + 1.0).abs() <= 0.1, format!("log-log slope of max|mu| vs a = {slope:.3}")))
}

const CHECKS: &[(&str, fn(&Ctx) -> Outcome)] = &[
    ("uniform-null", uniform_null),
    ("hyperbolic-null", hyperbolic_null),
    ("weak-vs-strong", weak_strong),
    ("rescaling", rescaling),
    ("mu0-closed-form", mu0),
    ("nonrelativistic", nonrelativistic),
    ("inverse-a-slope", perfect_mirror),
];

pub fn run(args: &CheckArgs) -> Result<Status, CliError> {
    let fault = match args.inject_fault.as_deref() {
        None => Fault::None,
        Some("mu0-prefactor") => Fault::Mu0Prefactor,
        Some(other) => return Err(CliError::Usage(format!("unknown fault `{other}`"))),
    };
    let ctx = Ctx { quick: args.quick, fault };
    let mut report = String::new();
    let mut failed = 0;
    for (name, check) in CHECKS {
        let start = Instant::now();
        let (pass, detail) = match check(&ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        report.push_str(&format!(
            "{name:<18} {} {detail} ({:.2} s)\n",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        ));
    }
    report.push_str(&format!("{} of {} checks passed\n", CHECKS.len() - failed, CHECKS.len()));
    match &args.common.out {
        Some(p) => std::fs::write(p, &report).map_err(|source| CliError::Io { path: p.display().to_string(), source })?,
        None => print!("{report}"),
    }
    Ok(if failed == 0 { Status::Ok } else { Status::CheckFailed })
}
