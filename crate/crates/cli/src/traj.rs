//! Trajectory and quadrature settings from command-line arguments.

use std::sync::Arc;

use mirror_core::dsl;
use mirror_core::trajectory::{Hyperbolic, Trajectory, Uniform, VelocityStep};
use mirror_core::QuadratureSpec;

use crate::args::{CommonArgs, Family, TrajectoryArgs};
use crate::CliError;

pub fn build(t: &TrajectoryArgs) -> Result<Arc<dyn Trajectory>, CliError> {
    let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
    if let Some(src) = &t.traj {
        let spec = dsl::parse(src).map_err(|e| usage(&e))?;
        return Ok(Arc::new(spec.trajectory(t.onset, t.panel).map_err(|e| usage(&e))?));
    }
    let family = t.family.unwrap_or(Family::Uniform);
    Ok(match family {
        Family::Uniform => Arc::new(Uniform::new(t.beta).map_err(|e| usage(&e))?),
        Family::Hyperbolic => Arc::new(Hyperbolic::new(t.alpha0, t.tau0).map_err(|e| usage(&e))?),
        Family::HyperbolicSmooth => {
            Arc::new(Hyperbolic::smoothly_joined(t.alpha0, t.tau0.unwrap_or(0.0), t.ramp).map_err(|e| usage(&e))?)
        }
        Family::Step => Arc::new(VelocityStep::new(t.beta_i, t.beta_f, t.width).map_err(|e| usage(&e))?),
    })
}

pub fn spec(c: &CommonArgs) -> Result<QuadratureSpec, CliError> {
    let s = QuadratureSpec {
        rel_tol: c.rel_tol,
        abs_tol: c.abs_tol,
        window_lambda: c.window,
        max_subdivisions: c.max_subdivisions,
    };
    s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(c.a > 0.0 && c.a.is_finite()) {
        return Err(CliError::Usage(format!("--a must be positive, got {}", c.a)));
    }
    Ok(s)
}

/// `tau_start, tau_start + dtau, …` up to `tau_end` inclusive.
pub fn grid(c: &CommonArgs) -> Result<Vec<f64>, CliError> {
    if !(c.tau_start < c.tau_end) || !c.tau_end.is_finite() || !c.tau_start.is_finite() {
        return Err(CliError::Usage(format!("need tau-start < tau-end, got {} and {}", c.tau_start, c.tau_end)));
    }
    if !(c.dtau > 0.0 && c.dtau.is_finite()) {
        return Err(CliError::Usage(format!("--dtau must be positive, got {}", c.dtau)));
    }
    let n = ((c.tau_end - c.tau_start) / c.dtau + 1e-9).floor() as usize;
    if n > 10_000_000 {
        return Err(CliError::Usage(format!("grid of {n} points is too large")));
    }
    Ok((0..=n).map(|k| c.tau_start + k as f64 * c.dtau).collect())
}
