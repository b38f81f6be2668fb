//! The `mu`, `mu0`, `flux` and `dynamics` commands.

use rayon::prelude::*;

use mirror_core::dynamics::{evolve, DynamicsConfig};
use mirror_core::error::{DynamicsError, MassShiftError, QuadratureError};
use mirror_core::massshift::{flux_pair, mu0_closed_form, mu_direct, mu_series};
use mirror_core::{Trajectory, Uniform};

use crate::args::{CommonArgs, DynamicsArgs, Family, Method, MuArgs};
use crate::output::{emit, Metadata, Table};
use crate::{traj, CliError, Status};

/// Invalid input maps to a usage error, everything else to a numerical one.
pub fn mass_shift_error(e: MassShiftError) -> CliError {
    match e {
        MassShiftError::InvalidCoupling(_)
        | MassShiftError::InvalidGrid
        | MassShiftError::MissingUniformPast
        | MassShiftError::Quadrature(QuadratureError::InvalidSpec(_)) => CliError::Usage(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    }
}

fn dynamics_error(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        DynamicsError::MassShift(m) => mass_shift_error(m),
        other => CliError::Numerical(other.to_string()),
    }
}

fn status(all_converged: bool) -> Status {
    if all_converged {
        Status::Ok
    } else {
        eprintln!("warning: some samples did not reach the requested tolerance");
        Status::NotConverged
    }
}

pub fn mu(args: &MuArgs) -> Result<Status, CliError> {
    let c = &args.common;
    let trajectory = traj::build(&c.trajectory)?;
    let spec = traj::spec(c)?;
    let grid = traj::grid(c)?;
    let series = match args.method {
        Method::Series => true,
        Method::Direct => false,
        Method::Auto => trajectory.uniform_before().is_some(),
    };
    let mut table = Table::new(&["tau", "mu", "mu_dot", "flux_plus", "flux_minus", "alpha", "err"]);
    let converged = if series {
        let s = mu_series(trajectory.as_ref(), c.a, &grid, &spec).map_err(mass_shift_error)?;
        for p in &s.samples {
            table.push(vec![p.tau, p.mu, p.mu_dot, p.flux_plus, p.flux_minus, p.alpha, p.err]);
        }
        s.converged()
    } else {
        let rows = grid
            .par_iter()
            .map(|&tau| {
                let d = mu_direct(trajectory.as_ref(), tau, c.a, &spec)?;
                let r = flux_pair(trajectory.as_ref(), tau, c.a, &spec)?;
                Ok((vec![tau, d.mu, r.mu_dot, r.flux_plus, r.flux_minus, r.alpha, d.error], d.converged && r.converged))
            })
            .collect::<Result<Vec<_>, MassShiftError>>()
            .map_err(mass_shift_error)?;
        let ok = rows.iter().all(|r| r.1);
        rows.into_iter().for_each(|r| table.push(r.0));
        ok
    };
    emit(&table, &Metadata::new("mu", c, trajectory.descriptor()), c)?;
    Ok(status(converged))
}

pub fn flux(c: &CommonArgs) -> Result<Status, CliError> {
    let trajectory = traj::build(&c.trajectory)?;
    let spec = traj::spec(c)?;
    let grid = traj::grid(c)?;
    let rates = grid
        .par_iter()
        .map(|&tau| flux_pair(trajectory.as_ref(), tau, c.a, &spec))
        .collect::<Result<Vec<_>, _>>()
        .map_err(mass_shift_error)?;
    let mut table = Table::new(&["tau", "mu_dot", "flux_plus", "flux_minus", "local", "alpha", "err"]);
    for r in &rates {
        table.push(vec![r.tau, r.mu_dot, r.flux_plus, r.flux_minus, r.local, r.alpha, r.error]);
    }
    emit(&table, &Metadata::new("flux", c, trajectory.descriptor()), c)?;
    Ok(status(rates.iter().all(|r| r.converged)))
}

/// Uniform motion at `--beta`: the closed form next to the numerical value
/// of the unrenormalized shift.
pub fn mu0(c: &CommonArgs) -> Result<Status, CliError> {
    let t = &c.trajectory;
    if t.traj.is_some() || !matches!(t.family, None | Some(Family::Uniform)) {
        return Err(CliError::Usage("mu0 is defined for uniform motion; use --beta".into()));
    }
    let spec = traj::spec(c)?;
    let u = Uniform::new(t.beta).map_err(|e| CliError::Usage(e.to_string()))?;
    let d = mu_direct(&u, c.tau_start, c.a, &spec).map_err(mass_shift_error)?;
    let mut table = Table::new(&["a", "beta", "mu0_closed", "mu0_numeric", "err"]);
    table.push(vec![c.a, t.beta, mu0_closed_form(c.a), d.raw, d.raw_error]);
    emit(&table, &Metadata::new("mu0", c, u.descriptor()), c)?;
    Ok(status(d.converged))
}

pub fn dynamics(args: &DynamicsArgs) -> Result<Status, CliError> {
    let c = &args.common;
    let initial = traj::build(&c.trajectory)?;
    let spec = traj::spec(c)?;
    if !(c.tau_start < c.tau_end) {
        return Err(CliError::Usage(format!("need tau-start < tau-end, got {} and {}", c.tau_start, c.tau_end)));
    }
    let config = DynamicsConfig {
        bare_mass: args.bare_mass,
        coupling: c.a,
        initial: initial.clone(),
        tau_start: c.tau_start,
        dtau: c.dtau,
        spec,
    };
    let run = evolve(&config, c.tau_end).map_err(dynamics_error)?;
    let mut table =
        Table::new(&["tau", "eta", "alpha", "mu", "m_total", "m_dot", "flux_plus", "flux_minus", "err"]);
    for s in &run.samples {
        table.push(vec![s.tau, s.eta, s.alpha, s.mu, s.m_total, s.m_dot, s.flux_plus, s.flux_minus, s.err]);
    }
    emit(&table, &Metadata::new("dynamics", c, initial.descriptor()), c)?;
    Ok(Status::Ok)
}
