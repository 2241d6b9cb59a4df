use std::f64::consts::TAU;

use rayon::prelude::*;

use super::config::{RunConfig, SpectrumAngles};
use super::table::Table;
use crate::background::Mode;
use crate::error::{Error, Result};
use crate::kinetics::{DvSign, EvolveOptions, ModeProblem};
use crate::stress_tensor::quadrature::gauss_legendre;
use crate::stress_tensor::{QuadratureSettings, TensorProblem};

pub const MODES_COLUMNS: [&str; 6] = ["eta", "S", "U", "V", "Theta", "constraint_residual"];
pub const SPECTRUM_COLUMNS: [&str; 6] = ["k", "theta", "phi", "S_final", "U_final", "V_final"];
pub const TENSOR_COLUMNS: [&str; 9] = [
    "eta",
    "T00",
    "T11",
    "T22",
    "T33",
    "trace",
    "tail_estimate",
    "rel_change",
    "converged",
];

fn options(cfg: &RunConfig) -> EvolveOptions {
    let sign = if cfg.inject_dv_sign_flip {
        DvSign::Flipped
    } else {
        DvSign::Corrected
    };
    EvolveOptions::new(cfg.tol_ode).with_sign(sign)
}

/// Runs `f` on a pool of `cfg.threads` workers, or the global pool.
pub fn with_workers<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    match cfg.threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidRequest(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Trajectory of the configured mode at every output time.
pub fn cmd_modes(cfg: &RunConfig) -> Result<Table> {
    let mode = cfg.mode.ok_or_else(|| {
        Error::InvalidRequest("modes needs mode.k (and optionally mode.theta, mode.phi)".into())
    })?;
    let problem = ModeProblem::new(&cfg.model, mode, cfg.mass);
    let traj = problem.evolve_suv(cfg.eta0, &cfg.output_times, &options(cfg))?;
    let mut table = Table::new(&MODES_COLUMNS);
    for st in &traj.states {
        table.push(vec![
            st.eta,
            st.s,
            st.u,
            st.v,
            st.theta,
            st.constraint_residual(),
        ]);
    }
    Ok(table)
}

fn spectrum_modes(cfg: &RunConfig) -> Result<Vec<Mode>> {
    let spec = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| Error::InvalidRequest("spectrum needs a [spectrum] section".into()))?;
    let ks = spec.k_values();
    let angles: Vec<(f64, f64)> = match spec.angles {
        SpectrumAngles::Fixed { theta, phi } => vec![(theta, phi)],
        SpectrumAngles::Grid { n_theta, n_phi } => {
            let (x, _) = gauss_legendre(n_theta);
            x.iter()
                .flat_map(|&c| {
                    (0..n_phi)
                        .map(move |j| (c.clamp(-1.0, 1.0).acos(), TAU * j as f64 / n_phi as f64))
                })
                .collect()
        }
    };
    ks.iter()
        .flat_map(|&k| angles.iter().map(move |&(t, p)| Mode::new(k, t, p)))
        .collect()
}

/// Final S, U, V at η₁ over a mode grid.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Table> {
    let modes = spectrum_modes(cfg)?;
    let opts = options(cfg);
    let finals = with_workers(cfg, || {
        modes
            .par_iter()
            .map(|mode| {
                let problem = ModeProblem::new(&cfg.model, *mode, cfg.mass);
                let traj = problem.evolve_suv(cfg.eta0, &[cfg.eta1], &opts)?;
                Ok(*traj.last().expect("one output"))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut table = Table::new(&SPECTRUM_COLUMNS);
    for (mode, st) in modes.iter().zip(&finals) {
        table.push(vec![mode.k, mode.theta, mode.phi, st.s, st.u, st.v]);
    }
    Ok(table)
}

/// Assembled tensor at every output time. Rows that missed `tol.quad`
/// within `grid.max_refine` doublings carry `converged = 0`.
pub fn cmd_tensor(cfg: &RunConfig) -> Result<Table> {
    let grid = cfg.grid.ok_or_else(|| {
        Error::InvalidRequest("tensor needs a [grid] section with grid.kmax".into())
    })?;
    if cfg.inject_dv_sign_flip {
        return Err(Error::InvalidRequest(
            "verify.inject_dv_sign_flip only applies to the verify suite".into(),
        ));
    }
    let settings = QuadratureSettings {
        tol_ode: cfg.tol_ode,
        tol_quad: cfg.tol_quad,
        max_refine: cfg.max_refine,
        variant: cfg.tii_variant,
    };
    let problem = TensorProblem::new(&cfg.model, cfg.mass, cfg.eta0);
    let estimates = with_workers(cfg, || {
        problem.assemble_series(&cfg.output_times, &grid, &settings)
    })??;
    let mut table = Table::new(&TENSOR_COLUMNS);
    for e in &estimates {
        let s = &e.stress;
        table.push(vec![
            s.eta,
            s.t00,
            s.tii[0],
            s.tii[1],
            s.tii[2],
            s.trace,
            s.tail_estimate,
            e.rel_change,
            if e.converged { 1.0 } else { 0.0 },
        ]);
    }
    Ok(table)
}
