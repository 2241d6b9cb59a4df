//! Vacuum-averaged, normally ordered energy-momentum tensor.
//!
//! Each diagonal component is
//!
//! ```text
//! T(η) = 1/((2π)³ a⁴(η)) ∫ d³k  μK₀ · F(S, U, V; geometry)
//! ```
//!
//! integrated on a hard momentum cutoff with a power-law tail estimate.
//! Every quadrature node is an independent mode evolution; one evolution
//! serves all requested output times.

pub mod quadrature;

use rayon::prelude::*;

use crate::background::{couplings, mean_scale, BackgroundModel, GeometryAtTime, Mode};
use crate::error::{Error, Result};
use crate::kinetics::{EvolveOptions, KineticState, ModeProblem};

pub use quadrature::{DirectionNode, MomentumGrid, RadialRule};

/// Which expansion-rate combination enters the pressure integrand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TiiVariant {
    /// (Cᵢ − Q)
    #[default]
    Printed,
    /// (Cᵢ² − Q)
    CSquared,
}

impl TiiVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Printed => "printed",
            Self::CSquared => "c_squared",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressEnergy {
    pub eta: f64,
    pub t00: f64,
    pub tii: [f64; 3],
    pub trace: f64,
    /// Estimated contribution of modes beyond the cutoff.
    pub tail_estimate: f64,
}

impl StressEnergy {
    fn components(&self) -> [f64; 5] {
        [self.t00, self.tii[0], self.tii[1], self.tii[2], self.trace]
    }
}

/// μK₀·( S − Q/(2μ²K₀²)·(S + U/2) ).
pub fn integrand_t00(state: &KineticState, geo: &GeometryAtTime) -> f64 {
    let omega = geo.omega();
    let x = state.s + 0.5 * state.u;
    omega * (state.s - geo.q / (2.0 * omega * omega) * x)
}

/// Pressure integrand along `axis` (0-based) with the `(Cᵢ − Q)` rate term.
pub fn integrand_tii(axis: usize, state: &KineticState, geo: &GeometryAtTime, mode: &Mode) -> f64 {
    integrand_tii_variant(axis, state, geo, mode, TiiVariant::Printed)
}

/// μK₀·( kᵢ²/(αᵢ²μ²K₀²)·(S+U/2) − U/6 + R/(6μ²K₀²)·(S+U/2) − CᵢV/(18μK₀) ),
/// with R = Cᵢ − Q or Cᵢ² − Q.
pub fn integrand_tii_variant(
    axis: usize,
    state: &KineticState,
    geo: &GeometryAtTime,
    mode: &Mode,
    variant: TiiVariant,
) -> f64 {
    let omega = geo.omega();
    let omega2 = omega * omega;
    let x = state.s + 0.5 * state.u;
    let ki = mode.k * mode.direction()[axis];
    let ci = geo.c[axis];
    let rate = match variant {
        TiiVariant::Printed => ci - geo.q,
        TiiVariant::CSquared => ci * ci - geo.q,
    };
    let alpha2 = geo.alpha[axis] * geo.alpha[axis];
    omega
        * (ki * ki / (alpha2 * omega2) * x - state.u / 6.0 + rate / (6.0 * omega2) * x
            - ci * state.v / (18.0 * omega))
}

/// μK₀·( m²g²/K₀²·(S + U/2) ).
pub fn integrand_trace(state: &KineticState, geo: &GeometryAtTime, m: f64) -> f64 {
    let x = state.s + 0.5 * state.u;
    geo.omega() * (m * m * geo.g * geo.g / (geo.k0 * geo.k0) * x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub tol_ode: f64,
    pub tol_quad: f64,
    /// Maximum number of grid doublings after the base grid.
    pub max_refine: u32,
    pub variant: TiiVariant,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            tol_ode: 1e-10,
            tol_quad: 1e-6,
            max_refine: 3,
            variant: TiiVariant::Printed,
        }
    }
}

/// Result of the refinement loop at one output time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorEstimate {
    pub stress: StressEnergy,
    pub previous: StressEnergy,
    /// max over components of |Δ|/max(|T|, 1e-30) between the last two levels.
    pub rel_change: f64,
    pub converged: bool,
    /// Number of doublings applied to the base grid.
    pub level: u32,
}

/// Floor that keeps the relative change defined for exactly vanishing components.
const REL_FLOOR: f64 = 1e-30;

/// Order-fixed pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// The tensor problem: a background, a field mass and an initial time.
#[derive(Debug, Clone, Copy)]
pub struct TensorProblem<'a> {
    pub model: &'a BackgroundModel,
    pub mass: f64,
    pub eta0: f64,
}

impl<'a> TensorProblem<'a> {
    pub fn new(model: &'a BackgroundModel, mass: f64, eta0: f64) -> Self {
        Self { model, mass, eta0 }
    }

    fn node_contributions(
        &self,
        k: f64,
        dir: [f64; 3],
        times: &[f64],
        settings: &QuadratureSettings,
    ) -> Result<Vec<[f64; 5]>> {
        let mode = Mode::from_direction(k, dir)?;
        let problem = ModeProblem::new(self.model, mode, self.mass);
        let traj = problem.evolve_suv(self.eta0, times, &EvolveOptions::new(settings.tol_ode))?;
        traj.states
            .iter()
            .map(|st| {
                let geo = couplings(self.model, &mode, self.mass, st.eta)?;
                Ok([
                    integrand_t00(st, &geo),
                    integrand_tii_variant(0, st, &geo, &mode, settings.variant),
                    integrand_tii_variant(1, st, &geo, &mode, settings.variant),
                    integrand_tii_variant(2, st, &geo, &mode, settings.variant),
                    integrand_trace(st, &geo, self.mass),
                ])
            })
            .collect()
    }

    /// Quadrature on a fixed grid (no refinement).
    pub fn evaluate_on_grid(
        &self,
        times: &[f64],
        grid: &MomentumGrid,
        settings: &QuadratureSettings,
    ) -> Result<Vec<StressEnergy>> {
        grid.validate()?;
        if times.is_empty() {
            return Err(Error::InvalidRequest("no output times requested".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times[0] < self.eta0 {
            return Err(Error::InvalidRequest(
                "output times must be sorted and not before eta0".into(),
            ));
        }
        let radial = grid.radial()?;
        let angular = grid.angular()?;
        let n_dir = angular.len();
        let n_nodes = radial.nodes.len() * n_dir;

        let per_node: Vec<Vec<[f64; 5]>> = (0..n_nodes)
            .into_par_iter()
            .map(|idx| {
                let (ik, id) = (idx / n_dir, idx % n_dir);
                let k = radial.nodes[ik];
                let node = angular[id];
                let weight = radial.weights[ik] * k * k * node.weight;
                let values = self.node_contributions(k, node.dir, times, settings)?;
                Ok(values.into_iter().map(|v| v.map(|x| weight * x)).collect())
            })
            .collect::<Result<_>>()?;

        let last = radial.last_panel();
        let last_nodes = last.start * n_dir..last.end * n_dir;
        let width = radial.panel_width();
        let mut out = Vec::with_capacity(times.len());
        let mut column = vec![0.0; n_nodes];
        for (it, &eta) in times.iter().enumerate() {
            let alpha = self.model.eval(eta)?.alpha;
            let a = mean_scale(alpha)?;
            let prefactor = 1.0 / ((2.0 * std::f64::consts::PI).powi(3) * a.powi(4));
            let mut totals = [0.0; 5];
            let mut tail = 0.0f64;
            for comp in 0..5 {
                for (dst, node) in column.iter_mut().zip(&per_node) {
                    *dst = node[it][comp];
                }
                totals[comp] = prefactor * pairwise_sum(&column);
                let last_panel = prefactor * pairwise_sum(&column[last_nodes.clone()]);
                let density = last_panel.abs() / width;
                tail = tail.max(density * grid.k_max / (grid.tail_exponent - 3.0));
            }
            out.push(StressEnergy {
                eta,
                t00: totals[0],
                tii: [totals[1], totals[2], totals[3]],
                trace: totals[4],
                tail_estimate: tail,
            });
        }
        Ok(out)
    }

    /// Doubles radial panels, θ nodes and φ nodes until two successive
    /// estimates agree to `tol_quad` (relative, per component) at every
    /// output time, or `max_refine` doublings have been spent.
    pub fn assemble_series(
        &self,
        times: &[f64],
        grid: &MomentumGrid,
        settings: &QuadratureSettings,
    ) -> Result<Vec<TensorEstimate>> {
        let mut previous = self.evaluate_on_grid(times, grid, settings)?;
        let mut level = 0;
        loop {
            level += 1;
            let current = self.evaluate_on_grid(times, &grid.refined(level), settings)?;
            let estimates: Vec<TensorEstimate> = current
                .iter()
                .zip(&previous)
                .map(|(cur, prev)| {
                    let rel_change = relative_change(cur, prev);
                    TensorEstimate {
                        stress: *cur,
                        previous: *prev,
                        rel_change,
                        converged: rel_change <= settings.tol_quad,
                        level,
                    }
                })
                .collect();
            if estimates.iter().all(|e| e.converged) || level >= settings.max_refine.max(1) {
                return Ok(estimates);
            }
            previous = current;
        }
    }

    /// Converged tensor at a single time; non-convergence is an error.
    pub fn assemble(
        &self,
        eta: f64,
        grid: &MomentumGrid,
        settings: &QuadratureSettings,
    ) -> Result<StressEnergy> {
        let est = self.assemble_series(&[eta], grid, settings)?[0];
        if est.converged {
            Ok(est.stress)
        } else {
            Err(Error::NonConvergence {
                depth: est.level as usize,
                eta,
                last: est.stress.t00,
                previous: est.previous.t00,
                rel_change: est.rel_change,
            })
        }
    }
}

fn relative_change(cur: &StressEnergy, prev: &StressEnergy) -> f64 {
    cur.components()
        .iter()
        .zip(prev.components())
        .map(|(c, p)| (c - p).abs() / c.abs().max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Free-function form of [`TensorProblem::assemble`].
pub fn assemble_stress_energy(
    model: &BackgroundModel,
    m: f64,
    eta: f64,
    eta0: f64,
    grid: &MomentumGrid,
    settings: &QuadratureSettings,
) -> Result<StressEnergy> {
    if eta < eta0 {
        return Err(Error::InvalidRequest(format!(
            "eta = {eta} precedes eta0 = {eta0}"
        )));
    }
    TensorProblem::new(model, m, eta0).assemble(eta, grid, settings)
}
