//! Single-mode evolution from the in-vacuum.
//!
//! Three formulations of the same physics are carried side by side:
//!
//! * the real kinetic triple (S, U, V), the production path;
//! * the complex Bogoliubov pair (α, β);
//! * the second-order oscillator for the temporal mode function g̃.
//!
//! Each carries the phase Θ = ∫ μK₀ dη′ as an extra ODE component, so
//! e±² = exp(±2iΘ) never needs a separate quadrature.

use num_complex::Complex64;

use crate::background::{couplings, BackgroundModel, GeometryAtTime, Mode};
use crate::error::{Error, Result};
use crate::ode::{Dopri5, StepStats};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Sign in front of the rotation term of the V equation.
///
/// `Corrected` is the constraint-preserving system. `Flipped` carries the
/// opposite sign; it violates U² + V² = 4S(S+1) and exists to let the
/// verification suite demonstrate that its constraint check bites.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DvSign {
    #[default]
    Corrected,
    Flipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticState {
    /// Pair density |β|².
    pub s: f64,
    pub u: f64,
    pub v: f64,
    pub theta: f64,
    pub eta: f64,
}

impl KineticState {
    /// U² + V² − 4S(S+1); zero on the physical manifold.
    pub fn constraint_residual(&self) -> f64 {
        self.u * self.u + self.v * self.v - 4.0 * self.s * (self.s + 1.0)
    }

    /// Residual scaled by (1+S)².
    pub fn relative_constraint_residual(&self) -> f64 {
        self.constraint_residual().abs() / (1.0 + self.s).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovState {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub theta: f64,
    pub eta: f64,
}

impl BogoliubovState {
    pub fn vacuum(eta: f64) -> Self {
        Self {
            alpha: Complex64::new(1.0, 0.0),
            beta: Complex64::new(0.0, 0.0),
            theta: 0.0,
            eta,
        }
    }

    /// |α|² − |β|² − 1.
    pub fn normalization_defect(&self) -> f64 {
        self.alpha.norm_sqr() - self.beta.norm_sqr() - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorState {
    pub gt: Complex64,
    pub gt_dot: Complex64,
    pub theta: f64,
    pub eta: f64,
}

impl OscillatorState {
    /// g̃·conj(g̃′) − conj(g̃)·g̃′ (purely imaginary, conserved).
    pub fn wronskian(&self) -> Complex64 {
        self.gt * self.gt_dot.conj() - self.gt.conj() * self.gt_dot
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuvRates {
    pub ds: f64,
    pub du: f64,
    pub dv: f64,
    pub dtheta: f64,
}

pub fn vacuum_initial_state(eta0: f64) -> KineticState {
    KineticState {
        s: 0.0,
        u: 0.0,
        v: 0.0,
        theta: 0.0,
        eta: eta0,
    }
}

/// Right-hand side of the kinetic system:
///
/// ```text
/// S' = (𝒲/2)U + (𝒲̃/2)V
/// U' = 𝒲(2S+1) − (𝒲̃ + 2ω)V
/// V' = 𝒲̃(2S+1) + (𝒲̃ + 2ω)U
/// Θ' = ω,   ω = μK₀
/// ```
pub fn suv_rhs(state: &KineticState, geo: &GeometryAtTime) -> SuvRates {
    suv_rhs_with_sign(state, geo, DvSign::Corrected)
}

pub fn suv_rhs_with_sign(state: &KineticState, geo: &GeometryAtTime, sign: DvSign) -> SuvRates {
    let omega = geo.omega();
    let rot = geo.wt + 2.0 * omega;
    let source = 2.0 * state.s + 1.0;
    let dv_rot = match sign {
        DvSign::Corrected => rot * state.u,
        DvSign::Flipped => -rot * state.u,
    };
    SuvRates {
        ds: 0.5 * geo.w * state.u + 0.5 * geo.wt * state.v,
        du: geo.w * source - rot * state.v,
        dv: geo.wt * source + dv_rot,
        dtheta: omega,
    }
}

/// Right-hand side of the Bogoliubov pair, in the form
///
/// ```text
/// α'  = (𝒲/2 − i𝒲̃/2)·β*·e₊² − i(𝒲̃/2)·α
/// β*' = (𝒲/2 + i𝒲̃/2)·α·e₋² + i(𝒲̃/2)·β*
/// ```
///
/// Returns (α', β', Θ').
pub fn bogoliubov_rhs(
    state: &BogoliubovState,
    geo: &GeometryAtTime,
) -> (Complex64, Complex64, f64) {
    let e_plus2 = Complex64::from_polar(1.0, 2.0 * state.theta);
    let e_minus2 = e_plus2.conj();
    let half_w = 0.5 * geo.w;
    let half_wt = 0.5 * geo.wt;
    let beta_c = state.beta.conj();
    let d_alpha = (half_w - I * half_wt) * beta_c * e_plus2 - I * half_wt * state.alpha;
    let d_beta_c = (half_w + I * half_wt) * state.alpha * e_minus2 + I * half_wt * beta_c;
    (d_alpha, d_beta_c.conj(), geo.omega())
}

/// S = |β|², U + iV = 2·α·β*·e₋².
pub fn suv_from_bogoliubov(state: &BogoliubovState) -> KineticState {
    let z = 2.0 * state.alpha * state.beta.conj() * Complex64::from_polar(1.0, -2.0 * state.theta);
    KineticState {
        s: state.beta.norm_sqr(),
        u: z.re,
        v: z.im,
        theta: state.theta,
        eta: state.eta,
    }
}

/// S = |β|², U + iV = 2·α*·β*·e₊².
///
/// This is the interference product that the Bogoliubov pair actually
/// maps onto the kinetic system; [`suv_from_bogoliubov`] differs from it in
/// the phase of U + iV (S is identical).
pub fn suv_from_bogoliubov_conjugate(state: &BogoliubovState) -> KineticState {
    let z = 2.0
        * state.alpha.conj()
        * state.beta.conj()
        * Complex64::from_polar(1.0, 2.0 * state.theta);
    KineticState {
        s: state.beta.norm_sqr(),
        u: z.re,
        v: z.im,
        theta: state.theta,
        eta: state.eta,
    }
}

/// g̃″ = −(μ²K₀² + Q)·g̃ as a first-order pair. Returns (g̃′, g̃″, Θ′).
pub fn oscillator_rhs(
    state: &OscillatorState,
    geo: &GeometryAtTime,
) -> (Complex64, Complex64, f64) {
    let omega = geo.omega();
    let freq2 = omega * omega + geo.q;
    (state.gt_dot, -freq2 * state.gt, omega)
}

/// Lagrange ansatz: g̃ = ω^{-1/2}(α*e₊ + βe₋), g̃′ = iω^{1/2}(α*e₊ − βe₋).
pub fn oscillator_from_bogoliubov(
    state: &BogoliubovState,
    geo: &GeometryAtTime,
) -> OscillatorState {
    let omega = geo.omega();
    let e_plus = Complex64::from_polar(1.0, state.theta);
    let pos = state.alpha.conj() * e_plus;
    let neg = state.beta * e_plus.conj();
    OscillatorState {
        gt: (pos + neg) / omega.sqrt(),
        gt_dot: I * omega.sqrt() * (pos - neg),
        theta: state.theta,
        eta: state.eta,
    }
}

/// Inverts the ansatz: with A = ω^{1/2}g̃ and B = −ig̃′/ω^{1/2},
/// α*e₊ = (A+B)/2 and βe₋ = (A−B)/2.
pub fn bogoliubov_from_oscillator(
    state: &OscillatorState,
    geo: &GeometryAtTime,
) -> BogoliubovState {
    let root = geo.omega().sqrt();
    let a = root * state.gt;
    let b = -I * state.gt_dot / root;
    let e_plus = Complex64::from_polar(1.0, state.theta);
    let alpha_c_eplus = 0.5 * (a + b);
    let beta_eminus = 0.5 * (a - b);
    BogoliubovState {
        alpha: (alpha_c_eplus * e_plus.conj()).conj(),
        beta: beta_eminus * e_plus,
        theta: state.theta,
        eta: state.eta,
    }
}

/// Oscillator data corresponding to α = 1, β = 0, Θ = 0.
pub fn oscillator_vacuum_initial(geo0: &GeometryAtTime) -> OscillatorState {
    let root = geo0.omega().sqrt();
    OscillatorState {
        gt: Complex64::new(1.0 / root, 0.0),
        gt_dot: Complex64::new(0.0, root),
        theta: 0.0,
        eta: geo0.eta,
    }
}

/// Θ reduced to [0, 2π).
fn reduce_phase(theta: f64) -> f64 {
    theta.rem_euclid(std::f64::consts::TAU)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub tol: f64,
    pub sign: DvSign,
    pub max_steps: usize,
}

impl EvolveOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            sign: DvSign::Corrected,
            max_steps: 2_000_000,
        }
    }

    pub fn with_sign(mut self, sign: DvSign) -> Self {
        self.sign = sign;
        self
    }

    fn integrator(&self) -> Dopri5 {
        Dopri5 {
            max_steps: self.max_steps,
            ..Dopri5::new(self.tol)
        }
    }
}

/// States at the requested output times plus integrator statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<T>,
    pub stats: StepStats,
}

impl<T> Trajectory<T> {
    pub fn last(&self) -> Option<&T> {
        self.states.last()
    }
}

/// One mode of a field of mass `mass` on a fixed background.
#[derive(Debug, Clone, Copy)]
pub struct ModeProblem<'a> {
    pub model: &'a BackgroundModel,
    pub mode: Mode,
    pub mass: f64,
}

impl<'a> ModeProblem<'a> {
    pub fn new(model: &'a BackgroundModel, mode: Mode, mass: f64) -> Self {
        Self { model, mode, mass }
    }

    pub fn geometry(&self, eta: f64) -> Result<GeometryAtTime> {
        couplings(self.model, &self.mode, self.mass, eta)
    }

    fn check_window(eta0: f64, outputs: &[f64]) -> Result<()> {
        if outputs.is_empty() {
            return Err(Error::InvalidRequest("no output times requested".into()));
        }
        if outputs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidRequest("output times must be sorted".into()));
        }
        if outputs[0] < eta0 {
            return Err(Error::InvalidRequest(format!(
                "output time {} precedes the initial time {eta0}",
                outputs[0]
            )));
        }
        Ok(())
    }

    /// Integrates the kinetic triple from the vacuum at `eta0`.
    pub fn evolve_suv(
        &self,
        eta0: f64,
        outputs: &[f64],
        opts: &EvolveOptions,
    ) -> Result<Trajectory<KineticState>> {
        Self::check_window(eta0, outputs)?;
        let sign = opts.sign;
        let sol = opts.integrator().solve(
            |eta, y: &[f64; 4]| {
                let geo = self.geometry(eta)?;
                let st = KineticState {
                    s: y[0],
                    u: y[1],
                    v: y[2],
                    theta: y[3],
                    eta,
                };
                let r = suv_rhs_with_sign(&st, &geo, sign);
                Ok([r.ds, r.du, r.dv, r.dtheta])
            },
            eta0,
            [0.0; 4],
            outputs,
        )?;
        Ok(Trajectory {
            states: sol
                .outputs
                .iter()
                .map(|&(eta, y)| KineticState {
                    s: y[0],
                    u: y[1],
                    v: y[2],
                    theta: reduce_phase(y[3]),
                    eta,
                })
                .collect(),
            stats: sol.stats,
        })
    }

    /// Integrates the Bogoliubov pair from α = 1, β = 0 at `eta0`.
    pub fn evolve_bogoliubov(
        &self,
        eta0: f64,
        outputs: &[f64],
        opts: &EvolveOptions,
    ) -> Result<Trajectory<BogoliubovState>> {
        Self::check_window(eta0, outputs)?;
        let sol = opts.integrator().solve(
            |eta, y: &[f64; 5]| {
                let geo = self.geometry(eta)?;
                let st = BogoliubovState {
                    alpha: Complex64::new(y[0], y[1]),
                    beta: Complex64::new(y[2], y[3]),
                    theta: y[4],
                    eta,
                };
                let (da, db, dt) = bogoliubov_rhs(&st, &geo);
                Ok([da.re, da.im, db.re, db.im, dt])
            },
            eta0,
            [1.0, 0.0, 0.0, 0.0, 0.0],
            outputs,
        )?;
        Ok(Trajectory {
            states: sol
                .outputs
                .iter()
                .map(|&(eta, y)| BogoliubovState {
                    alpha: Complex64::new(y[0], y[1]),
                    beta: Complex64::new(y[2], y[3]),
                    theta: reduce_phase(y[4]),
                    eta,
                })
                .collect(),
            stats: sol.stats,
        })
    }

    /// Integrates the oscillator equation from the vacuum data at `eta0`.
    pub fn evolve_oscillator(
        &self,
        eta0: f64,
        outputs: &[f64],
        opts: &EvolveOptions,
    ) -> Result<Trajectory<OscillatorState>> {
        Self::check_window(eta0, outputs)?;
        let init = oscillator_vacuum_initial(&self.geometry(eta0)?);
        self.evolve_oscillator_from(init, outputs, opts)
    }

    pub fn evolve_oscillator_from(
        &self,
        init: OscillatorState,
        outputs: &[f64],
        opts: &EvolveOptions,
    ) -> Result<Trajectory<OscillatorState>> {
        Self::check_window(init.eta, outputs)?;
        let y0 = [
            init.gt.re,
            init.gt.im,
            init.gt_dot.re,
            init.gt_dot.im,
            init.theta,
        ];
        let sol = opts.integrator().solve(
            |eta, y: &[f64; 5]| {
                let geo = self.geometry(eta)?;
                let st = OscillatorState {
                    gt: Complex64::new(y[0], y[1]),
                    gt_dot: Complex64::new(y[2], y[3]),
                    theta: y[4],
                    eta,
                };
                let (dg, dgd, dt) = oscillator_rhs(&st, &geo);
                Ok([dg.re, dg.im, dgd.re, dgd.im, dt])
            },
            init.eta,
            y0,
            outputs,
        )?;
        Ok(Trajectory {
            states: sol
                .outputs
                .iter()
                .map(|&(eta, y)| OscillatorState {
                    gt: Complex64::new(y[0], y[1]),
                    gt_dot: Complex64::new(y[2], y[3]),
                    theta: reduce_phase(y[4]),
                    eta,
                })
                .collect(),
            stats: sol.stats,
        })
    }
}

/// Free-function form of [`ModeProblem::evolve_suv`].
pub fn evolve_suv(
    model: &BackgroundModel,
    mode: &Mode,
    mass: f64,
    eta0: f64,
    outputs: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory<KineticState>> {
    ModeProblem::new(model, *mode, mass).evolve_suv(eta0, outputs, opts)
}

/// Final kinetic states of one mode from the three formulations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeWay {
    /// Kinetic integrator.
    pub kinetic: KineticState,
    /// Bogoliubov pair mapped through [`suv_from_bogoliubov`].
    pub bogoliubov: KineticState,
    /// Bogoliubov pair mapped through [`suv_from_bogoliubov_conjugate`].
    pub bogoliubov_conjugate: KineticState,
    /// Oscillator, inverted through the ansatz, then [`suv_from_bogoliubov`].
    pub oscillator: KineticState,
    pub bogoliubov_defect: f64,
}

impl ThreeWay {
    pub fn s_disagreement(a: f64, b: f64) -> f64 {
        let diff = (a - b).abs();
        if a.abs().max(b.abs()) < 1e-10 {
            diff
        } else {
            diff / a.abs().max(b.abs())
        }
    }
}

/// Runs all three formulations of `problem` over [eta0, eta1].
pub fn three_way(
    problem: &ModeProblem<'_>,
    eta0: f64,
    eta1: f64,
    opts: &EvolveOptions,
) -> Result<ThreeWay> {
    let kinetic = *problem
        .evolve_suv(eta0, &[eta1], opts)?
        .last()
        .expect("one output");
    let bog = *problem
        .evolve_bogoliubov(eta0, &[eta1], opts)?
        .last()
        .expect("one output");
    let osc = *problem
        .evolve_oscillator(eta0, &[eta1], opts)?
        .last()
        .expect("one output");
    let geo1 = problem.geometry(eta1)?;
    Ok(ThreeWay {
        kinetic,
        bogoliubov: suv_from_bogoliubov(&bog),
        bogoliubov_conjugate: suv_from_bogoliubov_conjugate(&bog),
        oscillator: suv_from_bogoliubov(&bogoliubov_from_oscillator(&osc, &geo1)),
        bogoliubov_defect: bog.normalization_defect(),
    })
}
