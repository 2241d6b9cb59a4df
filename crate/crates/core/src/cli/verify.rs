//! The verification suite behind `aniso-qft verify`.
//!
//! Runs on fixed catalog backgrounds. From the configuration it takes only
//! `tol.ode`, `tol.quad`, `threads` and the `verify.inject_dv_sign_flip` hook.
//! Informational checks are reported but never fail the run.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::commands::cmd_tensor;
use super::config::{OutputFormat, RunConfig};
use crate::background::{BackgroundModel, Mode};
use crate::error::Result;
use crate::kinetics::{three_way, DvSign, EvolveOptions, ModeProblem, ThreeWay};
use crate::stress_tensor::quadrature::integrate_phi;
use crate::stress_tensor::{MomentumGrid, QuadratureSettings, StressEnergy, TensorProblem};

/// Tolerance at which the three formulations are compared. The routes carry
/// independent integration errors, so they need a tighter tolerance than the
/// agreement they are asked to show.
pub const THREE_WAY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// False for informational entries.
    pub required: bool,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            required: true,
            passed: measured <= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    fn informational(mut self) -> Self {
        self.required = false;
        self
    }

    fn errored(name: &str, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.to_string(),
            required: true,
            passed: false,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: format!("error: {err}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn from_checks(checks: Vec<Check>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed || !c.required),
            checks,
        }
    }

    pub fn write<W: Write>(&self, format: OutputFormat, mut out: W) -> io::Result<()> {
        match format {
            OutputFormat::Json => {
                // NaN is not JSON; errored checks serialize `measured` as null.
                serde_json::to_writer_pretty(&mut out, self)?;
                out.write_all(b"\n")
            }
            OutputFormat::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(out);
                w.write_record([
                    "name",
                    "required",
                    "passed",
                    "measured",
                    "threshold",
                    "detail",
                ])?;
                for c in &self.checks {
                    w.write_record([
                        c.name.clone(),
                        c.required.to_string(),
                        c.passed.to_string(),
                        format!("{:.16e}", c.measured),
                        format!("{:.16e}", c.threshold),
                        c.detail.clone(),
                    ])?;
                }
                w.flush()
            }
        }
    }
}

fn catalog_anisotropic() -> BackgroundModel {
    BackgroundModel::tanh_step([2.0; 3], [0.5, -0.5, 0.0], 1.0).expect("valid model")
}

fn catalog_isotropic() -> BackgroundModel {
    BackgroundModel::tanh_step([2.0; 3], [0.5; 3], 1.0).expect("valid model")
}

fn catalog_static() -> BackgroundModel {
    BackgroundModel::static_model([1.0, 1.5, 0.7]).expect("valid model")
}

/// 20 log-spaced k in [0.1, 10] times five directions.
pub fn probe_modes() -> Vec<Mode> {
    let dirs = [
        (FRAC_PI_2, 0.0),
        (FRAC_PI_2, FRAC_PI_2),
        (0.0, 0.0),
        (FRAC_PI_3, FRAC_PI_4),
        (2.0 * FRAC_PI_3, 5.0 * FRAC_PI_4),
    ];
    (0..20)
        .flat_map(|i| {
            let k = 0.1 * 100f64.powf(i as f64 / 19.0);
            dirs.iter()
                .map(move |&(t, p)| Mode::new(k, t, p).expect("valid mode"))
        })
        .collect()
}

/// Worst |U²+V²−4S(S+1)|/(1+S)² over the probe modes and a set of times
/// in [−10, 10].
pub fn constraint_drift(tol_ode: f64, sign: DvSign) -> Result<f64> {
    let model = catalog_anisotropic();
    let times: Vec<f64> = (0..=8).map(|i| -10.0 + 2.5 * i as f64).collect();
    let opts = EvolveOptions::new(tol_ode).with_sign(sign);
    let worst = probe_modes()
        .par_iter()
        .map(|mode| {
            let traj = ModeProblem::new(&model, *mode, 1.0).evolve_suv(-10.0, &times, &opts)?;
            Ok(traj
                .states
                .iter()
                .map(|s| s.relative_constraint_residual())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Three-way comparison over the probe modes.
pub fn three_way_survey(tol: f64) -> Result<Vec<ThreeWay>> {
    let model = catalog_anisotropic();
    let opts = EvolveOptions::new(tol);
    probe_modes()
        .par_iter()
        .map(|mode| three_way(&ModeProblem::new(&model, *mode, 1.0), -10.0, 10.0, &opts))
        .collect()
}

/// U and V rotate with e^{2iΘ}, so phase error from the separate
/// integrations shows up in them well before it shows in S.
const UV_BOUND: f64 = 1e-4;

/// Disagreement in S scaled by its acceptance bound (1e-6 relative, or
/// 1e-12 absolute when S < 1e-10); at most 1 means agreement.
pub fn s_agreement_ratio(a: f64, b: f64) -> f64 {
    let d = ThreeWay::s_disagreement(a, b);
    if a.abs().max(b.abs()) < 1e-10 {
        d / 1e-12
    } else {
        d / 1e-6
    }
}

/// |U, V| disagreement relative to √(4S(S+1)) (the size of (U, V)).
fn uv_disagreement(a: &crate::kinetics::KineticState, b: &crate::kinetics::KineticState) -> f64 {
    let scale = (4.0 * a.s * (a.s + 1.0)).sqrt().max(1e-300);
    (a.u - b.u).hypot(a.v - b.v) / scale
}

/// Errors of the static-background oscillator against ω^{-1/2}e^{iω(η−η₀)},
/// paired with accepted step counts, one entry per tolerance.
pub fn oscillator_error_study(tols: &[f64]) -> Result<Vec<(f64, usize, f64)>> {
    let model = BackgroundModel::static_model([1.0; 3])?;
    let mode = Mode::new(3.0, 0.0, 0.0)?;
    let problem = ModeProblem::new(&model, mode, 4.0);
    let omega = problem.geometry(0.0)?.omega();
    let span = 40.0;
    let exact = Complex64::from_polar(omega.powf(-0.5), omega * span);
    tols.iter()
        .map(|&tol| {
            let traj = problem.evolve_oscillator(0.0, &[span], &EvolveOptions::new(tol))?;
            let st = traj.last().expect("one output");
            Ok((tol, traj.stats.accepted, (st.gt - exact).norm()))
        })
        .collect()
}

/// Least-squares slope of ln(error) against ln(1/steps).
pub fn convergence_order(study: &[(f64, usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = study
        .iter()
        .map(|&(_, n, e)| (-(n as f64).ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Worst φ-rule residual on trigonometric polynomials it must integrate exactly.
pub fn phi_exactness_residual() -> f64 {
    type Case = (usize, fn(f64, f64) -> f64, f64);
    let cases: [Case; 6] = [
        (4, |_, _| 1.0, 2.0 * PI),
        (4, |c, _| c * c, PI),
        (8, |c, s| c * c * s * s, PI / 4.0),
        (8, |c, _| c.powi(4), 0.75 * PI),
        (12, |c, s| c * s.powi(3), 0.0),
        (16, |c, s| (c * c - s * s).powi(2) + c, PI),
    ];
    cases
        .iter()
        .map(|&(n, f, exact)| (integrate_phi(n, f) - exact).abs())
        .fold(0.0, f64::max)
}

fn max_abs(values: &[StressEnergy]) -> f64 {
    values
        .iter()
        .flat_map(|s| [s.t00, s.tii[0], s.tii[1], s.tii[2], s.trace])
        .fold(0.0, |m, x| m.max(x.abs()))
}

fn vacuum_triviality(tol_ode: f64) -> Result<(f64, f64)> {
    let model = catalog_static();
    let times = [0.5, 1.0, 3.0];
    let opts = EvolveOptions::new(tol_ode);
    let mut worst_mode = 0.0f64;
    for mode in probe_modes().iter().step_by(7) {
        for st in ModeProblem::new(&model, *mode, 0.5)
            .evolve_suv(0.0, &times, &opts)?
            .states
        {
            worst_mode = worst_mode.max(st.s.abs()).max(st.u.abs()).max(st.v.abs());
        }
    }
    let grid = MomentumGrid::new(3.0, 2, 4, 2, 4, 6.0)?;
    let settings = QuadratureSettings {
        tol_ode,
        ..Default::default()
    };
    let tensor = TensorProblem::new(&model, 0.5, 0.0).evaluate_on_grid(&times, &grid, &settings)?;
    Ok((worst_mode, max_abs(&tensor)))
}

fn conformal_trace(tol_ode: f64) -> Result<f64> {
    let model = catalog_anisotropic();
    let grid = MomentumGrid::new(4.0, 2, 6, 4, 4, 6.0)?;
    let settings = QuadratureSettings {
        tol_ode,
        ..Default::default()
    };
    let values =
        TensorProblem::new(&model, 0.0, -4.0).evaluate_on_grid(&[-2.0, 0.0], &grid, &settings)?;
    Ok(values
        .iter()
        .map(|s| s.trace.abs() / s.t00.abs().max(1e-30))
        .fold(0.0, f64::max))
}

fn isotropic_pressures(tol_ode: f64, tol_quad: f64) -> Result<(f64, bool)> {
    let model = catalog_isotropic();
    let grid = MomentumGrid::new(4.0, 2, 8, 4, 4, 6.0)?;
    let settings = QuadratureSettings {
        tol_ode,
        tol_quad,
        max_refine: 2,
        ..Default::default()
    };
    let est =
        TensorProblem::new(&model, 1.0, -4.0).assemble_series(&[0.0, 2.0], &grid, &settings)?;
    let worst = est
        .iter()
        .map(|e| {
            let p = e.stress.tii;
            (p[0] - p[1]).abs().max((p[1] - p[2]).abs()) / p[0].abs()
        })
        .fold(0.0, f64::max);
    Ok((worst, est.iter().all(|e| e.converged)))
}

/// Worst relative mismatch between permuted-background pressures and the
/// permuted pressures of the original background.
pub fn permutation_mismatch(tol_ode: f64) -> Result<f64> {
    let model = catalog_anisotropic();
    let grid = MomentumGrid::new(3.0, 2, 6, 4, 4, 6.0)?;
    let settings = QuadratureSettings {
        tol_ode,
        ..Default::default()
    };
    let times = [-1.0, 1.0];
    let base = TensorProblem::new(&model, 1.0, -4.0).evaluate_on_grid(&times, &grid, &settings)?;
    let mut worst = 0.0f64;
    for perm in [[1, 2, 0], [0, 2, 1]] {
        let permuted = model.permuted(perm);
        let run =
            TensorProblem::new(&permuted, 1.0, -4.0).evaluate_on_grid(&times, &grid, &settings)?;
        for (p, b) in run.iter().zip(&base) {
            for (got, &src) in p.tii.iter().zip(&perm) {
                let want = b.tii[src];
                worst = worst.max((got - want).abs() / want.abs().max(1e-300));
            }
            worst = worst.max((p.t00 - b.t00).abs() / b.t00.abs().max(1e-300));
        }
    }
    Ok(worst)
}

/// Worst relative change under one doubling of the base grid, on the
/// anisotropic massive background.
pub fn quadrature_refinement(tol_ode: f64, tol_quad: f64) -> Result<(f64, u32)> {
    let model = catalog_anisotropic();
    let grid = MomentumGrid::new(4.0, 2, 12, 16, 16, 6.0)?;
    let settings = QuadratureSettings {
        tol_ode,
        tol_quad,
        max_refine: 1,
        ..Default::default()
    };
    let est = TensorProblem::new(&model, 1.0, -4.0).assemble_series(&[0.0], &grid, &settings)?;
    Ok((est[0].rel_change, est[0].level))
}

fn determinism(cfg: &RunConfig) -> Result<bool> {
    let run = |threads| {
        let mut c = cfg.clone();
        c.model = catalog_anisotropic();
        c.mass = 1.0;
        c.eta0 = -4.0;
        c.eta1 = 0.0;
        c.output_times = vec![-2.0, 0.0];
        c.grid = Some(MomentumGrid::new(3.0, 2, 4, 2, 4, 6.0)?);
        c.max_refine = 1;
        c.threads = Some(threads);
        c.inject_dv_sign_flip = false;
        Ok::<_, crate::Error>(cmd_tensor(&c)?.to_string(OutputFormat::Csv))
    };
    Ok(run(1)? == run(3)?)
}

fn record<T>(
    checks: &mut Vec<Check>,
    name: &str,
    result: Result<T>,
    make: impl FnOnce(T) -> Vec<Check>,
) {
    match result {
        Ok(v) => checks.extend(make(v)),
        Err(e) => checks.push(Check::errored(name, e)),
    }
}

/// Runs the whole suite.
pub fn cmd_verify(cfg: &RunConfig) -> VerifyReport {
    let mut checks = Vec::new();
    let sign = if cfg.inject_dv_sign_flip {
        DvSign::Flipped
    } else {
        DvSign::Corrected
    };
    let (tol_ode, tol_quad) = (cfg.tol_ode, cfg.tol_quad);

    record(
        &mut checks,
        "constraint_drift",
        constraint_drift(tol_ode, sign),
        |r| {
            vec![Check::new(
            "constraint_drift",
            r,
            1e-8,
            format!("max |U²+V²−4S(S+1)|/(1+S)² over 100 anisotropic modes, η∈[−10,10], dV sign {sign:?}"),
        )]
        },
    );

    record(
        &mut checks,
        "three_way_oscillator",
        three_way_survey(THREE_WAY_TOL),
        |tw| {
            let worst = |f: &dyn Fn(&ThreeWay) -> f64| tw.iter().map(f).fold(0.0, f64::max);
            let osc = worst(&|t| s_agreement_ratio(t.kinetic.s, t.oscillator.s));
            let pair_s = worst(&|t| s_agreement_ratio(t.kinetic.s, t.bogoliubov.s));
            let defect = worst(&|t| t.bogoliubov_defect);
            let direct_uv = worst(&|t| uv_disagreement(&t.kinetic, &t.bogoliubov));
            let conj_uv = worst(&|t| uv_disagreement(&t.kinetic, &t.bogoliubov_conjugate));
            vec![
            Check::new(
                "three_way_oscillator",
                osc,
                1.0,
                format!("S from kinetic vs oscillator routes, disagreement / bound, tol_ode {THREE_WAY_TOL:e}"),
            ),
            Check::new(
                "bogoliubov_normalization",
                defect,
                1e-8,
                "max ||α|²−|β|²−1| along the Bogoliubov pair route",
            ),
            Check::new(
                "pair_route_s",
                pair_s,
                1.0,
                "S from the Bogoliubov pair route vs kinetic route (informational)",
            )
            .informational(),
            Check::new(
                "uv_direct_map",
                direct_uv,
                UV_BOUND,
                "U, V from the αβ*e₋² interference map vs kinetic route; expected to disagree (informational)",
            )
            .informational(),
            Check::new(
                "uv_conjugate_map",
                conj_uv,
                UV_BOUND,
                "U, V from the α*β* interference term vs kinetic route (informational)",
            )
            .informational(),
        ]
        },
    );

    record(
        &mut checks,
        "vacuum_triviality",
        vacuum_triviality(tol_ode),
        |(m, t)| {
            vec![
                Check::new(
                    "vacuum_modes",
                    m,
                    1e-12,
                    "max |S|, |U|, |V| on a static background",
                ),
                Check::new(
                    "vacuum_tensor",
                    t,
                    1e-12,
                    "max tensor component on a static background",
                ),
            ]
        },
    );

    record(
        &mut checks,
        "conformal_trace",
        conformal_trace(tol_ode),
        |r| {
            vec![Check::new(
                "conformal_trace",
                r,
                tol_quad,
                "|trace| / max(|T00|, 1e-30) for a massless field, anisotropic background",
            )]
        },
    );

    record(
        &mut checks,
        "isotropic_pressures",
        isotropic_pressures(tol_ode, tol_quad),
        |(r, conv)| {
            vec![Check::new(
                "isotropic_pressures",
                if conv { r } else { f64::INFINITY },
                tol_quad,
                format!(
                    "max pressure spread / |T11| on an isotropic background (converged: {conv})"
                ),
            )]
        },
    );

    record(
        &mut checks,
        "permutation_equivariance",
        permutation_mismatch(tol_ode),
        |r| {
            vec![Check::new(
                "permutation_equivariance",
                r,
                1e-10,
                "pressures under background axis permutations",
            )]
        },
    );

    let tols = [1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12];
    record(
        &mut checks,
        "integrator_order",
        oscillator_error_study(&tols),
        |study| {
            let order = convergence_order(&study);
            let mut c = Check::new(
                "integrator_order",
                (order - 5.0).abs(),
                0.5,
                format!(
                    "fitted order {order:.3} on the constant-frequency oscillator, tol 1e-6..1e-12"
                ),
            );
            c.measured = order;
            c.passed = (order - 5.0).abs() <= 0.5;
            vec![c]
        },
    );

    checks.push(Check::new(
        "phi_exactness",
        phi_exactness_residual(),
        1e-14,
        "φ rule on trigonometric polynomials",
    ));

    record(
        &mut checks,
        "quadrature_convergence",
        quadrature_refinement(tol_ode, tol_quad),
        |(r, _)| {
            vec![Check::new(
                "quadrature_convergence",
                r,
                tol_quad,
                "relative change of every tensor component under one grid doubling",
            )]
        },
    );

    record(&mut checks, "determinism", determinism(cfg), |same| {
        vec![Check::new(
            "determinism",
            if same { 0.0 } else { 1.0 },
            0.0,
            "tensor CSV bytes with 1 and 3 workers",
        )]
    });

    VerifyReport::from_checks(checks)
}
