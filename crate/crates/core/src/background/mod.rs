//! Bianchi I backgrounds: three scale factors αᵢ(η) and the geometric
//! quantities built from them for a single mode direction.
//!
//! All sums over the three axes are formed in sorted order so that jointly
//! permuting the axes of a model and the components of a direction leaves
//! every derived quantity bit-for-bit unchanged.

mod spline;

pub use spline::CubicSpline;

use crate::error::{Error, Result};

/// Scale-factor model catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundModel {
    /// αᵢ = cᵢ.
    Static {
        c: [f64; 3],
    },
    /// αᵢ = (η/η_ref)^qᵢ.
    PowerLaw {
        q: [f64; 3],
        eta_ref: f64,
    },
    /// αᵢ = exp(λᵢ η).
    Exponential {
        lambda: [f64; 3],
    },
    /// αᵢ = Aᵢ + Bᵢ tanh(ρη).
    TanhStep {
        a: [f64; 3],
        b: [f64; 3],
        rho: f64,
    },
    Tabulated(TabulatedModel),
}

/// Sampled scale factors interpolated by not-a-knot cubic splines.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedModel {
    splines: [CubicSpline; 3],
}

impl TabulatedModel {
    pub fn new(eta: &[f64], alpha: [&[f64]; 3]) -> Result<Self> {
        for (axis, values) in alpha.iter().enumerate() {
            if let Some(v) = values.iter().find(|v| **v <= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "tabulated alpha{} has non-positive sample {v}",
                    axis + 1
                )));
            }
        }
        Ok(Self {
            splines: [
                CubicSpline::not_a_knot(eta, alpha[0])?,
                CubicSpline::not_a_knot(eta, alpha[1])?,
                CubicSpline::not_a_knot(eta, alpha[2])?,
            ],
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.splines[0].domain()
    }

    pub fn knots(&self) -> &[f64] {
        self.splines[0].knots()
    }
}

/// Scale factors and their η-derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFactors {
    pub alpha: [f64; 3],
    pub alpha_dot: [f64; 3],
}

impl BackgroundModel {
    pub fn static_model(c: [f64; 3]) -> Result<Self> {
        if c.iter().any(|&ci| !(ci > 0.0 && ci.is_finite())) {
            return Err(Error::InvalidModel(format!(
                "static scale factors must be positive, got {c:?}"
            )));
        }
        Ok(Self::Static { c })
    }

    pub fn power_law(q: [f64; 3], eta_ref: f64) -> Result<Self> {
        if eta_ref == 0.0 || !eta_ref.is_finite() || q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(
                "power law needs finite exponents and a non-zero reference eta".into(),
            ));
        }
        Ok(Self::PowerLaw { q, eta_ref })
    }

    pub fn exponential(lambda: [f64; 3]) -> Result<Self> {
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite exponential rate".into()));
        }
        Ok(Self::Exponential { lambda })
    }

    pub fn tanh_step(a: [f64; 3], b: [f64; 3], rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "tanh steepness must be positive, got {rho}"
            )));
        }
        for i in 0..3 {
            if !(a[i].is_finite() && b[i].is_finite() && a[i] > b[i].abs()) {
                return Err(Error::InvalidModel(format!(
                    "tanh step needs A{0} > |B{0}|, got A{0}={1}, B{0}={2}",
                    i + 1,
                    a[i],
                    b[i]
                )));
            }
        }
        Ok(Self::TanhStep { a, b, rho })
    }

    pub fn tabulated(eta: &[f64], alpha: [&[f64]; 3]) -> Result<Self> {
        TabulatedModel::new(eta, alpha).map(Self::Tabulated)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Static { .. } => "static",
            Self::PowerLaw { .. } => "power_law",
            Self::Exponential { .. } => "exponential",
            Self::TanhStep { .. } => "tanh_step",
            Self::Tabulated(_) => "tabulated",
        }
    }

    /// True when the three scale factors coincide at every η by construction.
    pub fn is_isotropic(&self) -> bool {
        let same = |v: &[f64; 3]| v[0] == v[1] && v[1] == v[2];
        match self {
            Self::Static { c } => same(c),
            Self::PowerLaw { q, .. } => same(q),
            Self::Exponential { lambda } => same(lambda),
            Self::TanhStep { a, b, .. } => same(a) && same(b),
            Self::Tabulated(t) => t.splines[0] == t.splines[1] && t.splines[1] == t.splines[2],
        }
    }

    /// Relabels the axes: axis `i` of the result is axis `perm[i]` of `self`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let p = |v: &[f64; 3]| [v[perm[0]], v[perm[1]], v[perm[2]]];
        match self {
            Self::Static { c } => Self::Static { c: p(c) },
            Self::PowerLaw { q, eta_ref } => Self::PowerLaw {
                q: p(q),
                eta_ref: *eta_ref,
            },
            Self::Exponential { lambda } => Self::Exponential { lambda: p(lambda) },
            Self::TanhStep { a, b, rho } => Self::TanhStep {
                a: p(a),
                b: p(b),
                rho: *rho,
            },
            Self::Tabulated(t) => Self::Tabulated(TabulatedModel {
                splines: [
                    t.splines[perm[0]].clone(),
                    t.splines[perm[1]].clone(),
                    t.splines[perm[2]].clone(),
                ],
            }),
        }
    }

    /// αᵢ(η) and analytic α̇ᵢ(η).
    pub fn eval(&self, eta: f64) -> Result<ScaleFactors> {
        let mut alpha = [0.0; 3];
        let mut alpha_dot = [0.0; 3];
        match self {
            Self::Static { c } => alpha = *c,
            Self::PowerLaw { q, eta_ref } => {
                let x = eta / eta_ref;
                if x <= 0.0 {
                    return Err(Error::domain(
                        "power-law scale factor needs eta/eta_ref > 0",
                        eta,
                    ));
                }
                for i in 0..3 {
                    alpha[i] = x.powf(q[i]);
                    alpha_dot[i] = q[i] * alpha[i] / eta;
                }
            }
            Self::Exponential { lambda } => {
                for i in 0..3 {
                    alpha[i] = (lambda[i] * eta).exp();
                    alpha_dot[i] = lambda[i] * alpha[i];
                }
            }
            Self::TanhStep { a, b, rho } => {
                let th = (rho * eta).tanh();
                let sech2 = 1.0 - th * th;
                for i in 0..3 {
                    alpha[i] = a[i] + b[i] * th;
                    alpha_dot[i] = b[i] * rho * sech2;
                }
            }
            Self::Tabulated(t) => {
                for i in 0..3 {
                    (alpha[i], alpha_dot[i]) = t.splines[i].eval(eta)?;
                }
            }
        }
        if let Some(i) = (0..3).find(|&i| !(alpha[i] > 0.0) || !alpha[i].is_finite()) {
            return Err(Error::domain(
                format!("scale factor alpha{} not positive at eta = {eta}", i + 1),
                alpha[i],
            ));
        }
        Ok(ScaleFactors { alpha, alpha_dot })
    }
}

/// Free-function form of [`BackgroundModel::eval`].
pub fn eval_scale_factors(model: &BackgroundModel, eta: f64) -> Result<ScaleFactors> {
    model.eval(eta)
}

/// A comoving wavevector k⃗ = k·n̂ in spherical form.
///
/// The unit vector is stored alongside the angles; modes built from a
/// direction keep that direction exactly (no trigonometric round trip).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: f64,
    pub theta: f64,
    pub phi: f64,
    dir: [f64; 3],
}

impl Mode {
    pub fn new(k: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidMode(format!("k must be >= 0, got {k}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidMode(format!(
                "theta must be in [0, pi], got {theta}"
            )));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::InvalidMode(format!(
                "phi must be in [0, 2pi), got {phi}"
            )));
        }
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Ok(Self {
            k,
            theta,
            phi,
            dir: [st * cp, st * sp, ct],
        })
    }

    /// Builds a mode from a unit direction vector, kept verbatim.
    pub fn from_direction(k: f64, dir: [f64; 3]) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidMode(format!("k must be >= 0, got {k}")));
        }
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMode(format!(
                "direction must be a unit vector, |n| = {norm}"
            )));
        }
        let theta = dir[2].clamp(-1.0, 1.0).acos();
        let phi = dir[1].atan2(dir[0]).rem_euclid(std::f64::consts::TAU);
        Ok(Self { k, theta, phi, dir })
    }

    pub fn direction(&self) -> [f64; 3] {
        self.dir
    }

    /// Cartesian k⃗.
    pub fn wavevector(&self) -> [f64; 3] {
        self.dir.map(|n| self.k * n)
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..*self }
    }

    /// Same k with the direction components relabelled like
    /// [`BackgroundModel::permuted`].
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let d = self.dir;
        Self::from_direction(self.k, [d[perm[0]], d[perm[1]], d[perm[2]]])
            .expect("permutation preserves the norm")
    }
}

pub(crate) fn sum3(mut v: [f64; 3]) -> f64 {
    v.sort_by(f64::total_cmp);
    (v[0] + v[1]) + v[2]
}

fn check_positive(alpha: &[f64; 3]) -> Result<()> {
    match alpha.iter().position(|&a| !(a > 0.0)) {
        Some(i) => Err(Error::domain(
            format!("scale factor alpha{} must be positive", i + 1),
            alpha[i],
        )),
        None => Ok(()),
    }
}

/// Geometric mean a = (α₁α₂α₃)^{1/3}.
pub fn mean_scale(alpha: [f64; 3]) -> Result<f64> {
    check_positive(&alpha)?;
    let mut s = alpha;
    s.sort_by(f64::total_cmp);
    Ok((s[0] * s[1] * s[2]).cbrt())
}

/// Cᵢ = α̇ᵢ/αᵢ.
pub fn expansion_rates(alpha: [f64; 3], alpha_dot: [f64; 3]) -> Result<[f64; 3]> {
    check_positive(&alpha)?;
    Ok([
        alpha_dot[0] / alpha[0],
        alpha_dot[1] / alpha[1],
        alpha_dot[2] / alpha[2],
    ])
}

/// Q = (C₁−C₂)² + (C₂−C₃)² + (C₁−C₃)².
pub fn anisotropy_q(c: [f64; 3]) -> f64 {
    let mut s = c;
    s.sort_by(f64::total_cmp);
    // After sorting, the differences are taken in a fixed order, so the
    // result does not depend on how the axes were labelled.
    let d01 = s[1] - s[0];
    let d12 = s[2] - s[1];
    let d02 = s[2] - s[0];
    sum3([d01 * d01, d12 * d12, d02 * d02])
}

/// μ for a unit direction n̂: μ² = Σ nᵢ²/αᵢ².
pub fn inverse_scale(alpha: [f64; 3], dir: [f64; 3]) -> f64 {
    sum3([
        (dir[0] / alpha[0]).powi(2),
        (dir[1] / alpha[1]).powi(2),
        (dir[2] / alpha[2]).powi(2),
    ])
    .sqrt()
}

/// μ(θ, φ) = sqrt(sin²θcos²φ/α₁² + sin²θsin²φ/α₂² + cos²θ/α₃²).
pub fn direction_mass_mu(alpha: [f64; 3], theta: f64, phi: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    inverse_scale(alpha, [st * cp, st * sp, ct])
}

/// K₀ = sqrt(k² + m²g²).
pub fn effective_frequency_k0(k: f64, m: f64, g: f64) -> Result<f64> {
    if k < 0.0 || m < 0.0 {
        return Err(Error::domain("k and m must be non-negative", k.min(m)));
    }
    if k == 0.0 && m == 0.0 {
        return Err(Error::domain(
            "zero mode of a massless field has no frequency",
            0.0,
        ));
    }
    Ok(k.hypot(m * g))
}

/// Every per-mode geometric quantity at one η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryAtTime {
    pub eta: f64,
    pub k: f64,
    pub alpha: [f64; 3],
    pub alpha_dot: [f64; 3],
    /// Mean scale factor and its derivative.
    pub a: f64,
    pub a_dot: f64,
    pub mu: f64,
    pub mu_dot: f64,
    pub k0: f64,
    pub k0_dot: f64,
    /// g = a/μ.
    pub g: f64,
    pub c: [f64; 3],
    pub q: f64,
    /// 𝒲 = μ̇/μ + K̇₀/K₀.
    pub w: f64,
    /// 𝒲̃ = Q/(μK₀).
    pub wt: f64,
}

impl GeometryAtTime {
    /// The adiabatic mode frequency μK₀.
    pub fn omega(&self) -> f64 {
        self.mu * self.k0
    }
}

/// Evaluates the full geometry for `mode` of a field of mass `m` at `eta`.
/// Time derivatives come from the chain rule on α̇ᵢ.
pub fn couplings(model: &BackgroundModel, mode: &Mode, m: f64, eta: f64) -> Result<GeometryAtTime> {
    let ScaleFactors { alpha, alpha_dot } = model.eval(eta)?;
    geometry_from_scale_factors(alpha, alpha_dot, mode, m, eta)
}

pub fn geometry_from_scale_factors(
    alpha: [f64; 3],
    alpha_dot: [f64; 3],
    mode: &Mode,
    m: f64,
    eta: f64,
) -> Result<GeometryAtTime> {
    if !(m >= 0.0) {
        return Err(Error::domain("mass must be non-negative", m));
    }
    let c = expansion_rates(alpha, alpha_dot)?;
    let a = mean_scale(alpha)?;
    let a_dot = a * sum3(c) / 3.0;
    let n = mode.direction();
    let mu = inverse_scale(alpha, n);
    // d(μ²)/dη = −2 Σ nᵢ² α̇ᵢ/αᵢ³
    let mu_dot = -sum3([
        n[0] * n[0] * c[0] / (alpha[0] * alpha[0]),
        n[1] * n[1] * c[1] / (alpha[1] * alpha[1]),
        n[2] * n[2] * c[2] / (alpha[2] * alpha[2]),
    ]) / mu;
    let g = a / mu;
    let g_dot = g * (a_dot / a - mu_dot / mu);
    let k0 = effective_frequency_k0(mode.k, m, g)?;
    let k0_dot = m * m * g * g_dot / k0;
    let q = anisotropy_q(c);
    Ok(GeometryAtTime {
        eta,
        k: mode.k,
        alpha,
        alpha_dot,
        a,
        a_dot,
        mu,
        mu_dot,
        k0,
        k0_dot,
        g,
        c,
        q,
        w: mu_dot / mu + k0_dot / k0,
        wt: q / (mu * k0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn catalog() -> Vec<(BackgroundModel, f64)> {
        let eta: Vec<f64> = (0..=40).map(|i| -4.0 + 0.2 * i as f64).collect();
        let a1: Vec<f64> = eta.iter().map(|t| 2.0 + 0.3 * (0.7 * t).sin()).collect();
        let a2: Vec<f64> = eta.iter().map(|t| 1.5 + 0.1 * t).collect();
        let a3: Vec<f64> = eta.iter().map(|t| (0.05 * t).exp()).collect();
        vec![
            (BackgroundModel::static_model([1.0, 2.0, 3.0]).unwrap(), 0.3),
            (
                BackgroundModel::power_law([0.5, 1.0, -0.3], 2.0).unwrap(),
                1.7,
            ),
            (
                BackgroundModel::exponential([0.1, -0.2, 0.3]).unwrap(),
                -0.8,
            ),
            (
                BackgroundModel::tanh_step([2.0, 2.0, 2.0], [0.5, -0.5, 0.0], 1.0).unwrap(),
                0.4,
            ),
            (
                BackgroundModel::tabulated(&eta, [&a1, &a2, &a3]).unwrap(),
                0.9,
            ),
        ]
    }

    #[test]
    fn scale_factor_examples() {
        let s = BackgroundModel::static_model([2.0; 3])
            .unwrap()
            .eval(5.0)
            .unwrap();
        assert_eq!(s.alpha, [2.0; 3]);
        assert_eq!(s.alpha_dot, [0.0; 3]);

        let e = BackgroundModel::exponential([0.1, 0.2, 0.3])
            .unwrap()
            .eval(0.0)
            .unwrap();
        assert_eq!(e.alpha, [1.0; 3]);
        assert_eq!(e.alpha_dot, [0.1, 0.2, 0.3]);

        let t = BackgroundModel::tanh_step([2.0; 3], [1.0; 3], 1.0)
            .unwrap()
            .eval(0.0)
            .unwrap();
        assert_eq!(t.alpha, [2.0; 3]);
        assert_eq!(t.alpha_dot, [1.0; 3]);
    }

    #[test]
    fn scale_factor_errors() {
        let p = BackgroundModel::power_law([0.5; 3], 1.0).unwrap();
        assert!(matches!(p.eval(0.0), Err(Error::Domain { .. })));
        assert!(matches!(p.eval(-1.0), Err(Error::Domain { .. })));
        let (tab, _) = catalog().pop().unwrap();
        assert!(matches!(tab.eval(4.5), Err(Error::Range { .. })));
        assert!(BackgroundModel::tanh_step([1.0; 3], [1.0; 3], 1.0).is_err());
        assert!(BackgroundModel::static_model([1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        for (model, eta) in catalog() {
            let h = 1e-5 * (1.0 + eta.abs());
            let s = model.eval(eta).unwrap();
            let p = model.eval(eta + h).unwrap();
            let m = model.eval(eta - h).unwrap();
            for i in 0..3 {
                let fd = (p.alpha[i] - m.alpha[i]) / (2.0 * h);
                let scale = s.alpha_dot[i].abs().max(1e-3);
                assert!(
                    (fd - s.alpha_dot[i]).abs() / scale <= 1e-6,
                    "{} axis {i}: fd {fd} vs {}",
                    model.kind_name(),
                    s.alpha_dot[i]
                );
            }
        }
    }

    #[test]
    fn mean_scale_examples() {
        assert!(close(mean_scale([2.0; 3]).unwrap(), 2.0, 1e-15));
        assert!(close(mean_scale([1.0, 1.0, 8.0]).unwrap(), 2.0, 1e-15));
        assert!(mean_scale([1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn expansion_rate_examples() {
        assert_eq!(expansion_rates([2.0; 3], [0.0; 3]).unwrap(), [0.0; 3]);
        assert_eq!(
            expansion_rates([1.0; 3], [0.1, 0.2, 0.3]).unwrap(),
            [0.1, 0.2, 0.3]
        );
        assert_eq!(
            expansion_rates([2.0, 4.0, 8.0], [2.0, 4.0, 8.0]).unwrap(),
            [1.0; 3]
        );
        assert!(expansion_rates([2.0, -1.0, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn anisotropy_examples() {
        assert_eq!(anisotropy_q([0.7; 3]), 0.0);
        assert_eq!(anisotropy_q([1.0, 2.0, 3.0]), 6.0);
        assert_eq!(anisotropy_q([0.0, 0.0, 1.0]), 2.0);
    }

    #[test]
    fn mu_examples() {
        assert!(close(
            direction_mass_mu([3.0; 3], 1.1, 4.0),
            1.0 / 3.0,
            1e-15
        ));
        assert!(close(
            direction_mass_mu([1.0, 2.0, 5.0], 0.0, 0.3),
            0.2,
            1e-15
        ));
        assert!(close(
            direction_mass_mu([4.0, 9.0, 9.0], FRAC_PI_2, 0.0),
            0.25,
            1e-15
        ));
    }

    #[test]
    fn k0_examples() {
        assert_eq!(effective_frequency_k0(1.5, 0.0, 3.0).unwrap(), 1.5);
        assert_eq!(effective_frequency_k0(0.0, 1.0, 2.0).unwrap(), 2.0);
        assert_eq!(effective_frequency_k0(3.0, 4.0, 1.0).unwrap(), 5.0);
        assert!(effective_frequency_k0(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn mode_wavevector_norm() {
        let m = Mode::new(2.5, 1.2, 5.1).unwrap();
        let kv = m.wavevector();
        let norm = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]).sqrt();
        assert!((norm - 2.5).abs() <= 1e-12 * 2.5);
        assert!(Mode::new(1.0, -0.1, 0.0).is_err());
        assert!(Mode::new(1.0, 0.1, 2.0 * PI).is_err());
        assert!(Mode::new(-1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn static_couplings_vanish() {
        let model = BackgroundModel::static_model([1.0, 2.0, 3.0]).unwrap();
        let mode = Mode::new(1.3, 0.7, 2.1).unwrap();
        let g = couplings(&model, &mode, 0.8, 1.0).unwrap();
        assert_eq!(g.w, 0.0);
        assert_eq!(g.wt, 0.0);
    }

    #[test]
    fn isotropic_exponential_has_no_anisotropy_channel() {
        let model = BackgroundModel::exponential([0.2; 3]).unwrap();
        let mode = Mode::new(1.0, FRAC_PI_3, FRAC_PI_4).unwrap();
        let g = couplings(&model, &mode, 1.0, 0.5).unwrap();
        assert_eq!(g.q, 0.0);
        assert_eq!(g.wt, 0.0);
        assert!(g.w.abs() > 1e-3);
        assert!(close(g.mu * g.a, 1.0, 1e-14));
    }

    #[test]
    fn tanh_step_couplings_by_hand() {
        // tanh(0) = 0, so alpha = A = (2,2,2); alpha_dot = B rho = (0.5,-0.5,0).
        // C = (0.25,-0.25,0), Q = 0.25 + 0.0625 + 0.0625, mu = 1/alpha_1.
        let model = BackgroundModel::tanh_step([2.0; 3], [0.5, -0.5, 0.0], 1.0).unwrap();
        let k = 1.7;
        let mode = Mode::new(k, FRAC_PI_2, 0.0).unwrap();
        let g = couplings(&model, &mode, 0.0, 0.0).unwrap();
        assert!(close(g.mu, 0.5, 1e-15));
        assert!(close(g.q, 0.375, 1e-15));
        assert!(close(g.w, -0.25, 1e-15));
        assert!(close(g.wt, 0.375 / (0.5 * k), 1e-15));
        assert_eq!(g.k0, k);
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        let mode = Mode::new(0.9, 1.1, 0.6).unwrap();
        for (model, eta) in catalog() {
            let h = 1e-5 * (1.0 + eta.abs());
            let g = couplings(&model, &mode, 1.3, eta).unwrap();
            let gp = couplings(&model, &mode, 1.3, eta + h).unwrap();
            let gm = couplings(&model, &mode, 1.3, eta - h).unwrap();
            let fd_mu = (gp.mu - gm.mu) / (2.0 * h);
            let fd_k0 = (gp.k0 - gm.k0) / (2.0 * h);
            let fd_a = (gp.a - gm.a) / (2.0 * h);
            for (fd, an) in [(fd_mu, g.mu_dot), (fd_k0, g.k0_dot), (fd_a, g.a_dot)] {
                let scale = an.abs().max(1e-3);
                assert!((fd - an).abs() / scale <= 1e-6, "{}", model.kind_name());
            }
        }
    }

    #[test]
    fn geometry_invariants() {
        let mode = Mode::new(0.4, 2.0, 3.0).unwrap();
        for (model, eta) in catalog() {
            let g = couplings(&model, &mode, 2.0, eta).unwrap();
            assert!(g.q >= 0.0);
            assert!(g.k0 >= g.k && g.k0 >= 2.0 * g.g * (1.0 - 1e-15));
        }
    }

    #[test]
    fn joint_permutation_is_exact() {
        let model = BackgroundModel::tanh_step([2.0, 2.5, 3.0], [0.5, -0.5, 0.2], 0.7).unwrap();
        let mode = Mode::new(1.2, 0.9, 0.4).unwrap();
        let base = couplings(&model, &mode, 0.6, 0.3).unwrap();
        for perm in [[1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0], [2, 0, 1]] {
            let g = couplings(&model.permuted(perm), &mode.permuted(perm), 0.6, 0.3).unwrap();
            assert_eq!(g.mu, base.mu);
            assert_eq!(g.k0, base.k0);
            assert_eq!(g.q, base.q);
            assert_eq!(g.w, base.w);
            assert_eq!(g.wt, base.wt);
        }
    }

    #[test]
    fn scaling_leaves_rates_invariant() {
        let alpha = [1.3, 0.7, 2.2];
        let alpha_dot = [0.2, -0.4, 0.9];
        let c = expansion_rates(alpha, alpha_dot).unwrap();
        let s = 3.7;
        let cs = expansion_rates(alpha.map(|v| v * s), alpha_dot.map(|v| v * s)).unwrap();
        for i in 0..3 {
            assert!(close(cs[i], c[i], 1e-15));
        }
        assert!(close(anisotropy_q(cs), anisotropy_q(c), 1e-14));
        let iso = [1.7; 3];
        let mu = direction_mass_mu(iso, 0.3, 0.2) * mean_scale(iso).unwrap();
        let mu_s = direction_mass_mu(iso.map(|v| v * s), 0.3, 0.2)
            * mean_scale(iso.map(|v| v * s)).unwrap();
        assert!(close(mu, mu_s, 1e-14));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn q_symmetric_and_nonnegative(c in proptest::array::uniform3(-5.0f64..5.0)) {
                let q = anisotropy_q(c);
                prop_assert!(q >= 0.0);
                prop_assert_eq!(q, anisotropy_q([c[2], c[0], c[1]]));
                prop_assert_eq!(q, anisotropy_q([c[1], c[0], c[2]]));
            }

            #[test]
            fn isotropic_mu_is_inverse_mean(a in 0.1f64..10.0, th in 0.0f64..std::f64::consts::PI, ph in 0.0f64..std::f64::consts::TAU) {
                let mu = direction_mass_mu([a; 3], th, ph);
                prop_assert!((mu * mean_scale([a; 3]).unwrap() - 1.0).abs() < 1e-14);
            }

            #[test]
            fn k0_bounds(k in 0.01f64..50.0, m in 0.0f64..5.0, g in 0.01f64..10.0) {
                let k0 = effective_frequency_k0(k, m, g).unwrap();
                prop_assert!(k0 >= k && k0 >= m * g);
            }
        }
    }
}
