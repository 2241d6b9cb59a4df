//! Run configuration: a TOML document of flat dotted keys
//! (`model.kind`, `window.eta0`, `grid.kmax`, ...), parsed strictly.
//!
//! Defaults: `tol.ode = 1e-10`, `tol.quad = 1e-6`, `tii_variant = "printed"`,
//! `output.times = [window.eta1]`, `output.format = "csv"`,
//! `grid.panels = 4`, `grid.order = 8`, `grid.ntheta = 8`, `grid.nphi = 8`,
//! `grid.tail_exponent = 6`, `grid.max_refine = 3`,
//! `spectrum.angles = "fixed"`.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;

use crate::background::{BackgroundModel, Mode};
use crate::stress_tensor::{MomentumGrid, TiiVariant};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed document or unknown key; message carries line/key context.
    Parse(String),
    /// Well-formed document violating an invariant; `field` names it.
    Invalid { field: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Invalid { field, message } => {
                write!(f, "invalid config: {field}: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

pub const DEFAULT_TOL_ODE: f64 = 1e-10;
pub const DEFAULT_TOL_QUAD: f64 = 1e-6;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    model: ModelSection,
    #[serde(default)]
    mass: f64,
    window: WindowSection,
    mode: Option<ModeSection>,
    spectrum: Option<SpectrumSection>,
    grid: Option<GridSection>,
    #[serde(default)]
    tol: TolSection,
    tii_variant: Option<String>,
    #[serde(default)]
    output: OutputSection,
    threads: Option<usize>,
    #[serde(default)]
    verify: VerifySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    kind: String,
    c1: Option<f64>,
    c2: Option<f64>,
    c3: Option<f64>,
    q1: Option<f64>,
    q2: Option<f64>,
    q3: Option<f64>,
    eta_ref: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    lambda3: Option<f64>,
    #[serde(rename = "A1")]
    a1: Option<f64>,
    #[serde(rename = "A2")]
    a2: Option<f64>,
    #[serde(rename = "A3")]
    a3: Option<f64>,
    #[serde(rename = "B1")]
    b1: Option<f64>,
    #[serde(rename = "B2")]
    b2: Option<f64>,
    #[serde(rename = "B3")]
    b3: Option<f64>,
    rho: Option<f64>,
    eta: Option<Vec<f64>>,
    alpha1: Option<Vec<f64>>,
    alpha2: Option<Vec<f64>>,
    alpha3: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSection {
    eta0: f64,
    eta1: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeSection {
    k: Option<f64>,
    #[serde(default)]
    theta: f64,
    #[serde(default)]
    phi: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumSection {
    k_min: f64,
    k_max: f64,
    n_k: usize,
    angles: Option<String>,
    n_theta: Option<usize>,
    n_phi: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    kmax: f64,
    panels: Option<usize>,
    order: Option<usize>,
    ntheta: Option<usize>,
    nphi: Option<usize>,
    tail_exponent: Option<f64>,
    max_refine: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolSection {
    ode: Option<f64>,
    quad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    times: Option<Vec<f64>>,
    path: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifySection {
    #[serde(default)]
    inject_dv_sign_flip: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!(
                "unknown output format {other:?} (expected csv or json)"
            )),
        }
    }
}

/// Log-spaced k at fixed angles, or log-spaced k times an angular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
    pub angles: SpectrumAngles,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumAngles {
    /// Use the angles of `mode.theta`, `mode.phi`.
    Fixed { theta: f64, phi: f64 },
    /// Gauss–Legendre in cosθ times uniform φ.
    Grid { n_theta: usize, n_phi: usize },
}

impl SpectrumSpec {
    pub fn k_values(&self) -> Vec<f64> {
        if self.n_k == 1 {
            return vec![self.k_min];
        }
        let ratio = self.k_max / self.k_min;
        (0..self.n_k)
            .map(|i| self.k_min * ratio.powf(i as f64 / (self.n_k - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: BackgroundModel,
    pub mass: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub output_times: Vec<f64>,
    pub mode: Option<Mode>,
    pub spectrum: Option<SpectrumSpec>,
    pub grid: Option<MomentumGrid>,
    pub max_refine: u32,
    pub tol_ode: f64,
    pub tol_quad: f64,
    pub tii_variant: TiiVariant,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub threads: Option<usize>,
    pub inject_dv_sign_flip: bool,
}

/// Appends a "did you mean" hint to serde's unknown-field message.
fn suggest(message: &str) -> String {
    let Some(start) = message.find("unknown field `") else {
        return message.to_string();
    };
    let rest = &message[start + "unknown field `".len()..];
    let Some(end) = rest.find('`') else {
        return message.to_string();
    };
    let unknown = &rest[..end];
    let expected = &rest[end + 1..];
    let best = expected
        .split('`')
        .skip(1)
        .step_by(2)
        // ties go to the candidate of equal length (a transposition)
        .map(|cand| {
            let len_gap = unknown.len().abs_diff(cand.len());
            (strsim::damerau_levenshtein(unknown, cand), len_gap, cand)
        })
        .min();
    match best {
        Some((dist, _, cand)) if dist <= 2.max(unknown.len() / 3) => {
            format!(
                "{}\nunknown key `{unknown}`: did you mean `{cand}`?",
                message.trim_end()
            )
        }
        _ => message.to_string(),
    }
}

fn tri(field: &str, values: [Option<f64>; 3]) -> Result<[f64; 3], ConfigError> {
    let mut out = [0.0; 3];
    for (i, v) in values.iter().enumerate() {
        out[i] = v.ok_or_else(|| invalid(&format!("model.{field}{}", i + 1), "missing"))?;
    }
    Ok(out)
}

fn build_model(m: ModelSection) -> Result<BackgroundModel, ConfigError> {
    let present: Vec<(&str, bool)> = vec![
        ("c1", m.c1.is_some()),
        ("c2", m.c2.is_some()),
        ("c3", m.c3.is_some()),
        ("q1", m.q1.is_some()),
        ("q2", m.q2.is_some()),
        ("q3", m.q3.is_some()),
        ("eta_ref", m.eta_ref.is_some()),
        ("lambda1", m.lambda1.is_some()),
        ("lambda2", m.lambda2.is_some()),
        ("lambda3", m.lambda3.is_some()),
        ("A1", m.a1.is_some()),
        ("A2", m.a2.is_some()),
        ("A3", m.a3.is_some()),
        ("B1", m.b1.is_some()),
        ("B2", m.b2.is_some()),
        ("B3", m.b3.is_some()),
        ("rho", m.rho.is_some()),
        ("eta", m.eta.is_some()),
        ("alpha1", m.alpha1.is_some()),
        ("alpha2", m.alpha2.is_some()),
        ("alpha3", m.alpha3.is_some()),
    ];
    let allowed: &[&str] = match m.kind.as_str() {
        "static" => &["c1", "c2", "c3"],
        "power_law" => &["q1", "q2", "q3", "eta_ref"],
        "exponential" => &["lambda1", "lambda2", "lambda3"],
        "tanh_step" => &["A1", "A2", "A3", "B1", "B2", "B3", "rho"],
        "tabulated" => &["eta", "alpha1", "alpha2", "alpha3"],
        other => {
            return Err(invalid(
                "model.kind",
                format!(
                    "unknown model {other:?} (expected static, power_law, exponential, tanh_step or tabulated)"
                ),
            ))
        }
    };
    if let Some((key, _)) = present.iter().find(|(k, p)| *p && !allowed.contains(k)) {
        return Err(invalid(
            &format!("model.{key}"),
            format!("not a parameter of model kind {:?}", m.kind),
        ));
    }
    let model = match m.kind.as_str() {
        "static" => BackgroundModel::static_model(tri("c", [m.c1, m.c2, m.c3])?),
        "power_law" => BackgroundModel::power_law(
            tri("q", [m.q1, m.q2, m.q3])?,
            m.eta_ref
                .ok_or_else(|| invalid("model.eta_ref", "missing"))?,
        ),
        "exponential" => {
            BackgroundModel::exponential(tri("lambda", [m.lambda1, m.lambda2, m.lambda3])?)
        }
        "tanh_step" => BackgroundModel::tanh_step(
            tri("A", [m.a1, m.a2, m.a3])?,
            tri("B", [m.b1, m.b2, m.b3])?,
            m.rho.ok_or_else(|| invalid("model.rho", "missing"))?,
        ),
        _ => {
            let need = |v: Option<Vec<f64>>, key: &str| {
                v.ok_or_else(|| invalid(&format!("model.{key}"), "missing"))
            };
            let eta = need(m.eta, "eta")?;
            let a1 = need(m.alpha1, "alpha1")?;
            let a2 = need(m.alpha2, "alpha2")?;
            let a3 = need(m.alpha3, "alpha3")?;
            BackgroundModel::tabulated(&eta, [&a1, &a2, &a3])
        }
    };
    model.map_err(|e| invalid("model", e.to_string()))
}

fn check_tol(field: &str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 && value <= 1e-2 {
        Ok(value)
    } else {
        Err(invalid(
            field,
            format!("tolerance must lie in (0, 1e-2], got {value}"),
        ))
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Document =
        toml::from_str(text).map_err(|e| ConfigError::Parse(suggest(&e.to_string())))?;

    let model = build_model(doc.model)?;
    let (eta0, eta1) = (doc.window.eta0, doc.window.eta1);
    if !(eta0 < eta1) || !eta0.is_finite() || !eta1.is_finite() {
        return Err(invalid(
            "window",
            format!("eta0 ({eta0}) must be strictly less than eta1 ({eta1})"),
        ));
    }
    for (what, eta) in [("window.eta0", eta0), ("window.eta1", eta1)] {
        model
            .eval(eta)
            .map_err(|e| invalid(what, format!("model not valid at the window edge: {e}")))?;
    }
    if !(doc.mass >= 0.0 && doc.mass.is_finite()) {
        return Err(invalid("mass", format!("must be >= 0, got {}", doc.mass)));
    }

    let output_times = doc.output.times.unwrap_or_else(|| vec![eta1]);
    if output_times.is_empty() {
        return Err(invalid(
            "output.times",
            "at least one output time is required",
        ));
    }
    if output_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("output.times", "must be strictly increasing"));
    }
    if let Some(t) = output_times.iter().find(|t| !(eta0..=eta1).contains(*t)) {
        return Err(invalid(
            "output.times",
            format!("{t} lies outside the window [{eta0}, {eta1}]"),
        ));
    }

    // mode.theta/phi without mode.k only set the spectrum direction
    let mode = doc
        .mode
        .as_ref()
        .and_then(|m| m.k.map(|k| (k, m)))
        .map(|(k, m)| Mode::new(k, m.theta, m.phi).map_err(|e| invalid("mode", e.to_string())))
        .transpose()?;

    let spectrum = match doc.spectrum {
        None => None,
        Some(s) => {
            if !(s.k_min > 0.0 && s.k_max >= s.k_min) || s.n_k == 0 {
                return Err(invalid("spectrum", "need 0 < k_min <= k_max and n_k >= 1"));
            }
            let angles = match s.angles.as_deref().unwrap_or("fixed") {
                "fixed" => {
                    if s.n_theta.is_some() || s.n_phi.is_some() {
                        return Err(invalid(
                            "spectrum.angles",
                            "n_theta/n_phi only apply to angles = \"grid\"",
                        ));
                    }
                    let (theta, phi) = doc.mode.as_ref().map_or((0.0, 0.0), |m| (m.theta, m.phi));
                    SpectrumAngles::Fixed { theta, phi }
                }
                "grid" => {
                    let n_theta = s.n_theta.unwrap_or(4);
                    let n_phi = s.n_phi.unwrap_or(4);
                    if n_theta == 0 || n_phi == 0 {
                        return Err(invalid("spectrum", "n_theta and n_phi must be positive"));
                    }
                    SpectrumAngles::Grid { n_theta, n_phi }
                }
                other => {
                    return Err(invalid(
                        "spectrum.angles",
                        format!("expected \"fixed\" or \"grid\", got {other:?}"),
                    ))
                }
            };
            Some(SpectrumSpec {
                k_min: s.k_min,
                k_max: s.k_max,
                n_k: s.n_k,
                angles,
            })
        }
    };

    let mut max_refine = 3;
    let grid = match doc.grid {
        None => None,
        Some(g) => {
            max_refine = g.max_refine.unwrap_or(3);
            let grid = MomentumGrid::new(
                g.kmax,
                g.panels.unwrap_or(4),
                g.order.unwrap_or(8),
                g.ntheta.unwrap_or(8),
                g.nphi.unwrap_or(8),
                g.tail_exponent.unwrap_or(6.0),
            )
            .map_err(|e| invalid("grid", e.to_string()))?;
            Some(grid)
        }
    };

    let tol_ode = check_tol("tol.ode", doc.tol.ode.unwrap_or(DEFAULT_TOL_ODE))?;
    let tol_quad = check_tol("tol.quad", doc.tol.quad.unwrap_or(DEFAULT_TOL_QUAD))?;
    let tii_variant = match doc.tii_variant.as_deref().unwrap_or("printed") {
        "printed" => TiiVariant::Printed,
        "c_squared" => TiiVariant::CSquared,
        other => {
            return Err(invalid(
                "tii_variant",
                format!("expected \"printed\" or \"c_squared\", got {other:?}"),
            ))
        }
    };
    let output_format = match doc.output.format.as_deref() {
        None => OutputFormat::Csv,
        Some(s) => s.parse().map_err(|e: String| invalid("output.format", e))?,
    };
    if doc.threads == Some(0) {
        return Err(invalid("threads", "must be at least 1"));
    }

    Ok(RunConfig {
        model,
        mass: doc.mass,
        eta0,
        eta1,
        output_times,
        mode,
        spectrum,
        grid,
        max_refine,
        tol_ode,
        tol_quad,
        tii_variant,
        output_path: doc.output.path,
        output_format,
        threads: doc.threads,
        inject_dv_sign_flip: doc.verify.inject_dv_sign_flip,
    })
}
