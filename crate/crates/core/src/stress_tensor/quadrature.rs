//! Momentum-space quadrature rules: composite Gauss–Legendre in k,
//! Gauss–Legendre in cosθ, uniform trapezoid in φ.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [−1, 1], nodes ascending.
///
/// Nodes are computed for one half and mirrored, so the rule is exactly
/// symmetric under x → −x.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        // i-th largest root.
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Composite Gauss–Legendre rule on [lo, hi] with equal panels.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub panels: usize,
    pub order: usize,
}

impl RadialRule {
    pub fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> Result<Self> {
        if !(hi > lo) || panels == 0 || order == 0 {
            return Err(Error::InvalidGrid(format!(
                "radial rule needs hi > lo and at least one panel/node (lo={lo}, hi={hi}, panels={panels}, order={order})"
            )));
        }
        let (x, w) = gauss_legendre(order);
        let width = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = lo + width * p as f64;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * width * (xi + 1.0));
                weights.push(0.5 * width * wi);
            }
        }
        Ok(Self {
            nodes,
            weights,
            panels,
            order,
        })
    }

    pub fn panel_width(&self) -> f64 {
        self.weights[..self.order].iter().sum()
    }

    /// Index range of the nodes belonging to the last panel.
    pub fn last_panel(&self) -> std::ops::Range<usize> {
        (self.panels - 1) * self.order..self.panels * self.order
    }
}

/// Uniform trapezoid nodes on [0, 2π) as exact (cos φ, sin φ) pairs.
///
/// For `n` a multiple of 4 the pairs are built so that φ → π/2 − φ,
/// φ → −φ and φ → π − φ map nodes onto nodes exactly.
pub fn phi_nodes(n: usize) -> Vec<(f64, f64)> {
    let step = TAU / n as f64;
    if !n.is_multiple_of(4) {
        return (0..n)
            .map(|j| ((j as f64 * step).cos(), (j as f64 * step).sin()))
            .collect();
    }
    let m = n / 4;
    // First quadrant, j = 0..=m, symmetric about π/4.
    let mut quad = vec![(0.0, 0.0); m + 1];
    for j in 0..=m {
        if 2 * j <= m {
            let (s, c) = (j as f64 * step).sin_cos();
            quad[j] = (c, s);
            quad[m - j] = (s, c);
        }
    }
    quad[0] = (1.0, 0.0);
    quad[m] = (0.0, 1.0);
    if m.is_multiple_of(2) {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        quad[m / 2] = (r, r);
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let (q, r) = (j / m, j % m);
        let (c, s) = quad[r];
        out.push(match q {
            0 => (c, s),
            1 => (-s, c),
            2 => (-c, -s),
            _ => (s, -c),
        });
    }
    out
}

/// Trapezoid rule for ∫₀^{2π} f(φ) dφ.
pub fn integrate_phi(n: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let w = TAU / n as f64;
    phi_nodes(n).into_iter().map(|(c, s)| w * f(c, s)).sum()
}

/// A weighted unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionNode {
    pub dir: [f64; 3],
    pub weight: f64,
}

/// Angular rule over the sphere (weights sum to 4π), restricted to the
/// positive octant with multiplicity weights and averaged over the three
/// choices of polar axis.
///
/// Integrands must depend on the direction only through n₁², n₂², n₃².
/// The averaged rule is mapped onto itself by every relabelling of the
/// axes, provided `n_phi` is a multiple of 4.
pub fn symmetric_angular_rule(n_theta: usize, n_phi: usize) -> Result<Vec<DirectionNode>> {
    validate_angular(n_theta, n_phi)?;
    let (x, wx) = gauss_legendre(n_theta);
    let m = n_phi / 4;
    let quad = &phi_nodes(n_phi)[..=m];
    let w_phi = TAU / n_phi as f64;
    let mut out = Vec::new();
    for orientation in 0..3 {
        for (xi, wi) in x.iter().zip(&wx).filter(|(xi, _)| **xi >= 0.0) {
            let mult_x = if *xi > 0.0 { 2.0 } else { 1.0 };
            let s = (1.0 - xi * xi).sqrt();
            for (j, &(c, sn)) in quad.iter().enumerate() {
                let mult_phi = if j == 0 || j == m { 2.0 } else { 4.0 };
                let (a, b) = (s * c, s * sn);
                let dir = match orientation {
                    0 => [a, b, *xi],
                    1 => [*xi, a, b],
                    _ => [b, *xi, a],
                };
                out.push(DirectionNode {
                    dir,
                    weight: wi * mult_x * w_phi * mult_phi / 3.0,
                });
            }
        }
    }
    Ok(out)
}

fn validate_angular(n_theta: usize, n_phi: usize) -> Result<()> {
    if n_theta < 2 {
        return Err(Error::InvalidGrid(format!(
            "n_theta must be >= 2, got {n_theta}"
        )));
    }
    if n_phi < 4 || !n_phi.is_multiple_of(4) {
        return Err(Error::InvalidGrid(format!(
            "n_phi must be a positive multiple of 4, got {n_phi}"
        )));
    }
    Ok(())
}

/// Discretization of ∫d³k on a ball of radius `k_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumGrid {
    pub k_max: f64,
    /// Radial panels at the coarsest level.
    pub panels: usize,
    /// Gauss–Legendre nodes per radial panel.
    pub order: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Assumed power-law decay k^{-p} of the per-mode integrand beyond k_max.
    pub tail_exponent: f64,
}

impl MomentumGrid {
    pub fn new(
        k_max: f64,
        panels: usize,
        order: usize,
        n_theta: usize,
        n_phi: usize,
        tail_exponent: f64,
    ) -> Result<Self> {
        let g = Self {
            k_max,
            panels,
            order,
            n_theta,
            n_phi,
            tail_exponent,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_max > 0.0 && self.k_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "k_max must be positive, got {}",
                self.k_max
            )));
        }
        if self.panels == 0 || self.order == 0 {
            return Err(Error::InvalidGrid(
                "need at least one radial panel and node".into(),
            ));
        }
        if !(self.tail_exponent > 3.0) {
            return Err(Error::InvalidGrid(format!(
                "tail_exponent must exceed 3, got {}",
                self.tail_exponent
            )));
        }
        validate_angular(self.n_theta, self.n_phi)
    }

    /// The grid after `level` doublings of radial panels, θ nodes and φ nodes.
    pub fn refined(&self, level: u32) -> Self {
        let f = 1usize << level;
        Self {
            panels: self.panels * f,
            n_theta: self.n_theta * f,
            n_phi: self.n_phi * f,
            ..*self
        }
    }

    pub fn radial(&self) -> Result<RadialRule> {
        RadialRule::composite(0.0, self.k_max, self.panels, self.order)
    }

    pub fn angular(&self) -> Result<Vec<DirectionNode>> {
        symmetric_angular_rule(self.n_theta, self.n_phi)
    }
}
