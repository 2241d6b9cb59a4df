//! Dormand–Prince 5(4) integrator with embedded error control.
//!
//! Fifth-order propagation (local extrapolation), fourth-order embedded
//! estimate, FSAL. Absolute and relative tolerance are the same number.
//! Requested output times are hit exactly by shortening the step that would
//! cross them; accepted steps can optionally be recorded for cubic Hermite
//! interpolation.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// b - b* (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub tol: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    /// Keep every accepted step for dense output.
    pub record_steps: bool,
}

impl Dopri5 {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_steps: 2_000_000,
            h_init: None,
            h_max: None,
            record_steps: false,
        }
    }

    pub fn recording(mut self) -> Self {
        self.record_steps = true;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// One accepted step: endpoints with their derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub f0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> StepRecord<N> {
    /// Cubic Hermite interpolant on [t0, t1].
    pub fn hermite(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        std::array::from_fn(|i| {
            h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<const N: usize> {
    /// (t, y) at each requested output time, in order.
    pub outputs: Vec<(f64, [f64; N])>,
    pub stats: StepStats,
    pub steps: Vec<StepRecord<N>>,
}

impl<const N: usize> OdeSolution<N> {
    /// Dense output from the recorded steps; `None` outside the covered range
    /// or when steps were not recorded.
    pub fn interpolate(&self, t: f64) -> Option<[f64; N]> {
        let idx = self.steps.partition_point(|s| s.t1 < t);
        let step = self.steps.get(idx)?;
        (step.t0 <= t && t <= step.t1).then(|| step.hermite(t))
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        y[i] + h * acc
    })
}

impl Dopri5 {
    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            let scale = self.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            worst = worst.max(err[i].abs() / scale);
        }
        worst
    }

    fn initial_step<const N: usize, F>(
        &self,
        f: &mut F,
        t0: f64,
        y0: &[f64; N],
        f0: &[f64; N],
        span: f64,
        stats: &mut StepStats,
    ) -> Result<f64>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        // Hairer–Nørsett–Wanner starting step heuristic.
        let sc: [f64; N] = std::array::from_fn(|i| self.tol * (1.0 + y0[i].abs()));
        let rms = |v: &[f64; N]| {
            (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt()
        };
        let d0 = rms(y0);
        let d1 = rms(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1 = axpy(y0, h0, &[(1.0, f0)]);
        let f1 = f(t0 + h0, &y1)?;
        stats.evals += 1;
        let df: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
        let d2 = rms(&df) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        Ok((100.0 * h0).min(h1).min(span))
    }

    /// Integrates from `(t0, y0)` through every time in `outputs`
    /// (non-decreasing, all ≥ t0).
    pub fn solve<const N: usize, F>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        outputs: &[f64],
    ) -> Result<OdeSolution<N>>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidRequest(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.iter().any(|&t| t < t0) {
            return Err(Error::InvalidRequest(
                "output times must be non-decreasing and not before the start".into(),
            ));
        }
        let mut stats = StepStats::default();
        let mut result = OdeSolution {
            outputs: Vec::with_capacity(outputs.len()),
            stats,
            steps: Vec::new(),
        };
        let t_end = match outputs.last() {
            Some(&t) => t,
            None => return Ok(result),
        };

        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y)?;
        stats.evals += 1;
        let span = (t_end - t0).max(f64::MIN_POSITIVE);
        let mut h = match self.h_init {
            Some(h) => h,
            None => self.initial_step(&mut f, t, &y, &k1, span, &mut stats)?,
        };
        if let Some(h_max) = self.h_max {
            h = h.min(h_max);
        }

        let mut next_out = 0;
        while next_out < outputs.len() && outputs[next_out] <= t {
            result.outputs.push((t, y));
            next_out += 1;
        }

        while next_out < outputs.len() {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::MaxSteps {
                    eta: t,
                    max_steps: self.max_steps,
                });
            }
            let target = outputs[next_out];
            let remaining = target - t;
            let clipped = h >= remaining;
            let h_try = if clipped { remaining } else { h };
            if h_try <= 16.0 * f64::EPSILON * t.abs().max(1.0) && !clipped {
                return Err(Error::StepUnderflow { eta: t, h: h_try });
            }

            let k2 = f(t + C2 * h_try, &axpy(&y, h_try, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h_try, &axpy(&y, h_try, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(
                t + C4 * h_try,
                &axpy(&y, h_try, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = f(
                t + C5 * h_try,
                &axpy(&y, h_try, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + h_try,
                &axpy(
                    &y,
                    h_try,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let y_new = axpy(
                &y,
                h_try,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if clipped { target } else { t + h_try };
            let k7 = f(t_new, &y_new)?;
            stats.evals += 6;

            let err: [f64; N] = std::array::from_fn(|i| {
                h_try
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            });
            let err_norm = self.error_norm(&y, &y_new, &err);
            if !err_norm.is_finite() {
                return Err(Error::StepUnderflow { eta: t, h: h_try });
            }
            let factor = if err_norm == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };

            if err_norm <= 1.0 {
                stats.accepted += 1;
                if self.record_steps {
                    result.steps.push(StepRecord {
                        t0: t,
                        y0: y,
                        f0: k1,
                        t1: t_new,
                        y1: y_new,
                        f1: k7,
                    });
                }
                t = t_new;
                y = y_new;
                k1 = k7;
                // A clipped step says nothing about the natural step size.
                h = if clipped {
                    h.max(h_try * factor)
                } else {
                    h_try * factor
                };
                while next_out < outputs.len() && outputs[next_out] <= t {
                    result.outputs.push((outputs[next_out], y));
                    next_out += 1;
                }
            } else {
                stats.rejected += 1;
                h = h_try * factor.min(1.0);
            }
            if let Some(h_max) = self.h_max {
                h = h.min(h_max);
            }
        }
        result.stats = stats;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sol = Dopri5::new(1e-10)
            .solve(|_, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], &[1.0, 2.0, 5.0])
            .unwrap();
        for (t, y) in &sol.outputs {
            assert!((y[0] - (-t).exp()).abs() < 1e-10, "t = {t}");
        }
        assert_eq!(sol.outputs.len(), 3);
        assert_eq!(sol.outputs[2].0, 5.0);
    }

    #[test]
    fn outputs_at_start_are_initial_state() {
        let sol = Dopri5::new(1e-8)
            .solve(|_, y: &[f64; 1]| Ok([y[0]]), 0.5, [2.0], &[0.5, 1.0])
            .unwrap();
        assert_eq!(sol.outputs[0], (0.5, [2.0]));
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let sol = Dopri5::new(1e-12)
            .solve(
                |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
                0.0,
                [1.0, 0.0],
                &[100.0],
            )
            .unwrap();
        let (_, y) = sol.outputs[0];
        assert!((y[0] - 100f64.cos()).abs() < 1e-9);
        assert!((y[1] + 100f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn hermite_dense_output_is_fourth_order_accurate() {
        let sol = Dopri5::new(1e-9)
            .recording()
            .solve(|_, y: &[f64; 2]| Ok([y[1], -y[0]]), 0.0, [1.0, 0.0], &[3.0])
            .unwrap();
        let y = sol.interpolate(1.2345).unwrap();
        assert!((y[0] - 1.2345f64.cos()).abs() < 1e-5);
        assert!(sol.interpolate(3.5).is_none());
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2, y(0) = 1 blows up at t = 1.
        let err = Dopri5::new(1e-8)
            .solve(|_, y: &[f64; 1]| Ok([y[0] * y[0]]), 0.0, [1.0], &[2.0])
            .unwrap_err();
        match err {
            Error::StepUnderflow { eta, .. } | Error::MaxSteps { eta, .. } => {
                assert!((eta - 1.0).abs() < 1e-2, "failed at {eta}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let f = |_: f64, y: &[f64; 1]| Ok([y[0]]);
        assert!(Dopri5::new(0.0).solve(f, 0.0, [1.0], &[1.0]).is_err());
        assert!(Dopri5::new(1e-6).solve(f, 0.0, [1.0], &[2.0, 1.0]).is_err());
        assert!(Dopri5::new(1e-6).solve(f, 0.0, [1.0], &[-1.0]).is_err());
    }
}
