//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size real systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} s")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t:e} s")]
    NonFinite { t: f64 },
    #[error("step budget exhausted at t = {t:e} s")]
    TooManySteps { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

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

// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Stateful stepper: keeps the last accepted step-size proposal between
/// calls so a trajectory can be advanced stop-by-stop.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub tol: Tolerance,
    pub max_steps: usize,
    h: Option<f64>,
    steps: usize,
}

impl Dopri5 {
    pub fn new(tol: Tolerance) -> Self {
        Self {
            tol,
            max_steps: 50_000_000,
            h: None,
            steps: 0,
        }
    }

    /// Accepted plus rejected steps so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
            let r = err[i] / sc;
            acc += r * r;
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<const N: usize, F>(&self, f: &F, t: f64, y: &[f64; N], f0: &[f64; N], span: f64) -> f64
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.tol.atol + self.tol.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (f0[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = y[i] + h0 * f0[i];
        }
        let f1 = f(t + h0, &y1);
        let mut d2 = 0.0;
        for i in 0..N {
            let sc = self.tol.atol + self.tol.rtol * y[i].abs();
            d2 += ((f1[i] - f0[i]) / sc).powi(2);
        }
        let d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Advances `y` from `t0` to exactly `t1`.
    pub fn advance<const N: usize, F>(&mut self, f: &F, t0: f64, y: &mut [f64; N], t1: f64) -> Result<(), OdeError>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let mut t = t0;
        let mut k1 = f(t, y);
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(f, t, y, &k1, span),
        };
        loop {
            let remaining = t1 - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step <= f64::EPSILON * t.abs().max(span) {
                if last {
                    return Ok(());
                }
                return Err(OdeError::StepUnderflow { t });
            }
            self.steps += 1;
            if self.steps > self.max_steps {
                return Err(OdeError::TooManySteps { t });
            }

            let mut tmp = [0.0; N];
            for i in 0..N {
                tmp[i] = y[i] + step * A21 * k1[i];
            }
            let k2 = f(t + C2 * step, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + step * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = f(t + C3 * step, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = f(t + C4 * step, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = f(t + C5 * step, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let k6 = f(t + step, &tmp);
            let mut y_new = [0.0; N];
            for i in 0..N {
                y_new[i] = y[i] + step * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let t_new = if last { t1 } else { t + step };
            let k7 = f(t_new, &y_new);
            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let en = self.error_norm(y, &y_new, &err);
            if !en.is_finite() {
                if y_new.iter().any(|v| !v.is_finite()) && step <= f64::EPSILON * 1e3 * span {
                    return Err(OdeError::NonFinite { t });
                }
                h = 0.2 * step;
                continue;
            }
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            if en <= 1.0 {
                if y_new.iter().any(|v| !v.is_finite()) {
                    return Err(OdeError::NonFinite { t: t_new });
                }
                *y = y_new;
                t = t_new;
                k1 = k7;
                // A step shortened to land on t1 says nothing about the
                // natural step size; keep the previous proposal.
                if !last || step == h {
                    h = step * factor;
                }
                self.h = Some(h);
                if last {
                    return Ok(());
                }
            } else {
                h = step * factor.min(1.0);
            }
        }
    }
}
