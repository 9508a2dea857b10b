//! Photon-number cubic of a driven Kerr (Duffing) mode.
//!
//! A single-mode steady state `[A − i(B + C|α|²)] α = D` has
//! `x = |α|²` satisfying
//!
//! ```text
//! C² x³ + 2BC x² + (A² + B²) x − |D|² = 0.
//! ```
//!
//! The cubic is rescaled to `s = C x / A`, which leaves
//! `s³ + 2b s² + (1 + b²) s − d = 0` with `b = B/A`, `d = |D|² C / A³`, and is
//! solved in closed form with a Newton polish per root.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SteadyError;

/// Relative discriminant below which two roots are considered merged.
pub const MARGINAL_DISCRIMINANT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootStability {
    Stable,
    Unstable,
    /// Two roots merged at a fold.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoot {
    pub x: f64,
    pub stability: RootStability,
}

impl CubicCoefficients {
    /// `x (A² + (B + C x)²) − |D|²`.
    pub fn residual(&self, x: f64) -> f64 {
        let detuning = self.b + self.c * x;
        x * (self.a * self.a + detuning * detuning) - self.d.norm_sqr()
    }

    /// Slope of the residual; positive exactly on the stable outer branches.
    pub fn slope(&self, x: f64) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        3.0 * c * c * x * x + 4.0 * b * c * x + a * a + b * b
    }

    /// Field amplitude `D / [A − i(B + C x)]` for a photon-number root.
    pub fn amplitude(&self, x: f64) -> Complex64 {
        self.d / Complex64::new(self.a, -(self.b + self.c * x))
    }

    /// Photon numbers `(x_low_fold, x_high_fold)` at which the low and high
    /// branches terminate, if the response can be bistable at all.
    pub fn fold_photon_numbers(&self) -> Option<(f64, f64)> {
        let (a, b, c) = (self.a, self.b, self.c);
        if c <= 0.0 || b >= 0.0 {
            return None;
        }
        let disc = b * b - 3.0 * a * a;
        if disc <= 0.0 {
            return None;
        }
        let root = disc.sqrt();
        Some(((-2.0 * b - root) / (3.0 * c), (-2.0 * b + root) / (3.0 * c)))
    }
}

pub fn duffing_cubic_photon_numbers(coef: &CubicCoefficients) -> Result<Vec<CubicRoot>, SteadyError> {
    let CubicCoefficients { a, b, c, d } = *coef;
    if !(a > 0.0) {
        return Err(SteadyError::UnphysicalDamping { a });
    }
    let d2 = d.norm_sqr();
    if d2 == 0.0 {
        return Ok(vec![CubicRoot {
            x: 0.0,
            stability: RootStability::Stable,
        }]);
    }
    if c == 0.0 {
        return Ok(vec![CubicRoot {
            x: d2 / (a * a + b * b),
            stability: RootStability::Stable,
        }]);
    }

    let bn = b / a;
    let dn = d2 * c / (a * a * a);
    let scale = c.abs() / a;
    let poly = NormalizedCubic { b: bn, d: dn };

    let roots: Vec<CubicRoot> = poly
        .solve()
        .into_iter()
        .map(|(s, stability)| CubicRoot {
            x: (s / scale).max(0.0),
            stability,
        })
        .collect();
    Ok(roots)
}

/// `s³ + 2b s² + (1 + b²) s − d`.
struct NormalizedCubic {
    b: f64,
    d: f64,
}

impl NormalizedCubic {
    fn eval(&self, s: f64) -> f64 {
        ((s + 2.0 * self.b) * s + 1.0 + self.b * self.b) * s - self.d
    }

    fn deriv(&self, s: f64) -> f64 {
        (3.0 * s + 4.0 * self.b) * s + 1.0 + self.b * self.b
    }

    fn polish(&self, mut s: f64) -> f64 {
        let mut f = self.eval(s);
        for _ in 0..8 {
            let df = self.deriv(s);
            if df == 0.0 || f == 0.0 {
                break;
            }
            let next = s - f / df;
            let fnext = self.eval(next);
            if fnext.abs() >= f.abs() {
                break;
            }
            s = next;
            f = fnext;
        }
        s
    }

    /// Double root of a marginal cubic: the critical point nearest `guess`.
    fn critical_point_near(&self, guess: f64) -> f64 {
        let disc = self.b * self.b - 3.0;
        if disc <= 0.0 {
            return -2.0 * self.b / 3.0;
        }
        let r = disc.sqrt();
        let lo = (-2.0 * self.b - r) / 3.0;
        let hi = (-2.0 * self.b + r) / 3.0;
        if (guess - lo).abs() <= (guess - hi).abs() {
            lo
        } else {
            hi
        }
    }

    fn solve(&self) -> Vec<(f64, RootStability)> {
        let a2 = 2.0 * self.b;
        let a1 = 1.0 + self.b * self.b;
        let a0 = -self.d;
        let shift = a2 / 3.0;
        let p = a1 - a2 * a2 / 3.0;
        let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;

        let q_term = 0.25 * q * q;
        let p_term = p * p * p / 27.0;
        let h = q_term + p_term;
        let norm = q_term + p_term.abs();
        let rel = if norm > 0.0 { h / norm } else { 0.0 };

        if rel.abs() < MARGINAL_DISCRIMINANT {
            if p.abs() < f64::EPSILON * (1.0 + self.b * self.b) {
                // Cusp: triple root.
                let s = self.critical_point_near(-shift);
                return vec![(s, RootStability::Marginal)];
            }
            let simple = self.polish(3.0 * q / p - shift);
            let double = self.critical_point_near(-1.5 * q / p - shift);
            let mut out = vec![(simple, RootStability::Stable), (double, RootStability::Marginal)];
            out.sort_by(|x, y| x.0.total_cmp(&y.0));
            return out;
        }

        if h > 0.0 {
            let sh = h.sqrt();
            let w = (-0.5 * q - q.signum() * sh).cbrt();
            let t = if w != 0.0 { w - p / (3.0 * w) } else { 0.0 };
            return vec![(self.polish(t - shift), RootStability::Stable)];
        }

        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut roots: Vec<f64> = (0..3)
            .map(|k| {
                let t = m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                self.polish(t - shift)
            })
            .collect();
        roots.sort_by(|x, y| x.total_cmp(y));
        vec![
            (roots[0], RootStability::Stable),
            (roots[1], RootStability::Unstable),
            (roots[2], RootStability::Stable),
        ]
    }
}
