//! Classical equations of motion for the driven cavity–ancilla pair in the
//! frame rotating at the drive frequency:
//!
//! ```text
//! dα/dt = −[κ_a/2 − i(ω_d − ω̄_a)] α − i g_ac γ + i U_a |α|² α
//! dγ/dt = −[κ_c/2 − i(ω_d − ω_c)] γ − i Ω_c − i g_ac α
//! ```
//!
//! The state is packed as `[Re α, Im α, Re γ, Im γ]`.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::model::{QubitState, SystemParams};

/// Packed real state `[Re α, Im α, Re γ, Im γ]`.
pub type State = [f64; 4];

pub fn pack(alpha: Complex64, gamma: Complex64) -> State {
    [alpha.re, alpha.im, gamma.re, gamma.im]
}

pub fn unpack(y: &State) -> (Complex64, Complex64) {
    (Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]))
}

/// Frozen coefficients of the equations of motion for one qubit state and
/// drive frequency. The drive amplitude is supplied per evaluation so a
/// time-dependent envelope can be applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eom {
    pub half_kappa_a: f64,
    pub half_kappa_c: f64,
    /// `ω_d − ω̄_a`
    pub delta_a: f64,
    /// `ω_d − ω_c`
    pub delta_c: f64,
    pub g_ac: f64,
    pub u_a: f64,
}

impl Eom {
    pub fn new(sys: &SystemParams, eta: QubitState, omega_d: f64) -> Self {
        Self {
            half_kappa_a: 0.5 * sys.kappa_a,
            half_kappa_c: 0.5 * sys.kappa_c,
            delta_a: omega_d - sys.shifted_ancilla_frequency(Some(eta)),
            delta_c: omega_d - sys.omega_c,
            g_ac: sys.g_ac,
            u_a: sys.u_a,
        }
    }

    #[inline]
    pub fn derivative(&self, amplitude: f64, y: &State) -> State {
        let [ar, ai, cr, ci] = *y;
        let n = ar * ar + ai * ai;
        // Effective ancilla detuning including the Kerr pull.
        let det_a = self.delta_a + self.u_a * n;
        [
            -self.half_kappa_a * ar - det_a * ai + self.g_ac * ci,
            -self.half_kappa_a * ai + det_a * ar - self.g_ac * cr,
            -self.half_kappa_c * cr - self.delta_c * ci + self.g_ac * ai,
            -self.half_kappa_c * ci + self.delta_c * cr - amplitude - self.g_ac * ar,
        ]
    }

    /// Jacobian of [`Eom::derivative`] with respect to the packed state.
    pub fn jacobian(&self, y: &State) -> Matrix4<f64> {
        let [ar, ai, _, _] = *y;
        let n = ar * ar + ai * ai;
        // δα̇ ⊃ k δα + m δα*, k = −κ_a/2 + i(Δ_a + 2U|α|²), m = iUα².
        let kr = -self.half_kappa_a;
        let ki = self.delta_a + 2.0 * self.u_a * n;
        let mr = -self.u_a * 2.0 * ar * ai;
        let mi = self.u_a * (ar * ar - ai * ai);
        let g = self.g_ac;
        let hc = self.half_kappa_c;
        let dc = self.delta_c;
        Matrix4::new(
            kr + mr,
            -ki + mi,
            0.0,
            g, //
            ki + mi,
            kr - mr,
            -g,
            0.0, //
            0.0,
            g,
            -hc,
            -dc, //
            -g,
            0.0,
            dc,
            -hc,
        )
    }

    /// Complex residuals of the two steady-state equations.
    pub fn residual(&self, amplitude: f64, alpha: Complex64, gamma: Complex64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        let cavity = Complex64::new(self.half_kappa_c, -self.delta_c) * gamma + i * self.g_ac * alpha + i * amplitude;
        let ancilla = Complex64::new(self.half_kappa_a, -(self.delta_a + self.u_a * alpha.norm_sqr())) * alpha
            + i * self.g_ac * gamma;
        (cavity, ancilla)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::flux5;
    use crate::units::{ghz, mhz};

    #[test]
    fn derivative_matches_complex_form() {
        let sys = flux5();
        let eom = Eom::new(&sys, QubitState::Excited, ghz(7.5));
        let alpha = Complex64::new(0.7, -1.3);
        let gamma = Complex64::new(-0.4, 0.9);
        let amp = mhz(40.0);
        let i = Complex64::i();
        let da = -(Complex64::new(eom.half_kappa_a, -eom.delta_a)) * alpha - i * eom.g_ac * gamma
            + i * eom.u_a * alpha.norm_sqr() * alpha;
        let dc = -(Complex64::new(eom.half_kappa_c, -eom.delta_c)) * gamma - i * amp - i * eom.g_ac * alpha;
        let d = eom.derivative(amp, &pack(alpha, gamma));
        let scale = da.norm().max(dc.norm());
        for (x, y) in d.iter().zip([da.re, da.im, dc.re, dc.im]) {
            assert!((x - y).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sys = flux5();
        let eom = Eom::new(&sys, QubitState::Ground, ghz(7.52));
        let y = [1.1, -0.6, 0.3, 2.0];
        let amp = mhz(60.0);
        let jac = eom.jacobian(&y);
        let h = 1e-6;
        for col in 0..4 {
            let mut yp = y;
            let mut ym = y;
            yp[col] += h;
            ym[col] -= h;
            let fp = eom.derivative(amp, &yp);
            let fm = eom.derivative(amp, &ym);
            for row in 0..4 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let scale = jac.abs().max();
                assert!(
                    (fd - jac[(row, col)]).abs() < 1e-6 * scale,
                    "({row},{col}) fd {fd} vs {}",
                    jac[(row, col)]
                );
            }
        }
    }
}
