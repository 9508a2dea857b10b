//! Parameter algebra for the cavity–ancilla–qubit circuit.
//!
//! The bare circuit is a harmonic cavity mode strongly coupled (rate `g_ac`)
//! to a weakly anharmonic ancilla mode, which in turn carries a cross-Kerr
//! coupling `g_zz` to a two-level qubit. Diagonalising the cavity–ancilla
//! block gives an upper and a lower polariton, each inheriting a share of the
//! ancilla nonlinearity and of both decay channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("linear mode has no bistability threshold")]
    NoBistabilityThreshold,
}

/// Bare circuit constants. All rates are angular (rad/s), times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_q: f64,
    pub omega_a: f64,
    pub omega_c: f64,
    /// Ancilla self-Kerr.
    pub u_a: f64,
    /// Qubit–ancilla cross-Kerr.
    pub g_zz: f64,
    /// Transverse cavity–ancilla coupling.
    pub g_ac: f64,
    pub kappa_a: f64,
    pub kappa_c: f64,
    pub t1: f64,
    pub t2: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("omega_q", self.omega_q),
            ("omega_a", self.omega_a),
            ("omega_c", self.omega_c),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        let non_negative = [
            ("u_a", self.u_a),
            ("g_zz", self.g_zz),
            ("g_ac", self.g_ac),
            ("kappa_a", self.kappa_a),
            ("kappa_c", self.kappa_c),
            ("t1", self.t1),
            ("t2", self.t2),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if self.u_a >= self.omega_a {
            return Err(ModelError::InvalidParameter {
                name: "u_a",
                reason: "self-Kerr must stay below the ancilla frequency".into(),
            });
        }
        Ok(())
    }

    /// Ancilla frequency including the qubit-state dependent cross-Kerr
    /// shift, `omega_a - g_zz <sigma_z>`. `None` leaves it unshifted.
    pub fn shifted_ancilla_frequency(&self, eta: Option<QubitState>) -> f64 {
        match eta {
            Some(q) => self.omega_a - self.g_zz * q.sigma_z(),
            None => self.omega_a,
        }
    }

    /// Ancilla–cavity detuning seen by the hybridisation for a qubit state.
    pub fn detuning(&self, eta: Option<QubitState>) -> f64 {
        self.shifted_ancilla_frequency(eta) - self.omega_c
    }
}

/// Qubit basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitState {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl QubitState {
    pub const BOTH: [QubitState; 2] = [QubitState::Ground, QubitState::Excited];

    /// `<sigma_z>`: +1 for the excited state, -1 for the ground state.
    pub fn sigma_z(self) -> f64 {
        match self {
            QubitState::Ground => -1.0,
            QubitState::Excited => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            QubitState::Ground => QubitState::Excited,
            QubitState::Excited => QubitState::Ground,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QubitState::Ground => "g",
            QubitState::Excited => "e",
        }
    }
}

impl std::fmt::Display for QubitState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for QubitState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "g" | "ground" => Ok(QubitState::Ground),
            "e" | "excited" => Ok(QubitState::Excited),
            other => Err(format!("unknown qubit state `{other}` (expected g or e)")),
        }
    }
}

/// Polariton branch label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polariton {
    Upper,
    Lower,
}

/// Normal-mode parameters of the hybridised cavity–ancilla system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonParams {
    pub theta: f64,
    pub omega_u: f64,
    pub omega_l: f64,
    pub chi_u: f64,
    pub chi_l: f64,
    pub u_uu: f64,
    pub u_ll: f64,
    pub u_ul: f64,
    pub kappa_u: f64,
    pub kappa_l: f64,
}

impl PolaritonParams {
    pub fn frequency(&self, j: Polariton) -> f64 {
        match j {
            Polariton::Upper => self.omega_u,
            Polariton::Lower => self.omega_l,
        }
    }

    pub fn chi(&self, j: Polariton) -> f64 {
        match j {
            Polariton::Upper => self.chi_u,
            Polariton::Lower => self.chi_l,
        }
    }

    pub fn self_kerr(&self, j: Polariton) -> f64 {
        match j {
            Polariton::Upper => self.u_uu,
            Polariton::Lower => self.u_ll,
        }
    }

    pub fn kappa(&self, j: Polariton) -> f64 {
        match j {
            Polariton::Upper => self.kappa_u,
            Polariton::Lower => self.kappa_l,
        }
    }

    /// Fraction of the cavity drive amplitude reaching polariton `j`.
    pub fn drive_weight(&self, j: Polariton) -> f64 {
        match j {
            Polariton::Upper => self.theta.sin(),
            Polariton::Lower => self.theta.cos(),
        }
    }
}

/// Cavity–ancilla mixing angle, `tan 2θ = 2 g_ac / Δ_ac`, taken on the
/// branch `θ = atan2(2 g_ac, Δ_ac) / 2` so it varies continuously through
/// resonance and stays in `(0, π/2)` for `g_ac > 0`.
pub fn hybridization_angle(delta_ac: f64, g_ac: f64) -> f64 {
    0.5 * (2.0 * g_ac).atan2(delta_ac)
}

/// Kerr, cross-Kerr and decay rates inherited at mixing angle `theta`.
/// The polariton frequencies use the unshifted ancilla frequency.
pub fn polariton_params_at_angle(sys: &SystemParams, theta: f64) -> PolaritonParams {
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let sin_2t = (2.0 * theta).sin();
    PolaritonParams {
        theta,
        omega_u: s2 * sys.omega_c + c2 * sys.omega_a + sin_2t * sys.g_ac,
        omega_l: c2 * sys.omega_c + s2 * sys.omega_a - sin_2t * sys.g_ac,
        chi_u: sys.g_zz * c2,
        chi_l: sys.g_zz * s2,
        u_uu: sys.u_a * c2 * c2,
        u_ll: sys.u_a * s2 * s2,
        u_ul: 0.5 * sin_2t * sin_2t * sys.u_a,
        kappa_u: sys.kappa_c * s2 + sys.kappa_a * c2,
        kappa_l: sys.kappa_c * c2 + sys.kappa_a * s2,
    }
}

/// Polariton parameters for a qubit state. With `eta` given, the mixing angle
/// is taken from the qubit-shifted ancilla detuning; the remaining qubit
/// dependence of the mode frequencies is carried by
/// [`shifted_polariton_frequency`].
pub fn polariton_params(sys: &SystemParams, eta: Option<QubitState>) -> PolaritonParams {
    let theta = hybridization_angle(sys.detuning(eta), sys.g_ac);
    polariton_params_at_angle(sys, theta)
}

/// `ω̄_j = ω_j − χ_j <σ_z>`.
pub fn shifted_polariton_frequency(pp: &PolaritonParams, j: Polariton, eta: QubitState) -> f64 {
    pp.frequency(j) - pp.chi(j) * eta.sigma_z()
}

/// `N_crit = κ / (3√3 U)`.
pub fn critical_photon_number(kappa: f64, u: f64) -> Result<f64, ModelError> {
    if u == 0.0 {
        return Err(ModelError::NoBistabilityThreshold);
    }
    Ok(kappa / (3.0 * 3f64.sqrt() * u))
}

/// One row of the parameter-versus-angle curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub theta: f64,
    pub chi_u: f64,
    pub chi_l: f64,
    pub u_uu: f64,
    pub u_ll: f64,
    pub u_ul: f64,
    pub kappa_u: f64,
    pub kappa_l: f64,
}

pub fn parameter_curves(sys: &SystemParams, theta_grid: &[f64]) -> Result<Vec<CurveRow>, ModelError> {
    if theta_grid.is_empty() {
        return Err(ModelError::InvalidParameter {
            name: "theta_grid",
            reason: "grid is empty".into(),
        });
    }
    theta_grid
        .iter()
        .map(|&theta| {
            if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
                return Err(ModelError::InvalidParameter {
                    name: "theta_grid",
                    reason: format!("angle {theta} outside (0, pi/2)"),
                });
            }
            let p = polariton_params_at_angle(sys, theta);
            Ok(CurveRow {
                theta,
                chi_u: p.chi_u,
                chi_l: p.chi_l,
                u_uu: p.u_uu,
                u_ll: p.u_ll,
                u_ul: p.u_ul,
                kappa_u: p.kappa_u,
                kappa_l: p.kappa_l,
            })
        })
        .collect()
}

/// Reference parameter sets.
pub mod fixtures {
    use super::SystemParams;
    use crate::units::{ghz, mhz};

    /// Working point near resonance used for the bifurcation readout.
    ///
    /// Kerr, cross-Kerr and decay rates are the published fit values.
    /// `omega_a`, `omega_c` and `g_ac` are fitted so that the linear-regime
    /// pointer distance peaks at 6.942, 6.963, 7.552 and 7.599 GHz.
    #[allow(clippy::approx_constant)]
    pub fn flux5() -> SystemParams {
        SystemParams {
            omega_q: ghz(6.283),
            omega_a: ghz(7.3748),
            omega_c: ghz(7.1531),
            u_a: mhz(13.5),
            g_zz: mhz(34.5),
            g_ac: mhz(290.7),
            kappa_a: mhz(5.6),
            kappa_c: mhz(12.7),
            t1: 3.3e-6,
            t2: 3.3e-6,
        }
    }

    /// Bare rates with the mixing angle reported for the working point.
    pub const FLUX5_THETA: f64 = 0.602;
}

/// Rates in MHz (ordinary frequency) for display.
pub fn rates_mhz(p: &PolaritonParams) -> [(&'static str, f64); 9] {
    use crate::units::to_mhz;
    [
        ("omega_u", to_mhz(p.omega_u)),
        ("omega_l", to_mhz(p.omega_l)),
        ("chi_u", to_mhz(p.chi_u)),
        ("chi_l", to_mhz(p.chi_l)),
        ("u_uu", to_mhz(p.u_uu)),
        ("u_ll", to_mhz(p.u_ll)),
        ("u_ul", to_mhz(p.u_ul)),
        ("kappa_u", to_mhz(p.kappa_u)),
        ("kappa_l", to_mhz(p.kappa_l)),
    ]
}
