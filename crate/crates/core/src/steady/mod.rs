//! Quasi-steady states of the driven system.
//!
//! Two descriptions are provided: the full cavity–ancilla pair, reduced to a
//! single photon-number cubic for the ancilla, and the independent-polariton
//! approximation where each normal mode is its own Duffing oscillator.

pub mod cubic;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eom::{pack, Eom};
use crate::model::{shifted_polariton_frequency, ModelError, Polariton, PolaritonParams, QubitState, SystemParams};

pub use cubic::{duffing_cubic_photon_numbers, CubicCoefficients, CubicRoot, RootStability};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("unphysical damping: effective A = {a} must be > 0")]
    UnphysicalDamping { a: f64 },
    #[error("undefined proportion: zero total population")]
    UndefinedProportion,
    #[error("no stable branch found")]
    NoStableBranch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Coherent cavity drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Drive angular frequency (rad/s).
    pub omega_d: f64,
    /// Drive amplitude Ω_c (rad/s).
    pub amplitude: f64,
}

impl DriveSpec {
    pub fn new(omega_d: f64, amplitude: f64) -> Self {
        Self { omega_d, amplitude }
    }
}

/// One steady-state solution of the coupled cavity–ancilla equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateBranch {
    pub alpha: Complex64,
    pub gamma: Complex64,
    pub n_a: f64,
    pub n_c: f64,
    pub stable: bool,
    /// Set when a Jacobian eigenvalue or the cubic discriminant sits at the
    /// marginal tolerance.
    pub marginal: bool,
    /// Transmitted field `√κ_c γ` (√(photons/s)).
    pub c_out: Complex64,
}

/// Ancilla cubic coefficients after eliminating the cavity field. Also
/// returns `z = g_ac / [κ_c/2 − i(ω_d − ω_c)]`.
pub fn coupled_coefficients(sys: &SystemParams, eta: QubitState, drive: &DriveSpec) -> (CubicCoefficients, Complex64) {
    let z = sys.g_ac / Complex64::new(0.5 * sys.kappa_c, -(drive.omega_d - sys.omega_c));
    let omega_a = sys.shifted_ancilla_frequency(Some(eta));
    let coef = CubicCoefficients {
        a: 0.5 * sys.kappa_a + sys.g_ac * z.re,
        b: drive.omega_d - omega_a - sys.g_ac * z.im,
        c: sys.u_a,
        d: -z * drive.amplitude,
    };
    (coef, z)
}

fn cavity_from_ancilla(sys: &SystemParams, drive: &DriveSpec, alpha: Complex64) -> Complex64 {
    let denom = Complex64::new(0.5 * sys.kappa_c, -(drive.omega_d - sys.omega_c));
    -Complex64::i() * (drive.amplitude + sys.g_ac * alpha) / denom
}

/// All steady states, ordered by ancilla photon number. Stability comes from
/// the Jacobian; the cubic ordering rule is only used for the marginal flag.
pub fn coupled_steady_states(
    sys: &SystemParams,
    eta: QubitState,
    drive: &DriveSpec,
) -> Result<Vec<SteadyStateBranch>, SteadyError> {
    let (coef, _) = coupled_coefficients(sys, eta, drive);
    let roots = duffing_cubic_photon_numbers(&coef)?;
    let sqrt_kc = sys.kappa_c.sqrt();
    Ok(roots
        .into_iter()
        .map(|root| {
            let alpha = coef.amplitude(root.x);
            let gamma = cavity_from_ancilla(sys, drive, alpha);
            let mut branch = SteadyStateBranch {
                alpha,
                gamma,
                n_a: alpha.norm_sqr(),
                n_c: gamma.norm_sqr(),
                stable: root.stability == RootStability::Stable,
                marginal: root.stability == RootStability::Marginal,
                c_out: sqrt_kc * gamma,
            };
            let verdict = jacobian_stability(sys, eta, drive, &branch);
            branch.stable = verdict.stable;
            branch.marginal |= verdict.marginal;
            branch
        })
        .collect())
}

/// Outcome of the linear stability analysis around a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub marginal: bool,
    /// Largest real part among the four eigenvalues (1/s).
    pub max_real: f64,
}

/// Linearises the equations of motion around a branch in the 4-dimensional
/// real representation.
pub fn jacobian_stability(
    sys: &SystemParams,
    eta: QubitState,
    drive: &DriveSpec,
    branch: &SteadyStateBranch,
) -> StabilityVerdict {
    let eom = Eom::new(sys, eta, drive.omega_d);
    let jac = eom.jacobian(&pack(branch.alpha, branch.gamma));
    let max_real = jac
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-6 * sys.kappa_c;
    StabilityVerdict {
        stable: max_real < 0.0,
        marginal: max_real.abs() <= tol,
        max_real,
    }
}

/// Largest residual of the two fixed-point equations.
pub fn fixed_point_residual(sys: &SystemParams, eta: QubitState, drive: &DriveSpec, branch: &SteadyStateBranch) -> f64 {
    let eom = Eom::new(sys, eta, drive.omega_d);
    let (r1, r2) = eom.residual(drive.amplitude, branch.alpha, branch.gamma);
    r1.norm().max(r2.norm())
}

/// Stable branch reached by ramping the drive up from zero: the stable
/// branch with the fewest ancilla photons.
pub fn ramp_up_branch(
    sys: &SystemParams,
    eta: QubitState,
    drive: &DriveSpec,
) -> Result<SteadyStateBranch, SteadyError> {
    coupled_steady_states(sys, eta, drive)?
        .into_iter()
        .find(|b| b.stable || b.marginal)
        .ok_or(SteadyError::NoStableBranch)
}

/// Stable branch followed when ramping down from a strong drive: the stable
/// branch with the most ancilla photons.
pub fn ramp_down_branch(
    sys: &SystemParams,
    eta: QubitState,
    drive: &DriveSpec,
) -> Result<SteadyStateBranch, SteadyError> {
    coupled_steady_states(sys, eta, drive)?
        .into_iter()
        .rev()
        .find(|b| b.stable || b.marginal)
        .ok_or(SteadyError::NoStableBranch)
}

/// Number of stable steady states (2 inside a bistable wedge).
pub fn stable_branch_count(sys: &SystemParams, eta: QubitState, drive: &DriveSpec) -> Result<usize, SteadyError> {
    Ok(coupled_steady_states(sys, eta, drive)?
        .iter()
        .filter(|b| b.stable)
        .count())
}

/// Single-mode solution in the independent-polariton picture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonBranch {
    pub amplitude: Complex64,
    pub n: f64,
    pub stable: bool,
    pub marginal: bool,
}

/// Solves `[κ_j/2 − i(ω_d − ω̄_j + U_jj |c_j|²)] c_j = −i Ω_j` for one
/// polariton, neglecting the inter-polariton cross-Kerr.
pub fn polariton_steady_state(
    pp: &PolaritonParams,
    j: Polariton,
    eta: QubitState,
    drive: &DriveSpec,
) -> Result<Vec<PolaritonBranch>, SteadyError> {
    let coef = CubicCoefficients {
        a: 0.5 * pp.kappa(j),
        b: drive.omega_d - shifted_polariton_frequency(pp, j, eta),
        c: pp.self_kerr(j),
        d: Complex64::new(0.0, -pp.drive_weight(j) * drive.amplitude),
    };
    Ok(duffing_cubic_photon_numbers(&coef)?
        .into_iter()
        .map(|root| PolaritonBranch {
            amplitude: coef.amplitude(root.x),
            n: root.x,
            stable: root.stability == RootStability::Stable,
            marginal: root.stability == RootStability::Marginal,
        })
        .collect())
}

/// `√κ_c γ`.
pub fn output_field(kappa_c: f64, gamma: Complex64) -> Complex64 {
    kappa_c.sqrt() * gamma
}

/// `√κ_c (sin θ c_u + cos θ c_l)`.
pub fn polariton_output_field(kappa_c: f64, theta: f64, c_u: Complex64, c_l: Complex64) -> Complex64 {
    kappa_c.sqrt() * (theta.sin() * c_u + theta.cos() * c_l)
}

/// Upper/lower polariton amplitudes `(c_u, c_l)` of a coupled-basis branch,
/// using the mixing angle for qubit state `eta`.
pub fn polariton_components(sys: &SystemParams, eta: QubitState, branch: &SteadyStateBranch) -> (Complex64, Complex64) {
    let theta = crate::model::hybridization_angle(sys.detuning(Some(eta)), sys.g_ac);
    let (s, c) = theta.sin_cos();
    (c * branch.alpha + s * branch.gamma, c * branch.gamma - s * branch.alpha)
}

/// `D_eg = |⟨c_out⟩_e − ⟨c_out⟩_g|`, each taken on the ramp-up branch.
pub fn pointer_distance(sys: &SystemParams, drive: &DriveSpec) -> Result<f64, SteadyError> {
    let e = ramp_up_branch(sys, QubitState::Excited, drive)?;
    let g = ramp_up_branch(sys, QubitState::Ground, drive)?;
    Ok((e.c_out - g.c_out).norm())
}

/// Ancilla and cavity population fractions `(p_a, p_c)`.
pub fn proportions(branch: &SteadyStateBranch) -> Result<(f64, f64), SteadyError> {
    let total = branch.n_a + branch.n_c;
    if !(total > 0.0) {
        return Err(SteadyError::UndefinedProportion);
    }
    Ok((branch.n_a / total, branch.n_c / total))
}

/// Drive amplitudes bounding a bistable wedge at fixed drive frequency,
/// together with the transmitted field on each branch at its fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPoints {
    /// Amplitude where the high branch ends during a ramp down.
    pub b_down: f64,
    /// Amplitude where the low branch ends during a ramp up.
    pub b_up: f64,
    /// `c_out` of the low branch at `b_up`.
    pub low_fold_output: Complex64,
    /// `c_out` of the high branch at `b_down`.
    pub high_fold_output: Complex64,
}

/// Fold amplitudes of the coupled system, or `None` when the response is
/// single valued at every drive amplitude.
pub fn fold_points(sys: &SystemParams, eta: QubitState, omega_d: f64) -> Option<FoldPoints> {
    let probe = DriveSpec::new(omega_d, 1.0);
    let (coef, z) = coupled_coefficients(sys, eta, &probe);
    let (x_low, x_high) = coef.fold_photon_numbers()?;
    let amplitude_at = |x: f64| {
        let d_norm = (coef.residual(x) + coef.d.norm_sqr()).max(0.0).sqrt();
        d_norm / z.norm()
    };
    let output_at = |x: f64, amplitude: f64| {
        let drive = DriveSpec::new(omega_d, amplitude);
        let (k, _) = coupled_coefficients(sys, eta, &drive);
        let alpha = k.amplitude(x);
        output_field(sys.kappa_c, cavity_from_ancilla(sys, &drive, alpha))
    };
    let b_up = amplitude_at(x_low);
    let b_down = amplitude_at(x_high);
    Some(FoldPoints {
        b_down,
        b_up,
        low_fold_output: output_at(x_low, b_up),
        high_fold_output: output_at(x_high, b_down),
    })
}
