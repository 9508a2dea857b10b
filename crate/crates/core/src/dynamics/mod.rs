//! Time-domain integration of the classical equations of motion, ramp
//! hysteresis and bistability maps.

pub mod ode;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eom::{pack, unpack, Eom, State};
use crate::model::{QubitState, SystemParams};
use crate::steady::{
    coupled_coefficients, coupled_steady_states, fold_points, ramp_down_branch, DriveSpec, SteadyError,
};
pub use ode::{Dopri5, OdeError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("integration failed at t = {t:e} s: {source}")]
    Integration { t: f64, source: OdeError },
    #[error("empty grid")]
    EmptyGrid,
    #[error(transparent)]
    Steady(#[from] SteadyError),
}

/// Piecewise-linear drive envelope at a fixed carrier frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProtocol {
    pub omega_d: f64,
    /// `(time s, Ω_c rad/s)` breakpoints starting at `t = 0`.
    pub envelope: Vec<(f64, f64)>,
}

impl DriveProtocol {
    pub fn new(omega_d: f64, envelope: Vec<(f64, f64)>) -> Result<Self, DynamicsError> {
        let p = Self { omega_d, envelope };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidProtocol(m.to_string()));
        if !self.omega_d.is_finite() || self.omega_d <= 0.0 {
            return bad("drive frequency must be positive");
        }
        if self.envelope.len() < 2 {
            return bad("envelope needs at least two breakpoints");
        }
        if self.envelope[0].0 != 0.0 {
            return bad("envelope must start at t = 0");
        }
        for w in self.envelope.windows(2) {
            if !(w[1].0 > w[0].0) || !w[1].0.is_finite() {
                return bad("breakpoint times must be strictly increasing");
            }
        }
        if self.envelope.iter().any(|&(_, a)| !(a >= 0.0) || !a.is_finite()) {
            return bad("amplitudes must be finite and non-negative");
        }
        Ok(())
    }

    /// Constant amplitude from `t = 0`.
    pub fn constant(omega_d: f64, amplitude: f64, duration: f64) -> Result<Self, DynamicsError> {
        Self::new(omega_d, vec![(0.0, amplitude), (duration, amplitude)])
    }

    /// Linear rise to `amplitude` over `rise`, then a flat top until `length`.
    pub fn square(omega_d: f64, amplitude: f64, rise: f64, length: f64) -> Result<Self, DynamicsError> {
        if rise <= 0.0 {
            return Self::constant(omega_d, amplitude, length);
        }
        Self::new(omega_d, vec![(0.0, 0.0), (rise, amplitude), (length, amplitude)])
    }

    pub fn duration(&self) -> f64 {
        self.envelope.last().map(|p| p.0).unwrap_or(0.0)
    }

    pub fn amplitude_at(&self, t: f64) -> f64 {
        let e = &self.envelope;
        if t <= e[0].0 {
            return e[0].1;
        }
        for w in e.windows(2) {
            if t <= w[1].0 {
                let f = (t - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + f * (w[1].1 - w[0].1);
            }
        }
        e[e.len() - 1].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of stored samples (s).
    pub sample_interval: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        let tol = Tolerance::default();
        Self {
            rtol: tol.rtol,
            atol: tol.atol,
            sample_interval: 1e-9,
        }
    }
}

impl IntegratorSettings {
    fn tolerance(&self) -> Tolerance {
        Tolerance {
            rtol: self.rtol,
            atol: self.atol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub gamma: Vec<Complex64>,
    pub kappa_c: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn c_out(&self, i: usize) -> Complex64 {
        self.kappa_c.sqrt() * self.gamma[i]
    }

    pub fn c_out_magnitude(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.c_out(i).norm()).collect()
    }

    pub fn final_state(&self) -> (Complex64, Complex64) {
        let n = self.len() - 1;
        (self.alpha[n], self.gamma[n])
    }

    /// Trapezoidal time average of `c_out` over `[t0, t1]`, using the stored
    /// samples inside the window.
    pub fn mean_output(&self, t0: f64, t1: f64) -> Complex64 {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= t0 - 1e-15 && self.times[i] <= t1 + 1e-15)
            .collect();
        match idx.len() {
            0 => Complex64::new(0.0, 0.0),
            1 => self.c_out(idx[0]),
            _ => {
                let mut acc = Complex64::new(0.0, 0.0);
                for w in idx.windows(2) {
                    let dt = self.times[w[1]] - self.times[w[0]];
                    acc += 0.5 * dt * (self.c_out(w[0]) + self.c_out(w[1]));
                }
                acc / (self.times[idx[idx.len() - 1]] - self.times[idx[0]])
            }
        }
    }
}

/// Integrates with a fixed qubit state.
pub fn integrate(
    sys: &SystemParams,
    eta: QubitState,
    protocol: &DriveProtocol,
    initial: (Complex64, Complex64),
    settings: &IntegratorSettings,
) -> Result<Trajectory, DynamicsError> {
    integrate_with_jumps(sys, eta, &[], protocol, initial, settings)
}

/// Integrates while the qubit state toggles at each of `jump_times`.
pub fn integrate_with_jumps(
    sys: &SystemParams,
    eta0: QubitState,
    jump_times: &[f64],
    protocol: &DriveProtocol,
    initial: (Complex64, Complex64),
    settings: &IntegratorSettings,
) -> Result<Trajectory, DynamicsError> {
    protocol.validate()?;
    if !(settings.sample_interval > 0.0) {
        return Err(DynamicsError::InvalidProtocol(
            "sample interval must be positive".into(),
        ));
    }
    let duration = protocol.duration();
    let dt = settings.sample_interval;
    let n_samples = (duration / dt).floor() as usize;
    let merge = 1e-12 * duration;

    // Stops: samples, envelope breakpoints and jumps, with the last two
    // forcing exact landings since the right-hand side is not smooth there.
    let mut stops: Vec<(f64, bool)> = (0..=n_samples).map(|k| (k as f64 * dt, true)).collect();
    if duration - n_samples as f64 * dt > merge {
        stops.push((duration, true));
    }
    for &(t, _) in &protocol.envelope {
        stops.push((t, false));
    }
    for &t in jump_times {
        if t > 0.0 && t < duration {
            stops.push((t, false));
        }
    }
    stops.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(stops.len());
    for (t, sample) in stops {
        match merged.last_mut() {
            Some(last) if (t - last.0).abs() <= merge => {
                // Keep the sample time so the grid does not depend on jumps.
                if sample && !last.1 {
                    last.0 = t;
                }
                last.1 |= sample;
            }
            _ => merged.push((t, sample)),
        }
    }

    let eoms = [
        Eom::new(sys, QubitState::Ground, protocol.omega_d),
        Eom::new(sys, QubitState::Excited, protocol.omega_d),
    ];
    let index = |eta: QubitState| match eta {
        QubitState::Ground => 0,
        QubitState::Excited => 1,
    };
    let mut jumps: Vec<f64> = jump_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < duration)
        .collect();
    jumps.sort_by(f64::total_cmp);
    let mut next_jump = 0;
    let mut eta = eta0;

    let mut y: State = pack(initial.0, initial.1);
    let mut stepper = Dopri5::new(settings.tolerance());
    let cap = merged.iter().filter(|s| s.1).count();
    let mut traj = Trajectory {
        times: Vec::with_capacity(cap),
        alpha: Vec::with_capacity(cap),
        gamma: Vec::with_capacity(cap),
        kappa_c: sys.kappa_c,
    };
    let mut t = 0.0;
    for (i, &(t_stop, sample)) in merged.iter().enumerate() {
        if i > 0 {
            // The envelope is linear between consecutive stops.
            let a0 = protocol.amplitude_at(t);
            let a1 = protocol.amplitude_at(t_stop);
            let (t0, span) = (t, t_stop - t);
            let eom = eoms[index(eta)];
            let f = move |s: f64, y: &State| eom.derivative(a0 + (a1 - a0) * ((s - t0) / span), y);
            stepper
                .advance(&f, t, &mut y, t_stop)
                .map_err(|source| DynamicsError::Integration {
                    t: match source {
                        OdeError::StepUnderflow { t } | OdeError::NonFinite { t } | OdeError::TooManySteps { t } => t,
                    },
                    source,
                })?;
            t = t_stop;
        }
        while next_jump < jumps.len() && (jumps[next_jump] - t).abs() <= merge {
            eta = eta.flipped();
            next_jump += 1;
        }
        if sample {
            let (a, g) = unpack(&y);
            traj.times.push(t);
            traj.alpha.push(a);
            traj.gamma.push(g);
        }
    }
    if let Some(first) = traj.alpha.first_mut() {
        *first = initial.0;
        traj.gamma[0] = initial.1;
    }
    Ok(traj)
}

/// Reference outputs of the low and high branches used by the bifurcation
/// detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchLevels {
    pub low: Complex64,
    pub high: Complex64,
}

impl BranchLevels {
    /// Levels at a drive point, pooled over the qubit states in `etas`: the
    /// brightest low-branch output and the dimmest high-branch output.
    /// Where a branch does not exist its fold output stands in. `None` when
    /// no high branch exists for any state.
    pub fn at(sys: &SystemParams, etas: &[QubitState], drive: &DriveSpec) -> Result<Option<Self>, DynamicsError> {
        let mut low: Option<Complex64> = None;
        let mut high: Option<Complex64> = None;
        let mut low_fold: Option<Complex64> = None;
        let mut high_fold: Option<Complex64> = None;
        let brighter = |cur: Option<Complex64>, c: Complex64| match cur {
            Some(x) if x.norm() >= c.norm() => Some(x),
            _ => Some(c),
        };
        let dimmer = |cur: Option<Complex64>, c: Complex64| match cur {
            Some(x) if x.norm() <= c.norm() => Some(x),
            _ => Some(c),
        };
        for &eta in etas {
            if let Some(f) = fold_points(sys, eta, drive.omega_d) {
                low_fold = brighter(low_fold, f.low_fold_output);
                high_fold = dimmer(high_fold, f.high_fold_output);
            }
            let split = high_branch_photon_threshold(sys, eta, drive);
            for b in coupled_steady_states(sys, eta, drive)?.iter().filter(|b| b.stable) {
                match split {
                    Some(x) if b.n_a > x => high = dimmer(high, b.c_out),
                    _ => low = brighter(low, b.c_out),
                }
            }
        }
        let low = low.or(low_fold);
        let high = high.or(high_fold);
        Ok(match (low, high) {
            (Some(low), Some(high)) => Some(Self { low, high }),
            (None, Some(high)) => Some(Self {
                low: Complex64::new(0.0, 0.0),
                high,
            }),
            _ => None,
        })
    }

    pub fn magnitude_threshold(&self) -> f64 {
        0.5 * (self.low.norm() + self.high.norm())
    }
}

/// Ancilla photon number separating the low from the high branch (the
/// inflection of the response curve), or `None` when the response cannot
/// fold at this drive frequency.
pub fn high_branch_photon_threshold(sys: &SystemParams, eta: QubitState, drive: &DriveSpec) -> Option<f64> {
    let (coef, _) = coupled_coefficients(sys, eta, drive);
    if coef.c <= 0.0 || coef.b >= 0.0 {
        return None;
    }
    Some(-2.0 * coef.b / (3.0 * coef.c))
}

/// Result of running the midpoint detector over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Time of the first sample of the first debounced upward crossing.
    pub first_crossing: Option<f64>,
    pub latched_at_end: bool,
}

pub const DETECTOR_DEBOUNCE: usize = 3;

/// Debounced threshold detector on `|c_out|`.
pub fn detect(traj: &Trajectory, threshold: f64) -> Detection {
    let mut state = false;
    let mut run = 0usize;
    let mut run_start = 0usize;
    let mut first = None;
    for i in 0..traj.len() {
        let above = traj.c_out(i).norm() > threshold;
        if above != state {
            if run == 0 {
                run_start = i;
            }
            run += 1;
            if run >= DETECTOR_DEBOUNCE {
                state = above;
                run = 0;
                if state && first.is_none() {
                    first = Some(traj.times[run_start]);
                }
            }
        } else {
            run = 0;
        }
    }
    Detection {
        first_crossing: first,
        latched_at_end: state,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisSettings {
    pub ramp_time: f64,
    pub hold_time: f64,
    /// Fraction of each hold used for the quasi-steady average.
    pub averaging_fraction: f64,
    /// Peak amplitude of the ramp-down sequence; `None` picks 1.25× the
    /// upper fold amplitude (or the measurement amplitude if larger).
    pub overdrive: Option<f64>,
    pub integrator: IntegratorSettings,
}

impl Default for HysteresisSettings {
    fn default() -> Self {
        Self {
            ramp_time: 500e-9,
            hold_time: 1e-6,
            averaging_fraction: 0.2,
            overdrive: None,
            integrator: IntegratorSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisResult {
    pub c_out_up: Complex64,
    pub c_out_down: Complex64,
    pub d_ud: f64,
    /// The ramp-up ended on the high branch.
    pub bifurcated_up: bool,
    /// The ramp-down fell back to the low branch.
    pub bifurcated_down: bool,
}

fn ends_high(sys: &SystemParams, eta: QubitState, drive: &DriveSpec, traj: &Trajectory) -> bool {
    match high_branch_photon_threshold(sys, eta, drive) {
        Some(x) => traj.final_state().0.norm_sqr() > x,
        None => false,
    }
}

/// Ramp up from zero to `amplitude` and hold; separately, start on the high
/// branch at the overdrive amplitude, ramp down to `amplitude` and hold.
/// Each output is averaged over the end of its hold.
pub fn ramp_hysteresis(
    sys: &SystemParams,
    eta: QubitState,
    omega_d: f64,
    amplitude: f64,
    settings: &HysteresisSettings,
) -> Result<HysteresisResult, DynamicsError> {
    let (ramp, hold) = (settings.ramp_time, settings.hold_time);
    if !(ramp > 0.0 && hold > 0.0) || !(settings.averaging_fraction > 0.0 && settings.averaging_fraction <= 1.0) {
        return Err(DynamicsError::InvalidProtocol(
            "ramp, hold and averaging window must be positive".into(),
        ));
    }
    let drive = DriveSpec::new(omega_d, amplitude);
    let zero = Complex64::new(0.0, 0.0);

    let up = DriveProtocol::new(omega_d, vec![(0.0, 0.0), (ramp, amplitude), (ramp + hold, amplitude)])?;
    let up_traj = integrate(sys, eta, &up, (zero, zero), &settings.integrator)?;
    let t_end = ramp + hold;
    let window = settings.averaging_fraction * hold;
    let c_out_up = up_traj.mean_output(t_end - window, t_end);

    let top = settings
        .overdrive
        .or_else(|| fold_points(sys, eta, omega_d).map(|f| 1.25 * f.b_up))
        .unwrap_or(amplitude)
        .max(amplitude);
    let start = ramp_down_branch(sys, eta, &DriveSpec::new(omega_d, top))?;
    let down = DriveProtocol::new(omega_d, vec![(0.0, top), (ramp, amplitude), (ramp + hold, amplitude)])?;
    let down_traj = integrate(sys, eta, &down, (start.alpha, start.gamma), &settings.integrator)?;
    let c_out_down = down_traj.mean_output(t_end - window, t_end);

    Ok(HysteresisResult {
        c_out_up,
        c_out_down,
        d_ud: (c_out_up - c_out_down).norm(),
        bifurcated_up: ends_high(sys, eta, &drive, &up_traj),
        bifurcated_down: !ends_high(sys, eta, &drive, &down_traj),
    })
}

/// `D_ud` level, relative to the largest output on the map, separating
/// hysteretic cells from numerical noise. A per-cell reference would let the
/// ring-down left after a long ramp down dominate cells with tiny outputs.
pub const HYSTERESIS_THRESHOLD: f64 = 1e-3;

/// Drive points on a frequency × power grid. The amplitude of cell `(i, j)`
/// sits at `i * n_amp + j`; it may vary along a row since the same input
/// power gives a different amplitude at each frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveGrid {
    pub omega: Vec<f64>,
    pub n_amp: usize,
    pub amplitude: Vec<f64>,
}

impl DriveGrid {
    pub fn new(omega: Vec<f64>, n_amp: usize, amplitude: Vec<f64>) -> Result<Self, DynamicsError> {
        if omega.is_empty() || n_amp == 0 || amplitude.len() != omega.len() * n_amp {
            return Err(DynamicsError::EmptyGrid);
        }
        Ok(Self {
            omega,
            n_amp,
            amplitude,
        })
    }

    /// Same amplitude list at every frequency.
    pub fn uniform(omega: &[f64], amplitudes: &[f64]) -> Result<Self, DynamicsError> {
        let amplitude = omega.iter().flat_map(|_| amplitudes.iter().copied()).collect();
        Self::new(omega.to_vec(), amplitudes.len(), amplitude)
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_amp + j
    }

    pub fn drive(&self, k: usize) -> DriveSpec {
        DriveSpec::new(self.omega[k / self.n_amp], self.amplitude[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistabilityMap {
    pub grid: DriveGrid,
    pub cells: Vec<HysteresisResult>,
    /// `D_ud` above [`HYSTERESIS_THRESHOLD`] times the largest output on the map.
    pub bistable: Vec<bool>,
    /// Per frequency: lowest amplitude index whose ramp-up ended high.
    pub b_up: Vec<Option<usize>>,
    /// Per frequency: lowest amplitude index whose ramp-down stayed high.
    pub b_down: Vec<Option<usize>>,
    pub simply_connected: bool,
}

impl BistabilityMap {
    pub fn d_ud(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.d_ud).collect()
    }

    pub fn is_bistable_region_empty(&self) -> bool {
        !self.bistable.iter().any(|&b| b)
    }
}

pub fn bistability_map(
    sys: &SystemParams,
    eta: QubitState,
    grid: &DriveGrid,
    settings: &HysteresisSettings,
) -> Result<BistabilityMap, DynamicsError> {
    if grid.is_empty() {
        return Err(DynamicsError::EmptyGrid);
    }
    let na = grid.n_amp;
    let cells: Vec<HysteresisResult> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let d = grid.drive(k);
            ramp_hysteresis(sys, eta, d.omega_d, d.amplitude, settings)
        })
        .collect::<Result<_, _>>()?;
    let scale = cells
        .iter()
        .map(|c| c.c_out_up.norm().max(c.c_out_down.norm()))
        .fold(0.0, f64::max);
    let bistable: Vec<bool> = cells.iter().map(|c| c.d_ud > HYSTERESIS_THRESHOLD * scale).collect();
    let lowest = |pred: &dyn Fn(&HysteresisResult) -> bool, i: usize| (0..na).find(|&j| pred(&cells[i * na + j]));
    let b_up = (0..grid.omega.len()).map(|i| lowest(&|c| c.bifurcated_up, i)).collect();
    let b_down = (0..grid.omega.len())
        .map(|i| lowest(&|c| !c.bifurcated_down, i))
        .collect();
    let simply_connected = is_simply_connected(&bistable, grid.omega.len(), na);
    Ok(BistabilityMap {
        grid: grid.clone(),
        cells,
        bistable,
        b_up,
        b_down,
        simply_connected,
    })
}

/// Cells with two stable steady states, from the root count alone.
pub fn steady_state_bistable_mask(
    sys: &SystemParams,
    eta: QubitState,
    grid: &DriveGrid,
) -> Result<Vec<bool>, DynamicsError> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| Ok(crate::steady::stable_branch_count(sys, eta, &grid.drive(k))? >= 2))
        .collect()
}

/// True when the set cells form one 4-connected component without holes.
/// An empty set counts as simply connected.
pub fn is_simply_connected(mask: &[bool], rows: usize, cols: usize) -> bool {
    let components = |want: bool, count_border_touching: bool| -> usize {
        let mut seen = vec![false; mask.len()];
        let mut n = 0;
        for start in 0..mask.len() {
            if mask[start] != want || seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut touches = false;
            while let Some(k) = stack.pop() {
                let (r, c) = (k / cols, k % cols);
                touches |= r == 0 || c == 0 || r + 1 == rows || c + 1 == cols;
                let mut push = |nk: usize| {
                    if mask[nk] == want && !seen[nk] {
                        seen[nk] = true;
                        stack.push(nk);
                    }
                };
                if r > 0 {
                    push(k - cols);
                }
                if r + 1 < rows {
                    push(k + cols);
                }
                if c > 0 {
                    push(k - 1);
                }
                if c + 1 < cols {
                    push(k + 1);
                }
            }
            if count_border_touching || !touches {
                n += 1;
            }
        }
        n
    };
    // Holes are complement components that never reach the grid edge.
    components(true, true) <= 1 && components(false, false) == 0
}
