//! Monte-Carlo single-shot latching readout.
//!
//! Each shot integrates the classical equations under a square pulse while
//! the qubit state toggles at exponentially distributed jump times, then adds
//! one complex Gaussian draw to the time-averaged output.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::dynamics::{
    detect, integrate_with_jumps, BranchLevels, DriveGrid, DriveProtocol, DynamicsError, IntegratorSettings, Trajectory,
};
use crate::model::{hybridization_angle, QubitState, SystemParams};
use crate::steady::{DriveSpec, SteadyStateBranch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("shots from both preparations are required")]
    SinglePreparation,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-quadrature standard deviation added to the integrated output
    /// (√(photons/s)).
    pub sigma_det: f64,
    /// Relaxation rate e → g (1/s).
    pub gamma_down: f64,
    /// Excitation rate g → e (1/s).
    pub gamma_up: f64,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn from_t1(t1: f64, sigma_det: f64, rng_seed: u64) -> Self {
        Self {
            sigma_det,
            gamma_down: 1.0 / t1,
            gamma_up: 0.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        if !(self.sigma_det >= 0.0) || !self.sigma_det.is_finite() {
            return Err(ReadoutError::InvalidNoise("sigma_det must be finite and >= 0".into()));
        }
        if !(self.gamma_down >= 0.0 && self.gamma_up >= 0.0) || !(self.gamma_down + self.gamma_up).is_finite() {
            return Err(ReadoutError::InvalidNoise("rates must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSettings {
    pub rise_time: f64,
    pub pulse_length: f64,
    /// Averaging window `[start, end]` within the pulse (s).
    pub window: (f64, f64),
    /// Probability that a shot starts in the other qubit state.
    pub prep_error: f64,
    /// Discard wrongly prepared shots instead of counting them.
    pub heralding: bool,
    pub integrator: IntegratorSettings,
}

impl Default for ReadoutSettings {
    fn default() -> Self {
        Self {
            rise_time: 20e-9,
            pulse_length: 500e-9,
            window: (0.0, 500e-9),
            prep_error: 0.003,
            heralding: false,
            integrator: IntegratorSettings::default(),
        }
    }
}

impl ReadoutSettings {
    pub fn protocol(&self, drive: &DriveSpec) -> Result<DriveProtocol, DynamicsError> {
        DriveProtocol::square(drive.omega_d, drive.amplitude, self.rise_time, self.pulse_length)
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        let (a, b) = self.window;
        if !(self.pulse_length > 0.0) || !(self.rise_time >= 0.0) || self.rise_time > self.pulse_length {
            return Err(ReadoutError::InvalidArgument("pulse timing".into()));
        }
        if !(a >= 0.0 && b > a && b <= self.pulse_length * (1.0 + 1e-12)) {
            return Err(ReadoutError::InvalidArgument(
                "integration window must lie inside the pulse".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.prep_error) {
            return Err(ReadoutError::InvalidArgument("prep_error must be a probability".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub prepared: QubitState,
    /// Qubit state at `t = 0` after any preparation error.
    pub initial: QubitState,
    pub jump_times: Vec<f64>,
    pub noiseless_iq: Complex64,
    pub integrated_iq: Complex64,
    pub latched: bool,
    pub bifurcation_time: Option<f64>,
    /// Shot removed by heralding.
    pub discarded: bool,
    pub assigned: QubitState,
}

/// Line through the complex plane along which shots are thresholded. The
/// projection is `Re[(iq − origin) · conj(axis)]`; larger values mean `e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub origin: Complex64,
    pub axis: Complex64,
}

impl Projection {
    /// Axis from `low` to `high`, origin at their midpoint.
    pub fn between(low: Complex64, high: Complex64) -> Self {
        let d = high - low;
        let axis = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        Self {
            origin: 0.5 * (low + high),
            axis,
        }
    }

    /// Rotation putting the noiseless cluster centres of the two
    /// preparations on the real axis.
    pub fn from_clusters(shots: &[ShotRecord]) -> Result<Self, ReadoutError> {
        let mean = |eta: QubitState| {
            let v: Vec<Complex64> = shots
                .iter()
                .filter(|s| s.prepared == eta && !s.discarded)
                .map(|s| s.noiseless_iq)
                .collect();
            if v.is_empty() {
                None
            } else {
                Some(v.iter().sum::<Complex64>() / v.len() as f64)
            }
        };
        match (mean(QubitState::Ground), mean(QubitState::Excited)) {
            (Some(g), Some(e)) => Ok(Self::between(g, e)),
            _ => Err(ReadoutError::SinglePreparation),
        }
    }

    pub fn project(&self, iq: Complex64) -> f64 {
        ((iq - self.origin) * self.axis.conj()).re
    }

    pub fn assign(&self, iq: Complex64, threshold: f64) -> QubitState {
        if self.project(iq) > threshold {
            QubitState::Excited
        } else {
            QubitState::Ground
        }
    }
}

/// Independent random stream per shot.
pub fn shot_rng(master_seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

fn complex_normal<R: Rng>(rng: &mut R, sigma: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sigma * re, sigma * im)
}

/// Shot simulator for one drive point. The two jump-free trajectories are
/// integrated once and reused.
#[derive(Debug, Clone)]
pub struct ShotSimulator {
    pub sys: SystemParams,
    pub noise: NoiseModel,
    pub settings: ReadoutSettings,
    pub protocol: DriveProtocol,
    /// Detector threshold on `|c_out|`; infinite when no high branch exists.
    pub detector_threshold: f64,
    pub projection: Projection,
    /// Threshold on the projected integrated output.
    pub threshold: f64,
    cached: [Trajectory; 2],
}

fn slot(eta: QubitState) -> usize {
    match eta {
        QubitState::Ground => 0,
        QubitState::Excited => 1,
    }
}

impl ShotSimulator {
    pub fn new(
        sys: &SystemParams,
        noise: &NoiseModel,
        settings: &ReadoutSettings,
        drive: &DriveSpec,
    ) -> Result<Self, ReadoutError> {
        noise.validate()?;
        settings.validate()?;
        let protocol = settings.protocol(drive)?;
        let zero = Complex64::new(0.0, 0.0);
        let run = |eta| integrate_with_jumps(sys, eta, &[], &protocol, (zero, zero), &settings.integrator);
        let cached = [run(QubitState::Ground)?, run(QubitState::Excited)?];
        let levels = BranchLevels::at(sys, &QubitState::BOTH, drive)?;
        let (t0, t1) = settings.window;
        let projection = match levels {
            Some(l) => Projection::between(l.low, l.high),
            None => Projection::between(cached[0].mean_output(t0, t1), cached[1].mean_output(t0, t1)),
        };
        Ok(Self {
            sys: *sys,
            noise: *noise,
            settings: *settings,
            protocol,
            detector_threshold: levels.map(|l| l.magnitude_threshold()).unwrap_or(f64::INFINITY),
            projection,
            threshold: 0.0,
            cached,
        })
    }

    pub fn cached_trajectory(&self, eta: QubitState) -> &Trajectory {
        &self.cached[slot(eta)]
    }

    fn sample_jumps<R: Rng>(&self, initial: QubitState, rng: &mut R) -> Vec<f64> {
        let duration = self.protocol.duration();
        let mut jumps = Vec::new();
        let mut state = initial;
        let mut t = 0.0;
        loop {
            let rate = match state {
                QubitState::Excited => self.noise.gamma_down,
                QubitState::Ground => self.noise.gamma_up,
            };
            if rate <= 0.0 {
                break;
            }
            t += Exp::new(rate).expect("positive rate").sample(rng);
            if t >= duration {
                break;
            }
            jumps.push(t);
            state = state.flipped();
        }
        jumps
    }

    /// Runs a shot from a given initial state with explicit jump times.
    pub fn run(
        &self,
        prepared: QubitState,
        initial: QubitState,
        jump_times: Vec<f64>,
        noise_draw: Complex64,
    ) -> Result<ShotRecord, ReadoutError> {
        let owned;
        let traj = if jump_times.is_empty() {
            &self.cached[slot(initial)]
        } else {
            let zero = Complex64::new(0.0, 0.0);
            owned = integrate_with_jumps(
                &self.sys,
                initial,
                &jump_times,
                &self.protocol,
                (zero, zero),
                &self.settings.integrator,
            )?;
            &owned
        };
        let (t0, t1) = self.settings.window;
        let noiseless_iq = traj.mean_output(t0, t1);
        let integrated_iq = noiseless_iq + noise_draw;
        let detection = detect(traj, self.detector_threshold);
        Ok(ShotRecord {
            prepared,
            initial,
            jump_times,
            noiseless_iq,
            integrated_iq,
            latched: detection.latched_at_end,
            bifurcation_time: detection.first_crossing,
            discarded: self.settings.heralding && initial != prepared,
            assigned: self.projection.assign(integrated_iq, self.threshold),
        })
    }

    /// Shot number `stream` of this drive point.
    pub fn shot(&self, prepared: QubitState, stream: u64) -> Result<ShotRecord, ReadoutError> {
        let mut rng = shot_rng(self.noise.rng_seed, stream);
        let initial = if rng.random::<f64>() < self.settings.prep_error {
            prepared.flipped()
        } else {
            prepared
        };
        let jumps = self.sample_jumps(initial, &mut rng);
        let draw = complex_normal(&mut rng, self.noise.sigma_det);
        self.run(prepared, initial, jumps, draw)
    }

    /// `n` shots per preparation; stream ids start at `stream_base`.
    pub fn shots(&self, n: usize, stream_base: u64) -> Result<Vec<ShotRecord>, ReadoutError> {
        (0..2 * n)
            .into_par_iter()
            .map(|k| {
                let prepared = if k < n { QubitState::Ground } else { QubitState::Excited };
                self.shot(prepared, stream_base + k as u64)
            })
            .collect()
    }

    /// Noiseless, jump-free distance between the latched `e` and unlatched
    /// `g` window averages.
    pub fn cluster_separation(&self) -> f64 {
        let (t0, t1) = self.settings.window;
        (self.cached[1].mean_output(t0, t1) - self.cached[0].mean_output(t0, t1)).norm()
    }
}

/// One shot at a drive point (stream 0 of the noise model's seed).
pub fn simulate_shot(
    sys: &SystemParams,
    noise: &NoiseModel,
    settings: &ReadoutSettings,
    drive: &DriveSpec,
    prepared: QubitState,
) -> Result<ShotRecord, ReadoutError> {
    ShotSimulator::new(sys, noise, settings, drive)?.shot(prepared, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdChoice {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub p_e_given_g: f64,
    pub p_g_given_e: f64,
    /// `1 − (P(e|g) + P(g|e))/2`.
    pub f_ro: f64,
    /// `1 − P(e|g) − P(g|e)`.
    pub contrast: f64,
    pub threshold: f64,
    /// Rows: prepared g, e. Columns: assigned g, e.
    pub counts: [[u64; 2]; 2],
    /// Shots whose noise flipped the assignment of their noiseless output.
    pub overlap_error: f64,
    /// Counted shots that started in the wrong state.
    pub preparation_error: f64,
    /// Counted shots where a qubit jump came before any bifurcation.
    pub pre_bifurcation_error: f64,
    pub discarded: u64,
}

fn split(shots: &[ShotRecord]) -> Result<(Vec<&ShotRecord>, Vec<&ShotRecord>), ReadoutError> {
    let used = shots.iter().filter(|s| !s.discarded);
    let (g, e): (Vec<_>, Vec<_>) = used.partition(|s| s.prepared == QubitState::Ground);
    if g.is_empty() || e.is_empty() {
        return Err(ReadoutError::SinglePreparation);
    }
    Ok((g, e))
}

/// Threshold on the projected output maximising the fidelity, chosen among
/// the midpoints of consecutive sorted samples.
pub fn threshold_optimize(shots: &[ShotRecord], projection: &Projection) -> Result<f64, ReadoutError> {
    let (g, e) = split(shots)?;
    let mut pts: Vec<(f64, bool)> = g
        .iter()
        .map(|s| (projection.project(s.integrated_iq), false))
        .chain(e.iter().map(|s| (projection.project(s.integrated_iq), true)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (ng, ne) = (g.len() as f64, e.len() as f64);
    // Threshold below everything: all assigned e.
    let mut g_above = g.len();
    let mut e_below = 0usize;
    let mut best = (1.0 - 0.5 * (g_above as f64 / ng + e_below as f64 / ne), pts[0].0 - 1.0);
    for i in 0..pts.len() {
        if pts[i].1 {
            e_below += 1;
        } else {
            g_above -= 1;
        }
        if i + 1 < pts.len() && pts[i + 1].0 == pts[i].0 {
            continue;
        }
        let thr = if i + 1 < pts.len() {
            0.5 * (pts[i].0 + pts[i + 1].0)
        } else {
            pts[i].0 + 1.0
        };
        let f = 1.0 - 0.5 * (g_above as f64 / ng + e_below as f64 / ne);
        if f > best.0 {
            best = (f, thr);
        }
    }
    Ok(best.1)
}

pub fn fidelity_report(
    shots: &[ShotRecord],
    projection: &Projection,
    threshold: ThresholdChoice,
) -> Result<FidelityReport, ReadoutError> {
    let thr = match threshold {
        ThresholdChoice::Fixed(t) => t,
        ThresholdChoice::Auto => threshold_optimize(shots, projection)?,
    };
    let (g, e) = split(shots)?;
    let mut counts = [[0u64; 2]; 2];
    let (mut overlap, mut prep, mut pre_bif) = (0u64, 0u64, 0u64);
    for s in g.iter().chain(e.iter()) {
        let assigned = projection.assign(s.integrated_iq, thr);
        counts[slot(s.prepared)][slot(assigned)] += 1;
        if assigned != projection.assign(s.noiseless_iq, thr) {
            overlap += 1;
        }
        if s.initial != s.prepared {
            prep += 1;
        }
        if let Some(&first_jump) = s.jump_times.first() {
            if s.bifurcation_time.is_none_or(|tb| first_jump < tb) {
                pre_bif += 1;
            }
        }
    }
    let total = (g.len() + e.len()) as f64;
    let p_e_given_g = counts[0][1] as f64 / g.len() as f64;
    let p_g_given_e = counts[1][0] as f64 / e.len() as f64;
    Ok(FidelityReport {
        p_e_given_g,
        p_g_given_e,
        f_ro: 1.0 - 0.5 * (p_e_given_g + p_g_given_e),
        contrast: 1.0 - p_e_given_g - p_g_given_e,
        threshold: thr,
        counts,
        overlap_error: overlap as f64 / total,
        preparation_error: prep as f64 / total,
        pre_bifurcation_error: pre_bif as f64 / total,
        discarded: shots.iter().filter(|s| s.discarded).count() as u64,
    })
}

/// Relaxation probabilities without and with latching:
/// `(1 − e^{−t_int/2T1}, 1 − e^{−t_b/2T1})`.
pub fn error_budget(t1: f64, t_int: f64, t_b: f64) -> Result<(f64, f64), ReadoutError> {
    if !(t1 > 0.0) || !(t_b >= 0.0) || t_b > t_int {
        return Err(ReadoutError::InvalidArgument(
            "need T1 > 0 and 0 <= t_b <= t_int".into(),
        ));
    }
    let f = |t: f64| -(-t / (2.0 * t1)).exp_m1();
    Ok((f(t_int), f(t_b)))
}

/// Per-quadrature noise giving `overlap` misassignment for two clusters a
/// distance `separation` apart, thresholded at their midpoint.
pub fn calibrate_sigma(separation: f64, overlap: f64) -> Result<f64, ReadoutError> {
    if !(overlap > 0.0 && overlap < 0.5) || !(separation >= 0.0) {
        return Err(ReadoutError::InvalidArgument("overlap must lie in (0, 0.5)".into()));
    }
    let z = Normal::standard().inverse_cdf(1.0 - overlap);
    Ok(separation / (2.0 * z))
}

/// Photon number in the upper (readout) polariton for a coupled-basis
/// branch.
pub fn readout_photon_number(sys: &SystemParams, eta: QubitState, branch: &SteadyStateBranch) -> f64 {
    let theta = hybridization_angle(sys.detuning(Some(eta)), sys.g_ac);
    let (s, c) = theta.sin_cos();
    (c * branch.alpha + s * branch.gamma).norm_sqr()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityMap {
    pub grid: DriveGrid,
    pub reports: Vec<FidelityReport>,
}

impl FidelityMap {
    pub fn contrast(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.contrast).collect()
    }

    pub fn f_ro(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.f_ro).collect()
    }

    /// Cell index of the largest contrast (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, r) in self.reports.iter().enumerate() {
            if r.contrast > self.reports[best].contrast {
                best = k;
            }
        }
        best
    }
}

/// Fidelity at one drive point with the latching discriminator.
pub fn fidelity_at(
    sys: &SystemParams,
    noise: &NoiseModel,
    settings: &ReadoutSettings,
    drive: &DriveSpec,
    shots_per_preparation: usize,
    stream_base: u64,
) -> Result<FidelityReport, ReadoutError> {
    let sim = ShotSimulator::new(sys, noise, settings, drive)?;
    let shots = sim.shots(shots_per_preparation, stream_base)?;
    fidelity_report(&shots, &sim.projection, ThresholdChoice::Fixed(sim.threshold))
}

pub fn fidelity_map(
    sys: &SystemParams,
    noise: &NoiseModel,
    settings: &ReadoutSettings,
    grid: &DriveGrid,
    shots_per_preparation: usize,
) -> Result<FidelityMap, ReadoutError> {
    if grid.is_empty() {
        return Err(ReadoutError::InvalidArgument("empty grid".into()));
    }
    if shots_per_preparation < 100 {
        return Err(ReadoutError::InvalidArgument("at least 100 shots per point".into()));
    }
    let reports = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            fidelity_at(
                sys,
                noise,
                settings,
                &grid.drive(k),
                shots_per_preparation,
                (k as u64) << 32,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FidelityMap {
        grid: grid.clone(),
        reports,
    })
}
