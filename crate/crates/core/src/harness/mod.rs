//! Configuration, power calibration, sweep orchestration and artifacts.

pub mod artifact;
pub mod config;

use std::path::Path;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use artifact::{fmt_f64, MapArtifact, Metadata};
pub use config::{parse_frequency, parse_power_dbm, ConfigError, NoiseConfig, ProtocolConfig, RunConfig, SigmaSpec};

use crate::dynamics::{
    bistability_map, BistabilityMap, DriveGrid, DynamicsError, HysteresisSettings, IntegratorSettings, Trajectory,
};
use crate::model::{
    critical_photon_number, parameter_curves, polariton_params, CurveRow, ModelError, PolaritonParams, QubitState,
};
use crate::readout::{
    calibrate_sigma, fidelity_map, FidelityMap, NoiseModel, ReadoutError, ReadoutSettings, ShotRecord, ShotSimulator,
};
use crate::steady::{fold_points, pointer_distance, DriveSpec, SteadyError};
use crate::units::{dbm_to_watts, to_ghz, to_mhz, HBAR};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o on {path}: {message}")]
    Io { path: String, message: String },
    #[error("solver failed at {freq_ghz} GHz, {power_dbm} dBm: {message}")]
    Solver {
        freq_ghz: f64,
        power_dbm: f64,
        message: String,
    },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error(transparent)]
    Steady(#[from] SteadyError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// `Ω_c = √(κ_c P / ħω_d)` with `P` the input power after adding the
/// attenuation correction.
pub fn power_to_amplitude(p_dbm: f64, omega_d: f64, kappa_c: f64, attenuation_correction_db: f64) -> f64 {
    let watts = dbm_to_watts(p_dbm + attenuation_correction_db);
    (kappa_c * watts / (HBAR * omega_d)).sqrt()
}

/// Runs `f` inside a pool of the configured size (global pool otherwise).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

pub fn drive_grid(cfg: &RunConfig) -> Result<DriveGrid, HarnessError> {
    let amplitude = cfg
        .freq_grid
        .iter()
        .flat_map(|&w| {
            cfg.power_grid_dbm
                .iter()
                .map(move |&p| power_to_amplitude(p, w, cfg.system.kappa_c, cfg.attenuation_correction_db))
        })
        .collect();
    Ok(DriveGrid::new(
        cfg.freq_grid.clone(),
        cfg.power_grid_dbm.len(),
        amplitude,
    )?)
}

pub fn integrator_settings(cfg: &RunConfig) -> IntegratorSettings {
    IntegratorSettings {
        rtol: cfg.protocol.rtol,
        atol: cfg.protocol.atol,
        sample_interval: cfg.protocol.sample_interval,
    }
}

pub fn hysteresis_settings(cfg: &RunConfig) -> HysteresisSettings {
    HysteresisSettings {
        ramp_time: cfg.protocol.ramp_time,
        hold_time: cfg.protocol.hold_time,
        averaging_fraction: cfg.protocol.averaging_fraction,
        overdrive: None,
        integrator: integrator_settings(cfg),
    }
}

pub fn readout_settings(cfg: &RunConfig) -> ReadoutSettings {
    ReadoutSettings {
        rise_time: cfg.protocol.rise_time,
        pulse_length: cfg.protocol.pulse_length,
        window: (cfg.protocol.window_start, cfg.protocol.window_end),
        prep_error: cfg.noise.prep_error,
        heralding: cfg.noise.heralding,
        integrator: integrator_settings(cfg),
    }
}

fn metadata(cfg: &RunConfig, kind: &str, unit: &str) -> Metadata {
    Metadata::new(
        kind,
        cfg.hash(),
        unit,
        cfg.freq_grid.iter().map(|&w| to_ghz(w)).collect(),
        cfg.power_grid_dbm.clone(),
    )
}

fn cell_error(cfg: &RunConfig, k: usize, message: impl Into<String>) -> HarnessError {
    let np = cfg.power_grid_dbm.len();
    HarnessError::Solver {
        freq_ghz: to_ghz(cfg.freq_grid[k / np]),
        power_dbm: cfg.power_grid_dbm[k % np],
        message: message.into(),
    }
}

fn check_finite(cfg: &RunConfig, values: &[f64]) -> Result<(), HarnessError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(cell_error(cfg, k, "non-finite result")),
        None => Ok(()),
    }
}

/// Pointer distance `D_eg` on the configured grid.
pub fn sweep_deg_map(cfg: &RunConfig) -> Result<MapArtifact, HarnessError> {
    use rayon::prelude::*;
    let grid = drive_grid(cfg)?;
    let values = with_threads(cfg.threads, || {
        (0..grid.len())
            .into_par_iter()
            .map(|k| pointer_distance(&cfg.system, &grid.drive(k)).map_err(|e| cell_error(cfg, k, e.to_string())))
            .collect::<Result<Vec<f64>, _>>()
    })??;
    check_finite(cfg, &values)?;
    MapArtifact::new(values, metadata(cfg, "deg-map", "sqrt(1/s)"))
}

/// `(freq GHz, power dBm)` vertices of a per-column threshold curve.
fn polyline(cfg: &RunConfig, idx: &[Option<usize>]) -> Vec<[f64; 2]> {
    idx.iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| [to_ghz(cfg.freq_grid[i]), cfg.power_grid_dbm[j]]))
        .collect()
}

/// Hysteresis map for one qubit state; returns the raw map as well.
pub fn sweep_bistability(cfg: &RunConfig, eta: QubitState) -> Result<(MapArtifact, BistabilityMap), HarnessError> {
    let grid = drive_grid(cfg)?;
    let settings = hysteresis_settings(cfg);
    let map = with_threads(cfg.threads, || bistability_map(&cfg.system, eta, &grid, &settings))??;
    let values = map.d_ud();
    check_finite(cfg, &values)?;
    let mut meta = metadata(cfg, "bistability-map", "sqrt(1/s)");
    meta.qubit_state = Some(eta.label().to_string());
    meta.extra = json!({
        "b_up": polyline(cfg, &map.b_up),
        "b_down": polyline(cfg, &map.b_down),
        "bistable_cells": map.bistable.iter().filter(|&&b| b).count(),
        "simply_connected": map.simply_connected,
    });
    Ok((MapArtifact::new(values, meta)?, map))
}

/// Region of a drive point relative to the two upper fold amplitudes:
/// `I` below the excited-state threshold, `II` between, `III` above the
/// ground-state threshold.
pub fn region_label(cfg: &RunConfig, drive: &DriveSpec) -> &'static str {
    let e = fold_points(&cfg.system, QubitState::Excited, drive.omega_d);
    let g = fold_points(&cfg.system, QubitState::Ground, drive.omega_d);
    match (e, g) {
        (Some(e), Some(g)) if e.b_up <= g.b_up => {
            if drive.amplitude < e.b_up {
                "I"
            } else if drive.amplitude < g.b_up {
                "II"
            } else {
                "III"
            }
        }
        _ => "-",
    }
}

/// Detection noise: fixed, or calibrated so the jump-free clusters at the
/// calibration point overlap by the target fraction.
pub fn resolve_noise(cfg: &RunConfig) -> Result<NoiseModel, HarnessError> {
    let sigma_det = match cfg.noise.sigma_det {
        SigmaSpec::Fixed(s) => s,
        SigmaSpec::Auto => {
            let (w, p) = cfg.noise.calibration.ok_or_else(|| ConfigError::Key {
                key: "noise.calibration_freq".into(),
                message: "required when sigma_det is auto".into(),
            })?;
            let drive = DriveSpec::new(
                w,
                power_to_amplitude(p, w, cfg.system.kappa_c, cfg.attenuation_correction_db),
            );
            let probe = NoiseModel {
                sigma_det: 0.0,
                gamma_down: 0.0,
                gamma_up: 0.0,
                rng_seed: cfg.seed,
            };
            let sim = ShotSimulator::new(&cfg.system, &probe, &readout_settings(cfg), &drive)?;
            calibrate_sigma(sim.cluster_separation(), cfg.noise.overlap_target)?
        }
    };
    Ok(NoiseModel {
        sigma_det,
        gamma_down: cfg.noise.gamma_down,
        gamma_up: cfg.noise.gamma_up,
        rng_seed: cfg.seed,
    })
}

/// Fidelity map; cell values are the contrast `1 − P(e|g) − P(g|e)`.
pub fn sweep_fidelity(cfg: &RunConfig) -> Result<(MapArtifact, FidelityMap), HarnessError> {
    let grid = drive_grid(cfg)?;
    let noise = resolve_noise(cfg)?;
    let settings = readout_settings(cfg);
    let map = with_threads(cfg.threads, || {
        fidelity_map(&cfg.system, &noise, &settings, &grid, cfg.noise.shots_per_point)
    })??;
    let values = map.contrast();
    check_finite(cfg, &values)?;
    let star = map.argmax();
    let np = cfg.power_grid_dbm.len();
    let regions: Vec<&str> = (0..grid.len()).map(|k| region_label(cfg, &grid.drive(k))).collect();
    let mut meta = metadata(cfg, "fidelity-map", "contrast");
    meta.extra = json!({
        "sigma_det": noise.sigma_det,
        "shots_per_preparation": cfg.noise.shots_per_point,
        "f_ro": map.f_ro(),
        "regions": regions,
        "star": {
            "freq_GHz": to_ghz(cfg.freq_grid[star / np]),
            "power_dBm": cfg.power_grid_dbm[star % np],
            "contrast": map.reports[star].contrast,
            "f_ro": map.reports[star].f_ro,
            "region": regions[star],
            "report": map.reports[star],
        },
    });
    Ok((MapArtifact::new(values, meta)?, map))
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsReport {
    pub config_hash: String,
    /// Rates in MHz at the bare mixing angle and for each qubit state.
    pub bare: Vec<(String, f64)>,
    pub ground: Vec<(String, f64)>,
    pub excited: Vec<(String, f64)>,
    pub theta: [f64; 3],
    pub n_crit_upper: f64,
    pub n_crit_lower: f64,
}

fn rates(p: &PolaritonParams) -> Vec<(String, f64)> {
    crate::model::rates_mhz(p)
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

pub fn params_report(cfg: &RunConfig) -> Result<ParamsReport, HarnessError> {
    let bare = polariton_params(&cfg.system, None);
    let g = polariton_params(&cfg.system, Some(QubitState::Ground));
    let e = polariton_params(&cfg.system, Some(QubitState::Excited));
    Ok(ParamsReport {
        config_hash: cfg.hash(),
        bare: rates(&bare),
        ground: rates(&g),
        excited: rates(&e),
        theta: [bare.theta, g.theta, e.theta],
        n_crit_upper: critical_photon_number(bare.kappa_u, bare.u_uu)?,
        n_crit_lower: critical_photon_number(bare.kappa_l, bare.u_ll)?,
    })
}

/// Parameter curves over `points` angles strictly inside `(0, π/2)`.
pub fn curves_csv(cfg: &RunConfig) -> Result<String, HarnessError> {
    let n = cfg.curve_points;
    let grid: Vec<f64> = (1..=n)
        .map(|k| std::f64::consts::FRAC_PI_2 * k as f64 / (n + 1) as f64)
        .collect();
    let rows: Vec<CurveRow> = parameter_curves(&cfg.system, &grid)?;
    let mut s = String::from("theta_rad,chi_u_MHz,chi_l_MHz,U_uu_MHz,U_ll_MHz,U_ul_MHz,kappa_u_MHz,kappa_l_MHz\n");
    for r in rows {
        let cols = [
            r.theta,
            to_mhz(r.chi_u),
            to_mhz(r.chi_l),
            to_mhz(r.u_uu),
            to_mhz(r.u_ll),
            to_mhz(r.u_ul),
            to_mhz(r.kappa_u),
            to_mhz(r.kappa_l),
        ];
        let line: Vec<String> = cols.iter().map(|&x| fmt_f64(x)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    Ok(s)
}

/// One shot at the calibration point (or an explicit drive) with its
/// noiseless trajectory.
pub fn shot_trace(
    cfg: &RunConfig,
    prepared: QubitState,
    drive_override: Option<(f64, f64)>,
    stream: u64,
) -> Result<(ShotRecord, Trajectory, serde_json::Value), HarnessError> {
    let (w, p) = drive_override
        .or(cfg.noise.calibration)
        .ok_or_else(|| ConfigError::Key {
            key: "noise.calibration_freq".into(),
            message: "a drive point is required for single shots".into(),
        })?;
    let drive = DriveSpec::new(
        w,
        power_to_amplitude(p, w, cfg.system.kappa_c, cfg.attenuation_correction_db),
    );
    let noise = resolve_noise(cfg)?;
    let sim = ShotSimulator::new(&cfg.system, &noise, &readout_settings(cfg), &drive)?;
    let shot = sim.shot(prepared, stream)?;
    let traj = if shot.jump_times.is_empty() {
        sim.cached_trajectory(shot.initial).clone()
    } else {
        let zero = num_complex::Complex64::new(0.0, 0.0);
        crate::dynamics::integrate_with_jumps(
            &cfg.system,
            shot.initial,
            &shot.jump_times,
            &sim.protocol,
            (zero, zero),
            &integrator_settings(cfg),
        )?
    };
    let info = json!({
        "config_hash": cfg.hash(),
        "freq_GHz": to_ghz(w),
        "power_dBm": p,
        "amplitude_MHz": to_mhz(drive.amplitude),
        "region": region_label(cfg, &drive),
        "sigma_det": noise.sigma_det,
        "detector_threshold": sim.detector_threshold,
        "threshold": sim.threshold,
        "projection": sim.projection,
        "shot": shot,
    });
    Ok((shot, traj, info))
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t_ns,re_alpha,im_alpha,re_gamma,im_gamma,abs_c_out\n");
    for i in 0..traj.len() {
        let cols = [
            traj.times[i] * 1e9,
            traj.alpha[i].re,
            traj.alpha[i].im,
            traj.gamma[i].re,
            traj.gamma[i].im,
            traj.c_out(i).norm(),
        ];
        let line: Vec<String> = cols.iter().map(|&x| fmt_f64(x)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}
