//! Unit conventions.
//!
//! Every frequency and rate inside the crate is angular (rad/s). Ordinary
//! frequencies (Hz) only appear at the configuration and artifact boundary.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Ordinary frequency in Hz to angular frequency in rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    TWO_PI * f
}

#[inline]
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f * 1e6
}

#[inline]
pub fn ghz(f: f64) -> f64 {
    TWO_PI * f * 1e9
}

/// Angular frequency (rad/s) back to ordinary frequency in Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}

#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / TWO_PI / 1e6
}

#[inline]
pub fn to_ghz(omega: f64) -> f64 {
    omega / TWO_PI / 1e9
}

/// Power in dBm to watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm.
#[inline]
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dbm_is_one_milliwatt() {
        assert_eq!(dbm_to_watts(0.0), 1e-3);
        assert!((watts_to_dbm(1e-3)).abs() < 1e-12);
    }

    #[test]
    fn angular_round_trip() {
        let w = ghz(7.575);
        assert!((to_ghz(w) - 7.575).abs() < 1e-12);
        assert!((to_mhz(mhz(34.5)) - 34.5).abs() < 1e-12);
        assert!((to_hz(hz(1.0)) - 1.0).abs() < 1e-15);
    }
}
