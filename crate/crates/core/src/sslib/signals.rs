//! Reference and noise generators.
//!
//! Noise is drawn from a ChaCha20 stream (`rand_chacha::ChaCha20Rng`, seeded
//! with `seed_from_u64`) through `rand_distr::StandardNormal`, so a seed fixes
//! the sequence on every platform.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Name of the noise generator, recorded in run metadata.
pub const NOISE_GENERATOR: &str = "chacha20/seed_from_u64+standard_normal";

/// Number of high samples in one period of a square wave.
pub fn high_samples(period: usize, duty: f64) -> usize {
    ((duty * period as f64).round() as usize).min(period)
}

/// Square wave: `+amplitude` for the first `round(duty * period)` samples of
/// each period and `-amplitude` for the rest, shifted by `phase` samples.
pub fn square_wave(
    period: usize,
    duty: f64,
    amplitude: f64,
    length: usize,
    phase: usize,
) -> Result<Vec<f64>> {
    if period < 2 {
        return Err(Error::InvalidArgument(format!("square wave period {period} < 2")));
    }
    if length == 0 {
        return Err(Error::InvalidArgument("square wave length must be positive".into()));
    }
    if !(duty > 0.0 && duty < 1.0) {
        return Err(Error::InvalidArgument(format!("duty {duty} outside (0, 1)")));
    }
    let high = high_samples(period, duty);
    Ok((0..length)
        .map(|i| {
            if (i + phase) % period < high {
                amplitude
            } else {
                -amplitude
            }
        })
        .collect())
}

/// Concatenation of one square-wave period per amplitude.
pub fn excitation_reference(period: usize, duty: f64, amplitudes: &[f64]) -> Result<Vec<f64>> {
    if amplitudes.is_empty() {
        return Err(Error::InvalidArgument("empty amplitude list".into()));
    }
    let mut out = Vec::with_capacity(period * amplitudes.len());
    for &a in amplitudes {
        out.extend(square_wave(period, duty, a, period, 0)?);
    }
    Ok(out)
}

/// Zero-mean Gaussian sequence with per-channel standard deviation `sigma`
/// (`sigma.len()` channels, one column per sample).
pub fn gaussian_noise(seed: u64, sigma: &[f64], length: usize) -> Result<DMatrix<f64>> {
    if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise std {s} must be finite and >= 0")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(sigma.len(), length);
    for t in 0..length {
        for (ch, &s) in sigma.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[(ch, t)] = s * z;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_wave_basic() {
        let w = square_wave(4, 0.5, 1.0, 8, 0).unwrap();
        assert_eq!(w, vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn square_wave_phase_shift() {
        let w = square_wave(4, 0.5, 1.0, 4, 1).unwrap();
        assert_eq!(w, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn square_wave_rejects_bad_args() {
        assert!(square_wave(1, 0.5, 1.0, 4, 0).is_err());
        assert!(square_wave(4, 0.5, 1.0, 0, 0).is_err());
        assert!(square_wave(4, 1.0, 1.0, 4, 0).is_err());
    }

    #[test]
    fn excitation_of_zero_amplitude_is_zero() {
        let r = excitation_reference(10, 0.7, &[0.0]).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_sigma_is_silent() {
        let e = gaussian_noise(3, &[0.0, 0.0], 50).unwrap();
        assert!(e.iter().all(|v| *v == 0.0));
    }
}
