//! Noise-level calibration.
//!
//! The SNR of an offline experiment is
//! `10 log10(var(y_0) / var(y_e))`, where `y_0` is the noise-free
//! closed-loop response to the collection reference and `y_e` the
//! noise-induced output component. Variances are pooled over channels (mean
//! of the per-channel variances). `var(y_e)` is the exact stationary variance
//! of the closed-loop `e -> y` path, so calibration does not depend on a noise
//! realization. Since the innovation gain `K` is synthesized with
//! `Rv = σ²`, the noise path itself changes with `σ` and the calibration
//! searches numerically.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::RV_FLOOR;
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::sslib::{benchmarks, closed_loop, gaussian_noise, simulate_closed_loop, ControllerModel, StateSpaceModel};

/// Tolerance of the search on the achieved SNR, in dB.
pub const SNR_TOL_DB: f64 = 0.01;
const MAX_BRACKET_STEPS: usize = 60;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrCalibration {
    pub sigma: f64,
    pub snr_db: f64,
    pub signal_var: f64,
    /// Noise-induced output variance at `sigma`.
    pub noise_var: f64,
}

/// Pooled (channel-averaged) sample variance.
pub fn pooled_variance(signal: &DMatrix<f64>) -> f64 {
    let (p, n) = signal.shape();
    if p == 0 || n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for row in signal.row_iter() {
        let mean = row.mean();
        total += row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    }
    total / p as f64
}

/// Solution of `P = A P Aᵀ + B Bᵀ` by squaring (Smith) iteration.
pub fn stationary_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(a);
    if !(rho < 1.0) {
        return Err(Error::Calibration(format!("closed loop is not stable (spectral radius {rho})")));
    }
    let mut p = b * b.transpose();
    let mut ak = a.clone();
    for _ in 0..64 {
        let step = &ak * &p * ak.transpose();
        p += &step;
        ak = &ak * &ak;
        if step.norm() <= 1e-16 * p.norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((&p + p.transpose()) * 0.5)
}

/// Stationary pooled output variance per unit innovation variance for a
/// plant that already carries its innovation gain.
pub fn unit_noise_variance(plant: &StateSpaceModel, ctrl: &ControllerModel) -> Result<f64> {
    let cl = closed_loop(plant, ctrl)?;
    let p = stationary_covariance(&cl.a, &cl.b_e)?;
    let cov = &cl.c_y * p * cl.c_y.transpose() + &cl.d_ye * cl.d_ye.transpose();
    Ok(cov.trace() / plant.p() as f64)
}

/// Pooled variance of the noise-free closed-loop response to `reference`
/// from rest.
pub fn signal_variance(plant: &StateSpaceModel, ctrl: &ControllerModel, reference: &DMatrix<f64>) -> Result<f64> {
    let e = DMatrix::zeros(reference.nrows(), reference.ncols());
    let x0 = nalgebra::DVector::zeros(plant.n());
    let xc0 = nalgebra::DVector::zeros(ctrl.n());
    let tr = simulate_closed_loop(plant, ctrl, reference, &e, &x0, &xc0)?;
    Ok(pooled_variance(&tr.y))
}

fn snr_db(signal_var: f64, noise_var: f64) -> f64 {
    10.0 * (signal_var / noise_var).log10()
}

/// Analytic SNR of the offline experiment at innovation std `sigma`; `plant`
/// carries no innovation gain, which is synthesized with
/// `Qw = qw_scale I`, `Rv = max(σ², RV_FLOOR) I`.
pub fn measure_snr(
    plant: &StateSpaceModel,
    ctrl: &ControllerModel,
    reference: &DMatrix<f64>,
    sigma: f64,
    qw_scale: f64,
) -> Result<f64> {
    let s = signal_variance(plant, ctrl, reference)?;
    noise_snr(plant, ctrl, s, sigma, qw_scale)
}

fn noise_snr(plant: &StateSpaceModel, ctrl: &ControllerModel, signal_var: f64, sigma: f64, qw_scale: f64) -> Result<f64> {
    let with_k = benchmarks::with_innovation_gain(plant.clone(), qw_scale, (sigma * sigma).max(RV_FLOOR))?;
    let v = unit_noise_variance(&with_k, ctrl)? * sigma * sigma;
    Ok(snr_db(signal_var, v))
}

/// SNR of one noise realization: the noise-induced component is the
/// difference between the noisy and the noise-free closed-loop responses.
pub fn measure_snr_empirical(
    plant: &StateSpaceModel,
    ctrl: &ControllerModel,
    reference: &DMatrix<f64>,
    sigma: f64,
    qw_scale: f64,
    seed: u64,
) -> Result<f64> {
    let with_k = benchmarks::with_innovation_gain(plant.clone(), qw_scale, (sigma * sigma).max(RV_FLOOR))?;
    let (p, n) = reference.shape();
    let e = gaussian_noise(seed, &vec![sigma; p], n)?;
    let x0 = nalgebra::DVector::zeros(plant.n());
    let xc0 = nalgebra::DVector::zeros(ctrl.n());
    let clean = simulate_closed_loop(&with_k, ctrl, reference, &DMatrix::zeros(p, n), &x0, &xc0)?;
    let noisy = simulate_closed_loop(&with_k, ctrl, reference, &e, &x0, &xc0)?;
    Ok(snr_db(pooled_variance(&clean.y), pooled_variance(&(noisy.y - &clean.y))))
}

/// Find `σ` whose analytic SNR is within [`SNR_TOL_DB`] of `target_db` by
/// bisection on `log σ` after geometric bracketing.
pub fn calibrate_snr(
    plant: &StateSpaceModel,
    ctrl: &ControllerModel,
    reference: &DMatrix<f64>,
    target_db: f64,
    qw_scale: f64,
) -> Result<SnrCalibration> {
    if !target_db.is_finite() {
        return Err(Error::Calibration(format!("target SNR {target_db} dB must be finite")));
    }
    let signal_var = signal_variance(plant, ctrl, reference)?;
    if !(signal_var > 0.0) {
        return Err(Error::Calibration("the collection reference produces no output variance".into()));
    }
    // SNR falls as log σ grows; f > 0 means σ is too small.
    let f = |log_sigma: f64| -> Result<f64> {
        Ok(noise_snr(plant, ctrl, signal_var, log_sigma.exp(), qw_scale)? - target_db)
    };
    let mut lo = 0.5 * (signal_var.ln() - target_db / 10.0 * std::f64::consts::LN_10);
    let mut hi = lo;
    let (mut f_lo, mut f_hi) = (f(lo)?, f(hi)?);
    let mut steps = 0;
    while f_lo < 0.0 {
        lo -= 1.0;
        f_lo = f(lo)?;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::Calibration(format!("cannot bracket {target_db} dB from above")));
        }
    }
    while f_hi > 0.0 {
        hi += 1.0;
        f_hi = f(hi)?;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::Calibration(format!("cannot bracket {target_db} dB from below")));
        }
    }
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    for _ in 0..MAX_BISECTIONS {
        if best.1.abs() <= SNR_TOL_DB {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.abs() < best.1.abs() {
            best = (mid, f_mid);
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1.abs() > SNR_TOL_DB {
        return Err(Error::Calibration(format!(
            "search stalled {:.3} dB away from {target_db} dB",
            best.1
        )));
    }
    let sigma = best.0.exp();
    let snr = best.1 + target_db;
    Ok(SnrCalibration {
        sigma,
        snr_db: snr,
        signal_var,
        noise_var: signal_var / 10f64.powf(snr / 10.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sslib::benchmarks::{siso_controller, siso_plant};

    #[test]
    fn smith_iteration_matches_scalar_formula() {
        let a = DMatrix::from_element(1, 1, 0.9);
        let b = DMatrix::from_element(1, 1, 2.0);
        let p = stationary_covariance(&a, &b).unwrap();
        assert!((p[(0, 0)] - 4.0 / (1.0 - 0.81)).abs() < 1e-10);
        assert!(stationary_covariance(&DMatrix::from_element(1, 1, 1.0), &b).is_err());
    }

    #[test]
    fn pooled_variance_of_alternating_signal() {
        let s = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((pooled_variance(&s) - 0.5 * 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn calibration_hits_target() {
        let reference = DMatrix::from_fn(1, 600, |_, t| if (t / 50) % 2 == 0 { 1.0 } else { -1.0 });
        let cal = calibrate_snr(&siso_plant(), &siso_controller(), &reference, 25.0, 0.01).unwrap();
        assert!((cal.snr_db - 25.0).abs() <= SNR_TOL_DB);
        let again = measure_snr(&siso_plant(), &siso_controller(), &reference, cal.sigma, 0.01).unwrap();
        assert!((again - 25.0).abs() <= SNR_TOL_DB);
        assert!(calibrate_snr(&siso_plant(), &siso_controller(), &reference, f64::INFINITY, 0.01).is_err());
    }
}
