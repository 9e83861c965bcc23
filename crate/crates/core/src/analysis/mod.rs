//! Closed-form discriminant-gain and error-probability expressions.

mod special;

pub use special::{exp_integral_e1, q_function, scaled_exp_integral_e1, EULER_GAMMA};

use crate::error::{Error, Result};

/// Below this equivalent SNR the Rayleigh-averaged gain uses its asymptotic
/// series instead of `e^{1/rho} E_1(1/rho)`.
const ASYMPTOTIC_SNR: f64 = 1e-2;

/// Exact error probability of the equal-prior binary Gaussian problem with
/// discriminant gain `dg`: `Q(sqrt(dg / 2))`.
pub fn binary_error_probability(dg: f64) -> f64 {
    q_function((dg.max(0.0) / 2.0).sqrt())
}

/// `(L - 1) Q(sqrt(DG_min / 2))` together with its inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    pub dg_min: f64,
    pub num_classes: usize,
    pub value: f64,
}

impl ErrorBound {
    /// False when the bound exceeds one and so says nothing about a
    /// probability. The value is kept as computed either way.
    pub fn is_informative(&self) -> bool {
        self.value <= 1.0
    }
}

pub fn union_lower_bound(dg_min: f64, num_classes: usize) -> Result<ErrorBound> {
    if num_classes < 2 {
        return Err(Error::param(
            "num_classes",
            format!("need at least 2 classes, got {num_classes}"),
        ));
    }
    if !(dg_min >= 0.0) {
        return Err(Error::param(
            "dg_min",
            format!("must be nonnegative, got {dg_min}"),
        ));
    }
    Ok(ErrorBound {
        dg_min,
        num_classes,
        value: (num_classes - 1) as f64 * binary_error_probability(dg_min),
    })
}

/// `sum_m delta_m^2 / sigma_m^2`, the Mahalanobis distance under a diagonal
/// covariance.
pub fn multivariate_dg(gaps: &[f64], variances: &[f64]) -> Result<f64> {
    if gaps.len() != variances.len() {
        return Err(Error::DimensionMismatch {
            what: "variances",
            expected: gaps.len(),
            got: variances.len(),
        });
    }
    if let Some(m) = variances.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::param(
            "variances",
            format!("variance {m} must be positive, got {}", variances[m]),
        ));
    }
    Ok(gaps.iter().zip(variances).map(|(d, v)| d / v).sum())
}

/// Equivalent receive SNR `rho = s^2 P_c / (sigma_w^2 nu^2)` of one subcarrier.
pub fn equivalent_snr(class_var: f64, comm_power: f64, noise_power: f64, signal_power: f64) -> f64 {
    class_var * comm_power / (noise_power * signal_power)
}

/// Expected single-carrier discriminant gain over `|h|^2 ~ Exp(1)`:
/// `DG_max [1 - (1/rho) e^{1/rho} E_1(1/rho)]`.
pub fn average_dg_closed_form(dg_max: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || rho.is_nan() {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    if !(dg_max >= 0.0) {
        return Err(Error::param(
            "dg_max",
            format!("must be nonnegative, got {dg_max}"),
        ));
    }
    let fraction = if rho < ASYMPTOTIC_SNR {
        low_snr_fraction(rho)
    } else {
        let z = 1.0 / rho;
        1.0 - z * scaled_exp_integral_e1(z)?
    };
    Ok(dg_max * fraction)
}

/// `1 - z e^z E_1(z)` at `z = 1/rho` from `sum_{k>=1} (-1)^{k+1} k! rho^k`,
/// truncated at its smallest term.
fn low_snr_fraction(rho: f64) -> f64 {
    let mut term = rho;
    let mut sum = rho;
    let mut k = 1.0;
    loop {
        k += 1.0;
        let next = -term * k * rho;
        if next.abs() >= term.abs() || next.abs() <= 1e-18 * sum.abs() {
            break;
        }
        sum += next;
        term = next;
    }
    sum
}
