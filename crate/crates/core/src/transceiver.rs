//! MSE-optimal and discriminant-gain-optimal transceiver designs.
//!
//! Subcarrier `n` carries feature `n`: `y_n = h_n b_n x~_n + w_n`, and the
//! receiver forms `x^_n = a_n y_n`. Precoders are phase matched, so only
//! `|h_n|` matters and `b_n` is a nonnegative real. The transmit power is
//! `sum_n b_n^2 nu_n^2 <= P_c`.
//!
//! Both multi-carrier designs have the water-filling form
//!
//! ```text
//! |h_n|^2 b_n^2 = ( c_n / sqrt(lambda) - sigma_w^2 / s_n^2 )^+
//! ```
//!
//! with `s_n^2` the effective (sensing-inflated) class variance and
//!
//! ```text
//! MSE: c_n = sigma_w |h_n| / nu_n
//! DG:  c_n = sigma_w |h_n| |delta_n| / (nu_n s_n^2)
//! ```
//!
//! The water level `lambda` is found by bisection so that the budget is spent
//! exactly.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Gains below this are treated as unusable subcarriers.
pub const GAIN_FLOOR: f64 = 1e-12;

/// Relative tolerance of the water-level solve on the power residual.
pub const POWER_TOLERANCE: f64 = 1e-12;

/// Iteration cap of the water-level bisection.
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Power exhaustion tolerance accepted when bisection runs out of floats.
const FALLBACK_POWER_TOLERANCE: f64 = 1e-9;

const MAX_BRACKET_STEPS: usize = 2100;

/// Phase-compensated channel magnitudes and receiver noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: Vec<f64>,
    noise_power: f64,
}

impl ChannelRealization {
    pub fn new(gains: Vec<f64>, noise_power: f64) -> Result<Self> {
        if let Some(n) = gains.iter().position(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::param(
                "channel gains",
                format!("gain {n} must be nonnegative and finite, got {}", gains[n]),
            ));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::param(
                "channel noise power",
                format!("must be positive, got {noise_power}"),
            ));
        }
        Ok(Self { gains, noise_power })
    }

    /// `|h_n|`.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Channel restricted to the given subcarriers, in the given order.
    pub fn select(&self, subcarriers: &[usize]) -> Self {
        Self {
            gains: subcarriers.iter().map(|&n| self.gains[n]).collect(),
            noise_power: self.noise_power,
        }
    }
}

/// Design criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Mse,
    Dg,
}

impl Criterion {
    pub const ALL: [Criterion; 2] = [Criterion::Mse, Criterion::Dg];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Mse => "mse",
            Criterion::Dg => "dg",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Criterion::Mse),
            "dg" => Ok(Criterion::Dg),
            other => Err(Error::param(
                "criterion",
                format!("expected mse or dg, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignStatus {
    /// At least one subcarrier is active and the budget is spent exactly.
    Active,
    /// Nothing worth transmitting: zero budget, or no informative subcarrier.
    /// Every precoder is zero and the water level is infinite.
    Degenerate,
}

/// Per-subcarrier precoders `b_n`, receive scalings `a_n` and water level.
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverDesign {
    pub precoders: Vec<f64>,
    pub scalings: Vec<f64>,
    pub water_level: f64,
    pub criterion: Criterion,
    pub status: DesignStatus,
}

impl TransceiverDesign {
    /// All-zero design of `len` subcarriers.
    pub fn silent(len: usize, criterion: Criterion) -> Self {
        Self {
            precoders: vec![0.0; len],
            scalings: vec![0.0; len],
            water_level: f64::INFINITY,
            criterion,
            status: DesignStatus::Degenerate,
        }
    }

    pub fn len(&self) -> usize {
        self.precoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precoders.is_empty()
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.precoders[n] > 0.0
    }

    /// `sum_n b_n^2 nu_n^2`.
    pub fn transmit_power(&self, second_moments: &[f64]) -> f64 {
        self.precoders
            .iter()
            .zip(second_moments)
            .map(|(b, nu2)| b * b * nu2)
            .sum()
    }
}

/// Wiener receive scaling `a = |h| b nu^2 / (|h b|^2 nu^2 + sigma_w^2)`.
pub fn mmse_scaling(gain: f64, precoder: f64, signal_power: f64, noise_power: f64) -> f64 {
    let hb = gain * precoder;
    hb * signal_power / (hb * hb * signal_power + noise_power)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleCarrierDesign {
    pub precoder: f64,
    pub scaling: f64,
    pub mse: f64,
}

/// Full-power, phase-matched single-carrier design.
pub fn single_carrier_mse_design(
    gain: f64,
    signal_power: f64,
    noise_power: f64,
    comm_power: f64,
) -> Result<SingleCarrierDesign> {
    if !(comm_power > 0.0) || comm_power.is_nan() {
        return Err(Error::param(
            "communication power",
            format!("must be positive, got {comm_power}"),
        ));
    }
    if !(signal_power > 0.0 && noise_power > 0.0 && gain >= 0.0) {
        return Err(Error::param(
            "single-carrier link",
            "need gain >= 0 and positive signal and noise powers",
        ));
    }
    let precoder = (comm_power / signal_power).sqrt();
    Ok(SingleCarrierDesign {
        precoder,
        scaling: mmse_scaling(gain, precoder, signal_power, noise_power),
        mse: signal_power * noise_power / (gain * gain * comm_power + noise_power),
    })
}

/// Discriminant gain reached by the single-carrier design (identical for
/// the MSE and DG criteria):
/// `|h|^2 P_c (gap^2 / s^2) / (|h|^2 P_c + sigma_w^2 nu^2 / s^2)`.
pub fn single_carrier_dg(
    gain: f64,
    comm_power: f64,
    gap_sq: f64,
    class_var: f64,
    signal_power: f64,
    noise_power: f64,
) -> f64 {
    let hp = gain * gain * comm_power;
    if hp == 0.0 {
        return 0.0;
    }
    hp * (gap_sq / class_var) / (hp + noise_power * signal_power / class_var)
}

/// MSE-optimal multi-carrier design.
pub fn waterfill_mse(
    channel: &ChannelRealization,
    second_moments: &[f64],
    effective_variances: &[f64],
    comm_power: f64,
) -> Result<TransceiverDesign> {
    check_lengths(channel, second_moments, effective_variances, None)?;
    check_budget(comm_power)?;
    let sigma_w = channel.noise_power.sqrt();
    let weights = channel
        .gains
        .iter()
        .zip(second_moments)
        .map(|(h, nu2)| sigma_w * h / nu2.sqrt())
        .collect();
    solve(
        Criterion::Mse,
        channel,
        second_moments,
        effective_variances,
        weights,
        comm_power,
    )
}

/// DG-optimal multi-carrier design. `gaps` are the squared mean gaps
/// `delta_n^2`; subcarriers with a zero gap never receive power.
pub fn waterfill_dg(
    channel: &ChannelRealization,
    second_moments: &[f64],
    effective_variances: &[f64],
    gaps: &[f64],
    comm_power: f64,
) -> Result<TransceiverDesign> {
    check_lengths(channel, second_moments, effective_variances, Some(gaps))?;
    check_budget(comm_power)?;
    if let Some(n) = gaps.iter().position(|&g| !(g >= 0.0)) {
        return Err(Error::param(
            "mean gaps",
            format!("gap {n} must be nonnegative, got {}", gaps[n]),
        ));
    }
    let sigma_w = channel.noise_power.sqrt();
    let weights = channel
        .gains
        .iter()
        .zip(second_moments)
        .zip(effective_variances.iter().zip(gaps))
        .map(|((h, nu2), (s2, d2))| sigma_w * h * d2.sqrt() / (nu2.sqrt() * s2))
        .collect();
    solve(
        Criterion::Dg,
        channel,
        second_moments,
        effective_variances,
        weights,
        comm_power,
    )
}

/// Dispatches on `criterion`; a zero budget yields the silent design.
pub fn design(
    criterion: Criterion,
    channel: &ChannelRealization,
    second_moments: &[f64],
    effective_variances: &[f64],
    gaps: &[f64],
    comm_power: f64,
) -> Result<TransceiverDesign> {
    if comm_power == 0.0 {
        check_lengths(channel, second_moments, effective_variances, Some(gaps))?;
        return Ok(TransceiverDesign::silent(channel.len(), criterion));
    }
    match criterion {
        Criterion::Mse => waterfill_mse(channel, second_moments, effective_variances, comm_power),
        Criterion::Dg => waterfill_dg(
            channel,
            second_moments,
            effective_variances,
            gaps,
            comm_power,
        ),
    }
}

fn check_budget(comm_power: f64) -> Result<()> {
    if !(comm_power > 0.0 && comm_power.is_finite()) {
        return Err(Error::param(
            "communication power",
            format!("must be positive and finite, got {comm_power}"),
        ));
    }
    Ok(())
}

fn check_lengths(
    channel: &ChannelRealization,
    second_moments: &[f64],
    effective_variances: &[f64],
    gaps: Option<&[f64]>,
) -> Result<()> {
    let n = channel.len();
    expect_len("second moments", n, second_moments.len())?;
    expect_len("effective variances", n, effective_variances.len())?;
    if let Some(g) = gaps {
        expect_len("mean gaps", n, g.len())?;
    }
    Ok(())
}

fn expect_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Water-filling profile `p_n(lambda) = (c_n / sqrt(lambda) - d_n)^+ / g_n`.
struct Profile<'a> {
    weights: Vec<f64>,
    floors: Vec<f64>,
    gains: &'a [f64],
    second_moments: &'a [f64],
}

impl Profile<'_> {
    fn usable(&self, n: usize) -> bool {
        self.gains[n] >= GAIN_FLOOR && self.weights[n] > 0.0
    }

    /// `|h_n|^2 b_n^2`, zero on inactive subcarriers (ties included).
    fn received_power(&self, n: usize, lambda: f64) -> f64 {
        if !self.usable(n) {
            return 0.0;
        }
        let x = self.weights[n] / lambda.sqrt() - self.floors[n];
        if x > 0.0 {
            x
        } else {
            0.0
        }
    }

    fn power(&self, lambda: f64) -> f64 {
        (0..self.gains.len())
            .map(|n| {
                let g = self.gains[n];
                let r = self.received_power(n, lambda);
                if r > 0.0 {
                    r / (g * g) * self.second_moments[n]
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn precoders(&self, lambda: f64) -> Vec<f64> {
        (0..self.gains.len())
            .map(|n| {
                let r = self.received_power(n, lambda);
                if r > 0.0 {
                    r.sqrt() / self.gains[n]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn solve(
    criterion: Criterion,
    channel: &ChannelRealization,
    second_moments: &[f64],
    effective_variances: &[f64],
    weights: Vec<f64>,
    budget: f64,
) -> Result<TransceiverDesign> {
    if channel.gains.iter().all(|&g| g < GAIN_FLOOR) {
        return Err(Error::DeadChannel { floor: GAIN_FLOOR });
    }
    let floors = effective_variances
        .iter()
        .map(|s2| channel.noise_power / s2)
        .collect();
    let profile = Profile {
        weights,
        floors,
        gains: &channel.gains,
        second_moments,
    };
    if !(0..channel.len()).any(|n| profile.usable(n)) {
        // only reachable for DG with every usable subcarrier uninformative
        return Ok(TransceiverDesign::silent(channel.len(), criterion));
    }

    let lambda = water_level(&profile, budget)?;
    let precoders = profile.precoders(lambda);
    let scalings = precoders
        .iter()
        .zip(&channel.gains)
        .zip(effective_variances)
        .map(|((&b, &h), &s2)| mmse_scaling(h, b, s2, channel.noise_power))
        .collect();
    Ok(TransceiverDesign {
        precoders,
        scalings,
        water_level: lambda,
        criterion,
        status: DesignStatus::Active,
    })
}

/// Bisection on `lambda` for `power(lambda) = budget`; `power` is continuous
/// and nonincreasing, strictly decreasing wherever it is positive.
fn water_level(profile: &Profile<'_>, budget: f64) -> Result<f64> {
    let tolerance = POWER_TOLERANCE * budget;
    let residual = |lambda: f64| profile.power(lambda) - budget;

    let start = residual(1.0);
    if start.abs() <= tolerance {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    let mut steps = 0;
    if start > 0.0 {
        // too much power: raise the level
        while residual(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
                return Err(bracket_failure(lo, hi, residual(lo), budget));
            }
        }
    } else {
        while residual(lo) < 0.0 {
            hi = lo;
            lo /= 2.0;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || lo == 0.0 {
                return Err(bracket_failure(lo, hi, residual(hi), budget));
            }
        }
    }

    let mut best = (f64::INFINITY, lo);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() <= tolerance {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            // bracket exhausted at float resolution
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 <= FALLBACK_POWER_TOLERANCE * budget {
        return Ok(best.1);
    }
    Err(Error::WaterLevel {
        iterations: MAX_BISECTION_ITERATIONS,
        lo,
        hi,
        residual: best.0,
        budget,
    })
}

fn bracket_failure(lo: f64, hi: f64, residual: f64, budget: f64) -> Error {
    Error::WaterLevel {
        iterations: 0,
        lo,
        hi,
        residual,
        budget,
    }
}

/// Discriminant gain per subcarrier and in total.
#[derive(Debug, Clone, PartialEq)]
pub struct AchievedDg {
    pub per_subcarrier: Vec<f64>,
    pub total: f64,
}

/// `DG_n = |h_n b_n|^2 delta_n^2 / (|h_n b_n|^2 s_n^2 + sigma_w^2)`; the
/// receive scaling cancels.
pub fn achieved_dg(
    design: &TransceiverDesign,
    channel: &ChannelRealization,
    effective_variances: &[f64],
    gaps: &[f64],
) -> Result<AchievedDg> {
    let n = channel.len();
    expect_len("effective variances", n, effective_variances.len())?;
    expect_len("mean gaps", n, gaps.len())?;
    expect_len("design", n, design.len())?;
    let per_subcarrier: Vec<f64> = (0..channel.len())
        .map(|n| {
            let hb = channel.gains[n] * design.precoders[n];
            let r = hb * hb;
            if r == 0.0 {
                0.0
            } else if r.is_infinite() {
                gaps[n] / effective_variances[n]
            } else {
                r * gaps[n] / (r * effective_variances[n] + channel.noise_power)
            }
        })
        .collect();
    let total = per_subcarrier.iter().sum();
    Ok(AchievedDg {
        per_subcarrier,
        total,
    })
}

/// Sum of per-subcarrier MSEs `s_n^2 sigma_w^2 / (|h_n b_n|^2 s_n^2 + sigma_w^2)`.
pub fn total_mse(
    design: &TransceiverDesign,
    channel: &ChannelRealization,
    effective_variances: &[f64],
) -> f64 {
    (0..channel.len())
        .map(|n| {
            let hb = channel.gains[n] * design.precoders[n];
            let s2 = effective_variances[n];
            s2 * channel.noise_power / (hb * hb * s2 + channel.noise_power)
        })
        .sum()
}

/// Largest relative violation of the KKT conditions of the design's
/// problem, in the variable `p_n = b_n^2`.
///
/// On active subcarriers the marginal objective gain must equal
/// `lambda nu_n^2`; on inactive ones it must not exceed it.
pub fn kkt_residual(
    design: &TransceiverDesign,
    channel: &ChannelRealization,
    second_moments: &[f64],
    effective_variances: &[f64],
    gaps: &[f64],
) -> f64 {
    if design.status == DesignStatus::Degenerate {
        return 0.0;
    }
    let noise = channel.noise_power;
    let mut worst = 0.0_f64;
    for n in 0..channel.len() {
        let h = channel.gains[n];
        if h < GAIN_FLOOR {
            continue;
        }
        let g = h * h;
        let p = design.precoders[n] * design.precoders[n];
        let s2 = effective_variances[n];
        let denom = g * p * s2 + noise;
        let marginal = match design.criterion {
            Criterion::Mse => g * s2 * s2 * noise / (denom * denom),
            Criterion::Dg => g * gaps[n] * noise / (denom * denom),
        };
        let price = design.water_level * second_moments[n];
        let ratio = marginal / price;
        let violation = if p > 0.0 {
            (ratio - 1.0).abs()
        } else {
            (ratio - 1.0).max(0.0)
        };
        worst = worst.max(violation);
    }
    worst
}
