//! Gaussian tail probability and the exponential integral `E_1`.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument `E_1` uses its power series, above it the continued
/// fraction. Both agree to ~1e-15 relative on `[0.5, 2]`.
const SERIES_CUTOFF: f64 = 1.0;

/// `Q(x) = P(Z > x)` for a standard normal `Z`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `E_1(z) = int_z^inf e^{-t} / t dt` for `z > 0`.
pub fn exp_integral_e1(z: f64) -> Result<f64> {
    check_argument(z)?;
    if z < SERIES_CUTOFF {
        Ok(e1_series(z))
    } else {
        Ok((-z).exp() * e1_scaled_continued_fraction(z))
    }
}

/// `e^z E_1(z)`, finite for every `z > 0` (no overflow of `e^z`).
pub fn scaled_exp_integral_e1(z: f64) -> Result<f64> {
    check_argument(z)?;
    if z < SERIES_CUTOFF {
        Ok(z.exp() * e1_series(z))
    } else {
        Ok(e1_scaled_continued_fraction(z))
    }
}

fn check_argument(z: f64) -> Result<()> {
    if !(z > 0.0) || z.is_nan() {
        return Err(Error::param(
            "z",
            format!("exponential integral needs z > 0, got {z}"),
        ));
    }
    Ok(())
}

/// `-gamma - ln z - sum_{k>=1} (-z)^k / (k k!)`.
pub(crate) fn e1_series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = 1.0; // (-z)^k / k!
    for k in 1..200 {
        power *= -z / k as f64;
        let term = power / k as f64;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}

/// `e^z E_1(z)` by the modified Lentz evaluation of
/// `1 / (z + 1 - 1 / (z + 3 - 4 / (z + 5 - ...)))`.
pub(crate) fn e1_scaled_continued_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() <= 1e-16 {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre quadrature of `f` over `[a, b]`.
    fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        // 10-point rule
        const X: [f64; 5] = [
            0.148_874_338_981_631_2,
            0.433_395_394_129_247_2,
            0.679_409_568_299_024_4,
            0.865_063_366_688_984_5,
            0.973_906_528_517_171_7,
        ];
        const W: [f64; 5] = [
            0.295_524_224_714_752_9,
            0.269_266_719_309_996_4,
            0.219_086_362_515_982_04,
            0.149_451_349_150_580_6,
            0.066_671_344_308_688_14,
        ];
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let half = 0.5 * h;
            for (x, w) in X.iter().zip(W) {
                total += w * half * (f(mid - half * x) + f(mid + half * x));
            }
        }
        total
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) < 1e-300);
        for x in [0.3, 1.0, 2.5, 5.0, 8.0] {
            assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn q_function_matches_quadrature() {
        // Q(x) = 1/2 - int_0^x phi(t) dt
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let x = 1.644_853_626_951_472_2;
        let oracle = 0.5 - gauss_legendre(phi, 0.0, x, 64);
        assert!((oracle - 0.05).abs() < 1e-12);
        assert!((q_function(x) - 0.05).abs() < 1e-9);
        assert!((q_function(x) - oracle).abs() < 1e-13);

        // deep tail: integrate phi over [x, x + 12] directly
        for x in [3.0, 6.0, 8.0] {
            let oracle = gauss_legendre(phi, x, x + 12.0, 400);
            let rel = (q_function(x) - oracle).abs() / oracle;
            assert!(rel < 1e-12, "x={x}: rel {rel:e}");
        }
    }

    #[test]
    fn e1_matches_quadrature() {
        // substitute t = z + s: E_1(z) = e^{-z} int_0^inf e^{-s}/(z+s) ds,
        // then s = u/(1-u) on [0, 1)
        let oracle = |z: f64| {
            let f = |u: f64| {
                if u >= 1.0 {
                    return 0.0;
                }
                let s = u / (1.0 - u);
                (-s).exp() / (z + s) / ((1.0 - u) * (1.0 - u))
            };
            (-z).exp() * gauss_legendre(f, 0.0, 1.0, 4000)
        };
        let reference = 0.219_383_934_395_520_27;
        assert!((oracle(1.0) - reference).abs() < 1e-13);
        assert!((exp_integral_e1(1.0).unwrap() - reference).abs() < 1e-10 * reference);
        for z in [0.05, 0.3, 0.9, 1.1, 2.0, 5.0, 20.0] {
            let got = exp_integral_e1(z).unwrap();
            let want = oracle(z);
            assert!((got - want).abs() <= 1e-10 * want, "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn e1_small_argument_expansion() {
        // E_1(z) + ln z + gamma = z - z^2/4 + ... -> 0
        let z = 1e-6;
        let leading = exp_integral_e1(z).unwrap() + z.ln() + EULER_GAMMA;
        assert!(leading.abs() < 1e-6);
        assert!((leading - (z - z * z / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn e1_large_argument_bound() {
        for z in [10.0, 100.0, 700.0] {
            let v = exp_integral_e1(z).unwrap();
            assert!(v > 0.0 && v <= (-z).exp() / z);
        }
    }

    #[test]
    fn e1_branches_agree_in_overlap() {
        for i in 0..=60 {
            let z = 0.5 + 1.5 * i as f64 / 60.0;
            let series = z.exp() * e1_series(z);
            let cf = e1_scaled_continued_fraction(z);
            assert!((series - cf).abs() <= 1e-12 * cf, "z={z}");
        }
    }

    #[test]
    fn e1_sandwich_bound_on_log_grid() {
        // 1/(z+1) < e^z E_1(z) < 1/z
        for i in 0..=140 {
            let z = 10f64.powf(-4.0 + 7.0 * i as f64 / 140.0);
            let s = scaled_exp_integral_e1(z).unwrap();
            assert!(s > 1.0 / (z + 1.0) && s < 1.0 / z, "z={z}: {s}");
        }
    }

    #[test]
    fn e1_rejects_nonpositive() {
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-1.0).is_err());
        assert!(scaled_exp_integral_e1(f64::NAN).is_err());
    }
}
