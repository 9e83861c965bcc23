//! Projected-gradient reference solver for the two power-allocation problems.
//!
//! Works in `q_n = nu_n^2 b_n^2`, so the feasible set is the simplex
//! `{q >= 0, sum q = P_c}`. Independent of the water-filling code.

use isac_core::Criterion;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Instance {
    pub gains: Vec<f64>,
    pub noise: f64,
    pub second_moments: Vec<f64>,
    pub variances: Vec<f64>,
    pub gaps: Vec<f64>,
    pub power: f64,
}

pub fn random_instance<R: Rng>(rng: &mut R, subcarriers: usize) -> Instance {
    let mut normal = || -> f64 {
        // Box-Muller keeps the oracle free of distribution crates
        let u: f64 = 1.0 - rng.random::<f64>();
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    };
    let mut raw = Vec::new();
    for _ in 0..subcarriers {
        raw.push((normal(), normal(), normal(), normal()));
    }
    let gains = raw
        .iter()
        .map(|r| (r.0 * r.0 + r.1 * r.1).sqrt() / 2f64.sqrt())
        .collect();
    let variances: Vec<f64> = raw
        .iter()
        .map(|r| 0.25 * 16f64.powf((r.2.tanh() + 1.0) / 2.0))
        .collect();
    let gaps: Vec<f64> = raw.iter().map(|r| r.3 * r.3).collect();
    let second_moments = variances
        .iter()
        .zip(&gaps)
        .map(|(v, g)| v + 0.25 * g)
        .collect();
    Instance {
        gains,
        noise: 10f64.powf(rng.random_range(-2.0..0.0)),
        second_moments,
        variances,
        gaps,
        power: 10f64.powf(rng.random_range(-1.0..1.0)),
    }
}

/// Utility to maximize: minus total MSE, or total discriminant gain.
pub fn utility(criterion: Criterion, inst: &Instance, q: &[f64]) -> f64 {
    (0..q.len())
        .map(|n| {
            let r = inst.gains[n] * inst.gains[n] * q[n] / inst.second_moments[n];
            let s2 = inst.variances[n];
            match criterion {
                Criterion::Mse => -s2 * inst.noise / (r * s2 + inst.noise),
                Criterion::Dg => r * inst.gaps[n] / (r * s2 + inst.noise),
            }
        })
        .sum()
}

fn gradient(criterion: Criterion, inst: &Instance, q: &[f64]) -> Vec<f64> {
    (0..q.len())
        .map(|n| {
            let k = inst.gains[n] * inst.gains[n] / inst.second_moments[n];
            let s2 = inst.variances[n];
            let d = k * q[n] * s2 + inst.noise;
            let top = match criterion {
                Criterion::Mse => s2 * s2,
                Criterion::Dg => inst.gaps[n],
            };
            k * top * inst.noise / (d * d)
        })
        .collect()
}

/// Euclidean projection onto `{q >= 0, sum q = total}`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - total) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Maximizer of the utility on the simplex, returned as precoders `b_n`.
pub fn projected_gradient(criterion: Criterion, inst: &Instance) -> Vec<f64> {
    let n = inst.gains.len();
    let mut q = vec![inst.power / n as f64; n];
    let mut f = utility(criterion, inst, &q);
    let mut step = inst.power;
    for _ in 0..20_000 {
        let g = gradient(criterion, inst, &q);
        loop {
            let cand: Vec<f64> = project_simplex(
                &q.iter()
                    .zip(&g)
                    .map(|(x, d)| x + step * d)
                    .collect::<Vec<_>>(),
                inst.power,
            );
            let fc = utility(criterion, inst, &cand);
            let lin: f64 = cand
                .iter()
                .zip(&q)
                .zip(&g)
                .map(|((c, x), d)| (c - x) * d)
                .sum();
            let dist: f64 = cand.iter().zip(&q).map(|(c, x)| (c - x) * (c - x)).sum();
            if fc >= f + lin - dist / (2.0 * step) || step < 1e-300 {
                let moved = dist.sqrt();
                q = cand;
                f = fc;
                step *= 1.5;
                if moved <= 1e-15 * inst.power {
                    return to_precoders(inst, &q);
                }
                break;
            }
            step /= 2.0;
        }
    }
    to_precoders(inst, &q)
}

fn to_precoders(inst: &Instance, q: &[f64]) -> Vec<f64> {
    q.iter()
        .zip(&inst.second_moments)
        .map(|(x, nu2)| (x / nu2).sqrt())
        .collect()
}

/// Utility of a precoder vector.
pub fn utility_of_precoders(criterion: Criterion, inst: &Instance, b: &[f64]) -> f64 {
    let q: Vec<f64> = b
        .iter()
        .zip(&inst.second_moments)
        .map(|(x, nu2)| x * x * nu2)
        .collect();
    utility(criterion, inst, &q)
}
