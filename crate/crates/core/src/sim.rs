//! Monte Carlo engine.
//!
//! Every trial owns a generator derived from `(seed, trial index)` and draws,
//! in this order: the channel, the class label, the sensed features and the
//! receiver noise. Designs consume no randomness, so two runs that differ only
//! in the design criterion see identical channels, labels and noise (paired
//! comparison). Trials are grouped into fixed-size chunks whose partial sums
//! are reduced in chunk order, which makes results independent of the number
//! of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::analysis::{union_lower_bound, ErrorBound};
use crate::error::{Error, Result};
use crate::model::{FeatureModel, GapMode, PowerBudget, SensingConfig};
use crate::transceiver::{self, achieved_dg, ChannelRealization, Criterion, TransceiverDesign};

pub const DEFAULT_TRIALS: u64 = 200_000;

const CHUNK: u64 = 1024;

/// Generator of trial `trial` in the run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// `|h_n|^2 ~ Exp(1)` independently on each subcarrier.
    RayleighUnit { subcarriers: usize },
    /// The same gains in every trial.
    FixedGains(Vec<f64>),
}

impl ChannelModel {
    pub fn subcarriers(&self) -> usize {
        match self {
            ChannelModel::RayleighUnit { subcarriers } => *subcarriers,
            ChannelModel::FixedGains(g) => g.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_trials: u64,
    pub seed: u64,
    pub channel: ChannelModel,
    /// Receiver noise power `sigma_w^2`.
    pub noise_power: f64,
    pub gap_mode: GapMode,
}

impl SimConfig {
    pub fn rayleigh(subcarriers: usize, noise_power: f64, num_trials: u64, seed: u64) -> Self {
        Self {
            num_trials,
            seed,
            channel: ChannelModel::RayleighUnit { subcarriers },
            noise_power,
            gap_mode: GapMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(Error::param("num_trials", "need at least one trial"));
        }
        if self.channel.subcarriers() == 0 {
            return Err(Error::param("channel", "need at least one subcarrier"));
        }
        if let ChannelModel::FixedGains(g) = &self.channel {
            ChannelRealization::new(g.clone(), self.noise_power)?;
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::param(
                "noise_power",
                format!("must be positive, got {}", self.noise_power),
            ));
        }
        Ok(())
    }
}

pub fn sample_channel<R: Rng + ?Sized>(
    config: &SimConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let gains = match &config.channel {
        ChannelModel::RayleighUnit { subcarriers } => (0..*subcarriers)
            .map(|_| rng.sample::<f64, _>(Exp1).sqrt())
            .collect(),
        ChannelModel::FixedGains(g) => g.clone(),
    };
    ChannelRealization::new(gains, config.noise_power)
}

/// `x^_n = a_n (|h_n| b_n x~_n + w_n)` with `w_n ~ CN(0, sigma_w^2)`.
///
/// Noise is drawn on every subcarrier, active or not.
pub fn transmit_and_receive<R: Rng + ?Sized>(
    features: &[Complex64],
    design: &TransceiverDesign,
    channel: &ChannelRealization,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let n = features.len();
    if design.len() != n || channel.len() != n {
        return Err(Error::DimensionMismatch {
            what: "design/channel subcarriers",
            expected: n,
            got: if design.len() != n {
                design.len()
            } else {
                channel.len()
            },
        });
    }
    let std = (channel.noise_power() / 2.0).sqrt();
    Ok((0..n)
        .map(|i| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let noise = Complex64::new(std * re, std * im);
            let y = features[i] * (channel.gains()[i] * design.precoders[i]) + noise;
            y * design.scalings[i]
        })
        .collect())
}

/// Maximum-likelihood label of `received`; lowest label on ties.
///
/// Under class `l`, `x^_n ~ CN(a_n |h_n| b_n mu_{l,n}, a_n^2 (|h_n b_n|^2 s_n^2 + sigma_w^2))`.
/// Subcarriers without signal look the same under every class and are skipped.
pub fn ml_classify(
    received: &[Complex64],
    model: &FeatureModel,
    effective_variances: &[f64],
    design: &TransceiverDesign,
    channel: &ChannelRealization,
) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for class in 0..model.num_classes() {
        let mean = model.mean(class);
        let mut score = 0.0;
        for n in 0..received.len() {
            let a = design.scalings[n];
            let hb = channel.gains()[n] * design.precoders[n];
            if a * hb == 0.0 {
                continue;
            }
            let var = a * a * (hb * hb * effective_variances[n] + channel.noise_power());
            score -= (received[n] - a * hb * mean[n]).norm_sqr() / var;
        }
        if score > best_score {
            best_score = score;
            best = class;
        }
    }
    best
}

/// Per-dimension statistics shared by every trial at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStatistics {
    pub effective_variances: Vec<f64>,
    pub second_moments: Vec<f64>,
    pub gaps: Vec<f64>,
}

impl LinkStatistics {
    pub fn new(model: &FeatureModel, sensing: &SensingConfig, mode: GapMode) -> Result<Self> {
        Ok(Self {
            effective_variances: model.effective_variances(sensing),
            second_moments: model.feature_second_moments(sensing),
            gaps: model.pairwise_mean_gaps(mode)?,
        })
    }

    /// Per-feature activation weight of `criterion` with the channel factored
    /// out: `s_m^2 / nu_m` for MSE, `|delta_m| / nu_m` for DG.
    pub fn importance(&self, criterion: Criterion) -> Vec<f64> {
        (0..self.second_moments.len())
            .map(|m| {
                let nu = self.second_moments[m].sqrt();
                match criterion {
                    Criterion::Mse => self.effective_variances[m] / nu,
                    Criterion::Dg => self.gaps[m].sqrt() / nu,
                }
            })
            .collect()
    }

    pub fn design(
        &self,
        criterion: Criterion,
        channel: &ChannelRealization,
        comm_power: f64,
    ) -> Result<TransceiverDesign> {
        transceiver::design(
            criterion,
            channel,
            &self.second_moments,
            &self.effective_variances,
            &self.gaps,
            comm_power,
        )
    }

    pub fn total_dg(
        &self,
        design: &TransceiverDesign,
        channel: &ChannelRealization,
    ) -> Result<f64> {
        Ok(achieved_dg(design, channel, &self.effective_variances, &self.gaps)?.total)
    }
}

/// Subcarrier carrying each feature when there are more subcarriers than
/// features: the most important feature goes to the strongest subcarrier,
/// and so on down both rankings. Ties keep the lower index first.
pub fn assign_subcarriers(gains: &[f64], importance: &[f64]) -> Result<Vec<usize>> {
    if gains.len() < importance.len() {
        return Err(Error::DimensionMismatch {
            what: "subcarriers (need at least one per feature)",
            expected: importance.len(),
            got: gains.len(),
        });
    }
    let mut subcarriers: Vec<usize> = (0..gains.len()).collect();
    subcarriers.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut features: Vec<usize> = (0..importance.len()).collect();
    features.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let mut assignment = vec![0; importance.len()];
    for (rank, &m) in features.iter().enumerate() {
        assignment[m] = subcarriers[rank];
    }
    Ok(assignment)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub trials: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub error: f64,
    /// Binomial standard error `sqrt(acc (1 - acc) / trials)`.
    pub stderr: f64,
    /// Achieved total discriminant gain averaged over trials.
    pub mean_total_dg: f64,
}

#[derive(Default)]
struct Partial {
    trials: u64,
    correct: u64,
    dg_sum: f64,
}

/// One operating point: model, sensing, budget and criterion.
struct Link<'a> {
    model: &'a FeatureModel,
    sensing: &'a SensingConfig,
    stats: LinkStatistics,
    comm_power: f64,
    criterion: Criterion,
    config: &'a SimConfig,
    importance: Vec<f64>,
    /// Channel and design of a fixed-gain run, computed once.
    fixed: Option<(ChannelRealization, TransceiverDesign)>,
}

impl<'a> Link<'a> {
    fn new(
        model: &'a FeatureModel,
        sensing: &'a SensingConfig,
        comm_power: f64,
        criterion: Criterion,
        config: &'a SimConfig,
    ) -> Result<Self> {
        config.validate()?;
        if !(comm_power >= 0.0 && comm_power.is_finite()) {
            return Err(Error::param(
                "communication power",
                format!("must be nonnegative, got {comm_power}"),
            ));
        }
        if config.channel.subcarriers() < model.num_dims() {
            return Err(Error::DimensionMismatch {
                what: "subcarriers (need at least one per feature)",
                expected: model.num_dims(),
                got: config.channel.subcarriers(),
            });
        }
        let stats = LinkStatistics::new(model, sensing, config.gap_mode)?;
        let importance = stats.importance(criterion);
        let mut link = Self {
            model,
            sensing,
            stats,
            comm_power,
            criterion,
            config,
            importance,
            fixed: None,
        };
        if let ChannelModel::FixedGains(_) = config.channel {
            // fixed gains draw nothing, any generator will do
            let full = sample_channel(config, &mut trial_rng(config.seed, 0))?;
            let channel = link.feature_channel(&full)?;
            let design = link.stats.design(criterion, &channel, comm_power)?;
            link.fixed = Some((channel, design));
        }
        Ok(link)
    }

    fn feature_channel(&self, full: &ChannelRealization) -> Result<ChannelRealization> {
        if full.len() == self.model.num_dims() {
            return Ok(full.clone());
        }
        Ok(full.select(&assign_subcarriers(full.gains(), &self.importance)?))
    }

    fn draw_design(&self, rng: &mut ChaCha8Rng) -> Result<(ChannelRealization, TransceiverDesign)> {
        let full = sample_channel(self.config, rng)?;
        let channel = self.feature_channel(&full)?;
        let design = self
            .stats
            .design(self.criterion, &channel, self.comm_power)?;
        Ok((channel, design))
    }

    fn trial(&self, trial: u64, classify: bool) -> Result<(bool, f64)> {
        let mut rng = trial_rng(self.config.seed, trial);
        let drawn;
        let (channel, design) = match &self.fixed {
            Some((c, d)) => (c, d),
            None => {
                drawn = self.draw_design(&mut rng)?;
                (&drawn.0, &drawn.1)
            }
        };
        let dg = self.stats.total_dg(design, channel)?;
        if !classify {
            return Ok((false, dg));
        }
        let class = self.model.sample_class(&mut rng);
        let features = self.model.sample_features(self.sensing, class, &mut rng)?;
        let received = transmit_and_receive(&features, design, channel, &mut rng)?;
        let label = ml_classify(
            &received,
            self.model,
            &self.stats.effective_variances,
            design,
            channel,
        );
        Ok((label == class, dg))
    }

    fn run(&self, classify: bool) -> Result<Partial> {
        let total = self.config.num_trials;
        let chunks = total.div_ceil(CHUNK);
        let partials = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut p = Partial::default();
                for t in c * CHUNK..((c + 1) * CHUNK).min(total) {
                    let (correct, dg) = self.trial(t, classify).map_err(|e| Error::Trial {
                        trial: t,
                        source: Box::new(e),
                    })?;
                    p.trials += 1;
                    p.correct += correct as u64;
                    p.dg_sum += dg;
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(partials
            .into_iter()
            .fold(Partial::default(), |acc, p| Partial {
                trials: acc.trials + p.trials,
                correct: acc.correct + p.correct,
                dg_sum: acc.dg_sum + p.dg_sum,
            }))
    }
}

/// Monte Carlo error probability and mean achieved discriminant gain at one
/// operating point. A zero `comm_power` transmits nothing.
pub fn estimate_error(
    model: &FeatureModel,
    sensing: &SensingConfig,
    comm_power: f64,
    criterion: Criterion,
    config: &SimConfig,
) -> Result<ErrorEstimate> {
    let link = Link::new(model, sensing, comm_power, criterion, config)?;
    let p = link.run(true)?;
    let accuracy = p.correct as f64 / p.trials as f64;
    Ok(ErrorEstimate {
        trials: p.trials,
        correct: p.correct,
        accuracy,
        error: 1.0 - accuracy,
        stderr: (accuracy * (1.0 - accuracy) / p.trials as f64).sqrt(),
        mean_total_dg: p.dg_sum / p.trials as f64,
    })
}

/// Mean achieved total discriminant gain over the configured channel draws,
/// without classification.
pub fn mean_achieved_dg(
    model: &FeatureModel,
    sensing: &SensingConfig,
    comm_power: f64,
    criterion: Criterion,
    config: &SimConfig,
) -> Result<f64> {
    let link = Link::new(model, sensing, comm_power, criterion, config)?;
    let p = link.run(false)?;
    Ok(p.dg_sum / p.trials as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Swept variable: `P_c` (linear) or `beta`.
    pub value: f64,
    pub criterion: Criterion,
    pub total_dg_mean: f64,
    pub error_bound: f64,
    pub accuracy: f64,
    pub stderr: f64,
    /// False for operating points that cannot be evaluated (no sensing power).
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub criterion: Criterion,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Valid row with the highest accuracy (first one on ties).
    pub fn argmax_accuracy(&self) -> Option<&SweepRow> {
        self.argmax_by(|r| r.accuracy)
    }

    /// Valid row with the highest mean discriminant gain (first one on ties).
    pub fn argmax_dg(&self) -> Option<&SweepRow> {
        self.argmax_by(|r| r.total_dg_mean)
    }

    fn argmax_by(&self, key: impl Fn(&SweepRow) -> f64) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for row in self.rows.iter().filter(|r| r.valid) {
            if best.is_none_or(|b| key(row) > key(b)) {
                best = Some(row);
            }
        }
        best
    }
}

fn check_grid(grid: &[f64], name: &'static str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param(name, "grid is empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(name, "grid values must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(name, "grid must be strictly increasing"));
    }
    Ok(())
}

fn bound_for(model: &FeatureModel, dg: f64) -> Result<ErrorBound> {
    union_lower_bound(dg, model.num_classes())
}

/// Sweeps the communication power (linear) at fixed sensing. Every grid
/// point reuses the seed, so the same channel draws appear at each power and
/// under each criterion.
pub fn sweep_power(
    model: &FeatureModel,
    sensing: &SensingConfig,
    criterion: Criterion,
    comm_powers: &[f64],
    config: &SimConfig,
) -> Result<SweepResult> {
    check_grid(comm_powers, "communication power grid")?;
    if comm_powers[0] < 0.0 {
        return Err(Error::param(
            "communication power grid",
            "powers must be nonnegative",
        ));
    }
    let rows = comm_powers
        .iter()
        .map(|&pc| {
            let est = estimate_error(model, sensing, pc, criterion, config)?;
            Ok(SweepRow {
                value: pc,
                criterion,
                total_dg_mean: est.mean_total_dg,
                error_bound: bound_for(model, est.mean_total_dg)?.value,
                accuracy: est.accuracy,
                stderr: est.stderr,
                valid: true,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { criterion, rows })
}

/// Sweeps the split ratio `beta` with `P_c = beta P`, `P_r = (1 - beta) P`.
/// `beta = 1` leaves nothing for sensing and yields an invalid row.
pub fn sweep_beta(
    model: &FeatureModel,
    sensing_noise: f64,
    total_power: f64,
    criterion: Criterion,
    betas: &[f64],
    config: &SimConfig,
) -> Result<SweepResult> {
    check_grid(betas, "beta grid")?;
    let rows = betas
        .iter()
        .map(|&beta| {
            let budget = PowerBudget::new(total_power, beta)?;
            if budget.sensing_power() <= 0.0 {
                return Ok(SweepRow {
                    value: beta,
                    criterion,
                    total_dg_mean: f64::NAN,
                    error_bound: f64::NAN,
                    accuracy: f64::NAN,
                    stderr: f64::NAN,
                    valid: false,
                });
            }
            let sensing = budget.sensing(sensing_noise)?;
            let est = estimate_error(model, &sensing, budget.comm_power(), criterion, config)?;
            Ok(SweepRow {
                value: beta,
                criterion,
                total_dg_mean: est.mean_total_dg,
                error_bound: bound_for(model, est.mean_total_dg)?.value,
                accuracy: est.accuracy,
                stderr: est.stderr,
                valid: true,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { criterion, rows })
}

/// Monte Carlo average of the single-carrier discriminant gain
/// `DG_max |h|^2 rho / (|h|^2 rho + 1)` over `|h|^2 ~ Exp(1)`.
pub fn monte_carlo_average_dg(dg_max: f64, rho: f64, draws: u64, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(Error::param("draws", "need at least one draw"));
    }
    if !(rho > 0.0) {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    let sum = chunked(draws, seed, |rng, n| {
        let mut acc = 0.0;
        for _ in 0..n {
            let g: f64 = rng.sample(Exp1);
            acc += g * rho / (g * rho + 1.0);
        }
        acc
    });
    Ok(dg_max * sum / draws as f64)
}

/// Monte Carlo ML error of `num_classes` equiprobable classes equally spaced
/// on a line in `CN(., 1)` noise, adjacent discriminant gain `dg`. Returns
/// `(error, stderr)`; for two classes the exact value is `Q(sqrt(dg / 2))`.
pub fn monte_carlo_line_error(
    dg: f64,
    num_classes: usize,
    draws: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if num_classes < 2 {
        return Err(Error::param("num_classes", "need at least 2 classes"));
    }
    if draws == 0 {
        return Err(Error::param("draws", "need at least one draw"));
    }
    if !(dg >= 0.0) {
        return Err(Error::param("dg", format!("must be nonnegative, got {dg}")));
    }
    let spacing = dg.sqrt();
    let top = (num_classes - 1) as f64;
    let errors = chunked(draws, seed, |rng, n| {
        let mut wrong = 0.0;
        for _ in 0..n {
            let class = rng.random_range(0..num_classes) as f64;
            let noise: f64 = rng.sample(StandardNormal);
            // only the in-phase part carries information
            let x = class * spacing + noise * std::f64::consts::FRAC_1_SQRT_2;
            let decided = if spacing == 0.0 {
                0.0
            } else {
                (x / spacing).round().clamp(0.0, top)
            };
            if decided != class {
                wrong += 1.0;
            }
        }
        wrong
    });
    let error = errors / draws as f64;
    Ok((error, (error * (1.0 - error) / draws as f64).sqrt()))
}

/// Sums `body(rng, n)` over fixed chunks, each with its own stream.
fn chunked(draws: u64, seed: u64, body: impl Fn(&mut ChaCha8Rng, u64) -> f64 + Sync) -> f64 {
    let chunk = 1 << 16;
    let parts: Vec<f64> = (0..draws.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let n = chunk.min(draws - c * chunk);
            body(&mut trial_rng(seed, c), n)
        })
        .collect();
    parts.into_iter().sum()
}
