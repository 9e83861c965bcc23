//! Flat TOML experiment configuration.
//!
//! Every power-like quantity carries its unit in the key: `<name>_db` or
//! `<name>_linear`, never both. Lists are TOML arrays. Unknown keys are
//! rejected so that typos cannot silently fall back to defaults.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use isac_core::sim::{ChannelModel, SimConfig, DEFAULT_TRIALS};
use isac_core::{Criterion, FeatureModel, GapMode, SensingConfig, SynthesisParams};
use toml::{Table, Value};

use crate::error::CliError;
use crate::table::num;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Power-like keys, without their unit suffix.
const POWER_STEMS: &[&str] = &[
    "channel_noise",
    "sensing_noise",
    "sensing_power",
    "snr_r",
    "snr_c",
    "total_power",
    "p_c",
    "rho",
];

const DEFAULT_SEED: u64 = 1;

/// Which criteria a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionSet {
    Mse,
    Dg,
    Both,
}

impl CriterionSet {
    pub fn criteria(self) -> &'static [Criterion] {
        match self {
            CriterionSet::Mse => &[Criterion::Mse],
            CriterionSet::Dg => &[Criterion::Dg],
            CriterionSet::Both => &Criterion::ALL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CriterionSet::Mse => "mse",
            CriterionSet::Dg => "dg",
            CriterionSet::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Some(CriterionSet::Mse),
            "dg" => Some(CriterionSet::Dg),
            "both" => Some(CriterionSet::Both),
            _ => None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub criterion: Option<CriterionSet>,
}

/// Where the feature model comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    File(PathBuf),
    Synthesized(SynthesisParams),
}

/// Settings shared by both sweeps.
#[derive(Debug, Clone)]
pub struct Common {
    pub model_source: ModelSource,
    pub model: FeatureModel,
    pub criteria: CriterionSet,
    pub sim: SimConfig,
}

#[derive(Debug, Clone)]
pub struct PowerSweepConfig {
    pub common: Common,
    pub sensing: SensingConfig,
    /// Communication powers, linear, strictly increasing.
    pub comm_powers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BetaSweepConfig {
    pub common: Common,
    pub total_power: f64,
    /// Sensing noise power `sigma_r^2`.
    pub sensing_noise: f64,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClosedFormsConfig {
    pub rhos: Vec<f64>,
    pub dg_max: f64,
    pub num_classes: usize,
    pub dgs: Vec<f64>,
    pub draws: u64,
    pub seed: u64,
}

/// A parsed file whose keys are consumed one by one; whatever is left over
/// is reported as unknown.
struct Fields {
    table: Table,
    used: BTreeSet<String>,
}

fn config_err(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn as_f64(field: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(config_err(
            field,
            format!("expected a number, got {}", other.type_str()),
        )),
    }
}

impl Fields {
    fn parse(text: &str) -> Result<Self, CliError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err("<file>", e.message().to_string()))?;
        Ok(Self {
            table,
            used: BTreeSet::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.used.insert(key.to_string());
        self.table.get(key).cloned()
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        self.take(key).map(|v| as_f64(key, &v)).transpose()
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(v) => Err(config_err(
                key,
                format!("expected a nonnegative integer, got {v}"),
            )),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(config_err(
                key,
                format!("expected a string, got {}", v.type_str()),
            )),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| as_f64(key, v))
                .collect::<Result<_, _>>()
                .map(Some),
            Some(v) => Err(config_err(
                key,
                format!("expected an array, got {}", v.type_str()),
            )),
        }
    }

    /// Linear value of `<stem>_db` or `<stem>_linear`.
    fn power(&mut self, stem: &str) -> Result<Option<f64>, CliError> {
        let (db_key, lin_key) = (format!("{stem}_db"), format!("{stem}_linear"));
        match (self.f64(&db_key)?, self.f64(&lin_key)?) {
            (Some(_), Some(_)) => Err(config_err(
                stem,
                format!("give only one of `{db_key}` and `{lin_key}`"),
            )),
            (Some(db), None) => finite(&db_key, db).map(|db| Some(db_to_linear(db))),
            (None, Some(lin)) => finite(&lin_key, lin).map(Some),
            (None, None) => Ok(None),
        }
    }

    fn power_list(&mut self, stem: &str) -> Result<Option<Vec<f64>>, CliError> {
        let (db_key, lin_key) = (format!("{stem}_db"), format!("{stem}_linear"));
        match (self.list(&db_key)?, self.list(&lin_key)?) {
            (Some(_), Some(_)) => Err(config_err(
                stem,
                format!("give only one of `{db_key}` and `{lin_key}`"),
            )),
            (Some(db), None) => Ok(Some(db.into_iter().map(db_to_linear).collect())),
            (None, Some(lin)) => Ok(Some(lin)),
            (None, None) => Ok(None),
        }
    }

    fn present(&self, stem: &str) -> Option<String> {
        [
            format!("{stem}_db"),
            format!("{stem}_linear"),
            stem.to_string(),
        ]
        .into_iter()
        .find(|k| self.table.contains_key(k))
    }

    /// Rejects keys belonging to another command's sweep axis.
    fn forbid_axis(&self, stems: &[&str], command: &str) -> Result<(), CliError> {
        for stem in stems {
            if let Some(key) = self.present(stem) {
                return Err(config_err(
                    &key,
                    format!(
                        "exactly one sweep axis per command; `{key}` is not an axis of {command}"
                    ),
                ));
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        for key in self.table.keys() {
            if self.used.contains(key) {
                continue;
            }
            if POWER_STEMS.contains(&key.as_str()) {
                return Err(config_err(
                    key,
                    "power fields need a `_db` or `_linear` suffix",
                ));
            }
            return Err(config_err(key, "unknown key"));
        }
        Ok(())
    }
}

fn finite(field: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(config_err(field, "must be finite"))
    }
}

fn positive(field: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(config_err(
            field,
            format!("must be positive, got {}", num(x)),
        ))
    }
}

fn increasing(field: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(config_err(field, "grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(config_err(field, "grid values must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err(field, "grid must be strictly increasing"));
    }
    Ok(())
}

fn read_file(path: Option<&Path>) -> Result<Fields, CliError> {
    match path {
        None => Fields::parse(""),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Fields::parse(&text)
        }
    }
}

fn common(f: &mut Fields, base: Option<&Path>, ov: &Overrides) -> Result<Common, CliError> {
    let model_source = match f.string("model")? {
        Some(p) => {
            let path = PathBuf::from(&p);
            // relative model paths are resolved against the config file
            let path = match base.and_then(Path::parent) {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            ModelSource::File(path)
        }
        None => ModelSource::Synthesized(SynthesisParams::default()),
    };
    let model = match &model_source {
        ModelSource::File(p) => FeatureModel::load(p).map_err(|e| match e {
            isac_core::Error::Io(source) => CliError::Io {
                path: p.clone(),
                source,
            },
            other => config_err("model", other.to_string()),
        })?,
        ModelSource::Synthesized(params) => FeatureModel::synthesize(params)?,
    };

    let criteria = match (ov.criterion, f.string("criterion")?) {
        (Some(c), _) => c,
        (None, Some(s)) => CriterionSet::parse(&s).ok_or_else(|| {
            config_err("criterion", format!("expected mse, dg or both, got `{s}`"))
        })?,
        (None, None) => CriterionSet::Both,
    };
    let seed = ov.seed.or(f.u64("seed")?).unwrap_or(DEFAULT_SEED);
    let num_trials = ov.trials.or(f.u64("trials")?).unwrap_or(DEFAULT_TRIALS);
    if num_trials == 0 {
        return Err(config_err("trials", "need at least one trial"));
    }
    let gap_mode = match f.string("gap_mode")? {
        Some(s) => s
            .parse::<GapMode>()
            .map_err(|e| config_err("gap_mode", e.to_string()))?,
        None => GapMode::default(),
    };
    let noise_power = positive("channel_noise", f.power("channel_noise")?.unwrap_or(0.1))?;

    let channel = match f.string("channel")?.as_deref().unwrap_or("rayleigh") {
        "rayleigh" => {
            if f.present("channel_gains").is_some() {
                return Err(config_err(
                    "channel_gains",
                    "only used with channel = \"fixed\"",
                ));
            }
            let n = f.u64("subcarriers")?.unwrap_or(model.num_dims() as u64) as usize;
            ChannelModel::RayleighUnit { subcarriers: n }
        }
        "fixed" => {
            let gains = f
                .list("channel_gains")?
                .ok_or_else(|| config_err("channel_gains", "required with channel = \"fixed\""))?;
            if f.present("subcarriers").is_some() {
                return Err(config_err("subcarriers", "implied by channel_gains"));
            }
            ChannelModel::FixedGains(gains)
        }
        other => {
            return Err(config_err(
                "channel",
                format!("expected rayleigh or fixed, got `{other}`"),
            ))
        }
    };
    if channel.subcarriers() < model.num_dims() {
        return Err(config_err(
            "subcarriers",
            format!(
                "need at least one subcarrier per feature ({}), got {}",
                model.num_dims(),
                channel.subcarriers()
            ),
        ));
    }
    let sim = SimConfig {
        num_trials,
        seed,
        channel,
        noise_power,
        gap_mode,
    };
    sim.validate()
        .map_err(|e| config_err("channel", e.to_string()))?;
    Ok(Common {
        model_source,
        model,
        criteria,
        sim,
    })
}

pub fn default_power_grid_db() -> Vec<f64> {
    (-5..=10).map(f64::from).collect()
}

pub fn default_beta_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

impl PowerSweepConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut f = read_file(path)?;
        Self::from_fields(&mut f, path, ov).and_then(|c| f.finish().map(|_| c))
    }

    pub fn from_str(text: &str, ov: &Overrides) -> Result<Self, CliError> {
        let mut f = Fields::parse(text)?;
        Self::from_fields(&mut f, None, ov).and_then(|c| f.finish().map(|_| c))
    }

    fn from_fields(f: &mut Fields, path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        f.forbid_axis(&["beta", "total_power", "snr_c"], "sweep-power")?;
        let common = common(f, path, ov)?;
        let sensing_power = positive("sensing_power", f.power("sensing_power")?.unwrap_or(2.0))?;
        let sensing_noise = match (f.power("sensing_noise")?, f.power("snr_r")?) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "snr_r",
                    "give either sensing_noise or snr_r, not both",
                ))
            }
            (Some(n), None) => n,
            (None, Some(snr)) => sensing_power / positive("snr_r", snr)?,
            (None, None) => 0.1,
        };
        let sensing = SensingConfig::new(positive("sensing_noise", sensing_noise)?, sensing_power)?;
        let comm_powers = f.power_list("p_c")?.unwrap_or_else(|| {
            default_power_grid_db()
                .into_iter()
                .map(db_to_linear)
                .collect()
        });
        increasing("p_c", &comm_powers)?;
        if comm_powers[0] < 0.0 {
            return Err(config_err("p_c", "powers must be nonnegative"));
        }
        Ok(Self {
            common,
            sensing,
            comm_powers,
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["command = sweep-power".to_string()];
        h.extend(self.common.header());
        h.push(format!(
            "sensing_noise_linear = {}",
            num(self.sensing.noise_power())
        ));
        h.push(format!(
            "sensing_power_linear = {}",
            num(self.sensing.power())
        ));
        h.push(format!("p_c_linear = {}", list(&self.comm_powers)));
        h
    }
}

impl BetaSweepConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut f = read_file(path)?;
        Self::from_fields(&mut f, path, ov).and_then(|c| f.finish().map(|_| c))
    }

    pub fn from_str(text: &str, ov: &Overrides) -> Result<Self, CliError> {
        let mut f = Fields::parse(text)?;
        Self::from_fields(&mut f, None, ov).and_then(|c| f.finish().map(|_| c))
    }

    fn from_fields(f: &mut Fields, path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        f.forbid_axis(&["p_c", "sensing_power"], "sweep-beta")?;
        let total_power = positive("total_power", f.power("total_power")?.unwrap_or(1.0))?;
        // SNRs are referenced to the total budget
        let snr_c = f.power("snr_c")?;
        if let Some(snr) = snr_c {
            if f.present("channel_noise").is_some() {
                return Err(config_err(
                    "snr_c",
                    "give either channel_noise or snr_c, not both",
                ));
            }
            let noise = total_power / positive("snr_c", snr)?;
            f.table
                .insert("channel_noise_linear".into(), Value::Float(noise));
        } else if f.present("channel_noise").is_none() {
            f.table.insert(
                "channel_noise_linear".into(),
                Value::Float(total_power / 10.0),
            );
        }
        let common = common(f, path, ov)?;
        let sensing_noise = match (f.power("sensing_noise")?, f.power("snr_r")?) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "snr_r",
                    "give either sensing_noise or snr_r, not both",
                ))
            }
            (Some(n), None) => n,
            (None, Some(snr)) => total_power / positive("snr_r", snr)?,
            (None, None) => total_power / 100.0,
        };
        let sensing_noise = positive("sensing_noise", sensing_noise)?;
        let betas = f.list("beta")?.unwrap_or_else(default_beta_grid);
        increasing("beta", &betas)?;
        if betas[0] < 0.0 || betas[betas.len() - 1] > 1.0 {
            return Err(config_err("beta", "values must lie in [0, 1]"));
        }
        Ok(Self {
            common,
            total_power,
            sensing_noise,
            betas,
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["command = sweep-beta".to_string()];
        h.extend(self.common.header());
        h.push(format!("total_power_linear = {}", num(self.total_power)));
        h.push(format!(
            "sensing_noise_linear = {}",
            num(self.sensing_noise)
        ));
        h.push(format!("beta = {}", list(&self.betas)));
        h
    }
}

impl Common {
    fn header(&self) -> Vec<String> {
        let model = match &self.model_source {
            ModelSource::File(p) => format!("model = {}", p.display()),
            ModelSource::Synthesized(s) => format!(
                "model = synthesized (classes = {}, dims = {}, seed = {}, var_min = {}, var_max = {}, jitter = {}, dg = {})",
                s.num_classes,
                s.num_dims,
                s.seed,
                num(s.variance_min),
                num(s.variance_max),
                num(s.ratio_jitter),
                num(s.pair_dg)
            ),
        };
        let channel = match &self.sim.channel {
            ChannelModel::RayleighUnit { subcarriers } => {
                format!("channel = rayleigh, subcarriers = {subcarriers}")
            }
            ChannelModel::FixedGains(g) => format!("channel = fixed, channel_gains = {}", list(g)),
        };
        vec![
            model,
            format!("criterion = {}", self.criteria.name()),
            format!("seed = {}", self.sim.seed),
            format!("trials = {}", self.sim.num_trials),
            format!("gap_mode = {}", self.sim.gap_mode),
            channel,
            format!("channel_noise_linear = {}", num(self.sim.noise_power)),
        ]
    }
}

impl ClosedFormsConfig {
    pub const DEFAULT_DRAWS: u64 = 10_000_000;

    pub fn load(
        path: Option<&Path>,
        seed: Option<u64>,
        draws: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut f = read_file(path)?;
        Self::from_fields(&mut f, seed, draws).and_then(|c| f.finish().map(|_| c))
    }

    pub fn from_str(text: &str, seed: Option<u64>, draws: Option<u64>) -> Result<Self, CliError> {
        let mut f = Fields::parse(text)?;
        Self::from_fields(&mut f, seed, draws).and_then(|c| f.finish().map(|_| c))
    }

    fn from_fields(
        f: &mut Fields,
        seed: Option<u64>,
        draws: Option<u64>,
    ) -> Result<Self, CliError> {
        let rhos = f
            .power_list("rho")?
            .unwrap_or_else(|| vec![0.01, 0.1, 1.0, 10.0, 100.0]);
        increasing("rho", &rhos)?;
        if rhos[0] <= 0.0 {
            return Err(config_err("rho", "values must be positive"));
        }
        let dg_max = positive("dg_max", f.f64("dg_max")?.unwrap_or(1.0))?;
        let num_classes = f.u64("classes")?.unwrap_or(4) as usize;
        if num_classes < 2 {
            return Err(config_err("classes", "need at least 2 classes"));
        }
        let dgs = f
            .list("dg")?
            .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0]);
        increasing("dg", &dgs)?;
        if dgs[0] <= 0.0 {
            return Err(config_err("dg", "values must be positive"));
        }
        let draws = draws.or(f.u64("draws")?).unwrap_or(Self::DEFAULT_DRAWS);
        if draws == 0 {
            return Err(config_err("draws", "need at least one draw"));
        }
        let seed = seed.or(f.u64("seed")?).unwrap_or(DEFAULT_SEED);
        Ok(Self {
            rhos,
            dg_max,
            num_classes,
            dgs,
            draws,
            seed,
        })
    }

    pub fn header(&self) -> Vec<String> {
        vec![
            "command = closed-forms".to_string(),
            format!("rho_linear = {}", list(&self.rhos)),
            format!("dg_max = {}", num(self.dg_max)),
            format!("classes = {}", self.num_classes),
            format!("dg = {}", list(&self.dgs)),
            format!("draws = {}", self.draws),
            format!("seed = {}", self.seed),
        ]
    }
}

fn list(xs: &[f64]) -> String {
    let mut s = String::from("[");
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{}", num(*x));
    }
    s.push(']');
    s
}
