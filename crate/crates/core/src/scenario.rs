//! Synthetic scenario model: renewable output by clock hour, EV energy
//! demand, and the hour the EV is plugged in.
//!
//! ```json
//! {
//!   "connection_hours": [8, 9, 10, 11, 12],
//!   "on_peak_clock": [16, 21],
//!   "renewable": { "family": "lognormal", "sigma": 0.5,
//!                  "profile": [0, 0, 0, 0, 0, 0, 0.2, 0.8, ...] },
//!   "ev_demand": { "family": "truncated_normal", "mean": 10, "sd": 4, "lo": 0, "hi": 25 }
//! }
//! ```
//!
//! `profile` holds the mean output for each of the 24 clock hours. A
//! histogram family reads `hour,value,probability` rows from a CSV file whose
//! path is resolved relative to the scenario file.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::model::HouseholdConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RenewableSpec {
    /// Log-normal with hourly mean `profile[h]` and log-space spread `sigma`.
    Lognormal { profile: Vec<f64>, sigma: f64 },
    /// Normal with hourly mean `profile[h]` and sd `cv·mean`, truncated to
    /// `[0, mean·(1 + 3·cv)]`.
    TruncatedNormal { profile: Vec<f64>, cv: f64 },
    /// Empirical histogram per clock hour from a CSV file.
    Histogram { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    /// Clock hours at which the EV may be plugged in, drawn uniformly.
    pub connection_hours: Vec<usize>,
    /// On-peak window `[start, end)` in clock hours.
    pub on_peak_clock: (usize, usize),
    pub renewable: RenewableSpec,
    pub ev_demand: Distribution,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

fn default_nodes() -> usize {
    64
}

/// A validated scenario with per-hour renewable distributions resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioModel {
    pub connection_hours: Vec<usize>,
    pub on_peak_clock: (usize, usize),
    /// Distribution of renewable output for clock hours 0..24 at scale 1.
    pub renewable_by_hour: Vec<Distribution>,
    pub ev_demand: Distribution,
    pub quadrature_nodes: usize,
}

/// One sampled episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    /// Renewable for each interval of the horizon.
    pub r: Vec<f64>,
    /// EV demand at plug-in, in energy delivered to the vehicle.
    pub y0: f64,
    pub connection_hour: usize,
}

impl ScenarioModel {
    pub fn from_doc(doc: ScenarioDoc, base_dir: &Path) -> Result<Self> {
        let renewable_by_hour = match &doc.renewable {
            RenewableSpec::Lognormal { profile, sigma } => {
                check_profile(profile)?;
                profile.iter().map(|&mean| Distribution::LogNormal { mean, sigma: *sigma }).collect()
            }
            RenewableSpec::TruncatedNormal { profile, cv } => {
                check_profile(profile)?;
                if !(*cv >= 0.0) {
                    return Err(Error::Scenario(format!("cv must be non-negative, got {cv}")));
                }
                profile
                    .iter()
                    .map(|&mean| Distribution::TruncatedNormal { mean, sd: cv * mean, lo: 0.0, hi: mean * (1.0 + 3.0 * cv) })
                    .collect()
            }
            RenewableSpec::Histogram { path } => read_histogram(&base_dir.join(path))?,
        };
        let model = ScenarioModel {
            connection_hours: doc.connection_hours,
            on_peak_clock: doc.on_peak_clock,
            renewable_by_hour,
            ev_demand: doc.ev_demand,
            quadrature_nodes: doc.quadrature_nodes,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.connection_hours.is_empty() || self.connection_hours.iter().any(|&h| h >= 24) {
            return Err(Error::Scenario("connection_hours must be non-empty clock hours in 0..24".into()));
        }
        let (a, b) = self.on_peak_clock;
        if !(a <= b && b <= 48) {
            return Err(Error::Scenario(format!("on_peak_clock must satisfy start <= end <= 48, got ({a}, {b})")));
        }
        if self.renewable_by_hour.len() != 24 {
            return Err(Error::Scenario(format!("need 24 hourly renewable distributions, got {}", self.renewable_by_hour.len())));
        }
        for d in &self.renewable_by_hour {
            d.validate()?;
        }
        self.ev_demand.validate()?;
        if !self.ev_demand.support_max().is_finite() {
            return Err(Error::Scenario("EV demand needs bounded support".into()));
        }
        if self.quadrature_nodes == 0 {
            return Err(Error::Scenario("quadrature_nodes must be positive".into()));
        }
        Ok(())
    }

    /// Renewable distribution of interval `t` for an EV plugged in at `hour`.
    pub fn renewable(&self, hour: usize, t: usize, scale: f64) -> Distribution {
        self.renewable_by_hour[(hour + t) % 24].scaled(scale)
    }

    pub fn renewables(&self, hour: usize, horizon: usize, scale: f64) -> Vec<Distribution> {
        (0..horizon).map(|t| self.renewable(hour, t, scale)).collect()
    }

    /// The household configuration for an EV plugged in at `hour` with
    /// demand `y0`: the on-peak window is placed relative to the plug-in time.
    pub fn episode_config(&self, base: &HouseholdConfig, hour: usize, y0: f64) -> HouseholdConfig {
        let mut cfg = base.clone();
        let horizon = cfg.tariff.horizon;
        let (a, b) = self.on_peak_clock;
        // Clock hours past midnight are compared on a 48-hour axis.
        let start = if a < hour && b <= hour { a + 24 } else { a };
        let end = if a < hour && b <= hour { b + 24 } else { b };
        cfg.tariff.on_start = start.saturating_sub(hour).min(horizon);
        cfg.tariff.on_end = end.saturating_sub(hour).min(horizon);
        cfg.ev.initial_demand = y0;
        cfg
    }

    /// Largest EV demand the model can produce.
    pub fn max_demand(&self) -> f64 {
        self.ev_demand.support_max()
    }

    /// Per-interval renewable means, the forecast used by MPC.
    pub fn forecast(&self, hour: usize, horizon: usize, scale: f64) -> Vec<f64> {
        (0..horizon).map(|t| self.renewable(hour, t, scale).mean()).collect()
    }
}

fn check_profile(profile: &[f64]) -> Result<()> {
    if profile.len() != 24 || profile.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::Scenario("renewable profile needs 24 non-negative hourly means".into()));
    }
    Ok(())
}

#[derive(Deserialize)]
struct HistogramRow {
    hour: usize,
    value: f64,
    probability: f64,
}

/// Reads `hour,value,probability` rows; hours absent from the file produce no output.
pub fn read_histogram(path: &Path) -> Result<Vec<Distribution>> {
    let csv_err = |source| Error::Csv { path: path.display().to_string(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut values = vec![Vec::new(); 24];
    let mut probs = vec![Vec::new(); 24];
    for row in reader.deserialize() {
        let row: HistogramRow = row.map_err(csv_err)?;
        if row.hour >= 24 {
            return Err(Error::Scenario(format!("{}: hour {} outside 0..24", path.display(), row.hour)));
        }
        values[row.hour].push(row.value);
        probs[row.hour].push(row.probability);
    }
    values
        .into_iter()
        .zip(probs)
        .enumerate()
        .map(|(h, (values, probs))| {
            if values.is_empty() {
                return Ok(Distribution::Point { value: 0.0 });
            }
            let d = Distribution::Discrete { values, probs };
            d.validate().map_err(|e| Error::Scenario(format!("{} hour {h}: {e}", path.display())))?;
            Ok(d)
        })
        .collect()
}

pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<ScenarioModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::ConfigParse { path: e.path().to_string(), message: e.inner().to_string() })?;
    ScenarioModel::from_doc(doc, base_dir)
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<ScenarioModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Per-episode generator: ChaCha8 keyed by `seed` on stream `episode_index`.
pub fn episode_rng(seed: u64, episode_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode_index);
    rng
}

/// Draws the plug-in hour, the EV demand, then one renewable value per
/// interval, each from a single uniform. The draw is a pure function of
/// `(seed, episode_index)`, and scales share their uniforms.
pub fn sample_scenario(model: &ScenarioModel, horizon: usize, scale: f64, seed: u64, episode_index: u64) -> Realization {
    let mut rng = episode_rng(seed, episode_index);
    let u: f64 = rng.random();
    let k = ((u * model.connection_hours.len() as f64) as usize).min(model.connection_hours.len() - 1);
    let hour = model.connection_hours[k];
    let y0 = model.ev_demand.sample(&mut rng);
    let r = (0..horizon).map(|t| model.renewable(hour, t, scale).sample(&mut rng)).collect();
    Realization { r, y0, connection_hour: hour }
}
