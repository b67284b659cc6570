//! JSON configuration documents.
//!
//! ```json
//! {
//!   "horizon": { "intervals": 16, "on_peak_start": 4, "on_peak_end": 9 },
//!   "tariff": {
//!     "off_peak": { "retail": 0.40, "sell": 0.20 },
//!     "on_peak":  { "retail": 0.50, "sell": 0.30 },
//!     "fixed_charge": 0.0
//!   },
//!   "storage": { "capacity": 13.5, "max_charge": 3.2, "max_discharge": 3.2,
//!                "eta_charge": 0.95, "eta_discharge": 0.95, "initial_soc": 6.75 },
//!   "ev": { "max_rate": 3.6, "efficiency": 1.0, "initial_demand": 10.0 },
//!   "devices": [ { "a": 1.2, "b": 0.8, "d_max": 3.0 } ],
//!   "penalty": 1.0,
//!   "salvage": 0.35
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_config, DeviceUtility, EvParams, HouseholdConfig, PricePair, StorageParams, TariffSchedule, ValidationReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonDoc {
    pub intervals: usize,
    pub on_peak_start: usize,
    pub on_peak_end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffDoc {
    pub off_peak: PricePair,
    pub on_peak: PricePair,
    #[serde(default)]
    pub fixed_charge: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvDoc {
    pub max_rate: f64,
    #[serde(default = "one")]
    pub efficiency: f64,
    pub initial_demand: f64,
}

fn one() -> f64 {
    1.0
}

/// On-disk layout of a [`HouseholdConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub horizon: HorizonDoc,
    pub tariff: TariffDoc,
    pub storage: StorageParams,
    pub ev: EvDoc,
    pub devices: Vec<DeviceUtility>,
    pub penalty: f64,
    pub salvage: f64,
}

impl From<ConfigDoc> for HouseholdConfig {
    fn from(doc: ConfigDoc) -> Self {
        HouseholdConfig {
            tariff: TariffSchedule {
                horizon: doc.horizon.intervals,
                on_start: doc.horizon.on_peak_start,
                on_end: doc.horizon.on_peak_end,
                off_peak: doc.tariff.off_peak,
                on_peak: doc.tariff.on_peak,
                fixed_charge: doc.tariff.fixed_charge,
            },
            storage: doc.storage,
            ev: EvParams { max_rate: doc.ev.max_rate, efficiency: doc.ev.efficiency, initial_demand: doc.ev.initial_demand },
            devices: doc.devices,
            penalty: doc.penalty,
            salvage: doc.salvage,
        }
    }
}

impl From<&HouseholdConfig> for ConfigDoc {
    fn from(cfg: &HouseholdConfig) -> Self {
        ConfigDoc {
            horizon: HorizonDoc { intervals: cfg.tariff.horizon, on_peak_start: cfg.tariff.on_start, on_peak_end: cfg.tariff.on_end },
            tariff: TariffDoc { off_peak: cfg.tariff.off_peak, on_peak: cfg.tariff.on_peak, fixed_charge: cfg.tariff.fixed_charge },
            storage: cfg.storage,
            ev: EvDoc { max_rate: cfg.ev.max_rate, efficiency: cfg.ev.efficiency, initial_demand: cfg.ev.initial_demand },
            devices: cfg.devices.clone(),
            penalty: cfg.penalty,
            salvage: cfg.salvage,
        }
    }
}

/// Parses a config document. Structural errors name the JSON path of the
/// offending field; semantic checks are left to [`validate_config`].
pub fn parse_config(text: &str) -> Result<HouseholdConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::ConfigParse { path: e.path().to_string(), message: e.inner().to_string() })?;
    Ok(doc.into())
}

pub fn read_config(path: impl AsRef<Path>) -> Result<HouseholdConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

/// Parses and validates; fails with every violation listed.
pub fn load_valid_config(path: impl AsRef<Path>) -> Result<(HouseholdConfig, ValidationReport)> {
    let cfg = read_config(path)?;
    let report = validate_config(&cfg);
    Ok((cfg, report))
}

pub fn to_json(cfg: &HouseholdConfig) -> String {
    serde_json::to_string_pretty(&ConfigDoc::from(cfg)).expect("config serializes")
}
