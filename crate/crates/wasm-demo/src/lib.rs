//! Browser front end: builds the value tables for one plug-in hour and
//! exposes three operations to the page, each returning JSON.
//!
//! The plain functions on [`Session`] carry the logic so they can be tested
//! natively; the `#[wasm_bindgen]` wrapper only marshals strings.

use nemsched::model::{effective_storage_bounds, HouseholdConfig, State};
use nemsched::policy::myopic_policy;
use nemsched::scenario::{parse_scenario, sample_scenario, ScenarioModel};
use nemsched::sim::{run_episode, EpisodeContext, PolicyKind};
use nemsched::value::{backward_induct, delta_boundaries, quadratures, y_grid, DeltaBoundaries, ThresholdRow, ValueModel, ValueTables};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const HOUSEHOLD: &str = include_str!("../../../data/household.json");
const SCENARIO: &str = include_str!("../../../data/scenario.json");

pub struct Session {
    config: HouseholdConfig,
    model: ScenarioModel,
    hour: usize,
    scale: f64,
    /// Episode config at the largest demand the tables cover.
    episode: HouseholdConfig,
    myopic: ValueTables,
    storage_free: ValueTables,
}

#[derive(Serialize)]
pub struct CurvePoint {
    pub r: f64,
    pub v: f64,
    pub d: f64,
    pub e: f64,
    pub z: f64,
    pub zone: &'static str,
}

#[derive(Serialize)]
pub struct Curve {
    pub boundaries: DeltaBoundaries,
    pub points: Vec<CurvePoint>,
}

#[derive(Serialize)]
pub struct ValueSlice {
    pub t: usize,
    pub y: Vec<f64>,
    pub myopic: Vec<f64>,
    pub storage_free: Vec<f64>,
}

#[derive(Serialize)]
pub struct Tables {
    pub hour: usize,
    pub scale: f64,
    pub on_peak: (usize, usize),
    pub thresholds: Vec<ThresholdRow>,
    pub values: Vec<ValueSlice>,
}

#[derive(Serialize)]
pub struct PolicyRun {
    pub policy: &'static str,
    pub surplus: f64,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub e: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Serialize)]
pub struct Episode {
    pub y0: f64,
    pub r: Vec<f64>,
    pub runs: Vec<PolicyRun>,
}

impl Session {
    pub fn new(hour: usize, scale: f64) -> Result<Session, String> {
        let config = nemsched::config::parse_config(HOUSEHOLD).map_err(|e| e.to_string())?;
        let mut model = parse_scenario(SCENARIO, std::path::Path::new(".")).map_err(|e| e.to_string())?;
        if !model.connection_hours.contains(&hour) {
            return Err(format!("hour {hour} is not among the connection hours {:?}", model.connection_hours));
        }
        if scale.is_nan() || scale <= 0.0 {
            return Err(format!("scale must be positive, got {scale}"));
        }
        model.connection_hours = vec![hour];
        let horizon = config.horizon();
        let episode = model.episode_config(&config, hour, model.max_demand());
        let grid = y_grid(config.ev.max_rate, model.max_demand(), horizon, None).map_err(|e| e.to_string())?;
        let quad = quadratures(&model.renewables(hour, horizon, scale), model.quadrature_nodes);
        let build = |m| backward_induct(&episode, &quad, &grid, m).map_err(|e| e.to_string());
        let myopic = build(ValueModel::Myopic)?;
        let storage_free = build(ValueModel::StorageFree)?;
        Ok(Session { config, model, hour, scale, episode, myopic, storage_free })
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon()
    }

    /// Thresholds for every interval and the two value functions at each `t`.
    pub fn tables(&self) -> Tables {
        let tariff = &self.episode.tariff;
        let values = (0..=self.horizon())
            .map(|t| {
                let f = &self.myopic.vbars[t];
                let g = &self.storage_free.vbars[t];
                ValueSlice { t, y: f.breakpoints().to_vec(), myopic: f.values().to_vec(), storage_free: g.values().to_vec() }
            })
            .collect();
        Tables {
            hour: self.hour,
            scale: self.scale,
            on_peak: (tariff.on_start, tariff.on_end),
            thresholds: self.myopic.thresholds.rows.clone(),
            values,
        }
    }

    /// Myopic decisions at `(t, s, y)` for `n` renewable values on `[0, r_max]`.
    pub fn policy_curve(&self, t: usize, s: f64, y: f64, r_max: f64, n: usize) -> Result<Curve, String> {
        let cfg = &self.myopic.config;
        if t >= self.horizon() {
            return Err(format!("t must be below {}", self.horizon()));
        }
        let s = s.clamp(0.0, cfg.storage.capacity);
        let y = y.clamp(0.0, *self.myopic.grid.last().expect("non-empty grid"));
        let prices = cfg.tariff.prices(t);
        let boundaries = delta_boundaries(cfg, prices, y, effective_storage_bounds(s, &cfg.storage), self.myopic.row(t));
        let n = n.clamp(2, 2000);
        let mut points = Vec::with_capacity(n);
        for k in 0..n {
            let r = r_max * k as f64 / (n - 1) as f64;
            let dec = myopic_policy(&State { t, s, y, r, prices }, &self.myopic).map_err(|e| e.to_string())?;
            let a = dec.action;
            let d = a.total_consumption();
            points.push(CurvePoint { r, v: a.v, d, e: a.e, z: a.v + d + a.e - r, zone: dec.zone.label() });
        }
        Ok(Curve { boundaries, points })
    }

    /// One sampled episode run under MO, CCO, PR and the oracle.
    pub fn simulate(&self, seed: u64, episode: u64) -> Result<Episode, String> {
        let real = sample_scenario(&self.model, self.horizon(), self.scale, seed, episode);
        let cfg = self.model.episode_config(&self.config, self.hour, real.y0);
        let ctx = EpisodeContext { config: &cfg, myopic: Some(&self.myopic), storage_free: Some(&self.storage_free), forecast: None };
        let runs = [PolicyKind::Oracle, PolicyKind::Mo, PolicyKind::Cco, PolicyKind::Pr]
            .into_iter()
            .map(|p| {
                let tr = run_episode(p, &real.r, &ctx).map_err(|e| e.to_string())?;
                let col = |f: &dyn Fn(&nemsched::sim::TraceStep) -> f64| tr.steps.iter().map(f).collect::<Vec<_>>();
                Ok(PolicyRun {
                    policy: p.name(),
                    surplus: tr.surplus,
                    s: col(&|st| st.s),
                    y: col(&|st| st.y),
                    v: col(&|st| st.action.v),
                    e: col(&|st| st.action.e),
                    z: col(&|st| st.z),
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(Episode { y0: real.y0, r: real.r, runs })
    }
}

fn to_json<T: Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("plain data serializes")
}

/// Handle held by the page; rebuilt when the hour or scale changes.
#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(hour: usize, scale: f64) -> Result<Demo, JsError> {
        Session::new(hour, scale).map(Demo).map_err(|e| JsError::new(&e))
    }

    pub fn horizon(&self) -> usize {
        self.0.horizon()
    }

    pub fn tables(&self) -> String {
        to_json(&self.0.tables())
    }

    pub fn policy_curve(&self, t: usize, s: f64, y: f64, r_max: f64, n: usize) -> Result<String, JsError> {
        self.0.policy_curve(t, s, y, r_max, n).map(|c| to_json(&c)).map_err(|e| JsError::new(&e))
    }

    pub fn simulate(&self, seed: u64, episode: u64) -> Result<String, JsError> {
        self.0.simulate(seed, episode).map(|e| to_json(&e)).map_err(|e| JsError::new(&e))
    }
}

/// Plug-in hours the page can offer.
#[wasm_bindgen]
pub fn connection_hours() -> Vec<u32> {
    parse_scenario(SCENARIO, std::path::Path::new(".")).map(|m| m.connection_hours.iter().map(|&h| h as u32).collect()).unwrap_or_default()
}
