#![allow(dead_code)]

use nemsched::dist::Quadrature;
use nemsched::model::{DeviceUtility, EvParams, StorageParams, TariffSchedule};
use nemsched::oracle::Stage;
use nemsched::sim::{run_episode, EpisodeContext, PolicyKind};
use nemsched::value::{backward_induct, y_grid, ValueModel, ValueTables};
use nemsched::{HouseholdConfig, PricePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small household with a slow, roomy battery: over three intervals the SoC
/// limits cannot bind.
pub fn tiny(horizon: usize) -> HouseholdConfig {
    HouseholdConfig {
        tariff: TariffSchedule {
            horizon,
            on_start: 1.min(horizon),
            on_end: 2.min(horizon),
            off_peak: PricePair { retail: 0.6, sell: 0.1 },
            on_peak: PricePair { retail: 0.8, sell: 0.2 },
            fixed_charge: 0.0,
        },
        storage: StorageParams {
            capacity: 10.0,
            max_charge: 0.5,
            max_discharge: 0.5,
            eta_charge: 0.9,
            eta_discharge: 0.9,
            initial_soc: 5.0,
        },
        ev: EvParams { max_rate: 1.0, efficiency: 1.0, initial_demand: 1.5 },
        devices: vec![DeviceUtility { a: 1.0, b: 0.5, d_max: 2.0 }],
        penalty: 1.0,
        salvage: 0.4,
    }
}

pub fn household() -> HouseholdConfig {
    nemsched::config::read_config(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/household.json")).unwrap()
}

pub fn scenario() -> nemsched::scenario::ScenarioModel {
    nemsched::scenario::read_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/scenario.json")).unwrap()
}

/// Random configuration satisfying the price chain. With `roomy` the battery
/// is large enough that its SoC limits never bind within the horizon.
pub fn random_config(rng: &mut ChaCha8Rng, horizon: usize, devices: usize, roomy: bool) -> HouseholdConfig {
    // Draw an increasing chain π_off⁻ < π_on⁻ < βη_c < β/η_d < π_off⁺ < π_on⁺ < α.
    let eta_c: f64 = rng.random_range(0.85..1.0);
    let eta_d: f64 = rng.random_range(0.85..1.0);
    let beta: f64 = rng.random_range(0.3..0.5);
    let lo = beta * eta_c;
    let hi = beta / eta_d;
    let off_sell = lo * rng.random_range(0.2..0.6);
    let on_sell = off_sell + (lo - off_sell) * rng.random_range(0.2..0.9);
    let off_retail = hi + rng.random_range(0.02..0.2);
    let on_retail = off_retail + rng.random_range(0.02..0.2);
    let penalty = on_retail + rng.random_range(0.05..0.5);
    let on_start = rng.random_range(0..horizon);
    let on_end = rng.random_range(on_start + 1..=horizon);
    let v_max: f64 = rng.random_range(0.4..1.0);
    let rate: f64 = rng.random_range(0.2..0.5);
    let capacity = if roomy { 2.0 * rate * horizon as f64 / eta_c.min(eta_d) + 4.0 } else { rng.random_range(0.5..3.0) };
    HouseholdConfig {
        tariff: TariffSchedule {
            horizon,
            on_start,
            on_end,
            off_peak: PricePair { retail: off_retail, sell: off_sell },
            on_peak: PricePair { retail: on_retail, sell: on_sell },
            fixed_charge: 0.0,
        },
        storage: StorageParams {
            capacity,
            max_charge: rate,
            max_discharge: rate,
            eta_charge: eta_c,
            eta_discharge: eta_d,
            initial_soc: if roomy { capacity / 2.0 } else { capacity * rng.random_range(0.0..1.0) },
        },
        ev: EvParams { max_rate: v_max, efficiency: 1.0, initial_demand: rng.random_range(0.0..v_max * horizon as f64 + 0.3) },
        devices: (0..devices)
            .map(|_| DeviceUtility { a: rng.random_range(0.5..1.5), b: rng.random_range(0.3..1.5), d_max: rng.random_range(0.5..2.0) })
            .collect(),
        penalty,
        salvage: beta,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn quads(stages: &[Stage]) -> Vec<Quadrature> {
    stages.iter().map(|st| Quadrature { nodes: st.iter().map(|p| p.0).collect(), weights: st.iter().map(|p| p.1).collect() }).collect()
}

pub fn tables(cfg: &HouseholdConfig, stages: &[Stage], model: ValueModel, spacing: Option<f64>) -> ValueTables {
    let grid = y_grid(cfg.ev.max_rate, cfg.ev.initial_demand.max(cfg.ev.max_rate), cfg.horizon(), spacing).unwrap();
    backward_induct(cfg, &quads(stages), &grid, model).unwrap()
}

/// Every renewable path of an independent scenario tree with its probability.
pub fn paths(stages: &[Stage]) -> Vec<(Vec<f64>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for stage in stages {
        out = out
            .into_iter()
            .flat_map(|(path, p)| {
                stage.iter().map(move |&(r, q)| {
                    let mut next = path.clone();
                    next.push(r);
                    (next, p * q)
                })
            })
            .collect();
    }
    out
}

/// Exact expected surplus of the myopic policy over the scenario tree.
pub fn myopic_expected(cfg: &HouseholdConfig, stages: &[Stage], tables: &ValueTables) -> f64 {
    let ctx = EpisodeContext { config: cfg, myopic: Some(tables), storage_free: None, forecast: None };
    paths(stages).iter().map(|(r, p)| p * run_episode(PolicyKind::Mo, r, &ctx).unwrap().surplus).sum()
}

/// Random scenario tree: one or two atoms per interval.
pub fn random_stages(rng: &mut ChaCha8Rng, horizon: usize, r_max: f64) -> Vec<Stage> {
    let two = rng.random_bool(0.5);
    (0..horizon)
        .map(|_| {
            if two {
                let p = rng.random_range(0.2..0.8);
                vec![(rng.random_range(0.0..r_max), p), (rng.random_range(0.0..r_max), 1.0 - p)]
            } else {
                vec![(rng.random_range(0.0..r_max), 1.0)]
            }
        })
        .collect()
}
