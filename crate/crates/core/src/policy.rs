//! Threshold policies and the baselines they are benchmarked against.
//!
//! Baseline rules (frozen so benchmark runs are reproducible):
//!
//! * **PR** charges the EV only as much as the deadline forces
//!   (`h_{(T−t−1)v̄}(y)`), schedules loads to maximize surplus against the
//!   renewable left after that, then tops the EV up from any renewable still
//!   unused, and finally lets storage absorb the remaining surplus or deficit
//!   within its bounds.
//! * **NCO** schedules one device class at a time with the others fixed:
//!   the EV by the procrastination rule with no loads present, then loads
//!   against the renewable the EV left, then storage on the residual.
//! * **CCO** co-optimizes EV and loads with the procrastination policy and
//!   lets storage take the residual. Under the price chain the residual rule
//!   always beats idling storage (charging earns `β·η_c > π⁻`, discharging
//!   saves `π⁺ > β/η_d`).
//! * **MPC** re-solves the deterministic problem over the remaining horizon
//!   with forecast means and applies the first action.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    aggregate_demand, effective_storage_bounds, marginal_consumption, Action, DeviceUtility, HouseholdConfig, PricePair, State,
};
use crate::value::{delta_boundaries, ConcavePLFunction, ThresholdRow, ValueTables};

/// Which part of the renewable axis a decision fell in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Zone {
    NetConsuming,
    /// Net-zero with storage at full discharge.
    Case1,
    /// Net-zero with `ν = β/η_d` and storage discharging.
    Case2,
    /// Net-zero with storage idle.
    Case3,
    /// Net-zero with `ν = β·η_c` and storage charging.
    Case4,
    /// Net-zero with storage at full charge.
    Case5,
    /// Net-zero without storage.
    NetZero,
    NetProducing,
}

impl Zone {
    pub fn label(&self) -> &'static str {
        match self {
            Zone::NetConsuming => "net-consuming",
            Zone::Case1 => "net-zero-1",
            Zone::Case2 => "net-zero-2",
            Zone::Case3 => "net-zero-3",
            Zone::Case4 => "net-zero-4",
            Zone::Case5 => "net-zero-5",
            Zone::NetZero => "net-zero",
            Zone::NetProducing => "net-producing",
        }
    }

    pub fn is_net_zero(&self) -> bool {
        !matches!(self, Zone::NetConsuming | Zone::NetProducing)
    }
}

impl std::fmt::Display for Zone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyDecision {
    pub action: Action,
    pub zone: Zone,
    /// Shadow price of the balance constraint in net-zero zones.
    pub nu: Option<f64>,
}

/// `h_θ(y) = min{v̄, max{y − θ, 0}}`.
#[inline]
pub fn h_theta(y: f64, theta: f64, v_max: f64) -> f64 {
    (y - theta).max(0.0).min(v_max)
}

/// Total load `l(ν) + h_{w(ν)}(y)` as an interval: the EV term is set-valued
/// where `−ν` is a slope of the continuation.
#[derive(Clone, Copy)]
struct LoadCurve<'a> {
    y: f64,
    v_max: f64,
    devices: &'a [DeviceUtility],
    vnext: &'a ConcavePLFunction,
}

impl LoadCurve<'_> {
    fn range(&self, nu: f64) -> (f64, f64) {
        let l = aggregate_demand(nu, self.devices);
        (l + h_theta(self.y, self.vnext.w_hi(nu), self.v_max), l + h_theta(self.y, self.vnext.w_lo(nu), self.v_max))
    }
}

/// Bracket slack tolerated before a root search is declared inconsistent.
const BRACKET_TOL: f64 = 1e-7;

/// Finds `ν ∈ [lo, hi]` whose load interval contains `target`.
pub fn solve_nu(target: f64, y: f64, bracket: (f64, f64), devices: &[DeviceUtility], v_max: f64, vnext: &ConcavePLFunction) -> Result<f64> {
    let curve = LoadCurve { y, v_max, devices, vnext };
    solve_on(&curve, target, bracket)
}

fn solve_on(curve: &LoadCurve<'_>, target: f64, (mut lo, mut hi): (f64, f64)) -> Result<f64> {
    let tol = 1e-12 * target.abs().max(1.0);
    let contains = |(a, b): (f64, f64)| a <= target + tol && target <= b + tol;
    let at_hi = curve.range(hi);
    if contains(at_hi) {
        return Ok(hi);
    }
    let at_lo = curve.range(lo);
    if contains(at_lo) {
        return Ok(lo);
    }
    // Load is non-increasing in ν: need load(lo) ≥ target ≥ load(hi).
    if at_lo.1 < target - BRACKET_TOL || at_hi.0 > target + BRACKET_TOL {
        return Err(Error::Bracket { lo, hi, target });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (a, b) = curve.range(mid);
        if a > target + tol {
            lo = mid;
        } else if b < target - tol {
            hi = mid;
        } else {
            return Ok(mid);
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Net-zero dispatch at price `ν`: loads at `l(ν)`, EV takes what is left of `target`.
fn net_zero_action(curve: &LoadCurve<'_>, nu: f64, target: f64, e: f64) -> Action {
    let (d, total) = marginal_consumption(nu, curve.devices);
    let v = (target - total).clamp(0.0, curve.y.min(curve.v_max));
    Action { v, e, d }
}

fn fixed_price_action(curve: &LoadCurve<'_>, price: f64, theta: f64, e: f64) -> Action {
    let (d, _) = marginal_consumption(price, curve.devices);
    Action { v: h_theta(curve.y, theta, curve.v_max), e, d }
}

/// Myopic decision at remaining demand `y` and renewable `r` with storage
/// bounds `(e̲′, ē′)`; with both bounds zero it reduces to the
/// procrastination policy.
pub fn decide(
    config: &HouseholdConfig,
    prices: PricePair,
    y: f64,
    r: f64,
    bounds: (f64, f64),
    row: &ThresholdRow,
    vnext: &ConcavePLFunction,
) -> Result<PolicyDecision> {
    let (dis, chg) = bounds;
    let p_dis = config.salvage / config.storage.eta_discharge;
    let p_chg = config.salvage * config.storage.eta_charge;
    let curve = LoadCurve { y, v_max: config.ev.max_rate, devices: &config.devices, vnext };
    let b = delta_boundaries(config, prices, y, bounds, row);

    let solved = |target: f64, bracket: (f64, f64), e: f64, zone: Zone| -> Result<PolicyDecision> {
        let nu = solve_on(&curve, target, bracket)?;
        Ok(PolicyDecision { action: net_zero_action(&curve, nu, target, e), zone, nu: Some(nu) })
    };
    let pinned = |price: f64, theta: f64, zone: Zone| -> PolicyDecision {
        let mut action = fixed_price_action(&curve, price, theta, 0.0);
        action.e = (r - action.v - action.total_consumption()).clamp(-dis, chg);
        PolicyDecision { action, zone, nu: Some(price) }
    };

    if r < b.plus_prime {
        let action = fixed_price_action(&curve, prices.retail, row.tau, -dis);
        Ok(PolicyDecision { action, zone: Zone::NetConsuming, nu: None })
    } else if r < b.d1 {
        solved(r + dis, (p_dis, prices.retail), -dis, Zone::Case1)
    } else if r < b.d2 {
        Ok(pinned(p_dis, row.sigma_plus, Zone::Case2))
    } else if r < b.d3 {
        solved(r, (p_chg, p_dis), 0.0, Zone::Case3)
    } else if r < b.d4 {
        Ok(pinned(p_chg, row.sigma_minus, Zone::Case4))
    } else if r < b.minus_prime {
        solved(r - chg, (prices.sell, p_chg), chg, Zone::Case5)
    } else {
        let action = fixed_price_action(&curve, prices.sell, row.delta, chg);
        Ok(PolicyDecision { action, zone: Zone::NetProducing, nu: None })
    }
}

/// Storage-free procrastination rule on `(y, r)`; `e` is always 0.
pub fn procrastination_decide(
    config: &HouseholdConfig,
    devices: &[DeviceUtility],
    prices: PricePair,
    y: f64,
    r: f64,
    row: &ThresholdRow,
    vnext: &ConcavePLFunction,
) -> Result<PolicyDecision> {
    let v_max = config.ev.max_rate;
    let curve = LoadCurve { y, v_max, devices, vnext };
    let plus = aggregate_demand(prices.retail, devices) + h_theta(y, row.tau, v_max);
    let minus = aggregate_demand(prices.sell, devices) + h_theta(y, row.delta, v_max);
    if r < plus {
        let action = fixed_price_action(&curve, prices.retail, row.tau, 0.0);
        Ok(PolicyDecision { action, zone: Zone::NetConsuming, nu: None })
    } else if r < minus {
        let nu = solve_on(&curve, r, (prices.sell, prices.retail))?;
        Ok(PolicyDecision { action: net_zero_action(&curve, nu, r, 0.0), zone: Zone::NetZero, nu: Some(nu) })
    } else {
        let action = fixed_price_action(&curve, prices.sell, row.delta, 0.0);
        Ok(PolicyDecision { action, zone: Zone::NetProducing, nu: None })
    }
}

/// Procrastination policy at `state` (tables should be storage-free).
pub fn procrastination_policy(state: &State, tables: &ValueTables) -> Result<PolicyDecision> {
    let cfg = &tables.config;
    procrastination_decide(cfg, &cfg.devices, state.prices, state.y, state.r, tables.row(state.t), tables.vbar_next(state.t))
}

/// Myopic policy at `state` (tables should use [`crate::value::ValueModel::Myopic`]).
pub fn myopic_policy(state: &State, tables: &ValueTables) -> Result<PolicyDecision> {
    let cfg = &tables.config;
    let bounds = effective_storage_bounds(state.s, &cfg.storage);
    decide(cfg, state.prices, state.y, state.r, bounds, tables.row(state.t), tables.vbar_next(state.t))
}

/// Loads maximizing `U(d) − P(Σd − residual)`: the single-interval optimum
/// when `residual` kWh of renewable is available for them.
pub fn static_allocation(devices: &[DeviceUtility], prices: PricePair, residual: f64) -> (Vec<f64>, f64) {
    let nu = if aggregate_demand(prices.retail, devices) >= residual {
        prices.retail
    } else if aggregate_demand(prices.sell, devices) <= residual {
        prices.sell
    } else {
        let (mut lo, mut hi) = (prices.sell, prices.retail);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if aggregate_demand(mid, devices) > residual {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let (d, _) = marginal_consumption(nu, devices);
    (d, nu)
}

/// Storage takes whatever is left of the renewable, within its bounds.
fn residual_storage(state: &State, config: &HouseholdConfig, v: f64, d: &[f64]) -> f64 {
    let (dis, chg) = effective_storage_bounds(state.s, &config.storage);
    (state.r - v - d.iter().sum::<f64>()).clamp(-dis, chg)
}

/// Payment-reduction baseline.
pub fn pr_policy(state: &State, config: &HouseholdConfig) -> Action {
    let v_max = config.ev.max_rate;
    let remaining = (config.horizon() - state.t - 1) as f64;
    let forced = h_theta(state.y, remaining * v_max, v_max);
    let (d, _) = static_allocation(&config.devices, state.prices, state.r - forced);
    let used: f64 = forced + d.iter().sum::<f64>();
    let top_up = (state.r - used).max(0.0).min(state.y.min(v_max) - forced);
    let v = forced + top_up.max(0.0);
    let e = residual_storage(state, config, v, &d);
    Action { v, e, d }
}

/// Non-co-optimized baseline; `tables` are storage-free.
pub fn nco_policy(state: &State, tables: &ValueTables) -> Result<Action> {
    let cfg = &tables.config;
    let ev = procrastination_decide(cfg, &[], state.prices, state.y, state.r, tables.row(state.t), tables.vbar_next(state.t))?;
    let v = ev.action.v;
    let (d, _) = static_allocation(&cfg.devices, state.prices, state.r - v);
    let e = residual_storage(state, cfg, v, &d);
    Ok(Action { v, e, d })
}

/// Consumption-co-optimized baseline; `tables` are storage-free.
pub fn cco_policy(state: &State, tables: &ValueTables) -> Result<Action> {
    let cfg = &tables.config;
    let dec = procrastination_policy(state, tables)?;
    let Action { v, d, .. } = dec.action;
    let e = residual_storage(state, cfg, v, &d);
    Ok(Action { v, e, d })
}

/// Certainty-equivalent MPC: solves the deterministic problem from `state`
/// over the remaining horizon with the realized `state.r` now and
/// `forecast[k]` for later intervals, and returns the first action.
/// `config` must be normalized.
pub fn mpc_policy(state: &State, forecast: &[f64], config: &HouseholdConfig) -> Result<Action> {
    let horizon = config.horizon();
    if forecast.len() != horizon {
        return Err(Error::InvalidConfig(format!("forecast has {} entries for horizon {horizon}", forecast.len())));
    }
    let mut sub = config.clone();
    sub.tariff = config.tariff.tail(state.t);
    sub.storage.initial_soc = state.s;
    sub.ev.initial_demand = state.y;
    let mut realization = vec![state.r];
    realization.extend(forecast[state.t + 1..].iter().map(|r| r.max(0.0)));
    let sol = crate::oracle::solve_deterministic_with(&crate::oracle::DeterministicProblem { config: sub, realization }, false)?;
    Ok(sol.actions.into_iter().next().expect("non-empty remaining horizon"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PricePair, TariffSchedule};
    use approx::assert_abs_diff_eq;

    #[test]
    fn h_theta_examples() {
        assert_eq!(h_theta(1.0, 2.0, 3.6), 0.0);
        assert_eq!(h_theta(10.0, 2.0, 3.6), 3.6);
        assert_abs_diff_eq!(h_theta(2.5, 2.0, 3.6), 0.5);
    }

    #[test]
    fn static_allocation_examples() {
        let dev = [DeviceUtility { a: 1.0, b: 0.5, d_max: 2.0 }];
        let p = PricePair { retail: 0.6, sell: 0.1 };
        let (d, nu) = static_allocation(&dev, p, 0.0);
        assert_abs_diff_eq!(d[0], 0.8, epsilon = 1e-12);
        assert_eq!(nu, 0.6);
        let (d, nu) = static_allocation(&dev, p, 10.0);
        assert_abs_diff_eq!(d[0], 1.8, epsilon = 1e-12);
        assert_eq!(nu, 0.1);
        let (d, nu) = static_allocation(&dev, p, 1.0);
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(nu, 0.5, epsilon = 1e-9);
    }

    fn toy() -> HouseholdConfig {
        let mut cfg = crate::model::tests::reference_config();
        cfg.tariff = TariffSchedule {
            horizon: 3,
            on_start: 1,
            on_end: 2,
            off_peak: PricePair { retail: 0.40, sell: 0.20 },
            on_peak: PricePair { retail: 0.50, sell: 0.30 },
            fixed_charge: 0.0,
        };
        cfg
    }

    #[test]
    fn pr_saturates_under_huge_renewable() {
        let mut cfg = toy();
        cfg.devices = vec![DeviceUtility { a: 2.0, b: 0.5, d_max: 1.0 }];
        let state = State { t: 0, s: 5.0, y: 2.0, r: 100.0, prices: cfg.tariff.prices(0) };
        let a = pr_policy(&state, &cfg);
        assert_eq!(a.v, 2.0);
        assert_eq!(a.d, vec![1.0]);
        assert_eq!(a.e, 3.2);
    }

    #[test]
    fn pr_discharges_to_cover_load() {
        let cfg = toy();
        let state = State { t: 0, s: 5.0, y: 0.0, r: 0.0, prices: cfg.tariff.prices(0) };
        let a = pr_policy(&state, &cfg);
        let l = aggregate_demand(0.40, &cfg.devices);
        assert_abs_diff_eq!(a.d[0], l, epsilon = 1e-12);
        assert_abs_diff_eq!(a.e, -l.min(3.2), epsilon = 1e-12);
        assert_eq!(a.v, 0.0);
    }

    #[test]
    fn pr_forces_charging_near_deadline() {
        let cfg = toy();
        let state = State { t: 1, s: 5.0, y: 5.0, r: 0.0, prices: cfg.tariff.prices(1) };
        let a = pr_policy(&state, &cfg);
        assert_abs_diff_eq!(a.v, 5.0 - 3.6, epsilon = 1e-12);
    }
}
