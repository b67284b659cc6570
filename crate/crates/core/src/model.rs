//! Household domain model: tariff, devices, storage, EV, and the per-interval
//! accounting (net consumption, NEM payment, rewards, dynamics).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute feasibility tolerance on kWh quantities.
pub const FEAS_TOL: f64 = 1e-9;

/// Retail (import) and sell (export) rate for one interval, per kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePair {
    /// π⁺, paid on net consumption.
    pub retail: f64,
    /// π⁻, credited on net production.
    pub sell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Period {
    OffPeak1,
    OnPeak,
    OffPeak2,
}

/// Two-level ToU tariff laid over the decision horizon as
/// `[0, on_start)` off-peak, `[on_start, on_end)` on-peak, `[on_end, T)` off-peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    pub horizon: usize,
    pub on_start: usize,
    pub on_end: usize,
    pub off_peak: PricePair,
    pub on_peak: PricePair,
    /// π⁰, charged every interval regardless of usage.
    #[serde(default)]
    pub fixed_charge: f64,
}

impl TariffSchedule {
    pub fn off1(&self) -> Range<usize> {
        0..self.on_start
    }

    pub fn on(&self) -> Range<usize> {
        self.on_start..self.on_end
    }

    pub fn off2(&self) -> Range<usize> {
        self.on_end..self.horizon
    }

    pub fn period(&self, t: usize) -> Period {
        if t < self.on_start {
            Period::OffPeak1
        } else if t < self.on_end {
            Period::OnPeak
        } else {
            Period::OffPeak2
        }
    }

    pub fn prices(&self, t: usize) -> PricePair {
        match self.period(t) {
            Period::OnPeak => self.on_peak,
            _ => self.off_peak,
        }
    }

    /// The tariff seen from interval `t` onward, re-indexed to start at 0.
    pub fn tail(&self, t: usize) -> TariffSchedule {
        TariffSchedule {
            horizon: self.horizon.saturating_sub(t),
            on_start: self.on_start.saturating_sub(t),
            on_end: self.on_end.saturating_sub(t),
            ..self.clone()
        }
    }
}

/// Quadratic device utility `U(d) = a·d − ½·b·d²` on `[0, d_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceUtility {
    pub a: f64,
    pub b: f64,
    pub d_max: f64,
}

impl DeviceUtility {
    pub fn utility(&self, d: f64) -> f64 {
        self.a * d - 0.5 * self.b * d * d
    }

    pub fn marginal(&self, d: f64) -> f64 {
        self.a - self.b * d
    }

    /// Consumption level at which marginal utility meets `price`, clipped to the cap.
    #[inline]
    pub fn demand_at(&self, price: f64) -> f64 {
        ((self.a - price) / self.b).clamp(0.0, self.d_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    /// B, kWh.
    pub capacity: f64,
    /// ē, kWh per interval.
    pub max_charge: f64,
    /// e̲, kWh per interval.
    pub max_discharge: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub initial_soc: f64,
}

impl StorageParams {
    /// SoC change produced by storage operation `e` (charge positive).
    #[inline]
    pub fn soc_delta(&self, e: f64) -> f64 {
        if e >= 0.0 {
            self.eta_charge * e
        } else {
            e / self.eta_discharge
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvParams {
    /// v̄, kWh per interval.
    pub max_rate: f64,
    /// η; demand is rescaled to grid energy by [`HouseholdConfig::normalized`].
    pub efficiency: f64,
    /// y₀, kWh.
    pub initial_demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdConfig {
    pub tariff: TariffSchedule,
    pub storage: StorageParams,
    pub ev: EvParams,
    pub devices: Vec<DeviceUtility>,
    /// α, penalty per kWh of unmet EV demand at the deadline.
    pub penalty: f64,
    /// β, salvage value per kWh of terminal SoC.
    pub salvage: f64,
}

impl HouseholdConfig {
    pub fn horizon(&self) -> usize {
        self.tariff.horizon
    }

    /// Rescales EV quantities so that charging efficiency is 1: demand is
    /// expressed in grid kWh (`y / η`) and the penalty per grid kWh (`α·η`).
    pub fn normalized(&self) -> HouseholdConfig {
        let eta = self.ev.efficiency;
        if eta == 1.0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.ev.initial_demand = self.ev.initial_demand / eta;
        out.penalty = self.penalty * eta;
        out.ev.efficiency = 1.0;
        out
    }

    /// Aggregate flexible demand `l(π)`.
    #[inline]
    pub fn aggregate_demand(&self, price: f64) -> f64 {
        aggregate_demand(price, &self.devices)
    }

    pub fn utility(&self, d: &[f64]) -> f64 {
        self.devices.iter().zip(d).map(|(u, &x)| u.utility(x)).sum()
    }

    /// Storage bounds for SoC limits that never bind.
    pub fn unclipped_storage_bounds(&self) -> (f64, f64) {
        (self.storage.max_discharge, self.storage.max_charge)
    }
}

/// Per-interval state `x = (s, y, r, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: usize,
    pub s: f64,
    pub y: f64,
    pub r: f64,
    pub prices: PricePair,
}

impl State {
    pub fn initial(config: &HouseholdConfig, r0: f64) -> State {
        State { t: 0, s: config.storage.initial_soc, y: config.ev.initial_demand, r: r0, prices: config.tariff.prices(0) }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// EV charging, kWh.
    pub v: f64,
    /// Storage operation, positive charges.
    pub e: f64,
    /// Consumption per device.
    pub d: Vec<f64>,
}

impl Action {
    pub fn idle(devices: usize) -> Action {
        Action { v: 0.0, e: 0.0, d: vec![0.0; devices] }
    }

    pub fn total_consumption(&self) -> f64 {
        self.d.iter().sum()
    }
}

/// One named violation found by [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// JSON path of the offending field.
    pub path: String,
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: &str, rule: &str, detail: String) {
        self.violations.push(Violation { path: path.to_string(), rule: rule.to_string(), detail });
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return writeln!(f, "OK");
        }
        for v in &self.violations {
            writeln!(f, "{}: {} ({})", v.path, v.rule, v.detail)?;
        }
        Ok(())
    }
}

pub const RULE_ARBITRAGE: &str = "arbitrage-free ordering";
pub const RULE_PRICE_CHAIN: &str = "price/penalty chain";
pub const RULE_PERIODS: &str = "period partition";
pub const RULE_RANGE: &str = "range";

/// Checks every tariff and household invariant. Violations are returned as
/// data; an empty report means the configuration is usable.
pub fn validate_config(config: &HouseholdConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let tariff = &config.tariff;
    let off = tariff.off_peak;
    let on = tariff.on_peak;

    if tariff.horizon == 0 {
        report.push("horizon.intervals", RULE_RANGE, "horizon must be at least one interval".into());
    }
    if !(tariff.on_start <= tariff.on_end && tariff.on_end <= tariff.horizon) {
        report.push(
            "horizon",
            RULE_PERIODS,
            format!("need 0 <= on_peak_start ({}) <= on_peak_end ({}) <= intervals ({})", tariff.on_start, tariff.on_end, tariff.horizon),
        );
    }

    let chain = [
        ("tariff.off_peak.sell", off.sell),
        ("tariff.on_peak.sell", on.sell),
        ("tariff.off_peak.retail", off.retail),
        ("tariff.on_peak.retail", on.retail),
    ];
    for pair in chain.windows(2) {
        if pair[0].1 >= pair[1].1 {
            report.push(pair[1].0, RULE_ARBITRAGE, format!("{} ({}) must be below {} ({})", pair[0].0, pair[0].1, pair[1].0, pair[1].1));
        }
    }

    let eta_c = config.storage.eta_charge;
    let eta_d = config.storage.eta_discharge;
    let beta = config.salvage;
    // Penalty is compared per grid kWh.
    let alpha = config.penalty * config.ev.efficiency;
    let full = [
        ("tariff.off_peak.sell", "π_off-", off.sell),
        ("tariff.on_peak.sell", "π_on-", on.sell),
        ("salvage", "η_c·β", eta_c * beta),
        ("salvage", "β/η_d", beta / eta_d),
        ("tariff.off_peak.retail", "π_off+", off.retail),
        ("tariff.on_peak.retail", "π_on+", on.retail),
        ("penalty", "α", alpha),
    ];
    // The sell/retail links are reported above; only links involving storage
    // or the penalty are added here.
    for pair in full.windows(2) {
        let involves = |n: &str| n == "salvage" || n == "penalty";
        if !(involves(pair[0].0) || involves(pair[1].0)) {
            continue;
        }
        if pair[0].2 >= pair[1].2 {
            let path = if involves(pair[1].0) { pair[1].0 } else { pair[0].0 };
            report.push(path, RULE_PRICE_CHAIN, format!("{} ({:.6}) must be below {} ({:.6})", pair[0].1, pair[0].2, pair[1].1, pair[1].2));
        }
    }

    let st = &config.storage;
    for (path, value) in [
        ("storage.capacity", st.capacity),
        ("storage.max_charge", st.max_charge),
        ("storage.max_discharge", st.max_discharge),
        ("ev.max_rate", config.ev.max_rate),
        ("ev.initial_demand", config.ev.initial_demand),
    ] {
        if !(value >= 0.0) || !value.is_finite() {
            report.push(path, RULE_RANGE, format!("must be finite and non-negative, got {value}"));
        }
    }
    for (path, value) in [("storage.eta_charge", eta_c), ("storage.eta_discharge", eta_d), ("ev.efficiency", config.ev.efficiency)] {
        if !(value > 0.0 && value <= 1.0) {
            report.push(path, RULE_RANGE, format!("efficiency must lie in (0, 1], got {value}"));
        }
    }
    if !(st.initial_soc >= 0.0 && st.initial_soc <= st.capacity) {
        report.push("storage.initial_soc", RULE_RANGE, format!("must lie in [0, capacity={}], got {}", st.capacity, st.initial_soc));
    }
    for (i, dev) in config.devices.iter().enumerate() {
        if !(dev.b > 0.0) {
            report.push(&format!("devices[{i}].b"), RULE_RANGE, format!("slope must be positive, got {}", dev.b));
        }
        if !(dev.d_max >= 0.0) {
            report.push(&format!("devices[{i}].d_max"), RULE_RANGE, format!("cap must be non-negative, got {}", dev.d_max));
        }
    }
    report
}

/// `z = v + Σd + e − r`.
pub fn net_consumption(action: &Action, r: f64) -> f64 {
    action.v + action.total_consumption() + action.e - r
}

/// NEM payment `z·π⁺` when importing, `z·π⁻` when exporting, plus the fixed charge.
#[inline]
pub fn nem_payment(z: f64, prices: PricePair, fixed_charge: f64) -> f64 {
    let energy = if z >= 0.0 { z * prices.retail } else { z * prices.sell };
    energy + fixed_charge
}

/// Household surplus `U(d) − P(z)` for one interval.
pub fn stage_reward(config: &HouseholdConfig, state: &State, action: &Action) -> f64 {
    let z = net_consumption(action, state.r);
    config.utility(&action.d) - nem_payment(z, state.prices, config.tariff.fixed_charge)
}

/// `β·s_T − α·y_T`.
pub fn terminal_reward(s_final: f64, y_final: f64, penalty: f64, salvage: f64) -> f64 {
    salvage * s_final - penalty * y_final
}

/// Advances `state` by `action`; the renewable for the next interval is `r_next`.
pub fn step_dynamics(config: &HouseholdConfig, state: &State, action: &Action, r_next: f64) -> Result<State> {
    let y_next = state.y - config.ev.efficiency * action.v;
    let s_next = state.s + config.storage.soc_delta(action.e);
    if y_next < -FEAS_TOL {
        return Err(Error::Infeasible { t: state.t, reason: format!("EV overcharged: remaining demand {y_next}") });
    }
    if s_next < -FEAS_TOL || s_next > config.storage.capacity + FEAS_TOL {
        return Err(Error::Infeasible { t: state.t, reason: format!("SoC {s_next} outside [0, {}]", config.storage.capacity) });
    }
    let t = state.t + 1;
    Ok(State {
        t,
        s: s_next.clamp(0.0, config.storage.capacity),
        y: y_next.max(0.0),
        r: r_next,
        prices: config.tariff.prices(t.min(config.horizon().saturating_sub(1))),
    })
}

/// `(e̲′, ē′)`: rate limits tightened by what the SoC allows this interval.
#[inline]
pub fn effective_storage_bounds(s: f64, storage: &StorageParams) -> (f64, f64) {
    let discharge = storage.max_discharge.min(s * storage.eta_discharge);
    let charge = storage.max_charge.min((storage.capacity - s) / storage.eta_charge);
    (discharge.max(0.0), charge.max(0.0))
}

/// `l(π) = Σ_i l_i(π)` without allocating.
#[inline]
pub fn aggregate_demand(price: f64, devices: &[DeviceUtility]) -> f64 {
    devices.iter().map(|d| d.demand_at(price)).sum()
}

/// Per-device demand `l_i(π)` and its sum.
pub fn marginal_consumption(price: f64, devices: &[DeviceUtility]) -> (Vec<f64>, f64) {
    let per: Vec<f64> = devices.iter().map(|d| d.demand_at(price)).collect();
    let total = per.iter().sum();
    (per, total)
}

/// Checks an action against the rate, cap, and SoC constraints of `state`.
pub fn check_action(config: &HouseholdConfig, state: &State, action: &Action) -> std::result::Result<(), String> {
    let v_cap = (state.y / config.ev.efficiency).min(config.ev.max_rate);
    if action.v < -FEAS_TOL || action.v > v_cap + FEAS_TOL {
        return Err(format!("v={} outside [0, {v_cap}]", action.v));
    }
    let (lo, hi) = effective_storage_bounds(state.s, &config.storage);
    if action.e < -lo - FEAS_TOL || action.e > hi + FEAS_TOL {
        return Err(format!("e={} outside [-{lo}, {hi}]", action.e));
    }
    if action.d.len() != config.devices.len() {
        return Err(format!("{} device levels for {} devices", action.d.len(), config.devices.len()));
    }
    for (i, (&d, dev)) in action.d.iter().zip(&config.devices).enumerate() {
        if d < -FEAS_TOL || d > dev.d_max + FEAS_TOL {
            return Err(format!("d[{i}]={d} outside [0, {}]", dev.d_max));
        }
    }
    Ok(())
}
