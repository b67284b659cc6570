//! Expected value functions of remaining EV demand, built by backward
//! induction, and the thresholds read off their supergradients.

use serde::Serialize;

use crate::dist::{Distribution, Quadrature};
use crate::error::{Error, Result};
use crate::model::{aggregate_demand, HouseholdConfig, Period, PricePair};
use crate::policy::{decide, h_theta};

/// Slopes closer than this to a price are treated as equal to it.
pub const SLOPE_TOL: f64 = 1e-9;
/// Largest slope increase tolerated before projection onto concave functions.
pub const CONCAVITY_TOL: f64 = 1e-6;

/// Piecewise-linear concave function on an explicit grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavePLFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

/// Left and right derivatives at a point. `left` is `None` at the left end of
/// the grid and `right` is `None` at the right end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Supergradient {
    pub right: Option<f64>,
    pub left: Option<f64>,
}

impl ConcavePLFunction {
    /// Builds the interpolant through `(breakpoints[k], values[k])`.
    /// Breakpoints must be strictly increasing; concavity is not checked here.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::Value("breakpoints and values must be non-empty and equally long".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Value("breakpoints must be strictly increasing".into()));
        }
        let slopes = breakpoints.windows(2).zip(values.windows(2)).map(|(x, f)| (f[1] - f[0]) / (x[1] - x[0])).collect();
        Ok(ConcavePLFunction { breakpoints, values, slopes })
    }

    /// `f(y) = slope · y` on the given grid.
    pub fn linear(breakpoints: Vec<f64>, slope: f64) -> Result<Self> {
        let values = breakpoints.iter().map(|y| slope * y).collect();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn span(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().expect("non-empty"))
    }

    /// Largest increase between consecutive slopes (≤ 0 when concave).
    pub fn concavity_violation(&self) -> f64 {
        self.slopes.windows(2).map(|s| s[1] - s[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    fn segment(&self, y: f64) -> usize {
        // Index k such that y ∈ [b_k, b_{k+1}].
        let k = self.breakpoints.partition_point(|&b| b <= y);
        k.saturating_sub(1).min(self.slopes.len().saturating_sub(1))
    }

    fn check_span(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        if y < lo - 1e-9 || y > hi + 1e-9 || y.is_nan() {
            return Err(Error::Value(format!("y={y} outside grid span [{lo}, {hi}]")));
        }
        Ok(y.clamp(lo, hi))
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        let y = self.check_span(y)?;
        Ok(self.eval_clamped(y))
    }

    /// Evaluation with `y` clamped into the grid span.
    pub fn eval_clamped(&self, y: f64) -> f64 {
        if self.slopes.is_empty() {
            return self.values[0];
        }
        let (lo, hi) = self.span();
        let y = y.clamp(lo, hi);
        let k = self.segment(y);
        self.values[k] + self.slopes[k] * (y - self.breakpoints[k])
    }

    pub fn supergradient(&self, y: f64) -> Result<Supergradient> {
        let y = self.check_span(y)?;
        if self.slopes.is_empty() {
            return Ok(Supergradient { right: None, left: None });
        }
        let n = self.breakpoints.len();
        // Snap to a breakpoint when within tolerance.
        let k = self.breakpoints.partition_point(|&b| b < y - 1e-12);
        let at_break = k < n && (self.breakpoints[k] - y).abs() <= 1e-12;
        if at_break {
            let left = (k > 0).then(|| self.slopes[k - 1]);
            let right = (k + 1 < n).then(|| self.slopes[k]);
            Ok(Supergradient { right, left })
        } else {
            let s = self.slopes[k - 1];
            Ok(Supergradient { right: Some(s), left: Some(s) })
        }
    }

    /// Largest breakpoint whose right slope is at least `-π`: where `-π` enters
    /// the supergradient. Returns the left end when every slope is below `-π`
    /// and the right end when every slope is above it.
    pub fn w_inverse(&self, price: f64) -> f64 {
        self.w_hi(price)
    }

    /// Same as [`Self::w_inverse`].
    pub fn w_hi(&self, price: f64) -> f64 {
        let k = self.slopes.partition_point(|&s| s >= -price - SLOPE_TOL);
        self.breakpoints[k]
    }

    /// Smallest breakpoint at which `-π` is a supergradient.
    pub fn w_lo(&self, price: f64) -> f64 {
        let k = self.slopes.partition_point(|&s| s > -price + SLOPE_TOL);
        self.breakpoints[k]
    }
}

/// Projects `slopes` onto non-increasing sequences in the weighted least
/// squares sense (pool adjacent violators).
fn isotonic_non_increasing(slopes: &[f64], weights: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight, count).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(slopes.len());
    for (&s, &w) in slopes.iter().zip(weights) {
        blocks.push((s, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 >= blocks[n - 1].0 {
                break;
            }
            let (m2, w2, c2) = blocks.pop().expect("len > 1");
            let (m1, w1, c1) = blocks.pop().expect("len > 1");
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, c)| std::iter::repeat_n(m, c)).collect()
}

/// Checks concavity of raw values on `grid` and returns the projected
/// function with slopes clamped to `[-penalty, 0]`.
pub fn concave_projection(t: usize, grid: &[f64], raw: &[f64], penalty: f64) -> Result<ConcavePLFunction> {
    let f = ConcavePLFunction::new(grid.to_vec(), raw.to_vec())?;
    let violation = f.concavity_violation();
    if violation > CONCAVITY_TOL {
        return Err(Error::Concavity { t, violation });
    }
    let widths: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let slopes: Vec<f64> = isotonic_non_increasing(f.slopes(), &widths).into_iter().map(|s| s.clamp(-penalty, 0.0)).collect();
    let mut values = Vec::with_capacity(grid.len());
    values.push(raw[0]);
    for (k, s) in slopes.iter().enumerate() {
        values.push(values[k] + s * widths[k]);
    }
    ConcavePLFunction::new(grid.to_vec(), values)
}

/// Uniform grid on `[0, y_max]` with spacing `min(v̄, y_max)/50` unless
/// overridden, plus every multiple of `v̄` up to the horizon.
pub fn y_grid(v_max: f64, y_max: f64, horizon: usize, spacing: Option<f64>) -> Result<Vec<f64>> {
    if !(y_max >= 0.0) || !y_max.is_finite() {
        return Err(Error::Value(format!("grid upper end must be finite and non-negative, got {y_max}")));
    }
    if y_max == 0.0 {
        return Ok(vec![0.0]);
    }
    let base = if v_max > 0.0 { v_max.min(y_max) } else { y_max };
    let h = spacing.unwrap_or(base / 50.0);
    if !(h > 0.0) {
        return Err(Error::Value(format!("grid spacing must be positive, got {h}")));
    }
    if v_max > 0.0 && h > v_max / 4.0 + 1e-12 {
        return Err(Error::Value(format!("grid spacing {h} exceeds v̄/4 = {}", v_max / 4.0)));
    }
    let n = (y_max / h).floor() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|k| k as f64 * h).filter(|&y| y < y_max).collect();
    let mut exact = vec![y_max];
    if v_max > 0.0 {
        exact.extend((1..=horizon).map(|k| k as f64 * v_max).filter(|&y| y < y_max));
    }
    pts.extend(&exact);
    pts.sort_by(f64::total_cmp);
    // Drop near-duplicates, keeping multiples of v̄ and the end point exact.
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for y in pts {
        match out.last_mut() {
            Some(last) if y - *last <= 1e-9 => {
                if exact.contains(&y) {
                    *last = y;
                }
            }
            _ => out.push(y),
        }
    }
    Ok(out)
}

/// How the stage problem inside the backward recursion treats storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ValueModel {
    /// Storage dispatched within its rate limits and valued at salvage
    /// (`β·η_c` per kWh charged, `β/η_d` per kWh discharged). Exact when the
    /// SoC limits never bind.
    Myopic,
    /// No storage; the classic co-optimization of EV charging and loads.
    StorageFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub t: usize,
    pub tau: f64,
    pub delta: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ThresholdTable {
    pub rows: Vec<ThresholdRow>,
    /// Intervals where `τ ≥ σ⁺ ≥ σ⁻ ≥ δ` fails or holds with equality.
    pub flags: Vec<String>,
}

/// Thresholds for interval `t` from the next-interval value function.
pub fn threshold_row(config: &HouseholdConfig, t: usize, vnext: &ConcavePLFunction) -> ThresholdRow {
    let tariff = &config.tariff;
    let v_max = config.ev.max_rate;
    let remaining = (tariff.horizon - t - 1) as f64;
    let tau = match tariff.period(t) {
        Period::OffPeak1 => vnext.w_hi(tariff.off_peak.retail),
        Period::OnPeak | Period::OffPeak2 => remaining * v_max,
    };
    let delta = match tariff.period(t) {
        Period::OnPeak if !tariff.off2().is_empty() => vnext.w_hi(tariff.on_peak.sell),
        _ => 0.0,
    };
    let beta = config.salvage;
    ThresholdRow {
        t,
        tau,
        delta,
        sigma_plus: vnext.w_hi(beta / config.storage.eta_discharge),
        sigma_minus: vnext.w_hi(beta * config.storage.eta_charge),
    }
}

fn ordering_flag(row: &ThresholdRow, y_max: f64) -> Option<String> {
    let chain = [("tau", row.tau.min(y_max)), ("sigma_plus", row.sigma_plus), ("sigma_minus", row.sigma_minus), ("delta", row.delta)];
    let mut notes = Vec::new();
    for w in chain.windows(2) {
        if w[0].1 < w[1].1 - 1e-12 {
            notes.push(format!("{} < {}", w[0].0, w[1].0));
        } else if (w[0].1 - w[1].1).abs() <= 1e-12 && w[0].1 > 0.0 {
            notes.push(format!("{} = {}", w[0].0, w[1].0));
        }
    }
    (!notes.is_empty()).then(|| format!("t={}: {}", row.t, notes.join(", ")))
}

/// Thresholds for every interval; `vbars[t]` is the value function of
/// interval `t` and `vbars[T]` the terminal one.
pub fn compute_thresholds(config: &HouseholdConfig, vbars: &[ConcavePLFunction]) -> ThresholdTable {
    let horizon = config.horizon();
    let mut table = ThresholdTable::default();
    for t in 0..horizon {
        let vnext = &vbars[t + 1];
        let row = threshold_row(config, t, vnext);
        if let Some(flag) = ordering_flag(&row, vnext.span().1) {
            table.flags.push(flag);
        }
        table.rows.push(row);
    }
    table
}

/// The eight renewable-axis boundaries of the myopic policy at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaBoundaries {
    /// Δ⁺
    pub plus: f64,
    /// Δ⁻
    pub minus: f64,
    /// Δ⁺′
    pub plus_prime: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    /// Δ⁻′
    pub minus_prime: f64,
}

impl DeltaBoundaries {
    pub fn as_array(&self) -> [f64; 8] {
        [self.plus, self.minus, self.plus_prime, self.d1, self.d2, self.d3, self.d4, self.minus_prime]
    }
}

/// Boundaries for remaining demand `y` under `prices`, given the storage
/// bounds `(e̲′, ē′)` available this interval.
pub fn delta_boundaries(config: &HouseholdConfig, prices: PricePair, y: f64, bounds: (f64, f64), row: &ThresholdRow) -> DeltaBoundaries {
    let (dis, chg) = bounds;
    let v_max = config.ev.max_rate;
    let beta = config.salvage;
    let l = |p: f64| aggregate_demand(p, &config.devices);
    let h = |theta: f64| h_theta(y, theta, v_max);

    let plus = l(prices.retail) + h(row.tau);
    let minus = l(prices.sell) + h(row.delta);
    let d2 = l(beta / config.storage.eta_discharge) + h(row.sigma_plus);
    let d3 = l(beta * config.storage.eta_charge) + h(row.sigma_minus);
    let plus_prime = (plus - dis).max(0.0);
    // Running maxima keep the chain ordered if thresholds coincide on the grid.
    let d1 = (d2 - dis).max(0.0).max(plus_prime);
    let d2 = d2.max(d1);
    let d3 = d3.max(d2);
    let d4 = d3 + chg;
    let minus_prime = (minus + chg).max(d4);
    DeltaBoundaries { plus, minus, plus_prime, d1, d2, d3, d4, minus_prime }
}

/// Value functions for every interval together with their thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct ValueTables {
    pub model: ValueModel,
    /// The configuration the tables were built for, with EV efficiency
    /// normalized to one.
    pub config: HouseholdConfig,
    pub grid: Vec<f64>,
    /// `vbars[t]` for `t = 0..=T`; the last entry is the terminal `-α·y`.
    pub vbars: Vec<ConcavePLFunction>,
    pub thresholds: ThresholdTable,
    /// Largest slope increase of the raw `V̄_t` before projection, per interval.
    pub raw_violation: Vec<f64>,
}

impl ValueTables {
    pub fn row(&self, t: usize) -> &ThresholdRow {
        &self.thresholds.rows[t]
    }

    pub fn vbar_next(&self, t: usize) -> &ConcavePLFunction {
        &self.vbars[t + 1]
    }

    pub fn spacing(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Rows `t, y, value, slope` with the right slope (last row repeats the
    /// final slope).
    pub fn value_rows(&self) -> Vec<(usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for (t, f) in self.vbars.iter().enumerate() {
            let slopes = f.slopes();
            for (k, (&y, &v)) in f.breakpoints().iter().zip(f.values()).enumerate() {
                let s = slopes.get(k).or(slopes.last()).copied().unwrap_or(0.0);
                out.push((t, y, v, s));
            }
        }
        out
    }
}

/// Quadrature rules for a per-interval renewable model.
pub fn quadratures(renewables: &[Distribution], nodes: usize) -> Vec<Quadrature> {
    renewables.iter().map(|d| d.quadrature(nodes)).collect()
}

/// Backward induction of `V̄_t(y) = E_r[max U(d) − P(z) (+ storage salvage) + V̄_{t+1}(y − v)]`
/// from the terminal `V̄_T(y) = −α·y`. `config` is normalized internally.
pub fn backward_induct(config: &HouseholdConfig, renewables: &[Quadrature], grid: &[f64], model: ValueModel) -> Result<ValueTables> {
    let config = config.normalized();
    let horizon = config.horizon();
    if renewables.len() != horizon {
        return Err(Error::Value(format!("{} renewable rules for a horizon of {horizon}", renewables.len())));
    }
    if grid.first() != Some(&0.0) {
        return Err(Error::Value("grid must start at 0".into()));
    }
    let storage = &config.storage;
    let bounds = match model {
        ValueModel::Myopic => config.unclipped_storage_bounds(),
        ValueModel::StorageFree => (0.0, 0.0),
    };
    let beta = config.salvage;

    let mut vbars = vec![ConcavePLFunction::linear(grid.to_vec(), -config.penalty)?];
    let mut rows = Vec::with_capacity(horizon);
    let mut raw_violation = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let vnext = vbars.last().expect("terminal pushed");
        let row = threshold_row(&config, t, vnext);
        let prices = config.tariff.prices(t);
        let quad = &renewables[t];
        let stage_value = |y: f64| -> Result<f64> {
            let mut acc = 0.0;
            for (&r, &w) in quad.nodes.iter().zip(&quad.weights) {
                let dec = decide(&config, prices, y, r, bounds, &row, vnext)?;
                let a = &dec.action;
                let z = a.v + a.total_consumption() + a.e - r;
                let reward = config.utility(&a.d) - crate::model::nem_payment(z, prices, config.tariff.fixed_charge)
                    + beta * storage.soc_delta(a.e)
                    + vnext.eval_clamped(y - a.v);
                acc += w * reward;
            }
            Ok(acc)
        };
        #[cfg(feature = "parallel")]
        let raw: Vec<f64> = {
            use rayon::prelude::*;
            grid.par_iter().map(|&y| stage_value(y)).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let raw: Vec<f64> = grid.iter().map(|&y| stage_value(y)).collect::<Result<_>>()?;

        raw_violation.push(ConcavePLFunction::new(grid.to_vec(), raw.clone())?.concavity_violation());
        vbars.push(concave_projection(t, grid, &raw, config.penalty)?);
        rows.push(row);
    }
    vbars.reverse();
    rows.reverse();
    raw_violation.reverse();
    let mut thresholds = ThresholdTable { rows, flags: Vec::new() };
    let y_max = *grid.last().expect("non-empty grid");
    thresholds.flags = thresholds.rows.iter().filter_map(|r| ordering_flag(r, y_max)).collect();
    Ok(ValueTables { model, config, grid: grid.to_vec(), vbars, thresholds, raw_violation })
}
