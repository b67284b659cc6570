//! Full-information solvers: the deterministic optimum for a realized
//! renewable trajectory, its KKT certificate, and a brute-force DP on a
//! discretized `(s, y)` lattice used as a reference in tests.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT, ZeroConeT};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{effective_storage_bounds, stage_reward, step_dynamics, terminal_reward, Action, HouseholdConfig, PricePair, State};

#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicProblem {
    /// Normalized internally; initial SoC and demand are taken from here.
    pub config: HouseholdConfig,
    pub realization: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySolution {
    pub actions: Vec<Action>,
    /// Accumulated surplus including the terminal reward, recomputed from `actions`.
    pub objective: f64,
    pub kkt_residual: f64,
}

/// Sparse program `min ½xᵀPx + qᵀx` s.t. equality and `≤` rows.
#[derive(Default)]
struct Program {
    n: usize,
    p_diag: Vec<(usize, f64)>,
    q: Vec<f64>,
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    le: Vec<(Vec<(usize, f64)>, f64)>,
}

impl Program {
    fn new(n: usize) -> Self {
        Program { n, q: vec![0.0; n], ..Default::default() }
    }

    fn bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.le.push((vec![(j, -1.0)], -lo));
        if hi.is_finite() {
            self.le.push((vec![(j, 1.0)], hi));
        }
    }

    fn solve(&self, tol: f64) -> Result<Vec<f64>> {
        let (mut ai, mut aj, mut av, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, (coefs, rhs)) in self.eq.iter().chain(&self.le).enumerate() {
            for &(j, c) in coefs {
                ai.push(row);
                aj.push(j);
                av.push(c);
            }
            b.push(*rhs);
        }
        let m = b.len();
        let a = CscMatrix::new_from_triplets(m, self.n, ai, aj, av);
        let (pi, pv): (Vec<usize>, Vec<f64>) = self.p_diag.iter().cloned().unzip();
        let p = CscMatrix::new_from_triplets(self.n, self.n, pi.clone(), pi, pv);
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if !self.eq.is_empty() {
            cones.push(ZeroConeT(self.eq.len()));
        }
        if !self.le.is_empty() {
            cones.push(NonnegativeConeT(self.le.len()));
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .max_iter(200)
            .build()
            .expect("valid solver settings");
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver { status: format!("{e:?}"), residual: f64::NAN })?;
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(sol.x.clone()),
            status => Err(Error::Solver { status: format!("{status:?}"), residual: sol.r_prim.max(sol.r_dual) }),
        }
    }
}

/// Per-interval variable layout: `v, d_1..d_n, charge, discharge, z⁺, z⁻, s_{t+1}`.
struct Layout {
    devices: usize,
}

impl Layout {
    fn width(&self) -> usize {
        self.devices + 6
    }
    fn v(&self, t: usize) -> usize {
        t * self.width()
    }
    fn d(&self, t: usize, i: usize) -> usize {
        t * self.width() + 1 + i
    }
    fn chg(&self, t: usize) -> usize {
        t * self.width() + 1 + self.devices
    }
    fn dis(&self, t: usize) -> usize {
        self.chg(t) + 1
    }
    fn zp(&self, t: usize) -> usize {
        self.chg(t) + 2
    }
    fn zm(&self, t: usize) -> usize {
        self.chg(t) + 3
    }
    fn soc(&self, t: usize) -> usize {
        self.chg(t) + 4
    }
}

/// Largest `min(charge, discharge)` accepted before the split is declared inexact.
const SPLIT_TOL: f64 = 1e-6;

/// Offline optimum of the horizon problem for a known renewable trajectory.
pub fn solve_deterministic(problem: &DeterministicProblem) -> Result<TrajectorySolution> {
    solve_deterministic_with(problem, true)
}

/// As [`solve_deterministic`]; `certify = false` skips the KKT certificate
/// (reported as NaN), which roughly halves the cost.
pub fn solve_deterministic_with(problem: &DeterministicProblem, certify: bool) -> Result<TrajectorySolution> {
    let cfg = problem.config.normalized();
    let horizon = cfg.horizon();
    let r = &problem.realization;
    if r.len() != horizon || r.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidConfig(format!("realization needs {horizon} non-negative entries, got {}", r.len())));
    }
    if horizon == 0 {
        let objective = terminal_reward(cfg.storage.initial_soc, cfg.ev.initial_demand, cfg.penalty, cfg.salvage);
        return Ok(TrajectorySolution { actions: vec![], objective, kkt_residual: 0.0 });
    }
    let lay = Layout { devices: cfg.devices.len() };
    let st = &cfg.storage;
    let mut prog = Program::new(lay.width() * horizon);
    for t in 0..horizon {
        let prices = cfg.tariff.prices(t);
        prog.q[lay.v(t)] = -cfg.penalty;
        prog.q[lay.zp(t)] = prices.retail;
        prog.q[lay.zm(t)] = -prices.sell;
        for (i, dev) in cfg.devices.iter().enumerate() {
            prog.q[lay.d(t, i)] = -dev.a;
            prog.p_diag.push((lay.d(t, i), dev.b));
            prog.bounds(lay.d(t, i), 0.0, dev.d_max);
        }
        prog.bounds(lay.v(t), 0.0, cfg.ev.max_rate);
        prog.bounds(lay.chg(t), 0.0, st.max_charge);
        prog.bounds(lay.dis(t), 0.0, st.max_discharge);
        prog.bounds(lay.zp(t), 0.0, f64::INFINITY);
        prog.bounds(lay.zm(t), 0.0, f64::INFINITY);
        prog.bounds(lay.soc(t), 0.0, st.capacity);

        let mut balance = vec![(lay.zp(t), 1.0), (lay.zm(t), -1.0), (lay.v(t), -1.0), (lay.chg(t), -1.0), (lay.dis(t), 1.0)];
        balance.extend((0..lay.devices).map(|i| (lay.d(t, i), -1.0)));
        prog.eq.push((balance, -r[t]));

        let mut soc = vec![(lay.soc(t), 1.0), (lay.chg(t), -st.eta_charge), (lay.dis(t), 1.0 / st.eta_discharge)];
        let rhs = if t == 0 {
            st.initial_soc
        } else {
            soc.push((lay.soc(t - 1), -1.0));
            0.0
        };
        prog.eq.push((soc, rhs));
    }
    prog.q[lay.soc(horizon - 1)] = -cfg.salvage;
    prog.le.push(((0..horizon).map(|t| (lay.v(t), 1.0)).collect(), cfg.ev.initial_demand));

    let x = prog.solve(1e-11)?;
    let mut actions = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let (c, g) = (x[lay.chg(t)], x[lay.dis(t)]);
        if c.min(g) > SPLIT_TOL {
            return Err(Error::Solver { status: format!("simultaneous charge {c} and discharge {g} at t={t}"), residual: c.min(g) });
        }
        actions.push(Action { v: x[lay.v(t)], e: c - g, d: (0..lay.devices).map(|i| x[lay.d(t, i)]).collect() });
    }
    let (objective, actions) = evaluate_clamped(&cfg, r, &actions)?;
    let kkt = if certify { kkt_residual(problem, &actions)? } else { f64::NAN };
    Ok(TrajectorySolution { actions, objective, kkt_residual: kkt })
}

/// Clamps each action into the feasible set of the state it meets, then
/// returns the accumulated surplus and the clamped actions.
pub fn evaluate_clamped(config: &HouseholdConfig, realization: &[f64], actions: &[Action]) -> Result<(f64, Vec<Action>)> {
    let mut state = State::initial(config, realization.first().copied().unwrap_or(0.0));
    let mut total = 0.0;
    let mut out = Vec::with_capacity(actions.len());
    for (t, a) in actions.iter().enumerate() {
        let (lo, hi) = effective_storage_bounds(state.s, &config.storage);
        let a = Action {
            v: a.v.clamp(0.0, state.y.min(config.ev.max_rate)),
            e: a.e.clamp(-lo, hi),
            d: a.d.iter().zip(&config.devices).map(|(&d, dev)| d.clamp(0.0, dev.d_max)).collect(),
        };
        total += stage_reward(config, &state, &a);
        let r_next = realization.get(t + 1).copied().unwrap_or(0.0);
        state = step_dynamics(config, &state, &a, r_next)?;
        out.push(a);
    }
    total += terminal_reward(state.s, state.y, config.penalty, config.salvage);
    Ok((total, out))
}

/// Classification tolerance for active bounds and the sign of `z`.
const ACTIVE_TOL: f64 = 1e-7;

/// Max stationarity/feasibility violation of `actions` for `problem`, with
/// multipliers recovered by a small LP that minimizes the violation.
pub fn kkt_residual(problem: &DeterministicProblem, actions: &[Action]) -> Result<f64> {
    let cfg = problem.config.normalized();
    let horizon = cfg.horizon();
    let r = &problem.realization;
    if actions.len() != horizon {
        return Err(Error::InvalidConfig(format!("{} actions for horizon {horizon}", actions.len())));
    }
    let st = &cfg.storage;
    let tol = ACTIVE_TOL;

    // Trajectory and primal feasibility.
    let mut feas: f64 = 0.0;
    let mut s = st.initial_soc;
    let mut socs = Vec::with_capacity(horizon);
    let mut v_sum = 0.0;
    for a in actions {
        feas = feas.max(-a.v).max(a.v - cfg.ev.max_rate);
        feas = feas.max(a.e - st.max_charge).max(-a.e - st.max_discharge);
        for (&d, dev) in a.d.iter().zip(&cfg.devices) {
            feas = feas.max(-d).max(d - dev.d_max);
        }
        s += st.soc_delta(a.e);
        feas = feas.max(-s).max(s - st.capacity);
        socs.push(s);
        v_sum += a.v;
    }
    feas = feas.max(v_sum - cfg.ev.initial_demand);

    // Multiplier layout: ν_t, then μ, then ρ⁺_k, ρ⁻_k (k = 1..T, SoC after action k−1), then ε.
    let nu = |t: usize| t;
    let mu = horizon;
    let rho_up = |k: usize| horizon + 1 + k;
    let rho_lo = |k: usize| 2 * horizon + 1 + k;
    let eps = 3 * horizon + 1;
    let mut prog = Program::new(eps + 1);
    prog.q[eps] = 1.0;
    prog.bounds(eps, 0.0, f64::INFINITY);

    for t in 0..horizon {
        let prices = cfg.tariff.prices(t);
        let a = &actions[t];
        let z = a.v + a.total_consumption() + a.e - r[t];
        let (lo, hi) = if z > tol {
            (prices.retail, prices.retail)
        } else if z < -tol {
            (prices.sell, prices.sell)
        } else {
            (prices.sell, prices.retail)
        };
        prog.bounds(nu(t), lo, hi);
        let up_free = socs[t] >= st.capacity - tol;
        let lo_free = socs[t] <= tol;
        prog.bounds(rho_up(t), 0.0, if up_free { f64::INFINITY } else { 0.0 });
        prog.bounds(rho_lo(t), 0.0, if lo_free { f64::INFINITY } else { 0.0 });
    }
    let mu_free = v_sum >= cfg.ev.initial_demand - tol;
    prog.bounds(mu, 0.0, if mu_free { f64::INFINITY } else { 0.0 });

    // λ_{t+1} = β + Σ_{k ≥ t} (ρ⁻_k − ρ⁺_k), as (constant, coefficients).
    let lambda = |t: usize| -> (f64, Vec<(usize, f64)>) {
        let mut coefs = Vec::new();
        for k in t..horizon {
            coefs.push((rho_lo(k), 1.0));
            coefs.push((rho_up(k), -1.0));
        }
        (cfg.salvage, coefs)
    };

    // Gradient G = const + Σ coef·mult; x ∈ [lo, hi] gives the side(s) to bound.
    let mut add = |constant: f64, coefs: Vec<(usize, f64)>, x: f64, lo: f64, hi: f64| {
        if hi - lo <= tol {
            return;
        }
        let at_lo = x <= lo + tol;
        let at_hi = x >= hi - tol;
        // G ≤ ε unless at the upper bound; −G ≤ ε unless at the lower bound.
        if !at_hi {
            let mut row = coefs.clone();
            row.push((eps, -1.0));
            prog.le.push((row, -constant));
        }
        if !at_lo {
            let mut row: Vec<(usize, f64)> = coefs.iter().map(|&(j, c)| (j, -c)).collect();
            row.push((eps, -1.0));
            prog.le.push((row, constant));
        }
    };

    for t in 0..horizon {
        let a = &actions[t];
        for (i, dev) in cfg.devices.iter().enumerate() {
            let d = a.d[i];
            add(dev.a - dev.b * d, vec![(nu(t), -1.0)], d, 0.0, dev.d_max);
        }
        add(cfg.penalty, vec![(nu(t), -1.0), (mu, -1.0)], a.v, 0.0, cfg.ev.max_rate);
        let (l0, lc) = lambda(t);
        let c = a.e.max(0.0);
        let g = (-a.e).max(0.0);
        let mut coefs: Vec<(usize, f64)> = lc.iter().map(|&(j, x)| (j, st.eta_charge * x)).collect();
        coefs.push((nu(t), -1.0));
        add(st.eta_charge * l0, coefs, c, 0.0, st.max_charge);
        let mut coefs: Vec<(usize, f64)> = lc.iter().map(|&(j, x)| (j, -x / st.eta_discharge)).collect();
        coefs.push((nu(t), 1.0));
        add(-l0 / st.eta_discharge, coefs, g, 0.0, st.max_discharge);
    }

    let x = prog.solve(1e-12)?;
    // Re-evaluate exactly with the recovered multipliers.
    let stationarity = prog
        .le
        .iter()
        .filter(|(coefs, _)| coefs.iter().any(|&(j, _)| j == eps) && coefs.len() > 1)
        .map(|(coefs, rhs)| coefs.iter().filter(|&&(j, _)| j != eps).map(|&(j, c)| c * x[j]).sum::<f64>() - rhs)
        .fold(0.0, f64::max);
    Ok(stationarity.max(feas).max(0.0))
}

/// One stage of a scenario tree: independent atoms `(r, probability)`.
pub type Stage = Vec<(f64, f64)>;

/// Exhaustive DP over a lattice of SoC and remaining-demand levels.
#[derive(Debug, Clone)]
pub struct BruteForceDp {
    config: HouseholdConfig,
    stages: Vec<Stage>,
    resolution: f64,
    /// Lattice index range of `s = s₀ + i·res`.
    i_min: i64,
    i_max: i64,
    /// `y = max(y₀ − j·res, 0)` for `j = 0..=j_max`.
    j_max: usize,
    /// `values[t][(i − i_min)·(j_max+1) + j]` holds `E_{r_t}[V_t]`; `values[T]` is terminal.
    values: Vec<Vec<f64>>,
    consumption: Vec<ConsumptionTable>,
}

/// `φ(k) = max_d U(d) − P(Σd + k)` on a fine grid of `k`, with the maximizing split.
#[derive(Debug, Clone)]
struct ConsumptionTable {
    prices: PricePair,
    k_min: f64,
    step: f64,
    phi: Vec<f64>,
    /// Fine-grid utility of total consumption `D = m·step` and its best split.
    utility: Vec<f64>,
    split: Vec<Vec<f64>>,
}

impl ConsumptionTable {
    fn build(config: &HouseholdConfig, prices: PricePair, k_min: f64, k_max: f64, step: f64) -> Self {
        // Best split of total consumption over devices by exhaustive DP on the fine grid.
        let caps: Vec<usize> = config.devices.iter().map(|d| (d.d_max / step + 1e-9).floor() as usize).collect();
        let total_cap: usize = caps.iter().sum();
        let mut utility = vec![0.0; total_cap + 1];
        let mut choice: Vec<Vec<usize>> = Vec::new();
        let mut reach = 0usize;
        for (dev, &cap) in config.devices.iter().zip(&caps) {
            let mut next = vec![f64::NEG_INFINITY; total_cap + 1];
            let mut pick = vec![0usize; total_cap + 1];
            for (m, &u) in utility.iter().enumerate().take(reach + 1) {
                for q in 0..=cap {
                    let val = u + dev.utility(q as f64 * step);
                    if val > next[m + q] {
                        next[m + q] = val;
                        pick[m + q] = q;
                    }
                }
            }
            reach += cap;
            utility = next;
            choice.push(pick);
        }
        let split = (0..=total_cap)
            .map(|m| {
                let mut rest = m;
                let mut out = vec![0.0; config.devices.len()];
                for i in (0..config.devices.len()).rev() {
                    let q = choice[i][rest];
                    out[i] = q as f64 * step;
                    rest -= q;
                }
                out
            })
            .collect();
        let n_k = ((k_max - k_min) / step).ceil() as usize + 2;
        let pay = |z: f64| if z >= 0.0 { z * prices.retail } else { z * prices.sell };
        let phi = (0..n_k)
            .map(|n| {
                let k = k_min + n as f64 * step;
                utility.iter().enumerate().map(|(m, &u)| u - pay(m as f64 * step + k)).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        ConsumptionTable { prices, k_min, step, phi, utility, split }
    }

    fn eval(&self, k: f64) -> f64 {
        let x = ((k - self.k_min) / self.step).max(0.0);
        let n = (x.floor() as usize).min(self.phi.len() - 2);
        let w = x - n as f64;
        self.phi[n] * (1.0 - w) + self.phi[n + 1] * w
    }

    fn argmax(&self, k: f64) -> Vec<f64> {
        let pay = |z: f64| if z >= 0.0 { z * self.prices.retail } else { z * self.prices.sell };
        let best = (0..self.utility.len())
            .max_by(|&a, &b| {
                let fa = self.utility[a] - pay(a as f64 * self.step + k);
                let fb = self.utility[b] - pay(b as f64 * self.step + k);
                fa.total_cmp(&fb)
            })
            .unwrap_or(0);
        self.split[best].clone()
    }
}

const LATTICE_EPS: f64 = 1e-9;

impl BruteForceDp {
    /// Builds the table for `stages[t]` (one per interval). Refuses horizons
    /// above 4 and lattices larger than `cell_budget` cells.
    pub fn build(config: &HouseholdConfig, stages: &[Stage], resolution: f64, cell_budget: usize) -> Result<Self> {
        Self::build_with(config, stages, resolution, cell_budget, true)
    }

    /// Like [`BruteForceDp::build`] but fills every lattice cell, so that
    /// [`BruteForceDp::value_at`] is meaningful away from the reachable set.
    pub fn build_full(config: &HouseholdConfig, stages: &[Stage], resolution: f64, cell_budget: usize) -> Result<Self> {
        Self::build_with(config, stages, resolution, cell_budget, false)
    }

    fn build_with(config: &HouseholdConfig, stages: &[Stage], resolution: f64, cell_budget: usize, prune: bool) -> Result<Self> {
        let config = config.normalized();
        let horizon = config.horizon();
        if horizon > 4 {
            return Err(Error::InvalidConfig(format!("brute-force DP supports T <= 4, got {horizon}")));
        }
        if stages.len() != horizon {
            return Err(Error::InvalidConfig(format!("{} scenario stages for horizon {horizon}", stages.len())));
        }
        if !(resolution > 0.0) {
            return Err(Error::InvalidConfig(format!("resolution must be positive, got {resolution}")));
        }
        let st = &config.storage;
        let s0 = st.initial_soc;
        let i_min = (-s0 / resolution - LATTICE_EPS).ceil() as i64;
        let i_max = ((st.capacity - s0) / resolution + LATTICE_EPS).floor() as i64;
        let j_max = (config.ev.initial_demand / resolution - LATTICE_EPS).ceil().max(0.0) as usize;
        let cells = ((i_max - i_min + 1) as usize) * (j_max + 1) * (horizon + 1);
        if cells > cell_budget {
            return Err(Error::CellBudget { cells, budget: cell_budget });
        }

        let r_max = stages.iter().flatten().map(|&(r, _)| r).fold(0.0, f64::max);
        let k_min = -st.max_discharge - r_max - resolution;
        let k_max = config.ev.max_rate + st.max_charge + resolution;
        let fine = resolution / 10.0;
        let mut consumption: Vec<ConsumptionTable> = Vec::new();
        for t in 0..horizon {
            let prices = config.tariff.prices(t);
            if !consumption.iter().any(|c| c.prices == prices) {
                consumption.push(ConsumptionTable::build(&config, prices, k_min, k_max, fine));
            }
        }

        let mut dp = BruteForceDp { config, stages: stages.to_vec(), resolution, i_min, i_max, j_max, values: Vec::new(), consumption };
        let width = dp.j_max + 1;
        let n_i = (dp.i_max - dp.i_min + 1) as usize;
        let mut next = vec![0.0; n_i * width];
        for i in 0..n_i {
            for j in 0..width {
                next[i * width + j] = terminal_reward(dp.soc(i as i64 + dp.i_min), dp.demand(j), dp.config.penalty, dp.config.salvage);
            }
        }
        let mut values = vec![next];
        for t in (0..horizon).rev() {
            let mut cur = vec![f64::NEG_INFINITY; n_i * width];
            for i in 0..n_i {
                for j in 0..width {
                    let ii = i as i64 + dp.i_min;
                    if prune && !dp.reachable(t, ii, j) {
                        continue;
                    }
                    let mut acc = 0.0;
                    for &(r, p) in &dp.stages[t] {
                        let (best, _) = dp.best_action(t, ii, j, r, values.last().expect("pushed"));
                        acc += p * best;
                    }
                    cur[i * width + j] = acc;
                }
            }
            values.push(cur);
        }
        values.reverse();
        dp.values = values;
        Ok(dp)
    }

    fn soc(&self, i: i64) -> f64 {
        (self.config.storage.initial_soc + i as f64 * self.resolution).clamp(0.0, self.config.storage.capacity)
    }

    fn demand(&self, j: usize) -> f64 {
        (self.config.ev.initial_demand - j as f64 * self.resolution).max(0.0)
    }

    fn steps(&self) -> (i64, i64, usize) {
        let st = &self.config.storage;
        let down = (st.max_discharge / st.eta_discharge / self.resolution + LATTICE_EPS).floor() as i64;
        let up = (st.max_charge * st.eta_charge / self.resolution + LATTICE_EPS).floor() as i64;
        let jv = (self.config.ev.max_rate / self.resolution + LATTICE_EPS).floor() as usize;
        (down, up, jv)
    }

    /// Whether lattice state `(i, j)` can be reached at interval `t` from `(0, 0)`.
    fn reachable(&self, t: usize, i: i64, j: usize) -> bool {
        let (down, up, jv) = self.steps();
        let t = t as i64;
        i >= -t * down && i <= t * up && (j as i64) <= t * (jv as i64 + 1)
    }

    fn table(&self, t: usize) -> &ConsumptionTable {
        let prices = self.config.tariff.prices(t);
        self.consumption.iter().find(|c| c.prices == prices).expect("table per price pair")
    }

    /// Best `(value, (i', j'))` from lattice state `(i, j)` at interval `t` with renewable `r`.
    fn best_action(&self, t: usize, i: i64, j: usize, r: f64, next: &[f64]) -> (f64, (i64, usize)) {
        let st = &self.config.storage;
        let (down, up, _) = self.steps();
        let width = self.j_max + 1;
        let y = self.demand(j);
        let s = self.soc(i);
        let phi = self.table(t);
        let mut best = (f64::NEG_INFINITY, (i, j));
        let jn_max = (j..=self.j_max).take_while(|&jn| y - self.demand(jn) <= self.config.ev.max_rate + LATTICE_EPS).last().unwrap_or(j);
        for inext in (i - down).max(self.i_min)..=(i + up).min(self.i_max) {
            let ds = self.soc(inext) - s;
            let e = if ds >= 0.0 { ds / st.eta_charge } else { ds * st.eta_discharge };
            if e > st.max_charge + LATTICE_EPS || -e > st.max_discharge + LATTICE_EPS {
                continue;
            }
            let row = &next[(inext - self.i_min) as usize * width..][..width];
            for jn in j..=jn_max {
                let v = y - self.demand(jn);
                let val = phi.eval(v + e - r) + row[jn];
                if val > best.0 {
                    best = (val, (inext, jn));
                }
            }
        }
        best
    }

    /// Expected optimal value from the initial state.
    pub fn value(&self) -> f64 {
        self.values[0][(-self.i_min) as usize * (self.j_max + 1)]
    }

    /// Expected optimal value at interval `t` from the lattice state nearest `(s, y)`.
    pub fn value_at(&self, t: usize, s: f64, y: f64) -> f64 {
        let (i, j) = self.nearest(s, y);
        self.values[t][(i - self.i_min) as usize * (self.j_max + 1) + j]
    }

    fn nearest(&self, s: f64, y: f64) -> (i64, usize) {
        let i = ((s - self.config.storage.initial_soc) / self.resolution).round() as i64;
        let j = ((self.config.ev.initial_demand - y) / self.resolution).round().max(0.0) as usize;
        (i.clamp(self.i_min, self.i_max), j.min(self.j_max))
    }

    /// Greedy action with respect to the table at the lattice state nearest `(s, y)`.
    pub fn greedy_action(&self, t: usize, s: f64, y: f64, r: f64) -> Action {
        let (i, j) = self.nearest(s, y);
        let (_, (inext, jn)) = self.best_action(t, i, j, r, &self.values[t + 1]);
        let st = &self.config.storage;
        let ds = self.soc(inext) - self.soc(i);
        let e = if ds >= 0.0 { ds / st.eta_charge } else { ds * st.eta_discharge };
        let v = self.demand(j) - self.demand(jn);
        let d = self.table(t).argmax(v + e - r);
        Action { v, e, d }
    }
}

/// Convenience wrapper: DP value table with a greedy policy.
pub fn brute_force_dp(config: &HouseholdConfig, stages: &[Stage], resolution: f64, cell_budget: usize) -> Result<BruteForceDp> {
    BruteForceDp::build(config, stages, resolution, cell_budget)
}
