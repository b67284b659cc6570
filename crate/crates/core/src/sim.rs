//! Episode execution and Monte-Carlo benchmarking with common random numbers.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_action, net_consumption, stage_reward, step_dynamics, terminal_reward, Action, HouseholdConfig, State};
use crate::oracle::{solve_deterministic_with, DeterministicProblem};
use crate::policy::{cco_policy, mpc_policy, myopic_policy, nco_policy, pr_policy, Zone};
use crate::scenario::{sample_scenario, Realization, ScenarioModel};
use crate::value::{backward_induct, quadratures, y_grid, ValueModel, ValueTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PolicyKind {
    Mo,
    Cco,
    Nco,
    Pr,
    Mpc,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] =
        [PolicyKind::Mo, PolicyKind::Cco, PolicyKind::Nco, PolicyKind::Pr, PolicyKind::Mpc, PolicyKind::Oracle];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Mo => "mo",
            PolicyKind::Cco => "cco",
            PolicyKind::Nco => "nco",
            PolicyKind::Pr => "pr",
            PolicyKind::Mpc => "mpc",
            PolicyKind::Oracle => "oracle",
        }
    }

    /// Value tables the policy reads, if any.
    pub fn value_model(&self) -> Option<ValueModel> {
        match self {
            PolicyKind::Mo => Some(ValueModel::Myopic),
            PolicyKind::Cco | PolicyKind::Nco => Some(ValueModel::StorageFree),
            _ => None,
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{s}` (expected one of mo, cco, nco, pr, mpc, oracle)")))
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub t: usize,
    pub s: f64,
    pub y: f64,
    pub r: f64,
    pub action: Action,
    pub z: f64,
    pub zone: String,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub terminal: f64,
    /// Stage rewards plus the terminal reward, counted once.
    pub surplus: f64,
}

/// Everything a policy may consult during one episode.
#[derive(Clone, Copy)]
pub struct EpisodeContext<'a> {
    /// Episode configuration (normalized internally).
    pub config: &'a HouseholdConfig,
    pub myopic: Option<&'a ValueTables>,
    pub storage_free: Option<&'a ValueTables>,
    /// Per-interval renewable forecast for MPC.
    pub forecast: Option<&'a [f64]>,
}

fn zone_from_z(z: f64) -> &'static str {
    if z > 1e-9 {
        Zone::NetConsuming.label()
    } else if z < -1e-9 {
        Zone::NetProducing.label()
    } else {
        Zone::NetZero.label()
    }
}

fn episode_error(policy: PolicyKind, t: usize, reason: impl ToString) -> Error {
    Error::Episode { policy: policy.name().to_string(), episode: 0, t, reason: reason.to_string() }
}

/// Rolls the dynamics forward under `policy` on the renewable trajectory `r`.
pub fn run_episode(policy: PolicyKind, r: &[f64], ctx: &EpisodeContext<'_>) -> Result<EpisodeTrace> {
    let cfg = ctx.config.normalized();
    let horizon = cfg.horizon();
    if r.len() != horizon {
        return Err(episode_error(policy, 0, format!("realization has {} entries for horizon {horizon}", r.len())));
    }
    let tables = |model: ValueModel| -> Result<&ValueTables> {
        let t = match model {
            ValueModel::Myopic => ctx.myopic,
            ValueModel::StorageFree => ctx.storage_free,
        };
        t.ok_or_else(|| episode_error(policy, 0, format!("{model:?} value tables not supplied")))
    };
    let oracle_actions = if policy == PolicyKind::Oracle {
        let problem = DeterministicProblem { config: cfg.clone(), realization: r.to_vec() };
        Some(solve_deterministic_with(&problem, false).map_err(|e| episode_error(policy, 0, e))?.actions)
    } else {
        None
    };

    let mut state = State::initial(&cfg, r.first().copied().unwrap_or(0.0));
    let mut steps = Vec::with_capacity(horizon);
    let mut surplus = 0.0;
    for t in 0..horizon {
        let (action, zone) = match policy {
            PolicyKind::Mo => {
                let dec = myopic_policy(&state, tables(ValueModel::Myopic)?).map_err(|e| episode_error(policy, t, e))?;
                (dec.action, Some(dec.zone))
            }
            PolicyKind::Cco => (cco_policy(&state, tables(ValueModel::StorageFree)?).map_err(|e| episode_error(policy, t, e))?, None),
            PolicyKind::Nco => (nco_policy(&state, tables(ValueModel::StorageFree)?).map_err(|e| episode_error(policy, t, e))?, None),
            PolicyKind::Pr => (pr_policy(&state, &cfg), None),
            PolicyKind::Mpc => {
                let forecast = ctx.forecast.ok_or_else(|| episode_error(policy, t, "no forecast supplied"))?;
                (mpc_policy(&state, forecast, &cfg).map_err(|e| episode_error(policy, t, e))?, None)
            }
            PolicyKind::Oracle => (oracle_actions.as_ref().expect("solved above")[t].clone(), None),
        };
        check_action(&cfg, &state, &action).map_err(|e| episode_error(policy, t, e))?;
        let z = net_consumption(&action, state.r);
        let reward = stage_reward(&cfg, &state, &action);
        surplus += reward;
        let next = step_dynamics(&cfg, &state, &action, r.get(t + 1).copied().unwrap_or(0.0)).map_err(|e| episode_error(policy, t, e))?;
        steps.push(TraceStep {
            t,
            s: state.s,
            y: state.y,
            r: state.r,
            action,
            z,
            zone: zone.map(|z| z.label()).unwrap_or_else(|| zone_from_z(z)).to_string(),
            reward,
        });
        state = next;
    }
    let terminal = terminal_reward(state.s, state.y, cfg.penalty, cfg.salvage);
    surplus += terminal;
    Ok(EpisodeTrace { steps, terminal, surplus })
}

/// Value tables for every plug-in hour of a scenario at one renewable scale.
pub struct Planner {
    pub base: HouseholdConfig,
    pub model: ScenarioModel,
    pub scale: f64,
    pub grid: Vec<f64>,
    myopic: Vec<Option<ValueTables>>,
    storage_free: Vec<Option<ValueTables>>,
}

impl Planner {
    /// Builds the tables the given policies need. `grid_spacing` overrides the
    /// default y-grid spacing.
    pub fn build(
        base: &HouseholdConfig,
        model: &ScenarioModel,
        scale: f64,
        policies: &[PolicyKind],
        grid_spacing: Option<f64>,
    ) -> Result<Planner> {
        if !(scale > 0.0) {
            return Err(Error::Scenario(format!("renewable scale must be positive, got {scale}")));
        }
        let horizon = base.horizon();
        let y_max = model.max_demand() / base.ev.efficiency;
        let grid = y_grid(base.ev.max_rate, y_max, horizon, grid_spacing)?;
        let want = |m: ValueModel| policies.iter().any(|p| p.value_model() == Some(m));
        let build = |m: ValueModel| -> Result<Vec<Option<ValueTables>>> {
            model
                .connection_hours
                .iter()
                .map(|&hour| {
                    if !want(m) {
                        return Ok(None);
                    }
                    let cfg = model.episode_config(base, hour, model.max_demand());
                    let quad = quadratures(&model.renewables(hour, horizon, scale), model.quadrature_nodes);
                    backward_induct(&cfg, &quad, &grid, m).map(Some)
                })
                .collect()
        };
        let myopic = build(ValueModel::Myopic)?;
        let storage_free = build(ValueModel::StorageFree)?;
        Ok(Planner { base: base.clone(), model: model.clone(), scale, grid, myopic, storage_free })
    }

    fn hour_index(&self, hour: usize) -> usize {
        self.model.connection_hours.iter().position(|&h| h == hour).expect("sampled hour is a connection hour")
    }

    pub fn tables(&self, hour: usize, model: ValueModel) -> Option<&ValueTables> {
        let k = self.hour_index(hour);
        match model {
            ValueModel::Myopic => self.myopic[k].as_ref(),
            ValueModel::StorageFree => self.storage_free[k].as_ref(),
        }
    }

    pub fn sample(&self, seed: u64, episode: u64) -> Realization {
        sample_scenario(&self.model, self.base.horizon(), self.scale, seed, episode)
    }

    /// Runs one policy on one sampled episode.
    pub fn run(&self, policy: PolicyKind, real: &Realization) -> Result<EpisodeTrace> {
        let cfg = self.model.episode_config(&self.base, real.connection_hour, real.y0);
        let forecast = self.model.forecast(real.connection_hour, cfg.horizon(), self.scale);
        let ctx = EpisodeContext {
            config: &cfg,
            myopic: self.tables(real.connection_hour, ValueModel::Myopic),
            storage_free: self.tables(real.connection_hour, ValueModel::StorageFree),
            forecast: Some(&forecast),
        };
        run_episode(policy, &real.r, &ctx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResult {
    pub policy: PolicyKind,
    pub renewable_scale: f64,
    pub n_runs: usize,
    pub mean_surplus: f64,
    pub std_err: f64,
    /// `(R_oracle − R_policy)/R_oracle` over the same episodes.
    pub gap_to_oracle: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub policies: Vec<PolicyKind>,
    pub n_runs: usize,
    pub seed: u64,
    /// Per-policy run counts, e.g. fewer episodes for MPC.
    pub run_overrides: Vec<(PolicyKind, usize)>,
}

impl BenchmarkSpec {
    pub fn runs_for(&self, policy: PolicyKind) -> usize {
        self.run_overrides.iter().find(|(p, _)| *p == policy).map(|&(_, n)| n).unwrap_or(self.n_runs)
    }
}

struct EpisodeOutcome {
    oracle: f64,
    surplus: Vec<Option<std::result::Result<f64, Error>>>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo evaluation with common random numbers: episode `i` uses the
/// same realization for every policy and for the oracle. Returns one entry
/// per policy in `spec.policies` order; a policy that fails in some episode
/// yields its error (tagged with the episode index) without stopping the others.
pub fn monte_carlo(planner: &Planner, spec: &BenchmarkSpec) -> Result<Vec<std::result::Result<BenchmarkResult, Error>>> {
    if spec.n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    let runs: Vec<usize> = spec.policies.iter().map(|&p| spec.runs_for(p).max(1)).collect();
    let episodes = runs.iter().copied().max().unwrap_or(spec.n_runs);
    let one = |i: usize| -> Result<EpisodeOutcome> {
        let real = planner.sample(spec.seed, i as u64);
        let oracle = planner.run(PolicyKind::Oracle, &real).map_err(|e| tag(e, i))?.surplus;
        let surplus = spec
            .policies
            .iter()
            .zip(&runs)
            .map(|(&p, &n)| {
                if i >= n {
                    None
                } else if p == PolicyKind::Oracle {
                    Some(Ok(oracle))
                } else {
                    Some(planner.run(p, &real).map(|tr| tr.surplus).map_err(|e| tag(e, i)))
                }
            })
            .collect();
        Ok(EpisodeOutcome { oracle, surplus })
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<EpisodeOutcome> = {
        use rayon::prelude::*;
        (0..episodes).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<EpisodeOutcome> = (0..episodes).map(one).collect::<Result<_>>()?;

    // Reduction in episode order keeps aggregates independent of scheduling.
    let mut out = Vec::with_capacity(spec.policies.len());
    for (k, &policy) in spec.policies.iter().enumerate() {
        let n = runs[k];
        let mut values = Vec::with_capacity(n);
        let mut oracle = Vec::with_capacity(n);
        let mut failure = None;
        for o in &outcomes[..n] {
            match o.surplus[k].as_ref().expect("within run count") {
                Ok(v) => {
                    values.push(*v);
                    oracle.push(o.oracle);
                }
                Err(e) => {
                    failure = Some(clone_error(e));
                    break;
                }
            }
        }
        if let Some(e) = failure {
            out.push(Err(e));
            continue;
        }
        let (mean, se) = mean_and_se(&values);
        let (oracle_mean, _) = mean_and_se(&oracle);
        let gap = if policy == PolicyKind::Oracle { 0.0 } else { (oracle_mean - mean) / oracle_mean };
        out.push(Ok(BenchmarkResult {
            policy,
            renewable_scale: planner.scale,
            n_runs: n,
            mean_surplus: mean,
            std_err: se,
            gap_to_oracle: gap,
            seed: spec.seed,
        }));
    }
    Ok(out)
}

fn tag(e: Error, episode: usize) -> Error {
    match e {
        Error::Episode { policy, t, reason, .. } => Error::Episode { policy, episode, t, reason },
        other => other,
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Episode { policy, episode, t, reason } => {
            Error::Episode { policy: policy.clone(), episode: *episode, t: *t, reason: reason.clone() }
        }
        other => Error::Scenario(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn standard_error_of_constant_is_zero() {
        assert_eq!(mean_and_se(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }
}
