//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runtime budgets are part of each check.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use nemsched::dist::Distribution;
use nemsched::model::{net_consumption, Period};
use nemsched::oracle::{brute_force_dp, Stage};
use nemsched::policy::myopic_policy;
use nemsched::sim::{monte_carlo, BenchmarkSpec, Planner, PolicyKind};
use nemsched::value::{backward_induct, delta_boundaries, quadratures, y_grid, ValueModel, ValueTables};
use nemsched::State;
use rand::Rng;

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check, Duration); 9] = [
        ("1 oracle equivalence on tiny instances", oracle_equivalence, Duration::from_secs(30)),
        ("2 concavity of value functions", concavity, Duration::from_secs(10)),
        ("3 net-consumption structure", net_consumption_structure, Duration::from_secs(10)),
        ("4 complementarity", complementarity, Duration::from_secs(20)),
        ("5 threshold recursion and ordering", threshold_recursion, Duration::MAX),
        ("6 procrastination trace property", procrastination_traces, Duration::MAX),
        ("7 salvage linearity", salvage_linearity, Duration::MAX),
        ("8 benchmark reproduction", benchmark_reproduction, Duration::MAX),
        ("9 determinism of benchmark CSVs", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!("{} criterion {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

fn reference_planner(scale: f64, policies: &[PolicyKind]) -> Planner {
    Planner::build(&household(), &scenario(), scale, policies, None).expect("reference tables")
}

fn oracle_equivalence() -> Result<String, String> {
    const RESOLUTION: f64 = 1e-2;
    let tol = 2.0 * RESOLUTION;
    let mut rng = rng(7);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let horizon = 2 + k % 2;
        let cfg = random_config(&mut rng, horizon, 1, true);
        let stages = random_stages(&mut rng, horizon, 2.0);
        let dp = brute_force_dp(&cfg, &stages, RESOLUTION, 50_000_000).map_err(|e| format!("instance {k}: {e}"))?;
        let tables = tables(&cfg, &stages, ValueModel::Myopic, None);
        let mo = myopic_expected(&cfg, &stages, &tables);
        let diff = (mo - dp.value()).abs();
        worst = worst.max(diff);
        if diff > tol {
            return Err(format!("instance {k}: myopic {mo} vs brute force {}", dp.value()));
        }
    }
    Ok(format!("20 instances, max |MO − DP| = {worst:.2e} (tol {tol})"))
}

/// Random configurations with hour-varying truncated-normal renewables.
fn generated(seed: u64) -> Vec<(Generated, ValueModel)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for k in 0..10 {
        let horizon = rng.random_range(4..=8);
        let devices = rng.random_range(1..=3);
        let cfg = random_config(&mut rng, horizon, devices, false);
        let renewables: Vec<Distribution> = (0..horizon)
            .map(|_| {
                let mean = rng.random_range(0.0..3.0);
                Distribution::TruncatedNormal { mean, sd: 0.2 + 0.5 * mean, lo: 0.0, hi: mean * 3.0 + 0.5 }
            })
            .collect();
        let model = if k % 2 == 0 { ValueModel::Myopic } else { ValueModel::StorageFree };
        out.push((Generated { cfg, renewables }, model));
    }
    out
}

struct Generated {
    cfg: nemsched::HouseholdConfig,
    renewables: Vec<Distribution>,
}

fn build(item: &Generated, model: ValueModel) -> nemsched::Result<ValueTables> {
    let cfg = &item.cfg;
    let grid = y_grid(cfg.ev.max_rate, cfg.ev.initial_demand.max(cfg.ev.max_rate), cfg.horizon(), None)?;
    backward_induct(cfg, &quadratures(&item.renewables, 64), &grid, model)
}

fn concavity() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut intervals = 0;
    for (k, (item, model)) in generated(11).iter().enumerate() {
        let tables = build(item, *model).map_err(|e| format!("config {k} ({model:?}): {e}"))?;
        for (t, &v) in tables.raw_violation.iter().enumerate() {
            intervals += 1;
            worst = worst.max(v);
            if v > 1e-6 {
                return Err(format!("config {k}, t={t}: slope increase {v:.3e}"));
            }
        }
    }
    Ok(format!("10 configs, {intervals} intervals, max pre-clamp slope increase {worst:.2e}"))
}

fn net_consumption_structure() -> Result<String, String> {
    let planner = reference_planner(1.0, &[PolicyKind::Mo]);
    let tables = planner.tables(10, ValueModel::Myopic).expect("built");
    let cfg = &tables.config;
    let y_max = *tables.grid.last().expect("grid");
    let mut rng = rng(3);
    for case in 0..50 {
        let t = rng.random_range(0..cfg.horizon());
        let s = rng.random_range(0.0..cfg.storage.capacity);
        let y = rng.random_range(0.0..y_max);
        let prices = cfg.tariff.prices(t);
        let bounds = nemsched::model::effective_storage_bounds(s, &cfg.storage);
        let b = delta_boundaries(cfg, prices, y, bounds, tables.row(t));
        let r_hi = b.minus_prime + 3.0;
        let mut prev: Option<(f64, f64, f64, f64, f64)> = None;
        for k in 0..200 {
            let r = r_hi * k as f64 / 199.0;
            let state = State { t, s, y, r, prices };
            let dec = myopic_policy(&state, tables).map_err(|e| format!("case {case}: {e}"))?;
            let a = &dec.action;
            let z = net_consumption(a, r);
            let at = format!("case {case} (t={t}, s={s:.3}, y={y:.3}) r={r:.4}");
            let inside = r >= b.plus_prime && r <= b.minus_prime;
            if inside && z.abs() > 1e-6 {
                return Err(format!("{at}: z={z:.3e} inside the net-zero zone"));
            }
            if let Some((r0, z0, v0, d0, e0)) = prev {
                if z > z0 + 1e-9 {
                    return Err(format!("{at}: z increased from {z0} to {z}"));
                }
                let both_below = r0 < b.plus_prime && r < b.plus_prime;
                let both_above = r0 > b.minus_prime && r > b.minus_prime;
                if (both_below || both_above) && ((z - z0) / (r - r0) + 1.0).abs() > 1e-6 {
                    return Err(format!("{at}: slope {} outside the net-zero zone", (z - z0) / (r - r0)));
                }
                let d = a.total_consumption();
                if a.v < v0 - 1e-9 || d < d0 - 1e-9 || a.e < e0 - 1e-9 {
                    return Err(format!("{at}: (v, Σd, e) decreased from ({v0}, {d0}, {e0}) to ({}, {d}, {})", a.v, a.e));
                }
            }
            prev = Some((r, z, a.v, a.total_consumption(), a.e));
        }
    }
    Ok("50 states × 200 renewable levels".into())
}

fn complementarity() -> Result<String, String> {
    let planner = reference_planner(1.0, &[PolicyKind::Mo]);
    let model = &planner.model;
    let mut rng = rng(5);
    let mut worst: f64 = f64::NEG_INFINITY;
    for n in 0..100_000 {
        let hour = model.connection_hours[n % model.connection_hours.len()];
        let tables = planner.tables(hour, ValueModel::Myopic).expect("built");
        let cfg = &tables.config;
        let t = rng.random_range(0..cfg.horizon());
        let state = State {
            t,
            s: rng.random_range(0.0..=cfg.storage.capacity),
            y: rng.random_range(0.0..=*tables.grid.last().expect("grid")),
            r: rng.random_range(0.0..10.0),
            prices: cfg.tariff.prices(t),
        };
        let a = myopic_policy(&state, tables).map_err(|e| format!("state {n}: {e}"))?.action;
        let z = net_consumption(&a, state.r);
        let terms = [a.e * z, a.e * (a.total_consumption() + a.v - state.r), a.e - state.r];
        worst = worst.max(terms[0]).max(terms[1]);
        if terms.iter().any(|&x| x > 1e-9) {
            return Err(format!("state {n} {state:?}: e={} z={z} (e·z, e·(Σd+v−r), e−r) = {terms:?}", a.e));
        }
    }
    Ok(format!("100000 states, max of e·z and e·(Σd+v−r) = {worst:.2e}"))
}

fn threshold_recursion() -> Result<String, String> {
    let mut all: Vec<(String, ValueTables)> = Vec::new();
    for (k, (item, model)) in generated(11).iter().enumerate() {
        all.push((format!("random config {k} ({model:?})"), build(item, *model).map_err(|e| e.to_string())?));
    }
    let planner = reference_planner(1.0, &[PolicyKind::Mo, PolicyKind::Cco]);
    for &hour in &planner.model.connection_hours {
        for model in [ValueModel::Myopic, ValueModel::StorageFree] {
            all.push((format!("reference config hour {hour} ({model:?})"), planner.tables(hour, model).expect("built").clone()));
        }
    }
    let mut worst: f64 = 0.0;
    for (name, tables) in &all {
        let h = tables.spacing();
        let cfg = &tables.config;
        let y_max = *tables.grid.last().expect("grid");
        let v_max = cfg.ev.max_rate;
        let rows = &tables.thresholds.rows;
        for pair in rows.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if cfg.tariff.period(a.t) != cfg.tariff.period(b.t) {
                continue;
            }
            let tau_gap = (a.tau.min(y_max) - (b.tau + v_max).min(y_max)).abs();
            let delta_gap = (a.delta - b.delta).abs();
            worst = worst.max(tau_gap / h).max(delta_gap / h);
            if tau_gap > h + 1e-9 || delta_gap > h + 1e-9 {
                return Err(format!("{name}, t={}: τ step off by {tau_gap:.4}, δ step off by {delta_gap:.4} (spacing {h:.4})", a.t));
            }
        }
        for r in rows {
            let chain = [r.tau.min(y_max), r.sigma_plus, r.sigma_minus, r.delta];
            if chain.windows(2).any(|w| w[0] < w[1] - h - 1e-9) {
                return Err(format!("{name}, t={}: τ ≥ σ⁺ ≥ σ⁻ ≥ δ fails: {chain:?}", r.t));
            }
        }
    }
    Ok(format!("{} table sets, worst recursion error {worst:.2} grid spacings", all.len()))
}

fn procrastination_traces() -> Result<String, String> {
    let policies = [PolicyKind::Mo, PolicyKind::Cco];
    let planner = reference_planner(1.0, &policies);
    let mut triggered = 0usize;
    for episode in 0..10_000u64 {
        let real = planner.sample(2024, episode);
        let cfg = planner.model.episode_config(&planner.base, real.connection_hour, real.y0);
        let h = planner.tables(real.connection_hour, ValueModel::Myopic).expect("built").spacing();
        for policy in policies {
            let trace = planner.run(policy, &real).map_err(|e| format!("episode {episode}: {e}"))?;
            let steps = &trace.steps;
            for (k, st) in steps.iter().enumerate() {
                if !(st.z > 1e-9 && st.action.v > 1e-9) {
                    continue;
                }
                triggered += 1;
                let period: Period = cfg.tariff.period(st.t);
                for later in steps[k + 1..].iter().take_while(|l| cfg.tariff.period(l.t) == period) {
                    let full = cfg.ev.max_rate.min(later.y);
                    if later.action.v < full - h {
                        return Err(format!(
                            "{policy} episode {episode}: bought for the EV at t={} but v={} < {full} at t={}",
                            st.t, later.action.v, later.t
                        ));
                    }
                }
            }
        }
    }
    Ok(format!("10000 episodes × MO, CCO; {triggered} grid-charging steps checked"))
}

fn salvage_linearity() -> Result<String, String> {
    const RESOLUTION: f64 = 1e-2;
    const EPS: f64 = 0.1;
    let mut rng = rng(19);
    let mut worst: f64 = 0.0;
    let mut worst_plain: f64 = 0.0;
    for k in 0..5 {
        let cfg = random_config(&mut rng, 2, 1, true);
        let stages: Vec<Stage> = random_stages(&mut rng, 2, 2.0);
        let base = brute_force_dp(&cfg, &stages, RESOLUTION, 50_000_000).map_err(|e| e.to_string())?.value();
        let mut shifted = cfg.clone();
        shifted.storage.initial_soc += EPS;
        let up = brute_force_dp(&shifted, &stages, RESOLUTION, 50_000_000).map_err(|e| e.to_string())?.value();
        let expected = cfg.salvage * cfg.storage.eta_charge * EPS;
        let err = (up - base - expected).abs();
        worst = worst.max(err);
        worst_plain = worst_plain.max((up - base - cfg.salvage * EPS).abs());
        if err > RESOLUTION {
            return Err(format!("instance {k}: V(s0+ε) − V(s0) = {} vs β·η_c·ε = {expected}", up - base));
        }
    }
    Ok(format!("5 instances, ε={EPS}: max error vs β·η_c·ε {worst:.2e}, vs β·ε {worst_plain:.2e} (resolution {RESOLUTION})"))
}

fn benchmark_reproduction() -> Result<String, String> {
    let scales = [0.5, 1.0, 1.5];
    let baselines = [PolicyKind::Mo, PolicyKind::Cco, PolicyKind::Nco, PolicyKind::Pr];
    let start = Instant::now();
    let mut gaps: Vec<Vec<f64>> = Vec::new();
    for &scale in &scales {
        let planner = reference_planner(scale, &baselines);
        let spec = BenchmarkSpec { policies: baselines.to_vec(), n_runs: 10_000, seed: 42, run_overrides: vec![] };
        let row = monte_carlo(&planner, &spec)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|r| r.map(|r| r.gap_to_oracle).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        gaps.push(row);
    }
    let main_time = start.elapsed();

    let start = Instant::now();
    for &scale in &scales {
        let planner = reference_planner(scale, &[PolicyKind::Mpc]);
        let spec = BenchmarkSpec { policies: vec![PolicyKind::Mpc], n_runs: 200, seed: 42, run_overrides: vec![] };
        monte_carlo(&planner, &spec).map_err(|e| e.to_string())?.remove(0).map_err(|e| e.to_string())?;
    }
    let mpc_time = start.elapsed();

    let mut problems = Vec::new();
    for (k, row) in gaps.iter().enumerate() {
        if row[1..].iter().any(|&g| g <= row[0]) {
            problems.push(format!("MO not strictly best at scale {}", scales[k]));
        }
        if !(0.0..=0.10).contains(&row[0]) {
            problems.push(format!("MO gap {} outside [0, 0.10] at scale {}", row[0], scales[k]));
        }
    }
    let mo: Vec<f64> = gaps.iter().map(|r| r[0]).collect();
    if mo.windows(2).any(|w| w[1] < w[0]) {
        problems.push("MO gap is not non-decreasing across scales".into());
    }
    if main_time > Duration::from_secs(120) {
        problems.push(format!("MO/CCO/NCO/PR took {main_time:?} (> 120 s)"));
    }
    if mpc_time > Duration::from_secs(600) {
        problems.push(format!("MPC took {mpc_time:?} (> 10 min)"));
    }
    let table: Vec<String> = scales
        .iter()
        .zip(&gaps)
        .map(|(s, r)| {
            format!("scale {s}: mo {:.3}% cco {:.3}% nco {:.3}% pr {:.3}%", 100.0 * r[0], 100.0 * r[1], 100.0 * r[2], 100.0 * r[3])
        })
        .collect();
    let summary = format!("{}; n=10000 in {:.1}s, MPC n=200 in {:.1}s", table.join("; "), main_time.as_secs_f64(), mpc_time.as_secs_f64());
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", problems.join("; ")))
    }
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_nemsched"))
            .args(["benchmark", "--config", &format!("{data}/household.json"), "--scenario", &format!("{data}/scenario.json")])
            .args(["--runs", "400", "--mpc-runs", "20", "--scales", "0.5,1.5", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("benchmark exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)));
        }
        outputs.push(std::fs::read(out.join("results.csv")).map_err(|e| e.to_string())?);
    }
    if outputs[0] == outputs[1] {
        Ok(format!("two invocations, {} identical bytes", outputs[0].len()))
    } else {
        Err("results.csv differs between identical invocations".into())
    }
}
