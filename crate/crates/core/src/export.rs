//! CSV output. Row order is deterministic and floats use the shortest
//! round-trip representation, so identical inputs give identical bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{BenchmarkResult, EpisodeTrace};
use crate::value::{DeltaBoundaries, ThresholdTable, ValueTables};

pub const RESULTS_HEADER: [&str; 6] = ["policy", "renewable_scale", "n_runs", "mean_surplus", "std_err", "gap_to_oracle"];
pub const TRACE_HEADER: [&str; 11] = ["episode", "t", "s", "y", "r", "v", "e", "d_total", "z", "zone", "reward"];
pub const THRESHOLD_HEADER: [&str; 5] = ["t", "tau", "delta", "sigma_plus", "sigma_minus"];
pub const VALUE_HEADER: [&str; 4] = ["t", "y", "value", "slope"];
pub const BOUNDARY_HEADER: [&str; 11] =
    ["t", "y", "s", "delta_plus", "delta_minus", "delta_plus_prime", "delta_1", "delta_2", "delta_3", "delta_4", "delta_minus_prime"];

fn f(x: f64) -> String {
    format!("{x}")
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn result_rows(results: &[BenchmarkResult]) -> Vec<Vec<String>> {
    results
        .iter()
        .map(|r| {
            vec![
                r.policy.name().to_string(),
                f(r.renewable_scale),
                r.n_runs.to_string(),
                f(r.mean_surplus),
                f(r.std_err),
                f(r.gap_to_oracle),
            ]
        })
        .collect()
}

pub fn write_results(path: impl AsRef<Path>, results: &[BenchmarkResult]) -> Result<()> {
    write_rows(path.as_ref(), &RESULTS_HEADER, result_rows(results))
}

pub fn trace_rows(traces: &[(usize, EpisodeTrace)]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (episode, trace) in traces {
        for st in &trace.steps {
            rows.push(vec![
                episode.to_string(),
                st.t.to_string(),
                f(st.s),
                f(st.y),
                f(st.r),
                f(st.action.v),
                f(st.action.e),
                f(st.action.total_consumption()),
                f(st.z),
                st.zone.clone(),
                f(st.reward),
            ]);
        }
    }
    rows
}

pub fn write_traces(path: impl AsRef<Path>, traces: &[(usize, EpisodeTrace)]) -> Result<()> {
    write_rows(path.as_ref(), &TRACE_HEADER, trace_rows(traces))
}

pub fn write_thresholds(path: impl AsRef<Path>, table: &ThresholdTable) -> Result<()> {
    let rows = table.rows.iter().map(|r| vec![r.t.to_string(), f(r.tau), f(r.delta), f(r.sigma_plus), f(r.sigma_minus)]);
    write_rows(path.as_ref(), &THRESHOLD_HEADER, rows)
}

pub fn write_values(path: impl AsRef<Path>, tables: &ValueTables) -> Result<()> {
    let rows = tables.value_rows().into_iter().map(|(t, y, v, s)| vec![t.to_string(), f(y), f(v), f(s)]);
    write_rows(path.as_ref(), &VALUE_HEADER, rows)
}

pub fn write_boundaries(path: impl AsRef<Path>, rows: &[(usize, f64, f64, DeltaBoundaries)]) -> Result<()> {
    let rows = rows.iter().map(|(t, y, s, b)| {
        let mut row = vec![t.to_string(), f(*y), f(*s)];
        row.extend(b.as_array().iter().map(|&x| f(x)));
        row
    });
    write_rows(path.as_ref(), &BOUNDARY_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PolicyKind;

    #[test]
    fn empty_results_write_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "policy,renewable_scale,n_runs,mean_surplus,std_err,gap_to_oracle\n");
    }

    #[test]
    fn one_result_is_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = BenchmarkResult {
            policy: PolicyKind::Mo,
            renewable_scale: 1.0,
            n_runs: 1,
            mean_surplus: 2.5,
            std_err: 0.0,
            gap_to_oracle: 0.01,
            seed: 42,
        };
        write_results(&path, &[r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "mo,1,1,2.5,0,0.01");
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = write_results("/nonexistent-dir/r.csv", &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/r.csv"));
    }
}
