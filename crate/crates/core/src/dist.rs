//! Non-negative scalar distributions used for renewable output and EV demand,
//! with fixed quadrature rules and inverse-CDF sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Fixed nodes and weights approximating an expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn point(x: f64) -> Quadrature {
        Quadrature { nodes: vec![x], weights: vec![1.0] }
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Point {
        value: f64,
    },
    /// Finite support with given probabilities.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    /// Normal(mean, sd) conditioned on `[lo, hi]`.
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
    /// Log-normal with the given mean and log-space standard deviation.
    LogNormal {
        mean: f64,
        sigma: f64,
    },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        match self {
            Distribution::Point { value } if !(*value >= 0.0) => bad(format!("point mass {value} is negative")),
            Distribution::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete distribution needs matching, non-empty values/probs".into());
                }
                if values.iter().any(|v| !(*v >= 0.0)) || probs.iter().any(|p| !(*p >= 0.0)) {
                    return bad("discrete distribution has negative support or probability".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("discrete probabilities sum to {total}"));
                }
                Ok(())
            }
            Distribution::TruncatedNormal { sd, lo, hi, .. } => {
                if !(*lo >= 0.0 && lo <= hi && *sd >= 0.0) {
                    return bad(format!("truncated normal needs 0 <= lo <= hi and sd >= 0 (lo={lo}, hi={hi}, sd={sd})"));
                }
                Ok(())
            }
            Distribution::LogNormal { mean, sigma } if !(*mean >= 0.0 && *sigma >= 0.0) => {
                bad(format!("log-normal needs mean >= 0 and sigma >= 0 (mean={mean}, sigma={sigma})"))
            }
            _ => Ok(()),
        }
    }

    /// Inverse CDF at probability `p ∈ (0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Distribution::Point { value } => *value,
            Distribution::Discrete { values, probs } => {
                let mut order: Vec<usize> = (0..values.len()).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                let mut acc = 0.0;
                for &i in &order {
                    acc += probs[i];
                    if p <= acc {
                        return values[i];
                    }
                }
                values[*order.last().expect("non-empty")]
            }
            Distribution::TruncatedNormal { mean, sd, lo, hi } => {
                if *sd == 0.0 || lo == hi {
                    return mean.clamp(*lo, *hi);
                }
                let n = std_normal();
                let fa = n.cdf((lo - mean) / sd);
                let fb = n.cdf((hi - mean) / sd);
                if fb - fa <= 0.0 {
                    // All mass is far in one tail.
                    return if *mean < *lo { *lo } else { *hi };
                }
                let u = (fa + p * (fb - fa)).clamp(1e-300, 1.0 - 1e-16);
                (mean + sd * n.inverse_cdf(u)).clamp(*lo, *hi)
            }
            Distribution::LogNormal { mean, sigma } => {
                if *mean == 0.0 {
                    return 0.0;
                }
                let mu = mean.ln() - 0.5 * sigma * sigma;
                (mu + sigma * std_normal().inverse_cdf(p)).exp()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Point { value } => *value,
            Distribution::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            Distribution::TruncatedNormal { mean, sd, lo, hi } => {
                if *sd == 0.0 || lo == hi {
                    return mean.clamp(*lo, *hi);
                }
                let n = std_normal();
                use statrs::distribution::Continuous;
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let z = n.cdf(b) - n.cdf(a);
                if z <= 0.0 {
                    return if *mean < *lo { *lo } else { *hi };
                }
                mean + sd * (n.pdf(a) - n.pdf(b)) / z
            }
            Distribution::LogNormal { mean, .. } => *mean,
        }
    }

    /// Largest value the distribution can produce (∞ for log-normal).
    pub fn support_max(&self) -> f64 {
        match self {
            Distribution::Point { value } => *value,
            Distribution::Discrete { values, .. } => values.iter().cloned().fold(0.0, f64::max),
            Distribution::TruncatedNormal { hi, mean, sd, .. } => {
                if *sd == 0.0 {
                    mean.min(*hi)
                } else {
                    *hi
                }
            }
            Distribution::LogNormal { mean, sigma } => {
                if *mean == 0.0 || *sigma == 0.0 {
                    *mean
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Atoms for discrete families; `n` equi-probability quantile nodes otherwise.
    pub fn quadrature(&self, n: usize) -> Quadrature {
        match self {
            Distribution::Point { value } => Quadrature::point(*value),
            Distribution::Discrete { values, probs } => Quadrature { nodes: values.clone(), weights: probs.clone() },
            Distribution::TruncatedNormal { sd, lo, hi, .. } if *sd == 0.0 || lo == hi => Quadrature::point(self.quantile(0.5)),
            Distribution::LogNormal { mean, sigma } if *mean == 0.0 || *sigma == 0.0 => Quadrature::point(*mean),
            _ => {
                let n = n.max(1);
                let w = 1.0 / n as f64;
                Quadrature { nodes: (0..n).map(|k| self.quantile((k as f64 + 0.5) * w)).collect(), weights: vec![w; n] }
            }
        }
    }

    /// One draw by inversion; consumes exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // Open interval keeps the continuous quantiles finite.
        let p = u.clamp(1e-12, 1.0 - 1e-12);
        match self {
            Distribution::Discrete { .. } => self.quantile(u.max(f64::MIN_POSITIVE)),
            _ => self.quantile(p),
        }
    }

    pub fn scaled(&self, k: f64) -> Distribution {
        match self {
            Distribution::Point { value } => Distribution::Point { value: value * k },
            Distribution::Discrete { values, probs } => {
                Distribution::Discrete { values: values.iter().map(|v| v * k).collect(), probs: probs.clone() }
            }
            Distribution::TruncatedNormal { mean, sd, lo, hi } => {
                Distribution::TruncatedNormal { mean: mean * k, sd: sd * k, lo: lo * k, hi: hi * k }
            }
            Distribution::LogNormal { mean, sigma } => Distribution::LogNormal { mean: mean * k, sigma: *sigma },
        }
    }
}
