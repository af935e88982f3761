//! Replication harness: many independent urn trajectories with deterministic
//! per-replication random streams, moment estimation, and the Henze-Zirkler
//! multivariate normality test.
//!
//! Replication `r` draws from a ChaCha stream keyed by `(master_seed, r)`, so
//! results are identical for any worker count; aggregation always walks the
//! replication-ordered sample list.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::urn::{UrnError, UrnSpec};

#[derive(Debug, Error)]
pub enum McError {
    #[error("need at least 2 replications, got {got}")]
    InsufficientReplications { got: usize },
    #[error("sample covariance is singular; the replications are degenerate")]
    SingularCovariance,
    #[error("need more replications ({replications}) than dimensions ({dimension})")]
    DimensionTooHigh {
        replications: usize,
        dimension: usize,
    },
    #[error(transparent)]
    Urn(#[from] UrnError),
}

/// A full simulation request.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub spec: UrnSpec,
    pub n_draws: u64,
    pub replications: usize,
    pub master_seed: u64,
    /// Number of leading coordinates reported per replication.
    pub tracked_levels: usize,
}

impl SimulationPlan {
    pub fn new(
        spec: UrnSpec,
        n_draws: u64,
        replications: usize,
        master_seed: u64,
        tracked_levels: usize,
    ) -> Result<Self, McError> {
        if replications < 2 {
            return Err(McError::InsufficientReplications { got: replications });
        }
        if n_draws < 1 {
            return Err(McError::Urn(UrnError::InvalidSpec(
                "simulation needs at least one draw".into(),
            )));
        }
        if tracked_levels < 1 || tracked_levels > spec.colors() {
            return Err(McError::Urn(UrnError::InvalidSpec(format!(
                "tracked levels must lie in 1..={}, got {tracked_levels}",
                spec.colors()
            ))));
        }
        Ok(SimulationPlan {
            spec,
            n_draws,
            replications,
            master_seed,
            tracked_levels,
        })
    }
}

/// Runs all replications on the current rayon pool and returns the first
/// `tracked_levels` coordinates of each final count vector, ordered by
/// replication index.
pub fn run_replications(plan: &SimulationPlan) -> Result<Vec<Vec<u64>>, McError> {
    (0..plan.replications)
        .into_par_iter()
        .map(|r| run_one(plan, r as u64))
        .collect()
}

/// Same as [`run_replications`] but on a dedicated pool with `threads`
/// workers; output is identical for every thread count.
pub fn run_replications_with_threads(
    plan: &SimulationPlan,
    threads: usize,
) -> Result<Vec<Vec<u64>>, McError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction");
    pool.install(|| run_replications(plan))
}

fn run_one(plan: &SimulationPlan, replication: u64) -> Result<Vec<u64>, McError> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.master_seed);
    rng.set_stream(replication);
    let spec = &plan.spec;
    let mut state = spec.initial_state();
    for _ in 0..plan.n_draws {
        state = spec.step(&state, &mut rng)?;
    }
    Ok(state.counts()[..plan.tracked_levels].to_vec())
}

/// Normalized moment estimates across replications.
#[derive(Debug, Clone, Serialize)]
pub struct Moments {
    /// Mean of `X_n / n` per coordinate.
    pub mu_hat: Vec<f64>,
    /// Unbiased sample covariance of the final vectors, divided by `n`.
    pub sigma_hat: Vec<Vec<f64>>,
}

/// Estimates `mu_hat = mean(X_n)/n` and `sigma_hat = cov(X_n)/n` from the
/// replication outputs.
pub fn estimate_moments(samples: &[Vec<u64>], n_draws: u64) -> Result<Moments, McError> {
    let r = samples.len();
    if r < 2 {
        return Err(McError::InsufficientReplications { got: r });
    }
    let dim = samples[0].len();
    let n = n_draws as f64;
    let mut mean = vec![0.0f64; dim];
    for sample in samples {
        for (m, &x) in mean.iter_mut().zip(sample.iter()) {
            *m += x as f64;
        }
    }
    for m in &mut mean {
        *m /= r as f64;
    }
    let mut sigma = vec![vec![0.0f64; dim]; dim];
    for sample in samples {
        for i in 0..dim {
            let di = sample[i] as f64 - mean[i];
            for j in i..dim {
                let dj = sample[j] as f64 - mean[j];
                sigma[i][j] += di * dj;
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let value = sigma[i][j] / ((r - 1) as f64 * n);
            sigma[i][j] = value;
            sigma[j][i] = value;
        }
    }
    Ok(Moments {
        mu_hat: mean.iter().map(|m| m / n).collect(),
        sigma_hat: sigma,
    })
}

/// Result of the Henze-Zirkler test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HzResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Smoothing parameter used by the statistic.
    pub beta: f64,
}

/// Henze-Zirkler multivariate normality test.
///
/// The statistic is a weighted L2 distance between the empirical
/// characteristic function of the standardized sample and the Gaussian one,
/// with the standard smoothing parameter
/// `beta = ((2p+1) n / 4)^(1/(p+4)) / sqrt(2)`. The p-value uses the
/// lognormal moment-matching approximation of the null distribution.
pub fn hz_test(samples: &[Vec<f64>]) -> Result<HzResult, McError> {
    let n = samples.len();
    let p = samples.first().map(|s| s.len()).unwrap_or(0);
    if n <= p {
        return Err(McError::DimensionTooHigh {
            replications: n,
            dimension: p,
        });
    }

    let mut mean = vec![0.0f64; p];
    for s in samples {
        for (m, &x) in mean.iter_mut().zip(s.iter()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // MLE covariance (1/n normalization), per the test's definition.
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for s in samples {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    cov /= n as f64;
    let inv = cov
        .clone()
        .try_inverse()
        .filter(|_| cov.determinant().abs() > f64::MIN_POSITIVE)
        .ok_or(McError::SingularCovariance)?;

    // Mahalanobis distances to the mean and pairwise, via the Gram matrix.
    let centered: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.iter().zip(mean.iter()).map(|(x, m)| x - m).collect())
        .collect();
    let whitened: Vec<Vec<f64>> = centered
        .iter()
        .map(|c| {
            (0..p)
                .map(|j| (0..p).map(|l| c[l] * inv[(l, j)]).sum())
                .collect()
        })
        .collect();
    let dj: Vec<f64> = centered
        .iter()
        .zip(whitened.iter())
        .map(|(c, w)| c.iter().zip(w.iter()).map(|(a, b)| a * b).sum())
        .collect();

    let nf = n as f64;
    let pf = p as f64;
    let beta = (1.0 / 2f64.sqrt()) * ((2.0 * pf + 1.0) / 4.0).powf(1.0 / (pf + 4.0))
        * nf.powf(1.0 / (pf + 4.0));
    let b2 = beta * beta;

    let mut t1 = 0.0f64;
    for i in 0..n {
        t1 += 1.0; // diagonal: distance zero
        for j in (i + 1)..n {
            let cross: f64 = whitened[i]
                .iter()
                .zip(centered[j].iter())
                .map(|(a, b)| a * b)
                .sum();
            let dij = dj[i] + dj[j] - 2.0 * cross;
            t1 += 2.0 * (-b2 / 2.0 * dij).exp();
        }
    }
    t1 /= nf * nf;
    let t2: f64 = dj.iter().map(|&d| (-b2 / (2.0 * (1.0 + b2)) * d).exp()).sum::<f64>() / nf;
    let statistic = nf
        * (t1 - 2.0 * (1.0 + b2).powf(-pf / 2.0) * t2 + (1.0 + 2.0 * b2).powf(-pf / 2.0));

    // Lognormal null approximation: moment-match the statistic's mean and
    // variance under normality.
    let a = 1.0 + 2.0 * b2;
    let wb = (1.0 + b2) * (1.0 + 3.0 * b2);
    let b4 = b2 * b2;
    let b8 = b4 * b4;
    let mu = 1.0
        - a.powf(-pf / 2.0)
            * (1.0 + pf * b2 / a + pf * (pf + 2.0) * b4 / (2.0 * a * a));
    let si2 = 2.0 * (1.0 + 4.0 * b2).powf(-pf / 2.0)
        + 2.0 * a.powf(-pf)
            * (1.0 + 2.0 * pf * b4 / (a * a) + 3.0 * pf * (pf + 2.0) * b8 / (4.0 * a.powi(4)))
        - 4.0 * wb.powf(-pf / 2.0)
            * (1.0 + 3.0 * pf * b4 / (2.0 * wb) + pf * (pf + 2.0) * b8 / (2.0 * wb * wb));
    let pmu = (mu.powi(4) / (si2 + mu * mu)).sqrt().ln();
    let psi = ((si2 + mu * mu) / (mu * mu)).ln().sqrt();
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        let z = (statistic.ln() - pmu) / psi;
        0.5 * erfc(z / 2f64.sqrt())
    };
    Ok(HzResult {
        statistic,
        p_value,
        beta,
    })
}

/// Convenience wrapper: runs the HZ test on integer count vectors.
pub fn hz_test_counts(samples: &[Vec<u64>]) -> Result<HzResult, McError> {
    let float_samples: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.iter().map(|&x| x as f64).collect())
        .collect();
    hz_test(&float_samples)
}

/// A serializable simulation report with the plan echo, moment estimates,
/// theoretical columns, and the normality test.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub schema: u32,
    pub command: String,
    pub theta: u64,
    pub k: usize,
    pub n_draws: u64,
    pub replications: usize,
    pub master_seed: u64,
    pub mu_hat: Vec<f64>,
    pub sigma_hat: Vec<Vec<f64>>,
    pub theoretical_mu: Vec<f64>,
    pub theoretical_sigma: Vec<Vec<f64>>,
    pub hz_statistic: f64,
    pub hz_p_value: f64,
}

impl MomentReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        theta: u64,
        k: usize,
        plan: &SimulationPlan,
        moments: Moments,
        theoretical_mu: Vec<f64>,
        theoretical_sigma: Vec<Vec<f64>>,
        hz: HzResult,
    ) -> Self {
        MomentReport {
            schema: 1,
            command: "simulate".into(),
            theta,
            k,
            n_draws: plan.n_draws,
            replications: plan.replications,
            master_seed: plan.master_seed,
            mu_hat: moments.mu_hat,
            sigma_hat: moments.sigma_hat,
            theoretical_mu,
            theoretical_sigma,
            hz_statistic: hz.statistic,
            hz_p_value: hz.p_value,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV: `theta,k,n,R,seed`, the estimated means, the row-major
    /// estimated covariance, then the HZ statistic and p-value. Theoretical
    /// counterparts follow under matching `theo_*` headers.
    pub fn to_csv_string(&self) -> String {
        let k = self.k;
        let mut header: Vec<String> = vec![
            "theta".into(),
            "k".into(),
            "n".into(),
            "R".into(),
            "seed".into(),
        ];
        for i in 1..=k {
            header.push(format!("mu_{i}"));
        }
        for i in 1..=k {
            for j in 1..=k {
                header.push(format!("sigma_{i}{j}"));
            }
        }
        header.push("hz".into());
        header.push("p".into());
        for i in 1..=k {
            header.push(format!("theo_mu_{i}"));
        }
        for i in 1..=k {
            for j in 1..=k {
                header.push(format!("theo_sigma_{i}{j}"));
            }
        }

        let mut row: Vec<String> = vec![
            self.theta.to_string(),
            self.k.to_string(),
            self.n_draws.to_string(),
            self.replications.to_string(),
            self.master_seed.to_string(),
        ];
        row.extend(self.mu_hat.iter().map(|v| v.to_string()));
        row.extend(self.sigma_hat.iter().flatten().map(|v| v.to_string()));
        row.push(self.hz_statistic.to_string());
        row.push(self.hz_p_value.to_string());
        row.extend(self.theoretical_mu.iter().map(|v| v.to_string()));
        row.extend(self.theoretical_sigma.iter().flatten().map(|v| v.to_string()));
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}
