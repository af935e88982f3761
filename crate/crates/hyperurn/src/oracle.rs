//! Exact finite-horizon distributions of small urns.
//!
//! A forward dynamic program expands the one-draw transition law exhaustively:
//! for each reachable count vector with probability `p` and each feasible
//! sample composition `q`, probability `p · pmf(q)` flows to the successor
//! state. All arithmetic is exact rational, so the results serve as ground
//! truth for the mean formulas, the simulators, and the covariance trend.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::exact;
use crate::urn::{sample_pmf_exact, UrnError, UrnSpec, UrnState};

/// Default bound on the number of simultaneously tracked states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error(
        "state space exceeded the cap of {cap} states at draw {attained} \
         (requested {requested})"
    )]
    StateSpaceExceeded {
        cap: usize,
        attained: u64,
        requested: u64,
    },
    #[error(transparent)]
    Urn(#[from] UrnError),
}

/// The exact law of the count vector after `draws` draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDistribution {
    pub draws: u64,
    /// Count vector -> probability; keys are ordered, iteration is stable.
    pub support: BTreeMap<Vec<u64>, BigRational>,
}

impl ExactDistribution {
    /// Sum of all probabilities; exactly one for a complete expansion.
    pub fn total(&self) -> BigRational {
        self.support.values().sum()
    }

    /// JSON rendering with states as arrays and probabilities as `"num/den"`
    /// strings.
    pub fn to_json(&self) -> Value {
        let support: Vec<Value> = self
            .support
            .iter()
            .map(|(state, p)| {
                json!({
                    "state": state,
                    "probability": exact::format_ratio(p),
                })
            })
            .collect();
        json!({
            "draws": self.draws,
            "support": support,
        })
    }
}

/// Expands the exact distribution of `spec` after `draws` draws, failing once
/// more than `cap` states would have to be tracked.
pub fn exact_distribution(
    spec: &UrnSpec,
    draws: u64,
    cap: usize,
) -> Result<ExactDistribution, OracleError> {
    let simplex = spec.simplex();
    let mut layer: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
    layer.insert(spec.initial().to_vec(), BigRational::one());
    for step in 0..draws {
        let mut next: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
        for (counts, prob) in &layer {
            let state = UrnState::new(counts.clone(), step);
            for q in &simplex {
                let pmf = match sample_pmf_exact(&state, q) {
                    Ok(p) => p,
                    Err(UrnError::InfeasibleSample { .. }) => continue,
                    Err(e) => return Err(e.into()),
                };
                let replacement = spec.replacement_for_sample(q);
                let successor: Vec<u64> = counts
                    .iter()
                    .zip(replacement.iter())
                    .map(|(&x, &a)| (x as i64 + a) as u64)
                    .collect();
                let mass = prob * pmf;
                *next.entry(successor).or_insert_with(BigRational::zero) += mass;
                if next.len() > cap {
                    return Err(OracleError::StateSpaceExceeded {
                        cap,
                        attained: step,
                        requested: draws,
                    });
                }
            }
        }
        layer = next;
    }
    Ok(ExactDistribution {
        draws,
        support: layer,
    })
}

/// Exact mean vector and covariance matrix of a distribution.
pub fn exact_moments(dist: &ExactDistribution) -> (Vec<BigRational>, Vec<Vec<BigRational>>) {
    let dim = dist
        .support
        .keys()
        .next()
        .map(|k| k.len())
        .unwrap_or_default();
    let mut mean = vec![BigRational::zero(); dim];
    let mut second = vec![vec![BigRational::zero(); dim]; dim];
    for (counts, p) in &dist.support {
        for i in 0..dim {
            let xi = exact::rat(counts[i] as i64);
            mean[i] += p * &xi;
            for j in i..dim {
                let term = p * &xi * exact::rat(counts[j] as i64);
                second[i][j] += term;
            }
        }
    }
    let mut cov = vec![vec![BigRational::zero(); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let central = &second[i][j] - &mean[i] * &mean[j];
            cov[i][j] = central.clone();
            cov[j][i] = central;
        }
    }
    (mean, cov)
}
