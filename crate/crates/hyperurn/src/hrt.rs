//! Hyperrecursive-tree specialization of the affine urn machinery.
//!
//! A hyperrecursive tree with hyperedge size `θ` starts from `θ` root
//! vertices sharing one hyperedge; each step picks `θ-1` distinct existing
//! vertices uniformly at random, joins them with the incoming vertex in a new
//! hyperedge, and thereby raises the containment level (hyperedge count) of
//! each picked vertex by one. Tracking the first `k` containment levels plus
//! one lumped "deeper than k" class turns the global profile into a
//! 1-balanced `(k+1)`-color affine urn with sample size `θ-1`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::exact;
use crate::urn::{mean_recursion_exact, UrnSpec};

/// Largest age at which exact-rational mean iteration is used before the
/// floating-point recursion takes over.
const EXACT_MEAN_MAX_DRAWS: u64 = 10_000;

/// Harmonic numbers are summed directly up to this index and evaluated via
/// the digamma function beyond it.
const HARMONIC_DIRECT_MAX: u64 = 10_000;

/// Gamma-ratio terms switch from exact rationals to log-gamma differences
/// above this age.
const GAMMA_RATIO_DIRECT_MAX: u64 = 30;

/// Validated hyperrecursive-tree parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HrtParams {
    pub theta: u64,
    pub levels: usize,
}

impl HrtParams {
    /// Checks `theta >= 2` and `levels >= 1`.
    pub fn new(theta: u64, levels: usize) -> Result<Self, String> {
        if theta < 2 {
            return Err(format!("hyperedge size must be at least 2, got {theta}"));
        }
        if levels < 1 {
            return Err(format!("tracked levels must be at least 1, got {levels}"));
        }
        Ok(HrtParams { theta, levels })
    }
}

/// The `(k+1) x (k+1)` core matrix of the profile urn: an all-level-1 sample
/// replaces row 1 = `(-(θ-2), θ-1, 0, ...)`, an all-level-`i` sample
/// (`2 <= i <= k`) gives `(1, ..., -(θ-1), θ-1, ...)`, and a sample from the
/// lumped class only adds the new vertex: `(1, 0, ..., 0)`. Every row sums to
/// 1: one vertex enters per step.
pub fn hrt_core_matrix(theta: u64, k: usize) -> DMatrix<i64> {
    assert!(theta >= 2, "hyperedge size must be at least 2");
    assert!(k >= 1, "at least one tracked level is required");
    let t = theta as i64;
    let dim = k + 1;
    let mut a = DMatrix::zeros(dim, dim);
    a[(0, 0)] = -(t - 2);
    a[(0, 1)] = t - 1;
    for i in 1..k {
        a[(i, 0)] = 1;
        a[(i, i)] = -(t - 1);
        a[(i, i + 1)] = t - 1;
    }
    a[(k, 0)] = 1;
    a
}

/// The profile urn: core matrix from [`hrt_core_matrix`], sample size `θ-1`,
/// initial counts `(θ, 0, ..., 0)`.
pub fn hrt_urn(theta: u64, k: usize) -> UrnSpec {
    UrnSpec::new(hrt_core_matrix(theta, k), theta - 1, initial_counts(theta, k))
        .expect("profile urn is affine and tenable by construction")
}

fn initial_counts(theta: u64, k: usize) -> Vec<u64> {
    let mut x0 = vec![0u64; k + 1];
    x0[0] = theta;
    x0
}

/// Exact means of the first two containment levels at age `n`:
///
/// `E[X_{n,1}] = n/θ + 1 + (θ-1) Γ(θ)Γ(n+1)/Γ(n+θ)` and
/// `E[X_{n,2}] = (θ-1)/θ² (n+θ) + Γ(θ)Γ(n+1)/Γ(n+θ) ((θ-1)² H_n - (θ-1)/θ)`,
/// with `H_n` the harmonic number.
pub fn exact_mean_levels12_exact(n: u64, theta: u64) -> (BigRational, BigRational) {
    assert!(theta >= 2, "hyperedge size must be at least 2");
    let t = exact::rat(theta as i64);
    let g = exact::gamma_ratio(theta, n);
    let level1 = exact::rat(n as i64) / &t + exact::rat(1) + (&t - exact::rat(1)) * &g;
    let level2 = (&t - exact::rat(1)) / (&t * &t) * exact::rat((n + theta) as i64)
        + &g
            * ((&t - exact::rat(1)) * (&t - exact::rat(1)) * exact::harmonic(n)
                - (&t - exact::rat(1)) / &t);
    (level1, level2)
}

/// Floating-point version of [`exact_mean_levels12_exact`]; uses log-gamma
/// differences for the Γ ratio once `n` is large enough to overflow rationals
/// cheaply.
pub fn exact_mean_levels12(n: u64, theta: u64) -> (f64, f64) {
    assert!(theta >= 2, "hyperedge size must be at least 2");
    if n <= GAMMA_RATIO_DIRECT_MAX {
        let (a, b) = exact_mean_levels12_exact(n, theta);
        return (exact::to_f64(&a), exact::to_f64(&b));
    }
    let t = theta as f64;
    let g = (ln_gamma(t) + ln_gamma(n as f64 + 1.0) - ln_gamma(n as f64 + t)).exp();
    let h = harmonic_f64(n);
    let level1 = n as f64 / t + 1.0 + (t - 1.0) * g;
    let level2 = (t - 1.0) / (t * t) * (n as f64 + t) + g * ((t - 1.0) * (t - 1.0) * h - (t - 1.0) / t);
    (level1, level2)
}

fn harmonic_f64(n: u64) -> f64 {
    if n <= HARMONIC_DIRECT_MAX {
        (1..=n).map(|j| 1.0 / j as f64).sum()
    } else {
        digamma(n as f64 + 1.0) + statrs::consts::EULER_MASCHERONI
    }
}

/// Leading-order mean of containment level `i` at age `n`:
/// `(θ-1)^{i-1}/θ^i · (n+θ)`.
pub fn asymptotic_mean(n: u64, theta: u64, level: usize) -> f64 {
    assert!(theta >= 2 && level >= 1);
    let t = theta as f64;
    ((t - 1.0) / t).powi(level as i32 - 1) / t * (n as f64 + t)
}

/// Exact mean vector `E[Y_n]` of the `(k+1)`-color profile urn, by iterating
/// the conditional-mean map from `Y_0 = θ e_1` in rational arithmetic.
pub fn exact_mean_vector_exact(theta: u64, k: usize, n: u64) -> Vec<BigRational> {
    mean_recursion_exact(&hrt_urn(theta, k), n)
}

/// Floating-point mean vector; exact iteration up to `n = 10^4`, float
/// iteration beyond.
pub fn exact_mean_vector(theta: u64, k: usize, n: u64) -> Vec<f64> {
    if n <= EXACT_MEAN_MAX_DRAWS {
        return exact_mean_vector_exact(theta, k, n)
            .iter()
            .map(exact::to_f64)
            .collect();
    }
    let spec = hrt_urn(theta, k);
    let dim = k + 1;
    let mut mean: Vec<f64> = spec.initial().iter().map(|&x| x as f64).collect();
    let mut tau = theta as f64;
    for _ in 0..n {
        let mut next = vec![0.0; dim];
        for (j, slot) in next.iter_mut().enumerate() {
            let mut acc = mean[j];
            for i in 0..dim {
                acc += mean[i] * spec.core()[(i, j)] as f64 / tau;
            }
            *slot = acc;
        }
        mean = next;
        tau += 1.0;
    }
    mean
}

/// Principal left eigenvector of the profile urn's core matrix, normalized to
/// sum 1: `v_{1,i} = (θ-1)^{i-1}/θ^i` for `i <= k` and
/// `v_{1,k+1} = ((θ-1)/θ)^k`.
pub fn v1_hrt_exact(theta: u64, k: usize) -> Vec<BigRational> {
    assert!(theta >= 2 && k >= 1);
    let t = BigInt::from(theta);
    let tm1 = BigInt::from(theta - 1);
    let mut v = Vec::with_capacity(k + 1);
    let mut num = BigInt::from(1u32);
    let mut den = t.clone();
    for _ in 0..k {
        v.push(BigRational::new(num.clone(), den.clone()));
        num *= &tm1;
        den *= &t;
    }
    // Lumped coordinate: ((θ-1)/θ)^k, the leftover geometric mass.
    v.push(BigRational::new(tm1.pow(k as u32), t.pow(k as u32)));
    v
}

/// Floating-point version of [`v1_hrt_exact`].
pub fn v1_hrt(theta: u64, k: usize) -> Vec<f64> {
    v1_hrt_exact(theta, k).iter().map(exact::to_f64).collect()
}

/// An explicitly grown hyperrecursive tree, storing one hyperedge-membership
/// count per vertex.
#[derive(Debug, Clone)]
pub struct TreeState {
    theta: u64,
    containment: Vec<u32>,
    // Vertex indices in partially shuffled order; reused across steps so each
    // uniform subset draw is O(θ).
    order: Vec<u32>,
}

impl TreeState {
    /// A fresh tree: `θ` roots, each inside the single founding hyperedge.
    pub fn new(theta: u64) -> Self {
        assert!(theta >= 2, "hyperedge size must be at least 2");
        TreeState {
            theta,
            containment: vec![1; theta as usize],
            order: (0..theta as u32).collect(),
        }
    }

    /// Adds one vertex: picks `θ-1` distinct existing vertices uniformly at
    /// random (partial Fisher-Yates over the index range), increments their
    /// containment counts, and appends the new vertex at containment 1.
    /// Returns the indices of the picked vertices.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u32> {
        let picks = (self.theta - 1) as usize;
        let count = self.order.len();
        debug_assert!(count >= picks);
        for j in 0..picks {
            let r = rng.random_range(j..count);
            self.order.swap(j, r);
        }
        let chosen: Vec<u32> = self.order[..picks].to_vec();
        for &v in &chosen {
            self.containment[v as usize] += 1;
        }
        self.containment.push(1);
        self.order.push(self.containment.len() as u32 - 1);
        chosen
    }

    /// Age `n` of the tree (vertex count minus `θ`).
    pub fn age(&self) -> u64 {
        self.containment.len() as u64 - self.theta
    }

    pub fn vertex_count(&self) -> usize {
        self.containment.len()
    }

    /// Per-vertex hyperedge-membership counts.
    pub fn containment(&self) -> &[u32] {
        &self.containment
    }

    /// Histogram of the profile lumped at level `k`: entry `i < k` counts
    /// vertices in exactly `i+1` hyperedges, the final entry counts vertices
    /// in more than `k`.
    pub fn profile(&self, k: usize) -> Vec<u64> {
        let mut hist = vec![0u64; k + 1];
        for &c in &self.containment {
            let level = c as usize;
            if level <= k {
                hist[level - 1] += 1;
            } else {
                hist[k] += 1;
            }
        }
        hist
    }
}

/// Grows a hyperrecursive tree to age `n`.
pub fn grow_tree<R: Rng + ?Sized>(theta: u64, n: u64, rng: &mut R) -> TreeState {
    let mut tree = TreeState::new(theta);
    for _ in 0..n {
        tree.step(rng);
    }
    tree
}

#[allow(dead_code)]
fn as_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}
