//! Balanced affine urn schemes with multiple drawings.
//!
//! An urn holds balls of `k` colors. Each draw takes an unordered sample of
//! `s` balls without replacement, returns it, and adds balls according to the
//! replacement vector prescribed for the sample's color composition. In an
//! affine scheme that vector is the sample-weighted average of the rows of the
//! core matrix `A`, whose row `i` is the replacement after an all-color-`i`
//! sample. The scheme is `b`-balanced when every replacement adds the same
//! total `b`, so the load after `n` draws is `τ_n = b n + τ_0`.
//!
//! Probabilities of sample compositions follow the multivariate
//! hypergeometric law, and the one-draw conditional mean of the count vector
//! is the affine map `x ↦ x (I + A/τ)`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

use crate::exact;

/// Above this simplex size, spec validation switches from exhaustive
/// enumeration of all sample compositions to the equivalent algebraic checks.
const EXHAUSTIVE_SIMPLEX_CAP: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UrnError {
    #[error("core matrix is not balanced: row {row} sums to {got}, row 0 sums to {expected}")]
    UnbalancedMatrix { row: usize, got: i64, expected: i64 },
    #[error("scheme is not affine: replacement for sample {sample:?} has fractional entries")]
    NonAffine { sample: Vec<u64> },
    #[error("scheme is untenable: replacement for sample {sample:?} removes more color-{color} balls than were drawn")]
    Untenable { sample: Vec<u64>, color: usize },
    #[error("initial load {total} is smaller than the sample size {sample_size}")]
    InsufficientInitial { total: u64, sample_size: u64 },
    #[error("infeasible sample: wants {wanted} balls of color {color} but only {available} are present")]
    InfeasibleSample { color: usize, wanted: u64, available: u64 },
    #[error("urn holds {total} balls, fewer than the sample size {sample_size}")]
    ExhaustedUrn { total: u64, sample_size: u64 },
    #[error("invalid urn specification: {0}")]
    InvalidSpec(String),
}

/// A validated `b`-balanced affine urn scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrnSpec {
    colors: usize,
    sample_size: u64,
    balance: i64,
    core: DMatrix<i64>,
    initial: Vec<u64>,
    warnings: Vec<String>,
}

/// Ball counts after `draws` draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrnState {
    counts: Vec<u64>,
    total: u64,
    draws: u64,
}

/// The color composition of one sample: `counts` sums to the sample size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SampleVector {
    counts: Vec<u64>,
}

impl SampleVector {
    /// Wraps a composition, checking that it sums to `sample_size`.
    pub fn new(counts: Vec<u64>, sample_size: u64) -> Result<Self, UrnError> {
        let total: u64 = counts.iter().sum();
        if total != sample_size {
            return Err(UrnError::InvalidSpec(format!(
                "sample {counts:?} sums to {total}, expected {sample_size}"
            )));
        }
        Ok(SampleVector { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sample_size(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// All compositions of `total` into `parts` nonnegative integers, ordered
/// lexicographically descending on the first coordinate, then the second, and
/// so on: `(s,0,..,0)` first, `(0,..,0,s)` last.
pub fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    assert!(parts >= 1, "compositions needs at least one part");
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(parts);
    fn rec(remaining: u64, parts_left: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts_left == 1 {
            current.push(remaining);
            out.push(current.clone());
            current.pop();
            return;
        }
        for v in (0..=remaining).rev() {
            current.push(v);
            rec(remaining - v, parts_left - 1, current, out);
            current.pop();
        }
    }
    rec(total, parts, &mut current, &mut out);
    out
}

/// Number of compositions of `total` into `parts` parts, `C(total+parts-1, parts-1)`.
fn composition_count(total: u64, parts: usize) -> u64 {
    exact::binomial(total + parts as u64 - 1, parts as u64 - 1)
        .to_u64()
        .unwrap_or(u64::MAX)
}

impl UrnSpec {
    /// Validates and builds an urn scheme from its core matrix, sample size,
    /// and initial counts. The balance is inferred from the row sums.
    pub fn new(core: DMatrix<i64>, sample_size: u64, initial: Vec<u64>) -> Result<Self, UrnError> {
        let k = core.nrows();
        if core.ncols() != k {
            return Err(UrnError::InvalidSpec(format!(
                "core matrix must be square, got {}x{}",
                core.nrows(),
                core.ncols()
            )));
        }
        if k < 2 {
            return Err(UrnError::InvalidSpec(format!(
                "urn needs at least 2 colors, got {k}"
            )));
        }
        if sample_size == 0 {
            return Err(UrnError::InvalidSpec("sample size must be positive".into()));
        }
        if initial.len() != k {
            return Err(UrnError::InvalidSpec(format!(
                "initial counts have length {}, expected {k}",
                initial.len()
            )));
        }

        let balance: i64 = core.row(0).iter().sum();
        for row in 1..k {
            let got: i64 = core.row(row).iter().sum();
            if got != balance {
                return Err(UrnError::UnbalancedMatrix {
                    row,
                    got,
                    expected: balance,
                });
            }
        }

        let spec = UrnSpec {
            colors: k,
            sample_size,
            balance,
            core,
            initial: initial.clone(),
            warnings: Vec::new(),
        };

        if composition_count(sample_size, k) <= EXHAUSTIVE_SIMPLEX_CAP {
            // Exhaustive affinity and tenability over the whole simplex.
            for q in compositions(sample_size, k) {
                let weighted = spec.weighted_rows(&q);
                for (i, &w) in weighted.iter().enumerate() {
                    if w % sample_size as i64 != 0 {
                        return Err(UrnError::NonAffine { sample: q });
                    }
                    if w / sample_size as i64 + (q[i] as i64) < 0 {
                        return Err(UrnError::Untenable { sample: q, color: i });
                    }
                }
            }
        } else {
            spec.check_affine_algebraic()?;
        }

        let total: u64 = initial.iter().sum();
        if total < sample_size {
            return Err(UrnError::InsufficientInitial {
                total,
                sample_size,
            });
        }

        let mut spec = spec;
        for col in 0..k {
            if spec.core.column(col).iter().all(|&v| v == 0) && initial[col] == 0 {
                spec.warnings.push(format!(
                    "column {col} of the core matrix is identically zero and color {col} starts \
                     empty; the scheme may be reducible"
                ));
            }
        }
        Ok(spec)
    }

    /// Affinity and tenability without enumerating the simplex. A scheme is
    /// affine iff all core rows are congruent entrywise mod `s`; it is tenable
    /// iff off-diagonal entries are nonnegative and diagonals are `>= -s`.
    /// Both follow from linearity of `q ↦ q·A` over the simplex vertices.
    fn check_affine_algebraic(&self) -> Result<(), UrnError> {
        let s = self.sample_size as i64;
        let k = self.colors;
        for i in 1..k {
            for j in 0..k {
                if (self.core[(0, j)] - self.core[(i, j)]).rem_euclid(s) != 0 {
                    let mut sample = vec![0u64; k];
                    sample[0] = self.sample_size - 1;
                    sample[i] = 1;
                    return Err(UrnError::NonAffine { sample });
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                let bad = if i == j {
                    self.core[(i, j)] < -s
                } else {
                    self.core[(j, i)] < 0
                };
                if bad {
                    let mut sample = vec![0u64; k];
                    sample[j] = self.sample_size;
                    return Err(UrnError::Untenable { sample, color: i });
                }
            }
        }
        Ok(())
    }

    /// `q·A` without the division by `s`.
    fn weighted_rows(&self, q: &[u64]) -> Vec<i64> {
        let mut acc = vec![0i64; self.colors];
        for (i, &qi) in q.iter().enumerate() {
            if qi == 0 {
                continue;
            }
            for j in 0..self.colors {
                acc[j] += qi as i64 * self.core[(i, j)];
            }
        }
        acc
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    pub fn sample_size(&self) -> u64 {
        self.sample_size
    }

    pub fn balance(&self) -> i64 {
        self.balance
    }

    pub fn core(&self) -> &DMatrix<i64> {
        &self.core
    }

    pub fn initial(&self) -> &[u64] {
        &self.initial
    }

    /// Validation notes that did not reject the spec (e.g. reducibility hints).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// The state before any draw.
    pub fn initial_state(&self) -> UrnState {
        UrnState {
            counts: self.initial.clone(),
            total: self.initial.iter().sum(),
            draws: 0,
        }
    }

    /// All sample compositions, in the fixed enumeration order.
    pub fn simplex(&self) -> Vec<SampleVector> {
        compositions(self.sample_size, self.colors)
            .into_iter()
            .map(|counts| SampleVector { counts })
            .collect()
    }

    /// Replacement vector `a_q = Σ_i (q_i/s)·(row i of A)`; integral for every
    /// sample of a validated affine scheme, and sums to the balance.
    pub fn replacement_for_sample(&self, q: &SampleVector) -> Vec<i64> {
        let s = self.sample_size as i64;
        self.weighted_rows(q.counts())
            .into_iter()
            .map(|w| {
                debug_assert!(w % s == 0, "affinity guarantees integral replacements");
                w / s
            })
            .collect()
    }

    /// Draws one sample from `state` without replacement, color by color via
    /// conditional univariate hypergeometric draws; the result follows the
    /// multivariate hypergeometric law of `sample_pmf`.
    pub fn draw_sample<R: Rng + ?Sized>(
        &self,
        state: &UrnState,
        rng: &mut R,
    ) -> Result<SampleVector, UrnError> {
        if state.total < self.sample_size {
            return Err(UrnError::ExhaustedUrn {
                total: state.total,
                sample_size: self.sample_size,
            });
        }
        let mut q = vec![0u64; self.colors];
        let mut pool = state.total;
        let mut want = self.sample_size;
        for i in 0..self.colors {
            if want == 0 {
                break;
            }
            let have = state.counts[i];
            if i + 1 == self.colors {
                debug_assert!(want <= have);
                q[i] = want;
                break;
            }
            q[i] = hypergeometric_draw(rng, pool, have, want);
            pool -= have;
            want -= q[i];
        }
        Ok(SampleVector { counts: q })
    }

    /// Advances the state by one draw: sample, then add the replacement.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &UrnState,
        rng: &mut R,
    ) -> Result<UrnState, UrnError> {
        let q = self.draw_sample(state, rng)?;
        let add = self.replacement_for_sample(&q);
        let mut counts = state.counts.clone();
        for i in 0..self.colors {
            let next = counts[i] as i64 + add[i];
            debug_assert!(next >= 0, "tenability keeps counts nonnegative");
            counts[i] = next as u64;
        }
        Ok(UrnState {
            counts,
            total: (state.total as i64 + self.balance) as u64,
            draws: state.draws + 1,
        })
    }

    /// One-draw conditional expectation `x (I + A/τ)`.
    pub fn conditional_mean(&self, state: &UrnState) -> Vec<f64> {
        self.conditional_mean_exact(state)
            .iter()
            .map(exact::to_f64)
            .collect()
    }

    /// One-draw conditional expectation `x (I + A/τ)` in exact rationals.
    pub fn conditional_mean_exact(&self, state: &UrnState) -> Vec<BigRational> {
        let tau = BigInt::from(state.total);
        (0..self.colors)
            .map(|j| {
                let mut xa = BigInt::zero();
                for i in 0..self.colors {
                    xa += BigInt::from(state.counts[i]) * BigInt::from(self.core[(i, j)]);
                }
                BigRational::from_integer(BigInt::from(state.counts[j]))
                    + BigRational::new(xa, tau.clone())
            })
            .collect()
    }
}

impl UrnState {
    /// Builds a state from raw fields, checking the load and total relation.
    pub fn new(counts: Vec<u64>, draws: u64) -> Self {
        let total = counts.iter().sum();
        UrnState {
            counts,
            total,
            draws,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}

/// Probability of drawing the composition `q` from `state` in one sample of
/// `s = Σq` balls without replacement (multivariate hypergeometric).
pub fn sample_pmf(state: &UrnState, q: &SampleVector) -> Result<f64, UrnError> {
    sample_pmf_exact(state, q).map(|p| exact::to_f64(&p))
}

/// Exact rational version of [`sample_pmf`].
pub fn sample_pmf_exact(state: &UrnState, q: &SampleVector) -> Result<BigRational, UrnError> {
    let s = q.sample_size();
    if q.counts().len() != state.counts.len() {
        return Err(UrnError::InvalidSpec(format!(
            "sample has {} colors, state has {}",
            q.counts().len(),
            state.counts.len()
        )));
    }
    if state.total < s {
        return Err(UrnError::ExhaustedUrn {
            total: state.total,
            sample_size: s,
        });
    }
    let mut numer = exact::multinomial(q.counts());
    for (i, (&qi, &xi)) in q.counts().iter().zip(state.counts.iter()).enumerate() {
        if qi > xi {
            return Err(UrnError::InfeasibleSample {
                color: i,
                wanted: qi,
                available: xi,
            });
        }
        numer *= exact::falling_factorial(xi, qi);
    }
    let denom = exact::falling_factorial(state.total, s);
    Ok(BigRational::new(numer, denom))
}

/// Iterates the exact conditional-mean map from the initial state:
/// `E[X_n] = E[X_{n-1}] (I + A/τ_{n-1})`, returned as exact rationals.
///
/// Integer numerators are accumulated against the common denominator
/// `Π τ_j`, so the loop performs no rational reductions until the end.
pub fn mean_recursion_exact(spec: &UrnSpec, draws: u64) -> Vec<BigRational> {
    let k = spec.colors();
    let mut numer: Vec<BigInt> = spec.initial().iter().map(|&x| BigInt::from(x)).collect();
    let mut denom = BigInt::one();
    let mut tau: i64 = spec.initial().iter().sum::<u64>() as i64;
    for _ in 0..draws {
        let mut next = vec![BigInt::zero(); k];
        for (j, slot) in next.iter_mut().enumerate() {
            let mut acc = &numer[j] * BigInt::from(tau);
            for i in 0..k {
                acc += &numer[i] * BigInt::from(spec.core()[(i, j)]);
            }
            *slot = acc;
        }
        numer = next;
        denom *= BigInt::from(tau);
        tau += spec.balance();
    }
    numer
        .into_iter()
        .map(|n| BigRational::new(n, denom.clone()))
        .collect()
}

/// One univariate hypergeometric draw: the number of marked balls in a
/// `draw`-ball sample from `pool` balls of which `marked` are marked.
///
/// Inverse-CDF over the support using the standard pmf ratio recurrence on
/// unnormalized weights; the support has at most `draw + 1` points.
fn hypergeometric_draw<R: Rng + ?Sized>(rng: &mut R, pool: u64, marked: u64, draw: u64) -> u64 {
    debug_assert!(marked <= pool && draw <= pool);
    let lo = draw.saturating_sub(pool - marked);
    let hi = draw.min(marked);
    if lo == hi {
        return lo;
    }
    // w(x+1)/w(x) = (marked-x)(draw-x) / ((x+1)(pool-marked-draw+x+1))
    let mut weights = [0.0f64; 64];
    let span = (hi - lo + 1) as usize;
    debug_assert!(span <= weights.len(), "sample size too large for stack buffer");
    let mut w = 1.0f64;
    let mut total = 0.0f64;
    for (offset, slot) in weights[..span].iter_mut().enumerate() {
        *slot = w;
        total += w;
        let x = lo + offset as u64;
        w *= ((marked - x) * (draw - x)) as f64
            / (((x + 1) * (pool - marked - draw + x + 1)) as f64);
    }
    let target = rng.random::<f64>() * total;
    let mut cum = 0.0f64;
    for (offset, &wx) in weights[..span].iter().enumerate() {
        cum += wx;
        if target < cum {
            return lo + offset as u64;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, rat};
    use num_traits::One;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hrt3_core() -> DMatrix<i64> {
        DMatrix::from_row_slice(4, 4, &[-1, 2, 0, 0, 1, -2, 2, 0, 1, 0, -2, 2, 1, 0, 0, 0])
    }

    fn hrt3_spec() -> UrnSpec {
        UrnSpec::new(hrt3_core(), 2, vec![3, 0, 0, 0]).unwrap()
    }

    #[test]
    fn hrt3_spec_is_valid_with_unit_balance() {
        let spec = hrt3_spec();
        assert_eq!(spec.balance(), 1);
        assert_eq!(spec.colors(), 4);
        assert_eq!(spec.sample_size(), 2);
    }

    #[test]
    fn unbalanced_rows_are_rejected() {
        let core = DMatrix::from_row_slice(2, 2, &[1, 0, 0, 2]);
        let err = UrnSpec::new(core, 1, vec![1, 1]).unwrap_err();
        assert!(matches!(err, UrnError::UnbalancedMatrix { row: 1, got: 2, expected: 1 }));
    }

    #[test]
    fn affinity_accepts_and_rejects_per_definition() {
        // a_(1,1) = ((-1+1)/2, (3+1)/2) = (0,2): integral, tenable.
        let good = DMatrix::from_row_slice(2, 2, &[-1, 3, 1, 1]);
        assert!(UrnSpec::new(good, 2, vec![2, 2]).is_ok());

        // a_(1,1) = (1/2, 3/2): fractional.
        let bad = DMatrix::from_row_slice(2, 2, &[-1, 3, 2, 0]);
        let err = UrnSpec::new(bad, 2, vec![2, 2]).unwrap_err();
        assert!(matches!(err, UrnError::NonAffine { .. }));
    }

    #[test]
    fn untenable_scheme_is_rejected() {
        // All-color-1 sample removes 3 color-1 balls but only 2 were drawn.
        let core = DMatrix::from_row_slice(2, 2, &[-3, 5, 1, 1]);
        let err = UrnSpec::new(core, 2, vec![4, 4]).unwrap_err();
        assert!(matches!(err, UrnError::Untenable { color: 0, .. }));
    }

    #[test]
    fn insufficient_initial_load_is_rejected() {
        let err = UrnSpec::new(hrt3_core(), 2, vec![1, 0, 0, 0]).unwrap_err();
        assert!(matches!(
            err,
            UrnError::InsufficientInitial { total: 1, sample_size: 2 }
        ));
    }

    #[test]
    fn composition_order_is_descending_lexicographic() {
        let got = compositions(2, 3);
        let expect: Vec<Vec<u64>> = vec![
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 2, 0],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        assert_eq!(got, expect);
    }

    #[test]
    fn replacement_matches_closed_form() {
        let spec = hrt3_spec();
        let q = SampleVector::new(vec![1, 1, 0, 0], 2).unwrap();
        assert_eq!(spec.replacement_for_sample(&q), vec![0, 0, 1, 0]);

        // An all-color-1 sample returns row 1 exactly.
        let q = SampleVector::new(vec![2, 0, 0, 0], 2).unwrap();
        assert_eq!(spec.replacement_for_sample(&q), vec![-1, 2, 0, 0]);
    }

    #[test]
    fn replacement_theta4_k2_mixed_sample() {
        // θ=4, k=2 profile urn: s=3, rows (1-s1, s1-s2, s2) at the vertices.
        let core = DMatrix::from_row_slice(3, 3, &[-2, 3, 0, 1, -3, 3, 1, 0, 0]);
        let spec = UrnSpec::new(core, 3, vec![4, 0, 0]).unwrap();
        let q = SampleVector::new(vec![1, 2, 0], 3).unwrap();
        assert_eq!(spec.replacement_for_sample(&q), vec![0, -1, 2]);
    }

    #[test]
    fn pmf_small_cases_are_exact() {
        let state = UrnState::new(vec![2, 1, 0, 0], 0);
        let q = SampleVector::new(vec![1, 1, 0, 0], 2).unwrap();
        assert_eq!(sample_pmf_exact(&state, &q).unwrap(), frac(2, 3));

        let state = UrnState::new(vec![5, 0, 0], 0);
        let q = SampleVector::new(vec![2, 0, 0], 2).unwrap();
        assert_eq!(sample_pmf_exact(&state, &q).unwrap(), rat(1));

        let state = UrnState::new(vec![2, 2], 0);
        let cases = [(vec![2, 0], frac(1, 6)), (vec![1, 1], frac(4, 6)), (vec![0, 2], frac(1, 6))];
        for (qv, expect) in cases {
            let q = SampleVector::new(qv, 2).unwrap();
            assert_eq!(sample_pmf_exact(&state, &q).unwrap(), expect);
        }
    }

    #[test]
    fn pmf_rejects_infeasible_samples() {
        let state = UrnState::new(vec![1, 1], 0);
        let q = SampleVector::new(vec![2, 0], 2).unwrap();
        assert!(matches!(
            sample_pmf_exact(&state, &q),
            Err(UrnError::InfeasibleSample { color: 0, wanted: 2, available: 1 })
        ));
    }

    #[test]
    fn pmf_sums_to_one_exactly() {
        let spec = hrt3_spec();
        let state = UrnState::new(vec![2, 3, 1, 2], 5);
        let total: BigRational = spec
            .simplex()
            .iter()
            .filter_map(|q| sample_pmf_exact(&state, q).ok())
            .sum();
        assert!(total.is_one());
    }

    #[test]
    fn single_color_draw_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let core = DMatrix::from_row_slice(3, 3, &[-1, 2, 0, 1, -2, 2, 1, 0, 0]);
        let spec = UrnSpec::new(core, 2, vec![5, 0, 0]).unwrap();
        let state = spec.initial_state();
        let q = spec.draw_sample(&state, &mut rng).unwrap();
        assert_eq!(q.counts(), &[2, 0, 0]);
    }

    #[test]
    fn draw_frequencies_match_pmf() {
        let core = DMatrix::from_row_slice(2, 2, &[-1, 3, 1, 1]);
        let spec = UrnSpec::new(core, 2, vec![2, 2]).unwrap();
        let state = spec.initial_state();
        let mut rng = ChaCha8Rng::seed_from_u64(8801);
        let runs = 100_000;
        let mut mixed = 0u64;
        for _ in 0..runs {
            let q = spec.draw_sample(&state, &mut rng).unwrap();
            if q.counts() == [1, 1] {
                mixed += 1;
            }
        }
        let freq = mixed as f64 / runs as f64;
        assert!((freq - 2.0 / 3.0).abs() < 0.01, "freq={freq}");
    }

    #[test]
    fn draws_are_deterministic_for_a_fixed_seed() {
        let spec = hrt3_spec();
        let state = UrnState::new(vec![4, 3, 2, 1], 7);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(8801);
            (0..20)
                .map(|_| spec.draw_sample(&state, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn first_step_of_theta2_urn_is_forced() {
        let core = DMatrix::from_row_slice(3, 3, &[0, 1, 0, 1, -1, 1, 1, 0, 0]);
        let spec = UrnSpec::new(core, 1, vec![2, 0, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let next = spec.step(&spec.initial_state(), &mut rng).unwrap();
        assert_eq!(next.counts(), &[2, 1, 0]);
        assert_eq!(next.total(), 3);
        assert_eq!(next.draws(), 1);
    }

    #[test]
    fn step_adds_balance_to_total() {
        let spec = hrt3_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut state = spec.initial_state();
        for _ in 0..50 {
            let next = spec.step(&state, &mut rng).unwrap();
            assert_eq!(next.total() as i64 - state.total() as i64, spec.balance());
            assert_eq!(next.counts().iter().sum::<u64>(), next.total());
            state = next;
        }
        // τ_n = n + θ for the profile urn.
        assert_eq!(state.total(), 50 + 3);
    }

    #[test]
    fn exhausted_urn_is_reported() {
        let core = DMatrix::from_row_slice(2, 2, &[0, 1, 1, 0]);
        let spec = UrnSpec::new(core, 2, vec![1, 1]).unwrap();
        let state = UrnState::new(vec![1, 0], 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            spec.draw_sample(&state, &mut rng),
            Err(UrnError::ExhaustedUrn { total: 1, sample_size: 2 })
        ));
    }

    #[test]
    fn conditional_mean_single_color_state() {
        let spec = hrt3_spec();
        let state = UrnState::new(vec![5, 0, 0, 0], 2);
        let mean = spec.conditional_mean_exact(&state);
        assert_eq!(mean, vec![rat(4), rat(2), rat(0), rat(0)]);
    }

    #[test]
    fn linearity_identity_holds_exactly() {
        // Σ_q pmf(q)·a_q = conditional_mean(x) − x, in exact rationals.
        let spec = hrt3_spec();
        let state = UrnState::new(vec![2, 1, 0, 0], 0);
        let mut drift = vec![BigRational::zero(); spec.colors()];
        for q in spec.simplex() {
            let p = match sample_pmf_exact(&state, &q) {
                Ok(p) => p,
                Err(UrnError::InfeasibleSample { .. }) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            for (d, &a) in drift.iter_mut().zip(spec.replacement_for_sample(&q).iter()) {
                *d += &p * rat(a);
            }
        }
        let mean = spec.conditional_mean_exact(&state);
        for i in 0..spec.colors() {
            let expect = &mean[i] - rat(state.counts()[i] as i64);
            assert_eq!(drift[i], expect, "color {i}");
        }
    }

    #[test]
    fn mean_recursion_matches_hand_computation() {
        // θ=2, k=2 profile urn: E[Y_2] = (7/3, 4/3, 1/3).
        let core = DMatrix::from_row_slice(3, 3, &[0, 1, 0, 1, -1, 1, 1, 0, 0]);
        let spec = UrnSpec::new(core, 1, vec![2, 0, 0]).unwrap();
        let mean = mean_recursion_exact(&spec, 2);
        assert_eq!(mean, vec![frac(7, 3), frac(4, 3), frac(1, 3)]);
    }

    #[test]
    fn zero_column_spec_carries_a_warning() {
        let core = DMatrix::from_row_slice(2, 2, &[1, 0, 1, 0]);
        let spec = UrnSpec::new(core, 1, vec![2, 0]).unwrap();
        assert_eq!(spec.warnings().len(), 1);
    }

    #[test]
    fn univariate_hypergeometric_matches_exact_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (pool, marked, draw) = (10u64, 4u64, 3u64);
        let runs = 200_000;
        let mut histogram = [0u64; 4];
        for _ in 0..runs {
            histogram[hypergeometric_draw(&mut rng, pool, marked, draw) as usize] += 1;
        }
        for x in 0..=3u64 {
            let expect = exact::to_f64(&BigRational::new(
                exact::binomial(marked, x) * exact::binomial(pool - marked, draw - x),
                exact::binomial(pool, draw),
            ));
            let got = histogram[x as usize] as f64 / runs as f64;
            assert!((got - expect).abs() < 0.005, "x={x} got={got} expect={expect}");
        }
    }
}
