//! Limiting covariance matrices of small-index balanced affine urns.
//!
//! The target is the integral
//! `Sigma = b ∫_0^∞ exp(m A^T) P^T B P exp(m A) exp(-b m) dm`,
//! where `P` removes the principal eigendirection and `B` is the one-draw
//! noise matrix. Differentiating the integrand in `m` and integrating shows
//! the integral `S` solves the Sylvester equation
//! `(A^T - b/2 I) S + S (A - b/2 I) = -P^T B P`;
//! the integrand vanishes at infinity because the projected spectrum
//! satisfies `Re(lambda_i + lambda_j) < b` whenever the core index is below
//! one half. The Sylvester route is the primary method; adaptive quadrature
//! of the integrand with explicit matrix exponentials serves as an
//! independent cross-check.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expm::expm;
use crate::spectral::{projector, spectral_analysis, SpectralError};
use crate::urn::UrnSpec;

/// Truncation target for the quadrature tail bound.
const TAIL_BOUND: f64 = 1e-14;

/// Absolute Simpson tolerance, scaled by the integrand magnitude.
const QUADRATURE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMethod {
    Sylvester,
    Quadrature,
}

impl std::fmt::Display for CovMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CovMethod::Sylvester => write!(f, "sylvester"),
            CovMethod::Quadrature => write!(f, "quadrature"),
        }
    }
}

/// A computed limiting covariance with its solve diagnostics.
#[derive(Debug, Clone)]
pub struct CovarianceLimit {
    /// The limiting matrix `Sigma`, symmetric positive semidefinite with
    /// `Sigma · 1 = 0` (the balanced direction carries no fluctuation).
    pub sigma: DMatrix<f64>,
    pub method: CovMethod,
    /// Max-norm residual of the Sylvester identity, relative to the
    /// right-hand side.
    pub residual: f64,
}

#[derive(Debug, Error)]
pub enum CovarianceError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One-draw noise matrix `B = s^-2 A^T Q A` with
/// `Q = s(s-1) v1^T v1 + s diag(v1)`.
pub fn noise_matrix(a: &DMatrix<i64>, v1: &[f64], sample_size: u64) -> DMatrix<f64> {
    let d = a.nrows();
    assert_eq!(d, v1.len(), "eigenvector length must match the matrix");
    let s = sample_size as f64;
    let q = DMatrix::from_fn(d, d, |i, j| {
        let pair = s * (s - 1.0) * v1[i] * v1[j];
        let diag = if i == j { s * v1[i] } else { 0.0 };
        pair + diag
    });
    let af = to_f64_matrix(a);
    let b = af.transpose() * q * af / (s * s);
    symmetrize(&b)
}

/// Limiting covariance by the primary Sylvester route.
pub fn limit_covariance(
    a: &DMatrix<i64>,
    balance: i64,
    sample_size: u64,
    v1: &[f64],
) -> Result<CovarianceLimit, SpectralError> {
    let rhs = projected_noise(a, balance, sample_size, v1)?;
    let g = shifted_core(a, balance);
    let (s, residual) = solve_sylvester(&g, &rhs)?;
    Ok(CovarianceLimit {
        sigma: symmetrize(&(s * balance as f64)),
        method: CovMethod::Sylvester,
        residual,
    })
}

/// Limiting covariance by adaptive quadrature of the defining integral,
/// truncated where the spectral tail bound drops below `1e-14`.
pub fn limit_covariance_quadrature(
    a: &DMatrix<i64>,
    balance: i64,
    sample_size: u64,
    v1: &[f64],
) -> Result<CovarianceLimit, SpectralError> {
    let m_max = quadrature_horizon(a, balance)?;
    limit_covariance_quadrature_with_horizon(a, balance, sample_size, v1, m_max)
}

/// Quadrature with an explicit truncation point; exposed so the horizon
/// stability can be checked by halving and doubling it.
pub fn limit_covariance_quadrature_with_horizon(
    a: &DMatrix<i64>,
    balance: i64,
    sample_size: u64,
    v1: &[f64],
    m_max: f64,
) -> Result<CovarianceLimit, SpectralError> {
    let rhs = projected_noise(a, balance, sample_size, v1)?;
    let af = to_f64_matrix(a);
    let b = balance as f64;
    let c = -&rhs; // the integrand carries +P^T B P
    let integrand = |m: f64| {
        let e = expm(&(&af * m));
        e.transpose() * &c * &e * (-b * m).exp()
    };
    let tol = QUADRATURE_TOL * max_abs(&c).max(1.0);
    let integral = adaptive_simpson(&integrand, 0.0, m_max, tol);
    let g = shifted_core(a, balance);
    let residual = sylvester_residual(&g, &integral, &rhs);
    Ok(CovarianceLimit {
        sigma: symmetrize(&(integral * b)),
        method: CovMethod::Quadrature,
        residual,
    })
}

/// Truncation point: smallest `m` with
/// `(1+m)^(2(d-1)) exp((2 Re(lambda_2) - b) m) <= 1e-14`. The polynomial
/// factor covers Jordan-block growth of the projected exponential.
fn quadrature_horizon(a: &DMatrix<i64>, balance: i64) -> Result<f64, SpectralError> {
    let data = checked_spectrum(a, balance)?;
    let decay = balance as f64 - 2.0 * data.eigenvalues[1].re;
    debug_assert!(decay > 0.0);
    let poly_power = 2 * (a.nrows() as i32 - 1);
    let bound = |m: f64| (1.0 + m).powi(poly_power) * (-decay * m).exp();
    let mut m = -TAIL_BOUND.ln() / decay;
    while bound(m) > TAIL_BOUND {
        m *= 2.0;
    }
    Ok(m)
}

/// Asymptotic per-draw mean increment `b v1` for a small-index scheme.
pub fn limit_mean_direction(spec: &UrnSpec) -> Result<Vec<f64>, SpectralError> {
    let data = checked_spectrum(spec.core(), spec.balance())?;
    Ok(data.v1.iter().map(|v| v * spec.balance() as f64).collect())
}

/// Closed-form upper-left 3x3 covariance block for the profile urn of a
/// hyperrecursive tree, as rational functions of the hyperedge size.
pub fn cov3_closed_form(theta: u64) -> DMatrix<f64> {
    assert!(theta >= 2, "hyperedge size must be at least 2");
    let t = theta as i128;
    let q = (t - 1) * (t - 1); // (θ-1)²
    let w = 2 * t - 1; // 2θ-1
    let entry = |num: i128, den: i128| num as f64 / den as f64;

    let s11 = entry(q, t.pow(2) * w);
    let s12 = entry(-q * (t.pow(2) + 2 * t - 1), t.pow(3) * w.pow(2));
    let s13 = entry(
        -q * (t.pow(4) + t.pow(3) - 7 * t.pow(2) + 5 * t - 1),
        t.pow(4) * w.pow(3),
    );
    let s22 = entry(
        q * (6 * t.pow(4) - 6 * t.pow(3) + 8 * t.pow(2) - 5 * t + 1),
        t.pow(4) * w.pow(3),
    );
    let s23 = entry(
        -q * (3 * t.pow(6) - 16 * t.pow(4) + 32 * t.pow(3) - 24 * t.pow(2) + 8 * t - 1),
        t.pow(5) * w.pow(4),
    );
    let s33 = entry(
        q * (26 * t.pow(8) - 74 * t.pow(7) + 112 * t.pow(6) - 152 * t.pow(5) + 170 * t.pow(4)
            - 121 * t.pow(3)
            + 50 * t.pow(2)
            - 11 * t
            + 1),
        t.pow(6) * w.pow(5),
    );
    DMatrix::from_row_slice(3, 3, &[s11, s12, s13, s12, s22, s23, s13, s23, s33])
}

fn checked_spectrum(
    a: &DMatrix<i64>,
    balance: i64,
) -> Result<crate::spectral::SpectralData, SpectralError> {
    let data = spectral_analysis(a, balance)?;
    if data.core_index >= 0.5 {
        return Err(SpectralError::LargeOrCriticalIndex {
            core_index: data.core_index,
        });
    }
    Ok(data)
}

/// `P^T B P` with the small-index precondition checked.
fn projected_noise(
    a: &DMatrix<i64>,
    balance: i64,
    sample_size: u64,
    v1: &[f64],
) -> Result<DMatrix<f64>, SpectralError> {
    checked_spectrum(a, balance)?;
    let p = projector(v1);
    let b = noise_matrix(a, v1, sample_size);
    Ok(symmetrize(&(p.transpose() * b * p)))
}

fn shifted_core(a: &DMatrix<i64>, balance: i64) -> DMatrix<f64> {
    let d = a.nrows();
    to_f64_matrix(a) - DMatrix::identity(d, d) * (balance as f64 / 2.0)
}

/// Solves `G^T S + S G = -C` through the Kronecker normal equations with one
/// step of iterative refinement; returns the solution and its relative
/// max-norm residual.
fn solve_sylvester(
    g: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64), SpectralError> {
    let d = g.nrows();
    let gt = g.transpose();
    let id = DMatrix::<f64>::identity(d, d);
    let k = kron(&id, &gt) + kron(&gt, &id);
    let rhs = vec_of(&(-c));
    let lu = k.clone().full_piv_lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| SpectralError::SolveFailure("singular Sylvester operator".into()))?;
    let correction = lu.solve(&(&rhs - &k * &x));
    if let Some(dx) = correction {
        x += dx;
    }
    let s = unvec(&x, d);
    let residual = sylvester_residual(g, &s, c);
    Ok((s, residual))
}

/// `max |G^T S + S G + C| / max |C|`.
fn sylvester_residual(g: &DMatrix<f64>, s: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let lhs = g.transpose() * s + s * g + c;
    max_abs(&lhs) / max_abs(c).max(f64::MIN_POSITIVE)
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

fn vec_of(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

fn unvec(v: &nalgebra::DVector<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

fn to_f64_matrix(a: &DMatrix<i64>) -> DMatrix<f64> {
    a.map(|x| x as f64)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Matrix-valued adaptive Simpson on `[a, b]` with max-norm error control.
fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let fa = f(a);
    let fb = f(b);
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let whole = simpson_panel(a, b, &fa, &fm, &fb);
    simpson_recurse(f, a, b, &fa, &fm, &fb, &whole, tol, 40)
}

fn simpson_panel(
    a: f64,
    b: f64,
    fa: &DMatrix<f64>,
    fm: &DMatrix<f64>,
    fb: &DMatrix<f64>,
) -> DMatrix<f64> {
    (fa + fm * 4.0 + fb) * ((b - a) / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: &DMatrix<f64>,
    fm: &DMatrix<f64>,
    fb: &DMatrix<f64>,
    whole: &DMatrix<f64>,
    tol: f64,
    depth: u32,
) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let mid = 0.5 * (a + b);
    let lm = 0.5 * (a + mid);
    let rm = 0.5 * (mid + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_panel(a, mid, fa, &flm, fm);
    let right = simpson_panel(mid, b, fm, &frm, fb);
    let refined = &left + &right;
    let err = max_abs(&(&refined - whole));
    if depth == 0 || err <= 15.0 * tol {
        // Richardson correction for the accepted panel.
        return &refined + (&refined - whole) / 15.0;
    }
    let half_tol = tol * 0.5;
    simpson_recurse(f, a, mid, fa, &flm, fm, &left, half_tol, depth - 1)
        + simpson_recurse(f, mid, b, fm, &frm, fb, &right, half_tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hrt::{hrt_core_matrix, v1_hrt};

    fn hrt_limit(theta: u64, k: usize) -> CovarianceLimit {
        let a = hrt_core_matrix(theta, k);
        let v1 = v1_hrt(theta, k);
        limit_covariance(&a, 1, theta - 1, &v1).unwrap()
    }

    #[test]
    fn cov3_theta2_matches_hand_fractions() {
        let m = cov3_closed_form(2);
        assert!((m[(0, 0)] - 1.0 / 12.0).abs() < 1e-15);
        assert!((m[(0, 1)] + 7.0 / 72.0).abs() < 1e-15);
        assert!((m[(0, 2)] + 5.0 / 432.0).abs() < 1e-15);
        assert!((m[(1, 1)] - 71.0 / 432.0).abs() < 1e-15);
        assert!((m[(1, 2)] + 111.0 / 2592.0).abs() < 1e-15);
        assert!((m[(2, 2)] - 1419.0 / 15552.0).abs() < 1e-15);
    }

    #[test]
    fn cov3_leading_entries_match_reported_values() {
        assert!((cov3_closed_form(3)[(0, 0)] - 4.0 / 45.0).abs() < 1e-15);
        assert!((cov3_closed_form(4)[(0, 0)] - 9.0 / 112.0).abs() < 1e-15);
        assert!((cov3_closed_form(5)[(0, 0)] - 16.0 / 225.0).abs() < 1e-15);
        // Three-decimal presentation of the θ=3 block.
        let m = cov3_closed_form(3);
        let rounded: Vec<f64> = [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
            .iter()
            .map(|x| (x * 1000.0).round() / 1000.0)
            .collect();
        assert_eq!(rounded, vec![0.089, -0.083, -0.023, 0.151, -0.041, 0.113]);
    }

    #[test]
    fn sylvester_matches_closed_form_block() {
        for theta in 2..=5u64 {
            let limit = hrt_limit(theta, 3);
            let closed = cov3_closed_form(theta);
            for i in 0..3 {
                for j in 0..3 {
                    let rel = (limit.sigma[(i, j)] - closed[(i, j)]).abs() / closed[(i, j)].abs();
                    assert!(
                        rel < 1e-8,
                        "theta={theta} ({i},{j}): {} vs {}",
                        limit.sigma[(i, j)],
                        closed[(i, j)]
                    );
                }
            }
            assert!(limit.residual < 1e-10, "residual {}", limit.residual);
        }
    }

    #[test]
    fn quadrature_agrees_with_sylvester() {
        for theta in 2..=5u64 {
            let a = hrt_core_matrix(theta, 3);
            let v1 = v1_hrt(theta, 3);
            let syl = limit_covariance(&a, 1, theta - 1, &v1).unwrap();
            let quad = limit_covariance_quadrature(&a, 1, theta - 1, &v1).unwrap();
            let diff = max_abs(&(&syl.sigma - &quad.sigma));
            assert!(diff < 1e-6, "theta={theta}: methods differ by {diff}");
        }
    }

    #[test]
    fn two_color_limit_is_known_exactly() {
        // θ=2, k=1: Sigma = P/6 with P the rank-one deflation projector.
        let limit = hrt_limit(2, 1);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) / 12.0;
        assert!(max_abs(&(&limit.sigma - &expect)) < 1e-12);
    }

    #[test]
    fn sigma_annihilates_the_ones_vector() {
        for theta in 2..=5u64 {
            for k in 1..=5usize {
                let limit = hrt_limit(theta, k);
                let ones = nalgebra::DVector::from_element(k + 1, 1.0);
                let image = &limit.sigma * ones;
                assert!(
                    image.iter().all(|x| x.abs() < 1e-8),
                    "theta={theta} k={k}"
                );
            }
        }
    }

    #[test]
    fn sigma_is_symmetric_positive_semidefinite() {
        for theta in 2..=5u64 {
            for k in 1..=5usize {
                let limit = hrt_limit(theta, k);
                let asym = max_abs(&(&limit.sigma - limit.sigma.transpose()));
                assert!(asym < 1e-12);
                let eigen = limit.sigma.clone().symmetric_eigen();
                let min = eigen.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
                assert!(min > -1e-10, "theta={theta} k={k} min eigenvalue {min}");
            }
        }
    }

    #[test]
    fn noise_matrix_single_draw_drops_pair_term() {
        let a = hrt_core_matrix(2, 2);
        let v1 = v1_hrt(2, 2);
        let b = noise_matrix(&a, &v1, 1);
        let af = to_f64_matrix(&a);
        let diag = DMatrix::from_fn(3, 3, |i, j| if i == j { v1[i] } else { 0.0 });
        let expect = af.transpose() * diag * af;
        assert!(max_abs(&(&b - &expect)) < 1e-15);
    }

    #[test]
    fn critical_index_is_refused() {
        // Eigenvalues {4, 2}: core index exactly 1/2.
        let a = DMatrix::from_row_slice(2, 2, &[3, 1, 1, 3]);
        let err = limit_covariance(&a, 4, 1, &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, SpectralError::LargeOrCriticalIndex { .. }));
    }

    #[test]
    fn quadrature_horizon_is_stable_under_doubling() {
        let a = hrt_core_matrix(3, 3);
        let v1 = v1_hrt(3, 3);
        let m_max = quadrature_horizon(&a, 1).unwrap();
        let base = limit_covariance_quadrature_with_horizon(&a, 1, 2, &v1, m_max).unwrap();
        let doubled = limit_covariance_quadrature_with_horizon(&a, 1, 2, &v1, 2.0 * m_max).unwrap();
        let halved = limit_covariance_quadrature_with_horizon(&a, 1, 2, &v1, 0.5 * m_max).unwrap();
        let move_up = max_abs(&(&doubled.sigma - &base.sigma));
        let move_down = max_abs(&(&base.sigma - &halved.sigma));
        assert!(move_up < 1e-8, "doubling moved entries by {move_up}");
        assert!(move_down >= move_up);
    }

    #[test]
    fn limit_mean_direction_is_scaled_v1() {
        let spec = crate::hrt::hrt_urn(4, 3);
        let direction = limit_mean_direction(&spec).unwrap();
        let expect = [0.25, 3.0 / 16.0, 9.0 / 64.0, 27.0 / 64.0];
        for (got, want) in direction.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        let total: f64 = direction.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
