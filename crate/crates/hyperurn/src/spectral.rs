//! Eigenstructure of integer core matrices.
//!
//! Core matrices of the profile urns are defective: the subdominant
//! eigenvalue carries a full Jordan block, and a floating-point Schur solve
//! scatters such a cluster by roughly `eps^(1/k)`. Since core matrices have
//! integer entries, the characteristic polynomial is computed exactly
//! (Faddeev-LeVerrier over big integers), its integer roots are split off by
//! exact synthetic division, and only a non-integer remainder factor, if any,
//! falls back to a numeric companion-matrix solve. The principal left
//! eigenvector comes from an exact rational null-space reduction.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::exact;

/// Constant terms above this bound skip divisor enumeration and leave root
/// finding to the numeric fallback.
const DIVISOR_SEARCH_BOUND: u64 = 1_000_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("leading eigenvalue is not simple: {detail}")]
    DegenerateLeading { detail: String },
    #[error(
        "core index {core_index} is not small: the limit theorems require \
         Re(lambda_2)/b < 1/2"
    )]
    LargeOrCriticalIndex { core_index: f64 },
    #[error("solve failed: {0}")]
    SolveFailure(String),
    #[error("matrix is not balanced: row {row} sums to {got}, row 0 sums to {expected}")]
    NotBalanced { row: usize, got: i64, expected: i64 },
}

/// Ordered spectrum of a balanced core matrix.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// All eigenvalues, descending by real part, ties by descending imaginary
    /// part, then discovery order.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Principal left eigenvector, normalized to sum 1.
    pub v1: Vec<f64>,
    /// Leading eigenvalue; equals the balance.
    pub lambda1: f64,
    /// `Re(lambda_2) / b`.
    pub core_index: f64,
}

/// Coefficients of `det(lambda I - A)` in ascending degree order; the leading
/// coefficient is 1.
pub fn char_poly(a: &DMatrix<i64>) -> Vec<BigInt> {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "characteristic polynomial needs a square matrix");
    let big: Vec<Vec<BigInt>> = (0..d)
        .map(|i| (0..d).map(|j| BigInt::from(a[(i, j)])).collect())
        .collect();
    let mut coeffs = vec![BigInt::zero(); d + 1];
    coeffs[d] = BigInt::one();
    // Faddeev-LeVerrier: M_k = A M_{k-1} + c_{d-k+1} I, c_{d-k} = -tr(A M_k)/k.
    let mut m: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); d]; d];
    for k in 1..=d {
        let mut next = mat_mul(&big, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &coeffs[d - k + 1];
        }
        m = next;
        let am = mat_mul(&big, &m);
        let trace: BigInt = (0..d).map(|i| am[i][i].clone()).sum();
        coeffs[d - k] = -exact::exact_div(&trace, &BigInt::from(k));
    }
    coeffs
}

fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let d = a.len();
    let mut out = vec![vec![BigInt::zero(); d]; d];
    for i in 0..d {
        for l in 0..d {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..d {
                out[i][j] += &a[i][l] * &b[l][j];
            }
        }
    }
    out
}

/// Evaluates an integer polynomial (ascending coefficients) at `x`.
pub fn char_poly_eval(coeffs: &[BigInt], x: &BigInt) -> BigInt {
    let mut acc = BigInt::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Divides a monic integer polynomial by `(lambda - root)`; returns the
/// quotient when the division is exact.
fn deflate(coeffs: &[BigInt], root: &BigInt) -> Option<Vec<BigInt>> {
    let d = coeffs.len() - 1;
    let mut quotient = vec![BigInt::zero(); d];
    let mut carry = BigInt::zero();
    for i in (0..d).rev() {
        carry = &coeffs[i + 1] + root * &carry;
        quotient[i] = carry.clone();
    }
    let remainder = &coeffs[0] + root * &carry;
    remainder.is_zero().then_some(quotient)
}

/// Multiplicity of `root` in the polynomial, deflating as far as possible.
fn extract_root(coeffs: &mut Vec<BigInt>, root: &BigInt) -> usize {
    let mut mult = 0;
    while coeffs.len() > 1 {
        match deflate(coeffs, root) {
            Some(q) => {
                *coeffs = q;
                mult += 1;
            }
            None => break,
        }
    }
    mult
}

/// All integer roots with multiplicities; the residual factor stays in
/// `coeffs`.
fn integer_roots(coeffs: &mut Vec<BigInt>) -> Vec<(i64, usize)> {
    let mut roots = Vec::new();
    let zero_mult = extract_root(coeffs, &BigInt::zero());
    if zero_mult > 0 {
        roots.push((0i64, zero_mult));
    }
    if coeffs.len() <= 1 {
        return roots;
    }
    if coeffs[0].abs() > BigInt::from(DIVISOR_SEARCH_BOUND) {
        return roots;
    }
    let Some(divs) = exact::divisors(&coeffs[0]) else {
        return roots;
    };
    for d in divs {
        for candidate in [d.clone(), -&d] {
            let mult = extract_root(coeffs, &candidate);
            if mult > 0 {
                roots.push((candidate.to_i64().expect("divisor fits i64"), mult));
            }
            if coeffs.len() <= 1 {
                return roots;
            }
        }
    }
    roots
}

/// Roots of the residual factor via its companion matrix.
fn numeric_roots(coeffs: &[BigInt]) -> Vec<Complex<f64>> {
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    if degree == 1 {
        // monic: lambda + c_0 = 0
        return vec![Complex::new(-coeffs[0].to_f64().unwrap_or(f64::NAN), 0.0)];
    }
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -coeffs[i].to_f64().unwrap_or(f64::NAN);
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Sorts eigenvalues descending by real part, ties by descending imaginary
/// part; the sort is stable so discovery order breaks exact ties.
fn order_eigenvalues(eigenvalues: &mut [Complex<f64>]) {
    eigenvalues.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
}

fn check_balance(a: &DMatrix<i64>, balance: i64) -> Result<(), SpectralError> {
    for row in 0..a.nrows() {
        let got: i64 = a.row(row).iter().sum();
        if got != balance {
            return Err(SpectralError::NotBalanced {
                row,
                got,
                expected: balance,
            });
        }
    }
    Ok(())
}

/// Full spectrum, principal left eigenvector, and core index of a balanced
/// integer core matrix.
pub fn spectral_analysis(a: &DMatrix<i64>, balance: i64) -> Result<SpectralData, SpectralError> {
    check_balance(a, balance)?;
    if balance == 0 {
        return Err(SpectralError::SolveFailure(
            "core index is undefined for zero balance".into(),
        ));
    }

    let mut poly = char_poly(a);
    let mut remainder = poly.clone();
    let leading_mult = extract_root(&mut remainder, &BigInt::from(balance));
    if leading_mult == 0 {
        return Err(SpectralError::SolveFailure(format!(
            "balance {balance} is not a root of the characteristic polynomial"
        )));
    }
    if leading_mult > 1 {
        return Err(SpectralError::DegenerateLeading {
            detail: format!(
                "balance {balance} has algebraic multiplicity {leading_mult}"
            ),
        });
    }

    let mut eigenvalues: Vec<Complex<f64>> = vec![Complex::new(balance as f64, 0.0)];
    poly = remainder;
    for (root, mult) in integer_roots(&mut poly) {
        for _ in 0..mult {
            eigenvalues.push(Complex::new(root as f64, 0.0));
        }
    }
    eigenvalues.extend(numeric_roots(&poly));
    debug_assert_eq!(eigenvalues.len(), a.nrows());
    order_eigenvalues(&mut eigenvalues);

    let head = eigenvalues[0];
    if (head.re - balance as f64).abs() > 1e-9 || head.im.abs() > 1e-9 {
        return Err(SpectralError::DegenerateLeading {
            detail: format!(
                "eigenvalue {head} dominates the balance {balance}; the scheme is not \
                 irreducible in the required sense"
            ),
        });
    }

    let v1_exact = principal_left_eigenvector_exact(a, balance)?;
    let v1: Vec<f64> = v1_exact.iter().map(exact::to_f64).collect();
    let core_index = eigenvalues[1].re / balance as f64;
    Ok(SpectralData {
        eigenvalues,
        v1,
        lambda1: balance as f64,
        core_index,
    })
}

/// The left eigenvector `v` with `v A = b v` and `v·1 = 1`, computed exactly
/// as the null space of `(A^T - b I)` over the rationals.
pub fn principal_left_eigenvector_exact(
    a: &DMatrix<i64>,
    balance: i64,
) -> Result<Vec<BigRational>, SpectralError> {
    let d = a.nrows();
    let mut m: Vec<Vec<BigRational>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let mut entry = exact::rat(a[(j, i)]);
                    if i == j {
                        entry -= exact::rat(balance);
                    }
                    entry
                })
                .collect()
        })
        .collect();
    let basis = null_space(&mut m);
    if basis.len() != 1 {
        return Err(SpectralError::DegenerateLeading {
            detail: format!(
                "left eigenspace of the balance has dimension {}",
                basis.len()
            ),
        });
    }
    let v = basis.into_iter().next().unwrap();
    let total: BigRational = v.iter().sum();
    if total.is_zero() {
        return Err(SpectralError::SolveFailure(
            "principal left eigenvector has zero coordinate sum".into(),
        ));
    }
    Ok(v.into_iter().map(|x| x / &total).collect())
}

/// Basis of the right null space of a rational matrix (Gauss-Jordan).
fn null_space(m: &mut [Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let rows = m.len();
    let cols = m[0].len();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][c].clone();
        for j in c..cols {
            let scaled = &m[rank][j] / &inv;
            m[rank][j] = scaled;
        }
        for i in 0..rows {
            if i == rank || m[i][c].is_zero() {
                continue;
            }
            let factor = m[i][c].clone();
            for j in c..cols {
                let updated = &m[i][j] - &factor * &m[rank][j];
                m[i][j] = updated;
            }
        }
        pivot_cols.push(c);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    let mut basis = Vec::new();
    for c in 0..cols {
        if pivot_cols.contains(&c) {
            continue;
        }
        let mut v = vec![BigRational::zero(); cols];
        v[c] = BigRational::one();
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -m[r][c].clone();
        }
        basis.push(v);
    }
    basis
}

/// Complementary spectral projector `P = I - 1 v1` (ones column times the
/// `v1` row): `P^2 = P`, `v1 P = 0`, `P 1 = 0`.
pub fn projector(v1: &[f64]) -> DMatrix<f64> {
    let d = v1.len();
    DMatrix::from_fn(d, d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - v1[j]
    })
}

/// Exact rational version of [`projector`].
pub fn projector_exact(v1: &[BigRational]) -> Vec<Vec<BigRational>> {
    let d = v1.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let delta = if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    };
                    delta - &v1[j]
                })
                .collect()
        })
        .collect()
}
