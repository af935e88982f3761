//! Exact integer and rational arithmetic helpers shared by the urn, oracle,
//! and spectral modules.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Binomial coefficient `C(n, k)` as an exact integer.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut result = BigInt::one();
    for i in 0..k {
        result *= BigInt::from(n - i);
        result /= BigInt::from(i + 1);
    }
    result
}

/// Falling factorial `(x)_m = x (x-1) ... (x-m+1)`, with `(x)_0 = 1`.
pub fn falling_factorial(x: u64, m: u64) -> BigInt {
    if m > x {
        return BigInt::zero();
    }
    let mut result = BigInt::one();
    for i in 0..m {
        result *= BigInt::from(x - i);
    }
    result
}

/// Multinomial coefficient `s! / (q_1! ... q_k!)` for the composition `parts`
/// of `s = sum(parts)`.
pub fn multinomial(parts: &[u64]) -> BigInt {
    let mut result = BigInt::one();
    let mut seen = 0u64;
    for &p in parts {
        seen += p;
        result *= binomial(seen, p);
    }
    result
}

/// Harmonic number `H_n = 1 + 1/2 + ... + 1/n` as an exact rational, `H_0 = 0`.
pub fn harmonic(n: u64) -> BigRational {
    let mut sum = BigRational::zero();
    for j in 1..=n {
        sum += BigRational::new(BigInt::one(), BigInt::from(j));
    }
    sum
}

/// The ratio `Γ(θ) Γ(n+1) / Γ(n+θ) = (θ-1)! / ((n+1)(n+2)...(n+θ-1))`,
/// exact for integer `θ ≥ 1`.
pub fn gamma_ratio(theta: u64, n: u64) -> BigRational {
    assert!(theta >= 1, "gamma_ratio requires theta >= 1");
    let mut num = BigInt::one();
    for j in 1..theta {
        num *= BigInt::from(j);
    }
    let mut den = BigInt::one();
    for j in 1..theta {
        den *= BigInt::from(n + j);
    }
    BigRational::new(num, den)
}

/// Shorthand for an integer-valued rational.
pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Shorthand for the rational `n / d`.
pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Round a rational to the nearest `f64`.
pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("rational does not fit in f64 range")
}

/// Render a rational as `"num/den"` (or `"num"` when the denominator is 1).
pub fn format_ratio(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact quotient `a / b`, panicking when the division leaves a remainder.
pub fn exact_div(a: &BigInt, b: &BigInt) -> BigInt {
    assert!(!b.is_zero(), "exact_div by zero");
    let (q, r) = num_integer_div_rem(a, b);
    assert!(r.is_zero(), "exact_div: {a} is not divisible by {b}");
    q
}

fn num_integer_div_rem(a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
    let q = a / b;
    let r = a - &q * b;
    (q, r)
}

/// All positive divisors of `n` (n > 0), in ascending order.
pub fn divisors(n: &BigInt) -> Option<Vec<BigInt>> {
    let n = n.abs();
    // Trial division only pays off for moderate magnitudes; callers fall back
    // to numeric root finding above this bound.
    let small = n.to_u64()?;
    let mut divs = Vec::new();
    let mut d = 1u64;
    while d.saturating_mul(d) <= small {
        if small % d == 0 {
            divs.push(d);
            if d != small / d {
                divs.push(small / d);
            }
        }
        d += 1;
    }
    divs.sort_unstable();
    Some(divs.into_iter().map(BigInt::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_basics() {
        assert_eq!(binomial(4, 2), BigInt::from(6));
        assert_eq!(binomial(10, 0), BigInt::one());
        assert_eq!(binomial(3, 5), BigInt::zero());
        assert_eq!(binomial(52, 5), BigInt::from(2_598_960u64));
    }

    #[test]
    fn falling_factorial_basics() {
        assert_eq!(falling_factorial(5, 2), BigInt::from(20));
        assert_eq!(falling_factorial(5, 0), BigInt::one());
        assert_eq!(falling_factorial(2, 3), BigInt::zero());
    }

    #[test]
    fn multinomial_matches_factorial_ratio() {
        // 4! / (2! 1! 1!) = 12
        assert_eq!(multinomial(&[2, 1, 1]), BigInt::from(12));
        assert_eq!(multinomial(&[0, 3]), BigInt::one());
    }

    #[test]
    fn harmonic_small_values() {
        assert_eq!(harmonic(0), BigRational::zero());
        assert_eq!(harmonic(1), rat(1));
        assert_eq!(harmonic(3), frac(11, 6));
    }

    #[test]
    fn gamma_ratio_small_values() {
        // Γ(3)Γ(2)/Γ(4) = 2·1/6 = 1/3
        assert_eq!(gamma_ratio(3, 1), frac(1, 3));
        // Γ(2)Γ(4)/Γ(5) = 1·6/24 = 1/4
        assert_eq!(gamma_ratio(2, 3), frac(1, 4));
        // n = 0 collapses to 1 for every θ
        for theta in 1..7 {
            assert_eq!(gamma_ratio(theta, 0), rat(1));
        }
    }

    #[test]
    fn divisors_of_12() {
        let d = divisors(&BigInt::from(12)).unwrap();
        let expect: Vec<BigInt> = [1, 2, 3, 4, 6, 12].iter().map(|&x| BigInt::from(x)).collect();
        assert_eq!(d, expect);
    }

    #[test]
    fn format_ratio_styles() {
        assert_eq!(format_ratio(&frac(7, 3)), "7/3");
        assert_eq!(format_ratio(&rat(4)), "4");
    }
}
