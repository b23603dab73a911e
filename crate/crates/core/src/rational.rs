//! Exact rational weights.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Weight = BigRational;

pub fn from_ratio(num: i64, den: i64) -> Weight {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn one() -> Weight {
    Weight::one()
}

/// Parses `n`, `n/d`, or a finite decimal such as `0.25`.
pub fn parse(text: &str) -> Result<Weight, String> {
    let text = text.trim();
    let bad = || format!("invalid rational '{text}'");
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(format!("zero denominator in '{text}'"));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: BigInt = if int.is_empty() {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_num: BigInt = frac.parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(BigRational::from_integer(int) + BigRational::new(frac_num, den));
    }
    let n: BigInt = text.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// `num/den`, or just `num` when the denominator is one.
pub fn format(w: &Weight) -> String {
    if w.denom().is_one() {
        w.numer().to_string()
    } else {
        format!("{}/{}", w.numer(), w.denom())
    }
}

pub fn is_probability(w: &Weight) -> bool {
    !w.is_negative() && *w <= Weight::one()
}
