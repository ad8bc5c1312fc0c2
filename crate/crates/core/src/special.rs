//! Polygamma functions of order 0 through 3 on the positive half-line.
//!
//! Arguments below [`SHIFT_THRESHOLD`] are moved upward with the recurrence
//! ψ⁽ᵐ⁾(x) = ψ⁽ᵐ⁾(x + 1) − (−1)ᵐ m! / x^(m+1), and the value at the shifted
//! argument comes from the Bernoulli asymptotic expansion truncated after
//! ten terms. At the threshold the first omitted term is below 1e-17 relative
//! for every supported order, so the accuracy does not depend on the input.

use crate::error::{Error, Result};

/// Arguments are shifted up to at least this value before the asymptotic
/// expansion is applied.
pub const SHIFT_THRESHOLD: f64 = 10.0;

/// B₂, B₄, …, B₂₀.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Coefficients of x^(-2k) in the bracketed asymptotic series of ψ⁽ᵐ⁾:
/// B₂ₖ (2k+m−1)! / (2k)! for m ≥ 1, and −B₂ₖ / (2k) for m = 0.
const fn series_coefficients(order: usize) -> [f64; 10] {
    let mut out = [0.0; 10];
    let mut k = 0;
    while k < 10 {
        let two_k = 2 * (k + 1);
        if order == 0 {
            out[k] = -BERNOULLI_EVEN[k] / two_k as f64;
        } else {
            let mut c = BERNOULLI_EVEN[k];
            let mut j = 1;
            while j < order {
                c *= (two_k + j) as f64;
                j += 1;
            }
            out[k] = c;
        }
        k += 1;
    }
    out
}

const COEFFS: [[f64; 10]; 4] = [
    series_coefficients(0),
    series_coefficients(1),
    series_coefficients(2),
    series_coefficients(3),
];

/// Order of a polygamma function: ψ, ψ′, ψ″ or ψ‴.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolyGammaOrder {
    Digamma = 0,
    Trigamma = 1,
    Tetragamma = 2,
    Pentagamma = 3,
}

impl PolyGammaOrder {
    pub fn as_usize(self) -> usize {
        self as usize
    }
}

impl TryFrom<u32> for PolyGammaOrder {
    type Error = Error;

    fn try_from(order: u32) -> Result<Self> {
        match order {
            0 => Ok(Self::Digamma),
            1 => Ok(Self::Trigamma),
            2 => Ok(Self::Tetragamma),
            3 => Ok(Self::Pentagamma),
            _ => Err(Error::domain("polygamma", format!("unsupported order {order}"))),
        }
    }
}

/// ψ⁽ᵐ⁾(x) for m ∈ {0, 1, 2, 3} and finite x > 0.
pub fn polygamma(order: PolyGammaOrder, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(polygamma_unchecked(order.as_usize(), x))
}

pub fn digamma(x: f64) -> Result<f64> {
    polygamma(PolyGammaOrder::Digamma, x)
}

pub fn trigamma(x: f64) -> Result<f64> {
    polygamma(PolyGammaOrder::Trigamma, x)
}

fn check_argument(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("polygamma", format!("argument must be finite and positive, got {x}")))
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|j| j as f64).product()
}

/// Asymptotic expansion at x ≥ SHIFT_THRESHOLD.
fn asymptotic(order: usize, x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = COEFFS[order].iter().rev().fold(0.0, |acc, &c| acc * inv2 + c) * inv2;
    if order == 0 {
        x.ln() - 0.5 * inv + series
    } else {
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        let lead = factorial(order - 1) + 0.5 * factorial(order) * inv;
        sign * inv.powi(order as i32) * (lead + series)
    }
}

pub(crate) fn polygamma_unchecked(order: usize, x: f64) -> f64 {
    if x >= SHIFT_THRESHOLD {
        return asymptotic(order, x);
    }
    let shifts = (SHIFT_THRESHOLD - x).ceil() as usize;
    let mut acc = asymptotic(order, x + shifts as f64);
    // Smallest terms first.
    let mut sum = 0.0;
    for j in (0..shifts).rev() {
        sum += (x + j as f64).powi(-(order as i32 + 1));
    }
    if order == 0 {
        acc -= sum;
    } else {
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * factorial(order) * sum;
    }
    acc
}

/// ψ′, ψ″ and ψ‴ at one argument, sharing the recurrence shifts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygammaSet {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl PolygammaSet {
    /// Caller guarantees `x` is finite and positive.
    pub(crate) fn at(x: f64) -> Self {
        if x >= SHIFT_THRESHOLD {
            return PolygammaSet {
                d1: asymptotic(1, x),
                d2: asymptotic(2, x),
                d3: asymptotic(3, x),
            };
        }
        let shifts = (SHIFT_THRESHOLD - x).ceil() as usize;
        let xs = x + shifts as f64;
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for j in (0..shifts).rev() {
            let r = 1.0 / (x + j as f64);
            let r2 = r * r;
            s2 += r2;
            s3 += r2 * r;
            s4 += r2 * r2;
        }
        PolygammaSet {
            d1: asymptotic(1, xs) + s2,
            d2: asymptotic(2, xs) - 2.0 * s3,
            d3: asymptotic(3, xs) + 6.0 * s4,
        }
    }

    pub fn try_at(x: f64) -> Result<Self> {
        check_argument(x)?;
        Ok(Self::at(x))
    }
}
