//! Regular and canonical moments of probability measures on [0, 1].
//!
//! The moment space Mₙ is the set of (c₁, …, cₙ) realised by some measure.
//! Given an interior prefix, cₙ ranges over an interval (cₙ⁻, cₙ⁺) whose ends
//! are the roots of the Hankel determinants H̲ₙ and H̄ₙ, both affine in cₙ.
//! The canonical moment pₙ is the relative position of cₙ in that interval.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Longest sequence accepted; Hankel matrices of higher order are too
/// ill-conditioned for double precision.
pub const MAX_MOMENTS: usize = 12;

/// Interval widths cₙ⁺ − cₙ⁻, and distances of cₙ to either end, at or
/// below this are treated as the boundary of the moment space.
pub const EPS_HANKEL: f64 = 1e-12;

/// Regular moments (c₁, …, cₙ) of a measure on [0, 1], with c₀ = 1 implied.
/// Always strictly interior to Mₙ.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    values: Vec<f64>,
}

/// Canonical moments (p₁, …, pₙ), each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSequence {
    values: Vec<f64>,
}

/// Lower and upper Hankel determinants of one order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelPair {
    pub lower: f64,
    pub upper: f64,
    pub order: usize,
}

fn check_length(op: &'static str, n: usize) -> Result<()> {
    if n == 0 || n > MAX_MOMENTS {
        Err(Error::domain(op, format!("length must be between 1 and {MAX_MOMENTS}, got {n}")))
    } else {
        Ok(())
    }
}

impl MomentSequence {
    /// Validates that the values lie strictly inside the moment space.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_length("MomentSequence", values.len())?;
        if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x > 0.0 && **x < 1.0)) {
            return Err(Error::domain("MomentSequence", format!("moments must lie in (0, 1), got {x}")));
        }
        canonical_of(&values)?;
        Ok(MomentSequence { values })
    }

    /// Moments of a measure on [a, b] given as raw moments E[Xᵏ], k = 1..n,
    /// mapped to [0, 1] by x ↦ (x − a)/(b − a).
    pub fn from_interval_moments(raw: &[f64], a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        let full: Vec<f64> = std::iter::once(1.0).chain(raw.iter().copied()).collect();
        let w = b - a;
        let values = (1..full.len())
            .map(|k| {
                let mut binom = 1.0;
                let mut acc = 0.0;
                for j in 0..=k {
                    acc += binom * full[j] * (-a).powi((k - j) as i32);
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                acc / w.powi(k as i32)
            })
            .collect();
        MomentSequence::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl CanonicalSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_length("CanonicalSequence", values.len())?;
        if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x > 0.0 && **x < 1.0)) {
            return Err(Error::domain("CanonicalSequence", format!("canonical moments must lie in (0, 1), got {x}")));
        }
        Ok(CanonicalSequence { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::domain("interval", format!("need finite a < b, got [{a}, {b}]")))
    }
}

type Rational = BigRational;

/// Every finite double is a dyadic rational, so this is exact.
fn exact(x: f64) -> Rational {
    BigRational::from_float(x).expect("moments are finite")
}

fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact determinant by fraction-based elimination; `a` is m×m row-major.
fn determinant(mut a: Vec<Rational>, m: usize) -> Rational {
    let mut det = Rational::one();
    for col in 0..m {
        let Some(pivot) = (col..m).find(|&i| !a[i * m + col].is_zero()) else {
            return Rational::zero();
        };
        if pivot != col {
            for j in 0..m {
                a.swap(col * m + j, pivot * m + j);
            }
            det = -det;
        }
        let d = a[col * m + col].clone();
        for i in col + 1..m {
            let f = &a[i * m + col] / &d;
            if f.is_zero() {
                continue;
            }
            for j in col + 1..m {
                let t = &f * &a[col * m + j];
                a[i * m + j] -= t;
            }
        }
        det *= d;
    }
    det
}

fn hankel_det(m: usize, entry: impl Fn(usize) -> Rational) -> Rational {
    let a = (0..m * m).map(|idx| entry(idx / m + idx % m)).collect();
    determinant(a, m)
}

/// (H̲ₙ, H̄ₙ) for n ≥ −1 (encoded as `n + 1`), where `c` starts with c₀ = 1
/// and holds at least n + 1 entries.
fn hankel_exact(c: &[Rational], shifted: usize) -> (Rational, Rational) {
    if shifted == 0 {
        return (Rational::one(), Rational::one());
    }
    let n = shifted - 1;
    let m = n / 2;
    if n % 2 == 0 {
        let lower = hankel_det(m + 1, |i| c[i].clone());
        let upper = hankel_det(m, |i| &c[i + 1] - &c[i + 2]);
        (lower, upper)
    } else {
        let lower = hankel_det(m + 1, |i| c[i + 1].clone());
        let upper = hankel_det(m + 1, |i| &c[i] - &c[i + 1]);
        (lower, upper)
    }
}

fn exact_with_c0(values: &[f64]) -> Vec<Rational> {
    std::iter::once(Rational::one()).chain(values.iter().map(|&x| exact(x))).collect()
}

/// Hankel determinants of order `k` ≤ n of the sequence, evaluated exactly
/// and rounded once.
pub fn hankel(c: &MomentSequence, k: usize) -> Result<HankelPair> {
    if k > c.len() {
        return Err(Error::Index { index: k, len: c.len() });
    }
    let (lower, upper) = hankel_exact(&exact_with_c0(&c.values), k + 1);
    Ok(HankelPair { lower: to_f64(&lower), upper: to_f64(&upper), order: k })
}

/// Ends of the admissible interval for cₙ given c₀..cₙ₋₁ in `full`.
/// H̲ₙ(cₙ) = H̲ₙ(0) + cₙ H̲ₙ₋₂ and H̄ₙ(cₙ) = H̄ₙ(0) − cₙ H̄ₙ₋₂.
fn bounds_exact(full: &[Rational]) -> (Rational, Rational) {
    let n = full.len();
    let mut probe = full.to_vec();
    probe.push(Rational::zero());
    let (lo0, up0) = hankel_exact(&probe, n + 1);
    let (lo2, up2) = hankel_exact(&probe, n - 1);
    (-lo0 / lo2, up0 / up2)
}

/// Admissible interval (cₙ⁻, cₙ⁺) for the next moment after an interior
/// prefix of length n − 1 (possibly empty).
pub fn moment_bounds(prefix: &[f64]) -> Result<(f64, f64)> {
    if prefix.len() >= MAX_MOMENTS {
        return Err(Error::domain("moment_bounds", format!("prefix longer than {}", MAX_MOMENTS - 1)));
    }
    if !prefix.is_empty() {
        MomentSequence::new(prefix.to_vec())?;
    }
    let (lo, hi) = bounds_exact(&exact_with_c0(prefix));
    Ok((to_f64(&lo), to_f64(&hi)))
}

fn canonical_of(values: &[f64]) -> Result<Vec<f64>> {
    let mut full = vec![Rational::one()];
    let mut p = Vec::with_capacity(values.len());
    for (k, &c) in values.iter().enumerate() {
        let (lo, hi) = bounds_exact(&full);
        let gap = &hi - &lo;
        if !(to_f64(&gap) > EPS_HANKEL) {
            return Err(Error::boundary(format!("interval for c_{} has width {:e}", k + 1, to_f64(&gap))));
        }
        let cq = exact(c);
        let (below, above) = (to_f64(&(&cq - &lo)), to_f64(&(&hi - &cq)));
        if !(below > EPS_HANKEL && above > EPS_HANKEL) {
            return Err(Error::boundary(format!(
                "c_{} = {c} outside its admissible interval ({}, {})",
                k + 1,
                to_f64(&lo),
                to_f64(&hi)
            )));
        }
        p.push(to_f64(&((&cq - &lo) / &gap)));
        full.push(cq);
    }
    Ok(p)
}

/// Canonical moments pₖ = (cₖ − cₖ⁻)/(cₖ⁺ − cₖ⁻).
pub fn to_canonical(c: &MomentSequence) -> Result<CanonicalSequence> {
    Ok(CanonicalSequence { values: canonical_of(&c.values)? })
}

/// Rebuild the regular moments one index at a time: cₖ = cₖ⁻ + pₖ(cₖ⁺ − cₖ⁻).
pub fn from_canonical(p: &CanonicalSequence) -> Result<MomentSequence> {
    let mut full = vec![Rational::one()];
    let mut values = Vec::with_capacity(p.len());
    for (k, &pk) in p.values.iter().enumerate() {
        let (lo, hi) = bounds_exact(&full);
        let gap = &hi - &lo;
        if !(to_f64(&gap) > EPS_HANKEL) {
            return Err(Error::boundary(format!(
                "interval for c_{} collapsed to width {:e}; canonical moments too close to 0 or 1",
                k + 1,
                to_f64(&gap)
            )));
        }
        let c = to_f64(&(&lo + exact(pk) * &gap));
        let cq = exact(c);
        if !(to_f64(&(&cq - &lo)) > EPS_HANKEL && to_f64(&(&hi - &cq)) > EPS_HANKEL) {
            return Err(Error::boundary(format!(
                "c_{} lands within {EPS_HANKEL:e} of the boundary; canonical moments too close to 0 or 1",
                k + 1
            )));
        }
        values.push(c);
        full.push(cq);
    }
    Ok(MomentSequence { values })
}

/// Π_{k=1}^{n−1} (pₖ qₖ)^{n−k}, the Jacobian determinant of p ↦ c.
pub fn jacobian_det_formula(p: &CanonicalSequence) -> f64 {
    let n = p.len();
    p.values[..n - 1]
        .iter()
        .enumerate()
        .map(|(i, &pk)| (pk * (1.0 - pk)).powi((n - 1 - i) as i32))
        .product()
}

/// Empirical moments of samples on [a, b] after mapping to [0, 1].
pub fn moments_from_samples(samples: &[f64], a: f64, b: f64, n: usize) -> Result<MomentSequence> {
    check_interval(a, b)?;
    check_length("moments_from_samples", n)?;
    if samples.is_empty() {
        return Err(Error::domain("moments_from_samples", "no samples"));
    }
    if let Some(x) = samples.iter().find(|x| !(**x >= a && **x <= b)) {
        return Err(Error::domain("moments_from_samples", format!("sample {x} outside [{a}, {b}]")));
    }
    let mut sums = vec![0.0; n];
    for &x in samples {
        let u = (x - a) / (b - a);
        let mut pw = 1.0;
        for s in sums.iter_mut() {
            pw *= u;
            *s += pw;
        }
    }
    let count = samples.len() as f64;
    let values: Vec<f64> = sums.into_iter().map(|s| s / count).collect();
    if let Some(x) = values.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(Error::boundary(format!("empirical moment {x} is not inside (0, 1)")));
    }
    canonical_of(&values)?;
    Ok(MomentSequence { values })
}
