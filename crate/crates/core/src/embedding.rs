//! Embedding of canonical moment sequences into the product beta manifold.
//!
//! The k-th canonical moment pₖ selects the line Δₚ of beta distributions
//! with mean pₖ; the sequence is sent to the Fisher projections of the base
//! points B(n − k + 1, n − k + 1) onto those lines. Distances and centroids
//! of moment sequences are then taken in Bⁿ.

use rayon::prelude::*;

use crate::canonical::{from_canonical, to_canonical, CanonicalSequence, MomentSequence};
use crate::error::{Error, Result};
use crate::frechet::{product_frechet_mean, ProductPoint};
use crate::geodesy::{distance, log_map_with_guess};
use crate::metric::{metric_tensor, BetaPoint};

/// Orthogonality tolerance used by [`phi_map`] and the functions built on it.
pub const PROJECTION_TOL: f64 = 1e-10;
const MAX_BRACKET_STEPS: usize = 60;
const MAX_ROOT_ITERS: usize = 200;

/// Δₚ = {(α, β) : β = (1/p − 1) α}, the beta distributions with mean p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanLine {
    p: f64,
}

impl MeanLine {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 && p < 1.0 {
            Ok(MeanLine { p })
        } else {
            Err(Error::domain("MeanLine", format!("mean must lie in (0, 1), got {p}")))
        }
    }

    pub fn mean(&self) -> f64 {
        self.p
    }

    /// β/α along the line.
    pub fn slope(&self) -> f64 {
        (1.0 - self.p) / self.p
    }

    /// Point with α = eˢ.
    pub fn point(&self, s: f64) -> Result<BetaPoint> {
        let a = s.exp();
        BetaPoint::new(a, self.slope() * a)
    }

    pub fn contains(&self, b: &BetaPoint) -> bool {
        (b.beta() - self.slope() * b.alpha()).abs() <= 4.0 * f64::EPSILON * b.beta()
    }
}

/// Outcome of a projection onto a mean line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: BetaPoint,
    /// ln α of the projected point.
    pub s: f64,
    /// Fisher inner product of the unit line tangent with log_point(b).
    pub residual: f64,
}

/// g_x(log_x(b), t) with t the unit Fisher tangent of the line at x. Its
/// sign tells which way along the line the distance to b decreases.
fn orthogonality(x: &BetaPoint, b: &BetaPoint, line: &MeanLine, guess: Option<[f64; 2]>) -> Result<(f64, [f64; 2])> {
    let v = log_map_with_guess(x, b, guess)?.components();
    let g = metric_tensor(x);
    let t = [x.alpha(), line.slope() * x.alpha()];
    Ok((g.inner(v, t) / g.norm(t), v))
}

/// Fisher inner product between the unit tangent of `line` at `x` and the
/// initial velocity of the geodesic from x to b.
pub fn orthogonality_residual(x: &BetaPoint, b: &BetaPoint, line: &MeanLine) -> Result<f64> {
    orthogonality(x, b, line, None).map(|r| r.0)
}

/// Closest point to `b` on `line` in the Fisher distance.
pub fn project_to_line(b: &BetaPoint, line: &MeanLine, tol: f64) -> Result<BetaPoint> {
    project_to_line_from(b, line, tol, None).map(|r| r.point)
}

/// [`project_to_line`] from a chosen starting value of s = ln α; by default
/// the point of the line with the same α + β as `b`.
pub fn project_to_line_from(b: &BetaPoint, line: &MeanLine, tol: f64, start: Option<f64>) -> Result<Projection> {
    if !(1e-10..=1e-4).contains(&tol) {
        return Err(Error::domain("project_to_line", format!("tol must lie in [1e-10, 1e-4], got {tol}")));
    }
    if line.contains(b) {
        return Ok(Projection { point: *b, s: b.alpha().ln(), residual: 0.0 });
    }
    let mut guess = None;
    let mut eval = |s: f64| -> Result<f64> {
        let x = line.point(s)?;
        let (f, v) = orthogonality(&x, b, line, guess)?;
        guess = Some(v);
        Ok(f)
    };

    let s0 = start.unwrap_or_else(|| (line.mean() * (b.alpha() + b.beta())).ln());
    let f0 = eval(s0)?;
    if f0 == 0.0 {
        return Ok(Projection { point: line.point(s0)?, s: s0, residual: 0.0 });
    }
    // f decreases through zero at the minimiser: step the way f points.
    let dir = f0.signum();
    let mut step = 0.25;
    let (mut lo, mut flo) = (s0, f0);
    let mut hi = s0;
    let mut fhi = f0;
    for _ in 0..MAX_BRACKET_STEPS {
        hi = lo + dir * step;
        fhi = eval(hi)?;
        if fhi.signum() != dir {
            break;
        }
        lo = hi;
        flo = fhi;
        step *= 2.0;
    }
    if fhi.signum() == dir {
        return Err(Error::no_convergence("project_to_line", "could not bracket the closest point"));
    }

    // Illinois regula falsi on [lo, hi].
    let (mut a, mut fa, mut c, mut fc) = (lo, flo, hi, fhi);
    let mut side = 0;
    let mut best = if fa.abs() < fc.abs() { (a, fa) } else { (c, fc) };
    for _ in 0..MAX_ROOT_ITERS {
        if best.1.abs() <= 0.1 * tol || (c - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        let mut s = (a * fc - c * fa) / (fc - fa);
        if !s.is_finite() || s <= a.min(c) || s >= a.max(c) {
            s = 0.5 * (a + c);
        }
        let fs = eval(s)?;
        if fs.abs() < best.1.abs() {
            best = (s, fs);
        }
        if fs.signum() == fa.signum() {
            a = s;
            fa = fs;
            if side == -1 {
                fc *= 0.5;
            }
            side = -1;
        } else {
            c = s;
            fc = fs;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let (s, residual) = best;
    if residual.abs() > tol {
        return Err(Error::no_convergence(
            "project_to_line",
            format!("orthogonality residual {residual:e} above {tol:e}"),
        ));
    }
    Ok(Projection { point: line.point(s)?, s, residual })
}

/// Φ(p): component k is the projection of B(n − k + 1, n − k + 1) onto the
/// line of mean pₖ.
pub fn phi_map(p: &CanonicalSequence) -> Result<ProductPoint> {
    let n = p.len();
    let components = p
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &pk)| {
            let m = (n - i) as f64;
            project_to_line(&BetaPoint::new(m, m)?, &MeanLine::new(pk)?, PROJECTION_TOL)
        })
        .collect::<Result<Vec<_>>>()?;
    ProductPoint::new(components)
}

/// Product Fisher distance √(Σₖ d(Xₖ, Yₖ)²).
pub fn product_distance(x: &ProductPoint, y: &ProductPoint) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain("product_distance", format!("lengths {} and {} differ", x.len(), y.len())));
    }
    let squares = x
        .components()
        .par_iter()
        .zip(y.components())
        .map(|(a, b)| distance(a, b).map(|d| d * d))
        .collect::<Result<Vec<_>>>()?;
    Ok(squares.iter().sum::<f64>().sqrt())
}

/// ρₙ(c, c′) = d(Φ(p), Φ(p′)) with p, p′ the canonical moments of c, c′.
pub fn rho_distance(c1: &MomentSequence, c2: &MomentSequence) -> Result<f64> {
    if c1.len() != c2.len() {
        return Err(Error::domain("rho_distance", format!("lengths {} and {} differ", c1.len(), c2.len())));
    }
    if c1 == c2 {
        return Ok(0.0);
    }
    let x = phi_map(&to_canonical(c1)?)?;
    let y = phi_map(&to_canonical(c2)?)?;
    product_distance(&x, &y)
}

/// Centroid of moment sequences: the Fréchet mean of the Φ images in Bⁿ,
/// read back through the mean of each component.
pub fn moment_centroid(cs: &[MomentSequence], tol: f64) -> Result<MomentSequence> {
    let first = cs.first().ok_or_else(|| Error::domain("moment_centroid", "no sequences"))?;
    if let Some(bad) = cs.iter().find(|c| c.len() != first.len()) {
        return Err(Error::domain(
            "moment_centroid",
            format!("lengths {} and {} differ", first.len(), bad.len()),
        ));
    }
    let images = cs
        .par_iter()
        .map(|c| to_canonical(c).and_then(|p| phi_map(&p)))
        .collect::<Result<Vec<_>>>()?;
    let mean = product_frechet_mean(&images, tol)?;
    let p: Vec<f64> = mean.components().iter().map(BetaPoint::mean).collect();
    from_canonical(&CanonicalSequence::new(p)?)
}
