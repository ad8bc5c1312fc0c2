//! Fisher-Rao metric of the beta family and the quantities derived from it.
//!
//! The metric is the Hessian of the log-partition
//! φ(α, β) = ln Γ(α) + ln Γ(β) − ln Γ(α + β), so every geometric quantity
//! reduces to trigamma and its derivatives at α, β and α + β.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gk15, GaussLegendre};
use crate::special::PolygammaSet;

/// A beta distribution B(α, β), i.e. a point of the open quadrant (0, ∞)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPoint {
    alpha: f64,
    beta: f64,
}

impl BetaPoint {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
            Ok(BetaPoint { alpha, beta })
        } else {
            Err(Error::domain(
                "BetaPoint",
                format!("shape parameters must be finite and positive, got ({alpha}, {beta})"),
            ))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The reflected distribution B(β, α).
    pub fn swapped(&self) -> Self {
        BetaPoint { alpha: self.beta, beta: self.alpha }
    }

    /// Mean α / (α + β) of the distribution.
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Polygamma values needed at α, β and α + β.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Trigammas {
    pub a: PolygammaSet,
    pub b: PolygammaSet,
    pub s: PolygammaSet,
}

impl Trigammas {
    pub(crate) fn at(p: &BetaPoint) -> Self {
        Trigammas {
            a: PolygammaSet::at(p.alpha),
            b: PolygammaSet::at(p.beta),
            s: PolygammaSet::at(p.alpha + p.beta),
        }
    }

    fn det(&self) -> f64 {
        self.a.d1 * self.b.d1 - self.s.d1 * (self.a.d1 + self.b.d1)
    }
}

/// The symmetric 2×2 matrix of the Fisher metric at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTensor {
    pub g_aa: f64,
    pub g_ab: f64,
    pub g_bb: f64,
}

impl MetricTensor {
    pub fn det(&self) -> f64 {
        self.g_aa * self.g_bb - self.g_ab * self.g_ab
    }

    /// g(u, v) for components (u_α, u_β) and (v_α, v_β).
    pub fn inner(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        self.g_aa * u[0] * v[0] + self.g_ab * (u[0] * v[1] + u[1] * v[0]) + self.g_bb * u[1] * v[1]
    }

    pub fn norm(&self, v: [f64; 2]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Inverse matrix as (g^αα, g^αβ, g^ββ).
    pub fn inverse(&self) -> [f64; 3] {
        let d = self.det();
        [self.g_bb / d, -self.g_ab / d, self.g_aa / d]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g_aa > 0.0 && self.g_bb > 0.0 && self.det() > 0.0
    }
}

pub fn metric_tensor(p: &BetaPoint) -> MetricTensor {
    let a = PolygammaSet::at(p.alpha).d1;
    let b = PolygammaSet::at(p.beta).d1;
    let s = PolygammaSet::at(p.alpha + p.beta).d1;
    MetricTensor { g_aa: a - s, g_ab: -s, g_bb: b - s }
}

/// Determinant ψ′(α)ψ′(β) − ψ′(α+β)(ψ′(α) + ψ′(β)) of the metric.
pub fn det_metric(p: &BetaPoint) -> f64 {
    Trigammas::at(p).det()
}

/// Closed-form lower bound (1 + α + β) / (2αβ(α + β)²) on the determinant,
/// which is also its asymptotic value.
pub fn det_metric_lower_bound(p: &BetaPoint) -> f64 {
    let s = p.alpha + p.beta;
    (1.0 + s) / (2.0 * p.alpha * p.beta * s * s)
}

/// u / (1 − e^{−u}), continuous at u = 0.
fn bernoulli_kernel(u: f64) -> f64 {
    if u < 1e-4 {
        1.0 + u * (0.5 + u / 12.0)
    } else {
        -u / (-u).exp_m1()
    }
}

/// Integrand of the Laplace-convolution representation of the determinant,
/// with the exponentials of the bracket folded into e^{−(α+β)t}.
fn det_integrand(alpha: f64, beta: f64, t: f64, x: f64) -> f64 {
    let y = 1.0 - x;
    let kernel = t * bernoulli_kernel(t * x) * bernoulli_kernel(t * y);
    let bracket = (-t * (alpha * x + beta * y)).exp()
        - (-t * (alpha + beta * y)).exp()
        - (-t * (alpha * x + beta)).exp();
    kernel * bracket
}

/// ∫_T^∞ (1 + t)³ e^{−mt} dt, which dominates the tail of the outer integral.
fn tail_bound(m: f64, t: f64) -> f64 {
    let u = 1.0 + t;
    let poly = u.powi(3) / m + 3.0 * u * u / (m * m) + 6.0 * u / m.powi(3) + 6.0 / m.powi(4);
    3.0 * poly * (-m * t).exp()
}

const INNER_ORDER: usize = 16;
const INNER_MAX_PANELS: usize = 1 << 12;
const OUTER_MAX_SEGMENTS: usize = 4000;

/// Numerical evaluation of the double-integral representation of the
/// metric determinant, to `rel_tol` relative accuracy.
///
/// The outer integral over t ∈ (0, ∞) is truncated where the exponential
/// envelope of the integrand falls below the budget and integrated with
/// adaptive Gauss–Kronrod; the inner integral over x ∈ (0, 1) uses a
/// composite Gauss–Legendre rule whose panel count doubles until two
/// successive values agree.
pub fn det_metric_quadrature(p: &BetaPoint, rel_tol: f64) -> Result<f64> {
    if !(1e-10..=1e-2).contains(&rel_tol) {
        return Err(Error::domain(
            "det_metric_quadrature",
            format!("rel_tol must lie in [1e-10, 1e-2], got {rel_tol}"),
        ));
    }
    let (alpha, beta) = (p.alpha, p.beta);
    // The determinant exceeds its closed-form lower bound, which gives an
    // absolute error budget without evaluating the determinant itself.
    let budget = 0.25 * rel_tol * det_metric_lower_bound(p);
    let decay = alpha.min(beta);

    let mut horizon = 1.0 / decay;
    while tail_bound(decay, horizon) > 0.25 * budget {
        horizon *= 1.25;
        if !horizon.is_finite() {
            return Err(Error::no_convergence("det_metric_quadrature", "no finite truncation point"));
        }
    }

    let rule = GaussLegendre::new(INNER_ORDER);
    let inner_tol = 0.25 * budget / horizon;
    let mut inner_failure = None;
    let inner = |t: f64| -> f64 {
        let f = |x: f64| det_integrand(alpha, beta, t, x);
        let mut panels = 1;
        let mut prev = rule.integrate(0.0, 1.0, panels, f);
        loop {
            panels *= 2;
            let next = rule.integrate(0.0, 1.0, panels, f);
            if (next - prev).abs() <= inner_tol {
                return next;
            }
            if panels >= INNER_MAX_PANELS {
                inner_failure.get_or_insert(t);
                return next;
            }
            prev = next;
        }
    };
    let est = adaptive_gk15(inner, 0.0, horizon, 0.5 * budget, OUTER_MAX_SEGMENTS);
    if let Some(t) = inner_failure {
        return Err(Error::no_convergence(
            "det_metric_quadrature",
            format!("inner integral at t = {t} did not settle at ({alpha}, {beta})"),
        ));
    }
    if !est.converged {
        return Err(Error::no_convergence(
            "det_metric_quadrature",
            format!("outer error estimate {:e} above budget {budget:e} at ({alpha}, {beta})", est.error),
        ));
    }
    Ok(est.value)
}

/// Coefficients of the two geodesic equations
///
/// α̈ + a(α,β) α̇² + b(α,β) α̇β̇ + c(α,β) β̇² = 0,
/// β̈ + a(β,α) β̇² + b(β,α) α̇β̇ + c(β,α) α̇² = 0,
///
/// all sharing the denominator `d`, the metric determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChristoffelCoeffs {
    pub a_ab: f64,
    pub b_ab: f64,
    pub c_ab: f64,
    pub a_ba: f64,
    pub b_ba: f64,
    pub c_ba: f64,
    pub d: f64,
}

/// (a, b, c) evaluated with x playing the role of the first argument.
fn abc(x: &PolygammaSet, y: &PolygammaSet, s: &PolygammaSet, d: f64) -> (f64, f64, f64) {
    let half = 0.5 / d;
    let a = half * (x.d2 * y.d1 - x.d2 * s.d1 - y.d1 * s.d2);
    let b = -y.d1 * s.d2 / d;
    let c = half * (y.d2 * s.d1 - y.d1 * s.d2);
    (a, b, c)
}

pub fn christoffel(p: &BetaPoint) -> ChristoffelCoeffs {
    christoffel_from(&Trigammas::at(p))
}

pub(crate) fn christoffel_from(t: &Trigammas) -> ChristoffelCoeffs {
    let d = t.det();
    let (a_ab, b_ab, c_ab) = abc(&t.a, &t.b, &t.s, d);
    let (a_ba, b_ba, c_ba) = abc(&t.b, &t.a, &t.s, d);
    ChristoffelCoeffs { a_ab, b_ab, c_ab, a_ba, b_ba, c_ba, d }
}

/// Sectional (Gaussian) curvature in the factorized form
/// ψ″(α)ψ″(β)ψ″(α+β) / (4 d²) · (ψ′/ψ″(α) + ψ′/ψ″(β) − ψ′/ψ″(α+β)).
pub fn sectional_curvature(p: &BetaPoint) -> f64 {
    let t = Trigammas::at(p);
    let d = t.det();
    let ratio = |s: &PolygammaSet| s.d1 / s.d2;
    let prefactor = t.a.d2 * t.b.d2 * t.s.d2 / (4.0 * d * d);
    prefactor * (ratio(&t.a) + ratio(&t.b) - ratio(&t.s))
}

/// ψ′(α)/ψ″(α) + ψ′(β)/ψ″(β) − ψ′(α+β)/ψ″(α+β); non-negative by
/// sub-additivity of x ↦ ψ′(x)/ψ″(x).
pub fn subadditivity_gap(p: &BetaPoint) -> f64 {
    let t = Trigammas::at(p);
    t.a.d1 / t.a.d2 + t.b.d1 / t.b.d2 - t.s.d1 / t.s.d2
}

fn check_shape(op: &'static str, alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(op, format!("argument must be finite and positive, got {alpha}")))
    }
}

/// lim_{β→0} K(α, β) = 3/4 − ψ′(α)ψ‴(α) / (2ψ″(α)²).
pub fn curvature_limit_k1(alpha: f64) -> Result<f64> {
    check_shape("curvature_limit_k1", alpha)?;
    let s = PolygammaSet::at(alpha);
    Ok(0.75 - s.d1 * s.d3 / (2.0 * s.d2 * s.d2))
}

/// lim_{β→∞} K(α, β) = (αψ″(α) + ψ′(α)) / (4(αψ′(α) − 1)²).
pub fn curvature_limit_k2(alpha: f64) -> Result<f64> {
    check_shape("curvature_limit_k2", alpha)?;
    let s = PolygammaSet::at(alpha);
    let denom = alpha * s.d1 - 1.0;
    Ok((alpha * s.d2 + s.d1) / (4.0 * denom * denom))
}

/// Minimum of the sectional curvature over a 400×400 log-spaced grid of
/// [1e-3, 1e3]², rounded down to four decimals. It is attained at the
/// (1e3, 1e3) corner, approaching the limit −1/2 from above.
pub const CURVATURE_GRID_MINIMUM: f64 = -0.5;

/// Christoffel symbols of the second kind Γᵏᵢⱼ and their first derivatives
/// ∂ₘΓᵏᵢⱼ, in tensor form. Index 0 is α and 1 is β.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Connection {
    /// gamma[k][i][j] = Γᵏᵢⱼ
    pub gamma: [[[f64; 2]; 2]; 2],
    /// dgamma[m][k][i][j] = ∂ₘΓᵏᵢⱼ
    pub dgamma: [[[[f64; 2]; 2]; 2]; 2],
}

impl Connection {
    pub(crate) fn from_trigammas(t: &Trigammas) -> Self {
        // Derivatives of the potential: every mixed entry is the α+β term
        // alone; the pure entries add the single-argument term.
        let third = |i: usize, j: usize, k: usize| -> f64 {
            let mut v = -t.s.d2;
            if i == j && j == k {
                v += if i == 0 { t.a.d2 } else { t.b.d2 };
            }
            v
        };
        let fourth = |i: usize, j: usize, k: usize, l: usize| -> f64 {
            let mut v = -t.s.d3;
            if i == j && j == k && k == l {
                v += if i == 0 { t.a.d3 } else { t.b.d3 };
            }
            v
        };
        let g = [[t.a.d1 - t.s.d1, -t.s.d1], [-t.s.d1, t.b.d1 - t.s.d1]];
        let det = t.det();
        let ginv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];

        let mut gamma = [[[0.0; 2]; 2]; 2];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    gk[i][j] = 0.5 * (0..2).map(|l| ginv[k][l] * third(i, j, l)).sum::<f64>();
                }
            }
        }
        let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
        for (m, dm) in dgamma.iter_mut().enumerate() {
            for (k, dmk) in dm.iter_mut().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                v -= ginv[k][a] * third(a, b, m) * gamma[b][i][j];
                            }
                            v += 0.5 * ginv[k][a] * fourth(i, j, a, m);
                        }
                        dmk[i][j] = v;
                    }
                }
            }
        }
        Connection { gamma, dgamma }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    fn pt(a: f64, b: f64) -> BetaPoint {
        BetaPoint::new(a, b).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// ψ′ by direct summation with an Euler–Maclaurin tail; independent of
    /// the recurrence/asymptotic route.
    fn trigamma_oracle(x: f64) -> f64 {
        let n = 100_000usize;
        let mut s = 0.0;
        for k in (0..n).rev() {
            s += (k as f64 + x).powi(-2);
        }
        let xn = n as f64 + x;
        s + 1.0 / xn + 0.5 / (xn * xn) + 1.0 / (6.0 * xn.powi(3))
    }

    #[test]
    fn rejects_invalid_points() {
        for (a, b) in [(0.0, 1.0), (1.0, -2.0), (f64::NAN, 1.0), (1.0, f64::INFINITY)] {
            assert!(BetaPoint::new(a, b).is_err());
        }
    }

    #[test]
    fn metric_at_uniform_distribution() {
        let g = metric_tensor(&pt(1.0, 1.0));
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        // ψ′(1) − ψ′(2) = 1 by the recurrence.
        assert!((g.g_aa - 1.0).abs() < 1e-15);
        assert!((g.g_bb - 1.0).abs() < 1e-15);
        assert!((g.g_ab - (1.0 - zeta2)).abs() < 1e-15);
        assert!((g.g_ab + 0.6449340668482264).abs() < 1e-15);
    }

    #[test]
    fn metric_swaps_under_reflection() {
        let g = metric_tensor(&pt(2.5, 0.3));
        let h = metric_tensor(&pt(0.3, 2.5));
        assert_eq!(g.g_aa, h.g_bb);
        assert_eq!(g.g_bb, h.g_aa);
        assert_eq!(g.g_ab, h.g_ab);
    }

    #[test]
    fn metric_matches_series_oracle_and_is_positive_definite() {
        let p = pt(5.0, 7.0);
        let g = metric_tensor(&p);
        let (a, b, s) = (trigamma_oracle(5.0), trigamma_oracle(7.0), trigamma_oracle(12.0));
        assert!(rel(g.g_aa, a - s) < 1e-11);
        assert!(rel(g.g_bb, b - s) < 1e-11);
        assert!(rel(g.g_ab, -s) < 1e-12);
        let det_oracle = a * b - s * (a + b);
        assert!(det_oracle > 0.0);
        assert!(g.is_positive_definite());
        assert!(rel(det_metric(&p), det_oracle) < 1e-9);
        assert!(rel(g.det(), det_metric(&p)) < 1e-12);
    }

    #[test]
    fn det_at_uniform_distribution() {
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        let expected = 1.0 - (zeta2 - 1.0).powi(2);
        assert!((expected - 0.58406005).abs() < 1e-8);
        assert!(rel(det_metric(&pt(1.0, 1.0)), expected) < 1e-14);
        assert_eq!(det_metric(&pt(3.0, 0.2)), det_metric(&pt(0.2, 3.0)));
    }

    #[test]
    fn lower_bound_values() {
        assert_eq!(det_metric_lower_bound(&pt(1.0, 1.0)), 0.375);
        assert!(det_metric_lower_bound(&pt(1.0, 1.0)) < det_metric(&pt(1.0, 1.0)));
        let mut prev = f64::INFINITY;
        for t in [1.0, 10.0, 100.0, 1e4, 1e8] {
            let v = det_metric_lower_bound(&pt(t, t));
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        assert!(prev < 1e-23);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for (a, b, tol) in [(1.0, 1.0, 1e-6), (2.0, 3.0, 1e-6), (0.5, 0.5, 1e-4)] {
            let p = pt(a, b);
            let q = det_metric_quadrature(&p, tol).unwrap();
            let d = det_metric(&p);
            assert!(rel(q, d) <= tol, "({a},{b}): {q} vs {d}");
        }
    }

    #[test]
    fn quadrature_rejects_bad_tolerance() {
        assert!(det_metric_quadrature(&pt(1.0, 1.0), 1e-12).is_err());
        assert!(det_metric_quadrature(&pt(1.0, 1.0), 0.1).is_err());
    }

    #[test]
    fn integrand_kernel_is_continuous_at_zero() {
        let u: f64 = 1e-4;
        let series = bernoulli_kernel(u * (1.0 - 1e-12));
        let exact = -u / (-u).exp_m1();
        assert!((series - exact).abs() < 1e-15);
        assert_eq!(bernoulli_kernel(0.0), 1.0);
    }

    #[test]
    fn christoffel_denominator_is_determinant() {
        for (a, b) in [(0.3, 4.0), (2.0, 2.0), (50.0, 0.01)] {
            let p = pt(a, b);
            assert_eq!(christoffel(&p).d, det_metric(&p));
        }
    }

    #[test]
    fn christoffel_diagonal_matches_corollary() {
        for g in [0.1, 1.0, 3.7, 40.0] {
            let c = christoffel(&pt(g, g));
            let s1 = PolygammaSet::at(g);
            let s2 = PolygammaSet::at(2.0 * g);
            let expected = (s1.d1 * s1.d2 - 4.0 * s1.d1 * s2.d2)
                / (2.0 * (s1.d1 * s1.d1 - 2.0 * s1.d1 * s2.d1));
            assert!(rel(c.a_ab + c.b_ab + c.c_ab, expected) < 1e-12, "gamma={g}");
            assert_eq!(c.a_ab, c.a_ba);
            assert_eq!(c.b_ab, c.b_ba);
            assert_eq!(c.c_ab, c.c_ba);
        }
    }

    #[test]
    fn christoffel_mirrors_under_reflection() {
        let c = christoffel(&pt(3.0, 0.7));
        let m = christoffel(&pt(0.7, 3.0));
        assert_eq!((c.a_ab, c.b_ab, c.c_ab), (m.a_ba, m.b_ba, m.c_ba));
        assert_eq!((c.a_ba, c.b_ba, c.c_ba), (m.a_ab, m.b_ab, m.c_ab));
    }

    /// ∂³ ln B(α, β) by central differences of the log-gamma function.
    fn potential_third_derivatives(a: f64, b: f64) -> [[[f64; 2]; 2]; 2] {
        let phi = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
        let h = 2e-3;
        // Third directional derivative along e via the 5-point stencil, then
        // polarization for mixed entries.
        let d3 = |e: [f64; 2]| {
            let f = |s: f64| phi(a + s * e[0], b + s * e[1]);
            (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h)
        };
        let aaa = d3([1.0, 0.0]);
        let bbb = d3([0.0, 1.0]);
        let plus = d3([1.0, 1.0]);
        let minus = d3([1.0, -1.0]);
        // (1,1): aaa + 3aab + 3abb + bbb; (1,-1): aaa − 3aab + 3abb − bbb.
        let aab = (plus - minus - 2.0 * bbb) / 6.0;
        let abb = (plus + minus - 2.0 * aaa) / 6.0;
        let mut t = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    t[i][j][k] = match i + j + k {
                        0 => aaa,
                        1 => aab,
                        2 => abb,
                        _ => bbb,
                    };
                }
            }
        }
        t
    }

    #[test]
    fn christoffel_matches_finite_difference_potential() {
        let (a, b) = (2.0, 2.0);
        let t = potential_third_derivatives(a, b);
        let g = metric_tensor(&pt(a, b));
        let [iaa, iab, ibb] = g.inverse();
        let ginv = [[iaa, iab], [iab, ibb]];
        let gamma = |k: usize, i: usize, j: usize| {
            0.5 * (0..2).map(|l| t[i][j][l] * ginv[k][l]).sum::<f64>()
        };
        let c = christoffel(&pt(a, b));
        assert!(rel(c.a_ab, gamma(0, 0, 0)) < 1e-5, "{} {}", c.a_ab, gamma(0, 0, 0));
        assert!(rel(c.b_ab, 2.0 * gamma(0, 0, 1)) < 1e-5);
        assert!(rel(c.c_ab, gamma(0, 1, 1)) < 1e-5);
        assert!(rel(c.a_ba, gamma(1, 1, 1)) < 1e-5);
        assert!(rel(c.b_ba, 2.0 * gamma(1, 0, 1)) < 1e-5);
        assert!(rel(c.c_ba, gamma(1, 0, 0)) < 1e-5);
    }

    #[test]
    fn tensor_connection_agrees_with_coefficients() {
        for (a, b) in [(0.4, 2.0), (2.0, 3.0), (15.0, 1.5)] {
            let p = pt(a, b);
            let conn = Connection::from_trigammas(&Trigammas::at(&p));
            let c = christoffel(&p);
            let g = conn.gamma;
            assert!(rel(g[0][0][0], c.a_ab) < 1e-12);
            assert!(rel(2.0 * g[0][0][1], c.b_ab) < 1e-12);
            assert!(rel(g[0][1][1], c.c_ab) < 1e-12);
            assert!(rel(g[1][1][1], c.a_ba) < 1e-12);
            assert!(rel(2.0 * g[1][0][1], c.b_ba) < 1e-12);
            assert!(rel(g[1][0][0], c.c_ba) < 1e-12);
        }
    }

    #[test]
    fn connection_derivatives_match_finite_differences() {
        let (a, b) = (1.3, 2.2);
        let conn = Connection::from_trigammas(&Trigammas::at(&pt(a, b)));
        let h = 1e-5;
        for m in 0..2 {
            let shift = |s: f64| {
                let q = if m == 0 { pt(a + s, b) } else { pt(a, b + s) };
                Connection::from_trigammas(&Trigammas::at(&q)).gamma
            };
            let (up, down) = (shift(h), shift(-h));
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let fd = (up[k][i][j] - down[k][i][j]) / (2.0 * h);
                        let an = conn.dgamma[m][k][i][j];
                        assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "m{m} k{k} i{i} j{j}: {fd} {an}");
                    }
                }
            }
        }
    }

    /// Gaussian curvature from the metric alone (Brioschi formula), with
    /// metric derivatives by central differences.
    fn brioschi(a: f64, b: f64) -> f64 {
        let h = 1e-3 * a.min(b);
        let m = |x: f64, y: f64| {
            let g = metric_tensor(&pt(x, y));
            (g.g_aa, g.g_ab, g.g_bb)
        };
        let (e, f, g) = m(a, b);
        let d_a = |k: usize| {
            let (p, q) = (m(a + h, b), m(a - h, b));
            [(p.0 - q.0), (p.1 - q.1), (p.2 - q.2)][k] / (2.0 * h)
        };
        let d_b = |k: usize| {
            let (p, q) = (m(a, b + h), m(a, b - h));
            [(p.0 - q.0), (p.1 - q.1), (p.2 - q.2)][k] / (2.0 * h)
        };
        let (e_u, f_u, g_u) = (d_a(0), d_a(1), d_a(2));
        let (e_v, f_v, g_v) = (d_b(0), d_b(1), d_b(2));
        let second = |k: usize, du: f64, dv: f64| {
            let v = |x: f64, y: f64| {
                let t = m(x, y);
                [t.0, t.1, t.2][k]
            };
            if du > 0.0 && dv > 0.0 {
                (v(a + h, b + h) - v(a + h, b - h) - v(a - h, b + h) + v(a - h, b - h)) / (4.0 * h * h)
            } else if du > 0.0 {
                (v(a + h, b) - 2.0 * v(a, b) + v(a - h, b)) / (h * h)
            } else {
                (v(a, b + h) - 2.0 * v(a, b) + v(a, b - h)) / (h * h)
            }
        };
        let e_vv = second(0, 0.0, 1.0);
        let f_uv = second(1, 1.0, 1.0);
        let g_uu = second(2, 1.0, 0.0);
        let m1 = [
            [-0.5 * e_vv + f_uv - 0.5 * g_uu, 0.5 * e_u, f_u - 0.5 * e_v],
            [f_v - 0.5 * g_u, e, f],
            [0.5 * g_v, f, g],
        ];
        let m2 = [[0.0, 0.5 * e_v, 0.5 * g_u], [0.5 * e_v, e, f], [0.5 * g_u, f, g]];
        let det3 = |x: [[f64; 3]; 3]| {
            x[0][0] * (x[1][1] * x[2][2] - x[1][2] * x[2][1])
                - x[0][1] * (x[1][0] * x[2][2] - x[1][2] * x[2][0])
                + x[0][2] * (x[1][0] * x[2][1] - x[1][1] * x[2][0])
        };
        (det3(m1) - det3(m2)) / (e * g - f * f).powi(2)
    }

    #[test]
    fn curvature_matches_brioschi_formula() {
        for (a, b) in [(1.0, 1.0), (2.0, 3.0), (0.5, 4.0), (7.0, 7.0)] {
            let k = sectional_curvature(&pt(a, b));
            let oracle = brioschi(a, b);
            assert!(rel(k, oracle) < 1e-4, "({a},{b}): {k} vs {oracle}");
        }
    }

    #[test]
    fn curvature_factorized_equals_expanded() {
        for (a, b) in [(0.01, 0.02), (1.0, 1.0), (3.0, 0.7), (300.0, 20.0)] {
            let t = Trigammas::at(&pt(a, b));
            let d = t.det();
            let num = t.s.d2 * (t.a.d1 * t.b.d2 + t.a.d2 * t.b.d1) - t.s.d1 * t.a.d2 * t.b.d2;
            let expanded = num / (4.0 * d * d);
            assert!(rel(sectional_curvature(&pt(a, b)), expanded) < 1e-9);
        }
    }

    #[test]
    fn curvature_is_symmetric_and_has_limits() {
        assert!(rel(sectional_curvature(&pt(3.0, 0.7)), sectional_curvature(&pt(0.7, 3.0))) < 1e-15);
        assert!((sectional_curvature(&pt(1e3, 1e3)) + 0.5).abs() < 1e-2);
        assert!((sectional_curvature(&pt(1e-4, 1e4)) + 0.25).abs() < 1e-2);
        let k = sectional_curvature(&pt(1e-5, 1e-5));
        assert!(k < 0.0 && k.abs() < 1e-2, "{k}");
    }

    #[test]
    fn k1_limits() {
        assert!(curvature_limit_k1(1e-6).unwrap().abs() < 1e-3);
        assert!((curvature_limit_k1(1e6).unwrap() + 0.25).abs() < 1e-3);
        let k1 = curvature_limit_k1(1.0).unwrap();
        let errs: Vec<f64> = [1e-3, 1e-5, 1e-7]
            .iter()
            .map(|&b| (sectional_curvature(&pt(1.0, b)) - k1).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-5);
    }

    #[test]
    fn k2_limits() {
        assert!((curvature_limit_k2(1e-6).unwrap() + 0.25).abs() < 1e-3);
        assert!((curvature_limit_k2(1e6).unwrap() + 0.5).abs() < 1e-3);
        let k2 = curvature_limit_k2(2.0).unwrap();
        let e3 = (sectional_curvature(&pt(2.0, 1e3)) - k2).abs();
        let e5 = (sectional_curvature(&pt(2.0, 1e5)) - k2).abs();
        assert!(e5 < e3 && e5 < 1e-4, "{e3} {e5}");
    }

    #[test]
    fn limits_reject_bad_arguments() {
        assert!(curvature_limit_k1(0.0).is_err());
        assert!(curvature_limit_k2(-1.0).is_err());
    }

    #[test]
    fn subadditivity_and_negativity_on_grid() {
        let n = 60;
        let grid: Vec<f64> = (0..n).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64)).collect();
        for &a in &grid {
            for &b in &grid {
                let p = pt(a, b);
                assert!(subadditivity_gap(&p) >= 0.0, "({a},{b})");
                let k = sectional_curvature(&p);
                assert!(k < 0.0 && k >= CURVATURE_GRID_MINIMUM, "({a},{b})");
                assert!(det_metric(&p) > det_metric_lower_bound(&p), "({a},{b})");
            }
        }
    }
}
