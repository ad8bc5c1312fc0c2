//! Geodesics of the beta manifold: the exponential map by numerical
//! integration of the geodesic equations, the logarithm map by shooting,
//! and the Fisher-Rao distance.
//!
//! The logarithm map runs a damped Newton iteration on the initial velocity.
//! The sensitivity of the endpoint to the initial velocity comes from the
//! variational (Jacobi) equations integrated alongside the geodesic, so each
//! Newton iteration costs a single integration.

use crate::error::{Error, Result};
use crate::metric::{christoffel_from, metric_tensor, BetaPoint, Connection, MetricTensor, Trigammas};
use crate::ode::{integrate, Halt, Solution, Tolerances};

/// Geodesics reaching α ≤ CHART_MIN or β ≤ CHART_MIN are reported as
/// leaving the chart.
pub const CHART_MIN: f64 = 1e-8;
/// Upper counterpart of [`CHART_MIN`]; past it the metric determinant is
/// dominated by cancellation error.
pub const CHART_MAX: f64 = 1e7;

const ODE_TOL: Tolerances = Tolerances { rtol: 1e-11, atol: 1e-13, max_steps: 200_000 };

/// A velocity (dα, dβ) attached to a point of the manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    base: BetaPoint,
    d_alpha: f64,
    d_beta: f64,
}

impl TangentVector {
    pub fn new(base: BetaPoint, d_alpha: f64, d_beta: f64) -> Result<Self> {
        if d_alpha.is_finite() && d_beta.is_finite() {
            Ok(TangentVector { base, d_alpha, d_beta })
        } else {
            Err(Error::domain("TangentVector", format!("non-finite components ({d_alpha}, {d_beta})")))
        }
    }

    pub fn zero(base: BetaPoint) -> Self {
        TangentVector { base, d_alpha: 0.0, d_beta: 0.0 }
    }

    pub(crate) fn from_array(base: BetaPoint, v: [f64; 2]) -> Self {
        TangentVector { base, d_alpha: v[0], d_beta: v[1] }
    }

    pub fn base(&self) -> BetaPoint {
        self.base
    }

    pub fn d_alpha(&self) -> f64 {
        self.d_alpha
    }

    pub fn d_beta(&self) -> f64 {
        self.d_beta
    }

    pub fn components(&self) -> [f64; 2] {
        [self.d_alpha, self.d_beta]
    }

    pub fn scaled(&self, s: f64) -> Self {
        TangentVector { base: self.base, d_alpha: s * self.d_alpha, d_beta: s * self.d_beta }
    }

    /// √g(v, v) at the base point.
    pub fn fisher_norm(&self) -> f64 {
        metric_tensor(&self.base).norm(self.components())
    }

    pub fn is_zero(&self) -> bool {
        self.d_alpha == 0.0 && self.d_beta == 0.0
    }
}

/// Unit-speed tangent vector at `p` making angle `theta` with the first
/// axis of the Cholesky frame of the metric.
pub fn unit_direction(p: &BetaPoint, theta: f64) -> TangentVector {
    let g = metric_tensor(p);
    let l11 = g.g_aa.sqrt();
    let l21 = g.g_ab / l11;
    let l22 = (g.g_bb - l21 * l21).sqrt();
    let (s, c) = theta.sin_cos();
    let db = s / l22;
    let da = (c - l21 * db) / l11;
    TangentVector::from_array(*p, [da, db])
}

/// A geodesic sampled at uniform times on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub points: Vec<BetaPoint>,
    pub velocities: Vec<TangentVector>,
}

impl GeodesicPath {
    pub fn start(&self) -> BetaPoint {
        self.points[0]
    }

    pub fn end(&self) -> BetaPoint {
        *self.points.last().expect("paths have at least two samples")
    }

    /// Fisher speed at every sample.
    pub fn speeds(&self) -> Vec<f64> {
        self.velocities.iter().map(TangentVector::fisher_norm).collect()
    }

    /// Fisher length by the composite trapezoid rule on the sampled speeds.
    pub fn length(&self) -> f64 {
        let s = self.speeds();
        self.times
            .windows(2)
            .zip(s.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum()
    }

    /// max_t |speed(t) − speed(0)| / speed(0); zero for a constant path.
    pub fn speed_drift(&self) -> f64 {
        let s = self.speeds();
        if s[0] == 0.0 {
            return 0.0;
        }
        s.iter().map(|v| (v - s[0]).abs()).fold(0.0, f64::max) / s[0]
    }
}

fn quadratic_acceleration(c: &crate::metric::ChristoffelCoeffs, v: [f64; 2]) -> [f64; 2] {
    let [da, db] = v;
    [
        -c.a_ab * da * da - c.b_ab * da * db - c.c_ab * db * db,
        -c.a_ba * db * db - c.b_ba * da * db - c.c_ba * da * da,
    ]
}

/// Second derivatives (α̈, β̈) prescribed by the geodesic equations for a
/// curve passing through `v.base()` with velocity `v`.
pub fn geodesic_rhs(v: &TangentVector) -> [f64; 2] {
    let c = christoffel_from(&Trigammas::at(&v.base));
    quadratic_acceleration(&c, v.components())
}

fn in_chart(a: f64, b: f64) -> bool {
    a > CHART_MIN && b > CHART_MIN && a < CHART_MAX && b < CHART_MAX
}

fn state_point(y: &[f64]) -> Option<BetaPoint> {
    if y[0] > 0.0 && y[1] > 0.0 && y[0].is_finite() && y[1].is_finite() {
        Some(BetaPoint::new(y[0], y[1]).ok()?)
    } else {
        None
    }
}

fn first_order_rhs(y: &[f64; 4]) -> Option<[f64; 4]> {
    let p = state_point(y)?;
    let c = christoffel_from(&Trigammas::at(&p));
    let [aa, ab] = quadratic_acceleration(&c, [y[2], y[3]]);
    Some([y[2], y[3], aa, ab])
}

/// Geodesic state together with ∂(x, ẋ)/∂ẋ(0): indices 0..4 hold
/// (α, β, α̇, β̇), 4..8 the position sensitivities J[i][l] at 4 + 2i + l,
/// 8..12 the velocity sensitivities at 8 + 2i + l.
fn variational_rhs(y: &[f64; 12]) -> Option<[f64; 12]> {
    let p = state_point(y)?;
    let t = Trigammas::at(&p);
    let c = christoffel_from(&t);
    let conn = Connection::from_trigammas(&t);
    let v = [y[2], y[3]];
    let acc = quadratic_acceleration(&c, v);
    let mut out = [0.0; 12];
    out[0] = v[0];
    out[1] = v[1];
    out[2] = acc[0];
    out[3] = acc[1];
    for l in 0..2 {
        for i in 0..2 {
            out[4 + 2 * i + l] = y[8 + 2 * i + l];
        }
        for k in 0..2 {
            let mut d = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let vv = v[i] * v[j];
                    for m in 0..2 {
                        d -= conn.dgamma[m][k][i][j] * vv * y[4 + 2 * m + l];
                    }
                    d -= 2.0 * conn.gamma[k][i][j] * v[i] * y[8 + 2 * j + l];
                }
            }
            out[8 + 2 * k + l] = d;
        }
    }
    Some(out)
}

fn halt_to_error(h: Halt, y_hint: Option<[f64; 2]>) -> Error {
    match h {
        Halt::Stopped { t } | Halt::Rejected { t } | Halt::StepUnderflow { t } => {
            let [alpha, beta] = y_hint.unwrap_or([f64::NAN, f64::NAN]);
            Error::BoundaryEscape { alpha, beta, t }
        }
        Halt::MaxSteps { t } => {
            Error::no_convergence("exp_map", format!("step budget exhausted at t = {t}"))
        }
    }
}

fn initial_step(v: &TangentVector) -> f64 {
    let p = v.base;
    let rel = (v.d_alpha / p.alpha()).abs().max((v.d_beta / p.beta()).abs());
    if rel > 0.0 {
        (0.01 / rel).min(0.1)
    } else {
        0.1
    }
}

fn integrate_geodesic(v: &TangentVector, dense: bool) -> Result<Solution<4>> {
    let p = v.base;
    let y0 = [p.alpha(), p.beta(), v.d_alpha, v.d_beta];
    let mut last = [p.alpha(), p.beta()];
    let r = integrate(
        |_t, y: &[f64; 4]| first_order_rhs(y),
        0.0,
        1.0,
        y0,
        initial_step(v),
        &ODE_TOL,
        4,
        dense,
        |_t, y| {
            last = [y[0], y[1]];
            in_chart(y[0], y[1])
        },
    );
    r.map_err(|h| halt_to_error(h, Some(last)))
}

/// Endpoint and its sensitivity ∂γ(1)/∂γ̇(0).
fn shoot(p: &BetaPoint, v: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let mut y0 = [0.0; 12];
    y0[0] = p.alpha();
    y0[1] = p.beta();
    y0[2] = v[0];
    y0[3] = v[1];
    y0[8] = 1.0;
    y0[11] = 1.0;
    let mut last = [p.alpha(), p.beta()];
    let sol = integrate(
        |_t, y: &[f64; 12]| variational_rhs(y),
        0.0,
        1.0,
        y0,
        initial_step(&TangentVector::from_array(*p, v)),
        &ODE_TOL,
        4,
        false,
        |_t, y| {
            last = [y[0], y[1]];
            in_chart(y[0], y[1])
        },
    )
    .map_err(|h| halt_to_error(h, Some(last)))?;
    let y = sol.end;
    Ok(([y[0], y[1]], [[y[4], y[5]], [y[6], y[7]]]))
}

/// Geodesic through `v.base()` with initial velocity `v`, sampled at
/// `steps_hint + 1` uniform times on [0, 1]. The integrator chooses its own
/// steps; the samples come from the dense output.
pub fn exp_map(v: &TangentVector, steps_hint: usize) -> Result<GeodesicPath> {
    let n = steps_hint.max(1);
    let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    if v.is_zero() {
        return Ok(GeodesicPath {
            points: vec![v.base; n + 1],
            velocities: vec![*v; n + 1],
            times,
        });
    }
    let sol = integrate_geodesic(v, true)?;
    let mut points = Vec::with_capacity(n + 1);
    let mut velocities = Vec::with_capacity(n + 1);
    for (i, &t) in times.iter().enumerate() {
        let y = if i == 0 {
            [v.base.alpha(), v.base.beta(), v.d_alpha, v.d_beta]
        } else if i == n {
            sol.end
        } else {
            sol.sample(t)
        };
        let p = BetaPoint::new(y[0], y[1])?;
        points.push(p);
        velocities.push(TangentVector::new(p, y[2], y[3])?);
    }
    Ok(GeodesicPath { times, points, velocities })
}

/// Endpoint γ(1) of the geodesic with initial velocity `v`.
pub fn exp_point(v: &TangentVector) -> Result<BetaPoint> {
    if v.is_zero() {
        return Ok(v.base);
    }
    let sol = integrate_geodesic(v, false)?;
    BetaPoint::new(sol.end[0], sol.end[1])
}

/// Endpoint and velocity γ̇(1).
pub fn exp_end_velocity(v: &TangentVector) -> Result<TangentVector> {
    if v.is_zero() {
        return Ok(*v);
    }
    let sol = integrate_geodesic(v, false)?;
    let q = BetaPoint::new(sol.end[0], sol.end[1])?;
    TangentVector::new(q, sol.end[2], sol.end[3])
}

/// Newton residuals below this (relative to the target coordinates) count
/// as converged.
const RESIDUAL_TOL: f64 = 1e-11;
/// Residual accepted when Newton stagnates at the integrator's noise floor.
const RESIDUAL_FLOOR: f64 = 1e-9;
const NEWTON_ITERS: usize = 60;
const MAX_HALVINGS: usize = 40;

fn scaled_residual(end: [f64; 2], q: &BetaPoint) -> ([f64; 2], f64) {
    let r = [end[0] - q.alpha(), end[1] - q.beta()];
    let n = ((r[0] / q.alpha()).powi(2) + (r[1] / q.beta()).powi(2)).sqrt();
    (r, n)
}

fn newton_shoot(p: &BetaPoint, q: &BetaPoint, guess: [f64; 2]) -> Result<[f64; 2]> {
    let mut v = guess;
    let (mut end, mut jac) = shoot(p, v)?;
    let (mut r, mut norm) = scaled_residual(end, q);
    let mut stalls = 0;
    for _ in 0..NEWTON_ITERS {
        if norm <= RESIDUAL_TOL {
            return Ok(v);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det == 0.0 {
            break;
        }
        let step = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = [v[0] + lambda * step[0], v[1] + lambda * step[1]];
            if let Ok((e, j)) = shoot(p, trial) {
                let (rt, nt) = scaled_residual(e, q);
                if nt < norm {
                    stalls = if nt > 0.5 * norm { stalls + 1 } else { 0 };
                    v = trial;
                    end = e;
                    jac = j;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted || stalls >= 4 {
            break;
        }
    }
    let _ = end;
    if norm <= RESIDUAL_FLOOR {
        Ok(v)
    } else {
        Err(Error::no_convergence(
            "log_map",
            format!(
                "shooting from ({}, {}) to ({}, {}) stalled at relative residual {norm:e}",
                p.alpha(),
                p.beta(),
                q.alpha(),
                q.beta()
            ),
        ))
    }
}

/// Initial velocity of the straight line in log-coordinates from p to q.
fn log_chord(p: &BetaPoint, q: &BetaPoint) -> [f64; 2] {
    [p.alpha() * (q.alpha() / p.alpha()).ln(), p.beta() * (q.beta() / p.beta()).ln()]
}

fn log_interpolate(p: &BetaPoint, q: &BetaPoint, s: f64) -> BetaPoint {
    let a = (p.alpha().ln() + s * (q.alpha() / p.alpha()).ln()).exp();
    let b = (p.beta().ln() + s * (q.beta() / p.beta()).ln()).exp();
    BetaPoint::new(a, b).expect("interpolant of interior points is interior")
}

/// Shoot toward a sequence of targets along the log-chord, warm-starting
/// each solve from the previous one.
fn continuation(p: &BetaPoint, q: &BetaPoint, pieces: usize) -> Result<[f64; 2]> {
    let mut v = [0.0; 2];
    for j in 1..=pieces {
        let s = j as f64 / pieces as f64;
        let target = if j == pieces { *q } else { log_interpolate(p, q, s) };
        let guess = if j == 1 {
            log_chord(p, &target)
        } else {
            let grow = j as f64 / (j - 1) as f64;
            [v[0] * grow, v[1] * grow]
        };
        v = newton_shoot(p, &target, guess)?;
    }
    Ok(v)
}

/// Initial velocity of the geodesic from p reaching q at t = 1.
pub fn log_map(p: &BetaPoint, q: &BetaPoint) -> Result<TangentVector> {
    log_map_with_guess(p, q, None)
}

/// [`log_map`] with an optional warm-start velocity.
pub fn log_map_with_guess(p: &BetaPoint, q: &BetaPoint, guess: Option<[f64; 2]>) -> Result<TangentVector> {
    if p == q {
        return Ok(TangentVector::zero(*p));
    }
    let first = guess.unwrap_or_else(|| log_chord(p, q));
    let mut last_err = match newton_shoot(p, q, first) {
        Ok(v) => return Ok(TangentVector::from_array(*p, v)),
        Err(e) => e,
    };
    if guess.is_some() {
        match newton_shoot(p, q, log_chord(p, q)) {
            Ok(v) => return Ok(TangentVector::from_array(*p, v)),
            Err(e) => last_err = e,
        }
    }
    for pieces in [4, 16, 64] {
        match continuation(p, q, pieces) {
            Ok(v) => return Ok(TangentVector::from_array(*p, v)),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Fisher-Rao geodesic distance.
pub fn distance(p: &BetaPoint, q: &BetaPoint) -> Result<f64> {
    if p == q {
        return Ok(0.0);
    }
    Ok(log_map(p, q)?.fisher_norm())
}

/// Limit of the distance between B(nα, nλα) and B(nα′, nλα′) as n → ∞:
/// the metric along a fixed-mean ray tends to dα² / (2α²).
pub fn clt_limit_distance(alpha: f64, alpha_prime: f64) -> Result<f64> {
    for x in [alpha, alpha_prime] {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::domain("clt_limit_distance", format!("arguments must be positive, got {x}")));
        }
    }
    Ok((alpha_prime / alpha).ln().abs() / std::f64::consts::SQRT_2)
}

/// g_p(u, v) for two tangent vectors at the same base point.
pub fn inner_product(u: &TangentVector, v: &TangentVector) -> f64 {
    debug_assert_eq!(u.base, v.base);
    let g: MetricTensor = metric_tensor(&u.base);
    g.inner(u.components(), v.components())
}
