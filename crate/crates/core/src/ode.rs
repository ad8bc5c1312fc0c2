//! Dormand–Prince 5(4) integrator with step-size control and the
//! free 4th-order dense output.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

/// Why an integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Halt {
    /// The right-hand side refused a state at time t (left its domain),
    /// and shrinking the step did not help.
    Rejected { t: f64 },
    /// The user predicate rejected an accepted state.
    Stopped { t: f64 },
    MaxSteps { t: f64 },
    StepUnderflow { t: f64 },
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        std::array::from_fn(|i| r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i]))))
    }
}

/// Result of an integration over [t0, t1].
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub end: [f64; N],
    pub segments: Vec<DenseSegment<N>>,
}

impl<const N: usize> Solution<N> {
    /// Dense-output value at t inside the integrated span.
    pub fn sample(&self, t: f64) -> [f64; N] {
        let idx = self.segments.partition_point(|s| s.t0 + s.h < t);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        seg.eval(t)
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// Integrate y' = f(t, y) from t0 to t1.
///
/// `f` returns `None` when the state is outside its domain; the step is then
/// retried with a smaller size. Only the first `controlled` components enter
/// the error norm. `accept` is called on every accepted state and may stop
/// the integration. Dense segments are kept only when `dense` is set.
#[allow(clippy::too_many_arguments)]
pub fn integrate<const N: usize, F, P>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    h0: f64,
    tol: &Tolerances,
    controlled: usize,
    dense: bool,
    mut accept: P,
) -> Result<Solution<N>, Halt>
where
    F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
    P: FnMut(f64, &[f64; N]) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y).ok_or(Halt::Rejected { t })?;
    let span = t1 - t0;
    let mut h = h0.min(span);
    let mut steps = 0;
    let mut segments = Vec::new();
    let mut last_reject = false;

    while t < t1 {
        if steps >= tol.max_steps {
            return Err(Halt::MaxSteps { t });
        }
        if h < 1e-14 * span {
            return Err(Halt::StepUnderflow { t });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let stages = (|| {
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let y6 = axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let k6 = f(t + h, &y6)?;
            let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + h, &y_new)?;
            Some((k2, k3, k4, k5, k6, k7, y_new))
        })();
        let Some((_k2, k3, k4, k5, k6, k7, y_new)) = stages else {
            h *= 0.25;
            last_reject = true;
            continue;
        };
        steps += 1;

        let mut err = 0.0;
        for i in 0..controlled {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / scale).powi(2);
        }
        let err = (err / controlled as f64).sqrt();

        if err <= 1.0 {
            if dense {
                let dy: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
                let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - dy[i]);
                let r4: [f64; N] = std::array::from_fn(|i| dy[i] - h * k7[i] - r3[i]);
                let r5: [f64; N] = std::array::from_fn(|i| {
                    h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                });
                segments.push(DenseSegment { t0: t, h, coeffs: [y, dy, r3, r4, r5] });
            }
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k7;
            if !accept(t, &y) {
                return Err(Halt::Stopped { t });
            }
            let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if last_reject {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_reject = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_reject = true;
        }
    }
    Ok(Solution { end: y, segments })
}
