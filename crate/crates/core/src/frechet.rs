//! Fréchet (Karcher) means on the beta manifold and on its finite products.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesy::{exp_point, log_map_with_guess, TangentVector};
use crate::metric::{metric_tensor, BetaPoint};

/// Outer Karcher iterations before giving up.
pub const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 30;
/// Relative accuracy of the objective as assembled from log maps.
const OBJECTIVE_NOISE: f64 = 1e-9;

/// A point of the product manifold Bⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    components: Vec<BetaPoint>,
}

impl ProductPoint {
    pub fn new(components: Vec<BetaPoint>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("ProductPoint", "needs at least one component"));
        }
        Ok(ProductPoint { components })
    }

    pub fn components(&self) -> &[BetaPoint] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Outcome of a Karcher flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KarcherResult {
    pub mean: BetaPoint,
    /// Fisher norm of Σ wᵢ log_B(Bᵢ) at the returned mean.
    pub gradient_norm: f64,
    /// Σ wᵢ d(B, Bᵢ)² at the returned mean.
    pub objective: f64,
    pub iterations: usize,
}

fn check_tol(tol: f64) -> Result<()> {
    if (1e-10..=1e-3).contains(&tol) {
        Ok(())
    } else {
        Err(Error::domain("frechet_mean", format!("tol must lie in [1e-10, 1e-3], got {tol}")))
    }
}

fn normalized_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let Some(w) = weights else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    if w.len() != n {
        return Err(Error::domain("frechet_mean", format!("{} weights for {n} points", w.len())));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::domain("frechet_mean", "weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain("frechet_mean", format!("weights sum to {total}, not 1")));
    }
    Ok(w.iter().map(|x| x / total).collect())
}

/// Componentwise arithmetic mean of the parameters.
fn euclidean_mean(points: &[BetaPoint], w: &[f64]) -> BetaPoint {
    let a: f64 = points.iter().zip(w).map(|(p, w)| w * p.alpha()).sum();
    let b: f64 = points.iter().zip(w).map(|(p, w)| w * p.beta()).sum();
    BetaPoint::new(a.max(f64::MIN_POSITIVE), b.max(f64::MIN_POSITIVE)).expect("convex combination of interior points")
}

struct Logs {
    vectors: Vec<[f64; 2]>,
    objective: f64,
    gradient: [f64; 2],
}

fn logs_at(base: &BetaPoint, points: &[BetaPoint], w: &[f64], guesses: Option<&[[f64; 2]]>) -> Result<Logs> {
    let vectors: Vec<[f64; 2]> = points
        .par_iter()
        .enumerate()
        .map(|(i, q)| log_map_with_guess(base, q, guesses.map(|g| g[i])).map(|v| v.components()))
        .collect::<Result<_>>()?;
    let g = metric_tensor(base);
    let mut objective = 0.0;
    let mut gradient = [0.0; 2];
    for (v, wi) in vectors.iter().zip(w) {
        objective += wi * g.inner(*v, *v);
        gradient[0] += wi * v[0];
        gradient[1] += wi * v[1];
    }
    Ok(Logs { vectors, objective, gradient })
}

/// Weighted Fréchet mean argmin_B Σ wᵢ d(B, Bᵢ)², started from the
/// Euclidean mean of the parameters. `weights` defaults to uniform.
pub fn frechet_mean(points: &[BetaPoint], weights: Option<&[f64]>, tol: f64) -> Result<BetaPoint> {
    karcher_flow(points, weights, tol, None).map(|r| r.mean)
}

/// Karcher flow B ← exp_B(τ Σ wᵢ log_B(Bᵢ)) with τ = 1, halved while the
/// objective increases. Stops once the gradient has Fisher norm ≤ `tol`.
pub fn karcher_flow(
    points: &[BetaPoint],
    weights: Option<&[f64]>,
    tol: f64,
    init: Option<BetaPoint>,
) -> Result<KarcherResult> {
    check_tol(tol)?;
    if points.is_empty() {
        return Err(Error::domain("frechet_mean", "empty point set"));
    }
    let w = normalized_weights(points.len(), weights)?;
    let mut base = init.unwrap_or_else(|| euclidean_mean(points, &w));
    let mut logs = logs_at(&base, points, &w, None)?;
    for iteration in 0..=MAX_ITERATIONS {
        let grad_norm = metric_tensor(&base).norm(logs.gradient);
        if grad_norm <= tol {
            return Ok(KarcherResult { mean: base, gradient_norm: grad_norm, objective: logs.objective, iterations: iteration });
        }
        if iteration == MAX_ITERATIONS {
            break;
        }
        let mut tau = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let step = [tau * logs.gradient[0], tau * logs.gradient[1]];
            let trial = exp_point(&TangentVector::new(base, step[0], step[1])?);
            if let Ok(candidate) = trial {
                // Moving the base by `step` shifts each log vector by about −step.
                let guesses: Vec<[f64; 2]> = logs.vectors.iter().map(|v| [v[0] - step[0], v[1] - step[1]]).collect();
                if let Ok(next) = logs_at(&candidate, points, &w, Some(&guesses)) {
                    // Near the minimum the objective change drops below the
                    // accuracy of the log maps; there a shrinking gradient decides.
                    let next_norm = metric_tensor(&candidate).norm(next.gradient);
                    let decreased = next.objective < logs.objective
                        || (next.objective <= logs.objective * (1.0 + OBJECTIVE_NOISE) && next_norm < grad_norm);
                    if decreased {
                        base = candidate;
                        logs = next;
                        moved = true;
                        break;
                    }
                }
            }
            tau *= 0.5;
        }
        if !moved {
            return Err(Error::no_convergence(
                "frechet_mean",
                format!("no descent step found at gradient norm {grad_norm:e}"),
            ));
        }
    }
    Err(Error::no_convergence(
        "frechet_mean",
        format!("gradient norm above {tol:e} after {MAX_ITERATIONS} iterations"),
    ))
}

/// Fréchet mean on Bⁿ. The product metric separates, so this is the tuple of
/// componentwise means.
pub fn product_frechet_mean(points: &[ProductPoint], tol: f64) -> Result<ProductPoint> {
    let first = points.first().ok_or_else(|| Error::domain("product_frechet_mean", "empty point set"))?;
    let n = first.len();
    if let Some(bad) = points.iter().find(|p| p.len() != n) {
        return Err(Error::domain(
            "product_frechet_mean",
            format!("mixed lengths {n} and {}", bad.len()),
        ));
    }
    let components = (0..n)
        .into_par_iter()
        .map(|k| {
            let column: Vec<BetaPoint> = points.iter().map(|p| p.components[k]).collect();
            frechet_mean(&column, None, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    ProductPoint::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{distance, exp_map, log_map};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(a: f64, b: f64) -> BetaPoint {
        BetaPoint::new(a, b).unwrap()
    }

    fn close(p: &BetaPoint, q: &BetaPoint, tol: f64) -> bool {
        (p.alpha() - q.alpha()).abs() <= tol * p.alpha().max(1.0) && (p.beta() - q.beta()).abs() <= tol * p.beta().max(1.0)
    }

    #[test]
    fn single_point_is_its_own_mean() {
        let p = pt(0.4, 9.0);
        assert_eq!(frechet_mean(&[p], None, 1e-10).unwrap(), p);
    }

    #[test]
    fn two_points_give_geodesic_midpoint() {
        let (p, q) = (pt(1.0, 2.0), pt(4.0, 1.5));
        let m = frechet_mean(&[p, q], None, 1e-10).unwrap();
        let from_p = exp_map(&log_map(&p, &q).unwrap().scaled(0.5), 1).unwrap().end();
        let from_q = exp_map(&log_map(&q, &p).unwrap().scaled(0.5), 1).unwrap().end();
        assert!(close(&m, &from_p, 1e-8), "{m:?} {from_p:?}");
        assert!(close(&m, &from_q, 1e-8), "{m:?} {from_q:?}");
        let (dp, dq) = (distance(&m, &p).unwrap(), distance(&m, &q).unwrap());
        assert!((dp - dq).abs() < 1e-8);
    }

    #[test]
    fn swap_symmetric_set_has_diagonal_mean() {
        let m = frechet_mean(&[pt(1.0, 3.0), pt(3.0, 1.0)], None, 1e-10).unwrap();
        assert!((m.alpha() - m.beta()).abs() < 1e-8);
    }

    #[test]
    fn weights_are_validated_and_respected() {
        let pts = [pt(1.0, 1.0), pt(5.0, 2.0)];
        assert!(frechet_mean(&pts, Some(&[0.5]), 1e-8).is_err());
        assert!(frechet_mean(&pts, Some(&[0.7, 0.7]), 1e-8).is_err());
        assert!(frechet_mean(&pts, Some(&[-0.5, 1.5]), 1e-8).is_err());
        assert!(frechet_mean(&pts, None, 1.0).is_err());
        assert!(frechet_mean(&[], None, 1e-8).is_err());
        let m = frechet_mean(&pts, Some(&[1.0, 0.0]), 1e-10).unwrap();
        assert!(close(&m, &pts[0], 1e-9));
        // A weight of 1/4 on q lands a quarter of the way along the geodesic.
        let m = frechet_mean(&pts, Some(&[0.75, 0.25]), 1e-10).unwrap();
        let quarter = exp_map(&log_map(&pts[0], &pts[1]).unwrap().scaled(0.25), 1).unwrap().end();
        assert!(close(&m, &quarter, 1e-8));
    }

    #[test]
    fn mean_is_independent_of_start_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<BetaPoint> = (0..5).map(|_| pt(rng.gen_range(0.3..8.0), rng.gen_range(0.3..8.0))).collect();
        let reference = karcher_flow(&pts, None, 1e-10, None).unwrap();
        assert!(reference.gradient_norm <= 1e-10);
        for start in &pts {
            let r = karcher_flow(&pts, None, 1e-10, Some(*start)).unwrap();
            assert!(close(&r.mean, &reference.mean, 1e-8));
        }
        let mut reversed = pts.clone();
        reversed.reverse();
        let r = frechet_mean(&reversed, None, 1e-10).unwrap();
        assert!(close(&r, &reference.mean, 1e-8));
    }

    #[test]
    fn mean_beats_nearby_points() {
        let pts = [pt(0.5, 2.0), pt(3.0, 3.0), pt(1.0, 7.0)];
        let r = karcher_flow(&pts, None, 1e-10, None).unwrap();
        let objective = |b: &BetaPoint| pts.iter().map(|q| distance(b, q).unwrap().powi(2)).sum::<f64>() / 3.0;
        assert!((objective(&r.mean) - r.objective).abs() < 1e-10);
        for (da, db) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
            let b = pt(r.mean.alpha() + da, r.mean.beta() + db);
            assert!(objective(&b) > r.objective);
        }
    }

    /// Karcher flow on Bⁿ with the joint objective and joint halving,
    /// written independently of the componentwise reduction.
    fn joint_flow(points: &[ProductPoint], tol: f64) -> Vec<BetaPoint> {
        let n = points[0].len();
        let m = points.len() as f64;
        let mut base: Vec<BetaPoint> = (0..n)
            .map(|k| {
                let a = points.iter().map(|p| p.components()[k].alpha()).sum::<f64>() / m;
                let b = points.iter().map(|p| p.components()[k].beta()).sum::<f64>() / m;
                pt(a, b)
            })
            .collect();
        let eval = |base: &[BetaPoint]| {
            let mut obj = 0.0;
            let mut grads = Vec::new();
            let mut gnorm2 = 0.0;
            for (k, b) in base.iter().enumerate() {
                let mut g = [0.0; 2];
                for p in points {
                    let v = log_map(b, &p.components()[k]).unwrap();
                    obj += v.fisher_norm().powi(2) / m;
                    g[0] += v.d_alpha() / m;
                    g[1] += v.d_beta() / m;
                }
                gnorm2 += metric_tensor(b).inner(g, g);
                grads.push(g);
            }
            (obj, grads, gnorm2.sqrt())
        };
        let (mut obj, mut grads, mut gnorm) = eval(&base);
        while gnorm > tol {
            let mut tau = 1.0;
            loop {
                let cand: Vec<BetaPoint> = base
                    .iter()
                    .zip(&grads)
                    .map(|(b, g)| exp_point(&TangentVector::new(*b, tau * g[0], tau * g[1]).unwrap()).unwrap())
                    .collect();
                let (o, gr, gn) = eval(&cand);
                if o <= obj * (1.0 + 1e-15) {
                    base = cand;
                    obj = o;
                    grads = gr;
                    gnorm = gn;
                    break;
                }
                tau *= 0.5;
            }
        }
        base
    }

    #[test]
    fn product_mean_matches_joint_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<ProductPoint> = (0..4)
            .map(|_| {
                ProductPoint::new((0..2).map(|_| pt(rng.gen_range(0.5..6.0), rng.gen_range(0.5..6.0))).collect()).unwrap()
            })
            .collect();
        let mean = product_frechet_mean(&pts, 1e-10).unwrap();
        let joint = joint_flow(&pts, 1e-10);
        for (a, b) in mean.components().iter().zip(&joint) {
            assert!(close(a, b, 1e-8), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn product_mean_of_two_is_componentwise_midpoint() {
        let p = ProductPoint::new(vec![pt(1.0, 2.0), pt(0.5, 0.5)]).unwrap();
        let q = ProductPoint::new(vec![pt(3.0, 1.0), pt(2.0, 4.0)]).unwrap();
        let m = product_frechet_mean(&[p.clone(), q.clone()], 1e-10).unwrap();
        for k in 0..2 {
            let (a, b) = (p.components()[k], q.components()[k]);
            let mid = exp_map(&log_map(&a, &b).unwrap().scaled(0.5), 1).unwrap().end();
            assert!(close(&m.components()[k], &mid, 1e-8));
        }
    }

    #[test]
    fn product_mean_edge_cases() {
        let p = ProductPoint::new(vec![pt(1.0, 2.0), pt(0.5, 0.5)]).unwrap();
        let same = product_frechet_mean(&[p.clone(), p.clone(), p.clone()], 1e-10).unwrap();
        for (a, b) in same.components().iter().zip(p.components()) {
            assert!(close(a, b, 1e-12));
        }
        let single = ProductPoint::new(vec![pt(2.0, 5.0)]).unwrap();
        let other = ProductPoint::new(vec![pt(1.0, 1.0)]).unwrap();
        let m = product_frechet_mean(&[single.clone(), other.clone()], 1e-10).unwrap();
        let direct = frechet_mean(&[pt(2.0, 5.0), pt(1.0, 1.0)], None, 1e-10).unwrap();
        assert_eq!(m.components()[0], direct);
        let short = ProductPoint::new(vec![pt(1.0, 1.0)]).unwrap();
        assert!(product_frechet_mean(&[p, short], 1e-8).is_err());
        assert!(ProductPoint::new(vec![]).is_err());
    }
}
