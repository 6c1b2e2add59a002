//! BFGS with a backtracking Armijo line search.

use crate::prelude::*;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop as soon as the objective falls below this value.
    pub target: f64,
    /// Stop when the gradient infinity norm falls below this value.
    pub gtol: f64,
    /// Sufficient-decrease constant of the Armijo condition.
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iters: 200, target: f64::NEG_INFINITY, gtol: 1e-9, c1: 1e-4, max_backtracks: 40 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimResult {
    /// Best point seen.
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Whether a stopping rule fired (target or gradient) before the
    /// iteration budget ran out.
    pub converged: bool,
    /// Best-so-far objective after each iteration, starting with `f(x0)`.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f` from `x0` using `grad` for derivatives.
pub fn minimize<F, G>(mut f: F, mut grad: G, x0: &[f64], opts: &BfgsOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(Error::Optimizer("objective is not finite at the starting point".into()));
    }
    let mut best = (x.clone(), fx);
    let mut history = vec![fx];
    if fx < opts.target {
        return Ok(OptimResult { x, f: fx, iterations: 0, evaluations, converged: true, history });
    }
    let mut g = grad(&x)?;
    // Inverse Hessian approximation, row-major.
    let mut hinv = identity(p);
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        if inf_norm(&g) < opts.gtol {
            converged = true;
            break;
        }
        let mut d = mat_vec(&hinv, &g);
        for v in &mut d {
            *v = -*v;
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hinv = identity(p);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        // Steepest-descent steps start at a length of at most 1 per coordinate.
        let mut step = if fresh { 1.0f64.min(1.0 / inf_norm(&d).max(1e-300)) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let fn_ = f(&xn)?;
            evaluations += 1;
            if fn_.is_finite() && fn_ <= fx + opts.c1 * step * slope {
                accepted = Some((xn, fn_));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((xn, fn_)) = accepted else {
            if fresh {
                // Even steepest descent made no progress.
                history.push(best.1);
                break;
            }
            hinv = identity(p);
            fresh = true;
            history.push(best.1);
            continue;
        };
        let gn = grad(&xn)?;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh {
                let scale = sy / dot(&y, &y);
                hinv = identity(p);
                for i in 0..p {
                    hinv[i * p + i] = scale;
                }
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }
        x = xn;
        fx = fn_;
        g = gn;
        if fx < best.1 {
            best = (x.clone(), fx);
        }
        history.push(best.1);
        if fx < opts.target {
            converged = true;
            break;
        }
    }
    Ok(OptimResult { x: best.0, f: best.1, iterations, evaluations, converged, history })
}

fn identity(p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p * p];
    for i in 0..p {
        m[i * p + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let p = v.len();
    (0..p).map(|i| dot(&m[i * p..(i + 1) * p], v)).collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let p = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..p {
        for j in 0..p {
            h[i * p + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<f64> {
        Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
    }

    fn rosenbrock_grad(x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])])
    }

    #[test]
    fn solves_rosenbrock() {
        let r = minimize(rosenbrock, rosenbrock_grad, &[-1.2, 1.0], &BfgsOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_in_few_iterations() {
        let a = [3.0, 1.0, 0.5, 10.0];
        let f = |x: &[f64]| Ok(x.iter().zip(&a).map(|(v, w)| w * (v - 1.0) * (v - 1.0)).sum());
        let g = |x: &[f64]| Ok(x.iter().zip(&a).map(|(v, w)| 2.0 * w * (v - 1.0)).collect());
        let r = minimize(f, g, &[0.0; 4], &BfgsOptions::default()).unwrap();
        assert!(r.iterations <= 20 && r.f < 1e-14);
    }

    #[test]
    fn target_stops_early() {
        let f = |x: &[f64]| Ok(x[0] * x[0]);
        let g = |x: &[f64]| Ok(vec![2.0 * x[0]]);
        let r = minimize(f, g, &[0.0], &BfgsOptions { target: 1e-2, ..Default::default() }).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| Ok(f64::NAN);
        let g = |_: &[f64]| Ok(vec![0.0]);
        assert!(matches!(minimize(f, g, &[0.0], &BfgsOptions::default()), Err(Error::Optimizer(_))));
    }
}
