//! Nelder–Mead simplex minimization.

use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Absolute spread of objective values across the simplex.
    pub f_tol: f64,
    /// Largest coordinate distance of any vertex from the best vertex.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iter: 5_000,
            f_tol: 1e-10,
            x_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `objective` starting from `x0`.
///
/// Non-finite objective values away from `x0` are treated as `+inf`, so the
/// simplex simply retreats from regions where the objective is undefined.
pub fn minimize_simplex<F>(mut objective: F, x0: &[f64], options: &SimplexOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    if options.max_iter == 0 {
        return Err(Error::invalid("max_iter must be positive"));
    }
    if x0.is_empty() {
        return Err(Error::invalid("empty starting point"));
    }
    let f0 = objective(x0);
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("objective is {f0} at the starting point")));
    }
    let n = x0.len();
    let mut evaluations = 1;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut fvals: Vec<f64> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    fvals.push(f0);
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += (0.05 * x0[i].abs()).max(0.00025);
        fvals.push(eval(&v, &mut evaluations));
        verts.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // Stable sort keeps ties in insertion order, which keeps runs reproducible.
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let f_spread = fvals[worst] - fvals[best];
        let x_spread = verts
            .iter()
            .flat_map(|v| v.iter().zip(&verts[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread <= options.f_tol && x_spread <= options.x_tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &idx in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&verts[idx]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        let along = |coef: f64, out: &mut Vec<f64>, worst_v: &[f64]| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(worst_v) {
                *o = c + coef * (c - w);
            }
        };

        along(REFLECT, &mut trial, &verts[worst]);
        let f_reflect = eval(&trial, &mut evaluations);

        if f_reflect < fvals[best] {
            let reflected = trial.clone();
            along(EXPAND, &mut trial, &verts[worst]);
            let f_expand = eval(&trial, &mut evaluations);
            if f_expand < f_reflect {
                verts[worst].copy_from_slice(&trial);
                fvals[worst] = f_expand;
            } else {
                verts[worst] = reflected;
                fvals[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < fvals[second_worst] {
            verts[worst].copy_from_slice(&trial);
            fvals[worst] = f_reflect;
            continue;
        }

        let outside = f_reflect < fvals[worst];
        let coef = if outside { CONTRACT * REFLECT } else { -CONTRACT };
        let reflected_f = f_reflect;
        along(coef, &mut trial, &verts[worst]);
        let f_contract = eval(&trial, &mut evaluations);
        let accept = if outside {
            f_contract <= reflected_f
        } else {
            f_contract < fvals[worst]
        };
        if accept {
            verts[worst].copy_from_slice(&trial);
            fvals[worst] = f_contract;
            continue;
        }

        let best_v = verts[best].clone();
        for &idx in &order[1..] {
            for (v, b) in verts[idx].iter_mut().zip(&best_v) {
                *v = b + SHRINK * (*v - b);
            }
            fvals[idx] = eval(&verts[idx], &mut evaluations);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| fvals[a].total_cmp(&fvals[b]))
        .unwrap_or(0);
    Ok(OptimResult {
        x_star: verts[best].clone(),
        f_star: fvals[best],
        iterations,
        evaluations,
        converged,
    })
}

/// Runs the simplex repeatedly from its own optimum until a restart no longer
/// improves the objective. Restarting rebuilds a fresh, non-degenerate simplex.
pub fn minimize_simplex_restarted<F>(
    mut objective: F,
    x0: &[f64],
    options: &SimplexOptions,
    max_restarts: usize,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut result = minimize_simplex(&mut objective, x0, options)?;
    for _ in 0..max_restarts {
        let next = minimize_simplex(&mut objective, &result.x_star, options)?;
        let improved = next.f_star < result.f_star - options.f_tol;
        let total_iter = result.iterations + next.iterations;
        let total_eval = result.evaluations + next.evaluations;
        if next.f_star <= result.f_star {
            result = next;
        }
        result.iterations = total_iter;
        result.evaluations = total_eval;
        if !improved {
            break;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_1d() {
        let r = minimize_simplex(|x| (x[0] - 2.0).powi(2), &[0.0], &SimplexOptions::default()).unwrap();
        assert!((r.x_star[0] - 2.0).abs() < 1e-4, "{:?}", r);
        assert!(r.converged);
    }

    #[test]
    fn rosenbrock_2d() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iter: 10_000,
            f_tol: 1e-14,
            x_tol: 1e-10,
        };
        let r = minimize_simplex(rosen, &[-1.2, 1.0], &opts).unwrap();
        assert!((r.x_star[0] - 1.0).abs() < 1e-3 && (r.x_star[1] - 1.0).abs() < 1e-3, "{:?}", r);
    }

    #[test]
    fn single_iteration_is_not_converged() {
        let opts = SimplexOptions {
            max_iter: 1,
            ..Default::default()
        };
        let f = |x: &[f64]| (x[0] - 2.0).powi(2) + x[1] * x[1];
        let r = minimize_simplex(f, &[0.0, 1.0], &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.f_star, f(&r.x_star));
        assert!(r.f_star <= f(&[0.0, 1.0]));
    }

    #[test]
    fn rejects_bad_start_and_zero_iterations() {
        assert!(minimize_simplex(|_| f64::NAN, &[0.0], &SimplexOptions::default()).is_err());
        let opts = SimplexOptions {
            max_iter: 0,
            ..Default::default()
        };
        assert!(minimize_simplex(|x| x[0], &[0.0], &opts).is_err());
    }

    #[test]
    fn retreats_from_undefined_region() {
        // log barrier: undefined for x <= 0
        let f = |x: &[f64]| if x[0] > 0.0 { x[0] - x[0].ln() } else { f64::NAN };
        let r = minimize_simplex(f, &[3.0], &SimplexOptions::default()).unwrap();
        assert!((r.x_star[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn restarts_never_worsen() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iter: 200,
            ..Default::default()
        };
        let once = minimize_simplex(rosen, &[-1.2, 1.0], &opts).unwrap();
        let many = minimize_simplex_restarted(rosen, &[-1.2, 1.0], &opts, 5).unwrap();
        assert!(many.f_star <= once.f_star);
    }

    proptest::proptest! {
        #[test]
        fn never_worse_than_start(
            x0 in proptest::collection::vec(-5.0f64..5.0, 1..5),
            iters in 1usize..100,
        ) {
            let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.5).powi(2) + v.sin()).sum::<f64>();
            let opts = SimplexOptions { max_iter: iters, ..Default::default() };
            let r = minimize_simplex(f, &x0, &opts).unwrap();
            proptest::prop_assert!(r.f_star <= f(&x0));
            proptest::prop_assert_eq!(r.f_star, f(&r.x_star));
            proptest::prop_assert!(r.iterations <= iters);
        }
    }
}
