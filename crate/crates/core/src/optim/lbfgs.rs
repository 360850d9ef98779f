//! Projected L-BFGS with Armijo backtracking.

use std::collections::VecDeque;

use super::{fd_gradient, project, Method, ObjectiveProblem, OptimiserSpec, Recorder, RunReport};

const HISTORY: usize = 10;
const MAX_BACKTRACKS: usize = 40;
const ARMIJO_C: f64 = 1e-4;

fn gradient(rec: &mut Recorder<'_>, x: &[f64]) -> Option<Vec<f64>> {
    match &rec.problem.gradient {
        Some(g) => Some(g(x)),
        None => fd_gradient(rec, x),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with components that push against an active bound removed.
fn free_gradient(x: &[f64], g: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((xi, gi), b)| if (*xi <= b[0] && *gi > 0.0) || (*xi >= b[1] && *gi < 0.0) { 0.0 } else { *gi })
        .collect()
}

pub(crate) fn run(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> RunReport {
    let bounds = problem.bounds.clone();
    let mut rec = Recorder::new(problem, spec);
    let mut x = problem.starting_point();
    let Some(mut fx) = rec.eval(&x) else {
        return rec.finish(Method::Lbfgs, false);
    };
    let Some(mut g) = gradient(&mut rec, &x) else {
        return rec.finish(Method::Lbfgs, false);
    };
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut converged = false;

    loop {
        let pg = free_gradient(&x, &g, &bounds);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm <= 1e-10 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        // two-loop recursion on the free gradient
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().zip(&pg).map(|(v, p)| if *p == 0.0 { 0.0 } else { -v }).collect();
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = pg.iter().map(|v| -v).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let xn = project(&x.iter().zip(&d).map(|(a, b)| a + t * b).collect::<Vec<_>>(), &bounds);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            let Some(fn_) = rec.eval(&xn) else {
                return rec.finish(Method::Lbfgs, false);
            };
            if fn_ <= fx + ARMIJO_C * decrease && fn_.is_finite() {
                accepted = Some((xn, fn_, step));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, s)) = accepted else {
            // line search failure
            break;
        };
        let Some(gn) = gradient(&mut rec, &xn) else {
            return rec.finish(Method::Lbfgs, false);
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let step_norm = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f_change = fx - fn_;
        x = xn;
        g = gn;
        let fold = fx;
        fx = fn_;
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if mem.len() == HISTORY {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        if step_norm <= spec.x_tol * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            || f_change <= spec.f_tol * fold.abs().max(1e-300)
        {
            converged = free_gradient(&x, &g, &bounds).iter().all(|v| v.abs() <= 1e-6 * (1.0 + fx.abs()))
                || f_change <= spec.f_tol * fold.abs().max(1e-300);
            break;
        }
    }
    rec.finish(Method::Lbfgs, converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_quadratic_analytic() {
        let p = ObjectiveProblem::new(4, |x| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum())
            .unwrap()
            .with_gradient(|x| x.iter().enumerate().map(|(i, v)| 2.0 * (i as f64 + 1.0) * v).collect())
            .with_x0(vec![1.0, -1.0, 0.5, 2.0])
            .unwrap();
        let r = run(&p, &OptimiserSpec::new(Method::Lbfgs, 200));
        assert!(r.best_f <= 1e-10, "{}", r.best_f);
    }

    #[test]
    fn bound_active_solution() {
        let p = ObjectiveProblem::new(2, |x| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2))
            .unwrap()
            .with_bounds(vec![[0.0, 1.0], [0.0, 1.0]])
            .unwrap();
        let r = run(&p, &OptimiserSpec::new(Method::Lbfgs, 500));
        assert!((r.best_x[0] - 1.0).abs() < 1e-8 && r.best_x[1].abs() < 1e-8, "{:?}", r.best_x);
        assert!(r.feasible);
    }
}
