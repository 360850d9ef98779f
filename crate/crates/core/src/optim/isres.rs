//! Evolution strategy with stochastic ranking.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Method, ObjectiveProblem, OptimiserSpec, Recorder, RunReport};
use crate::instances::rng;

/// Probability of comparing by objective when constraint violations differ.
const PF: f64 = 0.45;
/// Differential variation weight.
const GAMMA: f64 = 0.4;
/// Step-size smoothing.
const SMOOTHING: f64 = 0.2;
const RETRIES: usize = 10;

struct Member {
    x: Vec<f64>,
    sigma: Vec<f64>,
    f: f64,
    phi: f64,
}

pub(crate) fn run(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> RunReport {
    let n = problem.dim;
    let bounds = &problem.bounds;
    let lambda = 20 * (n + 1);
    let mu = lambda.div_ceil(7);
    let tau = 1.0 / (2.0 * (n as f64).sqrt()).sqrt();
    let tau_p = 1.0 / (2.0 * n as f64).sqrt();
    let mut r = rng(spec.seed);
    let mut rec = Recorder::new(problem, spec);
    let sigma0: Vec<f64> = bounds.iter().map(|b| (b[1] - b[0]) / (n as f64).sqrt()).collect();

    let penalty = |x: &[f64]| -> f64 {
        problem
            .equality
            .as_ref()
            .map_or(0.0, |eq| (eq.residuals)(x).iter().map(|h| (h.abs() - eq.tolerance).max(0.0).powi(2)).sum())
    };

    let mut candidates: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(lambda);
    candidates.push((problem.starting_point(), sigma0.clone()));
    while candidates.len() < lambda {
        let x = bounds.iter().map(|b| r.random_range(b[0]..=b[1])).collect();
        candidates.push((x, sigma0.clone()));
    }

    let mut generations_quiet = 0;
    let mut last_best = f64::INFINITY;
    let mut converged = false;
    loop {
        let mut pop: Vec<Member> = Vec::with_capacity(lambda);
        for (x, sigma) in candidates.drain(..) {
            let Some(f) = rec.eval(&x) else { break };
            let f = if f.is_nan() { f64::INFINITY } else { f };
            let phi = penalty(&x);
            pop.push(Member { x, sigma, f, phi });
        }
        if pop.len() < lambda {
            break;
        }
        rank(&mut pop, &mut r);
        pop.truncate(mu);

        let best = rec.best_f();
        if best < last_best - spec.f_tol * best.abs().max(1e-300) {
            last_best = best;
            generations_quiet = 0;
        } else {
            generations_quiet += 1;
        }
        let spread = pop
            .iter()
            .flat_map(|m| m.sigma.iter())
            .fold(0.0f64, |a, s| a.max(*s));
        if spread < spec.x_tol || generations_quiet > 1000 {
            converged = true;
            break;
        }

        for k in 0..lambda {
            let i = k % mu;
            let parent = &pop[i];
            if k < mu - 1 {
                // differential variation towards the best member
                let x: Vec<f64> = (0..n).map(|j| parent.x[j] + GAMMA * (pop[0].x[j] - pop[i + 1].x[j])).collect();
                if x.iter().zip(bounds).all(|(v, b)| *v >= b[0] && *v <= b[1]) {
                    candidates.push((x, parent.sigma.clone()));
                    continue;
                }
            }
            let global: f64 = r.sample(StandardNormal);
            let sigma_new: Vec<f64> = parent
                .sigma
                .iter()
                .map(|s| {
                    let local: f64 = r.sample(StandardNormal);
                    s * (tau_p * global + tau * local).exp()
                })
                .collect();
            let mut x = parent.x.clone();
            for j in 0..n {
                let mut v = x[j];
                for _ in 0..RETRIES {
                    let z: f64 = r.sample(StandardNormal);
                    v = parent.x[j] + sigma_new[j] * z;
                    if v >= bounds[j][0] && v <= bounds[j][1] {
                        break;
                    }
                }
                x[j] = v.clamp(bounds[j][0], bounds[j][1]);
            }
            let sigma: Vec<f64> = parent
                .sigma
                .iter()
                .zip(&sigma_new)
                .map(|(s, sn)| s + SMOOTHING * (sn - s))
                .collect();
            candidates.push((x, sigma));
        }
    }
    rec.finish(Method::Isres, converged)
}

/// Stochastic bubble-sort ranking.
fn rank(pop: &mut [Member], r: &mut rand_chacha::ChaCha8Rng) {
    let len = pop.len();
    for _ in 0..len {
        let mut swapped = false;
        for j in 0..len - 1 {
            let (a, b) = (&pop[j], &pop[j + 1]);
            let u: f64 = r.random();
            let swap = if (a.phi == 0.0 && b.phi == 0.0) || u < PF {
                a.f > b.f
            } else {
                a.phi > b.phi
            };
            if swap {
                pop.swap(j, j + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_5d() {
        let p = ObjectiveProblem::new(5, |x| x.iter().map(|v| v * v).sum())
            .unwrap()
            .with_bounds(vec![[-3.0, 2.0]; 5])
            .unwrap();
        let rep = run(&p, &OptimiserSpec::new(Method::Isres, 30_000).with_seed(1));
        assert!(rep.best_f <= 1e-4, "{}", rep.best_f);
    }

    #[test]
    fn equality_on_a_line() {
        let p = ObjectiveProblem::new(2, |x| x[0] * x[0] + x[1] * x[1])
            .unwrap()
            .with_bounds(vec![[-2.0, 2.0]; 2])
            .unwrap()
            .with_equality(1, 1e-6, |x| vec![x[0] + x[1] - 1.0])
            .unwrap();
        let rep = run(&p, &OptimiserSpec::new(Method::Isres, 50_000).with_seed(3));
        assert!(rep.feasible);
        assert!((rep.best_f - 0.5).abs() < 1e-3, "{rep:?}");
        assert!((rep.best_x[0] - 0.5).abs() < 3e-2);
    }

    #[test]
    fn same_seed_same_report() {
        let p = ObjectiveProblem::new(3, |x| (x[0] - 0.2).powi(2) + x[1].abs() + (x[2] * 3.0).sin())
            .unwrap()
            .with_bounds(vec![[-1.0, 1.0]; 3])
            .unwrap();
        let spec = OptimiserSpec::new(Method::Isres, 2000).with_seed(9);
        assert!(run(&p, &spec).same_outcome(&run(&p, &spec)));
    }
}
