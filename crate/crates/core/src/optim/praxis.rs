//! Principal-axis direction-set minimisation.
//!
//! Parabolic line searches run along a set of directions, each carrying an
//! estimate of the second derivative along it. After every sweep the net
//! displacement replaces the oldest direction; when the set drifts towards
//! linear dependence it is rotated onto the principal axes of the implied
//! quadratic model. Bounds enter through a quadratic penalty.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{bound_violation_sq, project, Method, ObjectiveProblem, OptimiserSpec, Recorder, RunReport};
use crate::instances::rng;
use crate::linalg::jacobi_svd;
use crate::types::DenseMatrix;

/// Bound-penalty weight is `PENALTY_SCALE·(|f(x0)| + 1)`.
const PENALTY_SCALE: f64 = 1e4;
const MAX_EXPANSIONS: usize = 30;
/// Penalty stiffening restarts before giving up on exact feasibility.
const MAX_RESTARTS: usize = 30;
/// Smallest singular value of the direction matrix before a rotation.
const DEPENDENCE_TOL: f64 = 1e-2;

struct Search<'r, 'p> {
    rec: &'r mut Recorder<'p>,
    bounds: Vec<[f64; 2]>,
    weight: f64,
    x: Vec<f64>,
    fx: f64,
}

/// Budget or time ran out.
struct Stop;

impl Search<'_, '_> {
    fn merit(&mut self, x: &[f64]) -> Result<f64, Stop> {
        let f = self.rec.eval(x).ok_or(Stop)?;
        let f = if f.is_nan() { f64::INFINITY } else { f };
        Ok(f + self.weight * bound_violation_sq(x, &self.bounds))
    }

    fn at(&mut self, dir: &[f64], lambda: f64) -> Result<f64, Stop> {
        let y: Vec<f64> = self.x.iter().zip(dir).map(|(a, b)| a + lambda * b).collect();
        self.merit(&y)
    }

    /// Minimises along `dir` starting with trial step `s`, using and
    /// refreshing the curvature estimate `d2`. Moves `x` to the best point
    /// found and returns the step taken.
    fn line(&mut self, dir: &[f64], d2: &mut f64, s: f64) -> Result<f64, Stop> {
        let f0 = self.fx;
        let mut pts: Vec<(f64, f64)> = vec![(0.0, f0)];
        let f1 = self.at(dir, s)?;
        pts.push((s, f1));
        let l2 = if *d2 > 0.0 {
            let g = (f1 - f0) / s - 0.5 * *d2 * s;
            let l = -g / *d2;
            if (l - s).abs() <= 1e-3 * s.abs() || l == 0.0 {
                if f1 < f0 {
                    2.0 * s
                } else {
                    -s
                }
            } else {
                l
            }
        } else if f1 < f0 {
            2.0 * s
        } else {
            -s
        };
        let f2 = self.at(dir, l2)?;
        pts.push((l2, f2));

        let c = curvature(pts[0], pts[1], pts[2]);
        if c > 0.0 && c.is_finite() {
            *d2 = c;
            let b = (f1 - f0) / s - 0.5 * c * s;
            let l3 = -b / c;
            let far = 64.0 * s.abs().max(l2.abs());
            let mut lc = l3.clamp(-far, far);
            let fresh = pts.iter().all(|p| (p.0 - lc).abs() > 1e-9 * s.abs());
            if fresh && lc.is_finite() {
                let mut fc = self.at(dir, lc)?;
                pts.push((lc, fc));
                // the fitted minimum lies further out: walk towards it while improving
                for _ in 0..MAX_EXPANSIONS {
                    if lc == l3 || fc > best(&pts[..pts.len() - 1]).1 {
                        break;
                    }
                    let next = if (4.0 * lc).abs() < l3.abs() { 4.0 * lc } else { l3 };
                    let fnext = self.at(dir, next)?;
                    pts.push((next, fnext));
                    if fnext >= fc {
                        break;
                    }
                    lc = next;
                    fc = fnext;
                }
            }
        } else {
            *d2 = 0.0;
            // keep stepping while the function keeps falling
            let (mut lb, mut fb) = best(&pts);
            if lb != 0.0 {
                for _ in 0..MAX_EXPANSIONS {
                    let l = 2.0 * lb;
                    let f = self.at(dir, l)?;
                    pts.push((l, f));
                    if f >= fb {
                        break;
                    }
                    lb = l;
                    fb = f;
                }
            }
        }
        let (lb, fb) = best(&pts);
        if fb < self.fx {
            self.x.iter_mut().zip(dir).for_each(|(a, b)| *a += lb * b);
            self.fx = fb;
            Ok(lb)
        } else {
            Ok(0.0)
        }
    }
}

fn best(pts: &[(f64, f64)]) -> (f64, f64) {
    let mut b = pts[0];
    for p in &pts[1..] {
        if p.1 < b.1 {
            b = *p;
        }
    }
    b
}

/// Second derivative of the parabola through three points.
fn curvature(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let s1 = (b.1 - a.1) / (b.0 - a.0);
    let s2 = (c.1 - a.1) / (c.0 - a.0);
    2.0 * (s1 - s2) / (b.0 - c.0)
}

fn random_unit(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv > 1e-3 {
            return v.into_iter().map(|a| a / nv).collect();
        }
    }
}

/// True when the unit directions are close to spanning a lower-dimensional
/// subspace, the failure mode of pure direction replacement.
fn nearly_dependent(v: &[Vec<f64>]) -> bool {
    let n = v.len();
    let mut m = DenseMatrix::zeros(n, n);
    for (j, vj) in v.iter().enumerate() {
        m.set_column(j, vj);
    }
    let (_, sig, _) = jacobi_svd(&m);
    sig[n - 1] < DEPENDENCE_TOL
}

/// Rotates the directions onto the principal axes of the quadratic model
/// whose curvature along unit direction `v_i` is `d_i`.
fn principal_axes(v: &mut [Vec<f64>], d: &mut [f64]) {
    let n = v.len();
    let known: Vec<f64> = d.iter().copied().filter(|x| *x > 0.0).collect();
    if known.is_empty() {
        return;
    }
    let dmin = known.iter().copied().fold(f64::INFINITY, f64::min);
    let mut q = DenseMatrix::zeros(n, n);
    for (j, (vj, dj)) in v.iter().zip(d.iter()).enumerate() {
        let scale = 1.0 / (if *dj > 0.0 { *dj } else { dmin }).sqrt();
        for i in 0..n {
            q.set(i, j, vj[i] * scale);
        }
    }
    let (u, sig, _) = jacobi_svd(&q);
    let smax = sig[0];
    for j in 0..n {
        v[j] = u.column(j);
        let s = sig[j].max(1e-10 * smax);
        d[j] = 1.0 / (s * s);
    }
}

pub(crate) fn run(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> RunReport {
    let n = problem.dim;
    let bounds = problem.bounds.clone();
    let mut rec = Recorder::new(problem, spec);
    let mut r = rng(spec.seed);
    let x0 = problem.starting_point();
    let Some(f0) = rec.eval(&x0) else {
        return rec.finish(Method::Praxis, false);
    };
    let width = bounds
        .iter()
        .map(|b| b[1] - b[0])
        .filter(|w| w.is_finite())
        .fold(0.0f64, f64::max);
    let fallback = if width > 0.0 { 0.1 * width } else { 1.0 };
    // coordinate directions start with a tenth of their own width
    let h: Vec<f64> = bounds
        .iter()
        .map(|b| {
            let w = b[1] - b[0];
            if w.is_finite() && w > 0.0 {
                0.1 * w
            } else {
                fallback
            }
        })
        .collect();
    let mut weight = PENALTY_SCALE * (f0.abs() + 1.0);
    let mut x = x0;
    let mut fx = f0;
    let mut converged = false;
    let mut restarts = 0;

    loop {
        let mut search = Search {
            rec: &mut rec,
            bounds: bounds.clone(),
            weight,
            x: x.clone(),
            fx: fx + weight * bound_violation_sq(&x, &bounds),
        };
        let outcome = minimise(&mut search, n, &h, spec, &mut r);
        x = search.x;
        if outcome.is_none() {
            break;
        }
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let outside = x
            .iter()
            .zip(&bounds)
            .fold(0.0f64, |m, (v, b)| m.max(b[0] - v).max(v - b[1]));
        if outside <= spec.x_tol * scale || restarts == MAX_RESTARTS {
            converged = outside <= spec.x_tol * scale;
            break;
        }
        restarts += 1;
        // the penalised minimum lies outside the box: stiffen and restart
        weight *= 2.0;
        x = project(&x, &bounds);
        match rec.eval(&x) {
            Some(f) => fx = f,
            None => break,
        }
    }
    if bound_violation_sq(&x, &bounds) > 0.0 {
        rec.eval_unchecked(&project(&x, &bounds));
    }
    rec.finish(Method::Praxis, converged)
}

/// The direction-set iteration; `None` when the budget stopped it.
fn minimise(s: &mut Search<'_, '_>, n: usize, h: &[f64], spec: &OptimiserSpec, r: &mut ChaCha8Rng) -> Option<()> {
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut d = vec![0.0; n];
    let mut steps = h.to_vec();
    let mut quiet = 0;
    let mut illc = false;
    let mut sweeps = 0usize;
    loop {
        let floor = spec.x_tol * (1.0 + s.x.iter().fold(0.0f64, |m, a| m.max(a.abs())));
        let x_old = s.x.clone();
        let f_old = s.fx;
        for i in 0..n {
            let l = s.line(&v[i], &mut d[i], steps[i].max(floor)).ok()?;
            steps[i] = if l != 0.0 { l.abs() } else { 0.25 * steps[i] }.max(floor);
        }
        let u: Vec<f64> = s.x.iter().zip(&x_old).map(|(a, b)| a - b).collect();
        let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nu > floor {
            let dir: Vec<f64> = u.iter().map(|a| a / nu).collect();
            let mut dn = 0.0;
            let l = s.line(&dir, &mut dn, nu).ok()?;
            v.remove(0);
            d.remove(0);
            steps.remove(0);
            v.push(dir);
            d.push(dn);
            steps.push(l.abs().max(floor));
        }
        sweeps += 1;
        if sweeps % n == 0 && nearly_dependent(&v) {
            principal_axes(&mut v, &mut d);
            // principal axes mix directions, so share a common trial step
            let smean = steps.iter().sum::<f64>() / n as f64;
            steps.iter_mut().for_each(|st| *st = smean);
        }

        let gain = f_old - s.fx;
        let small = nu <= 2.0 * floor || gain <= spec.f_tol * s.fx.abs().max(1e-300);
        if small {
            quiet += 1;
            if quiet >= 2 {
                if illc {
                    return Some(());
                }
                // ill-conditioned: try a seeded random direction before stopping
                illc = true;
                quiet = 0;
                let dir = random_unit(r, n);
                let mut dz = 0.0;
                let step = steps.iter().copied().fold(floor, f64::max).max(10.0 * floor);
                let before = s.fx;
                s.line(&dir, &mut dz, step).ok()?;
                if s.fx >= before {
                    return Some(());
                }
            }
        } else {
            quiet = 0;
            illc = false;
        }
    }
}
