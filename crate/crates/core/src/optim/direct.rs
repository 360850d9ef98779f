//! Locally biased DIRECT on the unit hypercube.

use super::{Method, ObjectiveProblem, OptimiserSpec, Recorder, RunReport};

const EPSILON: f64 = 1e-4;
/// Rectangles are not divided past this many trisections per side.
const MAX_LEVEL: u32 = 34;

struct Rect {
    centre: Vec<f64>,
    /// Side of dimension `i` is `3^-level[i]`.
    level: Vec<u32>,
    f: f64,
}

impl Rect {
    fn min_level(&self) -> u32 {
        *self.level.iter().min().unwrap()
    }

    /// Longest side.
    fn size(&self) -> f64 {
        3f64.powi(-(self.min_level() as i32))
    }
}

fn to_box(u: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(v, b)| (b[0] + v * (b[1] - b[0])).clamp(b[0], b[1])).collect()
}

/// Indices of potentially optimal rectangles: the lowest-f rectangle of
/// each size class, filtered by the lower-right convex hull and the
/// `ε`-improvement test.
fn potentially_optimal(rects: &[Rect], fmin: f64) -> Vec<usize> {
    // best rectangle per size class, keyed by min level (larger level = smaller)
    let mut classes: Vec<(u32, usize)> = Vec::new();
    for (i, r) in rects.iter().enumerate() {
        let l = r.min_level();
        if l >= MAX_LEVEL {
            continue;
        }
        match classes.iter_mut().find(|c| c.0 == l) {
            Some(c) => {
                if r.f < rects[c.1].f {
                    c.1 = i;
                }
            }
            None => classes.push((l, i)),
        }
    }
    if classes.is_empty() {
        return Vec::new();
    }
    // ascending size
    classes.sort_by(|a, b| b.0.cmp(&a.0));
    let pts: Vec<(f64, f64, usize)> = classes.iter().map(|&(_, i)| (rects[i].size(), rects[i].f, i)).collect();
    let start = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.1 .2.cmp(&b.1 .2)))
        .map(|(k, _)| k)
        .unwrap();
    let mut hull: Vec<(f64, f64, usize)> = Vec::new();
    for &p in &pts[start..] {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let threshold = fmin - EPSILON * fmin.abs();
    let mut out = Vec::new();
    for k in 0..hull.len() {
        let (d, f, i) = hull[k];
        let ok = if k + 1 == hull.len() {
            true
        } else {
            let (d2, f2, _) = hull[k + 1];
            let slope = (f2 - f) / (d2 - d);
            f - slope * d <= threshold
        };
        if ok {
            out.push(i);
        }
    }
    out
}

pub(crate) fn run(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> RunReport {
    let n = problem.dim;
    let bounds = problem.bounds.clone();
    let mut rec = Recorder::new(problem, spec);
    let centre = vec![0.5; n];
    let Some(f0) = rec.eval(&to_box(&centre, &bounds)) else {
        return rec.finish(Method::DirectL, false);
    };
    let mut rects = vec![Rect {
        centre,
        level: vec![0; n],
        f: f0,
    }];
    let mut fmin = f0;
    let mut converged = false;

    'outer: loop {
        let selected = potentially_optimal(&rects, fmin);
        if selected.is_empty() {
            converged = true;
            break;
        }
        if selected.iter().all(|&i| rects[i].size() < spec.x_tol) {
            converged = true;
            break;
        }
        for idx in selected {
            let lmin = rects[idx].min_level();
            let dims: Vec<usize> = (0..n).filter(|&i| rects[idx].level[i] == lmin).collect();
            let delta = 3f64.powi(-(lmin as i32 + 1));
            let mut samples: Vec<(usize, f64, Vec<f64>, f64, Vec<f64>)> = Vec::with_capacity(dims.len());
            for &i in &dims {
                let mut cp = rects[idx].centre.clone();
                cp[i] += delta;
                let mut cm = rects[idx].centre.clone();
                cm[i] -= delta;
                let Some(fp) = rec.eval(&to_box(&cp, &bounds)) else { break 'outer };
                let Some(fm) = rec.eval(&to_box(&cm, &bounds)) else { break 'outer };
                fmin = fmin.min(fp).min(fm);
                samples.push((i, fp, cp, fm, cm));
            }
            // split along the dimension with the best sample first
            samples.sort_by(|a, b| a.1.min(a.3).total_cmp(&b.1.min(b.3)).then(a.0.cmp(&b.0)));
            for (i, fp, cp, fm, cm) in samples {
                rects[idx].level[i] += 1;
                let level = rects[idx].level.clone();
                rects.push(Rect {
                    centre: cp,
                    level: level.clone(),
                    f: fp,
                });
                rects.push(Rect { centre: cm, level, f: fm });
            }
        }
        if rec.exhausted() {
            break;
        }
    }
    rec.finish(Method::DirectL, converged)
}
