//! Constrained optimisation by linear approximations.
//!
//! A simplex of `n + 1` points carries linear models of the objective and
//! every constraint (`c ≥ 0` is feasible). Each step minimises the linear
//! model inside a box trust region of half-width `ρ/√n`, first reducing the
//! linearised violation and then the objective, and the step is judged by
//! the merit `f + μ·max violation`. Bounds are two linear constraints per
//! variable; each equality becomes two inequalities around a tolerance band.

use super::{lp, project, Method, ObjectiveProblem, OptimiserSpec, Recorder, RunReport};

/// Geometry thresholds relative to `ρ`.
const PARSIG: f64 = 0.25;
const PARETA: f64 = 1.1;
/// Objective value used in place of non-finite evaluations.
const F_SUBSTITUTE: f64 = 1e30;

struct Vertex {
    f: f64,
    c: Vec<f64>,
    resmax: f64,
}

/// Stopped by the budget or time limit.
struct Stop;

struct State<'r, 'p> {
    rec: &'r mut Recorder<'p>,
    n: usize,
    bounds: Vec<[f64; 2]>,
    band: f64,
    /// Pivot position.
    x0: Vec<f64>,
    /// `d[j]` is vertex `j + 1` minus the pivot.
    d: Vec<Vec<f64>>,
    /// Rows of the inverse of the matrix whose rows are `d[j]`.
    w: Vec<Vec<f64>>,
    /// `v[0]` is the pivot, `v[j + 1]` is vertex `j + 1`.
    v: Vec<Vertex>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl State<'_, '_> {
    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        let mut c = Vec::new();
        for (xi, b) in x.iter().zip(&self.bounds) {
            if b[0].is_finite() {
                c.push(xi - b[0]);
            }
            if b[1].is_finite() {
                c.push(b[1] - xi);
            }
        }
        if let Some(eq) = &self.rec.problem.equality {
            for h in (eq.residuals)(x) {
                c.push(self.band - h);
                c.push(self.band + h);
            }
        }
        c
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Vertex, Stop> {
        let f = self.rec.eval(x).ok_or(Stop)?;
        let f = if f.is_finite() { f } else { F_SUBSTITUTE };
        let c = self.constraints(x);
        let resmax = c.iter().fold(0.0f64, |m, ci| m.max(-ci));
        Ok(Vertex { f, c, resmax })
    }

    fn merit(&self, k: usize, parmu: f64) -> f64 {
        self.v[k].f + parmu * self.v[k].resmax
    }

    /// Builds the initial simplex around `x0` with edge `rho`.
    fn init(&mut self, rho: f64) -> Result<(), Stop> {
        let n = self.n;
        if self.v.is_empty() {
            let x0 = self.x0.clone();
            let v0 = self.evaluate(&x0)?;
            self.v.push(v0);
        } else {
            self.v.truncate(1);
        }
        self.d.clear();
        self.w.clear();
        for j in 0..n {
            let mut e = vec![0.0; n];
            // step towards the interior when the pivot sits on an upper bound
            let step = if self.x0[j] + rho > self.bounds[j][1] { -rho } else { rho };
            e[j] = step;
            let mut inv = vec![0.0; n];
            inv[j] = 1.0 / step;
            let x: Vec<f64> = self.x0.iter().zip(&e).map(|(a, b)| a + b).collect();
            let vx = self.evaluate(&x)?;
            self.d.push(e);
            self.w.push(inv);
            self.v.push(vx);
        }
        Ok(())
    }

    /// Moves the pivot to vertex `l` (1-based).
    fn swap_pivot(&mut self, l: usize) {
        let j = l - 1;
        let dl = self.d[j].clone();
        self.x0.iter_mut().zip(&dl).for_each(|(a, b)| *a += b);
        for (k, dk) in self.d.iter_mut().enumerate() {
            if k == j {
                dk.iter_mut().for_each(|v| *v = -*v);
            } else {
                dk.iter_mut().zip(&dl).for_each(|(a, b)| *a -= b);
            }
        }
        let mut sum = vec![0.0; self.n];
        for wk in &self.w {
            sum.iter_mut().zip(wk).for_each(|(a, b)| *a -= b);
        }
        self.w[j] = sum;
        self.v.swap(0, l);
    }

    fn select_pivot(&mut self, parmu: f64) -> bool {
        let mut best = 0;
        for k in 1..=self.n {
            let (mk, mb) = (self.merit(k, parmu), self.merit(best, parmu));
            if mk < mb || (mk == mb && parmu == 0.0 && self.v[k].resmax < self.v[best].resmax) {
                best = k;
            }
        }
        if best != 0 {
            self.swap_pivot(best);
            true
        } else {
            false
        }
    }

    /// Replaces vertex `j + 1` with `pivot + dnew`.
    fn replace(&mut self, j: usize, dnew: Vec<f64>, vert: Vertex) -> bool {
        let t = dot(&self.w[j], &dnew);
        if t.abs() < 1e-14 * norm(&self.w[j]) * norm(&dnew) || t == 0.0 {
            return false;
        }
        let wj: Vec<f64> = self.w[j].iter().map(|a| a / t).collect();
        for k in 0..self.n {
            if k != j {
                let s = dot(&self.w[k], &dnew);
                self.w[k].iter_mut().zip(&wj).for_each(|(a, b)| *a -= s * b);
            }
        }
        self.w[j] = wj;
        self.d[j] = dnew;
        self.v[j + 1] = vert;
        true
    }

    /// Largest deviation of `W·D` from the identity.
    fn inverse_error(&self) -> f64 {
        let mut e = 0.0f64;
        for (i, wi) in self.w.iter().enumerate() {
            for (k, dk) in self.d.iter().enumerate() {
                let target = if i == k { 1.0 } else { 0.0 };
                e = e.max((dot(wi, dk) - target).abs());
            }
        }
        e
    }

    fn sigma_eta(&self) -> (Vec<f64>, Vec<f64>) {
        let vsig = self.w.iter().map(|w| 1.0 / norm(w)).collect();
        let veta = self.d.iter().map(|d| norm(d)).collect();
        (vsig, veta)
    }

    /// Linear model gradients of the objective and each constraint.
    fn models(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut g = vec![0.0; n];
        let m = self.v[0].c.len();
        let mut a = vec![vec![0.0; n]; m];
        for j in 0..n {
            let df = self.v[j + 1].f - self.v[0].f;
            g.iter_mut().zip(&self.w[j]).for_each(|(gi, wi)| *gi += df * wi);
            for (k, ak) in a.iter_mut().enumerate() {
                let dc = self.v[j + 1].c[k] - self.v[0].c[k];
                ak.iter_mut().zip(&self.w[j]).for_each(|(ai, wi)| *ai += dc * wi);
            }
        }
        (g, a)
    }
}

/// Minimises the linear model over `‖d‖∞ ≤ r`: first the largest violation
/// of `c + A d ≥ 0`, then `gᵀd` without letting that violation grow.
fn trust_step(g: &[f64], a: &[Vec<f64>], c: &[f64], r: f64) -> Vec<f64> {
    let n = g.len();
    // d = r (z − 1), z ∈ [0, 2]; rows read aᵀz ≥ −c/r + Σa
    let beta: Vec<f64> = a.iter().zip(c).map(|(ak, ck)| -ck / r + ak.iter().sum::<f64>()).collect();
    let mut tau = 0.0;
    if c.iter().any(|ck| *ck < 0.0) {
        let mut cost = vec![0.0; n + 1];
        cost[n] = 1.0;
        let rows: Vec<Vec<f64>> = a
            .iter()
            .map(|ak| {
                let mut row = ak.clone();
                row.push(1.0);
                row
            })
            .collect();
        let mut upper = vec![2.0; n];
        upper.push(f64::INFINITY);
        match lp::solve(&cost, &rows, &beta, &upper) {
            Some(z) => tau = z[n],
            None => return vec![0.0; n],
        }
    }
    let scale = 1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let slack = tau + 1e-10 * scale;
    let b2: Vec<f64> = beta.iter().map(|b| b - slack).collect();
    match lp::solve(g, a, &b2, &vec![2.0; n]) {
        Some(z) => z.iter().map(|zi| r * (zi - 1.0)).collect(),
        None => vec![0.0; n],
    }
}

pub(crate) fn run(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> RunReport {
    let n = problem.dim;
    let bounds = problem.bounds.clone();
    let mut rec = Recorder::new(problem, spec);
    let width = bounds
        .iter()
        .map(|b| b[1] - b[0])
        .filter(|w| w.is_finite() && *w > 0.0)
        .fold(0.0f64, f64::max);
    let rhobeg = if width > 0.0 { 0.1 * width } else { 1.0 };
    let rhoend = spec.x_tol.min(rhobeg);
    let band = problem.equality.as_ref().map_or(0.0, |eq| 0.5 * eq.tolerance);
    let mut st = State {
        rec: &mut rec,
        n,
        bounds: bounds.clone(),
        band,
        x0: problem.starting_point(),
        d: Vec::new(),
        w: Vec::new(),
        v: Vec::new(),
    };
    let converged = iterate(&mut st, rhobeg, rhoend).unwrap_or(false);
    rec.finish(Method::Cobyla, converged)
}

/// Returns whether `ρ` reached its final value.
fn iterate(st: &mut State<'_, '_>, rhobeg: f64, rhoend: f64) -> Result<bool, Stop> {
    let n = st.n;
    let mut rho = rhobeg;
    let mut parmu = 0.0f64;
    let mut reinitialised = false;
    st.init(rho)?;
    loop {
        st.select_pivot(parmu);
        if st.inverse_error() > 0.1 {
            if reinitialised {
                return Ok(false);
            }
            reinitialised = true;
            st.init(rho)?;
            continue;
        }
        let (g, a) = st.models();
        let r = rho / (n as f64).sqrt();
        let dx = trust_step(&g, &a, &st.v[0].c, r);
        let short = dx.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 0.5 * r;

        let mut improved = false;
        if !short {
            let resnew = a
                .iter()
                .zip(&st.v[0].c)
                .fold(0.0f64, |m, (ak, ck)| m.max(-(ck + dot(ak, &dx))));
            let gd = dot(&g, &dx);
            let prerec = st.v[0].resmax - resnew;
            let barmu = if prerec > 0.0 { gd / prerec } else { 0.0 };
            if parmu < 1.5 * barmu {
                parmu = 2.0 * barmu;
                if st.select_pivot(parmu) {
                    continue;
                }
            }
            let prerem = parmu * prerec - gd;
            let xnew = project(&st.x0.iter().zip(&dx).map(|(a, b)| a + b).collect::<Vec<_>>(), &st.bounds);
            let dnew: Vec<f64> = xnew.iter().zip(&st.x0).map(|(a, b)| a - b).collect();
            let vnew = st.evaluate(&xnew)?;
            let phi_new = vnew.f + parmu * vnew.resmax;
            let (mut actrem, mut prerem) = (st.merit(0, parmu) - phi_new, prerem);
            if parmu == 0.0 && vnew.f == st.v[0].f {
                prerem = prerec;
                actrem = st.v[0].resmax - vnew.resmax;
            }
            let ratio = if prerem > 0.0 {
                actrem / prerem
            } else if actrem > 0.0 {
                1.0
            } else {
                -1.0
            };

            // choose the vertex the trial point replaces
            let (vsig, veta) = st.sigma_eta();
            let mut best = if actrem <= 0.0 { 1.0 } else { 0.0 };
            let mut jdrop = None;
            let mut edgmax = PARETA * rho;
            let mut far = None;
            for j in 0..n {
                let t = dot(&st.w[j], &dnew).abs();
                if t > best {
                    best = t;
                    jdrop = Some(j);
                }
                let sigbar = t * vsig[j];
                if sigbar >= PARSIG * rho || sigbar >= vsig[j] {
                    let e = if actrem > 0.0 {
                        norm(&dnew.iter().zip(&st.d[j]).map(|(a, b)| a - b).collect::<Vec<_>>())
                    } else {
                        veta[j]
                    };
                    if e > edgmax {
                        edgmax = e;
                        far = Some(j);
                    }
                }
            }
            if let Some(j) = far.or(jdrop) {
                st.replace(j, dnew, vnew);
            }
            improved = actrem > 0.0 && ratio >= 0.1;
        }
        if improved {
            continue;
        }

        // unsuccessful or short step: repair geometry, else shrink ρ
        let (vsig, veta) = st.sigma_eta();
        let worst_eta = (0..n).max_by(|&i, &j| veta[i].total_cmp(&veta[j])).unwrap();
        let worst_sig = (0..n).min_by(|&i, &j| vsig[i].total_cmp(&vsig[j])).unwrap();
        let l = if veta[worst_eta] > PARETA * rho {
            Some(worst_eta)
        } else if vsig[worst_sig] < PARSIG * rho {
            Some(worst_sig)
        } else {
            None
        };
        if let Some(l) = l {
            let temp = 0.5 * rho * vsig[l];
            let mut step: Vec<f64> = st.w[l].iter().map(|wi| temp * wi).collect();
            // side that predicts the lower merit
            let (mut cvmaxp, mut cvmaxm) = (0.0f64, 0.0f64);
            for (ak, ck) in a.iter().zip(&st.v[0].c) {
                let s = dot(ak, &step);
                cvmaxp = cvmaxp.max(-(ck + s));
                cvmaxm = cvmaxm.max(-(ck - s));
            }
            let gs = dot(&g, &step);
            if parmu * (cvmaxp - cvmaxm) > 2.0 * gs {
                step.iter_mut().for_each(|v| *v = -*v);
            }
            let xnew = project(&st.x0.iter().zip(&step).map(|(a, b)| a + b).collect::<Vec<_>>(), &st.bounds);
            let dnew: Vec<f64> = xnew.iter().zip(&st.x0).map(|(a, b)| a - b).collect();
            let vnew = st.evaluate(&xnew)?;
            if st.replace(l, dnew, vnew) {
                continue;
            }
        }
        if rho <= rhoend {
            return Ok(true);
        }
        rho *= 0.5;
        if rho <= 1.5 * rhoend {
            rho = rhoend;
        }
        if parmu > 0.0 {
            // reduce μ while keeping the merit ordering meaningful
            let mut denom = 0.0f64;
            let m = st.v[0].c.len();
            for k in 0..m {
                let (mut cmin, mut cmax) = (st.v[0].c[k], st.v[0].c[k]);
                for vx in &st.v[1..] {
                    cmin = cmin.min(vx.c[k]);
                    cmax = cmax.max(vx.c[k]);
                }
                if cmin < 0.5 * cmax {
                    let t = cmax.max(0.0) - cmin;
                    denom = if denom <= 0.0 { t } else { denom.min(t) };
                }
            }
            let fmin = st.v.iter().map(|vx| vx.f).fold(f64::INFINITY, f64::min);
            let fmax = st.v.iter().map(|vx| vx.f).fold(f64::NEG_INFINITY, f64::max);
            if denom == 0.0 {
                parmu = 0.0;
            } else if fmax - fmin < parmu * denom {
                parmu = (fmax - fmin) / denom;
            }
        }
    }
}
