//! Bound- and equality-constrained minimisation behind one driver.
//!
//! Every method evaluates the objective through a [`Recorder`], which
//! enforces the evaluation budget and time limit, tracks the best feasible
//! point, and builds the best-so-far trace.

mod cobyla;
mod direct;
mod isres;
mod lbfgs;
mod lp;
mod praxis;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{arg_err, Error, Result};


pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Equality constraints `h(x) = 0`, satisfied when `|h_i(x)| ≤ tolerance`.
#[derive(Clone)]
pub struct EqualityConstraints {
    pub residuals: VectorFn,
    pub count: usize,
    pub tolerance: f64,
}

/// Objective, optional gradient, box bounds and optional equality
/// constraints, with a shared evaluation counter.
#[derive(Clone)]
pub struct ObjectiveProblem {
    pub dim: usize,
    objective: ScalarFn,
    pub gradient: Option<VectorFn>,
    pub bounds: Vec<[f64; 2]>,
    pub equality: Option<EqualityConstraints>,
    /// Starting point; defaults to the box centre (or 0 where unbounded).
    pub x0: Option<Vec<f64>>,
    counter: Arc<AtomicUsize>,
}

impl fmt::Debug for ObjectiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveProblem")
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .field("has_gradient", &self.gradient.is_some())
            .field("equality_count", &self.equality.as_ref().map(|e| e.count))
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

impl ObjectiveProblem {
    pub fn new(dim: usize, objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if dim == 0 {
            return arg_err("problem dimension must be at least 1");
        }
        Ok(Self {
            dim,
            objective: Arc::new(objective),
            gradient: None,
            bounds: vec![[f64::NEG_INFINITY, f64::INFINITY]; dim],
            equality: None,
            x0: None,
            counter: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn with_bounds(mut self, bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.len() != self.dim {
            return arg_err(format!("{} bounds for {} variables", bounds.len(), self.dim));
        }
        if bounds.iter().any(|b| !(b[0] <= b[1])) {
            return arg_err("bounds need lo <= hi");
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_equality(
        mut self,
        count: usize,
        tolerance: f64,
        h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(tolerance > 0.0) {
            return arg_err("constraint tolerance must be positive");
        }
        self.equality = Some(EqualityConstraints {
            residuals: Arc::new(h),
            count,
            tolerance,
        });
        Ok(self)
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim {
            return arg_err("starting point has the wrong length");
        }
        self.x0 = Some(x0);
        Ok(self)
    }

    /// Calls the objective, counting one evaluation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.counter.fetch_add(1, Ordering::Relaxed);
        (self.objective)(x)
    }

    pub fn evaluations(&self) -> usize {
        self.counter.load(Ordering::Relaxed)
    }

    pub fn reset_counter(&self) {
        self.counter.store(0, Ordering::Relaxed);
    }

    pub fn has_finite_bounds(&self) -> bool {
        self.bounds.iter().all(|b| b[0].is_finite() && b[1].is_finite())
    }

    pub fn starting_point(&self) -> Vec<f64> {
        match &self.x0 {
            Some(x) => project(x, &self.bounds),
            None => self
                .bounds
                .iter()
                .map(|b| match (b[0].is_finite(), b[1].is_finite()) {
                    (true, true) => 0.5 * (b[0] + b[1]),
                    (true, false) => b[0].max(0.0),
                    (false, true) => b[1].min(0.0),
                    (false, false) => 0.0,
                })
                .collect(),
        }
    }

    /// `Σ max(0, violation)²` over bounds and equality bands.
    pub fn violation_sq(&self, x: &[f64]) -> f64 {
        let mut v = bound_violation_sq(x, &self.bounds);
        if let Some(eq) = &self.equality {
            for h in (eq.residuals)(x) {
                v += (h.abs() - eq.tolerance).max(0.0).powi(2);
            }
        }
        v
    }

    /// Largest equality residual `max |h_i(x)|`, zero without constraints.
    pub fn max_equality_residual(&self, x: &[f64]) -> f64 {
        self.equality
            .as_ref()
            .map_or(0.0, |eq| (eq.residuals)(x).iter().fold(0.0, |m, h| m.max(h.abs())))
    }

    /// Inside the box and within the equality tolerance.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(v, b)| *v >= b[0] && *v <= b[1])
            && self
                .equality
                .as_ref()
                .is_none_or(|eq| (eq.residuals)(x).iter().all(|h| h.abs() <= eq.tolerance))
    }
}

pub(crate) fn bound_violation_sq(x: &[f64], bounds: &[[f64; 2]]) -> f64 {
    x.iter()
        .zip(bounds)
        .map(|(v, b)| {
            let d = (b[0] - v).max(v - b[1]).max(0.0);
            d * d
        })
        .sum()
}

pub(crate) fn project(x: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, b)| v.clamp(b[0], b[1])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    DirectL,
    Isres,
    Praxis,
    Lbfgs,
    Cobyla,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DirectL => "direct_l",
            Method::Isres => "isres",
            Method::Praxis => "praxis",
            Method::Lbfgs => "lbfgs",
            Method::Cobyla => "cobyla",
        }
    }

    pub fn supports_equality(self) -> bool {
        matches!(self, Method::Isres | Method::Cobyla)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "direct_l" | "directl" | "direct" => Ok(Method::DirectL),
            "isres" => Ok(Method::Isres),
            "praxis" => Ok(Method::Praxis),
            "lbfgs" | "l_bfgs" => Ok(Method::Lbfgs),
            "cobyla" => Ok(Method::Cobyla),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimiserSpec {
    pub method: Method,
    /// Maximum objective evaluations.
    pub budget: usize,
    pub time_limit: Option<f64>,
    pub seed: u64,
    pub x_tol: f64,
    pub f_tol: f64,
}

impl OptimiserSpec {
    pub fn new(method: Method, budget: usize) -> Self {
        Self {
            method,
            budget,
            time_limit: None,
            seed: 0,
            x_tol: 1e-8,
            f_tol: 1e-12,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tolerances(mut self, x_tol: f64, f_tol: f64) -> Self {
        self.x_tol = x_tol;
        self.f_tol = f_tol;
        self
    }

    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = Some(seconds);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return arg_err("budget must be at least 1");
        }
        if !(self.x_tol > 0.0 && self.f_tol > 0.0) {
            return arg_err("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: String,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub functional_count: usize,
    pub elapsed_seconds: f64,
    pub converged: bool,
    /// Whether `best_x` satisfies bounds and equality constraints.
    pub feasible: bool,
    /// `(evaluation index, best feasible f so far)`, recorded on improvement.
    pub trace: Vec<(usize, f64)>,
}

impl RunReport {
    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.method == other.method
            && bits(&self.best_x) == bits(&other.best_x)
            && self.best_f.to_bits() == other.best_f.to_bits()
            && self.functional_count == other.functional_count
            && self.converged == other.converged
            && self.feasible == other.feasible
            && self.trace.len() == other.trace.len()
            && self
                .trace
                .iter()
                .zip(&other.trace)
                .all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
    }
}

/// Budgeted evaluation with best-point bookkeeping.
pub(crate) struct Recorder<'a> {
    pub problem: &'a ObjectiveProblem,
    budget: usize,
    start: Instant,
    deadline: Option<f64>,
    pub count: usize,
    best: Option<(Vec<f64>, f64, bool, f64)>,
    trace: Vec<(usize, f64)>,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a ObjectiveProblem, spec: &OptimiserSpec) -> Self {
        Self {
            problem,
            budget: spec.budget,
            start: Instant::now(),
            deadline: spec.time_limit,
            count: 0,
            best: None,
            trace: Vec::new(),
        }
    }

    pub fn exhausted(&self) -> bool {
        self.count >= self.budget || self.deadline.is_some_and(|d| self.start.elapsed().as_secs_f64() >= d)
    }

    /// Evaluates `x` unless the budget or time limit is spent.
    pub fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        Some(self.eval_unchecked(x))
    }

    /// Evaluates regardless of the budget (the one allowed final call).
    pub fn eval_unchecked(&mut self, x: &[f64]) -> f64 {
        let f = self.problem.eval(x);
        self.count += 1;
        let feasible = self.problem.is_feasible(x);
        let viol = if feasible { 0.0 } else { self.problem.violation_sq(x) };
        let better = match &self.best {
            None => true,
            Some((_, bf, bfeas, bviol)) => match (feasible, *bfeas) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => f < *bf,
                (false, false) => viol < *bviol || (viol == *bviol && f < *bf),
            },
        };
        if better {
            self.best = Some((x.to_vec(), f, feasible, viol));
            if feasible && self.trace.last().is_none_or(|t| f < t.1) {
                self.trace.push((self.count, f));
            }
        }
        f
    }

    pub fn best_f(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.1)
    }

    pub fn finish(self, method: Method, converged: bool) -> RunReport {
        let elapsed_seconds = self.start.elapsed().as_secs_f64();
        let (best_x, best_f, feasible) = match self.best {
            Some((x, f, feas, _)) => (x, f, feas),
            None => (self.problem.starting_point(), f64::INFINITY, false),
        };
        let mut trace = self.trace;
        if trace.is_empty() && best_f.is_finite() {
            trace.push((self.count, best_f));
        }
        RunReport {
            method: method.name().to_string(),
            best_x,
            best_f,
            functional_count: self.count,
            elapsed_seconds,
            converged,
            feasible,
            trace,
        }
    }
}

/// Central-difference gradient with `h_i = 1e-6·(1 + |x_i|)`, one-sided
/// where a bound is closer than `h_i`. Costs `2·dim` evaluations.
pub(crate) fn fd_gradient(rec: &mut Recorder<'_>, x: &[f64]) -> Option<Vec<f64>> {
    let bounds = &rec.problem.bounds;
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        let hi = (x[i] + h).min(bounds[i][1]);
        let lo = (x[i] - h).max(bounds[i][0]);
        xp[i] = hi;
        let fp = rec.eval(&xp)?;
        xp[i] = lo;
        let fm = rec.eval(&xp)?;
        xp[i] = x[i];
        g[i] = if hi > lo { (fp - fm) / (hi - lo) } else { 0.0 };
    }
    Some(g)
}

fn check_dispatch(method: Method, problem: &ObjectiveProblem) -> Result<()> {
    if problem.equality.is_some() && !method.supports_equality() {
        return Err(Error::UnsupportedConstraints {
            method: method.name().to_string(),
            reason: "nonlinear constraints".to_string(),
        });
    }
    if matches!(method, Method::DirectL | Method::Isres) && !problem.has_finite_bounds() {
        return arg_err(format!("{method} needs finite bounds on every variable"));
    }
    Ok(())
}

/// Runs `spec.method` on `problem`. Unsupported method/constraint
/// combinations fail before any evaluation.
pub fn minimize(spec: &OptimiserSpec, problem: &ObjectiveProblem) -> Result<RunReport> {
    spec.validate()?;
    check_dispatch(spec.method, problem)?;
    Ok(match spec.method {
        Method::DirectL => direct::run(problem, spec),
        Method::Isres => isres::run(problem, spec),
        Method::Praxis => praxis::run(problem, spec),
        Method::Lbfgs => lbfgs::run(problem, spec),
        Method::Cobyla => cobyla::run(problem, spec),
    })
}

fn with_method(problem: &ObjectiveProblem, spec: &OptimiserSpec, method: Method) -> Result<RunReport> {
    let mut spec = spec.clone();
    spec.method = method;
    minimize(&spec, problem)
}

/// DIRECT-L with `spec` settings.
pub fn direct_l(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> Result<RunReport> {
    with_method(problem, spec, Method::DirectL)
}

/// ISRES with `spec` settings.
pub fn isres(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> Result<RunReport> {
    with_method(problem, spec, Method::Isres)
}

/// PRAXIS with `spec` settings.
pub fn praxis(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> Result<RunReport> {
    with_method(problem, spec, Method::Praxis)
}

/// L-BFGS with `spec` settings.
pub fn lbfgs(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> Result<RunReport> {
    with_method(problem, spec, Method::Lbfgs)
}

/// COBYLA with `spec` settings.
pub fn cobyla(problem: &ObjectiveProblem, spec: &OptimiserSpec) -> Result<RunReport> {
    with_method(problem, spec, Method::Cobyla)
}

/// `f(x) + weight·Σ max(0, violation)²` with no constraints left; shares the
/// evaluation counter with `problem`.
pub fn penalty_wrap(problem: &ObjectiveProblem, weight: f64) -> Result<ObjectiveProblem> {
    if !(weight > 0.0) {
        return arg_err("penalty weight must be positive");
    }
    let inner = problem.clone();
    let objective: ScalarFn = Arc::new(move |x: &[f64]| {
        let f = (inner.objective)(x);
        f + weight * inner.violation_sq(x)
    });
    Ok(ObjectiveProblem {
        dim: problem.dim,
        objective,
        gradient: None,
        bounds: vec![[f64::NEG_INFINITY, f64::INFINITY]; problem.dim],
        equality: None,
        x0: problem.x0.clone(),
        counter: problem.counter.clone(),
    })
}

/// Global search followed by a local refinement from its best point.
/// Counts add; the better of the two results is kept.
pub fn chain(global: &OptimiserSpec, local: &OptimiserSpec, problem: &ObjectiveProblem) -> Result<RunReport> {
    global.validate()?;
    local.validate()?;
    check_dispatch(global.method, problem)?;
    check_dispatch(local.method, problem)?;
    let g = minimize(global, problem)?;
    let mut p2 = problem.clone();
    p2.x0 = Some(g.best_x.clone());
    let l = minimize(local, &p2)?;
    let offset = g.functional_count;
    let mut trace = g.trace.clone();
    for (i, f) in &l.trace {
        if trace.last().is_none_or(|t| *f < t.1) {
            trace.push((offset + i, *f));
        }
    }
    let local_better = match (l.feasible, g.feasible) {
        (true, false) => true,
        (false, true) => false,
        _ => l.best_f < g.best_f,
    };
    let (best_x, best_f, feasible) = if local_better {
        (l.best_x, l.best_f, l.feasible)
    } else {
        (g.best_x, g.best_f, g.feasible)
    };
    Ok(RunReport {
        method: format!("{}+{}", g.method, l.method),
        best_x,
        best_f,
        functional_count: g.functional_count + l.functional_count,
        elapsed_seconds: g.elapsed_seconds + l.elapsed_seconds,
        converged: l.converged,
        feasible,
        trace,
    })
}
