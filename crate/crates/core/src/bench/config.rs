//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! seed = 7
//! threads = 1,2,4
//! out = results
//!
//! [problem]
//! kind = approx_grid        # approx_grid | approx_curve | denoise
//! side = 64
//! n_centres = 128
//! k = 32
//!
//! [methods]
//! list = praxis, lbfgs, direct_l+praxis
//! budget = 2000
//! ```
//!
//! Keys are addressed as `section.key`; keys before any header belong to
//! the top level. Unknown keys are rejected so typos do not pass silently.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::instances::{CurveKind, GridGenerator};
use crate::optim::{Method, OptimiserSpec};
use crate::rbf::{DEFAULT_CONSTRAINT_TOL, DEFAULT_LAMBDA};

/// Every accepted key with a one-line description, for `--help`.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for instances, starts and stochastic methods (default 0)"),
    ("threads", "comma-separated thread counts, sorted and deduplicated (default 1)"),
    ("out", "output directory (default current directory)"),
    ("problem.kind", "approx_grid | approx_curve | denoise (default approx_grid)"),
    ("problem.side", "grid side for approx_grid (default 64)"),
    ("problem.generator", "grid signal: sine_mix | peaks | random (default sine_mix)"),
    ("problem.n_centres", "number of RBF centres (default 128)"),
    ("problem.k", "neighbours per sample in the Gram matrix (default 32)"),
    ("problem.lambda", "ridge shift of the normal equations (default 1e-12)"),
    ("problem.curve", "circle | heart for approx_curve (default circle)"),
    ("problem.m", "curve samples for approx_curve (default 256)"),
    ("problem.tolerance", "curve equality tolerance (default 1e-6)"),
    ("problem.image", "PGM input for denoise; synthetic image when absent"),
    ("problem.image_side", "synthetic image side (default 128)"),
    ("problem.noise_variance", "speckle variance added to the denoise input (default 0.05)"),
    ("problem.alpha", "nuclear-norm weight (default 0.1)"),
    ("problem.nsv", "singular triples kept (default 64)"),
    ("problem.write_image", "write denoised PGMs: true | false (default true)"),
    ("methods.list", "comma-separated methods; a+b chains a global and a local method"),
    ("methods.budget", "evaluation budget per method (default 2000)"),
    ("methods.time_limit", "seconds per method (default none)"),
    ("methods.x_tol", "step tolerance (default 1e-8)"),
    ("methods.f_tol", "relative objective tolerance (default 1e-12)"),
    ("methods.gradient", "denoise L-BFGS gradient: analytic | fd (default analytic)"),
    ("scale.repetitions", "timed repetitions per thread count (default 5)"),
    ("svd.nsv", "triples requested in svdcmp (default 50)"),
    ("svd.tol", "relative residual tolerance in svdcmp (default 1e-6)"),
    ("svd.dense", "dense CSV matrix for svdcmp; synthetic image when absent"),
    ("svd.dense_side", "synthetic dense matrix side (default 100)"),
    ("svd.laplacian_side", "grid Laplacian side for the sparse svdcmp instance (default 32)"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    ApproxGrid,
    ApproxCurve,
    Denoise,
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx_grid" => Ok(Self::ApproxGrid),
            "approx_curve" => Ok(Self::ApproxCurve),
            "denoise" => Ok(Self::Denoise),
            _ => Err(Error::Config(format!("unknown problem kind {s:?}"))),
        }
    }
}

/// One entry of the method list: a single optimiser or a global+local chain.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodEntry {
    Single(OptimiserSpec),
    Chain(OptimiserSpec, OptimiserSpec),
}

impl MethodEntry {
    pub fn name(&self) -> String {
        match self {
            MethodEntry::Single(s) => s.method.name().to_string(),
            MethodEntry::Chain(a, b) => format!("{}+{}", a.method.name(), b.method.name()),
        }
    }

    fn methods(&self) -> Vec<Method> {
        match self {
            MethodEntry::Single(s) => vec![s.method],
            MethodEntry::Chain(a, b) => vec![a.method, b.method],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub problem: ProblemKind,
    pub seed: u64,
    pub threads: Vec<usize>,
    pub out: PathBuf,
    pub side: usize,
    pub generator: GridGenerator,
    pub n_centres: usize,
    pub k: usize,
    pub lambda: f64,
    pub curve: CurveKind,
    pub m: usize,
    pub tolerance: f64,
    pub image: Option<PathBuf>,
    pub image_side: usize,
    pub noise_variance: f64,
    pub alpha: f64,
    pub nsv: usize,
    pub write_image: bool,
    pub methods: Vec<MethodEntry>,
    pub analytic_gradient: bool,
    pub repetitions: usize,
    pub svd_nsv: usize,
    pub svd_tol: f64,
    pub svd_dense: Option<PathBuf>,
    pub svd_dense_side: usize,
    pub laplacian_side: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let budget = 2000;
        Self {
            problem: ProblemKind::ApproxGrid,
            seed: 0,
            threads: vec![1],
            out: PathBuf::from("."),
            side: 64,
            generator: GridGenerator::SineMix,
            n_centres: 128,
            k: 32,
            lambda: DEFAULT_LAMBDA,
            curve: CurveKind::Circle,
            m: 256,
            tolerance: DEFAULT_CONSTRAINT_TOL,
            image: None,
            image_side: 128,
            noise_variance: 0.05,
            alpha: 0.1,
            nsv: 64,
            write_image: true,
            methods: [Method::Praxis, Method::Lbfgs]
                .into_iter()
                .map(|m| MethodEntry::Single(OptimiserSpec::new(m, budget)))
                .collect(),
            analytic_gradient: true,
            repetitions: 5,
            svd_nsv: 50,
            svd_tol: 1e-6,
            svd_dense: None,
            svd_dense_side: 100,
            laplacian_side: 32,
        }
    }
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().or_else(|_| cfg_err(format!("{key}: cannot parse {v:?}")))
}

/// Parses a comma-separated thread list; sorted, deduplicated, all positive.
pub fn parse_threads(s: &str) -> Result<Vec<usize>> {
    let mut t = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let v: usize = parse_value("threads", tok)?;
        if v == 0 {
            return cfg_err("thread counts must be positive");
        }
        t.push(v);
    }
    if t.is_empty() {
        return cfg_err("empty thread list");
    }
    t.sort_unstable();
    t.dedup();
    Ok(t)
}

/// Raw `section.key → value` pairs; duplicate keys are an error.
pub fn parse_pairs(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: &str| Error::Parse {
            path: origin.to_path_buf(),
            line: no + 1,
            msg: msg.to_string(),
        };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| perr("unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| perr("expected key = value"))?;
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(perr(&format!("duplicate key {key}")));
        }
    }
    Ok(out)
}

impl BenchConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_str_with_origin(&text, path)
    }

    pub fn from_str_with_origin(text: &str, origin: &Path) -> Result<Self> {
        let pairs = parse_pairs(text, origin)?;
        let mut c = Self::default();
        let (mut list, mut budget, mut time_limit) = (None, 2000usize, None);
        let (mut x_tol, mut f_tol) = (1e-8, 1e-12);
        for (key, v) in &pairs {
            let key = key.as_str();
            match key {
                "seed" => c.seed = parse_value(key, v)?,
                "threads" => c.threads = parse_threads(v)?,
                "out" => c.out = PathBuf::from(v),
                "problem.kind" => c.problem = v.parse()?,
                "problem.side" => c.side = parse_value(key, v)?,
                "problem.generator" => c.generator = v.parse()?,
                "problem.n_centres" => c.n_centres = parse_value(key, v)?,
                "problem.k" => c.k = parse_value(key, v)?,
                "problem.lambda" => c.lambda = parse_value(key, v)?,
                "problem.curve" => c.curve = v.parse()?,
                "problem.m" => c.m = parse_value(key, v)?,
                "problem.tolerance" => c.tolerance = parse_value(key, v)?,
                "problem.image" => c.image = Some(PathBuf::from(v)),
                "problem.image_side" => c.image_side = parse_value(key, v)?,
                "problem.noise_variance" => c.noise_variance = parse_value(key, v)?,
                "problem.alpha" => c.alpha = parse_value(key, v)?,
                "problem.nsv" => c.nsv = parse_value(key, v)?,
                "problem.write_image" => c.write_image = parse_value(key, v)?,
                "methods.list" => list = Some(v.clone()),
                "methods.budget" => budget = parse_value(key, v)?,
                "methods.time_limit" => time_limit = Some(parse_value::<f64>(key, v)?),
                "methods.x_tol" => x_tol = parse_value(key, v)?,
                "methods.f_tol" => f_tol = parse_value(key, v)?,
                "methods.gradient" => {
                    c.analytic_gradient = match v.as_str() {
                        "analytic" => true,
                        "fd" => false,
                        _ => return cfg_err(format!("methods.gradient: expected analytic or fd, got {v:?}")),
                    }
                }
                "scale.repetitions" => c.repetitions = parse_value(key, v)?,
                "svd.nsv" => c.svd_nsv = parse_value(key, v)?,
                "svd.tol" => c.svd_tol = parse_value(key, v)?,
                "svd.dense" => c.svd_dense = Some(PathBuf::from(v)),
                "svd.dense_side" => c.svd_dense_side = parse_value(key, v)?,
                "svd.laplacian_side" => c.laplacian_side = parse_value(key, v)?,
                _ => return cfg_err(format!("unknown key {key:?}")),
            }
        }
        let make = |m: Method| {
            let mut s = OptimiserSpec::new(m, budget).with_tolerances(x_tol, f_tol);
            if let Some(t) = time_limit {
                s = s.with_time_limit(t);
            }
            s
        };
        if let Some(list) = list {
            c.methods = parse_methods(&list, make)?;
        } else {
            c.methods = c
                .methods
                .iter()
                .flat_map(|e| e.methods())
                .map(|m| MethodEntry::Single(make(m)))
                .collect();
        }
        c.validate()?;
        Ok(c)
    }

    /// Checks the invariants the commands rely on.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return cfg_err("at least one method is required");
        }
        if self.threads.is_empty() || self.threads.contains(&0) || !self.threads.windows(2).all(|w| w[0] < w[1]) {
            return cfg_err("thread counts must be positive and strictly increasing");
        }
        if self.repetitions == 0 {
            return cfg_err("scale.repetitions must be positive");
        }
        if !(self.svd_tol > 0.0) {
            return cfg_err("svd.tol must be positive");
        }
        Ok(())
    }

    /// Seed used for every method run.
    pub fn with_seed_applied(mut self) -> Self {
        let seed = self.seed;
        for e in self.methods.iter_mut() {
            match e {
                MethodEntry::Single(s) => s.seed = seed,
                MethodEntry::Chain(a, b) => {
                    a.seed = seed;
                    b.seed = seed;
                }
            }
        }
        self
    }
}

fn parse_methods(list: &str, make: impl Fn(Method) -> OptimiserSpec) -> Result<Vec<MethodEntry>> {
    let mut out = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let entry = match tok.split_once('+') {
            Some((a, b)) => MethodEntry::Chain(make(a.trim().parse()?), make(b.trim().parse()?)),
            None => MethodEntry::Single(make(tok.parse()?)),
        };
        out.push(entry);
    }
    if out.is_empty() {
        return cfg_err("methods.list is empty");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<BenchConfig> {
        BenchConfig::from_str_with_origin(s, Path::new("test.cfg"))
    }

    #[test]
    fn defaults_and_sections() {
        let c = parse("seed = 3\nthreads = 4, 1,2\n[problem]\nkind = denoise # comment\nalpha=0.2\n[methods]\nlist = lbfgs, direct_l+praxis\nbudget = 50\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.threads, vec![1, 2, 4]);
        assert_eq!(c.problem, ProblemKind::Denoise);
        assert_eq!(c.alpha, 0.2);
        assert_eq!(c.methods.len(), 2);
        assert_eq!(c.methods[1].name(), "direct_l+praxis");
        match &c.methods[0] {
            MethodEntry::Single(s) => assert_eq!(s.budget, 50),
            _ => panic!(),
        }
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(parse("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(parse("threads = 0"), Err(Error::Config(_))));
        assert!(matches!(parse("[methods]\nlist = newton"), Err(Error::Config(_))));
        assert!(matches!(parse("seed = 1\nseed = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("[problem\nk = 3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("just text"), Err(Error::Parse { .. })));
    }
}
