use crate::error::{arg_err, Result};
use crate::neighbors::KdTree;
use crate::types::{CurvePoints, Point2};

/// Polyline vertices per spline segment.
const DENSITY: usize = 100;

/// Closed interpolating curve: a periodic cubic spline in chord-length
/// parameter, plus a dense polyline for distance queries.
#[derive(Debug, Clone)]
pub struct Curve {
    control: Vec<Point2>,
    /// `knots[i]` is the parameter of control point `i`; `knots[n]` the period.
    knots: Vec<f64>,
    /// Second derivatives at the knots, per coordinate.
    m2: [Vec<f64>; 2],
    polyline: Vec<Point2>,
    tree: KdTree,
    max_seg: f64,
    /// +1 for counter-clockwise orientation, −1 otherwise.
    orientation: f64,
}

/// Solves the cyclic tridiagonal system with sub/super diagonals `lo`, `up`
/// (`lo[0]` couples row 0 to row n−1, `up[n−1]` couples row n−1 to row 0).
fn solve_cyclic(lo: &[f64], diag: &[f64], up: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = up[n - 1];
    let beta = lo[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lo, &bb, up, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lo, &bb, up, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(a, b)| a - fact * b).collect()
}

fn solve_tridiagonal(lo: &[f64], diag: &[f64], up: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = up[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - lo[i] * c[i - 1];
        c[i] = up[i] / den;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

impl Curve {
    pub fn control_points(&self) -> &[Point2] {
        &self.control
    }

    pub fn period(&self) -> f64 {
        self.knots[self.control.len()]
    }

    /// Parameter of control point `i`.
    pub fn knot(&self, i: usize) -> f64 {
        self.knots[i]
    }

    pub fn polyline(&self) -> &[Point2] {
        &self.polyline
    }

    /// Spline point at parameter `t` (taken modulo the period).
    pub fn eval(&self, t: f64) -> Point2 {
        let n = self.control.len();
        let t = t.rem_euclid(self.period());
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        };
        self.eval_segment(i, t - self.knots[i])
    }

    fn eval_segment(&self, i: usize, u: f64) -> Point2 {
        let n = self.control.len();
        let j = (i + 1) % n;
        let h = self.knots[i + 1] - self.knots[i];
        let w = h - u;
        let mut out = [0.0; 2];
        for (d, o) in out.iter_mut().enumerate() {
            let (mi, mj) = (self.m2[d][i], self.m2[d][j]);
            let (yi, yj) = (self.control[i][d], self.control[j][d]);
            *o = mi * w.powi(3) / (6.0 * h)
                + mj * u.powi(3) / (6.0 * h)
                + (yi / h - mi * h / 6.0) * w
                + (yj / h - mj * h / 6.0) * u;
        }
        out
    }

    /// Closest point on the polyline and its segment index.
    fn closest(&self, p: Point2) -> (f64, Point2, usize) {
        let nv = self.polyline.len();
        let mut k = 8.min(nv);
        let hits = loop {
            let hits = self.tree.knn(p, k).expect("k within range");
            let reach = hits[0].1 + self.max_seg;
            if k == nv || hits[k - 1].1 > reach {
                break hits;
            }
            k = (2 * k).min(nv);
        };
        let reach = hits[0].1 + self.max_seg;
        let mut best = (f64::INFINITY, p, 0);
        for &(v, d) in &hits {
            if d > reach {
                break;
            }
            for s in [(v + nv - 1) % nv, v] {
                let a = self.polyline[s];
                let b = self.polyline[(s + 1) % nv];
                let (dist, q) = point_segment(p, a, b);
                if dist < best.0 || (dist == best.0 && s < best.2) {
                    best = (dist, q, s);
                }
            }
        }
        best
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance(&self, p: Point2) -> f64 {
        self.closest(p).0
    }

    /// Distance with sign: negative inside the closed curve.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        let (d, q, s) = self.closest(p);
        if d == 0.0 {
            return 0.0;
        }
        let nv = self.polyline.len();
        let a = self.polyline[s];
        let b = self.polyline[(s + 1) % nv];
        let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
        // at a vertex, the two adjacent tangents are averaged
        let (tx, ty) = if q == a || q == b {
            let (v, w) = if q == a { ((s + nv - 1) % nv, s) } else { (s, (s + 1) % nv) };
            let pa = self.polyline[v];
            let pb = self.polyline[(v + 1) % nv];
            let pc = self.polyline[(w + 1) % nv];
            let t1 = unit(pb[0] - pa[0], pb[1] - pa[1]);
            let t2 = unit(pc[0] - pb[0], pc[1] - pb[1]);
            (t1.0 + t2.0, t1.1 + t2.1)
        } else {
            (tx, ty)
        };
        let cross = tx * (p[1] - q[1]) - ty * (p[0] - q[0]);
        // left of a counter-clockwise tangent is inside
        if cross * self.orientation > 0.0 {
            -d
        } else {
            d
        }
    }
}

fn unit(x: f64, y: f64) -> (f64, f64) {
    let n = x.hypot(y);
    (x / n, y / n)
}

fn point_segment(p: Point2, a: Point2, b: Point2) -> (f64, Point2) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        [a[0] + t * dx, a[1] + t * dy]
    };
    ((p[0] - q[0]).hypot(p[1] - q[1]), q)
}

/// Periodic cubic spline through the samples, parameterised by chord length.
pub fn fit_interpolating_curve(samples: &CurvePoints) -> Result<Curve> {
    if !samples.closed() {
        return arg_err("interpolating curve needs closed samples");
    }
    let pts = samples.points();
    let n = pts.len();
    if n < 4 {
        return arg_err(format!("need at least 4 samples, got {n}"));
    }
    let mut knots = Vec::with_capacity(n + 1);
    knots.push(0.0);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let h = (b[0] - a[0]).hypot(b[1] - a[1]);
        if h == 0.0 {
            return arg_err(format!("samples {i} and {} coincide", (i + 1) % n));
        }
        knots.push(knots[i] + h);
    }
    let h: Vec<f64> = (0..n).map(|i| knots[i + 1] - knots[i]).collect();
    let lo: Vec<f64> = (0..n).map(|i| h[(i + n - 1) % n]).collect();
    let up = h.clone();
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[(i + n - 1) % n] + h[i])).collect();
    let m2 = [0, 1].map(|d| {
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                6.0 * ((pts[next][d] - pts[i][d]) / h[i] - (pts[i][d] - pts[prev][d]) / h[prev])
            })
            .collect();
        solve_cyclic(&lo, &diag, &up, &rhs)
    });
    let mut curve = Curve {
        control: pts.to_vec(),
        knots,
        m2,
        polyline: Vec::new(),
        tree: KdTree::build(&[[0.0, 0.0]])?,
        max_seg: 0.0,
        orientation: 1.0,
    };
    let mut poly = Vec::with_capacity(n * DENSITY);
    for (i, hi) in h.iter().enumerate() {
        poly.push(pts[i]);
        for j in 1..DENSITY {
            poly.push(curve.eval_segment(i, hi * j as f64 / DENSITY as f64));
        }
    }
    let nv = poly.len();
    let mut area = 0.0;
    let mut max_seg = 0.0f64;
    for i in 0..nv {
        let a = poly[i];
        let b = poly[(i + 1) % nv];
        area += a[0] * b[1] - b[0] * a[1];
        max_seg = max_seg.max((b[0] - a[0]).hypot(b[1] - a[1]));
    }
    curve.orientation = if area >= 0.0 { 1.0 } else { -1.0 };
    curve.max_seg = max_seg;
    curve.tree = KdTree::build(&poly)?;
    curve.polyline = poly;
    Ok(curve)
}

/// Distance from each centre `μ_j` to the curve.
pub fn curve_distance_constraint(curve: &Curve, mu: &[f64]) -> Vec<f64> {
    mu.chunks_exact(2).map(|c| curve.distance([c[0], c[1]])).collect()
}

/// Signed distance from each centre (negative inside); its absolute value
/// is [`curve_distance_constraint`].
pub fn signed_curve_distance(curve: &Curve, mu: &[f64]) -> Vec<f64> {
    mu.chunks_exact(2).map(|c| curve.signed_distance([c[0], c[1]])).collect()
}
