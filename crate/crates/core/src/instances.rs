//! Deterministic instance generators: grid signals, grid Laplacians,
//! sampled curves, and synthetic test images.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Result};
use crate::types::{CurvePoints, DenseMatrix, DomainKind, Point2, Signal, SparseMatrixCSR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridGenerator {
    Peaks,
    SineMix,
    Random,
}

impl std::str::FromStr for GridGenerator {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peaks" => Ok(Self::Peaks),
            "sine-mix" | "sine_mix" => Ok(Self::SineMix),
            "random" => Ok(Self::Random),
            _ => arg_err(format!("unknown grid generator {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Circle,
    Heart,
}

impl std::str::FromStr for CurveKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(Self::Circle),
            "heart" => Ok(Self::Heart),
            _ => arg_err(format!("unknown curve kind {s:?}")),
        }
    }
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Grid coordinates on `[0,1]²`, row-major with `y` along rows.
pub fn grid_points(side: usize) -> Vec<Point2> {
    let h = 1.0 / (side - 1) as f64;
    (0..side)
        .flat_map(|i| (0..side).map(move |j| [j as f64 * h, i as f64 * h]))
        .collect()
}

fn peaks(p: Point2) -> f64 {
    let x = 6.0 * p[0] - 3.0;
    let y = 6.0 * p[1] - 3.0;
    3.0 * (1.0 - x).powi(2) * (-x * x - (y + 1.0).powi(2)).exp()
        - 10.0 * (x / 5.0 - x.powi(3) - y.powi(5)) * (-x * x - y * y).exp()
        - (-(x + 1.0).powi(2) - y * y).exp() / 3.0
}

/// Smooth random field: a few seeded plane waves.
pub(crate) struct SineMix {
    terms: Vec<(f64, f64, f64, f64)>,
}

impl SineMix {
    pub(crate) fn new(seed: u64) -> Self {
        let mut r = rng(seed);
        let terms = (0..4)
            .map(|_| {
                (
                    r.random_range(0.3..1.0),
                    r.random_range(-3.0..3.0),
                    r.random_range(-3.0..3.0),
                    r.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Self { terms }
    }

    pub(crate) fn eval(&self, p: Point2) -> f64 {
        self.terms
            .iter()
            .map(|(a, fx, fy, ph)| a * (2.0 * PI * (fx * p[0] + fy * p[1]) + ph).sin())
            .sum()
    }
}

pub fn make_grid_signal(side: usize, generator: GridGenerator, seed: u64) -> Result<Signal> {
    if side < 2 {
        return arg_err(format!("grid side must be at least 2, got {side}"));
    }
    let points = grid_points(side);
    let values = match generator {
        GridGenerator::Peaks => points.iter().map(|p| peaks(*p)).collect(),
        GridGenerator::SineMix => {
            let mix = SineMix::new(seed);
            points.iter().map(|p| mix.eval(*p)).collect()
        }
        GridGenerator::Random => {
            let mut r = rng(seed);
            points.iter().map(|_| r.random::<f64>()).collect()
        }
    };
    Signal::new(points, values, DomainKind::Grid { side })
}

/// Graph Laplacian of the `side × side` grid with 4-neighbour connectivity.
pub fn make_grid_laplacian(side: usize) -> Result<SparseMatrixCSR> {
    if side < 2 {
        return arg_err(format!("grid side must be at least 2, got {side}"));
    }
    let n = side * side;
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    row_offsets.push(0);
    for i in 0..side {
        for j in 0..side {
            let id = i * side + j;
            let mut nbrs = Vec::with_capacity(4);
            if i > 0 {
                nbrs.push(id - side);
            }
            if j > 0 {
                nbrs.push(id - 1);
            }
            if j + 1 < side {
                nbrs.push(id + 1);
            }
            if i + 1 < side {
                nbrs.push(id + side);
            }
            let degree = nbrs.len() as f64;
            let mut placed_diag = false;
            for nb in nbrs {
                if nb > id && !placed_diag {
                    cols.push(id);
                    vals.push(degree);
                    placed_diag = true;
                }
                cols.push(nb);
                vals.push(-1.0);
            }
            if !placed_diag {
                cols.push(id);
                vals.push(degree);
            }
            row_offsets.push(cols.len());
        }
    }
    Ok(SparseMatrixCSR::from_raw_unchecked(n, n, row_offsets, cols, vals))
}

pub(crate) fn curve_point(kind: CurveKind, t: f64) -> Point2 {
    match kind {
        CurveKind::Circle => [t.cos(), t.sin()],
        CurveKind::Heart => {
            let s = t.sin();
            [
                16.0 * s * s * s / 17.0,
                (13.0 * t.cos() - 5.0 * (2.0 * t).cos() - 2.0 * (3.0 * t).cos() - (4.0 * t).cos())
                    / 17.0,
            ]
        }
    }
}

/// `m` points uniform in parameter on a closed curve; the seed only shifts
/// the starting phase.
pub fn sample_curve(kind: CurveKind, m: usize, seed: u64) -> Result<CurvePoints> {
    if m < 8 {
        return arg_err(format!("need at least 8 curve samples, got {m}"));
    }
    let step = 2.0 * PI / m as f64;
    let phase = rng(seed).random::<f64>() * step;
    let points = (0..m).map(|i| curve_point(kind, phase + i as f64 * step)).collect();
    CurvePoints::new(points, true)
}

/// Piecewise-smooth greyscale test image in `[0,1]`: a soft gradient with
/// a few seeded discs and rectangles.
pub fn make_test_image(side: usize, seed: u64) -> Result<DenseMatrix> {
    if side < 2 {
        return arg_err(format!("image side must be at least 2, got {side}"));
    }
    let mut r = rng(seed);
    let discs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                r.random_range(0.2..0.8),
                r.random_range(0.2..0.8),
                r.random_range(0.08..0.2),
                r.random_range(0.2..0.5),
            )
        })
        .collect();
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..2)
        .map(|_| {
            let x0 = r.random_range(0.05..0.6);
            let y0 = r.random_range(0.05..0.6);
            (x0, y0, x0 + r.random_range(0.1..0.35), y0 + r.random_range(0.1..0.35), r.random_range(-0.3..0.3))
        })
        .collect();
    let h = 1.0 / (side - 1) as f64;
    let mut img = DenseMatrix::zeros(side, side);
    for i in 0..side {
        for j in 0..side {
            let (x, y) = (j as f64 * h, i as f64 * h);
            let mut v = 0.25 + 0.2 * x + 0.1 * y;
            for (cx, cy, rad, amp) in &discs {
                if (x - cx).powi(2) + (y - cy).powi(2) <= rad * rad {
                    v += amp;
                }
            }
            for (x0, y0, x1, y1, amp) in &rects {
                if (*x0..=*x1).contains(&x) && (*y0..=*y1).contains(&y) {
                    v += amp;
                }
            }
            img.set(i, j, v.clamp(0.0, 1.0));
        }
    }
    Ok(img)
}

/// Multiplicative uniform speckle: `f·(1 + n)` with `n ~ U(-a, a)`,
/// `a² / 3 = variance`, clamped back to `[0,1]`.
pub fn speckle_noise(img: &DenseMatrix, variance: f64, seed: u64) -> Result<DenseMatrix> {
    if !(variance >= 0.0) {
        return arg_err("noise variance must be non-negative");
    }
    let a = (3.0 * variance).sqrt();
    let mut r = rng(seed);
    let mut out = img.clone();
    for v in out.data_mut() {
        let n = if a > 0.0 { r.random_range(-a..a) } else { 0.0 };
        *v = (*v * (1.0 + n)).clamp(0.0, 1.0);
    }
    Ok(out)
}
