//! Dense two-phase tableau simplex for small linear programs
//! `min cᵀz  s.t.  A z ≥ b,  0 ≤ z ≤ u`, with Bland's anti-cycling rule.

const EPS: f64 = 1e-11;

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        self.t[row].iter_mut().for_each(|v| *v /= p);
        let prow = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                r.iter_mut().zip(&prow).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        self.basis[row] = col;
    }

    /// Minimises `cost·x` over the current basis; columns at or beyond
    /// `allowed` never enter. Returns false if unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: usize) -> bool {
        for _ in 0..50_000 {
            // reduced costs
            let mut enter = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for (i, &b) in self.basis.iter().enumerate() {
                    rc -= cost[b] * self.t[i][j];
                }
                if rc < -EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(col) = enter else { return true };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > EPS {
                    let ratio = self.t[i][rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else { return false };
            self.pivot(row, col);
        }
        true
    }
}

/// Solves the program; `None` if it is infeasible or unbounded.
pub(crate) fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64], upper: &[f64]) -> Option<Vec<f64>> {
    let nz = c.len();
    let bounded: Vec<usize> = (0..nz).filter(|&j| upper[j].is_finite()).collect();
    let m = a.len() + bounded.len();
    // columns: z | surplus (one per ≥ row) | slack (one per upper bound) | artificial
    let n_sur = a.len();
    let n_sl = bounded.len();
    let base = nz + n_sur + n_sl;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_rows = Vec::new();
    for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
        let mut r = vec![0.0; base];
        // aᵀz − s = b
        r[..nz].copy_from_slice(ai);
        r[nz + i] = -1.0;
        let mut rhs = *bi;
        if rhs <= 0.0 {
            r.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
            basis.push(nz + i);
        } else {
            art_rows.push(rows.len());
            basis.push(usize::MAX);
        }
        r.push(rhs);
        rows.push(r);
    }
    for (k, &j) in bounded.iter().enumerate() {
        let mut r = vec![0.0; base];
        r[j] = 1.0;
        r[nz + n_sur + k] = 1.0;
        r.push(upper[j]);
        rows.push(r);
        basis.push(nz + n_sur + k);
    }
    let cols = base + art_rows.len();
    for r in rows.iter_mut() {
        let rhs = r.pop().unwrap();
        r.resize(cols, 0.0);
        r.push(rhs);
    }
    for (k, &i) in art_rows.iter().enumerate() {
        rows[i][base + k] = 1.0;
        basis[i] = base + k;
    }
    let mut tab = Tableau { t: rows, basis, cols };

    if !art_rows.is_empty() {
        let mut cost1 = vec![0.0; cols];
        cost1[base..].iter_mut().for_each(|v| *v = 1.0);
        tab.optimise(&cost1, cols);
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &bv)| bv >= base)
            .map(|(i, _)| tab.t[i][cols])
            .sum();
        let scale = 1.0 + b.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        if infeas > 1e-9 * scale {
            return None;
        }
        // drive remaining artificials out of the basis
        for i in 0..tab.t.len() {
            if tab.basis[i] >= base {
                if let Some(j) = (0..base).find(|&j| tab.t[i][j].abs() > EPS && !tab.basis.contains(&j)) {
                    tab.pivot(i, j);
                }
            }
        }
    }
    let mut cost2 = vec![0.0; cols];
    cost2[..nz].copy_from_slice(c);
    if !tab.optimise(&cost2, base) {
        return None;
    }
    let mut z = vec![0.0; nz];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < nz {
            z[bv] = tab.t[i][cols].max(0.0);
        }
    }
    for j in 0..nz {
        z[j] = z[j].min(upper[j]);
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_corner() {
        // min −z0 + z1 on [0,2]²
        let z = solve(&[-1.0, 1.0], &[], &[], &[2.0, 2.0]).unwrap();
        assert_eq!(z, vec![2.0, 0.0]);
    }

    #[test]
    fn covering_constraint() {
        // min z0 + 2 z1 s.t. z0 + z1 ≥ 1, z0 ≤ 0.4
        let z = solve(&[1.0, 2.0], &[vec![1.0, 1.0]], &[1.0], &[0.4, f64::INFINITY]).unwrap();
        assert!((z[0] - 0.4).abs() < 1e-12 && (z[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        assert!(solve(&[1.0], &[vec![1.0]], &[3.0], &[2.0]).is_none());
    }

    #[test]
    fn equality_pair() {
        // z0 − z1 = 0.5 written as two inequalities, min z0 + z1
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let z = solve(&[1.0, 1.0], &a, &[0.5, -0.5], &[2.0, 2.0]).unwrap();
        assert!((z[0] - 0.5).abs() < 1e-12 && z[1].abs() < 1e-12);
    }
}
