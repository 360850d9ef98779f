//! Exact k-nearest-neighbour search on 2D points with a balanced k-d tree.
//!
//! Distance ties are broken by the lower point index, so query results
//! (and everything assembled from them) are reproducible.

use std::cmp::Ordering;

use crate::error::{arg_err, Result};
use crate::parallel;
use crate::types::Point2;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Balanced median-split k-d tree over a fixed point set.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point2>,
    /// Point indices, grouped so that every leaf owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: &[Point2]) -> Result<Self> {
        if points.is_empty() {
            return arg_err("cannot build a k-d tree over zero points");
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return arg_err("k-d tree points must be finite");
        }
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        tree.build_node(0, points.len());
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for &i in &self.order[start..end] {
            for d in 0..2 {
                lo[d] = lo[d].min(self.points[i][d]);
                hi[d] = hi[d].max(self.points[i][d]);
            }
        }
        let dim = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        let pts = &self.points;
        self.order[start..end].sort_by(|&a, &b| pts[a][dim].total_cmp(&pts[b][dim]).then(a.cmp(&b)));
        let mid = start + (end - start) / 2;
        let value = self.points[self.order[mid]][dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Number of node levels from root to the deepest leaf.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Point indices in leaf order; each point appears exactly once.
    pub fn leaf_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => out.extend_from_slice(&self.order[start..end]),
                Node::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// The `k` nearest points to `query` as `(index, distance)`, ascending by
    /// distance with ties broken by lower index.
    pub fn knn(&self, query: Point2, k: usize) -> Result<Vec<(usize, f64)>> {
        self.check_k(k)?;
        let mut out = vec![(0, 0.0); k];
        self.knn_into(query, &mut Vec::with_capacity(k + 1), &mut out);
        Ok(out)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return arg_err(format!("k = {k} outside 1..={}", self.len()));
        }
        Ok(())
    }

    /// Fills `out` (length `k`) with the `k` nearest points to `q`.
    fn knn_into(&self, q: Point2, buf: &mut Vec<Candidate>, out: &mut [(usize, f64)]) {
        buf.clear();
        self.search(0, q, out.len(), buf);
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = (c.index, c.dist2.sqrt());
        }
    }

    /// `buf` stays sorted ascending and holds at most `k` candidates.
    fn search(&self, id: usize, q: Point2, k: usize, buf: &mut Vec<Candidate>) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let p = self.points[i];
                    let c = Candidate {
                        dist2: (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2),
                        index: i,
                    };
                    if buf.len() == k && c >= buf[k - 1] {
                        continue;
                    }
                    let pos = buf.partition_point(|b| *b < c);
                    buf.insert(pos, c);
                    buf.truncate(k);
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, buf);
                // points on the splitting plane may sit on either side
                if buf.len() < k || diff * diff <= buf[k - 1].dist2 {
                    self.search(far, q, k, buf);
                }
            }
        }
    }

    /// Batched queries, split into contiguous ranges across threads.
    pub fn knn_batch(&self, queries: &[Point2], k: usize, threads: usize) -> Result<Vec<Vec<(usize, f64)>>> {
        Ok(self.knn_batch_flat(queries, k, threads)?.chunks_exact(k).map(|c| c.to_vec()).collect())
    }

    /// Batched queries as one row-major `queries.len() × k` array.
    pub fn knn_batch_flat(&self, queries: &[Point2], k: usize, threads: usize) -> Result<Vec<(usize, f64)>> {
        self.check_k(k)?;
        let mut out = vec![(0, 0.0); queries.len() * k];
        parallel::par_rows(threads, &mut out, k, |i, row| {
            self.knn_into(queries[i], &mut Vec::with_capacity(k + 1), row);
        });
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

pub fn build_kdtree(points: &[Point2]) -> Result<KdTree> {
    KdTree::build(points)
}

pub fn knn_query(tree: &KdTree, query: Point2, k: usize) -> Result<Vec<(usize, f64)>> {
    tree.knn(query, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point2], q: Point2, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter().map(|(d, i)| (i, d.sqrt())).collect()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point2> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [r.random(), r.random()]).collect()
    }

    #[test]
    fn singleton() {
        let t = build_kdtree(&[[0.3, 0.4]]).unwrap();
        assert_eq!(t.knn([0.0, 0.0], 1).unwrap(), vec![(0, 0.5)]);
        assert!(build_kdtree(&[]).is_err());
    }

    #[test]
    fn corners_depth() {
        let t = build_kdtree(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(t.depth() <= 3);
    }

    #[test]
    fn depth_is_logarithmic_and_every_point_reachable() {
        let pts = random_points(1000, 1);
        let t = build_kdtree(&pts).unwrap();
        assert!(t.depth() <= (1000f64).log2().ceil() as usize + 1);
        let mut idx = t.leaf_indices();
        idx.sort_unstable();
        assert_eq!(idx, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn self_match_and_total_recall() {
        let pts = random_points(50, 2);
        let t = build_kdtree(&pts).unwrap();
        assert_eq!(t.knn(pts[17], 1).unwrap(), vec![(17, 0.0)]);
        let all = t.knn([0.5, 0.5], 50).unwrap();
        assert_eq!(all, brute(&pts, [0.5, 0.5], 50));
        assert!(t.knn([0.5, 0.5], 0).is_err());
        assert!(t.knn([0.5, 0.5], 51).is_err());
    }

    #[test]
    fn matches_brute_force() {
        let pts = random_points(1000, 3);
        let t = build_kdtree(&pts).unwrap();
        let queries = random_points(100, 4);
        let got = t.knn_batch(&queries, 16, 3).unwrap();
        for (q, g) in queries.iter().zip(&got) {
            assert_eq!(*g, brute(&pts, *q, 16));
        }
    }

    #[test]
    fn ties_resolved_by_index() {
        // duplicated and grid-aligned points give many equal distances
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                pts.push([i as f64, j as f64]);
            }
        }
        pts.extend_from_slice(&pts.clone()[..10]);
        let t = build_kdtree(&pts).unwrap();
        for q in [[2.5, 2.5], [0.0, 0.0], [3.0, 1.5]] {
            for k in [1, 4, 9, 20] {
                assert_eq!(t.knn(q, k).unwrap(), brute(&pts, q, k));
            }
        }
    }

    #[test]
    fn kth_distance_monotone_in_k() {
        let pts = random_points(200, 5);
        let t = build_kdtree(&pts).unwrap();
        let mut prev = 0.0;
        for k in 1..=200 {
            let d = t.knn([0.2, 0.9], k).unwrap()[k - 1].1;
            assert!(d >= prev);
            prev = d;
        }
    }
}
