use proptest::prelude::*;

use sigmin::denoise::{denoise_objective, threshold_bounds, DenoiseProblem};
use sigmin::instances::grid_points;
use sigmin::io::{encode_pgm, load_image_pgm};
use sigmin::linalg::{sparse_matvec, sparse_matvec_transpose, sparse_transpose};
use sigmin::neighbors::KdTree;
use sigmin::rbf::{approx_objective, RbfProblem};
use sigmin::{DenseMatrix, DomainKind, Point2, Signal, SparseMatrixCSR};

fn point() -> impl Strategy<Value = Point2> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| [x, y])
}

fn brute(points: &[Point2], q: Point2, k: usize) -> Vec<usize> {
    let mut d: Vec<(usize, f64)> =
        points.iter().enumerate().map(|(i, p)| (i, (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))).collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    d.into_iter().take(k).map(|(i, _)| i).collect()
}

fn triplets() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, f64)>)> {
    (1usize..12, 1usize..12).prop_flat_map(|(r, c)| {
        (Just(r), Just(c), prop::collection::vec((0..r, 0..c, -5.0..5.0f64), 0..40))
    })
}

fn dense_of(r: usize, c: usize, t: &[(usize, usize, f64)]) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(r, c);
    for &(i, j, v) in t {
        d.set(i, j, d.get(i, j) + v);
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_matches_brute_force(
        pts in prop::collection::vec(point(), 1..80),
        q in point(),
        k in 1usize..80,
    ) {
        let k = k.min(pts.len());
        let tree = KdTree::build(&pts).unwrap();
        let got: Vec<usize> = tree.knn(q, k).unwrap().into_iter().map(|(i, _)| i).collect();
        prop_assert_eq!(got, brute(&pts, q, k));
    }

    #[test]
    fn knn_distances_are_sorted(pts in prop::collection::vec(point(), 2..60), q in point()) {
        let tree = KdTree::build(&pts).unwrap();
        let d: Vec<f64> = tree.knn(q, pts.len()).unwrap().into_iter().map(|(_, d)| d).collect();
        prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn csr_from_triplets_sums_duplicates((r, c, t) in triplets()) {
        let a = SparseMatrixCSR::from_triplets(r, c, &t).unwrap();
        a.validate().unwrap();
        let d = dense_of(r, c, &t);
        prop_assert!(a.to_dense().max_abs_diff(&d) <= 1e-12);
        prop_assert!(a.row_offsets().windows(2).all(|w| w[0] <= w[1]));
        for i in 0..r {
            let (cols, _) = a.row(i);
            prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn csr_transpose_and_products_agree((r, c, t) in triplets(), x in prop::collection::vec(-1.0..1.0f64, 12)) {
        let a = SparseMatrixCSR::from_triplets(r, c, &t).unwrap();
        let at = sparse_transpose(&a);
        at.validate().unwrap();
        let y: Vec<f64> = x[..r].to_vec();
        let via_t = sparse_matvec(&at, &y, 1).unwrap();
        let direct = sparse_matvec_transpose(&a, &y).unwrap();
        for (p, q) in via_t.iter().zip(&direct) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
        let d = dense_of(r, c, &t);
        let ax = sparse_matvec(&a, &x[..c], 1).unwrap();
        for i in 0..r {
            let e: f64 = (0..c).map(|j| d.get(i, j) * x[j]).sum();
            prop_assert!((ax[i] - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn pgm_round_trip_within_half_a_level(
        vals in prop::collection::vec(0.0..=1.0f64, 12),
        maxval in prop::sample::select(vec![1usize, 15, 255, 1023, 65535]),
        binary in any::<bool>(),
    ) {
        let a = DenseMatrix::from_vec(3, 4, vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        std::fs::write(&path, encode_pgm(&a, maxval, binary).unwrap()).unwrap();
        let b = load_image_pgm(&path).unwrap();
        prop_assert_eq!((b.rows(), b.cols()), (3, 4));
        prop_assert!(a.max_abs_diff(&b) <= 0.5 / maxval as f64 + 1e-12);
    }
}

fn small_rbf() -> RbfProblem {
    let pts = grid_points(12);
    let vals = pts.iter().map(|p| (3.0 * p[0]).sin() * (2.0 * p[1]).cos()).collect();
    RbfProblem::new(Signal::new(pts, vals, DomainKind::Grid { side: 12 }).unwrap(), 6, 4, 1e-10, [[0.0, 1.0], [0.0, 1.0]])
        .unwrap()
}

fn small_denoise() -> DenoiseProblem {
    let img = DenseMatrix::from_vec(10, 10, (0..100).map(|i| 0.5 + 0.4 * ((i * 37 % 17) as f64 / 17.0 - 0.5)).collect())
        .unwrap();
    DenoiseProblem::new(img, 5, 0.2, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn approx_objective_ignores_centre_order(
        mu in prop::collection::vec(0.05..0.95f64, 12),
        perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let p = small_rbf();
        let shuffled: Vec<f64> = perm.iter().flat_map(|&i| [mu[2 * i], mu[2 * i + 1]]).collect();
        let (a, b) = (approx_objective(&mu, &p), approx_objective(&shuffled, &p));
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn approx_objective_is_nonnegative(mu in prop::collection::vec(0.0..=1.0f64, 12)) {
        let e = approx_objective(&mu, &small_rbf());
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn denoise_objective_is_convex(t in 0.0..=1.0f64, a in prop::collection::vec(0.0..=1.0f64, 5), b in prop::collection::vec(0.0..=1.0f64, 5)) {
        let p = small_denoise();
        let bounds = threshold_bounds(&p);
        let scale = |u: &[f64]| -> Vec<f64> { u.iter().zip(&bounds).map(|(x, bd)| bd[0] + x * (bd[1] - bd[0])).collect() };
        let (x, y) = (scale(&a), scale(&b));
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| t * p + (1.0 - t) * q).collect();
        let fz = denoise_objective(&z, &p).unwrap();
        let rhs = t * denoise_objective(&x, &p).unwrap() + (1.0 - t) * denoise_objective(&y, &p).unwrap();
        prop_assert!(fz <= rhs + 1e-10 * rhs.abs().max(1.0));
    }
}
