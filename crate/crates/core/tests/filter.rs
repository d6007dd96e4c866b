use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermotopo::filter::{filter_chain_gradient, helmholtz_filter, HelmholtzFilter};
use thermotopo::{DensityField, Mesh};

fn dense(f: &HelmholtzFilter) -> DMatrix<f64> {
    let rows = f.operator().unwrap().to_dense();
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

#[test]
fn checkerboard_matches_dense_solve() {
    let mesh = Mesh::build_grid(32, 32, 8.0, 8.0).unwrap();
    let v: Vec<f64> = (0..mesh.n_elems())
        .map(|e| {
            let (i, j) = mesh.elem_ij(e);
            ((i + j) % 2) as f64
        })
        .collect();
    let r = 2.0 * mesh.dx();
    let f = HelmholtzFilter::new(&mesh, r).unwrap();
    let oracle = dense(&f).lu().solve(&DVector::from_vec(v.clone())).unwrap();
    let out = helmholtz_filter(&mesh, &DensityField::new(&mesh, v).unwrap(), r).unwrap();
    for (a, b) in out.values().iter().zip(oracle.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!(out.values().iter().all(|t| (t - 0.5).abs() < 0.05));
    assert!((out.mean() - 0.5).abs() < 1e-8);
}

#[test]
fn chain_gradient_matches_dense_transpose() {
    let mesh = Mesh::build_grid(8, 8, 1.0, 1.0).unwrap();
    let r = 0.3;
    let f = HelmholtzFilter::new(&mesh, r).unwrap();
    let map = dense(&f).try_inverse().unwrap();
    let g = random(mesh.n_elems(), 21);
    let oracle = map.transpose() * DVector::from_vec(g.clone());
    let out = filter_chain_gradient(&mesh, &g, r).unwrap();
    for (a, b) in out.iter().zip(oracle.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mean_and_bounds_preserved(seed in 0u64..1000, nx in 2usize..20, ny in 2usize..20, r in 0.0f64..3.0) {
        let mesh = Mesh::build_grid(nx, ny, 4.0, 3.0).unwrap();
        let v = random(mesh.n_elems(), seed);
        let out = HelmholtzFilter::new(&mesh, r).unwrap().apply_unclamped(&v).unwrap();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        prop_assert!((mean(&out) - mean(&v)).abs() < 1e-8);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.iter().all(|&x| x >= lo - 1e-10 && x <= hi + 1e-10));
    }

    #[test]
    fn constants_fixed_and_zero_radius_identity(c in 0.0f64..=1.0, seed in 0u64..1000, r in 0.01f64..3.0) {
        let mesh = Mesh::build_grid(10, 7, 2.0, 1.0).unwrap();
        let out = helmholtz_filter(&mesh, &DensityField::uniform(&mesh, c).unwrap(), r).unwrap();
        prop_assert!(out.values().iter().all(|v| (v - c).abs() <= 1e-10));
        let v = random(mesh.n_elems(), seed);
        let same = helmholtz_filter(&mesh, &DensityField::new(&mesh, v.clone()).unwrap(), 0.0).unwrap();
        prop_assert!(same.values().iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-10));
    }
}
