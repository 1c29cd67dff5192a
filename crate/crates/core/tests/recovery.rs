mod oracles;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use reprocs_core::{add_ls_del, solve, threshold_ls, MatrixOp, ProjectorOp, SolveConfig, Support};

use oracles::{gaussian_matrix, gaussian_vector, nsp_ratio, pinv_restricted, random_orthonormal, rng, subsets};

fn projector(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    DMatrix::identity(n, n) - basis * basis.transpose()
}

#[test]
fn nsp_oracle_matches_hand_cases() {
    // A null space along one coordinate defeats every sparse recovery.
    let mut e = DMatrix::zeros(6, 1);
    e[(0, 0)] = 1.0;
    assert_eq!(nsp_ratio(&e, 1), 1.0);
    // A flat direction: s of n equal magnitudes.
    let flat = DMatrix::from_element(8, 1, 8f64.sqrt().recip());
    assert!((nsp_ratio(&flat, 3) - 3.0 / 8.0).abs() < 1e-12);
    // Rank two: the ratio over the plane exceeds both basis columns.
    let mut r = rng(2);
    let b = random_orthonormal(&mut r, 10, 2);
    let cols = (0..2).map(|k| nsp_ratio(&b.columns(k, 1).into_owned(), 2)).fold(0.0, f64::max);
    assert!(nsp_ratio(&b, 2) >= cols - 1e-12);
}

#[test]
fn exact_subspace_and_nsp_give_exact_recovery() {
    let mut checked = 0;
    for seed in 0..300 {
        let mut r = rng(seed);
        let n = r.random_range(6..=12);
        let rank = r.random_range(1..=3);
        let s = r.random_range(1..=2);
        let basis = random_orthonormal(&mut r, n, rank);
        if nsp_ratio(&basis, s) >= 0.5 {
            continue;
        }
        let mut truth = DVector::zeros(n);
        let mut placed = 0;
        while placed < s {
            let i = r.random_range(0..n);
            if truth[i] == 0.0 {
                truth[i] = r.random_range(1.0..5.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
                placed += 1;
            }
        }
        let l = &basis * gaussian_vector(&mut r, rank) * 20.0;
        let m = &l + &truth;
        let op = ProjectorOp::new(&basis);
        let y = projector(&basis) * &m;
        let cfg = SolveConfig {
            tol: 1e-10,
            max_iters: 20_000,
            ..SolveConfig::default()
        };
        let raw = solve(&op, &y, &cfg).unwrap();
        let min_mag = truth.iter().filter(|x| **x != 0.0).map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let fit = threshold_ls(&op, &y, &raw.x, 0.5 * min_mag).unwrap();
        assert!((&fit.s_hat - &truth).amax() <= 1e-8, "seed {seed}: {}", (&fit.s_hat - &truth).amax());
        checked += 1;
    }
    assert!(checked >= 100, "only {checked} instances satisfied the null-space property");
}

#[test]
fn add_ls_del_repairs_one_miss_and_one_extra() {
    let mut r = rng(12);
    let basis = random_orthonormal(&mut r, 12, 2);
    let a = projector(&basis);
    let mut truth = DVector::zeros(12);
    for i in [2, 5, 9] {
        truth[i] = 10.0;
    }
    let m = &basis * gaussian_vector(&mut r, 2) * 30.0 + &truth;
    let y = &a * &m;
    let op = MatrixOp::new(a.clone()).unwrap();
    let predicted = Support::from_indices(vec![2, 5, 7]);
    let cfg = SolveConfig {
        known_support: predicted.clone(),
        tol: 1e-10,
        max_iters: 20_000,
        ..SolveConfig::default()
    };
    let raw = solve(&op, &y, &cfg).unwrap();
    let out = add_ls_del(&op, &y, &raw.x, &predicted, 0.5, 1.0).unwrap();

    // Oracle: the smallest subset of the enlarged set that fits exactly.
    let pool: Vec<usize> = out.added.iter().collect();
    let exact = subsets(&pool, pool.len())
        .into_iter()
        .filter_map(|cols| {
            let x = pinv_restricted(&a, &y, &cols)?;
            ((&y - &a * &x).norm() <= 1e-9 * y.norm()).then_some((cols, x))
        })
        .min_by_key(|(cols, _)| cols.len())
        .unwrap();
    assert_eq!(out.fit.support.as_slice(), &[2, 5, 9]);
    assert_eq!(out.fit.support.as_slice(), &exact.0[..]);
    assert!((&out.fit.s_hat - &exact.1).amax() <= 1e-9);
    assert!((&out.fit.s_hat - &truth).amax() <= 1e-8);
}

proptest! {
    #[test]
    fn add_ls_del_support_containment(
        seed in any::<u64>(),
        known in prop::collection::btree_set(0usize..10, 0..4),
        alpha_add in 0.05f64..1.0,
        ratio in 1.0f64..3.0,
    ) {
        let mut r = rng(seed);
        let a = gaussian_matrix(&mut r, 10, 10);
        let op = MatrixOp::new(a).unwrap();
        let y = gaussian_vector(&mut r, 10);
        let s_raw = gaussian_vector(&mut r, 10);
        let known = Support::from_indices(known.into_iter().collect());
        let out = add_ls_del(&op, &y, &s_raw, &known, alpha_add, alpha_add * ratio).unwrap();
        prop_assert!(known.is_subset(&out.added));
        prop_assert!(out.fit.support.is_subset(&out.added));
        for i in 0..10 {
            if !out.fit.support.contains(i) {
                prop_assert_eq!(out.fit.s_hat[i], 0.0);
            }
        }
    }

    #[test]
    fn debiasing_does_not_worsen_the_fit(seed in any::<u64>(), m in 4usize..10, k in 1usize..4) {
        let mut r = rng(seed);
        let n = m + 3;
        let a = gaussian_matrix(&mut r, m, n);
        let op = MatrixOp::new(a.clone()).unwrap();
        let y = gaussian_vector(&mut r, m);
        let mut s_raw = DVector::zeros(n);
        for i in 0..k.min(m - 1) {
            s_raw[(i * 5) % n] = r.random_range(1.0..3.0);
        }
        let fit = threshold_ls(&op, &y, &s_raw, 0.5).unwrap();
        let before = (&y - &a * &s_raw).norm();
        prop_assert!(fit.residual_norm <= before + 1e-8, "{} > {}", fit.residual_norm, before);
        prop_assert!(((&y - &a * &fit.s_hat).norm() - fit.residual_norm).abs() <= 1e-9 * y.norm().max(1.0));
    }
}
