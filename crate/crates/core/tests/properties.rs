use num_complex::Complex64;
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::sync::OnceLock;

use sphloc::cutoff::{make_cutoff, psi_coefficients, Profile, PsiCoefficients};
use sphloc::kernels::{big_theta_coefficient, theta_coefficient, DEFAULT_TRUNCATION_TOL};
use sphloc::lattice::oracle::{ball_by_cube_scan, shell_by_cube_scan};
use sphloc::lattice::{build_grouping, enumerate_ball, enumerate_shell, LatticePoint};
use sphloc::partialsums::{
    kernel_fields, maximal_field, partial_sum, partial_sum_grid, telescoping_check, SpectrumFunction,
};
use sphloc::transform::node_coords;

fn psi2() -> &'static PsiCoefficients {
    static PSI: OnceLock<PsiCoefficients> = OnceLock::new();
    PSI.get_or_init(|| {
        let spec = make_cutoff(1.0, 0.5, 2, Profile::BumpQuotient).unwrap();
        psi_coefficients(&spec, 128, 32).unwrap()
    })
}

fn point(dim: usize, range: i64) -> impl Strategy<Value = LatticePoint> {
    prop::collection::vec(-range..=range, dim).prop_map(LatticePoint::new)
}

fn nonzero_point(dim: usize, range: i64) -> impl Strategy<Value = LatticePoint> {
    point(dim, range).prop_filter("origin", |p| !p.is_origin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shell_matches_cube_scan((dim, c) in (1usize..=3).prop_flat_map(|d| (Just(d), point(d, 12))), j in 0i64..300) {
        let fast = enumerate_shell(dim, &c, j).unwrap().points;
        let slow: BTreeSet<_> = shell_by_cube_scan(dim, &c, j).into_iter().collect();
        prop_assert!(fast.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(fast.into_iter().collect::<BTreeSet<_>>(), slow);
    }

    #[test]
    fn ball_is_union_of_inner_shells(dim in 1usize..=3, lambda in 0.01f64..120.0) {
        let ball = enumerate_ball(dim, lambda).unwrap();
        prop_assert_eq!(&ball, &ball_by_cube_scan(dim, lambda));
        let origin = LatticePoint::origin(dim);
        let from_shells: usize = (0..lambda.ceil() as i64)
            .map(|j| enumerate_shell(dim, &origin, j).unwrap().len())
            .sum();
        prop_assert_eq!(ball.len(), from_shells);
    }

    #[test]
    fn grouping_partitions_the_ring_and_respects_cardinality(n in nonzero_point(2, 25), k in 1u32..25) {
        let t = build_grouping(2, k, &n).unwrap();
        prop_assert!(t.is_partition());
        for (q, g) in t.groups.iter().enumerate() {
            prop_assert!(g.len() * g.len() < 16 * (q + 1));
        }
    }

    #[test]
    fn kernel_levels_telescope(n in point(2, 8), j in 0u64..40) {
        let psi = psi2();
        let tol = DEFAULT_TRUNCATION_TOL;
        let lhs = big_theta_coefficient(psi, j, &n, tol).unwrap();
        let rhs = theta_coefficient(psi, j + 1, &n, tol).unwrap() - theta_coefficient(psi, j, &n, tol).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-14);
    }

    #[test]
    fn kernels_are_signed_permutation_invariant(n in point(2, 8), j in 0u64..40) {
        let psi = psi2();
        let tol = DEFAULT_TRUNCATION_TOL;
        let c = n.coords();
        let base = theta_coefficient(psi, j, &n, tol).unwrap();
        for image in [vec![c[1], c[0]], vec![-c[0], c[1]], vec![c[0], -c[1]]] {
            let v = theta_coefficient(psi, j, &LatticePoint::new(image), tol).unwrap();
            prop_assert!((v - base).abs() <= 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_and_direct_partial_sums_agree(seed in any::<u64>(), lambda in 0.5f64..80.0, nodes in prop::collection::vec(0usize..32 * 32, 1..8)) {
        let f = SpectrumFunction::random(2, 6, seed, false).unwrap();
        let field = partial_sum_grid(&f, lambda, 32).unwrap();
        let points: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&i| {
                let mut x = vec![0.0; 2];
                node_coords(2, 32, i, &mut x);
                x
            })
            .collect();
        let direct = partial_sum(&f, lambda, &points).unwrap();
        for (&i, d) in nodes.iter().zip(&direct) {
            prop_assert!((field.values[i] - d).norm() <= 1e-11);
        }
        let spectral = f.partial_norm_sq(lambda).unwrap();
        prop_assert!((field.l2_norm_sq() - spectral).abs() <= 1e-10 * spectral.max(1.0));
    }

    #[test]
    fn maximal_field_grows_with_lambda(seed in any::<u64>(), lo in 1.0f64..40.0, extra in 0.0f64..40.0) {
        let f = SpectrumFunction::random(2, 5, seed, true).unwrap();
        let small = maximal_field(&f, lo, 16).unwrap();
        let large = maximal_field(&f, lo + extra, 16).unwrap();
        prop_assert!(small.values.iter().zip(&large.values).all(|(a, b)| a <= b));
    }

    #[test]
    fn kernel_fields_telescope(seed in any::<u64>(), q in 1u64..20, xs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..6)) {
        let f = SpectrumFunction::random(2, 5, seed, true).unwrap();
        let points: Vec<Vec<f64>> = xs.iter().map(|&(a, b)| vec![a, b]).collect();
        let (theta, big) = kernel_fields(&f, psi2(), q, &points).unwrap();
        let r = telescoping_check(&theta, &big).unwrap();
        prop_assert!(r.max_relative_residual <= 1e-10);
        // theta_0 has an empty ball, so its field vanishes.
        prop_assert!(theta[0].iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }
}
