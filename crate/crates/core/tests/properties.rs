use aht_core::fields::{
    dealias, dealias_vector, forward_pair, gradient, l2_norm, random_field, read_snapshot, write_snapshot, Grid,
    RandomFieldSpec, ScalarField, VectorField,
};
use aht_core::leray::{divergence_residual, leray_project};
use aht_core::oracle::{assignment_exact, brute_force_assignment, monotonicity_margin, SampledMap};
use proptest::prelude::*;

fn field(n: usize, seed: u64, decay: f64) -> VectorField {
    random_field(Grid::new(n).unwrap(), &RandomFieldSpec::new(seed, 1.0, decay)).unwrap()
}

fn grid_size() -> impl Strategy<Value = usize> {
    prop_oneof![Just(8usize), Just(16), Just(32)]
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..6.3f64, 0.0..6.3f64).prop_map(|(a, b)| [a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projector_is_an_orthogonal_projection(n in grid_size(), s1 in any::<u64>(), s2 in any::<u64>(), decay in 3.0..6.0f64) {
        let z = field(n, s1, decay);
        let w = field(n, s2, decay);
        let pz = leray_project(&z);
        let pw = leray_project(&w);
        let scale = l2_norm(&z) * l2_norm(&w);
        prop_assert!(l2_norm(&leray_project(&pz).sub(&pz)) <= 1e-12 * l2_norm(&z));
        prop_assert!((pz.inner(&w) - z.inner(&pw)).abs() <= 1e-12 * scale);
        prop_assert!(divergence_residual(&pz) <= 1e-10);
        // the complement is a pure gradient
        let q = z.sub(&pz);
        prop_assert!(l2_norm(&leray_project(&q)) <= 1e-12 * l2_norm(&z));
    }

    #[test]
    fn projector_annihilates_gradients(n in grid_size(), a in -2.0..2.0f64, b in -2.0..2.0f64, k in 1i64..3) {
        let g = Grid::new(n).unwrap();
        let f = ScalarField::from_fn(g, |x1, x2| a * (k as f64 * x1).sin() + b * (x1 + k as f64 * x2).cos());
        prop_assert!(leray_project(&gradient(&f)).max_magnitude() <= 1e-12 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn dealias_is_a_self_adjoint_projection(n in grid_size(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let g = Grid::new(n).unwrap();
        let f = ScalarField::from_fn(g, |x1, x2| ((s1 % 7) as f64 * x1 + x2).sin().exp());
        let h = ScalarField::from_fn(g, |x1, x2| (x1 - (s2 % 5) as f64 * x2).cos().powi(3));
        let df = dealias(&f);
        prop_assert!(dealias(&df).sub(&df).max_abs() <= 1e-13 * f.max_abs());
        let lhs = df.inner(&h);
        let rhs = f.inner(&dealias(&h));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let v = field(n, s1, 3.0);
        prop_assert!(dealias_vector(&v).sub(&v).max_magnitude() <= 1e-13 * v.max_magnitude());
    }

    #[test]
    fn parseval_holds(n in grid_size(), seed in any::<u64>(), decay in 3.0..5.0f64) {
        let z = field(n, seed, decay);
        let (a, b) = forward_pair(&z);
        let spectral: f64 = a.coeffs().iter().chain(b.coeffs()).map(|c| c.norm_sqr()).sum();
        let spectral = (2.0 * std::f64::consts::PI).powi(2) * spectral;
        let physical = l2_norm(&z).powi(2);
        prop_assert!((spectral - physical).abs() <= 1e-12 * physical);
    }

    #[test]
    fn snapshot_round_trips(n in grid_size(), seed in any::<u64>(), t in 0.0..100.0f64) {
        let z = field(n, seed, 3.5);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, t, &z).unwrap();
        let (t2, back) = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(t2, t);
        prop_assert_eq!(back, z);
    }

    #[test]
    fn exact_assignment_matches_enumeration(pairs in prop::collection::vec((point(), point()), 1..=7)) {
        let (points, values): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        prop_assume!(SampledMap::new(points.clone(), values.clone()).is_ok());
        let m = SampledMap::new(points, values).unwrap();
        let exact = assignment_exact(&m).unwrap();
        let brute = brute_force_assignment(&m).unwrap();
        prop_assert!(exact.is_bijection());
        prop_assert!((exact.total_cost - brute.total_cost).abs() <= 1e-9 * (1.0 + brute.total_cost));
        prop_assert!(monotonicity_margin(&m, &exact, 200, 0) >= -1e-9);
    }
}
