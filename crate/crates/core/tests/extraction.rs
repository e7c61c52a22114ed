//! Round trips through Hamiltonian and density extraction.

use fnde_core::extraction::{
    density_columns, density_phase, extract_density, extract_hamiltonian, hamiltonian_from_field, node_state_at,
    plant_density, self_consistency, spectral_phase,
};
use fnde_core::models::init_params;
use fnde_core::theory::Sample;
use fnde_core::{Complex64, ComplexMatrix, ModelKind, MomentumGrid, Theory, TheoryConfig};
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        ComplexMatrix::from_vec(n, n, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn planted_density_is_recovered(
        (n, h_bar) in (2usize..=10).prop_flat_map(|n| (Just(n), matrix(n))),
        p_max in 0.5f64..4.0,
    ) {
        let grid = MomentumGrid::new(n, 0.0, p_max).unwrap();
        let params = plant_density(&h_bar, &grid).unwrap();
        let density = extract_density(&params, &grid).unwrap();
        prop_assert_eq!(density.kernel.shape(), (n, density_columns(n)));
        let expected = h_bar.block(0, 0, n, density_columns(n));
        prop_assert!(density.kernel.sub(&expected).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn planted_hamiltonian_is_recovered(
        (h0, perturbation) in (2usize..=8).prop_flat_map(|n| (matrix(n), matrix(n))),
    ) {
        let n = h0.rows();
        let s = ComplexMatrix::identity(n).add(&perturbation.scale(Complex64::new(0.5 / n as f64, 0.0))).unwrap();
        // R = −i·H·S
        let r = h0.matmul(&s).unwrap().scale(Complex64::new(0.0, -1.0));
        let h = hamiltonian_from_field(&r, &s).unwrap();
        prop_assert!(h.sub(&h0).unwrap().max_abs() < 1e-10);
        prop_assert!(self_consistency(&h, &s, &r).unwrap() < 1e-12);
    }

    #[test]
    fn phase_factors_are_inverse(n in 2usize..=12, p_max in 0.5f64..4.0) {
        let grid = MomentumGrid::new(n, 0.0, p_max).unwrap();
        let product = density_phase(&grid).zip_map(&spectral_phase(&grid), |a, b| a * b).unwrap();
        for z in product.as_slice() {
            prop_assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn live_node_extraction_is_self_consistent(
        seed in 0u64..1000,
        theory in prop::sample::select(Theory::ALL.to_vec()),
        lambda in 0.0f64..0.4,
        mass in 0.5f64..2.0,
        time in 0.1f64..1.0,
    ) {
        let mut params = init_params(ModelKind::Node, 4, 32, seed).unwrap();
        params.momentum_scale = 2.0;
        let grid = MomentumGrid::new(4, 0.0, 2.0).unwrap();
        let sample = Sample::generate(TheoryConfig::new(theory, lambda, mass, 2).unwrap(), grid);
        let (s, r) = node_state_at(&params, &sample, time).unwrap();
        let h = extract_hamiltonian(&params, &sample, time).unwrap();
        prop_assert!(self_consistency(&h.h, &s, &r).unwrap() < 1e-8);
    }
}
