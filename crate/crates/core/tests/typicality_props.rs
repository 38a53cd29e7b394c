use proptest::prelude::*;
use qwk_core::qcore::{kron, random, CMat};
use qwk_core::typicality::{typical_projector, TypicalParams, DEFAULT_K};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projectors_are_spectral(seed in any::<u64>(), n in 1usize..6, alpha in prop::sample::select(vec![0.1, 0.5, 1.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random::density_matrix(2, 2, &mut rng);
        let pi = typical_projector(&rho, TypicalParams::new(n, 0.1, alpha, DEFAULT_K).unwrap()).unwrap().matrix().unwrap();
        let mut big = rho.clone();
        for _ in 1..n {
            big = kron(&big, &rho);
        }
        prop_assert!((&pi * &pi - &pi).camax() <= 1e-8);
        prop_assert!((&pi - pi.adjoint()).camax() <= 1e-8);
        let comm: CMat = &pi * &big - &big * &pi;
        prop_assert!(comm.camax() <= 1e-8);
    }
}
