use proptest::prelude::*;
use qwk_core::channels::{
    complementary_channel, diamond_distance, kraus_equivalent, kraus_to_stinespring, random_kraus,
    stinespring_to_kraus,
};
use qwk_core::infotheory::{coherent_information, von_neumann_entropy_matrix};
use qwk_core::qcore::{random, trace_norm, DensityOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn round_trip_on_hundred_channels() {
    for k in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let d = 1 + (k as usize % 3);
        let ch = random_kraus(d, 1 + (k as usize % 4), &mut rng);
        let back = stinespring_to_kraus(&kraus_to_stinespring(&ch));
        assert!(kraus_equivalent(&ch, &back).unwrap(), "channel {k}");
        let rho = random::density_matrix(d, d, &mut rng);
        assert!((ch.apply_matrix(&rho) - back.apply_matrix(&rho)).camax() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diamond_dominates_single_inputs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_kraus(2, 2, &mut rng);
        let b = random_kraus(2, 3, &mut rng);
        let est = diamond_distance(&a, &b, 4, seed).unwrap();
        prop_assert!(est.value <= 2.0 + 1e-9);
        for _ in 0..5 {
            let rho = random::density_matrix(2, 2, &mut rng);
            let single = trace_norm(&(a.apply_matrix(&rho) - b.apply_matrix(&rho)));
            prop_assert!(est.value >= single - 1e-9, "{} < {single}", est.value);
        }
    }

    #[test]
    fn complementary_identity(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_kraus(2, k, &mut rng);
        let rho = random::density_matrix(2, 2, &mut rng);
        let iso = kraus_to_stinespring(&ch);
        let env = complementary_channel(&iso);
        let gap = von_neumann_entropy_matrix(&ch.apply_matrix(&rho)) - von_neumann_entropy_matrix(&env.apply_matrix(&rho));
        let ic = coherent_information(&DensityOperator::on("q", rho).unwrap(), &ch).unwrap();
        prop_assert!((gap - ic).abs() <= 1e-8);
    }
}
