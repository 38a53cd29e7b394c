use proptest::prelude::*;
use qwk_core::channels::{random_kraus, ClassicalChannel};
use qwk_core::infotheory::{
    fannes_bound, holevo_chi, mutual_information, shannon_entropy, von_neumann_entropy, von_neumann_entropy_matrix, Ensemble,
};
use qwk_core::qcore::{cr, kron, purify, random, reduce_pure, trace_norm, CMat, DensityOperator, HilbertLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simplex(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| r / s).collect()
}

fn diag(p: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(p.len(), p.iter().map(|&x| cr(x))))
}

/// `S(N(ρ)) − S((id⊗N)(ψ))` with an explicit purification on an ancilla of dimension `da`.
fn coherent_with_ancilla(rho: &CMat, ch: &qwk_core::channels::KrausChannel, da: usize) -> f64 {
    let psi = purify(&DensityOperator::on("q", rho.clone()).unwrap(), HilbertLabel::new("r", da)).unwrap();
    let v = psi.vector();
    let id = CMat::identity(da, da);
    let mut joint = CMat::zeros(ch.d_out() * da, ch.d_out() * da);
    for a in ch.ops() {
        let w = kron(a, &id) * v;
        joint += &w * w.adjoint();
    }
    von_neumann_entropy_matrix(&ch.apply_matrix(rho)) - von_neumann_entropy_matrix(&joint)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn holevo_is_bounded(raw in prop::collection::vec(0.01f64..1.0, 2..5), seed in any::<u64>(), d in 2usize..4) {
        let p = simplex(&raw);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states: Vec<CMat> = p.iter().map(|_| random::density_matrix(d, rng.random_range(1..=d), &mut rng)).collect();
        let chi = holevo_chi(&Ensemble::new(p.clone(), states).unwrap());
        prop_assert!(chi >= 0.0);
        prop_assert!(chi <= shannon_entropy(&p).unwrap() + 1e-9);
    }

    #[test]
    fn commuting_ensembles_are_classical(raw in prop::collection::vec(0.05f64..1.0, 2..4), rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 3)) {
        let p = simplex(&raw);
        let w: Vec<Vec<f64>> = rows[..p.len()].iter().map(|r| simplex(r)).collect();
        let ch = ClassicalChannel::new(w.clone()).unwrap();
        let states: Vec<CMat> = w.iter().map(|r| diag(r)).collect();
        let chi = holevo_chi(&Ensemble::new(p.clone(), states).unwrap());
        prop_assert!((chi - mutual_information(&p, &ch).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn coherent_information_ignores_ancilla_size(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_kraus(2, k, &mut rng);
        let rho = random::density_matrix(2, 2, &mut rng);
        let a = coherent_with_ancilla(&rho, &ch, 2);
        let b = coherent_with_ancilla(&rho, &ch, 4);
        prop_assert!((a - b).abs() <= 1e-8);
    }

    #[test]
    fn entropy_is_additive(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random::density_matrix(da, da, &mut rng);
        let b = random::density_matrix(db, db, &mut rng);
        let joint = von_neumann_entropy_matrix(&kron(&a, &b));
        prop_assert!((joint - von_neumann_entropy_matrix(&a) - von_neumann_entropy_matrix(&b)).abs() <= 1e-9);
    }

    #[test]
    fn fannes_continuity(seed in any::<u64>(), d in 2usize..5, s in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random::density_matrix(d, d, &mut rng);
        let b = random::density_matrix(d, d, &mut rng);
        let mixed = &a * cr(1.0 - s) + &b * cr(s);
        let mu = trace_norm(&(&a - &mixed));
        prop_assume!(mu < (-1f64).exp());
        let gap = (von_neumann_entropy_matrix(&a) - von_neumann_entropy_matrix(&mixed)).abs();
        prop_assert!(gap <= fannes_bound(mu, d) + 1e-9);
    }

    #[test]
    fn pure_bipartite_marginals_share_entropy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random::pure_vector(6, &mut rng);
        let a = reduce_pure(&v, &[2, 3], &[0]);
        let b = reduce_pure(&v, &[2, 3], &[1]);
        let sa = von_neumann_entropy(&DensityOperator::on("a", a).unwrap());
        let sb = von_neumann_entropy(&DensityOperator::on("b", b).unwrap());
        prop_assert!((sa - sb).abs() <= 1e-9);
    }
}
