use super::families::*;
use super::*;
use crate::channels::{stinespring_to_kraus, KrausChannel};
use crate::qcore::{ket, random, root_fidelity_matrices};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn uniform() -> Vec<f64> {
    vec![0.5, 0.5]
}

fn full(family: &[StinespringIsometry], n: usize, j: usize, l: usize, seed: u64) -> (EntgenCode, FidelityAudit) {
    let cfg = EntangleConfig { n, messages: j, depth: l, delta: 0.5, seed, prior: None };
    entangle(family, &cfg).unwrap()
}

fn assert_checks(a: &FidelityAudit) {
    for c in &a.checks {
        assert!(c.pass, "{} failed: {} vs {}", c.bound_id, c.lhs, c.rhs);
    }
}

#[test]
fn identity_single_letter_measurement() {
    let fam = vec![identity_qubit()];
    let code = build_entgen_code(&fam, &uniform(), &identity(2), 1, 2, 1, 0.5, 0).unwrap();
    for j in 0..2 {
        let x = code.words[j][0];
        let d = &code.measurement[code.register_index(j, 0, 0)];
        assert!((d - ket(2, x) * ket(2, x).adjoint()).camax() < 1e-12);
        assert!((code.eqx1[0][j] - 1.0).abs() < 1e-12);
    }
    assert!(code.block_residual < 1e-10);
}

#[test]
fn block_isometry_matches_the_channel() {
    let k = KrausChannel::amplitude_damping(0.3);
    let s = crate::channels::kraus_to_stinespring(&k);
    let big = n_fold_isometry(s.matrix(), 2, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = random::density_matrix(4, 2, &mut rng);
    let direct = k.n_fold(2).unwrap().apply_matrix(&rho);
    let via = reduce_q(&joint_output(&big, &rho), 4, 4);
    assert!((direct - via).camax() < 1e-12);
}

#[test]
fn identity_family_is_perfect() {
    let fam = vec![identity_qubit()];
    for (n, j, l) in [(1, 2, 1), (2, 2, 1), (2, 4, 1), (2, 2, 2), (3, 4, 2)] {
        let (code, a) = full(&fam, n, j, l, 7);
        assert!((a.min_fidelity - 1.0).abs() < 1e-9, "n={n} J={j} L={l}: {}", a.min_fidelity);
        assert!(a.epsilon < 1e-9);
        let corr = code.corrections.as_ref().unwrap();
        assert!(corr.overlap.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-9));
        assert_checks(&a);
    }
}

#[test]
fn single_message_is_trivial() {
    let fam = vec![depolarizing(0.3)];
    let (_, a) = full(&fam, 2, 1, 1, 1);
    assert!((a.min_fidelity - 1.0).abs() < 1e-9);
}

#[test]
fn depth_one_forces_first_index() {
    let fam = rotated_identities(0.1);
    let (code, _) = full(&fam, 2, 2, 1, 3);
    assert_eq!(code.alignment.unwrap().k, vec![1, 1]);
}

#[test]
fn phase_choice_on_positive_overlaps() {
    let overlaps = vec![vec![cr(0.2), cr(0.9), cr(0.5)]];
    let (k, r, aligned) = choose_phase(&overlaps);
    assert_eq!(k, 1);
    assert_eq!(r, 0.0);
    assert!((aligned[0] - 0.9).abs() < 1e-15);
}

#[test]
fn phase_choice_recovers_plant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    use rand::Rng;
    for planted in 1..=4usize {
        let phase = 1.3 * planted as f64;
        let overlaps: Vec<Vec<C64>> = (0..3)
            .map(|_| {
                (0..4)
                    .map(|k| {
                        if k == planted % 4 {
                            c(0.0, phase).exp() * cr(0.95 + 0.01 * rng.random::<f64>())
                        } else {
                            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * cr(0.4)
                        }
                    })
                    .collect()
            })
            .collect();
        let (k, r, aligned) = choose_phase(&overlaps);
        assert_eq!(k, planted);
        assert!(aligned.iter().all(|&v| v > 0.94));
        assert!(((r + phase).rem_euclid(std::f64::consts::TAU)).min((-(r + phase)).rem_euclid(std::f64::consts::TAU)) < 1e-9);
    }
}

#[test]
fn uhlmann_product_and_orthogonal() {
    let a = ket(3, 1);
    let b = ket(2, 0);
    let up = uhlmann_partner(&a.kronecker(&b), [3, 2], &b).unwrap();
    assert!((up.fidelity - 1.0).abs() < 1e-12);
    assert!((&up.partner - &a).norm() < 1e-12);
    let up = uhlmann_partner(&a.kronecker(&b), [3, 2], &ket(2, 1)).unwrap();
    assert!(up.fidelity < 1e-15);
    assert!(up.rank_deficient);
}

#[test]
fn uhlmann_matches_reduced_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let psi = random::pure_vector(12, &mut rng);
        let tau = random::pure_vector(3, &mut rng);
        let up = uhlmann_partner(&psi, [4, 3], &tau).unwrap();
        assert!((up.fidelity - up.reduced_fidelity).abs() < 1e-8);
        let direct = psi.dotc(&up.partner.kronecker(&tau)).norm();
        assert!((direct - up.fidelity).abs() < 1e-10);
    }
}

#[test]
fn uhlmann_unitary_against_singular_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let a = random::pure_vector(8, &mut rng);
        let b = random::pure_vector(8, &mut rng);
        let (am, bm) = (CMat::from_fn(2, 4, |s, r| a[s * 4 + r]), CMat::from_fn(2, 4, |s, r| b[s * 4 + r]));
        let (u, value) = uhlmann_unitary(&am, &bm).unwrap();
        assert!((u.adjoint() * &u - identity(4)).camax() < 1e-10);
        let rho = &am * am.adjoint();
        let sigma = &bm * bm.adjoint();
        assert!((value - root_fidelity_matrices(&rho, &sigma)).abs() < 1e-8);
        let moved = &am * u.transpose();
        let achieved: C64 = bm.iter().zip(moved.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((achieved.norm() - value).abs() < 1e-10);
    }
}

#[test]
fn purify_dominant_eigenvector() {
    let fam = vec![identity_qubit()];
    let v0 = ket(4, 0);
    let v1 = ket(4, 3);
    let mixed = &v0 * v0.adjoint() * cr(0.99) + &v1 * v1.adjoint() * cr(0.01);
    let other = ket(4, 1);
    let code = build_from_codewords(&fam, 2, 2, 1, vec![Codeword::mixed(mixed), Codeword::pure(other)]).unwrap();
    assert!(phase_align(&code, &fam).is_err());
    let p = purify_codewords(&code, &fam).unwrap();
    assert_eq!(p.purification.len(), 1);
    let e = &p.purification[0];
    assert!(e.meets_threshold && e.threshold < 0.99);
    assert!((e.chosen_weight - 0.99).abs() < 1e-12);
    let chosen = p.codewords[0].vector.as_ref().unwrap();
    assert!((chosen.dotc(&v0).norm() - 1.0).abs() < 1e-12);
    assert!(e.after >= e.before - 1e-12);
}

#[test]
fn purify_random_rank_two() {
    let fam = vec![depolarizing(0.05)];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let words = vec![Codeword::mixed(random::density_matrix(4, 2, &mut rng)), Codeword::pure(ket(4, 2))];
    let code = build_from_codewords(&fam, 2, 2, 1, words).unwrap();
    let p = purify_codewords(&code, &fam).unwrap();
    let e = &p.purification[0];
    assert!((0.0..=1.0).contains(&e.after));
    assert!(p.codewords.iter().all(|w| w.vector.is_some()));
    let (_, a) = {
        let c = build_decoder_unitaries(&phase_align(&p, &fam).unwrap(), &fam).unwrap();
        let a = audit(&c, &fam).unwrap();
        (c, a)
    };
    assert!(a.bound_holds);
}

#[test]
fn depolarizing_meets_single_state_bound() {
    let fam = vec![depolarizing(0.02)];
    let (_, a) = full(&fam, 2, 2, 1, 0);
    let rhs = 1.0 - 8f64.sqrt() * a.epsilon.powf(0.25);
    assert!(a.min_fidelity >= rhs - 1e-12, "{} < {rhs}", a.min_fidelity);
    assert_checks(&a);
}

#[test]
fn perturbed_pair_meets_bound() {
    let fam = perturbed_pair(0.02, 1e-4);
    for seed in 0..6 {
        let (_, a) = full(&fam, 2, 2, 1, seed);
        assert_checks(&a);
        assert!(a.min_fidelity >= a.bound - 1e-12);
    }
}

#[test]
fn rotated_identities_record_decoding_traces() {
    let fam = rotated_identities(0.05);
    let (code, a) = full(&fam, 2, 2, 1, 2);
    assert!(code.eqx1_pooled.iter().flatten().all(|&v| v >= 0.9), "{:?}", code.eqx1_pooled);
    assert_checks(&a);
}

#[test]
fn all_fidelities_in_unit_interval() {
    let fam = vec![depolarizing(0.2), identity_qubit()];
    let (code, a) = full(&fam, 2, 2, 2, 5);
    for v in a.per_t.iter().flat_map(|r| [r.fidelity, r.actual_vs_ideal, r.ideal_vs_target, r.actual_vs_target]) {
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(code.block_residual <= 1e-8 && a.correction_residual <= 1e-8);
    assert!(a.per_t.iter().all(|r| r.triangle.pass));
    assert!(a.bound_holds);
}

#[test]
fn unequal_environments_are_padded() {
    let fam = vec![identity_qubit(), depolarizing(0.01)];
    let code = build_entgen_code(&fam, &uniform(), &identity(2), 1, 1, 1, 0.5, 0).unwrap();
    assert_eq!(code.d_env, 4);
    assert_eq!(stinespring_to_kraus(&fam[0]).ops().len(), 1);
}

#[test]
fn size_errors() {
    let fam = vec![identity_qubit()];
    let b = identity(2);
    assert!(matches!(build_entgen_code(&fam, &uniform(), &b, 2, 5, 1, 0.5, 0), Err(QwkError::CapExceeded(_))));
    assert!(matches!(build_entgen_code(&fam, &uniform(), &b, 2, 0, 1, 0.5, 0), Err(QwkError::InvalidParameter { .. })));
    assert!(matches!(build_entgen_code(&fam, &uniform(), &b, 1, 2, 2, 0.5, 0), Err(QwkError::InvalidParameter { .. })));
    assert!(matches!(build_entgen_code(&fam, &uniform(), &b, 4, 2, 1, 0.5, 0), Err(QwkError::CapExceeded(_))));
}

#[test]
fn runs_are_deterministic() {
    let fam = perturbed_pair(0.02, 1e-4);
    let (_, a) = full(&fam, 2, 2, 2, 4);
    let (_, b) = full(&fam, 2, 2, 2, 4);
    assert_eq!(a, b);
}

#[test]
fn weak_noise_bounds_are_informative() {
    let (_, a) = full(&[depolarizing(1e-8)], 2, 2, 1, 0);
    assert!(a.bound > 0.5, "bound {}", a.bound);
    assert!(a.min_fidelity >= 1.0 - 8f64.sqrt() * a.epsilon.powf(0.25));
    let fam = perturbed_pair(0.002, 1e-8);
    let (code, a) = full(&fam, 2, 2, 1, 1);
    assert!(a.bound > 0.5, "words {:?} bound {}", code.words, a.bound);
    assert!(a.bound_holds);
    assert_checks(&a);
}
