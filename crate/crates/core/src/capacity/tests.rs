use super::*;
use crate::channels::WiretapPair;
use crate::infotheory::binary_entropy;
use approx::assert_abs_diff_eq;

fn pair(w: f64, v: f64) -> (ClassicalChannel, ClassicalChannel) {
    (ClassicalChannel::bsc(w), ClassicalChannel::bsc(v))
}

fn quick() -> SolverConfig {
    SolverConfig { refine_iters: 60, restarts: 3, ..Default::default() }
}

fn diag(p: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(p.len(), p.iter().map(|&x| cr(x))))
}

fn plus() -> CMat {
    projector(&((ket(2, 0) + ket(2, 1)) * cr(0.5f64.sqrt())))
}

fn qwiretap(legit: ClassicalChannel, wiretap: CQChannel) -> CompoundWiretapSpec {
    CompoundWiretapSpec::new(
        Variant::ClassicalQuantumWiretap,
        vec![WiretapPair { name: "t0".into(), legit: Channel::Classical(legit), wiretap: Channel::CQ(wiretap) }],
    )
    .unwrap()
}

fn cq_spec(pairs: Vec<(CQChannel, CQChannel)>) -> CompoundWiretapSpec {
    CompoundWiretapSpec::new(
        Variant::Cq,
        pairs
            .into_iter()
            .enumerate()
            .map(|(t, (w, v))| WiretapPair { name: format!("t{t}"), legit: Channel::CQ(w), wiretap: Channel::CQ(v) })
            .collect(),
    )
    .unwrap()
}

/// Brute-force `max over binary U` oracle on a fine grid.
fn brute_force_binary_aux(w: &ClassicalChannel, v: &ClassicalChannel) -> f64 {
    let info = |ch: &ClassicalChannel, wt: f64, q1: f64, q2: f64| {
        let h = |q: f64| entropy_of(&ch.push_forward(&[1.0 - q, q]));
        let m = wt * q1 + (1.0 - wt) * q2;
        h(m) - wt * h(q1) - (1.0 - wt) * h(q2)
    };
    let mut best = f64::NEG_INFINITY;
    let g = 50;
    for a in 0..=g {
        for b in 0..=g {
            for c in 0..=g {
                let (wt, q1, q2) = (a as f64 / g as f64, b as f64 / g as f64, c as f64 / g as f64);
                best = best.max(info(w, wt, q1, q2) - info(v, wt, q1, q2));
            }
        }
    }
    best
}

#[test]
fn degraded_bsc_pair() {
    let spec = CompoundWiretapSpec::classical(vec![pair(0.1, 0.3)]).unwrap();
    let r = classical_csi_capacity(&spec, &quick()).unwrap();
    let closed = binary_entropy(0.3) - binary_entropy(0.1);
    assert_abs_diff_eq!(closed, 0.412295, epsilon = 1e-6);
    assert_abs_diff_eq!(r.value, closed, epsilon = 1e-3);
    let (w, v) = pair(0.1, 0.3);
    assert_abs_diff_eq!(r.value, brute_force_binary_aux(&w, &v), epsilon = 1e-3);
    assert_eq!(r.formula_id, "classical_csi");
    assert!(!r.fixed_n);
    assert_abs_diff_eq!(r.recomputed(), r.raw_value, epsilon = 1e-12);
}

#[test]
fn identical_wiretapper_gives_zero() {
    let spec = CompoundWiretapSpec::classical(vec![pair(0.2, 0.2)]).unwrap();
    let r = classical_csi_capacity(&spec, &quick()).unwrap();
    assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);
}

#[test]
fn duplicate_state_changes_nothing() {
    let one = CompoundWiretapSpec::classical(vec![pair(0.1, 0.3)]).unwrap();
    let two = CompoundWiretapSpec::classical(vec![pair(0.1, 0.3), pair(0.1, 0.3)]).unwrap();
    let cfg = quick();
    assert_eq!(classical_csi_capacity(&one, &cfg).unwrap().value, classical_csi_capacity(&two, &cfg).unwrap().value);
    let a = classical_nocsi_lower(&one, &cfg).unwrap().value;
    let b = classical_nocsi_lower(&two, &cfg).unwrap().value;
    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
}

#[test]
fn nocsi_singleton_matches_csi() {
    let spec = CompoundWiretapSpec::classical(vec![pair(0.05, 0.25)]).unwrap();
    let cfg = quick();
    let csi = classical_csi_capacity(&spec, &cfg).unwrap();
    let nocsi = classical_nocsi_lower(&spec, &cfg).unwrap();
    assert_abs_diff_eq!(csi.value, nocsi.value, epsilon = 1e-6);
    assert_abs_diff_eq!(nocsi.recomputed(), nocsi.raw_value, epsilon = 1e-12);
}

#[test]
fn swapped_pairs_have_zero_lower_bound() {
    let spec = CompoundWiretapSpec::classical(vec![pair(0.1, 0.3), pair(0.3, 0.1)]).unwrap();
    let r = classical_nocsi_lower(&spec, &quick()).unwrap();
    assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-9);
    assert!(r.raw_value <= 1e-9);
}

#[test]
fn wrong_variant_is_rejected() {
    let spec = CompoundWiretapSpec::classical(vec![pair(0.1, 0.3)]).unwrap();
    assert!(matches!(qwiretap_csi_capacity(&spec, &quick()), Err(QwkError::VariantMismatch(_))));
    assert!(matches!(cq_csi_capacity(&spec, &quick()), Err(QwkError::VariantMismatch(_))));
    let q = qwiretap(ClassicalChannel::bsc(0.1), CQChannel::constant(2, identity(2) * cr(0.5)).unwrap());
    assert!(matches!(classical_csi_capacity(&q, &quick()), Err(QwkError::VariantMismatch(_))));
}

#[test]
fn constant_quantum_wiretapper() {
    let q = qwiretap(ClassicalChannel::bsc(0.1), CQChannel::constant(2, plus()).unwrap());
    let r = qwiretap_csi_capacity(&q, &quick()).unwrap();
    assert_abs_diff_eq!(r.value, 1.0 - binary_entropy(0.1), epsilon = 1e-6);
    assert!(r.fixed_n);
    let id = qwiretap(ClassicalChannel::identity(2), CQChannel::constant(2, plus()).unwrap());
    assert_abs_diff_eq!(qwiretap_csi_capacity(&id, &quick()).unwrap().value, 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(qwiretap_nocsi_lower(&id, &quick()).unwrap().value, 1.0, epsilon = 1e-9);
}

#[test]
fn orthogonal_wiretap_outputs_embed_classically() {
    let cfg = quick();
    let legit = ClassicalChannel::bsc(0.1);
    let wire = ClassicalChannel::bsc(0.3);
    let q = qwiretap(legit.clone(), wire.to_cq());
    let c = CompoundWiretapSpec::classical(vec![(legit, wire)]).unwrap();
    let a = qwiretap_csi_capacity(&q, &cfg).unwrap().value;
    let b = classical_csi_capacity(&c, &cfg).unwrap().value;
    assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    let a = qwiretap_nocsi_lower(&q, &cfg).unwrap().value;
    let b = classical_nocsi_lower(&c, &cfg).unwrap().value;
    assert_abs_diff_eq!(a, b, epsilon = 1e-6);
}

#[test]
fn qwiretap_nocsi_shapes() {
    let cfg = quick();
    let mk = |w: f64, v: f64| WiretapPair {
        name: format!("{w}"),
        legit: Channel::Classical(ClassicalChannel::bsc(w)),
        wiretap: Channel::CQ(ClassicalChannel::bsc(v).to_cq()),
    };
    let one = CompoundWiretapSpec::new(Variant::ClassicalQuantumWiretap, vec![mk(0.1, 0.3)]).unwrap();
    let two = CompoundWiretapSpec::new(Variant::ClassicalQuantumWiretap, vec![mk(0.1, 0.3), mk(0.1, 0.3)]).unwrap();
    let csi = qwiretap_csi_capacity(&one, &cfg).unwrap().value;
    let a = qwiretap_nocsi_lower(&one, &cfg).unwrap().value;
    let b = qwiretap_nocsi_lower(&two, &cfg).unwrap().value;
    assert_abs_diff_eq!(a, csi, epsilon = 1e-6);
    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    let swapped = CompoundWiretapSpec::new(Variant::ClassicalQuantumWiretap, vec![mk(0.1, 0.3), mk(0.3, 0.1)]).unwrap();
    assert_abs_diff_eq!(qwiretap_nocsi_lower(&swapped, &cfg).unwrap().value, 0.0, epsilon = 1e-9);
}

#[test]
fn cq_examples() {
    let cfg = quick();
    let orth = CQChannel::new(vec![projector(&ket(2, 0)), projector(&ket(2, 1))]).unwrap();
    let flat = CQChannel::constant(2, identity(2) * cr(0.5)).unwrap();
    let r = cq_csi_capacity(&cq_spec(vec![(orth.clone(), flat.clone())]), &cfg).unwrap();
    assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-9);
    let r = cq_csi_capacity(&cq_spec(vec![(orth.clone(), orth.clone())]), &cfg).unwrap();
    assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);
    let zp = CQChannel::new(vec![projector(&ket(2, 0)), plus()]).unwrap();
    let r = cq_csi_capacity(&cq_spec(vec![(zp, flat.clone())]), &cfg).unwrap();
    let oracle = binary_entropy((1.0 + 0.5f64.sqrt()) / 2.0);
    assert_abs_diff_eq!(r.value, oracle, epsilon = 1e-7);
    assert_abs_diff_eq!(r.value, 0.600876, epsilon = 1e-6);
    let p = r.argmax.prior.unwrap();
    assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-3);
}

#[test]
fn cq_nocsi_shapes() {
    let cfg = quick();
    let zp = CQChannel::new(vec![projector(&ket(2, 0)), plus()]).unwrap();
    let flat = CQChannel::constant(2, identity(2) * cr(0.5)).unwrap();
    let one = cq_spec(vec![(zp.clone(), flat.clone())]);
    let two = cq_spec(vec![(zp.clone(), flat.clone()), (zp.clone(), flat.clone())]);
    let csi = cq_csi_capacity(&one, &cfg).unwrap().value;
    let a = cq_nocsi_capacity(&one, &cfg).unwrap().value;
    assert_abs_diff_eq!(a, csi, epsilon = 1e-6);
    assert_abs_diff_eq!(cq_nocsi_capacity(&two, &cfg).unwrap().value, a, epsilon = 1e-9);
    let d1 = diag(&[0.9, 0.1]);
    let d2 = diag(&[0.6, 0.4]);
    let strong = CQChannel::new(vec![d1.clone(), diag(&[0.1, 0.9])]).unwrap();
    let weak = CQChannel::new(vec![d2.clone(), diag(&[0.4, 0.6])]).unwrap();
    let dominated = cq_spec(vec![(strong.clone(), weak.clone()), (weak, strong)]);
    assert_abs_diff_eq!(cq_nocsi_capacity(&dominated, &cfg).unwrap().value, 0.0, epsilon = 1e-9);
}

#[test]
fn zero_legitimate_holevo_gives_zero() {
    let flat = CQChannel::constant(2, identity(2) * cr(0.5)).unwrap();
    let zp = CQChannel::new(vec![projector(&ket(2, 0)), plus()]).unwrap();
    let r = cq_csi_capacity(&cq_spec(vec![(flat, zp)]), &quick()).unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn block_length_two_is_flagged() {
    let orth = CQChannel::new(vec![projector(&ket(2, 0)), projector(&ket(2, 1))]).unwrap();
    let flat = CQChannel::constant(2, identity(2) * cr(0.5)).unwrap();
    let cfg = SolverConfig { n: 2, ..quick() };
    let r = cq_csi_capacity(&cq_spec(vec![(orth, flat)]), &cfg).unwrap();
    assert_eq!(r.n, 2);
    assert!(r.fixed_n);
    assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-6);
    let bad = SolverConfig { n: 4, ..quick() };
    assert!(bad.validate().is_err());
}

#[test]
fn entgen_lower_examples() {
    let cfg = SolverConfig { refine_iters: 20, restarts: 2, ..Default::default() };
    let id = dilate(&[KrausChannel::identity(2)]);
    let r = entgen_lower_bound(&id, &cfg).unwrap();
    assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-6);
    let dep = dilate(&[KrausChannel::fully_depolarizing()]);
    let r = entgen_lower_bound(&dep, &cfg).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(r.raw_value <= 1e-9);
    let two = dilate(&[KrausChannel::identity(2), KrausChannel::identity(2)]);
    assert_abs_diff_eq!(entgen_lower_bound(&two, &cfg).unwrap().value, 1.0, epsilon = 1e-6);
}

#[test]
fn entgen_csi_examples() {
    let cfg = SolverConfig { refine_iters: 40, restarts: 3, ..Default::default() };
    let r = entgen_csi_capacity(&dilate(&[KrausChannel::identity(2)]), &cfg).unwrap();
    assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-6);
    let dep = dilate(&[KrausChannel::fully_depolarizing()]);
    let r = entgen_csi_capacity(&dep, &cfg).unwrap();
    // the maximum sits at pure inputs where I_C = 0; I/2 gives −1
    assert_abs_diff_eq!(r.raw_value, 0.0, epsilon = 1e-4);
    assert_eq!(r.value, 0.0);
    let half = identity(2) * cr(0.5);
    assert_abs_diff_eq!(
        coherent_information_matrix(&half, &KrausChannel::fully_depolarizing()),
        -1.0,
        epsilon = 1e-12
    );
    let mixed = dilate(&[KrausChannel::identity(2), KrausChannel::fully_depolarizing()]);
    let r = entgen_csi_capacity(&mixed, &cfg).unwrap();
    assert!(r.value < 1e-4);
    assert_eq!(r.argmin_t.as_deref(), Some("t1"));
}

#[test]
fn ordering_and_monotonicity() {
    let cfg = quick();
    let base = CompoundWiretapSpec::classical(vec![pair(0.05, 0.3), pair(0.15, 0.35)]).unwrap();
    let csi = classical_csi_capacity(&base, &cfg).unwrap();
    let nocsi = classical_nocsi_lower(&base, &cfg).unwrap();
    assert!(nocsi.value <= csi.value + 1e-6);
    let more = base.with_pair(base.pairs()[0].clone()).unwrap();
    let bigger = CompoundWiretapSpec::classical(vec![pair(0.05, 0.3), pair(0.15, 0.35), pair(0.2, 0.25)]).unwrap();
    assert!(classical_csi_capacity(&bigger, &cfg).unwrap().value <= csi.value + 1e-9);
    assert!(classical_nocsi_lower(&bigger, &cfg).unwrap().value <= nocsi.value + 1e-6);
    assert_abs_diff_eq!(classical_csi_capacity(&more, &cfg).unwrap().value, csi.value, epsilon = 1e-12);
}

#[test]
fn aux_cardinality_is_monotone() {
    let spec = CompoundWiretapSpec::classical(vec![pair(0.1, 0.3), pair(0.2, 0.35)]).unwrap();
    let mut last = f64::NEG_INFINITY;
    for k in 1..=3 {
        let cfg = SolverConfig { aux_card: Some(k), ..quick() };
        let v = classical_nocsi_lower(&spec, &cfg).unwrap().raw_value;
        assert!(v >= last - 1e-12, "aux {k}: {v} < {last}");
        last = v;
    }
}

#[test]
fn solver_is_deterministic() {
    let spec = CompoundWiretapSpec::classical(vec![pair(0.1, 0.3), pair(0.2, 0.35)]).unwrap();
    let cfg = SolverConfig { seed: 17, ..quick() };
    let a = classical_nocsi_lower(&spec, &cfg).unwrap();
    let b = classical_nocsi_lower(&spec, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn config_validation() {
    assert!(SolverConfig { aux_card: Some(0), ..Default::default() }.validate().is_err());
    assert!(SolverConfig { grid_resolution: 1, ..Default::default() }.validate().is_err());
    assert!(SolverConfig::default().validate().is_ok());
    let _ = c(0.0, 0.0);
}
