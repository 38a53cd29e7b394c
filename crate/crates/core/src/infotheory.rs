//! Entropies and mutual informations, all in bits.
//!
//! The conditional quantum entropy `conditional_qentropy(φ, P)` returns
//! `S(φ) − S(tr_Q φ)`: the conditioning system is the one that survives the
//! partial trace.

use crate::channels::{
    complementary_channel, kraus_to_stinespring, CQChannel, ClassicalChannel, KrausChannel,
    StinespringIsometry,
};
use crate::error::{QwkError, Result};
use crate::qcore::{eigenvalues_hermitian, CMat, DensityOperator, TOL_TRACE};

/// Eigenvalues below this count as zero inside entropy sums.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

fn plogp(p: f64) -> f64 {
    if p <= ENTROPY_CUTOFF {
        0.0
    } else {
        -p * p.log2()
    }
}

pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(QwkError::InvalidDistribution("empty distribution".into()));
    }
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= -TOL_TRACE)) {
        return Err(QwkError::InvalidDistribution(format!("entry {x} is negative or not finite")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > TOL_TRACE {
        return Err(QwkError::InvalidDistribution(format!("sums to {s}")));
    }
    Ok(())
}

/// Entropy of a nonnegative vector, no validation.
pub fn entropy_of(p: &[f64]) -> f64 {
    p.iter().map(|&x| plogp(x)).sum()
}

pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(entropy_of(p))
}

/// `I(X;Y) = H(Y) − H(Y|X)` for prior `p` through `ch`.
pub fn mutual_information(p: &[f64], ch: &ClassicalChannel) -> Result<f64> {
    check_distribution(p)?;
    if p.len() != ch.inputs() {
        return Err(QwkError::DimensionMismatch(format!(
            "prior over {} symbols, channel over {}",
            p.len(),
            ch.inputs()
        )));
    }
    Ok(mutual_information_unchecked(p, ch))
}

pub(crate) fn mutual_information_unchecked(p: &[f64], ch: &ClassicalChannel) -> f64 {
    let out = ch.push_forward(p);
    let cond: f64 = p
        .iter()
        .zip(ch.rows())
        .map(|(px, row)| px * entropy_of(row))
        .sum();
    (entropy_of(&out) - cond).max(0.0)
}

pub fn von_neumann_entropy_matrix(m: &CMat) -> f64 {
    entropy_of(&eigenvalues_hermitian(m))
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_of(&rho.eigenvalues())
}

/// `S(φ) − S(tr_Q φ)` where `cond_on` names the factors kept.
pub fn conditional_qentropy(phi: &DensityOperator, cond_on: &[&str]) -> Result<f64> {
    if phi.system().len() < 2 {
        return Err(QwkError::DimensionMismatch("conditional entropy needs a multipartite state".into()));
    }
    let reduced = phi.partial_trace(cond_on)?;
    Ok(von_neumann_entropy(phi) - von_neumann_entropy(&reduced))
}

/// Prior over labels together with one state per label.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    prior: Vec<f64>,
    states: Vec<CMat>,
}

impl Ensemble {
    pub fn new(prior: Vec<f64>, states: Vec<CMat>) -> Result<Self> {
        check_distribution(&prior)?;
        if prior.len() != states.len() {
            return Err(QwkError::DimensionMismatch(format!(
                "{} prior weights for {} states",
                prior.len(),
                states.len()
            )));
        }
        let d = states[0].nrows();
        for (x, s) in states.iter().enumerate() {
            if s.nrows() != d {
                return Err(QwkError::DimensionMismatch(format!("state {x} lives on another space")));
            }
            DensityOperator::on("q", s.clone()).map_err(|e| QwkError::InvalidState(format!("state {x}: {e}")))?;
        }
        Ok(Self { prior, states })
    }

    pub fn from_cq(prior: &[f64], ch: &CQChannel) -> Result<Self> {
        Self::new(prior.to_vec(), ch.states().to_vec())
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn states(&self) -> &[CMat] {
        &self.states
    }

    pub fn average(&self) -> CMat {
        let d = self.states[0].nrows();
        let mut m = CMat::zeros(d, d);
        for (p, s) in self.prior.iter().zip(&self.states) {
            if *p != 0.0 {
                m += s * crate::qcore::cr(*p);
            }
        }
        m
    }
}

/// `S(Σ P(x) ρ_x) − Σ P(x) S(ρ_x)`.
pub fn holevo_chi(e: &Ensemble) -> f64 {
    let avg = von_neumann_entropy_matrix(&e.average());
    let cond: f64 = e
        .prior
        .iter()
        .zip(&e.states)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, s)| p * von_neumann_entropy_matrix(s))
        .sum();
    (avg - cond).max(0.0)
}

/// `S(V|P) = Σ P(x) S(V(x))`.
pub fn conditional_channel_entropy(p: &[f64], v: &CQChannel) -> Result<f64> {
    check_distribution(p)?;
    if p.len() != v.inputs() {
        return Err(QwkError::DimensionMismatch("prior and channel alphabets differ".into()));
    }
    Ok(p
        .iter()
        .zip(v.states())
        .filter(|(px, _)| **px > 0.0)
        .map(|(px, s)| px * von_neumann_entropy_matrix(s))
        .sum())
}

/// Quantum channel in either representation.
#[derive(Debug, Clone, Copy)]
pub enum QuantumChannelRef<'a> {
    Kraus(&'a KrausChannel),
    Stinespring(&'a StinespringIsometry),
}

impl<'a> From<&'a KrausChannel> for QuantumChannelRef<'a> {
    fn from(k: &'a KrausChannel) -> Self {
        QuantumChannelRef::Kraus(k)
    }
}

impl<'a> From<&'a StinespringIsometry> for QuantumChannelRef<'a> {
    fn from(s: &'a StinespringIsometry) -> Self {
        QuantumChannelRef::Stinespring(s)
    }
}

/// `S(N(ρ)) − S((id⊗N)(ψ))` with `ψ` a purification of `ρ`.
pub fn coherent_information<'a>(rho: &DensityOperator, ch: impl Into<QuantumChannelRef<'a>>) -> Result<f64> {
    let k = match ch.into() {
        QuantumChannelRef::Kraus(k) => k.clone(),
        QuantumChannelRef::Stinespring(s) => crate::channels::stinespring_to_kraus(s),
    };
    if rho.dim() != k.d_in() {
        return Err(QwkError::DimensionMismatch(format!(
            "state dimension {} vs channel input {}",
            rho.dim(),
            k.d_in()
        )));
    }
    Ok(coherent_information_matrix(rho.matrix(), &k))
}

/// Purification-based evaluation with the canonical ancilla of size `d_in`.
pub(crate) fn coherent_information_matrix(rho: &CMat, k: &KrausChannel) -> f64 {
    coherent_information_with_ancilla(rho, k, k.d_in())
}

pub(crate) fn coherent_information_with_ancilla(rho: &CMat, k: &KrausChannel, ancilla: usize) -> f64 {
    use crate::qcore::{eigh_unchecked, cr, kron, identity};
    let d = k.d_in();
    let es = eigh_unchecked(rho);
    let mut psi = nalgebra::DVector::zeros(d * ancilla);
    for (i, &l) in es.values.iter().enumerate().take(ancilla) {
        if l <= 0.0 {
            continue;
        }
        let v = es.vectors.column(i);
        for a in 0..d {
            psi[a * ancilla + i] += v[a] * cr(l.sqrt());
        }
    }
    let id_r = identity(ancilla);
    let dout = k.d_out();
    let mut joint = CMat::zeros(dout * ancilla, dout * ancilla);
    for a in k.ops() {
        let v = kron(a, &id_r) * &psi;
        joint += &v * v.adjoint();
    }
    von_neumann_entropy_matrix(&k.apply_matrix(rho)) - von_neumann_entropy_matrix(&joint)
}

/// `S(N(ρ)) − S(N_c(ρ))` through the complementary channel.
pub fn coherent_information_via_environment(rho: &CMat, k: &KrausChannel) -> f64 {
    let s = kraus_to_stinespring(k);
    let nc = complementary_channel(&s);
    von_neumann_entropy_matrix(&k.apply_matrix(rho)) - von_neumann_entropy_matrix(&nc.apply_matrix(rho))
}

/// Right-hand side of the continuity bound `μ log d − μ log μ`.
pub fn fannes_bound(mu: f64, d: usize) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    mu * (d as f64).log2() - mu * mu.log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{cr, identity, ket, projector, random, HilbertLabel, PureState};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shannon_examples() {
        assert_abs_diff_eq!(shannon_entropy(&[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(shannon_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        let oracle = -(0.9f64 * 0.9f64.log2() + 0.1 * 0.1f64.log2());
        let h = shannon_entropy(&[0.9, 0.1]).unwrap();
        assert_abs_diff_eq!(h, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(h, 0.468996, epsilon = 1e-6);
        assert!(shannon_entropy(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let u = [0.5, 0.5];
        assert_abs_diff_eq!(mutual_information(&u, &ClassicalChannel::identity(2)).unwrap(), 1.0, epsilon = 1e-15);
        let c = ClassicalChannel::constant(2, &[0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(mutual_information(&[0.2, 0.8], &c).unwrap(), 0.0, epsilon = 1e-15);
        let i = mutual_information(&u, &ClassicalChannel::bsc(0.1)).unwrap();
        assert_abs_diff_eq!(i, 1.0 - binary_entropy(0.1), epsilon = 1e-14);
        assert_abs_diff_eq!(i, 0.531004, epsilon = 1e-6);
        assert!(mutual_information(&[1.0], &c).is_err());
    }

    #[test]
    fn von_neumann_examples() {
        assert_abs_diff_eq!(von_neumann_entropy_matrix(&(identity(2) * cr(0.5))), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(von_neumann_entropy_matrix(&projector(&ket(2, 1))), 0.0, epsilon = 1e-14);
        let d = DensityOperator::diagonal(HilbertLabel::new("a", 2), &[0.7, 0.3]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&d), binary_entropy(0.7), epsilon = 1e-14);
        assert_abs_diff_eq!(von_neumann_entropy(&d), 0.881291, epsilon = 1e-6);
    }

    #[test]
    fn conditional_entropy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random::density("p", 2, 2, &mut rng);
        let s = random::density("q", 2, 2, &mut rng);
        let prod = r.tensor(&s).unwrap();
        assert_abs_diff_eq!(conditional_qentropy(&prod, &["p"]).unwrap(), von_neumann_entropy(&s), epsilon = 1e-12);
        let me = PureState::maximally_entangled(HilbertLabel::new("p", 2), HilbertLabel::new("q", 2))
            .unwrap()
            .to_density();
        assert_abs_diff_eq!(conditional_qentropy(&me, &["p"]).unwrap(), -1.0, epsilon = 1e-12);
        let phi = random::density("p", 4, 4, &mut rng);
        let phi = DensityOperator::new(
            vec![HilbertLabel::new("p", 2), HilbertLabel::new("q", 2)],
            phi.into_matrix(),
        )
        .unwrap();
        let red = crate::qcore::partial_trace_matrix(phi.matrix(), &[2, 2], &[0]);
        let oracle = entropy_of(&eigenvalues_hermitian(phi.matrix())) - entropy_of(&eigenvalues_hermitian(&red));
        assert_abs_diff_eq!(conditional_qentropy(&phi, &["p"]).unwrap(), oracle, epsilon = 1e-12);
        assert!(conditional_qentropy(&phi, &["zz"]).is_err());
    }

    #[test]
    fn holevo_examples() {
        let z0 = projector(&ket(2, 0));
        let z1 = projector(&ket(2, 1));
        let e = Ensemble::new(vec![0.5, 0.5], vec![z0.clone(), z1]).unwrap();
        assert_abs_diff_eq!(holevo_chi(&e), 1.0, epsilon = 1e-14);
        let e = Ensemble::new(vec![0.3, 0.7], vec![z0.clone(), z0.clone()]).unwrap();
        assert_abs_diff_eq!(holevo_chi(&e), 0.0, epsilon = 1e-14);
        let plus = projector(&((ket(2, 0) + ket(2, 1)) * cr(0.5f64.sqrt())));
        let e = Ensemble::new(vec![0.5, 0.5], vec![z0, plus]).unwrap();
        let oracle = binary_entropy((1.0 + 0.5f64.sqrt()) / 2.0);
        assert_abs_diff_eq!(holevo_chi(&e), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(holevo_chi(&e), 0.600876, epsilon = 1e-6);
    }

    #[test]
    fn coherent_information_examples() {
        let half = DensityOperator::maximally_mixed(HilbertLabel::new("a", 2));
        assert_abs_diff_eq!(coherent_information(&half, &KrausChannel::identity(2)).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            coherent_information(&half, &KrausChannel::fully_depolarizing()).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let k = crate::channels::random_kraus(2, 3, &mut rng);
            let rho = random::density_matrix(2, 2, &mut rng);
            let a = coherent_information_matrix(&rho, &k);
            assert_abs_diff_eq!(a, coherent_information_via_environment(&rho, &k), epsilon = 1e-8);
            assert_abs_diff_eq!(a, coherent_information_with_ancilla(&rho, &k, 4), epsilon = 1e-8);
        }
        let s = kraus_to_stinespring(&KrausChannel::identity(2));
        assert!(coherent_information(&DensityOperator::maximally_mixed(HilbertLabel::new("a", 3)), &s).is_err());
    }

    #[test]
    fn conditional_channel_entropy_examples() {
        let pure = CQChannel::new(vec![projector(&ket(2, 0)), projector(&ket(2, 1))]).unwrap();
        assert_abs_diff_eq!(conditional_channel_entropy(&[0.4, 0.6], &pure).unwrap(), 0.0, epsilon = 1e-14);
        let mixed = CQChannel::constant(3, identity(2) * cr(0.5)).unwrap();
        assert_abs_diff_eq!(conditional_channel_entropy(&[0.2, 0.3, 0.5], &mixed).unwrap(), 1.0, epsilon = 1e-14);
        let d = crate::qcore::CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(0.7), cr(0.3)]));
        let v = CQChannel::new(vec![d, identity(2) * cr(0.5)]).unwrap();
        let s = conditional_channel_entropy(&[0.5, 0.5], &v).unwrap();
        assert_abs_diff_eq!(s, 0.5 * binary_entropy(0.7) + 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s, 0.940645, epsilon = 1e-6);
    }

    #[test]
    fn fannes_bound_shape() {
        assert_eq!(fannes_bound(0.0, 2), 0.0);
        assert!(fannes_bound(0.1, 2) > 0.1);
    }
}
