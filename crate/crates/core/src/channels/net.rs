//! τ-nets over the CPTP maps of fixed dimensions.
//!
//! Candidates come from a Halton walk over the real parameters of the Choi
//! matrix, snapped to a lattice of step τ/4 and projected back onto the
//! CPTP set. The net is truncated at the caller's budget.

use std::collections::HashSet;

use rayon::prelude::*;

use super::diamond::{check_restarts, diamond_distance};
use super::KrausChannel;
use crate::error::{invalid, QwkError, Result};
use crate::qcore::{c, cr, eigh_unchecked, hermitian_map, identity, kron, partial_trace_matrix, psd_inv_sqrt, CMat};
use crate::rng::derive_key;

const PROJECTION_SWEEPS: usize = 200;
const MAX_CHOI_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TauNet {
    pub tau: f64,
    pub d_in: usize,
    pub d_out: usize,
    pub elements: Vec<KrausChannel>,
    /// The cardinality bound is `bound_base ^ bound_exponent`.
    pub bound_base: f64,
    pub bound_exponent: u32,
    pub lattice_step: f64,
    /// True when the budget stopped enumeration before the bound.
    pub truncated: bool,
}

impl TauNet {
    /// A hand-built net, trusted to cover at radius `tau`.
    pub fn from_elements(tau: f64, elements: Vec<KrausChannel>) -> Result<Self> {
        let first = elements.first().ok_or(QwkError::EmptyNet)?;
        let (d_in, d_out) = (first.d_in(), first.d_out());
        if elements.iter().any(|e| e.d_in() != d_in || e.d_out() != d_out) {
            return Err(QwkError::DimensionMismatch("net elements differ in dimension".into()));
        }
        let (bound_base, bound_exponent) = bound(tau, d_in, d_out);
        Ok(Self {
            tau,
            d_in,
            d_out,
            elements,
            bound_base,
            bound_exponent,
            lattice_step: tau / 4.0,
            truncated: false,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn bound_log10(&self) -> f64 {
        self.bound_exponent as f64 * self.bound_base.log10()
    }

    pub fn bound(&self) -> f64 {
        self.bound_base.powi(self.bound_exponent as i32)
    }
}

fn bound(tau: f64, d_in: usize, d_out: usize) -> (f64, u32) {
    ((3.0 / tau).max(1.0), (2 * (d_in * d_out).pow(2)) as u32)
}

/// Build a net of at most `budget` channels `d_in → d_out`.
pub fn build_tau_net(d_in: usize, d_out: usize, tau: f64, budget: usize) -> Result<TauNet> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", "must be a positive number"));
    }
    if budget == 0 {
        return Err(invalid("budget", "must be at least 1"));
    }
    if d_in == 0 || d_out == 0 {
        return Err(invalid("dim", "dimensions must be positive"));
    }
    let big = d_in * d_out;
    if big > MAX_CHOI_DIM {
        return Err(QwkError::CapExceeded(format!(
            "Choi dimension {big} exceeds {MAX_CHOI_DIM}"
        )));
    }
    let (bound_base, bound_exponent) = bound(tau, d_in, d_out);
    let step = tau / 4.0;
    let mut elements = Vec::new();
    if tau >= 2.0 {
        // every pair of channels is within 2
        elements.push(replacer(d_in, d_out));
    } else {
        let params = big * big;
        let primes = first_primes(params);
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        let mut chois: Vec<CMat> = Vec::new();
        let max_candidates = 50 * budget + 200;
        for idx in 1..=max_candidates {
            if elements.len() >= budget {
                break;
            }
            let coords: Vec<i64> = primes
                .iter()
                .enumerate()
                .map(|(p, &base)| {
                    let u = radical_inverse(idx as u64, base);
                    let (lo, hi) = if p < big { (0.0, 1.0) } else { (-1.0, 1.0) };
                    ((lo + u * (hi - lo)) / step).round() as i64
                })
                .collect();
            if !seen.insert(coords.clone()) {
                continue;
            }
            let choi = project_cptp(&choi_from_params(&coords, step, big), d_in, d_out);
            if chois.iter().any(|j| (j - &choi).camax() < 1e-9) {
                continue;
            }
            let k = exact_tp(KrausChannel::from_choi(&choi, d_in, d_out));
            chois.push(choi);
            elements.push(k);
        }
    }
    let truncated = tau < 2.0 && (elements.len() as f64) < bound_base.powi(bound_exponent as i32);
    Ok(TauNet {
        tau,
        d_in,
        d_out,
        elements,
        bound_base,
        bound_exponent,
        lattice_step: step,
        truncated,
    })
}

fn replacer(d_in: usize, d_out: usize) -> KrausChannel {
    let s = cr(1.0 / (d_out as f64).sqrt());
    let mut ops = Vec::new();
    for i in 0..d_in {
        for o in 0..d_out {
            let mut a = CMat::zeros(d_out, d_in);
            a[(o, i)] = s;
            ops.push(a);
        }
    }
    KrausChannel::new_unchecked(d_in, d_out, ops)
}

/// Diagonal entries first, then (re, im) of each strictly upper entry.
fn choi_from_params(coords: &[i64], step: f64, d: usize) -> CMat {
    let mut j = CMat::zeros(d, d);
    for i in 0..d {
        j[(i, i)] = cr(coords[i] as f64 * step);
    }
    let mut p = d;
    for r in 0..d {
        for s in r + 1..d {
            let z = c(coords[p] as f64 * step, coords[p + 1] as f64 * step);
            j[(r, s)] = z;
            j[(s, r)] = z.conj();
            p += 2;
        }
    }
    j
}

/// Alternating projections onto the PSD cone and the trace-preserving plane.
pub(crate) fn project_cptp(j: &CMat, d_in: usize, d_out: usize) -> CMat {
    let id_out = identity(d_out);
    let id_in = identity(d_in);
    let mut x = j.clone();
    for _ in 0..PROJECTION_SWEEPS {
        x = hermitian_map(&x, |l| l.max(0.0));
        let marg = partial_trace_matrix(&x, &[d_in, d_out], &[0]);
        x -= kron(&(marg - &id_in), &id_out) * cr(1.0 / d_out as f64);
    }
    hermitian_map(&x, |l| l.max(0.0))
}

/// Rescale Kraus operators so `Σ A*A = id` exactly.
fn exact_tp(k: KrausChannel) -> KrausChannel {
    let (d_in, d_out) = (k.d_in(), k.d_out());
    let mut ops = k.ops().to_vec();
    let mut s = CMat::zeros(d_in, d_in);
    for a in &ops {
        s += a.adjoint() * a;
    }
    let floor = eigh_unchecked(&s).values.last().copied().unwrap_or(0.0);
    if floor < 1e-6 {
        // lift singular directions with a small replacer component
        for a in replacer(d_in, d_out).ops() {
            ops.push(a * cr(1e-3));
        }
        s = CMat::zeros(d_in, d_in);
        for a in &ops {
            s += a.adjoint() * a;
        }
    }
    let fix = psd_inv_sqrt(&s, 0.0);
    KrausChannel::new_unchecked(d_in, d_out, ops.iter().map(|a| a * &fix).collect())
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(k);
    let mut n = 2u64;
    while out.len() < k {
        if out.iter().take_while(|&&p| p * p <= n).all(|&p| n % p != 0) {
            out.push(n);
        }
        n += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetMatch {
    pub index: usize,
    pub distance: f64,
    pub element: KrausChannel,
}

/// Element with the smallest estimated diamond distance to `target`;
/// ties go to the lowest index.
pub fn nearest_in_net(net: &TauNet, target: &KrausChannel, restarts: usize, seed: u64) -> Result<NetMatch> {
    if net.elements.is_empty() {
        return Err(QwkError::EmptyNet);
    }
    check_restarts(restarts)?;
    let dists: Vec<f64> = net
        .elements
        .par_iter()
        .enumerate()
        .map(|(i, e)| diamond_distance(e, target, restarts, derive_key(seed, 0, &[i as u64])).map(|d| d.value))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &d) in dists.iter().enumerate() {
        if d < dists[best] {
            best = i;
        }
    }
    Ok(NetMatch {
        index: best,
        distance: dists[best],
        element: net.elements[best].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{kraus_equivalent, paulis};

    #[test]
    fn elements_are_cptp() {
        let net = build_tau_net(2, 2, 0.5, 12).unwrap();
        assert_eq!(net.len(), 12);
        assert!(net.truncated);
        for e in &net.elements {
            assert!(e.completeness_residual() < 1e-10);
            let choi = e.choi();
            assert!(eigh_unchecked(&choi).values.iter().all(|&l| l > -1e-10));
        }
    }

    #[test]
    fn cardinality_bound_for_unit_tau() {
        let net = build_tau_net(2, 2, 1.0, 4).unwrap();
        assert_eq!(net.bound_exponent, 32);
        assert_eq!(net.bound_base, 3.0);
        assert_eq!(net.bound(), 1_853_020_188_851_841.0);
        assert!(net.len() <= 4);
    }

    #[test]
    fn wide_radius_needs_one_element() {
        let net = build_tau_net(2, 2, 2.5, 10).unwrap();
        assert_eq!(net.len(), 1);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_tau_net(2, 2, 0.5, 0).is_err());
        assert!(build_tau_net(2, 2, 0.0, 3).is_err());
        assert!(build_tau_net(2, 2, f64::NAN, 3).is_err());
    }

    #[test]
    fn projection_keeps_cptp_points() {
        let id = KrausChannel::identity(2);
        let p = project_cptp(&id.choi(), 2, 2);
        let k = KrausChannel::from_choi(&p, 2, 2);
        assert!(kraus_equivalent(&k, &id).unwrap());
    }

    #[test]
    fn nearest_finds_identity() {
        let [_, x, _, z] = paulis();
        let net = TauNet::from_elements(
            0.25,
            vec![
                KrausChannel::unitary(x).unwrap(),
                KrausChannel::identity(2),
                KrausChannel::unitary(z).unwrap(),
            ],
        )
        .unwrap();
        let m = nearest_in_net(&net, &KrausChannel::identity(2), 1, 3).unwrap();
        assert_eq!(m.index, 1);
        assert!(m.distance < 1e-12);
    }

    #[test]
    fn empty_net_is_rejected() {
        assert!(matches!(TauNet::from_elements(0.5, vec![]), Err(QwkError::EmptyNet)));
    }
}
