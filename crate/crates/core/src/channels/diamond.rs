//! Seesaw lower bound on the diamond-norm distance.

use rayon::prelude::*;

use super::KrausChannel;
use crate::error::{invalid, QwkError, Result};
use crate::qcore::{cr, eigh_unchecked, identity, ket, kron, kron_vec, random, CMat, CVec};
use crate::rng::{domain, stream};

const MAX_SWEEPS: usize = 200;
const SWEEP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct DiamondEstimate {
    /// `‖(N₁−N₂)⊗id (ψ)‖₁` at the best input found.
    pub value: f64,
    /// Best input on `in ⊗ ref`.
    pub input: CVec,
    /// Always true: the seesaw only certifies achieved values.
    pub lower_bound: bool,
    pub starts: usize,
}

struct Difference {
    plus: Vec<CMat>,
    minus: Vec<CMat>,
    d_in: usize,
}

impl Difference {
    fn new(a: &KrausChannel, b: &KrausChannel) -> Self {
        let r = identity(a.d_in());
        Self {
            plus: a.ops().iter().map(|k| kron(k, &r)).collect(),
            minus: b.ops().iter().map(|k| kron(k, &r)).collect(),
            d_in: a.d_in(),
        }
    }

    fn output(&self, psi: &CVec) -> CMat {
        let d = self.plus[0].nrows();
        let mut x = CMat::zeros(d, d);
        for k in &self.plus {
            let v = k * psi;
            x += &v * v.adjoint();
        }
        for k in &self.minus {
            let v = k * psi;
            x -= &v * v.adjoint();
        }
        x
    }

    fn adjoint(&self, m: &CMat) -> CMat {
        let d = self.d_in * self.d_in;
        let mut g = CMat::zeros(d, d);
        for k in &self.plus {
            g += k.adjoint() * m * k;
        }
        for k in &self.minus {
            g -= k.adjoint() * m * k;
        }
        g
    }

    /// Alternate sign(X) and top eigenvector until the value settles.
    fn seesaw(&self, mut psi: CVec) -> (f64, CVec) {
        let mut best = f64::NEG_INFINITY;
        let mut best_psi = psi.clone();
        for _ in 0..MAX_SWEEPS {
            let es = eigh_unchecked(&self.output(&psi));
            let value: f64 = es.values.iter().map(|l| l.abs()).sum();
            if value > best + SWEEP_TOL {
                best = value;
                best_psi = psi.clone();
            } else {
                break;
            }
            let signs = CVec::from_iterator(
                es.values.len(),
                es.values.iter().map(|&l| cr(if l >= 0.0 { 1.0 } else { -1.0 })),
            );
            let m = &es.vectors * CMat::from_diagonal(&signs) * es.vectors.adjoint();
            let g = eigh_unchecked(&self.adjoint(&m));
            psi = g.vector(0);
        }
        (best, best_psi)
    }
}

/// Lower estimate of `‖N₁ − N₂‖◇` from a deterministic set of starts plus
/// `restarts` Haar-random pure inputs keyed by `seed`.
pub fn diamond_distance(
    n1: &KrausChannel,
    n2: &KrausChannel,
    restarts: usize,
    seed: u64,
) -> Result<DiamondEstimate> {
    if n1.d_in() != n2.d_in() || n1.d_out() != n2.d_out() {
        return Err(QwkError::DimensionMismatch(format!(
            "channels {}→{} and {}→{}",
            n1.d_in(),
            n1.d_out(),
            n2.d_in(),
            n2.d_out()
        )));
    }
    let d = n1.d_in();
    if d * d * n1.d_out() > 4096 {
        return Err(QwkError::CapExceeded("diamond estimate beyond 4096-dimensional output".into()));
    }
    let diff = Difference::new(n1, n2);
    let mut starts = deterministic_starts(d);
    let fixed = starts.len();
    for r in 0..restarts {
        let mut rng = stream(seed, domain::DIAMOND, &[r as u64]);
        starts.push(random::pure_vector(d * d, &mut rng));
    }
    let results: Vec<(f64, CVec)> = starts.into_par_iter().map(|s| diff.seesaw(s)).collect();
    let (value, input) = results
        .into_iter()
        .fold((f64::NEG_INFINITY, CVec::zeros(0)), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(DiamondEstimate {
        value: value.clamp(0.0, 2.0),
        input,
        lower_bound: true,
        starts: fixed + restarts,
    })
}

fn deterministic_starts(d: usize) -> Vec<CVec> {
    let mut out = Vec::new();
    let mut me = CVec::zeros(d * d);
    for i in 0..d {
        me[i * d + i] = cr(1.0 / (d as f64).sqrt());
    }
    out.push(me);
    let r0 = ket(d, 0);
    for i in 0..d {
        out.push(kron_vec(&ket(d, i), &r0));
    }
    for i in 1..d {
        let plus = (ket(d, 0) + ket(d, i)) * cr(0.5f64.sqrt());
        out.push(kron_vec(&plus, &r0));
        let iplus = (ket(d, 0) + ket(d, i) * crate::qcore::c(0.0, 1.0)) * cr(0.5f64.sqrt());
        out.push(kron_vec(&iplus, &r0));
    }
    out
}

pub(crate) fn check_restarts(restarts: usize) -> Result<()> {
    if restarts > 10_000 {
        return Err(invalid("restarts", "at most 10000"));
    }
    Ok(())
}
