//! Strongly typical words and typical subspaces.
//!
//! A typical projector is a union of eigenspaces of an n-fold product
//! state: an eigen-word with eigenvalue product `λ` is kept when
//! `|−log λ − c| ≤ K·m·d·α·√n`, where `c` is the entropy of the product
//! (`n·S(ρ)`, or `Σᵢ S(V(xᵢ))` for a channel word) and `m` is 1 or `a`.
//! The rule depends only on eigenvalues, so degenerate eigenspaces are kept
//! or dropped as a whole.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::channels::{index_word, CQChannel};
use crate::error::{invalid, QwkError, Result};
use crate::infotheory::{check_distribution, entropy_of, von_neumann_entropy_matrix};
use crate::qcore::{eigh_unchecked, psd_sqrt, trace_norm, CMat, Eigensystem};

/// Default multiplier in the typical-subspace exponents.
pub const DEFAULT_K: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalParams {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub k_const: f64,
}

impl TypicalParams {
    pub fn new(n: usize, delta: f64, alpha: f64, k_const: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        for (name, v) in [("delta", delta), ("alpha", alpha), ("k_const", k_const)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self { n, delta, alpha, k_const })
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    /// `lhs ≤ rhs` up to a relative slack of 1e-9.
    pub fn le(id: &str, lhs: f64, rhs: f64) -> Self {
        let pass = lhs <= rhs + 1e-9 * rhs.abs().max(1.0);
        Self { bound_id: id.into(), lhs, rhs, pass }
    }

    pub fn ge(id: &str, lhs: f64, rhs: f64) -> Self {
        let pass = lhs + 1e-9 * rhs.abs().max(1.0) >= rhs;
        Self { bound_id: id.into(), lhs, rhs, pass }
    }
}

// ---------------------------------------------------------------------------
// Classical typicality

fn counts(word: &[usize], a: usize) -> Vec<usize> {
    let mut c = vec![0; a];
    for &x in word {
        c[x] += 1;
    }
    c
}

/// Empirical distribution of a word.
pub fn word_type(word: &[usize], a: usize) -> Vec<f64> {
    let n = word.len() as f64;
    counts(word, a).into_iter().map(|c| c as f64 / n).collect()
}

pub fn is_typical(word: &[usize], p: &[f64], delta: f64) -> bool {
    if word.iter().any(|&x| x >= p.len()) {
        return false;
    }
    let n = word.len() as f64;
    counts(word, p.len()).iter().zip(p).all(|(&c, &px)| {
        if px == 0.0 {
            c == 0
        } else {
            (c as f64 / n - px).abs() <= delta + 1e-12
        }
    })
}

/// Every word of length `n` whose frequencies are within `delta` of `p`.
pub fn typical_set(p: &[f64], n: usize, delta: f64) -> Result<Vec<Vec<usize>>> {
    check_distribution(p)?;
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    let total = caps::checked_pow("word enumeration", p.len(), n, caps::MAX_ENUM)?;
    Ok((0..total)
        .map(|i| index_word(i, p.len(), n))
        .filter(|w| is_typical(w, p, delta))
        .collect())
}

/// `pⁿ` restricted to the typical set and renormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTypical {
    pub words: Vec<Vec<usize>>,
    pub probs: Vec<f64>,
    /// `pⁿ(T)` before renormalisation.
    pub mass: f64,
    cdf: Vec<f64>,
}

impl TruncatedTypical {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[usize] {
        &self.words[self.sample_index(rng)]
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.words.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn truncated_typical(p: &[f64], n: usize, delta: f64) -> Result<TruncatedTypical> {
    let words = typical_set(p, n, delta)?;
    if words.is_empty() {
        return Err(QwkError::EmptyTypicalSet);
    }
    let raw: Vec<f64> = words.iter().map(|w| w.iter().map(|&x| p[x]).product()).collect();
    let mass: f64 = raw.iter().sum();
    if mass <= 0.0 {
        return Err(QwkError::EmptyTypicalSet);
    }
    let probs: Vec<f64> = raw.iter().map(|r| r / mass).collect();
    let mut acc = 0.0;
    let cdf = probs
        .iter()
        .map(|q| {
            acc += q;
            acc
        })
        .collect();
    Ok(TruncatedTypical { words, probs, mass, cdf })
}

// ---------------------------------------------------------------------------
// Typical projectors

/// Spectral projector of an n-fold product, stored as local eigenbases plus
/// the kept eigen-words.
#[derive(Debug, Clone)]
pub struct TypicalProjector {
    /// Eigensystem at each position.
    locals: Vec<Eigensystem>,
    /// Kept eigen-words, as mixed-radix indices.
    kept: Vec<usize>,
    /// `Σ -log λ` of each kept word.
    centre: f64,
    slack: f64,
    pub params: TypicalParams,
    pub report: Vec<BoundCheck>,
}

impl TypicalProjector {
    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn local_dim(&self) -> usize {
        self.locals[0].values.len()
    }

    pub fn dim(&self) -> usize {
        self.local_dim().pow(self.n() as u32)
    }

    pub fn centre(&self) -> f64 {
        self.centre
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }

    pub fn passes(&self) -> bool {
        self.report.iter().all(|b| b.pass)
    }

    /// Dense matrix; subject to the dimension cap.
    pub fn matrix(&self) -> Result<CMat> {
        let dim = self.dim();
        caps::check_dim("typical projector", dim)?;
        let d = self.local_dim();
        let mut m = CMat::zeros(dim, dim);
        for &k in &self.kept {
            let v = self.eigenvector(k, d);
            m += &v * v.adjoint();
        }
        Ok(m)
    }

    fn eigenvector(&self, k: usize, d: usize) -> crate::qcore::CVec {
        let word = index_word(k, d, self.n());
        let mut v = self.locals[0].vector(word[0]);
        for (pos, &i) in word.iter().enumerate().skip(1) {
            v = crate::qcore::kron_vec(&v, &self.locals[pos].vector(i));
        }
        v
    }

    /// `tr(σ₁ ⊗ ⋯ ⊗ σₙ · Π)` without forming either operator.
    pub fn weight_on_product(&self, factors: &[CMat]) -> f64 {
        let d = self.local_dim();
        let diag: Vec<Vec<f64>> = factors
            .iter()
            .zip(&self.locals)
            .map(|(s, es)| {
                (0..d)
                    .map(|i| {
                        let v = es.vectors.column(i);
                        (v.adjoint() * s * v)[(0, 0)].re
                    })
                    .collect()
            })
            .collect();
        let n = self.n();
        self.kept
            .iter()
            .map(|&k| {
                index_word(k, d, n)
                    .iter()
                    .enumerate()
                    .map(|(pos, &i)| diag[pos][i])
                    .product::<f64>()
            })
            .sum()
    }
}

struct Spectral {
    values: Vec<Vec<f64>>,
}

/// Enumerate eigen-words of `⊗ σᵢ` and keep those within `slack` of `centre`.
fn select(locals: &[Eigensystem], centre: f64, slack: f64) -> Result<(Vec<usize>, Spectral)> {
    let d = locals[0].values.len();
    let n = locals.len();
    let total = caps::checked_pow("typical projector", d, n, caps::max_dim())?;
    let values: Vec<Vec<f64>> = locals
        .iter()
        .map(|es| es.values.iter().map(|&l| l.max(0.0)).collect())
        .collect();
    let logs: Vec<Vec<f64>> = values
        .iter()
        .map(|v| v.iter().map(|&l| if l > 1e-300 { -l.log2() } else { f64::INFINITY }).collect())
        .collect();
    let kept = (0..total)
        .filter(|&k| {
            let w = index_word(k, d, n);
            let s: f64 = w.iter().enumerate().map(|(pos, &i)| logs[pos][i]).sum();
            s.is_finite() && (s - centre).abs() <= slack + 1e-12
        })
        .collect();
    Ok((kept, Spectral { values }))
}

fn word_stats(kept: &[usize], sp: &Spectral, d: usize, n: usize) -> (f64, f64) {
    // (captured weight, largest kept eigenvalue)
    let mut weight = 0.0;
    let mut top: f64 = 0.0;
    for &k in kept {
        let w = index_word(k, d, n);
        let l: f64 = w.iter().enumerate().map(|(pos, &i)| sp.values[pos][i]).product();
        weight += l;
        top = top.max(l);
    }
    (weight, top)
}

fn build(
    locals: Vec<Eigensystem>,
    centre: f64,
    multiplier: f64,
    params: TypicalParams,
    ids: [&str; 3],
) -> Result<TypicalProjector> {
    let d = locals[0].values.len() as f64;
    let n = params.n as f64;
    let slack = params.k_const * multiplier * d * params.alpha * n.sqrt();
    let (kept, sp) = select(&locals, centre, slack)?;
    let (weight, top) = word_stats(&kept, &sp, locals[0].values.len(), params.n);
    let rank = kept.len() as f64;
    let report = vec![
        BoundCheck::ge(ids[0], weight, 1.0 - multiplier * d / (4.0 * n * params.alpha.powi(2))),
        BoundCheck::le(ids[1], rank.max(1.0).log2(), centre + slack),
        BoundCheck::le(ids[2], top, (-centre + slack).exp2()),
    ];
    Ok(TypicalProjector { locals, kept, centre, slack, params, report })
}

/// Typical subspace of `ρ^{⊗n}`.
pub fn typical_projector(rho: &CMat, params: TypicalParams) -> Result<TypicalProjector> {
    let es = eigh_unchecked(rho);
    let s = entropy_of(&es.values);
    build(vec![es; params.n], params.n as f64 * s, 1.0, params, ["te1", "te2", "te3"])
}

/// Conditionally typical subspace of `V^{⊗n}(xⁿ)`, centred on the entropy
/// of the word's own type.
pub fn conditional_typical_projector(
    v: &CQChannel,
    word: &[usize],
    prior: &[f64],
    params: TypicalParams,
) -> Result<TypicalProjector> {
    if word.len() != params.n {
        return Err(invalid("word", format!("length {} differs from n = {}", word.len(), params.n)));
    }
    if prior.len() != v.inputs() || !is_typical(word, prior, params.delta) {
        return Err(QwkError::AtypicalWord);
    }
    let per_letter: Vec<Eigensystem> = (0..v.inputs()).map(|x| eigh_unchecked(v.state(x))).collect();
    let locals: Vec<Eigensystem> = word.iter().map(|&x| per_letter[x].clone()).collect();
    let centre: f64 = word.iter().map(|&x| entropy_of(&per_letter[x].values)).sum();
    build(locals, centre, v.inputs() as f64, params, ["te4", "te5", "te6"])
}

/// Typical subspace of the average output with `α` scaled by `√a`.
pub fn averaged_output_projector(prior: &[f64], v: &CQChannel, params: TypicalParams) -> Result<TypicalProjector> {
    check_distribution(prior)?;
    if prior.len() != v.inputs() {
        return Err(QwkError::DimensionMismatch("prior and channel alphabets differ".into()));
    }
    let scaled = params.with_alpha(params.alpha * (v.inputs() as f64).sqrt());
    let mut pi = typical_projector(&v.average(prior), scaled)?;
    pi.params = params;
    Ok(pi)
}

/// Weight the averaged projector assigns to `V^{⊗n}(xⁿ)` against `1 − ad/(4nα²)`.
pub fn check_averaged_weight(pi: &TypicalProjector, v: &CQChannel, word: &[usize]) -> BoundCheck {
    let factors: Vec<CMat> = word.iter().map(|&x| v.state(x).clone()).collect();
    let a = v.inputs() as f64;
    let d = v.dim() as f64;
    let n = word.len() as f64;
    BoundCheck::ge(
        "te7",
        pi.weight_on_product(&factors),
        1.0 - a * d / (4.0 * n * pi.params.alpha.powi(2)),
    )
}

/// `Q(xⁿ) = Π_avg Π(xⁿ) V^{⊗n}(xⁿ) Π(xⁿ) Π_avg` and its trace-norm distance
/// to `V^{⊗n}(xⁿ)` against `√(2(ad+d)/(nα²))`.
pub fn sandwich_check(
    v: &CQChannel,
    prior: &[f64],
    word: &[usize],
    params: TypicalParams,
) -> Result<(CMat, BoundCheck)> {
    let avg = averaged_output_projector(prior, v, params)?.matrix()?;
    let cond = conditional_typical_projector(v, word, prior, params)?.matrix()?;
    let out = v.word_output(word)?;
    let q = &avg * &cond * &out * &cond * &avg;
    let dist = trace_norm(&(&q - &out));
    let (a, d, n) = (v.inputs() as f64, v.dim() as f64, params.n as f64);
    let rhs = (2.0 * (a * d + d) / (n * params.alpha.powi(2))).sqrt();
    Ok((q, BoundCheck::le("sandwich", dist, rhs)))
}

/// `‖ρ − √X ρ √X‖₁ ≤ √(8λ)` with `λ = 1 − tr(ρX)`.
pub fn gentle_measurement_check(rho: &CMat, x: &CMat) -> BoundCheck {
    let lambda = (1.0 - (rho * x).trace().re).max(0.0);
    let sx = psd_sqrt(x);
    let lhs = trace_norm(&(rho - &sx * rho * &sx));
    BoundCheck::le("gentle", lhs, (8.0 * lambda).sqrt())
}

/// `|S(Φ) − S(Ψ)| ≤ μ log d − μ log μ` for `μ = ‖Φ − Ψ‖₁ < 1/e`.
pub fn fannes_check(a: &CMat, b: &CMat) -> BoundCheck {
    let mu = trace_norm(&(a - b));
    let lhs = (von_neumann_entropy_matrix(a) - von_neumann_entropy_matrix(b)).abs();
    BoundCheck::le("fannes", lhs, crate::infotheory::fannes_bound(mu, a.nrows()))
}

/// Smallest `K` at which the weight bound of a typical projector holds.
pub fn minimal_k(rho: &CMat, n: usize, alpha: f64) -> Result<f64> {
    let es = eigh_unchecked(rho);
    let d = es.values.len();
    let centre = n as f64 * entropy_of(&es.values);
    let total = caps::checked_pow("typical projector", d, n, caps::max_dim())?;
    let target = 1.0 - d as f64 / (4.0 * n as f64 * alpha * alpha);
    let mut devs: Vec<(f64, f64)> = (0..total)
        .filter_map(|k| {
            let w = index_word(k, d, n);
            let l: f64 = w.iter().map(|&i| es.values[i].max(0.0)).product();
            (l > 1e-300).then(|| ((-l.log2() - centre).abs(), l))
        })
        .collect();
    devs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = d as f64 * alpha * (n as f64).sqrt();
    let mut acc = 0.0;
    if target <= 0.0 {
        return Ok(0.0);
    }
    let mut i = 0;
    while i < devs.len() {
        let dev = devs[i].0;
        while i < devs.len() && devs[i].0 <= dev + 1e-12 {
            acc += devs[i].1;
            i += 1;
        }
        if acc + 1e-12 >= target {
            return Ok(dev / scale);
        }
    }
    Ok(f64::INFINITY)
}
