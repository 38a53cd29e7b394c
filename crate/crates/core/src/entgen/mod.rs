//! Entanglement generation over a compound quantum channel, simulated by
//! exact state-vector evolution.
//!
//! Layout conventions: a post-channel vector lives on `Q ⊗ E ⊗ R` with
//! index `(q·dE + e)·dR + r`, where `R` is the classical register
//! `(j, l, t)` with `r = (j·L + l)·(T+1) + t` and `t = T` the fail outcome.
//! All fidelities are root fidelities `‖√ρ√σ‖₁`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::channels::StinespringIsometry;
use crate::error::{invalid, QwkError, Result};
use crate::qcore::{c, cr, eigh_unchecked, identity, psd_inv_sqrt, psd_sqrt, CMat, CVec, C64};
use crate::rng::{domain, stream};
use crate::typicality::{truncated_typical, BoundCheck};

#[cfg(test)]
mod tests;

pub const MAX_BLOCK: usize = 3;
pub const MAX_MESSAGES: usize = 4;
pub const MAX_DEPTH: usize = 4;
pub const MAX_STATES: usize = 3;
/// Eigenvalues below this are treated as outside the support.
const SUPPORT_CUT: f64 = 1e-12;
const DRAW_ATTEMPTS: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub state: CMat,
    /// Present when the codeword is pure.
    pub vector: Option<CVec>,
}

impl Codeword {
    pub fn pure(v: CVec) -> Self {
        Self { state: &v * v.adjoint(), vector: Some(v) }
    }

    pub fn mixed(state: CMat) -> Self {
        Self { state, vector: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurifyEntry {
    pub index: usize,
    pub threshold: f64,
    pub chosen_weight: f64,
    pub meets_threshold: bool,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAlignment {
    /// One-based Fourier index per message.
    pub k: Vec<usize>,
    /// Phase applied to the ideal state, per message.
    pub r: Vec<f64>,
    /// Phase that makes the averaged overlap real, per message.
    pub s: Vec<f64>,
    /// `|mean over t|` of the overlap at `k`, per message.
    pub mean_overlap: Vec<f64>,
    /// Aligned real overlap, `[j][t]`.
    pub aligned: Vec<Vec<f64>>,
    /// `|⟨ψ|ζ ⊗ register⟩|`, `[t][j·L + l]`.
    pub partner_overlap: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrections {
    /// Unitary on `Q ⊗ L` per `[t][j]`.
    pub unitaries: Vec<Vec<CMat>>,
    /// `|⟨ξ_t| U |ϖ_{j,t}⟩|`, `[t][j]`.
    pub overlap: Vec<Vec<f64>>,
    /// Purification of `ξ_t` as an `E × (Q·L)` matrix.
    pub targets: Vec<CMat>,
    /// Spectral weight of `ξ_t` dropped when it does not fit in `Q ⊗ L`.
    pub truncated: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntgenCode {
    pub n: usize,
    pub messages: usize,
    pub depth: usize,
    pub states: usize,
    pub d_out: usize,
    pub d_env: usize,
    /// Input words behind each codeword, when sampled from a basis.
    pub words: Vec<Vec<usize>>,
    /// Indexed `j·L + l`.
    pub codewords: Vec<Codeword>,
    /// `D_{t,j,l}` at register index `r(j,l,t)`; fail slots hold zero.
    pub measurement: Vec<CMat>,
    /// Largest eigenvalue of `Σ D − id`.
    pub measurement_excess: f64,
    /// Unitary on `Qⁿ ⊗ R`.
    pub block: CMat,
    pub block_residual: f64,
    /// `tr(D_{t,j,l} σ_{t,j,l})`, `[t][j·L + l]`.
    pub eqx1: Vec<Vec<f64>>,
    /// Probability that `(j,l)` is decoded with any state label.
    pub eqx1_pooled: Vec<Vec<f64>>,
    /// `‖ω_{j,t} − ξ_t‖₁`, `[t][j]`.
    pub wir: Vec<Vec<f64>>,
    /// Environment average `ξ_t`.
    pub xi: Vec<CMat>,
    pub purification: Vec<PurifyEntry>,
    pub alignment: Option<PhaseAlignment>,
    /// Normalised partners `ζ_{j,l,t}` on `Q ⊗ E`, `[t][j·L + l]`.
    pub partners: Vec<Vec<CVec>>,
    pub corrections: Option<Corrections>,
}

impl EntgenCode {
    pub fn register_dim(&self) -> usize {
        self.messages * self.depth * (self.states + 1)
    }

    pub fn register_index(&self, j: usize, l: usize, t: usize) -> usize {
        (j * self.depth + l) * (self.states + 1) + t
    }

    fn dq(&self) -> usize {
        self.d_out.pow(self.n as u32)
    }

    fn de(&self) -> usize {
        self.d_env.pow(self.n as u32)
    }

    fn is_pure(&self) -> bool {
        self.codewords.iter().all(|w| w.vector.is_some())
    }
}

// ---------------------------------------------------------------------------
// Channel plumbing

struct Family {
    d_in: usize,
    d_out: usize,
    d_env: usize,
    /// n-fold isometries with rows ordered `(Qⁿ, Eⁿ)`.
    blocks: Vec<CMat>,
}

fn pad_env(s: &StinespringIsometry, d_env: usize) -> CMat {
    let (d_out, de) = (s.d_out(), s.d_env());
    let mut out = CMat::zeros(d_out * d_env, s.d_in());
    for o in 0..d_out {
        for e in 0..de {
            for i in 0..s.d_in() {
                out[(o * d_env + e, i)] = s.matrix()[(o * de + e, i)];
            }
        }
    }
    out
}

/// `U^{⊗n}` with output factors regrouped from `(q₁e₁)(q₂e₂)…` to `(q₁q₂…)(e₁e₂…)`.
fn n_fold_isometry(u: &CMat, d_out: usize, d_env: usize, n: usize) -> CMat {
    let mut acc = u.clone();
    for _ in 1..n {
        acc = acc.kronecker(u);
    }
    let (dq, de) = (d_out.pow(n as u32), d_env.pow(n as u32));
    let mut out = CMat::zeros(dq * de, acc.ncols());
    let pair = d_out * d_env;
    for row in 0..acc.nrows() {
        let (mut q, mut e, mut rest) = (0, 0, row);
        let mut scale = pair.pow(n as u32 - 1);
        for _ in 0..n {
            let digit = rest / scale;
            rest %= scale;
            scale /= pair.max(1);
            q = q * d_out + digit / d_env;
            e = e * d_env + digit % d_env;
        }
        out.set_row(q * de + e, &acc.row(row));
    }
    out
}

fn prepare_family(family: &[StinespringIsometry], n: usize) -> Result<Family> {
    let first = family.first().ok_or_else(|| invalid("family", "needs at least one channel"))?;
    let (d_in, d_out) = (first.d_in(), first.d_out());
    if family.iter().any(|s| s.d_in() != d_in || s.d_out() != d_out) {
        return Err(QwkError::DimensionMismatch("family members must share input and output dimensions".into()));
    }
    let d_env = family.iter().map(|s| s.d_env()).max().unwrap_or(1);
    let blocks = family.iter().map(|s| n_fold_isometry(&pad_env(s, d_env), d_out, d_env, n)).collect();
    Ok(Family { d_in, d_out, d_env, blocks })
}

fn check_family(code: &EntgenCode, family: &[StinespringIsometry]) -> Result<Family> {
    if family.len() != code.states {
        return Err(QwkError::DimensionMismatch(format!(
            "code was built for {} states, family has {}",
            code.states,
            family.len()
        )));
    }
    let f = prepare_family(family, code.n)?;
    if f.d_out != code.d_out || f.d_env != code.d_env {
        return Err(QwkError::DimensionMismatch("family does not match the code".into()));
    }
    Ok(f)
}

/// `U^{⊗n}|κ⟩` reshaped to `Qⁿ × Eⁿ`.
fn output_matrix(block: &CMat, v: &CVec, dq: usize, de: usize) -> CMat {
    let out = block * v;
    CMat::from_fn(dq, de, |q, e| out[q * de + e])
}

/// Joint output `U^{⊗n} ρ U^{⊗n}*` on `Qⁿ ⊗ Eⁿ`.
fn joint_output(block: &CMat, state: &CMat) -> CMat {
    block * state * block.adjoint()
}

fn reduce_q(joint: &CMat, dq: usize, de: usize) -> CMat {
    CMat::from_fn(dq, dq, |a, b| (0..de).map(|e| joint[(a * de + e, b * de + e)]).sum())
}

fn reduce_e(joint: &CMat, dq: usize, de: usize) -> CMat {
    CMat::from_fn(de, de, |a, b| (0..dq).map(|q| joint[(q * de + a, q * de + b)]).sum())
}

fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

fn trace_norm_h(m: &CMat) -> f64 {
    eigh_unchecked(m).values.iter().map(|l| l.abs()).sum()
}

// ---------------------------------------------------------------------------
// Construction

fn check_sizes(n: usize, messages: usize, depth: usize, states: usize) -> Result<()> {
    if messages == 0 {
        return Err(invalid("messages", "message dimension must be at least 1"));
    }
    if depth == 0 {
        return Err(invalid("depth", "must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let over = [("n", n, MAX_BLOCK), ("messages", messages, MAX_MESSAGES), ("depth", depth, MAX_DEPTH), ("states", states, MAX_STATES)];
    for (what, v, cap) in over {
        if v > cap {
            return Err(QwkError::CapExceeded(format!("{what} = {v} exceeds the simulation budget {cap}")));
        }
    }
    Ok(())
}

/// Distinct typical words, drawn one codeword at a time.
fn draw_words(p: &[f64], n: usize, count: usize, delta: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    let tt = truncated_typical(p, n, delta)?;
    if tt.len() < count {
        return Err(invalid(
            "messages",
            format!("typical set has {} words, {count} distinct codewords needed", tt.len()),
        ));
    }
    let mut taken = vec![false; tt.len()];
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = stream(seed, domain::ENCODER, &[i as u64]);
        let mut pick = None;
        for _ in 0..DRAW_ATTEMPTS {
            let k = tt.sample_index(&mut rng);
            if !taken[k] {
                pick = Some(k);
                break;
            }
        }
        // rejection can stall when little mass is left; fall back to the first free word
        let k = pick.unwrap_or_else(|| taken.iter().position(|&t| !t).unwrap_or(0));
        taken[k] = true;
        out.push(tt.words[k].clone());
    }
    Ok(out)
}

fn product_vector(basis: &CMat, word: &[usize]) -> CVec {
    let mut v = CVec::from_element(1, cr(1.0));
    for &x in word {
        v = v.kronecker(&basis.column(x).into_owned());
    }
    v
}

/// Codewords `|φ_{x₁}⟩ ⊗ … ⊗ |φ_{xₙ}⟩` over distinct typical words of `p`.
#[allow(clippy::too_many_arguments)]
pub fn build_entgen_code(
    family: &[StinespringIsometry],
    p: &[f64],
    basis: &CMat,
    n: usize,
    messages: usize,
    depth: usize,
    delta: f64,
    seed: u64,
) -> Result<EntgenCode> {
    check_sizes(n, messages, depth, family.len())?;
    let d_in = family.first().map(|s| s.d_in()).ok_or_else(|| invalid("family", "needs at least one channel"))?;
    if basis.nrows() != d_in || basis.ncols() != p.len() {
        return Err(QwkError::DimensionMismatch(format!(
            "basis is {}×{}, expected {d_in}×{}",
            basis.nrows(),
            basis.ncols(),
            p.len()
        )));
    }
    for (x, col) in basis.column_iter().enumerate() {
        if (col.norm() - 1.0).abs() > 1e-9 {
            return Err(QwkError::InvalidState(format!("basis state {x} is not unit norm")));
        }
    }
    let words = draw_words(p, n, messages * depth, delta, seed)?;
    let codewords = words.iter().map(|w| Codeword::pure(product_vector(basis, w))).collect();
    let mut code = build_from_codewords(family, n, messages, depth, codewords)?;
    code.words = words;
    Ok(code)
}

/// Code over caller-supplied codeword states on the n-fold input space.
pub fn build_from_codewords(
    family: &[StinespringIsometry],
    n: usize,
    messages: usize,
    depth: usize,
    codewords: Vec<Codeword>,
) -> Result<EntgenCode> {
    check_sizes(n, messages, depth, family.len())?;
    if codewords.len() != messages * depth {
        return Err(invalid("codewords", format!("need {} codewords, got {}", messages * depth, codewords.len())));
    }
    let f = prepare_family(family, n)?;
    let dp = caps::checked_pow("input block", f.d_in, n, caps::DENSE_LIMIT)?;
    let dq = caps::checked_pow("output block", f.d_out, n, caps::DENSE_LIMIT)?;
    let de = caps::checked_pow("environment block", f.d_env, n, caps::DENSE_LIMIT)?;
    let states = family.len();
    let dr = messages * depth * (states + 1);
    caps::check_dim("decoder space", dq * dr)?;
    if dq * dr > caps::DENSE_LIMIT {
        return Err(QwkError::CapExceeded(format!("decoder unitary on dimension {} > {}", dq * dr, caps::DENSE_LIMIT)));
    }
    caps::check_dim("protocol state", messages * dq * de * dr)?;
    for (i, w) in codewords.iter().enumerate() {
        if w.state.nrows() != dp || w.state.ncols() != dp {
            return Err(QwkError::DimensionMismatch(format!("codeword {i} is not on the {dp}-dimensional input block")));
        }
        if (trace_re(&w.state) - 1.0).abs() > 1e-9 {
            return Err(QwkError::InvalidState(format!("codeword {i} does not have unit trace")));
        }
    }
    let mut code = EntgenCode {
        n,
        messages,
        depth,
        states,
        d_out: f.d_out,
        d_env: f.d_env,
        words: Vec::new(),
        codewords,
        measurement: Vec::new(),
        measurement_excess: 0.0,
        block: CMat::zeros(0, 0),
        block_residual: 0.0,
        eqx1: Vec::new(),
        eqx1_pooled: Vec::new(),
        wir: Vec::new(),
        xi: Vec::new(),
        purification: Vec::new(),
        alignment: None,
        partners: Vec::new(),
        corrections: None,
    };
    rebuild(&mut code, &f)?;
    Ok(code)
}

/// Measurement, block unitary and the decoding and environment statistics.
fn rebuild(code: &mut EntgenCode, f: &Family) -> Result<()> {
    let (dq, de) = (code.dq(), code.de());
    let jl = code.messages * code.depth;
    let dr = code.register_dim();
    let joints: Vec<Vec<CMat>> = f
        .blocks
        .iter()
        .map(|b| code.codewords.iter().map(|w| joint_output(b, &w.state)).collect())
        .collect();
    let sigma: Vec<Vec<CMat>> = joints.iter().map(|row| row.iter().map(|m| reduce_q(m, dq, de)).collect()).collect();
    let omega: Vec<Vec<CMat>> = joints.iter().map(|row| row.iter().map(|m| reduce_e(m, dq, de)).collect()).collect();

    // pretty-good measurement over every (t, j, l)
    let mut total = CMat::zeros(dq, dq);
    for row in &sigma {
        for s in row {
            total += s;
        }
    }
    let inv = psd_inv_sqrt(&total, SUPPORT_CUT);
    let mut measurement = vec![CMat::zeros(dq, dq); dr];
    let mut sum = CMat::zeros(dq, dq);
    for (t, row) in sigma.iter().enumerate() {
        for (i, s) in row.iter().enumerate() {
            let d = &inv * s * &inv;
            sum += &d;
            measurement[code.register_index(i / code.depth, i % code.depth, t)] = d;
        }
    }
    let excess = eigh_unchecked(&(&sum - identity(dq))).values.first().copied().unwrap_or(0.0);
    let defect = identity(dq) - &sum;

    // block isometry on the zero-register slice, then a unitary completion
    let mut iso = CMat::zeros(dq * dr, dq);
    let fail = code.register_index(0, 0, code.states);
    for (r, d) in measurement.iter().enumerate() {
        let root = if r == fail { psd_sqrt(&defect) } else { psd_sqrt(d) };
        if r != fail && d.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        for a in 0..dq {
            for b in 0..dq {
                iso[(a * dr + r, b)] = root[(a, b)];
            }
        }
    }
    let block = complete_unitary(&iso, dr)?;
    let block_residual = (block.adjoint() * &block - identity(dq * dr)).camax();

    let eqx1: Vec<Vec<f64>> = (0..code.states)
        .map(|t| {
            (0..jl)
                .map(|i| trace_re(&(&measurement[code.register_index(i / code.depth, i % code.depth, t)] * &sigma[t][i])))
                .collect()
        })
        .collect();
    let eqx1_pooled = (0..code.states)
        .map(|t| {
            (0..jl)
                .map(|i| {
                    (0..code.states)
                        .map(|u| trace_re(&(&measurement[code.register_index(i / code.depth, i % code.depth, u)] * &sigma[t][i])))
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut xi = Vec::with_capacity(code.states);
    let mut wir = Vec::with_capacity(code.states);
    for row in &omega {
        let per_j: Vec<CMat> = (0..code.messages)
            .map(|j| {
                let mut acc = CMat::zeros(de, de);
                for l in 0..code.depth {
                    acc += &row[j * code.depth + l];
                }
                acc * cr(1.0 / code.depth as f64)
            })
            .collect();
        let mut avg = CMat::zeros(de, de);
        for w in &per_j {
            avg += w;
        }
        avg *= cr(1.0 / code.messages as f64);
        wir.push(per_j.iter().map(|w| trace_norm_h(&(w - &avg))).collect());
        xi.push(avg);
    }

    code.measurement = measurement;
    code.measurement_excess = excess;
    code.block = block;
    code.block_residual = block_residual;
    code.eqx1 = eqx1;
    code.eqx1_pooled = eqx1_pooled;
    code.wir = wir;
    code.xi = xi;
    code.alignment = None;
    code.partners = Vec::new();
    code.corrections = None;
    Ok(())
}

/// Extends an isometry `Q → Q ⊗ R` (register input fixed to 0) to a unitary
/// on `Q ⊗ R`. Free columns come from Gram–Schmidt over the standard basis
/// in index order.
fn complete_unitary(iso: &CMat, dr: usize) -> Result<CMat> {
    let dim = iso.nrows();
    let dq = iso.ncols();
    let mut u = CMat::zeros(dim, dim);
    let mut filled = vec![false; dim];
    let mut basis: Vec<CVec> = Vec::with_capacity(dim);
    for q in 0..dq {
        let col = iso.column(q).into_owned();
        u.set_column(q * dr, &col);
        filled[q * dr] = true;
        basis.push(col);
    }
    let mut slot = 0;
    for k in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = CVec::zeros(dim);
        v[k] = cr(1.0);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm < 1e-8 {
            continue;
        }
        v /= cr(norm);
        while filled[slot] {
            slot += 1;
        }
        u.set_column(slot, &v);
        filled[slot] = true;
        basis.push(v);
    }
    if basis.len() != dim {
        return Err(QwkError::InvalidChannel("block isometry could not be completed to a unitary".into()));
    }
    Ok(u)
}

// ---------------------------------------------------------------------------
// Purification of codewords

/// Replaces each mixed codeword by one eigenvector. The eigenvector must
/// carry weight at least `s/(1−s)` with `s` the measured decoding slack of
/// that codeword; the heaviest qualifying one is taken, and when none
/// qualifies the dominant eigenvector is kept and the entry is flagged.
pub fn purify_codewords(code: &EntgenCode, family: &[StinespringIsometry]) -> Result<EntgenCode> {
    let f = check_family(code, family)?;
    let mut out = code.clone();
    let jl = code.messages * code.depth;
    let mut entries = Vec::new();
    for i in 0..jl {
        if code.codewords[i].vector.is_some() {
            continue;
        }
        let before = (0..code.states).map(|t| code.eqx1[t][i]).fold(f64::INFINITY, f64::min);
        let slack = (1.0 - before).max(0.0);
        let threshold = if slack < 1.0 { slack / (1.0 - slack) } else { f64::INFINITY };
        let es = eigh_unchecked(&code.codewords[i].state);
        // eigenvalues are sorted, so the first one is the heaviest overall
        let meets = es.values[0] >= threshold;
        let v = es.vector(0);
        out.codewords[i] = Codeword::pure(v);
        entries.push(PurifyEntry { index: i, threshold, chosen_weight: es.values[0], meets_threshold: meets, before, after: f64::NAN });
    }
    rebuild(&mut out, &f)?;
    for e in &mut entries {
        e.after = (0..out.states).map(|t| out.eqx1[t][e.index]).fold(f64::INFINITY, f64::min);
    }
    out.purification = entries;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Uhlmann partners

#[derive(Debug, Clone, PartialEq)]
pub struct UhlmannPartner {
    /// Normalised partner on the first factor; zero when the overlap vanishes.
    pub partner: CVec,
    /// `|⟨ψ|ζ ⊗ τ⟩|`.
    pub fidelity: f64,
    /// Root fidelity of `tr₁ ψψ*` and `ττ*`.
    pub reduced_fidelity: f64,
    pub rank_deficient: bool,
}

/// The `ζ` maximising `|⟨ψ|ζ ⊗ τ⟩|` for `ψ` on `S ⊗ R` and a pure `τ` on `R`.
pub fn uhlmann_partner(joint: &CVec, dims: [usize; 2], target: &CVec) -> Result<UhlmannPartner> {
    let [ds, dr] = dims;
    if joint.len() != ds * dr || target.len() != dr {
        return Err(QwkError::DimensionMismatch(format!(
            "joint of length {} and target of length {} do not fit {ds}×{dr}",
            joint.len(),
            target.len()
        )));
    }
    let slice = CVec::from_fn(ds, |s, _| (0..dr).map(|r| target[r].conj() * joint[s * dr + r]).sum());
    let norm = slice.norm();
    let m = CMat::from_fn(ds, dr, |s, r| joint[s * dr + r]);
    let rho_r = m.transpose() * m.map(|z| z.conj());
    let reduced = (target.dotc(&(&rho_r * target))).re.max(0.0).sqrt();
    let rank_deficient = norm < 1e-12;
    let partner = if rank_deficient { CVec::zeros(ds) } else { slice / cr(norm) };
    Ok(UhlmannPartner { partner, fidelity: norm, reduced_fidelity: reduced, rank_deficient })
}

/// For vectors written as `S × R` matrices, the unitary `U` on `R`
/// maximising `|⟨to|(id ⊗ U)|from⟩|`, with the maximum.
pub fn uhlmann_unitary(from: &CMat, to: &CMat) -> Result<(CMat, f64)> {
    if from.shape() != to.shape() {
        return Err(QwkError::DimensionMismatch(format!("{:?} vs {:?}", from.shape(), to.shape())));
    }
    let m = from.transpose() * to.map(|z| z.conj());
    let svd = m.svd(true, true);
    let (w, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let u = vt.adjoint() * w.adjoint();
    Ok((u, svd.singular_values.iter().sum()))
}

fn partner_state(code: &EntgenCode, f: &Family, t: usize, i: usize) -> Result<CVec> {
    let (dq, de, dr) = (code.dq(), code.de(), code.register_dim());
    let v = code.codewords[i]
        .vector
        .as_ref()
        .ok_or_else(|| QwkError::InvalidState("mixed codewords; purify them first".into()))?;
    Ok(post_block_vector(code, &output_matrix(&f.blocks[t], v, dq, de), dr))
}

/// `(id_E ⊗ V)` applied to `U^{⊗n}|κ⟩|0⟩`, in `(q, e, r)` layout.
fn post_block_vector(code: &EntgenCode, out: &CMat, dr: usize) -> CVec {
    let (dq, de) = (out.nrows(), out.ncols());
    let mut psi = CVec::zeros(dq * de * dr);
    for q2 in 0..dq {
        for r in 0..dr {
            let row = q2 * dr + r;
            for e in 0..de {
                let mut acc = C64::new(0.0, 0.0);
                for q in 0..dq {
                    acc += code.block[(row, q * dr)] * out[(q, e)];
                }
                psi[(q2 * de + e) * dr + r] = acc;
            }
        }
    }
    psi
}

// ---------------------------------------------------------------------------
// Phase alignment

/// Fourier overlaps `o_t(k)`, `k = 0..L` (index 0 standing for `k = L`).
fn fourier_overlaps(gram: &CMat, depth: usize) -> Vec<C64> {
    (0..depth)
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..depth {
                for l2 in 0..depth {
                    let ph = 2.0 * std::f64::consts::PI * k as f64 * (l2 as f64 - l as f64) / depth as f64;
                    acc += c(ph.cos(), ph.sin()) * gram[(l, l2)];
                }
            }
            acc / cr(depth as f64)
        })
        .collect()
}

/// Picks `k` maximising `|mean_t o_t(k)|` (smallest `k` on ties) and the
/// phase making that mean real positive. Returns `(k one-based, phase, aligned per t)`.
pub fn choose_phase(overlaps: &[Vec<C64>]) -> (usize, f64, Vec<f64>) {
    let depth = overlaps[0].len();
    let states = overlaps.len() as f64;
    let mean = |k: usize| overlaps.iter().map(|o| o[k]).sum::<C64>() / cr(states);
    // one-based k runs 1..=L; k = L is Fourier index 0
    let order: Vec<usize> = (1..=depth).collect();
    let mut best = order[0];
    let mut best_val = mean(best % depth).norm();
    for &k in &order[1..] {
        let v = mean(k % depth).norm();
        if v > best_val + 1e-12 {
            best = k;
            best_val = v;
        }
    }
    let m = mean(best % depth);
    let phase = if m.norm() > 0.0 { -m.arg() } else { 0.0 };
    let rot = c(phase.cos(), phase.sin());
    let aligned = overlaps.iter().map(|o| (rot * o[best % depth]).re).collect();
    (best, phase, aligned)
}

/// Computes the Uhlmann partners and fixes `k_j` and the phase per message.
pub fn phase_align(code: &EntgenCode, family: &[StinespringIsometry]) -> Result<EntgenCode> {
    let f = check_family(code, family)?;
    if !code.is_pure() {
        return Err(QwkError::InvalidState("mixed codewords; purify them first".into()));
    }
    let (dq, de, dr) = (code.dq(), code.de(), code.register_dim());
    let jl = code.messages * code.depth;
    let cells: Vec<(usize, usize)> = (0..code.states).flat_map(|t| (0..jl).map(move |i| (t, i))).collect();
    let computed: Vec<(CVec, UhlmannPartner)> = cells
        .par_iter()
        .map(|&(t, i)| {
            let psi = partner_state(code, &f, t, i)?;
            let reg = crate::qcore::ket(dr, code.register_index(i / code.depth, i % code.depth, t));
            let up = uhlmann_partner(&psi, [dq * de, dr], &reg)?;
            Ok((psi, up))
        })
        .collect::<Result<_>>()?;
    let at = |t: usize, i: usize| &computed[t * jl + i];

    let mut aligned_all = Vec::with_capacity(code.messages);
    let (mut ks, mut rs, mut means) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..code.messages {
        let overlaps: Vec<Vec<C64>> = (0..code.states)
            .map(|t| {
                let gram = CMat::from_fn(code.depth, code.depth, |l, l2| {
                    let psi = &at(t, j * code.depth + l).0;
                    let zeta = &at(t, j * code.depth + l2).1.partner;
                    let r = code.register_index(j, l2, t);
                    (0..dq * de).map(|s| psi[s * dr + r].conj() * zeta[s]).sum()
                });
                fourier_overlaps(&gram, code.depth)
            })
            .collect();
        let (k, phase, aligned) = choose_phase(&overlaps);
        let mean = overlaps.iter().map(|o| o[k % code.depth]).sum::<C64>() / cr(code.states as f64);
        ks.push(k);
        rs.push(phase);
        means.push(mean.norm());
        aligned_all.push(aligned);
    }
    let mut out = code.clone();
    out.partners = (0..code.states).map(|t| (0..jl).map(|i| at(t, i).1.partner.clone()).collect()).collect();
    out.alignment = Some(PhaseAlignment {
        k: ks,
        s: rs.clone(),
        r: rs,
        mean_overlap: means,
        aligned: aligned_all,
        partner_overlap: (0..code.states).map(|t| (0..jl).map(|i| at(t, i).1.fidelity).collect()).collect(),
    });
    out.corrections = None;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Correction unitaries

fn fourier_phase(l: usize, k: usize, depth: usize, extra: f64) -> C64 {
    let ph = 2.0 * std::f64::consts::PI * (l * k) as f64 / depth as f64 + extra;
    c(ph.cos(), ph.sin())
}

/// Aligned ideal state `ϖ_{j,t}` as an `E × (Q·L)` matrix.
fn ideal_matrix(code: &EntgenCode, al: &PhaseAlignment, t: usize, j: usize) -> CMat {
    let (dq, de, depth) = (code.dq(), code.de(), code.depth);
    let scale = cr(1.0 / (depth as f64).sqrt());
    let mut m = CMat::zeros(de, dq * depth);
    for l in 0..depth {
        let ph = fourier_phase(l, al.k[j], depth, al.r[j]) * scale;
        let zeta = &code.partners[t][j * depth + l];
        for q in 0..dq {
            for e in 0..de {
                m[(e, q * depth + l)] = zeta[q * de + e] * ph;
            }
        }
    }
    m
}

/// Purification of `ξ` into `E × cols`, keeping the heaviest `cols` eigenvectors.
fn purify_into(xi: &CMat, cols: usize) -> (CMat, f64) {
    let es = eigh_unchecked(xi);
    let de = xi.nrows();
    let keep = cols.min(de);
    let kept: f64 = es.values[..keep].iter().map(|v| v.max(0.0)).sum();
    let total: f64 = es.values.iter().map(|v| v.max(0.0)).sum();
    let mut m = CMat::zeros(de, cols);
    if kept > 0.0 {
        for i in 0..keep {
            let w = (es.values[i].max(0.0) / kept).sqrt();
            m.set_column(i, &(es.vector(i) * cr(w)));
        }
    }
    (m, (total - kept).max(0.0))
}

/// For each state label `t`, one unitary per message on `Q ⊗ L` turning
/// the aligned ideal state into a fixed purification of `ξ_t`.
pub fn build_decoder_unitaries(code: &EntgenCode, family: &[StinespringIsometry]) -> Result<EntgenCode> {
    check_family(code, family)?;
    let al = code
        .alignment
        .as_ref()
        .ok_or_else(|| invalid("code", "phase alignment must run before the correction unitaries"))?;
    let cols = code.dq() * code.depth;
    let mut unitaries = Vec::with_capacity(code.states);
    let mut overlap = Vec::with_capacity(code.states);
    let mut targets = Vec::with_capacity(code.states);
    let mut truncated = Vec::with_capacity(code.states);
    let mut residual: f64 = 0.0;
    for t in 0..code.states {
        let (target, cut) = purify_into(&code.xi[t], cols);
        let mut us = Vec::with_capacity(code.messages);
        let mut ov = Vec::with_capacity(code.messages);
        for j in 0..code.messages {
            let (u, value) = uhlmann_unitary(&ideal_matrix(code, al, t, j), &target)?;
            residual = residual.max((u.adjoint() * &u - identity(cols)).camax());
            us.push(u);
            ov.push(value.min(1.0));
        }
        unitaries.push(us);
        overlap.push(ov);
        targets.push(target);
        truncated.push(cut);
    }
    let mut out = code.clone();
    out.corrections = Some(Corrections { unitaries, overlap, targets, truncated, residual });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Protocol run and audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub t: String,
    /// Root fidelity of the message-register state with the maximally entangled state.
    pub fidelity: f64,
    /// Actual state against the aligned ideal.
    pub actual_vs_ideal: f64,
    /// Aligned ideal against the product target.
    pub ideal_vs_target: f64,
    /// Actual state against the product target.
    pub actual_vs_target: f64,
    pub triangle: BoundCheck,
    pub bound: BoundCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityAudit {
    pub n: usize,
    pub messages: usize,
    pub depth: usize,
    pub states: usize,
    pub per_t: Vec<ProtocolRun>,
    pub min_fidelity: f64,
    /// `max(1 − min partner overlap, max wir)`.
    pub epsilon: f64,
    pub bound: f64,
    pub bound_holds: bool,
    pub eqx1: Vec<Vec<f64>>,
    pub eqx1_pooled: Vec<Vec<f64>>,
    pub partner_overlap: Vec<Vec<f64>>,
    pub wir: Vec<Vec<f64>>,
    pub phase_k: Vec<usize>,
    pub phase_r: Vec<f64>,
    pub phase_s: Vec<f64>,
    /// Aligned overlaps `[j][t]`.
    pub fid1: Vec<Vec<f64>>,
    /// Correction overlaps `[t][j]`.
    pub wir2: Vec<Vec<f64>>,
    pub truncated: Vec<f64>,
    pub purification: Vec<PurifyEntry>,
    pub measurement_excess: f64,
    pub block_residual: f64,
    pub correction_residual: f64,
    pub checks: Vec<BoundCheck>,
}

/// `1 − √(2|θ|ε) − √8·ε^{1/4}`.
pub fn final_bound(states: usize, epsilon: f64) -> f64 {
    let e = epsilon.max(0.0);
    1.0 - (2.0 * states as f64 * e).sqrt() - 8f64.sqrt() * e.powf(0.25)
}

pub fn measured_epsilon(code: &EntgenCode) -> Result<f64> {
    let al = code.alignment.as_ref().ok_or_else(|| invalid("code", "phase alignment has not run"))?;
    let min_overlap = al.partner_overlap.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let max_wir = code.wir.iter().flatten().copied().fold(0.0, f64::max);
    Ok((1.0 - min_overlap).max(max_wir).max(0.0))
}

fn apply_corrections(code: &EntgenCode, corr: &Corrections, v: &mut CVec) {
    let (dq, de, depth) = (code.dq(), code.de(), code.depth);
    let dr = code.register_dim();
    let ql = dq * depth;
    for m in 0..code.messages {
        for t in 0..code.states {
            let u = &corr.unitaries[t][m];
            for e in 0..de {
                let mut slice = CVec::zeros(ql);
                for q in 0..dq {
                    for l in 0..depth {
                        slice[q * depth + l] = v[(q * de + e) * dr + code.register_index(m, l, t)];
                    }
                }
                let out = u * slice;
                for q in 0..dq {
                    for l in 0..depth {
                        v[(q * de + e) * dr + code.register_index(m, l, t)] = out[q * depth + l];
                    }
                }
            }
        }
    }
}

fn embed(code: &EntgenCode, m: &CMat, j: usize, t: usize) -> CVec {
    let (dq, de, depth, dr) = (code.dq(), code.de(), code.depth, code.register_dim());
    let mut v = CVec::zeros(dq * de * dr);
    for q in 0..dq {
        for e in 0..de {
            for l in 0..depth {
                v[(q * de + e) * dr + code.register_index(j, l, t)] = m[(e, q * depth + l)];
            }
        }
    }
    v
}

fn joint_overlap(a: &[CVec], b: &[CVec]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dotc(y)).sum::<C64>().norm().min(1.0)
}

/// Exact run with the channel in state `t_true`.
pub fn run_protocol(code: &EntgenCode, family: &[StinespringIsometry], t_true: usize) -> Result<ProtocolRun> {
    let f = check_family(code, family)?;
    if t_true >= code.states {
        return Err(invalid("t_true", format!("state {t_true} outside 0..{}", code.states)));
    }
    let al = code.alignment.as_ref().ok_or_else(|| invalid("code", "phase alignment has not run"))?;
    let corr = code.corrections.as_ref().ok_or_else(|| invalid("code", "correction unitaries have not been built"))?;
    let epsilon = measured_epsilon(code)?;
    let (dq, de, dr, depth) = (code.dq(), code.de(), code.register_dim(), code.depth);
    let j_scale = cr(1.0 / (code.messages as f64).sqrt());
    let l_scale = cr(1.0 / (depth as f64).sqrt());

    let mut actual = Vec::with_capacity(code.messages);
    let mut ideal = Vec::with_capacity(code.messages);
    let mut target = Vec::with_capacity(code.messages);
    for j in 0..code.messages {
        let mut sent = CVec::zeros(code.codewords[0].state.nrows());
        for l in 0..depth {
            let v = code.codewords[j * depth + l].vector.as_ref().ok_or_else(|| QwkError::InvalidState("mixed codewords".into()))?;
            sent += v * (fourier_phase(l, al.k[j], depth, 0.0) * l_scale);
        }
        let mut v = post_block_vector(code, &output_matrix(&f.blocks[t_true], &sent, dq, de), dr) * j_scale;
        apply_corrections(code, corr, &mut v);
        actual.push(v);
        let mut w = embed(code, &ideal_matrix(code, al, t_true, j), j, t_true) * j_scale;
        apply_corrections(code, corr, &mut w);
        ideal.push(w);
        target.push(embed(code, &corr.targets[t_true], j, t_true) * j_scale);
    }

    // ⟨Φ|ρ_AM|Φ⟩ sums, over the untouched factors, |Σ_j (1/√J) Γ_j[·, m = j]|²
    let mut weight = 0.0;
    for q in 0..dq {
        for e in 0..de {
            for l in 0..depth {
                for t in 0..=code.states {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, v) in actual.iter().enumerate() {
                        acc += v[(q * de + e) * dr + code.register_index(j, l, t)];
                    }
                    weight += acc.norm_sqr();
                }
            }
        }
    }
    let fidelity = (weight / code.messages as f64).sqrt().min(1.0);
    let actual_vs_ideal = joint_overlap(&actual, &ideal);
    let ideal_vs_target = joint_overlap(&ideal, &target);
    let actual_vs_target = joint_overlap(&actual, &target);
    let tri_rhs =
        1.0 - (1.0 - actual_vs_ideal * actual_vs_ideal).max(0.0).sqrt() - (1.0 - ideal_vs_target * ideal_vs_target).max(0.0).sqrt();
    Ok(ProtocolRun {
        t: format!("t{t_true}"),
        fidelity,
        actual_vs_ideal,
        ideal_vs_target,
        actual_vs_target,
        triangle: BoundCheck::ge("triangle", actual_vs_target, tri_rhs),
        bound: BoundCheck::ge("final_fidelity", fidelity, final_bound(code.states, epsilon)),
    })
}

/// Runs the protocol for every state label in parallel and collects the
/// intermediate quantities and checks.
pub fn audit(code: &EntgenCode, family: &[StinespringIsometry]) -> Result<FidelityAudit> {
    let al = code.alignment.as_ref().ok_or_else(|| invalid("code", "phase alignment has not run"))?;
    let corr = code.corrections.as_ref().ok_or_else(|| invalid("code", "correction unitaries have not been built"))?;
    let per_t: Vec<ProtocolRun> = (0..code.states).into_par_iter().map(|t| run_protocol(code, family, t)).collect::<Result<_>>()?;
    let epsilon = measured_epsilon(code)?;
    let bound = final_bound(code.states, epsilon);
    let min_fidelity = per_t.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);

    let mut checks = vec![
        BoundCheck::le("measurement_sum", code.measurement_excess, 1e-9),
        BoundCheck::le("block_unitary", code.block_residual, 1e-8),
        BoundCheck::le("correction_unitary", corr.residual, 1e-8),
    ];
    for (j, row) in al.aligned.iter().enumerate() {
        let premise = 1.0 - al.mean_overlap[j];
        let min_t = row.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(BoundCheck::ge("phase_alignment", min_t, 1.0 - code.states as f64 * premise));
    }
    let min_wir2 = corr.overlap.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    checks.push(BoundCheck::ge("correction", min_wir2, 1.0 - 4.0 * epsilon - 4.0 * epsilon.sqrt()));
    for r in &per_t {
        checks.push(r.triangle.clone());
        checks.push(BoundCheck::ge("monotonicity", r.fidelity, r.actual_vs_target));
        checks.push(r.bound.clone());
    }
    let bound_holds = per_t.iter().all(|r| r.bound.pass);
    Ok(FidelityAudit {
        n: code.n,
        messages: code.messages,
        depth: code.depth,
        states: code.states,
        min_fidelity,
        epsilon,
        bound,
        bound_holds,
        per_t,
        eqx1: code.eqx1.clone(),
        eqx1_pooled: code.eqx1_pooled.clone(),
        partner_overlap: al.partner_overlap.clone(),
        wir: code.wir.clone(),
        phase_k: al.k.clone(),
        phase_r: al.r.clone(),
        phase_s: al.s.clone(),
        fid1: al.aligned.clone(),
        wir2: corr.overlap.clone(),
        truncated: corr.truncated.clone(),
        purification: code.purification.clone(),
        measurement_excess: code.measurement_excess,
        block_residual: code.block_residual,
        correction_residual: corr.residual,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangleConfig {
    pub n: usize,
    pub messages: usize,
    pub depth: usize,
    pub delta: f64,
    pub seed: u64,
    pub prior: Option<Vec<f64>>,
}

impl Default for EntangleConfig {
    fn default() -> Self {
        Self { n: 2, messages: 2, depth: 1, delta: 0.5, seed: 0, prior: None }
    }
}

/// Full pipeline over the computational basis.
pub fn entangle(family: &[StinespringIsometry], cfg: &EntangleConfig) -> Result<(EntgenCode, FidelityAudit)> {
    let d = family.first().map(|s| s.d_in()).ok_or_else(|| invalid("family", "needs at least one channel"))?;
    let prior = cfg.prior.clone().unwrap_or_else(|| vec![1.0 / d as f64; d]);
    let code = build_entgen_code(family, &prior, &identity(d), cfg.n, cfg.messages, cfg.depth, cfg.delta, cfg.seed)?;
    let code = phase_align(&code, family)?;
    let code = build_decoder_unitaries(&code, family)?;
    let report = audit(&code, family)?;
    Ok((code, report))
}

/// Small families used by the examples and the acceptance suite.
pub mod families {
    use super::*;
    use crate::channels::{kraus_to_stinespring, KrausChannel};

    fn ry(angle: f64) -> CMat {
        let (s, co) = ((angle / 2.0).sin(), (angle / 2.0).cos());
        CMat::from_row_slice(2, 2, &[cr(co), cr(-s), cr(s), cr(co)])
    }

    fn flip() -> CMat {
        CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    pub fn identity_qubit() -> StinespringIsometry {
        kraus_to_stinespring(&KrausChannel::identity(2))
    }

    pub fn depolarizing(p: f64) -> StinespringIsometry {
        kraus_to_stinespring(&KrausChannel::depolarizing(p))
    }

    /// Two identities rotated by `±angle` about the y axis.
    pub fn rotated_identities(angle: f64) -> Vec<StinespringIsometry> {
        [angle, -angle]
            .iter()
            .map(|&a| kraus_to_stinespring(&KrausChannel::identity(2).then_unitary(&ry(a))))
            .collect()
    }

    /// A slightly noisy, slightly rotated identity and the same channel
    /// followed by a bit flip.
    pub fn perturbed_pair(angle: f64, noise: f64) -> Vec<StinespringIsometry> {
        let base = KrausChannel::depolarizing(noise).then_unitary(&ry(angle));
        let flipped = base.then_unitary(&flip());
        vec![kraus_to_stinespring(&base), kraus_to_stinespring(&flipped)]
    }
}
