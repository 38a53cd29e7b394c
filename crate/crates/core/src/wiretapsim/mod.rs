//! Monte-Carlo realisation of random wiretap codes: codebook sampling,
//! decoding, error and leakage evaluation, covering concentration and the
//! two-part protocol for a sender who knows the channel state.

mod covering;
mod protocol;

pub use covering::{covering_concentration, CoveringEntry, CoveringReport};
pub use protocol::{message_code_seed, two_part_protocol, BlockRates, ProtocolConfig, ProtocolReport};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::channels::{index_word, CQChannel, Channel, ClassicalChannel, CompoundWiretapSpec, Variant};
use crate::error::{invalid, QwkError, Result};
use crate::infotheory::{entropy_of, holevo_chi, mutual_information, von_neumann_entropy_matrix, Ensemble};
use crate::qcore::{cr, psd_inv_sqrt, CMat};
use crate::rng::{domain, stream};
use crate::typicality::{conditional_typical_projector, truncated_typical, BoundCheck, TypicalParams, DEFAULT_K};

/// Largest number of codewords in one codebook.
pub const MAX_CODEWORDS: usize = 1 << 20;
/// Largest trial count accepted by the Monte-Carlo paths.
pub const MAX_TRIALS: usize = 10_000_000;

// ---------------------------------------------------------------------------
// Codebooks

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSource {
    pub prior: Vec<f64>,
    pub delta: f64,
    pub typical_words: usize,
    /// `pⁿ` mass of the typical set.
    pub typical_mass: f64,
}

/// Words `x_{j,l}` stored row-major with the largest depth; state `t` uses
/// the first `depth_for(t)` words of each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub messages: usize,
    /// One shared depth, or one per channel state.
    pub depth: Vec<usize>,
    pub words: Vec<Vec<usize>>,
    pub source: CodebookSource,
    pub seed: u64,
}

impl Codebook {
    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(1)
    }

    pub fn depth_for(&self, t: usize) -> usize {
        if self.depth.len() == 1 {
            self.depth[0]
        } else {
            self.depth[t]
        }
    }

    pub fn word(&self, j: usize, l: usize) -> &[usize] {
        &self.words[j * self.max_depth() + l]
    }

    fn check_states(&self, states: usize) -> Result<()> {
        if self.depth.len() != 1 && self.depth.len() != states {
            return Err(QwkError::DimensionMismatch(format!(
                "codebook has {} depths for {} channel states",
                self.depth.len(),
                states
            )));
        }
        Ok(())
    }
}

/// `J·L` words drawn i.i.d. from the truncated typical distribution; word
/// `(j, l)` depends only on `(seed, j, l)`.
pub fn sample_codebook(
    p: &[f64],
    n: usize,
    messages: usize,
    depth: &[usize],
    delta: f64,
    seed: u64,
) -> Result<Codebook> {
    if messages == 0 {
        return Err(invalid("messages", "at least one message is required"));
    }
    if depth.is_empty() || depth.contains(&0) {
        return Err(invalid("depth", "every randomisation depth must be at least 1"));
    }
    let lmax = *depth.iter().max().expect("non-empty");
    if messages.saturating_mul(lmax) > MAX_CODEWORDS {
        return Err(QwkError::CapExceeded(format!("{messages}×{lmax} codewords")));
    }
    let tt = truncated_typical(p, n, delta)?;
    let words = (0..messages * lmax)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain::CODEBOOK, &[(i / lmax) as u64, (i % lmax) as u64]);
            tt.sample(&mut rng).to_vec()
        })
        .collect();
    Ok(Codebook {
        n,
        messages,
        depth: depth.to_vec(),
        words,
        source: CodebookSource { prior: p.to_vec(), delta, typical_words: tt.len(), typical_mass: tt.mass },
        seed,
    })
}

// ---------------------------------------------------------------------------
// Code sizes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub messages: usize,
    pub depth: Vec<usize>,
    /// Set when the message exponent is not positive; `messages` is then 1.
    pub degenerate: bool,
    pub legit_info: Vec<f64>,
    pub leak_info: Vec<f64>,
}

/// `2^x` snapped to the nearest integer when within rounding noise.
fn exp2_snapped(x: f64) -> f64 {
    let v = x.exp2();
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        v
    }
}

/// `L_t = ⌈2^{n(χ_t + 2ζ)}⌉`, `J = ⌊2^{n·min_t(I_t − log L_t / n − μ)}⌋`.
pub fn sizes_from_terms(legit: &[f64], leak: &[f64], n: usize, mu: f64, zeta: f64) -> Result<Sizes> {
    if legit.is_empty() || legit.len() != leak.len() {
        return Err(QwkError::DimensionMismatch("one legitimate and one leakage term per state".into()));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    for (name, v) in [("mu", mu), ("zeta", zeta)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, format!("must be non-negative, got {v}")));
        }
    }
    let nf = n as f64;
    let mut depth = Vec::with_capacity(leak.len());
    for &chi in leak {
        let l = exp2_snapped(nf * (chi.max(0.0) + 2.0 * zeta)).ceil();
        if l > MAX_CODEWORDS as f64 {
            return Err(QwkError::CapExceeded(format!("randomisation depth {l:e}")));
        }
        depth.push(l.max(1.0) as usize);
    }
    let exponent = legit
        .iter()
        .zip(&depth)
        .map(|(&i, &l)| nf * i - (l as f64).log2())
        .fold(f64::INFINITY, f64::min)
        - nf * mu;
    let j = exp2_snapped(exponent).floor();
    let (messages, degenerate) = if j < 2.0 { (1, true) } else { (j as usize, false) };
    if messages.saturating_mul(*depth.iter().max().expect("non-empty")) > MAX_CODEWORDS {
        return Err(QwkError::CapExceeded(format!("{messages} messages")));
    }
    Ok(Sizes { messages, depth, degenerate, legit_info: legit.to_vec(), leak_info: leak.to_vec() })
}

fn info_of(ch: &Channel, p: &[f64]) -> Result<f64> {
    match ch {
        Channel::Classical(c) => mutual_information(p, c),
        Channel::CQ(c) => Ok(holevo_chi(&Ensemble::from_cq(p, c)?)),
        _ => Err(QwkError::VariantMismatch("code sizes need classical inputs".into())),
    }
}

/// Sizes from the single-letter information terms of every state.
pub fn sizes_from_rates(spec: &CompoundWiretapSpec, p: &[f64], n: usize, mu: f64, zeta: f64) -> Result<Sizes> {
    require_classical_input(spec)?;
    let legit = spec.pairs().iter().map(|pr| info_of(&pr.legit, p)).collect::<Result<Vec<_>>>()?;
    let leak = spec.pairs().iter().map(|pr| info_of(&pr.wiretap, p)).collect::<Result<Vec<_>>>()?;
    sizes_from_terms(&legit, &leak, n, mu, zeta)
}

fn require_classical_input(spec: &CompoundWiretapSpec) -> Result<()> {
    if spec.variant() == Variant::Quantum {
        return Err(QwkError::VariantMismatch(
            "simulation needs classical inputs; use the entanglement protocol for quantum families".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Decoders

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderOptions {
    /// Conditional-typicality slack for the classical decoder.
    pub delta: f64,
    pub alpha: f64,
    pub k_const: f64,
    /// Sandwich cq outputs with conditional typical projectors.
    pub sandwich: bool,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self { delta: 0.1, alpha: 1.0, k_const: DEFAULT_K, sandwich: true }
    }
}

/// `|N(a,b|x,y)/n − N(a|x)W(b|a)/n| ≤ δ`, and no pair with `W(b|a) = 0`.
pub fn conditionally_typical(x: &[usize], y: &[usize], w: &ClassicalChannel, delta: f64) -> bool {
    let (a, b) = (w.inputs(), w.outputs());
    let mut joint = vec![0usize; a * b];
    let mut single = vec![0usize; a];
    for (&xi, &yi) in x.iter().zip(y) {
        joint[xi * b + yi] += 1;
        single[xi] += 1;
    }
    let n = x.len() as f64;
    for xi in 0..a {
        for yi in 0..b {
            let nab = joint[xi * b + yi] as f64;
            let wv = w.prob(xi, yi);
            if wv == 0.0 && nab > 0.0 {
                return false;
            }
            if (nab - single[xi] as f64 * wv).abs() > delta * n {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypicalDecoder {
    n: usize,
    outputs: usize,
    delta: f64,
    channels: Vec<ClassicalChannel>,
    /// `(message, word, state)` in message order.
    candidates: Vec<(usize, Vec<usize>, usize)>,
}

impl TypicalDecoder {
    /// Smallest message with a codeword jointly typical with `y` under some state.
    pub fn decode(&self, y: &[usize]) -> Option<usize> {
        self.candidates
            .iter()
            .find(|(_, x, t)| conditionally_typical(x, y, &self.channels[*t], self.delta))
            .map(|c| c.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }
}

/// Square-root measurement, one element per message.
#[derive(Debug, Clone, PartialEq)]
pub struct PrettyGoodDecoder {
    pub povm: Vec<CMat>,
}

impl PrettyGoodDecoder {
    /// Outcome probabilities on `ρ`; the missing mass is the error outcome.
    pub fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.povm.iter().map(|d| (d * rho).trace().re.clamp(0.0, 1.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    Typical(TypicalDecoder),
    PrettyGood(PrettyGoodDecoder),
}

/// Square-root measurement built from `{A_j}`, `D_j = S^{-1/2} A_j S^{-1/2}`.
pub fn square_root_measurement(parts: &[CMat]) -> Vec<CMat> {
    let d = parts[0].nrows();
    let mut s = CMat::zeros(d, d);
    for a in parts {
        s += a;
    }
    let inv = psd_inv_sqrt(&s, 1e-12);
    parts.iter().map(|a| &inv * a * &inv).collect()
}

fn legit_classical(ch: &Channel) -> Option<&ClassicalChannel> {
    match ch {
        Channel::Classical(c) => Some(c),
        _ => None,
    }
}

/// Joint-typicality decoder when every legitimate channel is classical,
/// pretty-good measurement otherwise.
pub fn build_decoder(spec: &CompoundWiretapSpec, code: &Codebook, opts: &DecoderOptions) -> Result<Decoder> {
    require_classical_input(spec)?;
    code.check_states(spec.len())?;
    if !(opts.delta.is_finite() && opts.delta > 0.0) {
        return Err(invalid("delta", "decoder slack must be positive"));
    }
    let classical: Option<Vec<ClassicalChannel>> =
        spec.pairs().iter().map(|p| legit_classical(&p.legit).cloned()).collect();
    if let Some(channels) = classical {
        let mut candidates = Vec::new();
        for j in 0..code.messages {
            for l in 0..code.max_depth() {
                for t in 0..spec.len() {
                    if l < code.depth_for(t) {
                        candidates.push((j, code.word(j, l).to_vec(), t));
                    }
                }
            }
        }
        let outputs = channels[0].outputs();
        return Ok(Decoder::Typical(TypicalDecoder { n: code.n, outputs, delta: opts.delta, channels, candidates }));
    }
    let legit: Vec<CQChannel> = spec.pairs().iter().map(|p| p.legit.as_cq().expect("classical input")).collect();
    let dim = caps::checked_pow("decoder space", legit[0].dim(), code.n, caps::DENSE_LIMIT)?;
    let params = TypicalParams::new(code.n, code.source.delta, opts.alpha, opts.k_const)?;
    let parts = (0..code.messages)
        .into_par_iter()
        .map(|j| {
            let mut a = CMat::zeros(dim, dim);
            let mut count = 0usize;
            for (t, w) in legit.iter().enumerate() {
                for l in 0..code.depth_for(t) {
                    let x = code.word(j, l);
                    let out = w.word_output(x)?;
                    let term = match (opts.sandwich, conditional_typical_projector(w, x, &code.source.prior, params)) {
                        (true, Ok(pi)) => {
                            let m = pi.matrix()?;
                            &m * &out * &m
                        }
                        _ => out,
                    };
                    a += term;
                    count += 1;
                }
            }
            Ok(a * cr(1.0 / count as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Decoder::PrettyGood(PrettyGoodDecoder { povm: square_root_measurement(&parts) }))
}

// ---------------------------------------------------------------------------
// Error

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Error of one channel state: `max_j` of the `l`-averaged error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStat {
    pub t: String,
    pub value: f64,
    pub worst_message: usize,
    pub per_message: Vec<f64>,
    /// Standard errors, zero on the exact path.
    pub std_err: Vec<f64>,
    pub method: Method,
    pub trials: usize,
    /// `max |P(D_j) + P(D_jᶜ) − 1|` over codewords.
    pub complement_residual: f64,
}

impl ErrorStat {
    fn new(t: &str, per_message: Vec<f64>, std_err: Vec<f64>, method: Method, trials: usize, residual: f64) -> Self {
        let mut worst = 0;
        for (j, &v) in per_message.iter().enumerate() {
            if v > per_message[worst] {
                worst = j;
            }
        }
        Self {
            t: t.to_string(),
            value: per_message[worst],
            worst_message: worst,
            per_message,
            std_err,
            method,
            trials,
            complement_residual: residual,
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(invalid("trials", format!("must be in 1..={MAX_TRIALS}, got {trials}")));
    }
    Ok(())
}

/// Exact when the output space is enumerable, Monte-Carlo otherwise.
pub fn eval_error(
    spec: &CompoundWiretapSpec,
    code: &Codebook,
    decoder: &Decoder,
    trials: usize,
    seed: u64,
) -> Result<Vec<ErrorStat>> {
    check_trials(trials)?;
    match decoder {
        Decoder::Typical(d) if d.outputs.checked_pow(d.n as u32).is_none_or(|s| s > caps::EXACT_OUTPUT_LIMIT) => {
            eval_error_monte_carlo(spec, code, decoder, trials, seed)
        }
        _ => eval_error_exact(spec, code, decoder),
    }
}

fn word_likelihood(w: &ClassicalChannel, x: &[usize], y: &[usize]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| w.prob(a, b)).product()
}

pub fn eval_error_exact(spec: &CompoundWiretapSpec, code: &Codebook, decoder: &Decoder) -> Result<Vec<ErrorStat>> {
    code.check_states(spec.len())?;
    match decoder {
        Decoder::Typical(d) => {
            let total = caps::checked_pow("output words", d.outputs, d.n, caps::EXACT_OUTPUT_LIMIT)?;
            let table: Vec<(Vec<usize>, Option<usize>)> = (0..total)
                .into_par_iter()
                .map(|i| {
                    let y = index_word(i, d.outputs, d.n);
                    let dec = d.decode(&y);
                    (y, dec)
                })
                .collect();
            spec.pairs()
                .iter()
                .enumerate()
                .map(|(t, pair)| {
                    let w = legit_classical(&pair.legit)
                        .ok_or_else(|| QwkError::VariantMismatch("typical decoder needs classical outputs".into()))?;
                    let lt = code.depth_for(t);
                    let mut residual: f64 = 0.0;
                    let per: Vec<f64> = (0..code.messages)
                        .map(|j| {
                            let mut err = 0.0;
                            for l in 0..lt {
                                let x = code.word(j, l);
                                let (mut hit, mut miss) = (0.0, 0.0);
                                for (y, dec) in &table {
                                    let py = word_likelihood(w, x, y);
                                    if *dec == Some(j) {
                                        hit += py;
                                    } else {
                                        miss += py;
                                    }
                                }
                                residual = residual.max((hit + miss - 1.0).abs());
                                err += miss;
                            }
                            err / lt as f64
                        })
                        .collect();
                    let zeros = vec![0.0; per.len()];
                    Ok(ErrorStat::new(&pair.name, per, zeros, Method::Exact, 0, residual))
                })
                .collect()
        }
        Decoder::PrettyGood(d) => spec
            .pairs()
            .iter()
            .enumerate()
            .map(|(t, pair)| {
                let w = pair.legit.as_cq().ok_or_else(|| QwkError::VariantMismatch("cq decoder".into()))?;
                let lt = code.depth_for(t);
                let mut residual: f64 = 0.0;
                let mut per = Vec::with_capacity(code.messages);
                for j in 0..code.messages {
                    let mut err = 0.0;
                    for l in 0..lt {
                        let rho = w.word_output(code.word(j, l))?;
                        let probs = d.probabilities(&rho);
                        let hit = probs[j];
                        let miss = 1.0 - hit;
                        residual = residual.max((hit + miss - 1.0).abs());
                        err += miss;
                    }
                    per.push(err / lt as f64);
                }
                let zeros = vec![0.0; per.len()];
                Ok(ErrorStat::new(&pair.name, per, zeros, Method::Exact, 0, residual))
            })
            .collect(),
    }
}

fn sample_letter<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Estimated error; trial `k` of message `j` under state `t` uses its own
/// stream keyed by `(seed, t, j, k)`.
pub fn eval_error_monte_carlo(
    spec: &CompoundWiretapSpec,
    code: &Codebook,
    decoder: &Decoder,
    trials: usize,
    seed: u64,
) -> Result<Vec<ErrorStat>> {
    check_trials(trials)?;
    code.check_states(spec.len())?;
    spec.pairs()
        .iter()
        .enumerate()
        .map(|(t, pair)| {
            let lt = code.depth_for(t);
            let cq = pair.legit.as_cq();
            let per: Vec<usize> = (0..code.messages)
                .into_par_iter()
                .map(|j| {
                    // cq outcome distributions are cached per codeword
                    let cached: Option<Vec<Vec<f64>>> = match (decoder, &cq) {
                        (Decoder::PrettyGood(d), Some(w)) => Some(
                            (0..lt)
                                .map(|l| {
                                    let mut p = d.probabilities(&w.word_output(code.word(j, l))?);
                                    let s: f64 = p.iter().sum();
                                    p.push((1.0 - s).max(0.0));
                                    Ok(p)
                                })
                                .collect::<Result<Vec<_>>>()?,
                        ),
                        _ => None,
                    };
                    let mut errors = 0;
                    for k in 0..trials {
                        let mut rng = stream(seed, domain::CHANNEL_NOISE, &[t as u64, j as u64, k as u64]);
                        let l = rng.random_range(0..lt);
                        let decoded = match decoder {
                            Decoder::Typical(d) => {
                                let w = legit_classical(&pair.legit).ok_or_else(|| {
                                    QwkError::VariantMismatch("typical decoder needs classical outputs".into())
                                })?;
                                let y: Vec<usize> =
                                    code.word(j, l).iter().map(|&x| sample_letter(&w.rows()[x], &mut rng)).collect();
                                d.decode(&y)
                            }
                            Decoder::PrettyGood(_) => {
                                let probs = &cached.as_ref().expect("cq outputs")[l];
                                let o = sample_letter(probs, &mut rng);
                                (o < code.messages).then_some(o)
                            }
                        };
                        if decoded != Some(j) {
                            errors += 1;
                        }
                    }
                    Ok(errors)
                })
                .collect::<Result<Vec<_>>>()?;
            let tf = trials as f64;
            let rates: Vec<f64> = per.iter().map(|&e| e as f64 / tf).collect();
            let se = rates.iter().map(|&p| (p * (1.0 - p) / tf).sqrt()).collect();
            Ok(ErrorStat::new(&pair.name, rates, se, Method::MonteCarlo, trials, 0.0))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Leakage

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageStat {
    pub t: String,
    /// `χ(X_uni; Zⁿ)` of the uniform message under this state.
    pub value: f64,
    /// `log₂ J`.
    pub cap: f64,
    pub within_cap: BoundCheck,
}

/// Exact leakage of the uniform message per state.
pub fn eval_leakage(spec: &CompoundWiretapSpec, code: &Codebook) -> Result<Vec<LeakageStat>> {
    require_classical_input(spec)?;
    code.check_states(spec.len())?;
    let cap = (code.messages as f64).log2();
    spec.pairs()
        .iter()
        .enumerate()
        .map(|(t, pair)| {
            let value = if code.messages == 1 {
                0.0
            } else {
                leakage_for(&pair.wiretap, code, code.depth_for(t))?
            };
            Ok(LeakageStat { t: pair.name.clone(), value, cap, within_cap: BoundCheck::le("leakage_cap", value, cap) })
        })
        .collect()
}

fn mean_entropy_gap(avg_entropy: f64, per: &[f64]) -> f64 {
    (avg_entropy - per.iter().sum::<f64>() / per.len() as f64).max(0.0)
}

fn leakage_for(wiretap: &Channel, code: &Codebook, lt: usize) -> Result<f64> {
    let n = code.n;
    match wiretap {
        Channel::Classical(v) => {
            let total = caps::checked_pow("wiretap output words", v.outputs(), n, caps::LEAKAGE_ENUM_LIMIT)?;
            let dists: Vec<Vec<f64>> = (0..code.messages)
                .into_par_iter()
                .map(|j| {
                    let mut d = vec![0.0; total];
                    for l in 0..lt {
                        let x = code.word(j, l);
                        for (i, di) in d.iter_mut().enumerate() {
                            *di += word_likelihood(v, x, &index_word(i, v.outputs(), n)) / lt as f64;
                        }
                    }
                    d
                })
                .collect();
            Ok(classical_leakage(&dists))
        }
        Channel::CQ(v) if v.is_diagonal() => {
            let d = v.dim();
            let total = caps::checked_pow("wiretap space", d, n, caps::max_dim())?;
            let diags: Vec<Vec<f64>> = v.states().iter().map(|m| (0..d).map(|i| m[(i, i)].re).collect()).collect();
            let dists: Vec<Vec<f64>> = (0..code.messages)
                .into_par_iter()
                .map(|j| {
                    let mut out = vec![0.0; total];
                    for l in 0..lt {
                        let x = code.word(j, l);
                        for (i, oi) in out.iter_mut().enumerate() {
                            let z = index_word(i, d, n);
                            let p: f64 = x.iter().zip(&z).map(|(&a, &b)| diags[a][b]).product();
                            *oi += p / lt as f64;
                        }
                    }
                    out
                })
                .collect();
            Ok(classical_leakage(&dists))
        }
        Channel::CQ(v) => {
            let dim = caps::checked_pow("wiretap space", v.dim(), n, caps::DENSE_LIMIT)?;
            let states: Vec<CMat> = (0..code.messages)
                .into_par_iter()
                .map(|j| {
                    let mut m = CMat::zeros(dim, dim);
                    for l in 0..lt {
                        m += v.word_output(code.word(j, l))?;
                    }
                    Ok(m * cr(1.0 / lt as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            let per: Vec<f64> = states.par_iter().map(von_neumann_entropy_matrix).collect();
            let mut avg = CMat::zeros(dim, dim);
            for s in &states {
                avg += s;
            }
            avg *= cr(1.0 / states.len() as f64);
            Ok(mean_entropy_gap(von_neumann_entropy_matrix(&avg), &per))
        }
        _ => Err(QwkError::VariantMismatch("wiretap channel must have classical inputs".into())),
    }
}

fn classical_leakage(dists: &[Vec<f64>]) -> f64 {
    let m = dists[0].len();
    let mut avg = vec![0.0; m];
    for d in dists {
        for (a, v) in avg.iter_mut().zip(d) {
            *a += v / dists.len() as f64;
        }
    }
    let per: Vec<f64> = dists.iter().map(|d| entropy_of(d)).collect();
    mean_entropy_gap(entropy_of(&avg), &per)
}

// ---------------------------------------------------------------------------
// End-to-end run

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// `None` takes `J` from the rate formula.
    pub messages: Option<usize>,
    /// `None` takes the per-state depths from the rate formula.
    pub depth: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    /// Codeword source; uniform when absent.
    pub prior: Option<Vec<f64>>,
    pub delta: f64,
    pub decoder: DecoderOptions,
    pub mu: f64,
    pub zeta: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 6,
            messages: None,
            depth: None,
            trials: 1000,
            seed: 0,
            prior: None,
            delta: 0.25,
            decoder: DecoderOptions::default(),
            mu: 0.05,
            zeta: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: String,
    pub error: ErrorStat,
    pub leakage: LeakageStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub variant: String,
    pub n: usize,
    pub messages: usize,
    pub depth: Vec<usize>,
    pub prior: Vec<f64>,
    pub sizes: Option<Sizes>,
    pub per_t: Vec<SimState>,
    pub max_error: f64,
    pub max_leakage: f64,
    pub seed: u64,
    pub trials: usize,
}

/// Sample a code, build its decoder and evaluate error and leakage per state.
pub fn simulate(spec: &CompoundWiretapSpec, cfg: &SimConfig) -> Result<SimReport> {
    require_classical_input(spec)?;
    check_trials(cfg.trials)?;
    if cfg.n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let a = spec.inputs();
    let prior = cfg.prior.clone().unwrap_or_else(|| vec![1.0 / a as f64; a]);
    crate::infotheory::check_distribution(&prior)?;
    if prior.len() != a {
        return Err(QwkError::DimensionMismatch(format!("prior has {} entries for {a} inputs", prior.len())));
    }
    let sizes = if cfg.messages.is_none() || cfg.depth.is_none() {
        Some(sizes_from_rates(spec, &prior, cfg.n, cfg.mu, cfg.zeta)?)
    } else {
        None
    };
    let messages = cfg.messages.unwrap_or_else(|| sizes.as_ref().expect("sizes").messages);
    let depth = cfg.depth.clone().unwrap_or_else(|| sizes.as_ref().expect("sizes").depth.clone());
    let code = sample_codebook(&prior, cfg.n, messages, &depth, cfg.delta, cfg.seed)?;
    let decoder = build_decoder(spec, &code, &cfg.decoder)?;
    let errors = eval_error(spec, &code, &decoder, cfg.trials, cfg.seed)?;
    let leaks = eval_leakage(spec, &code)?;
    let per_t: Vec<SimState> = errors
        .into_iter()
        .zip(leaks)
        .map(|(error, leakage)| SimState { t: error.t.clone(), error, leakage })
        .collect();
    Ok(SimReport {
        variant: spec.variant().as_str().to_string(),
        n: cfg.n,
        messages,
        depth,
        prior,
        sizes,
        max_error: per_t.iter().map(|s| s.error.value).fold(0.0, f64::max),
        max_leakage: per_t.iter().map(|s| s.leakage.value).fold(0.0, f64::max),
        per_t,
        seed: cfg.seed,
        trials: cfg.trials,
    })
}
