//! Two-block protocol: the state index is sent first with a short
//! non-secret code, then the message with the code for that state.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_decoder, check_trials, eval_error, eval_leakage, info_of, legit_classical, sample_codebook, sample_letter,
    Codebook, Decoder, DecoderOptions, LeakageStat,
};
use crate::capacity::simplex_grid;
use crate::channels::{Channel, CompoundWiretapSpec};
use crate::error::{invalid, QwkError, Result};
use crate::rng::{derive_key, domain, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Block length of the state-index code.
    pub n1: usize,
    /// Block length of the message code.
    pub n2: usize,
    pub messages: usize,
    /// Randomisation depth, shared or one per state.
    pub depth: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub prior: Option<Vec<f64>>,
    pub delta: f64,
    pub decoder: DecoderOptions,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n1: 8,
            n2: 12,
            messages: 4,
            depth: vec![1],
            trials: 2000,
            seed: 0,
            prior: None,
            delta: 0.25,
            decoder: DecoderOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRates {
    pub block1_error: f64,
    /// Error of the second block given a correct first block.
    pub block2_error: f64,
    pub total_error: f64,
}

impl BlockRates {
    fn combine(block1_error: f64, block2_error: f64) -> Self {
        Self { block1_error, block2_error, total_error: block1_error + (1.0 - block1_error) * block2_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub t_true: String,
    pub skipped_block1: bool,
    /// Set when no input law gives every legitimate channel positive rate.
    pub degenerate: bool,
    pub exact: Option<BlockRates>,
    pub monte_carlo: BlockRates,
    /// `|total − (b1 + b2·(1 − b1))|` on the trial counts.
    pub accounting_residual: f64,
    /// Leakage of the message block only.
    pub leakage: LeakageStat,
}

/// Seed of the message code used for state `t`.
pub fn message_code_seed(seed: u64, t: usize) -> u64 {
    derive_key(seed, domain::PROTOCOL, &[2, t as u64])
}

fn index_code_seed(seed: u64) -> u64 {
    derive_key(seed, domain::PROTOCOL, &[1])
}

fn transmit<R: Rng + ?Sized>(decoder: &Decoder, legit: &Channel, x: &[usize], messages: usize, rng: &mut R) -> Result<Option<usize>> {
    match decoder {
        Decoder::Typical(d) => {
            let w = legit_classical(legit)
                .ok_or_else(|| QwkError::VariantMismatch("typical decoder needs classical outputs".into()))?;
            let y: Vec<usize> = x.iter().map(|&a| sample_letter(&w.rows()[a], rng)).collect();
            Ok(d.decode(&y))
        }
        Decoder::PrettyGood(d) => {
            let w = legit.as_cq().ok_or_else(|| QwkError::VariantMismatch("cq decoder".into()))?;
            let mut p = d.probabilities(&w.word_output(x)?);
            let s: f64 = p.iter().sum();
            p.push((1.0 - s).max(0.0));
            let o = sample_letter(&p, rng);
            Ok((o < messages).then_some(o))
        }
    }
}

fn best_min_rate(spec: &CompoundWiretapSpec) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for p in simplex_grid(spec.inputs(), 11) {
        let mut worst = f64::INFINITY;
        for pair in spec.pairs() {
            worst = worst.min(info_of(&pair.legit, &p)?);
        }
        best = best.max(worst);
    }
    Ok(best)
}

pub fn two_part_protocol(spec: &CompoundWiretapSpec, t_true: usize, cfg: &ProtocolConfig) -> Result<ProtocolReport> {
    check_trials(cfg.trials)?;
    if t_true >= spec.len() {
        return Err(invalid("t_true", format!("state {t_true} outside 0..{}", spec.len())));
    }
    if cfg.n1 == 0 || cfg.n2 == 0 {
        return Err(invalid("n", "block lengths must be positive"));
    }
    let a = spec.inputs();
    let prior = cfg.prior.clone().unwrap_or_else(|| vec![1.0 / a as f64; a]);
    let degenerate = best_min_rate(spec)? <= 1e-12;
    let skip = spec.len() == 1;

    let own = spec.subset(&[t_true])?;
    let depth = vec![if cfg.depth.len() == 1 { cfg.depth[0] } else { cfg.depth[t_true] }];
    let code2 = sample_codebook(&prior, cfg.n2, cfg.messages, &depth, cfg.delta, message_code_seed(cfg.seed, t_true))?;
    let dec2 = build_decoder(&own, &code2, &cfg.decoder)?;

    let index: Option<(Codebook, Decoder)> = if skip {
        None
    } else {
        let code1 = sample_codebook(&prior, cfg.n1, spec.len(), &[1], cfg.delta, index_code_seed(cfg.seed))?;
        let dec1 = build_decoder(spec, &code1, &cfg.decoder)?;
        Some((code1, dec1))
    };

    let exact = {
        let b2 = eval_error(&own, &code2, &dec2, cfg.trials, cfg.seed)?;
        let b1 = match &index {
            Some((code1, dec1)) => {
                let stats = eval_error(spec, code1, dec1, cfg.trials, cfg.seed)?;
                let s = &stats[t_true];
                (s.method == super::Method::Exact).then_some(s.per_message[t_true])
            }
            None => Some(0.0),
        };
        match (b1, b2[0].method) {
            (Some(p1), super::Method::Exact) => Some(BlockRates::combine(p1, b2[0].value)),
            _ => None,
        }
    };

    let legit = &spec.pairs()[t_true].legit;
    let outcomes: Vec<(bool, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, domain::PROTOCOL, &[t_true as u64, k as u64]);
            if let Some((code1, dec1)) = &index {
                let t_hat = transmit(dec1, legit, code1.word(t_true, 0), spec.len(), &mut rng)?;
                if t_hat != Some(t_true) {
                    return Ok((false, false));
                }
            }
            let j = rng.random_range(0..code2.messages);
            let l = rng.random_range(0..code2.depth[0]);
            let got = transmit(&dec2, legit, code2.word(j, l), code2.messages, &mut rng)?;
            Ok((true, got == Some(j)))
        })
        .collect::<Result<Vec<_>>>()?;
    let trials = cfg.trials as f64;
    let first_ok = outcomes.iter().filter(|o| o.0).count() as f64;
    let both_ok = outcomes.iter().filter(|o| o.0 && o.1).count() as f64;
    let b1 = 1.0 - first_ok / trials;
    let b2 = if first_ok > 0.0 { 1.0 - both_ok / first_ok } else { 0.0 };
    let total = 1.0 - both_ok / trials;
    let monte_carlo = BlockRates { block1_error: b1, block2_error: b2, total_error: total };
    let accounting_residual = (total - (b1 + b2 * (1.0 - b1))).abs();
    let leakage = eval_leakage(&own, &code2)?.remove(0);
    Ok(ProtocolReport {
        t_true: spec.pairs()[t_true].name.clone(),
        skipped_block1: skip,
        degenerate,
        exact,
        monte_carlo,
        accounting_residual,
        leakage,
    })
}
