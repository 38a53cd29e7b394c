//! Operator concentration of randomised wiretap outputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps;
use crate::channels::CQChannel;
use crate::error::{invalid, Result};
use crate::qcore::{cr, trace_norm, CMat};
use crate::rng::{domain, stream};
use crate::typicality::{sandwich_check, truncated_typical, BoundCheck, TypicalParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringEntry {
    pub depth: usize,
    pub median: f64,
    pub mean: f64,
    pub q90: f64,
    /// Fraction of trials with deviation above `epsilon`.
    pub exceed: f64,
    pub deviations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub entries: Vec<CoveringEntry>,
    /// Gentle-measurement distance of each typical word's sandwiched output.
    pub sandwich: Vec<BoundCheck>,
    pub medians_nonincreasing: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// For each depth `L`, the distribution of `‖(1/L) Σ_l Q(X_l) − Θ‖₁` with
/// `X_l` drawn from the truncated typical distribution and `Θ = E Q(X)`.
pub fn covering_concentration(
    v: &CQChannel,
    p: &[f64],
    params: TypicalParams,
    schedule: &[usize],
    trials: usize,
    seed: u64,
    epsilon: f64,
) -> Result<CoveringReport> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    if schedule.is_empty() || schedule.contains(&0) {
        return Err(invalid("schedule", "depths must be positive"));
    }
    let dim = caps::checked_pow("covering space", v.dim(), params.n, caps::DENSE_LIMIT)?;
    let tt = truncated_typical(p, params.n, params.delta)?;
    let sandwiched: Vec<(CMat, BoundCheck)> = tt
        .words
        .par_iter()
        .map(|w| sandwich_check(v, p, w, params))
        .collect::<Result<Vec<_>>>()?;
    let mut theta = CMat::zeros(dim, dim);
    for ((q, _), &pw) in sandwiched.iter().zip(&tt.probs) {
        theta += q * cr(pw);
    }
    let entries: Vec<CoveringEntry> = schedule
        .iter()
        .map(|&depth| {
            let mut deviations: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|k| {
                    let mut rng = stream(seed, domain::COVERING, &[depth as u64, k as u64]);
                    let mut avg = CMat::zeros(dim, dim);
                    for _ in 0..depth {
                        avg += &sandwiched[tt.sample_index(&mut rng)].0;
                    }
                    avg *= cr(1.0 / depth as f64);
                    trace_norm(&(avg - &theta))
                })
                .collect();
            let mean = deviations.iter().sum::<f64>() / trials as f64;
            let exceed = deviations.iter().filter(|&&d| d > epsilon).count() as f64 / trials as f64;
            let mut sorted = deviations.clone();
            sorted.sort_by(f64::total_cmp);
            deviations.shrink_to_fit();
            CoveringEntry { depth, median: quantile(&sorted, 0.5), mean, q90: quantile(&sorted, 0.9), exceed, deviations }
        })
        .collect();
    let medians_nonincreasing = entries.windows(2).all(|w| w[1].median <= w[0].median + 1e-12);
    Ok(CoveringReport {
        n: params.n,
        trials,
        seed,
        epsilon,
        entries,
        sandwich: sandwiched.into_iter().map(|(_, c)| c).collect(),
        medians_nonincreasing,
    })
}
