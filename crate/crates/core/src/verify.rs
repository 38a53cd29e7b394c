//! Randomised inequality suites over the typicality, continuity and
//! covering bounds. Every instance is drawn from a keyed stream so a suite
//! run is reproducible from its seed.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::CQChannel;
use crate::error::{invalid, Result};
use crate::qcore::{c, cr, eigh_unchecked, ket, projector, random, root_fidelity_matrices, trace_norm, CMat};
use crate::rng::{domain, stream};
use crate::typicality::{
    averaged_output_projector, check_averaged_weight, conditional_typical_projector, fannes_check,
    gentle_measurement_check, typical_projector, typical_set, BoundCheck, TypicalParams, DEFAULT_K,
};
use crate::wiretapsim::covering_concentration;

pub const SUITES: [&str; 5] = ["typicality", "gentle", "fannes", "covering", "fidelity"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTally {
    pub bound_id: String,
    pub checks: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: usize,
    pub violations: usize,
    pub pass: bool,
    pub tally: Vec<BoundTally>,
    /// First few failing checks.
    pub failures: Vec<BoundCheck>,
    /// Named scalar results, e.g. covering medians.
    pub values: BTreeMap<String, f64>,
}

impl SuiteReport {
    fn from_checks(suite: &str, seed: u64, checks: &[BoundCheck]) -> Self {
        let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for ch in checks {
            let e = tally.entry(ch.bound_id.clone()).or_default();
            e.0 += 1;
            e.1 += usize::from(!ch.pass);
        }
        let failures: Vec<BoundCheck> = checks.iter().filter(|c| !c.pass).take(20).cloned().collect();
        let violations = checks.iter().filter(|c| !c.pass).count();
        Self {
            suite: suite.into(),
            seed,
            checks: checks.len(),
            violations,
            pass: violations == 0,
            tally: tally
                .into_iter()
                .map(|(bound_id, (checks, violations))| BoundTally { bound_id, checks, violations })
                .collect(),
            failures,
            values: BTreeMap::new(),
        }
    }
}

fn hadamard() -> CMat {
    let h = 1.0 / 2f64.sqrt();
    CMat::from_row_slice(2, 2, &[cr(h), cr(h), cr(h), cr(-h)])
}

/// `diag(0.7, 0.3)` followed by `random` seeded qubit states.
pub fn typicality_states(random_count: usize, seed: u64) -> Vec<CMat> {
    let mut out = vec![CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(0.7), cr(0.3)]))];
    for i in 0..random_count {
        let mut rng = stream(seed, domain::VERIFY, &[0, i as u64]);
        out.push(random::density_matrix(2, 2, &mut rng));
    }
    out
}

/// Bounds on the plain, conditional and averaged projectors. Each state `ρ`
/// also seeds the two-letter channel `{ρ, HρH}` under the uniform prior;
/// up to `words` typical words per block length are checked.
pub fn typicality_suite(
    states: &[CMat],
    blocks: &[usize],
    alphas: &[f64],
    words: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let prior = [0.5, 0.5];
    let delta = 0.25;
    let mut cases = Vec::new();
    for (i, rho) in states.iter().enumerate() {
        for &n in blocks {
            for &alpha in alphas {
                cases.push((i, rho, n, alpha));
            }
        }
    }
    let checks: Vec<Vec<BoundCheck>> = cases
        .par_iter()
        .map(|&(i, rho, n, alpha)| {
            let params = TypicalParams::new(n, delta, alpha, DEFAULT_K)?;
            let mut out = typical_projector(rho, params)?.report;
            let h = hadamard();
            let v = CQChannel::new(vec![rho.clone(), &h * rho * &h])?;
            let all = typical_set(&prior, n, delta)?;
            let mut rng = stream(seed, domain::VERIFY, &[1, i as u64, n as u64, alpha.to_bits()]);
            let picked: Vec<&Vec<usize>> = if all.len() <= words {
                all.iter().collect()
            } else {
                (0..words).map(|_| &all[rng.random_range(0..all.len())]).collect()
            };
            let avg = averaged_output_projector(&prior, &v, params)?;
            for w in picked {
                out.extend(conditional_typical_projector(&v, w, &prior, params)?.report);
                out.push(check_averaged_weight(&avg, &v, w));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(SuiteReport::from_checks("typicality", seed, &checks.concat()))
}

fn random_effect<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let u = random::unitary(d, rng);
    let diag = CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| cr(rng.random::<f64>())));
    &u * diag * u.adjoint()
}

/// `‖ρ − √X ρ √X‖₁ ≤ √(8λ)` on random states and effects, `d ∈ 2..=4`.
pub fn gentle_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let checks: Vec<BoundCheck> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, domain::VERIFY, &[2, k as u64]);
            let d = rng.random_range(2..=4);
            let rank = rng.random_range(1..=d);
            let rho = random::density_matrix(d, rank, &mut rng);
            // bias half the effects towards the support of ρ so λ is small
            let x = if k % 2 == 0 {
                let es = eigh_unchecked(&rho);
                let mut p = CMat::zeros(d, d);
                for i in 0..rank {
                    p += projector(&es.vector(i));
                }
                let s = 0.9 + 0.1 * rng.random::<f64>();
                p * cr(s) + random_effect(d, &mut rng) * cr((1.0 - s) * 0.5)
            } else {
                random_effect(d, &mut rng)
            };
            gentle_measurement_check(&rho, &x)
        })
        .collect();
    Ok(SuiteReport::from_checks("gentle", seed, &checks))
}

/// Entropy continuity on random pairs at trace distance below `1/e`.
pub fn fannes_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let limit = (-1f64).exp();
    let checks: Vec<BoundCheck> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, domain::VERIFY, &[3, k as u64]);
            let d = rng.random_range(2..=4);
            let a = random::density_matrix(d, rng.random_range(1..=d), &mut rng);
            let b = random::density_matrix(d, rng.random_range(1..=d), &mut rng);
            // shrink the mixing weight until the pair is close enough
            let mut s = rng.random::<f64>() * 0.3;
            loop {
                let mixed = &a * cr(1.0 - s) + &b * cr(s);
                if trace_norm(&(&a - &mixed)) < limit {
                    return fannes_check(&a, &mixed);
                }
                s *= 0.5;
            }
        })
        .collect();
    Ok(SuiteReport::from_checks("fannes", seed, &checks))
}

/// `1 − F ≤ ½‖ρ − σ‖₁ ≤ √(1 − F²)` with root fidelity `F`.
pub fn fidelity_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let checks: Vec<BoundCheck> = (0..instances)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = stream(seed, domain::VERIFY, &[4, k as u64]);
            let d = rng.random_range(2..=4);
            let a = random::density_matrix(d, rng.random_range(1..=d), &mut rng);
            let b = random::density_matrix(d, rng.random_range(1..=d), &mut rng);
            let f = root_fidelity_matrices(&a, &b);
            let t = 0.5 * trace_norm(&(&a - &b));
            [BoundCheck::ge("fidelity_lower", t, 1.0 - f), BoundCheck::le("fidelity_upper", t, (1.0 - f * f).max(0.0).sqrt())]
        })
        .collect();
    Ok(SuiteReport::from_checks("fidelity", seed, &checks))
}

/// Wiretap channel `{|0⟩, |+⟩}` under the uniform prior.
pub fn shipped_qubit_wiretap() -> CQChannel {
    let plus = (ket(2, 0) + ket(2, 1)) * c(1.0 / 2f64.sqrt(), 0.0);
    CQChannel::new(vec![projector(&ket(2, 0)), projector(&plus)]).expect("valid states")
}

/// Median covering deviation must fall strictly at each step of `schedule`.
pub fn covering_suite(schedule: &[usize], trials: usize, seed: u64) -> Result<SuiteReport> {
    let params = TypicalParams::new(4, 0.3, 1.0, DEFAULT_K)?;
    let r = covering_concentration(&shipped_qubit_wiretap(), &[0.5, 0.5], params, schedule, trials, seed, 0.1)?;
    let mut checks = r.sandwich.clone();
    for w in r.entries.windows(2) {
        let (prev, next) = (w[0].median, w[1].median);
        checks.push(BoundCheck { bound_id: "median_decreasing".into(), lhs: next, rhs: prev, pass: next < prev });
    }
    let mut rep = SuiteReport::from_checks("covering", seed, &checks);
    for e in &r.entries {
        rep.values.insert(format!("median_L{:05}", e.depth), e.median);
    }
    Ok(rep)
}

/// Default sizes for a named suite.
pub fn run_suite(id: &str, seed: u64) -> Result<SuiteReport> {
    match id {
        "typicality" => typicality_suite(&typicality_states(10, seed), &[4, 6, 8, 10], &[0.5, 1.0, 2.0], 16, seed),
        "gentle" => gentle_suite(1000, seed),
        "fannes" => fannes_suite(1000, seed),
        "covering" => covering_suite(&[1, 4, 16, 64], 500, seed),
        "fidelity" => fidelity_suite(1000, seed),
        other => Err(invalid("suite", format!("unknown suite `{other}`; expected one of {}", SUITES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for id in ["gentle", "fannes", "fidelity"] {
            let r = run_suite(id, 1).unwrap();
            assert!(r.pass, "{id}: {:?}", r.failures);
            assert!(r.checks >= 1000);
        }
    }

    #[test]
    fn typicality_on_a_small_grid() {
        let r = typicality_suite(&typicality_states(2, 3), &[4, 6], &[0.5, 1.0, 2.0], 4, 3).unwrap();
        assert!(r.pass, "{:?}", r.failures);
        let ids: Vec<&str> = r.tally.iter().map(|t| t.bound_id.as_str()).collect();
        assert_eq!(ids, ["te1", "te2", "te3", "te4", "te5", "te6", "te7"]);
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run_suite("nope", 0).is_err());
    }
}
