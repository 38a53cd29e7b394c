//! Secrecy and entanglement-generation rate formulas at finite block length.
//!
//! Every mutual-information term factors through an output-entropy map
//! `φ(q)` of the input distribution, so for an auxiliary `U` with weights `w`
//! and conditionals `q_u`: `I(U;Y) = φ(Σ w_u q_u) − Σ w_u φ(q_u)`.
//! At block length `n > 1` the input alphabet is `Aⁿ` and both terms of a
//! formula are divided by `n`.

mod optimizer;

pub use optimizer::{project_simplex, simplex_grid, Point};

use serde::{Deserialize, Serialize};

use crate::channels::{
    complementary_channel, kraus_to_stinespring, stinespring_to_kraus, CQChannel, Channel,
    ClassicalChannel, CompoundWiretapSpec, KrausChannel, StinespringIsometry, Variant,
};
use crate::error::{invalid, QwkError, Result};
use crate::infotheory::{coherent_information_matrix, entropy_of, von_neumann_entropy_matrix};
use crate::qcore::{c, cr, eigh_unchecked, identity, ket, projector, random, CMat};
use crate::rng::{domain, stream};

use optimizer::{maximize_aux, maximize_prior};

/// Largest supported block length for regularized formulas.
pub const MAX_BLOCK: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    /// Auxiliary alphabet size; `None` means `|A| + 1`.
    pub aux_card: Option<usize>,
    pub grid_resolution: usize,
    pub refine_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 1,
            aux_card: None,
            grid_resolution: 21,
            refine_iters: 200,
            restarts: 8,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_BLOCK {
            return Err(invalid("n", format!("block length must be in 1..={MAX_BLOCK}")));
        }
        if self.aux_card == Some(0) {
            return Err(invalid("aux_card", "must be at least 1"));
        }
        if self.grid_resolution < 2 {
            return Err(invalid("grid_resolution", "must be at least 2"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        Ok(())
    }

    fn aux(&self, a: usize) -> usize {
        self.aux_card.unwrap_or(a + 1)
    }
}

/// Where the optimum was found.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Argmax {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux_weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditionals: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    /// Input basis vectors as columns, complex entries `[re, im]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerState {
    pub t: String,
    pub legit: f64,
    pub wiretap: f64,
    /// Own optimum for per-state formulas, `legit − wiretap` otherwise.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax: Option<Argmax>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub formula_id: String,
    pub n: usize,
    /// True when a regularized formula was evaluated at a fixed `n`.
    pub fixed_n: bool,
    /// `raw_value` clamped at 0; values within tolerance of 0 are reported as 0.
    pub value: f64,
    pub raw_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmin_t: Option<String>,
    pub per_t: Vec<PerState>,
    pub argmax: Argmax,
    pub config: SolverConfig,
}

impl CapacityReport {
    /// Recompute the value from the per-state table.
    pub fn recomputed(&self) -> f64 {
        if self.per_t.iter().all(|p| p.argmax.is_some()) {
            self.per_t.iter().map(|p| p.value).fold(f64::INFINITY, f64::min)
        } else {
            let l = self.per_t.iter().map(|p| p.legit).fold(f64::INFINITY, f64::min);
            let w = self.per_t.iter().map(|p| p.wiretap).fold(f64::NEG_INFINITY, f64::max);
            l - w
        }
    }
}

// ---------------------------------------------------------------------------
// Entropy maps

/// Output entropy as a function of the input distribution.
#[derive(Debug, Clone)]
enum Entropic {
    Classical(ClassicalChannel),
    Quantum(CQChannel),
}

impl Entropic {
    fn phi(&self, q: &[f64]) -> f64 {
        match self {
            Entropic::Classical(c) => entropy_of(&c.push_forward(q)),
            Entropic::Quantum(c) => von_neumann_entropy_matrix(&c.average(q)),
        }
    }

    /// `I(U;Y)` for the point; prior-only points read `U = A`.
    fn info(&self, p: &Point) -> f64 {
        if p.q.is_empty() {
            let cond: f64 = p
                .w
                .iter()
                .enumerate()
                .filter(|(_, &wx)| wx > 0.0)
                .map(|(x, wx)| wx * self.phi(&delta(p.w.len(), x)))
                .sum();
            return self.phi(&p.w) - cond;
        }
        let cond: f64 = p
            .w
            .iter()
            .zip(&p.q)
            .filter(|(wu, _)| **wu > 0.0)
            .map(|(wu, qu)| wu * self.phi(qu))
            .sum();
        self.phi(&p.input_marginal()) - cond
    }

    fn n_fold(&self, n: usize) -> Result<Self> {
        if n == 1 {
            return Ok(self.clone());
        }
        Ok(match self {
            Entropic::Classical(c) => Entropic::Classical(c.n_fold(n)?),
            Entropic::Quantum(c) => Entropic::Quantum(c.n_fold(n)?),
        })
    }
}

fn delta(a: usize, x: usize) -> Vec<f64> {
    let mut v = vec![0.0; a];
    v[x] = 1.0;
    v
}

/// Legitimate and wiretap entropy maps of one state.
struct Terms {
    name: String,
    legit: Entropic,
    wiretap: Entropic,
}

impl Terms {
    fn eval(&self, p: &Point, scale: f64) -> (f64, f64) {
        (self.legit.info(p) * scale, self.wiretap.info(p) * scale)
    }
}

/// cq view of a channel: classical rows become diagonal states and quantum
/// channels are fed computational-basis inputs.
fn cq_view(ch: &Channel) -> CQChannel {
    match ch {
        Channel::Classical(c) => c.to_cq(),
        Channel::CQ(c) => c.clone(),
        Channel::Kraus(_) | Channel::Stinespring(_) => {
            let k = ch.to_kraus();
            let states = (0..k.d_in()).map(|x| k.apply_matrix(&projector(&ket(k.d_in(), x)))).collect();
            CQChannel::new(states).expect("channel images are states")
        }
    }
}

fn classical_of(ch: &Channel) -> ClassicalChannel {
    match ch {
        Channel::Classical(c) => c.clone(),
        _ => unreachable!("variant checked"),
    }
}

fn require(spec: &CompoundWiretapSpec, allowed: &[Variant], op: &str) -> Result<()> {
    if !allowed.contains(&spec.variant()) {
        return Err(QwkError::VariantMismatch(format!(
            "{op} does not accept variant {}",
            spec.variant().as_str()
        )));
    }
    Ok(())
}

fn argmax_of(p: &Point) -> Argmax {
    if p.q.is_empty() {
        Argmax { prior: Some(p.w.clone()), ..Default::default() }
    } else {
        Argmax {
            aux_weights: Some(p.w.clone()),
            conditionals: Some(p.q.clone()),
            prior: Some(p.input_marginal()),
            ..Default::default()
        }
    }
}

fn complex_columns(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn complex_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Generic min/max shapes

/// `min_t max_x (legit_t − wiretap_t)`.
fn per_state_max(
    formula: &str,
    terms: &[Terms],
    a: usize,
    aux: Option<usize>,
    n: usize,
    fixed_n: bool,
    cfg: &SolverConfig,
) -> CapacityReport {
    let scale = 1.0 / n as f64;
    let per_t: Vec<PerState> = terms
        .iter()
        .map(|tm| {
            let f = |p: &Point| {
                let (l, w) = tm.eval(p, scale);
                l - w
            };
            let (v, p) = match aux {
                Some(k) => maximize_aux(a, k, &f, cfg, 0),
                None => maximize_prior(a, &f, cfg, 0),
            };
            let (l, w) = tm.eval(&p, scale);
            PerState { t: tm.name.clone(), legit: l, wiretap: w, value: v, argmax: Some(argmax_of(&p)) }
        })
        .collect();
    let mut best = 0;
    for (i, p) in per_t.iter().enumerate() {
        if p.value < per_t[best].value {
            best = i;
        }
    }
    let raw = per_t[best].value;
    CapacityReport {
        formula_id: formula.into(),
        n,
        fixed_n,
        value: rate(raw, cfg.tolerance),
        raw_value: raw,
        argmin_t: Some(per_t[best].t.clone()),
        argmax: per_t[best].argmax.clone().unwrap_or_default(),
        per_t,
        config: cfg.clone(),
    }
}

/// `max_x (min_t legit_t − max_t wiretap_t)`.
fn common_max(
    formula: &str,
    terms: &[Terms],
    a: usize,
    aux: Option<usize>,
    n: usize,
    fixed_n: bool,
    cfg: &SolverConfig,
) -> CapacityReport {
    let scale = 1.0 / n as f64;
    let f = |p: &Point| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for tm in terms {
            let (l, w) = tm.eval(p, scale);
            lo = lo.min(l);
            hi = hi.max(w);
        }
        lo - hi
    };
    let (_, p) = match aux {
        Some(k) => maximize_aux(a, k, &f, cfg, 1),
        None => maximize_prior(a, &f, cfg, 1),
    };
    let per_t: Vec<PerState> = terms
        .iter()
        .map(|tm| {
            let (l, w) = tm.eval(&p, scale);
            PerState { t: tm.name.clone(), legit: l, wiretap: w, value: l - w, argmax: None }
        })
        .collect();
    let l = per_t.iter().map(|p| p.legit).fold(f64::INFINITY, f64::min);
    let w = per_t.iter().map(|p| p.wiretap).fold(f64::NEG_INFINITY, f64::max);
    let raw = l - w;
    let mut argmin = 0;
    for (i, s) in per_t.iter().enumerate() {
        if s.legit < per_t[argmin].legit {
            argmin = i;
        }
    }
    CapacityReport {
        formula_id: formula.into(),
        n,
        fixed_n,
        value: rate(raw, cfg.tolerance),
        raw_value: raw,
        argmin_t: Some(per_t[argmin].t.clone()),
        argmax: argmax_of(&p),
        per_t,
        config: cfg.clone(),
    }
}

fn classical_terms(spec: &CompoundWiretapSpec) -> Vec<Terms> {
    spec.pairs()
        .iter()
        .map(|p| Terms {
            name: p.name.clone(),
            legit: Entropic::Classical(classical_of(&p.legit)),
            wiretap: Entropic::Classical(classical_of(&p.wiretap)),
        })
        .collect()
}

fn rate(raw: f64, tolerance: f64) -> f64 {
    if raw <= tolerance {
        0.0
    } else {
        raw
    }
}

// ---------------------------------------------------------------------------
// Classical wiretap

/// `min_t max_U (I(U;B_t) − I(U;K_t))`.
pub fn classical_csi_capacity(spec: &CompoundWiretapSpec, cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    require(spec, &[Variant::Classical], "classical_csi_capacity")?;
    let a = spec.inputs();
    Ok(per_state_max("classical_csi", &classical_terms(spec), a, Some(cfg.aux(a)), 1, false, cfg))
}

/// `max_U (min_t I(U;B_t) − max_t I(U;K_t))`.
pub fn classical_nocsi_lower(spec: &CompoundWiretapSpec, cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    require(spec, &[Variant::Classical], "classical_nocsi_lower")?;
    let a = spec.inputs();
    Ok(common_max("classical_nocsi_lower", &classical_terms(spec), a, Some(cfg.aux(a)), 1, false, cfg))
}

// ---------------------------------------------------------------------------
// Classical channel with a quantum wiretapper

fn qwiretap_terms(spec: &CompoundWiretapSpec, n: usize) -> Result<Vec<Terms>> {
    spec.pairs()
        .iter()
        .map(|p| {
            Ok(Terms {
                name: p.name.clone(),
                legit: Entropic::Classical(classical_of(&p.legit)).n_fold(n)?,
                wiretap: Entropic::Quantum(cq_view(&p.wiretap)).n_fold(n)?,
            })
        })
        .collect()
}

/// `min_t max_U (I(U;B_t) − (1/n) χ(U;Z_t^{⊗n}))` at `cfg.n`.
pub fn qwiretap_csi_capacity(spec: &CompoundWiretapSpec, cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    require(spec, &[Variant::ClassicalQuantumWiretap], "qwiretap_csi_capacity")?;
    let a = spec.inputs().pow(cfg.n as u32);
    let terms = qwiretap_terms(spec, cfg.n)?;
    Ok(per_state_max("qwiretap_csi", &terms, a, Some(cfg.aux(a)), cfg.n, true, cfg))
}

/// `max_U (min_t I(U;B_t) − max_t χ(U;Z_t))`, single letter.
pub fn qwiretap_nocsi_lower(spec: &CompoundWiretapSpec, cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    require(spec, &[Variant::ClassicalQuantumWiretap], "qwiretap_nocsi_lower")?;
    let a = spec.inputs();
    let terms = qwiretap_terms(spec, 1)?;
    Ok(common_max("qwiretap_nocsi_lower", &terms, a, Some(cfg.aux(a)), 1, false, cfg))
}

// ---------------------------------------------------------------------------
// cq wiretap

fn cq_terms(spec: &CompoundWiretapSpec, n: usize) -> Result<Vec<Terms>> {
    spec.pairs()
        .iter()
        .map(|p| {
            Ok(Terms {
                name: p.name.clone(),
                legit: Entropic::Quantum(cq_view(&p.legit)).n_fold(n)?,
                wiretap: Entropic::Quantum(cq_view(&p.wiretap)).n_fold(n)?,
            })
        })
        .collect()
}

/// `min_t max_U (1/n)(χ(U;B_t^{⊗n}) − χ(U;Z_t^{⊗n}))` at `cfg.n`; the
/// ensemble is a prior on `U` pushed through a prefix map into the inputs.
pub fn cq_csi_capacity(spec: &CompoundWiretapSpec, cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    require(spec, &[Variant::Cq, Variant::Quantum], "cq_csi_capacity")?;
    let a = spec.inputs().pow(cfg.n as u32);
    let terms = cq_terms(spec, cfg.n)?;
    Ok(per_state_max("cq_csi", &terms, a, Some(cfg.aux(a)), cfg.n, true, cfg))
}

/// `max_U (1/n)(min_t χ(U;B_t^{⊗n}) − max_t χ(U;Z_t^{⊗n}))` at `cfg.n`.
pub fn cq_nocsi_capacity(spec: &CompoundWiretapSpec, cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    require(spec, &[Variant::Cq, Variant::Quantum], "cq_nocsi_capacity")?;
    let a = spec.inputs().pow(cfg.n as u32);
    let terms = cq_terms(spec, cfg.n)?;
    Ok(common_max("cq_nocsi", &terms, a, Some(cfg.aux(a)), cfg.n, true, cfg))
}

// ---------------------------------------------------------------------------
// Entanglement generation

fn check_family(family: &[StinespringIsometry]) -> Result<(usize, Vec<KrausChannel>, Vec<KrausChannel>)> {
    let first = family.first().ok_or_else(|| invalid("family", "must be non-empty"))?;
    let d = first.d_in();
    if family.iter().any(|s| s.d_in() != d || s.d_out() != first.d_out()) {
        return Err(QwkError::DimensionMismatch("channels in the family differ in dimension".into()));
    }
    let main = family.iter().map(stinespring_to_kraus).collect();
    let env = family.iter().map(complementary_channel).collect();
    Ok((d, main, env))
}

/// Kraus families to isometries.
pub fn dilate(family: &[KrausChannel]) -> Vec<StinespringIsometry> {
    family.iter().map(kraus_to_stinespring).collect()
}

fn basis_terms(u: &CMat, main: &[KrausChannel], env: &[KrausChannel]) -> Vec<Terms> {
    let inputs: Vec<CMat> = (0..u.ncols()).map(|x| projector(&u.column(x).into_owned())).collect();
    main.iter()
        .zip(env)
        .enumerate()
        .map(|(t, (m, e))| {
            let q = inputs.iter().map(|r| m.apply_matrix(r)).collect();
            let z = inputs.iter().map(|r| e.apply_matrix(r)).collect();
            Terms {
                name: format!("t{t}"),
                legit: Entropic::Quantum(CQChannel::new(q).expect("outputs are states")),
                wiretap: Entropic::Quantum(CQChannel::new(z).expect("outputs are states")),
            }
        })
        .collect()
}

fn min_minus_max(terms: &[Terms], p: &Point) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for tm in terms {
        let (l, w) = tm.eval(p, 1.0);
        lo = lo.min(l);
        hi = hi.max(w);
    }
    lo - hi
}

fn dft(d: usize) -> CMat {
    let s = 1.0 / (d as f64).sqrt();
    CMat::from_fn(d, d, |i, j| {
        let ang = 2.0 * std::f64::consts::PI * (i * j) as f64 / d as f64;
        c(ang.cos() * s, ang.sin() * s)
    })
}

/// `max_{p, basis} (min_t χ(p;Q_t) − max_t χ(p;E_t))` with `E_t` the
/// environment output.
pub fn entgen_lower_bound(family: &[StinespringIsometry], cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    let (d, main, env) = check_family(family)?;
    let inner = |u: &CMat| {
        let terms = basis_terms(u, &main, &env);
        let f = |p: &Point| min_minus_max(&terms, p);
        maximize_prior(d, &f, cfg, 2)
    };
    let mut starts = vec![identity(d), dft(d)];
    for r in 0..cfg.restarts {
        let mut rng = stream(cfg.seed, domain::RESTART, &[3, r as u64]);
        starts.push(random::unitary(d, &mut rng));
    }
    let mut best_u = starts[0].clone();
    let (mut best_v, mut best_p) = inner(&best_u);
    for u in starts.into_iter().skip(1) {
        let (v, p) = inner(&u);
        if v > best_v {
            best_v = v;
            best_p = p;
            best_u = u;
        }
    }
    // local search over nearby bases
    let mut rng = stream(cfg.seed, domain::RESTART, &[4]);
    let mut eps = 0.3;
    for _ in 0..cfg.refine_iters.min(60) {
        if eps < 1e-4 {
            break;
        }
        let h = random::hermitian(d, &mut rng);
        let step = crate::qcore::unitary_exp(&h, eps);
        let cand = &best_u * step;
        let (v, p) = inner(&cand);
        if v > best_v + 1e-12 {
            best_v = v;
            best_p = p;
            best_u = cand;
        } else {
            eps *= 0.7;
        }
    }
    let terms = basis_terms(&best_u, &main, &env);
    let per_t: Vec<PerState> = terms
        .iter()
        .map(|tm| {
            let (l, w) = tm.eval(&best_p, 1.0);
            PerState { t: tm.name.clone(), legit: l, wiretap: w, value: l - w, argmax: None }
        })
        .collect();
    let l = per_t.iter().map(|p| p.legit).fold(f64::INFINITY, f64::min);
    let w = per_t.iter().map(|p| p.wiretap).fold(f64::NEG_INFINITY, f64::max);
    let raw = l - w;
    let mut argmin = 0;
    for (i, s) in per_t.iter().enumerate() {
        if s.legit < per_t[argmin].legit {
            argmin = i;
        }
    }
    Ok(CapacityReport {
        formula_id: "entgen_lower".into(),
        n: 1,
        fixed_n: false,
        value: rate(raw, cfg.tolerance),
        raw_value: raw,
        argmin_t: Some(per_t[argmin].t.clone()),
        argmax: Argmax {
            prior: Some(best_p.w.clone()),
            basis: Some(complex_columns(&best_u)),
            ..Default::default()
        },
        per_t,
        config: cfg.clone(),
    })
}

fn state_from_factor(a: &CMat) -> CMat {
    let m = a * a.adjoint();
    let tr = m.trace().re;
    m * cr(1.0 / tr)
}

/// `max_ρ I_C(ρ, N^{⊗n}) / n` by restarts and gradient polish on a factor `A`
/// with `ρ = AA*/tr(AA*)`.
fn max_coherent_information(k: &KrausChannel, cfg: &SolverConfig) -> (f64, CMat) {
    let dim = k.d_in();
    let f = |a: &CMat| coherent_information_matrix(&state_from_factor(a), k);
    let mut starts = vec![identity(dim)];
    for i in 0..dim {
        starts.push(projector(&ket(dim, i)) + identity(dim) * cr(1e-3));
    }
    for r in 0..cfg.restarts {
        let mut rng = stream(cfg.seed, domain::RESTART, &[5, r as u64]);
        starts.push(random::ginibre(dim, dim, &mut rng));
    }
    let polished: Vec<(f64, CMat)> = {
        use rayon::prelude::*;
        starts
            .into_par_iter()
            .map(|a| polish_factor(a, &f, cfg.refine_iters.min(100)))
            .collect()
    };
    let mut best = polished[0].clone();
    for p in polished.into_iter().skip(1) {
        if p.0 > best.0 {
            best = p;
        }
    }
    (best.0, state_from_factor(&best.1))
}

fn polish_factor<F: Fn(&CMat) -> f64>(a0: CMat, f: &F, iters: usize) -> (f64, CMat) {
    let mut a = a0;
    let mut fa = f(&a);
    let mut step = 0.2;
    let h = 1e-6;
    let (r, cdim) = (a.nrows(), a.ncols());
    for _ in 0..iters {
        if step < 1e-9 {
            break;
        }
        let mut g = CMat::zeros(r, cdim);
        for i in 0..r {
            for j in 0..cdim {
                for (dir, unit) in [(0, c(1.0, 0.0)), (1, c(0.0, 1.0))] {
                    let mut up = a.clone();
                    let mut dn = a.clone();
                    up[(i, j)] += unit * h;
                    dn[(i, j)] -= unit * h;
                    let d = (f(&up) - f(&dn)) / (2.0 * h);
                    if dir == 0 {
                        g[(i, j)].re = d;
                    } else {
                        g[(i, j)].im = d;
                    }
                }
            }
        }
        let norm = g.norm();
        if !(norm > 1e-12) {
            break;
        }
        let scale = a.norm();
        loop {
            let cand = &a + &g * cr(step * scale / norm);
            let fc = f(&cand);
            if fc > fa {
                a = cand;
                fa = fc;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-9 {
                break;
            }
        }
    }
    (fa, a)
}

/// `min_t max_ρ (1/n) I_C(ρ, N_t^{⊗n})` at `cfg.n`.
pub fn entgen_csi_capacity(family: &[StinespringIsometry], cfg: &SolverConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    let (_, main, _) = check_family(family)?;
    let n = cfg.n;
    let per_t: Vec<PerState> = main
        .iter()
        .enumerate()
        .map(|(t, k)| {
            let kn = if n == 1 { k.clone() } else { k.n_fold(n)? };
            let (v, rho) = max_coherent_information(&kn, cfg);
            let v = v / n as f64;
            Ok(PerState {
                t: format!("t{t}"),
                legit: v,
                wiretap: 0.0,
                value: v,
                argmax: Some(Argmax { state: Some(complex_rows(&rho)), ..Default::default() }),
            })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, p) in per_t.iter().enumerate() {
        if p.value < per_t[best].value {
            best = i;
        }
    }
    let raw = per_t[best].value;
    Ok(CapacityReport {
        formula_id: "entgen_csi".into(),
        n,
        fixed_n: true,
        value: rate(raw, cfg.tolerance),
        raw_value: raw,
        argmin_t: Some(per_t[best].t.clone()),
        argmax: per_t[best].argmax.clone().unwrap_or_default(),
        per_t,
        config: cfg.clone(),
    })
}

/// Eigen-decomposition of the optimal state, for callers that need the
/// ensemble behind an `entgen_csi` report.
pub fn state_ensemble(rho: &CMat) -> (Vec<f64>, CMat) {
    let es = eigh_unchecked(rho);
    (es.values.iter().map(|&l| l.max(0.0)).collect(), es.vectors)
}

#[cfg(test)]
mod tests;
