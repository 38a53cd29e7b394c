//! Classical, classical-quantum and quantum channels.
//!
//! Quantum channels come in two interchangeable forms: a Kraus list
//! `{A_k}` with `Σ A_k* A_k = id`, and a Stinespring isometry
//! `U = Σ_k A_k ⊗ |k⟩` into `out ⊗ env`. Classical and cq channels embed
//! into Kraus form as measure-and-prepare maps in the computational basis.

mod diamond;
mod net;

pub use diamond::{diamond_distance, DiamondEstimate};
pub use net::{build_tau_net, nearest_in_net, NetMatch, TauNet};

use serde::{Deserialize, Serialize};

use crate::caps;
use crate::error::{QwkError, Result};
use crate::qcore::{
    c, cr, eigh_unchecked, identity, ket, kron, partial_trace_matrix, CMat, DensityOperator, HilbertLabel, TOL_RECON, TOL_TRACE,
};

// ---------------------------------------------------------------------------
// Classical

/// Row-stochastic matrix `V(y|x)`, rows indexed by input.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalChannel {
    matrix: Vec<Vec<f64>>,
    outputs: usize,
}

impl ClassicalChannel {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let outputs = matrix.first().map(Vec::len).unwrap_or(0);
        if matrix.is_empty() || outputs == 0 {
            return Err(QwkError::InvalidChannel("empty stochastic matrix".into()));
        }
        for (x, row) in matrix.iter().enumerate() {
            if row.len() != outputs {
                return Err(QwkError::InvalidChannel(format!("row {x} has wrong length")));
            }
            if row.iter().any(|&p| !(-0.0..=1.0).contains(&p) || p.is_nan()) {
                return Err(QwkError::InvalidChannel(format!("row {x} has entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > TOL_TRACE {
                return Err(QwkError::InvalidChannel(format!("row {x} sums to {s}")));
            }
        }
        Ok(Self { matrix, outputs })
    }

    pub fn bsc(p: f64) -> Self {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).expect("BSC crossover in [0,1]")
    }

    pub fn identity(k: usize) -> Self {
        let m = (0..k)
            .map(|x| (0..k).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(m).expect("identity is stochastic")
    }

    /// Every input maps to `dist`.
    pub fn constant(inputs: usize, dist: &[f64]) -> Result<Self> {
        Self::new(vec![dist.to_vec(); inputs])
    }

    pub fn inputs(&self) -> usize {
        self.matrix.len()
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.matrix[x][y]
    }

    pub fn apply(&self, x: usize) -> Result<Vec<f64>> {
        self.matrix
            .get(x)
            .cloned()
            .ok_or_else(|| QwkError::DimensionMismatch(format!("input symbol {x} out of range")))
    }

    /// Output distribution for an input distribution.
    pub fn push_forward(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        for (px, row) in p.iter().zip(&self.matrix) {
            if *px == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += px * w;
            }
        }
        out
    }

    /// Probability of the output word given the input word.
    pub fn word_prob(&self, x: &[usize], y: &[usize]) -> f64 {
        x.iter().zip(y).map(|(&a, &b)| self.matrix[a][b]).product()
    }

    pub fn apply_word(&self, x: &[usize]) -> Result<Vec<f64>> {
        let nf = self.n_fold(x.len())?;
        nf.apply(word_index(x, self.inputs()))
    }

    pub fn n_fold(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(crate::error::invalid("n", "block length must be positive"));
        }
        let a = caps::checked_pow("n-fold inputs", self.inputs(), n, caps::EXACT_OUTPUT_LIMIT * 16)?;
        let b = caps::checked_pow("n-fold outputs", self.outputs, n, caps::EXACT_OUTPUT_LIMIT * 16)?;
        let mut m = vec![vec![0.0; b]; a];
        for (xi, row) in m.iter_mut().enumerate() {
            let xw = index_word(xi, self.inputs(), n);
            for (yi, slot) in row.iter_mut().enumerate() {
                let yw = index_word(yi, self.outputs, n);
                *slot = self.word_prob(&xw, &yw);
            }
        }
        Ok(Self { matrix: m, outputs: b })
    }

    /// Measure-and-prepare Kraus form `√V(y|x) |y⟩⟨x|`.
    pub fn to_kraus(&self) -> KrausChannel {
        let (a, b) = (self.inputs(), self.outputs);
        let mut ops = Vec::new();
        for x in 0..a {
            for y in 0..b {
                let p = self.matrix[x][y];
                if p > 0.0 {
                    let mut op = CMat::zeros(b, a);
                    op[(y, x)] = cr(p.sqrt());
                    ops.push(op);
                }
            }
        }
        KrausChannel::new_unchecked(a, b, ops)
    }

    /// cq form with diagonal output states.
    pub fn to_cq(&self) -> CQChannel {
        let states = self
            .matrix
            .iter()
            .map(|row| {
                CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                    row.len(),
                    row.iter().map(|&p| cr(p)),
                ))
            })
            .collect();
        CQChannel { states }
    }
}

/// Mixed-radix index of a word (first letter most significant).
pub fn word_index(w: &[usize], base: usize) -> usize {
    w.iter().fold(0, |acc, &s| acc * base + s)
}

pub fn index_word(mut i: usize, base: usize, n: usize) -> Vec<usize> {
    let mut w = vec![0; n];
    for slot in w.iter_mut().rev() {
        *slot = i % base;
        i /= base;
    }
    w
}

// ---------------------------------------------------------------------------
// Classical-quantum

/// `x ↦ ρ_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CQChannel {
    states: Vec<CMat>,
}

impl CQChannel {
    pub fn new(states: Vec<CMat>) -> Result<Self> {
        let d = states
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| QwkError::InvalidChannel("cq channel without inputs".into()))?;
        for (x, m) in states.iter().enumerate() {
            if m.nrows() != d {
                return Err(QwkError::InvalidChannel(format!("output {x} has wrong dimension")));
            }
            DensityOperator::on("out", m.clone())
                .map_err(|e| QwkError::InvalidChannel(format!("output {x}: {e}")))?;
        }
        Ok(Self { states })
    }

    pub fn from_densities(states: &[DensityOperator]) -> Result<Self> {
        Self::new(states.iter().map(|s| s.matrix().clone()).collect())
    }

    /// Constant channel with the given output.
    pub fn constant(inputs: usize, state: CMat) -> Result<Self> {
        Self::new(vec![state; inputs])
    }

    pub fn inputs(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].nrows()
    }

    pub fn states(&self) -> &[CMat] {
        &self.states
    }

    pub fn state(&self, x: usize) -> &CMat {
        &self.states[x]
    }

    pub fn apply(&self, x: usize) -> Result<DensityOperator> {
        let m = self
            .states
            .get(x)
            .ok_or_else(|| QwkError::DimensionMismatch(format!("input symbol {x} out of range")))?;
        Ok(DensityOperator::from_parts_unchecked(
            vec![HilbertLabel::new("out", m.nrows())],
            m.clone(),
        ))
    }

    /// `Σ p(x) ρ_x`.
    pub fn average(&self, p: &[f64]) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (px, m) in p.iter().zip(&self.states) {
            if *px != 0.0 {
                out += m * cr(*px);
            }
        }
        out
    }

    /// `ρ_{x₁} ⊗ ⋯ ⊗ ρ_{xₙ}`.
    pub fn word_output(&self, w: &[usize]) -> Result<CMat> {
        let dim = caps::checked_pow("cq output", self.dim(), w.len(), caps::max_dim())?;
        let _ = dim;
        let mut out = CMat::identity(1, 1);
        for &x in w {
            out = kron(&out, &self.states[x]);
        }
        Ok(out)
    }

    pub fn n_fold(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(crate::error::invalid("n", "block length must be positive"));
        }
        caps::checked_pow("cq output", self.dim(), n, caps::max_dim())?;
        let a = caps::checked_pow("cq inputs", self.inputs(), n, caps::MAX_ENUM)?;
        let states = (0..a)
            .map(|i| self.word_output(&index_word(i, self.inputs(), n)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { states })
    }

    /// Measure in the computational basis, then prepare `ρ_x`.
    pub fn to_kraus(&self) -> KrausChannel {
        let a = self.inputs();
        let d = self.dim();
        let mut ops = Vec::new();
        for (x, m) in self.states.iter().enumerate() {
            let es = eigh_unchecked(m);
            for (k, &l) in es.values.iter().enumerate() {
                if l > 1e-14 {
                    let v = es.vectors.column(k).into_owned();
                    let op = &v * ket(a, x).adjoint() * cr(l.sqrt());
                    ops.push(op);
                }
            }
        }
        KrausChannel::new_unchecked(a, d, ops)
    }

    /// True when all outputs are diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.states.iter().all(|m| {
            (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].norm() < 1e-12))
        })
    }
}

// ---------------------------------------------------------------------------
// Quantum channels

/// Operator-sum representation.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    d_in: usize,
    d_out: usize,
    ops: Vec<CMat>,
}

impl KrausChannel {
    pub fn new(ops: Vec<CMat>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| QwkError::InvalidChannel("empty Kraus list".into()))?;
        let (d_out, d_in) = (first.nrows(), first.ncols());
        if ops.iter().any(|a| a.nrows() != d_out || a.ncols() != d_in) {
            return Err(QwkError::InvalidChannel("Kraus operators differ in shape".into()));
        }
        let ch = Self { d_in, d_out, ops };
        let dev = ch.completeness_residual();
        if dev > TOL_RECON {
            return Err(QwkError::InvalidChannel(format!(
                "Σ A*A deviates from identity by {dev:.3e}"
            )));
        }
        Ok(ch)
    }

    pub(crate) fn new_unchecked(d_in: usize, d_out: usize, ops: Vec<CMat>) -> Self {
        Self { d_in, d_out, ops }
    }

    pub fn completeness_residual(&self) -> f64 {
        let mut s = CMat::zeros(self.d_in, self.d_in);
        for a in &self.ops {
            s += a.adjoint() * a;
        }
        (s - identity(self.d_in)).camax()
    }

    pub fn identity(d: usize) -> Self {
        Self::new_unchecked(d, d, vec![identity(d)])
    }

    pub fn unitary(u: CMat) -> Result<Self> {
        Self::new(vec![u])
    }

    /// `ρ ↦ (1-p)ρ + p·tr(ρ) I/d` for a qubit, via the four scaled Paulis.
    pub fn depolarizing(p: f64) -> Self {
        let [i, x, y, z] = paulis();
        let ops = vec![
            i * cr((1.0 - 3.0 * p / 4.0).sqrt()),
            x * cr((p / 4.0).sqrt()),
            y * cr((p / 4.0).sqrt()),
            z * cr((p / 4.0).sqrt()),
        ];
        Self::new_unchecked(2, 2, ops)
    }

    pub fn fully_depolarizing() -> Self {
        Self::depolarizing(1.0)
    }

    pub fn bit_flip(p: f64) -> Self {
        let [i, x, _, _] = paulis();
        Self::new_unchecked(2, 2, vec![i * cr((1.0 - p).sqrt()), x * cr(p.sqrt())])
    }

    pub fn amplitude_damping(gamma: f64) -> Self {
        let mut a0 = CMat::zeros(2, 2);
        a0[(0, 0)] = cr(1.0);
        a0[(1, 1)] = cr((1.0 - gamma).sqrt());
        let mut a1 = CMat::zeros(2, 2);
        a1[(0, 1)] = cr(gamma.sqrt());
        Self::new_unchecked(2, 2, vec![a0, a1])
    }

    /// Apply `u` after the channel.
    pub fn then_unitary(&self, u: &CMat) -> Self {
        Self::new_unchecked(self.d_in, u.nrows(), self.ops.iter().map(|a| u * a).collect())
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn ops(&self) -> &[CMat] {
        &self.ops
    }

    pub fn apply_matrix(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.d_out, self.d_out);
        for a in &self.ops {
            out += a * rho * a.adjoint();
        }
        out
    }

    /// Heisenberg-picture map `M ↦ Σ A* M A`.
    pub fn adjoint_apply(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(self.d_in, self.d_in);
        for a in &self.ops {
            out += a.adjoint() * m * a;
        }
        out
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.d_in {
            return Err(QwkError::DimensionMismatch(format!(
                "channel input dimension {} vs state dimension {}",
                self.d_in,
                rho.dim()
            )));
        }
        Ok(DensityOperator::from_parts_unchecked(
            vec![HilbertLabel::new("out", self.d_out)],
            self.apply_matrix(rho.matrix()),
        ))
    }

    /// Choi matrix `Σ |i⟩⟨j| ⊗ N(|i⟩⟨j|)` on `in ⊗ out`.
    pub fn choi(&self) -> CMat {
        let (di, dout) = (self.d_in, self.d_out);
        let mut j = CMat::zeros(di * dout, di * dout);
        for a in &self.ops {
            // vec(A) with (i, o) ↦ i*dout + o
            let mut v = nalgebra::DVector::zeros(di * dout);
            for i in 0..di {
                for o in 0..dout {
                    v[i * dout + o] = a[(o, i)];
                }
            }
            j += &v * v.adjoint();
        }
        j
    }

    /// Kraus form of a PSD Choi matrix on `in ⊗ out`.
    pub fn from_choi(choi: &CMat, d_in: usize, d_out: usize) -> Self {
        let es = eigh_unchecked(choi);
        let mut ops = Vec::new();
        for (k, &l) in es.values.iter().enumerate() {
            if l <= 1e-13 {
                continue;
            }
            let v = es.vectors.column(k);
            let mut a = CMat::zeros(d_out, d_in);
            for i in 0..d_in {
                for o in 0..d_out {
                    a[(o, i)] = v[i * d_out + o] * cr(l.sqrt());
                }
            }
            ops.push(a);
        }
        if ops.is_empty() {
            ops.push(CMat::zeros(d_out, d_in));
        }
        Self::new_unchecked(d_in, d_out, ops)
    }

    pub fn n_fold(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(crate::error::invalid("n", "block length must be positive"));
        }
        caps::checked_pow("n-fold input", self.d_in, n, caps::max_dim())?;
        caps::checked_pow("n-fold output", self.d_out, n, caps::max_dim())?;
        caps::checked_pow("n-fold Kraus rank", self.ops.len(), n, caps::max_dim())?;
        let mut ops = vec![CMat::identity(1, 1)];
        for _ in 0..n {
            let mut next = Vec::with_capacity(ops.len() * self.ops.len());
            for a in &ops {
                for b in &self.ops {
                    next.push(kron(a, b));
                }
            }
            ops = next;
        }
        Ok(Self::new_unchecked(
            self.d_in.pow(n as u32),
            self.d_out.pow(n as u32),
            ops,
        ))
    }

    /// Pad with zero operators up to `k` entries.
    pub fn padded(&self, k: usize) -> Self {
        let mut ops = self.ops.clone();
        while ops.len() < k {
            ops.push(CMat::zeros(self.d_out, self.d_in));
        }
        Self::new_unchecked(self.d_in, self.d_out, ops)
    }
}

pub(crate) fn paulis() -> [CMat; 4] {
    let i = identity(2);
    let x = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
    let y = CMat::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)]);
    let z = CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]);
    [i, x, y, z]
}

/// Isometry `in → out ⊗ env`.
#[derive(Debug, Clone, PartialEq)]
pub struct StinespringIsometry {
    d_in: usize,
    d_out: usize,
    d_env: usize,
    iso: CMat,
}

impl StinespringIsometry {
    pub fn new(iso: CMat, d_out: usize, d_env: usize) -> Result<Self> {
        if iso.nrows() != d_out * d_env {
            return Err(QwkError::DimensionMismatch(format!(
                "isometry has {} rows, expected {}",
                iso.nrows(),
                d_out * d_env
            )));
        }
        let d_in = iso.ncols();
        if d_env > d_in * d_out.max(d_in) {
            return Err(QwkError::InvalidChannel(format!(
                "environment dimension {d_env} exceeds the minimal dilation bound"
            )));
        }
        let res = (iso.adjoint() * &iso - identity(d_in)).camax();
        if res > TOL_RECON {
            return Err(QwkError::InvalidChannel(format!("U*U deviates from identity by {res:.3e}")));
        }
        Ok(Self { d_in, d_out, d_env, iso })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_env(&self) -> usize {
        self.d_env
    }

    pub fn matrix(&self) -> &CMat {
        &self.iso
    }

    /// Joint output `U ρ U*` on `out ⊗ env`.
    pub fn apply_joint(&self, rho: &CMat) -> CMat {
        &self.iso * rho * self.iso.adjoint()
    }

    pub fn apply_matrix(&self, rho: &CMat) -> CMat {
        partial_trace_matrix(&self.apply_joint(rho), &[self.d_out, self.d_env], &[0])
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.d_in {
            return Err(QwkError::DimensionMismatch("isometry input".into()));
        }
        Ok(DensityOperator::from_parts_unchecked(
            vec![HilbertLabel::new("out", self.d_out)],
            self.apply_matrix(rho.matrix()),
        ))
    }

    pub fn unitarity_residual(&self) -> f64 {
        (self.iso.adjoint() * &self.iso - identity(self.d_in)).camax()
    }
}

/// `U = Σ_j A_j ⊗ |j⟩`.
pub fn kraus_to_stinespring(k: &KrausChannel) -> StinespringIsometry {
    let de = k.ops.len();
    let mut iso = CMat::zeros(k.d_out * de, k.d_in);
    for (j, a) in k.ops.iter().enumerate() {
        for o in 0..k.d_out {
            for i in 0..k.d_in {
                iso[(o * de + j, i)] = a[(o, i)];
            }
        }
    }
    StinespringIsometry {
        d_in: k.d_in,
        d_out: k.d_out,
        d_env: de,
        iso,
    }
}

/// `A_j = (id ⊗ ⟨j|) U`.
pub fn stinespring_to_kraus(s: &StinespringIsometry) -> KrausChannel {
    let ops = (0..s.d_env)
        .map(|j| CMat::from_fn(s.d_out, s.d_in, |o, i| s.iso[(o * s.d_env + j, i)]))
        .collect();
    KrausChannel::new_unchecked(s.d_in, s.d_out, ops)
}

/// Channel with `k` Kraus operators cut from a Haar unitary on `d·k`.
pub fn random_kraus<R: rand::Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> KrausChannel {
    let u = crate::qcore::random::unitary(d * k, rng);
    let iso = u.columns(0, d).into_owned();
    stinespring_to_kraus(&StinespringIsometry { d_in: d, d_out: d, d_env: k, iso })
}

/// The map to the environment, `ρ ↦ tr_out(U ρ U*)`.
pub fn complementary_channel(s: &StinespringIsometry) -> KrausChannel {
    let ops = (0..s.d_out)
        .map(|o| CMat::from_fn(s.d_env, s.d_in, |e, i| s.iso[(o * s.d_env + e, i)]))
        .collect();
    KrausChannel::new_unchecked(s.d_in, s.d_env, ops)
}

/// Two Kraus lists describe the same channel iff (after zero padding) they
/// are related by a unitary mixing, equivalently iff their Choi matrices agree.
pub fn kraus_equivalent(k1: &KrausChannel, k2: &KrausChannel) -> Result<bool> {
    if k1.d_in != k2.d_in || k1.d_out != k2.d_out {
        return Err(QwkError::DimensionMismatch(format!(
            "channels {}→{} and {}→{}",
            k1.d_in, k1.d_out, k2.d_in, k2.d_out
        )));
    }
    let k = k1.ops.len().max(k2.ops.len());
    let (a, b) = (k1.padded(k), k2.padded(k));
    Ok((a.choi() - b.choi()).camax() <= TOL_RECON)
}

// ---------------------------------------------------------------------------
// Unified channel object

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Classical(ClassicalChannel),
    CQ(CQChannel),
    Kraus(KrausChannel),
    Stinespring(StinespringIsometry),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelInput {
    Word(Vec<usize>),
    State(CMat),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelOutput {
    Distribution(Vec<f64>),
    State(DensityOperator),
}

impl Channel {
    pub fn kind(&self) -> &'static str {
        match self {
            Channel::Classical(_) => "stochastic",
            Channel::CQ(_) => "cq",
            Channel::Kraus(_) => "kraus",
            Channel::Stinespring(_) => "stinespring",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, Channel::Kraus(_) | Channel::Stinespring(_))
    }

    /// Size of the classical input alphabet, or the input dimension.
    pub fn input_size(&self) -> usize {
        match self {
            Channel::Classical(c) => c.inputs(),
            Channel::CQ(c) => c.inputs(),
            Channel::Kraus(k) => k.d_in,
            Channel::Stinespring(s) => s.d_in,
        }
    }

    pub fn to_kraus(&self) -> KrausChannel {
        match self {
            Channel::Classical(c) => c.to_kraus(),
            Channel::CQ(c) => c.to_kraus(),
            Channel::Kraus(k) => k.clone(),
            Channel::Stinespring(s) => stinespring_to_kraus(s),
        }
    }

    /// cq view: classical channels as diagonal states.
    pub fn as_cq(&self) -> Option<CQChannel> {
        match self {
            Channel::Classical(c) => Some(c.to_cq()),
            Channel::CQ(c) => Some(c.clone()),
            _ => None,
        }
    }
}

pub fn apply_channel(ch: &Channel, input: &ChannelInput) -> Result<ChannelOutput> {
    match (ch, input) {
        (Channel::Classical(c), ChannelInput::Word(w)) => {
            check_word(w, c.inputs())?;
            Ok(ChannelOutput::Distribution(c.apply_word(w)?))
        }
        (Channel::CQ(c), ChannelInput::Word(w)) => {
            check_word(w, c.inputs())?;
            let m = c.word_output(w)?;
            let d = m.nrows();
            Ok(ChannelOutput::State(DensityOperator::from_parts_unchecked(
                vec![HilbertLabel::new("out", d)],
                m,
            )))
        }
        (Channel::Kraus(_) | Channel::Stinespring(_), ChannelInput::State(rho)) => {
            let k = ch.to_kraus();
            let d = k.d_in;
            let n = power_of(rho.nrows(), d).ok_or_else(|| {
                QwkError::DimensionMismatch(format!(
                    "state dimension {} is not a power of {d}",
                    rho.nrows()
                ))
            })?;
            let kn = if n == 1 { k } else { k.n_fold(n)? };
            let out = kn.apply_matrix(rho);
            let dout = out.nrows();
            Ok(ChannelOutput::State(DensityOperator::from_parts_unchecked(
                vec![HilbertLabel::new("out", dout)],
                out,
            )))
        }
        _ => Err(QwkError::DimensionMismatch(format!(
            "{} channel cannot take this input kind",
            ch.kind()
        ))),
    }
}

fn check_word(w: &[usize], a: usize) -> Result<()> {
    if w.is_empty() || w.iter().any(|&x| x >= a) {
        return Err(QwkError::DimensionMismatch(format!("word {w:?} not over alphabet of size {a}")));
    }
    Ok(())
}

fn power_of(value: usize, base: usize) -> Option<usize> {
    if base == 1 {
        return (value == 1).then_some(1);
    }
    let mut acc = base;
    for n in 1..64 {
        if acc == value {
            return Some(n);
        }
        if acc > value {
            return None;
        }
        acc = acc.checked_mul(base)?;
    }
    None
}

pub fn n_fold(ch: &Channel, n: usize) -> Result<Channel> {
    Ok(match ch {
        Channel::Classical(c) => Channel::Classical(c.n_fold(n)?),
        Channel::CQ(c) => Channel::CQ(c.n_fold(n)?),
        Channel::Kraus(k) => Channel::Kraus(k.n_fold(n)?),
        Channel::Stinespring(s) => {
            Channel::Stinespring(kraus_to_stinespring(&stinespring_to_kraus(s).n_fold(n)?))
        }
    })
}

// ---------------------------------------------------------------------------
// Compound wiretap family

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Classical legitimate and classical wiretap channels.
    Classical,
    /// Classical legitimate channel, cq wiretapper.
    ClassicalQuantumWiretap,
    /// cq legitimate channel and cq wiretapper.
    Cq,
    /// Quantum channels on both sides.
    Quantum,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Classical => "classical",
            Variant::ClassicalQuantumWiretap => "classical_quantum_wiretap",
            Variant::Cq => "cq",
            Variant::Quantum => "quantum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WiretapPair {
    pub name: String,
    pub legit: Channel,
    pub wiretap: Channel,
}

/// `{(W_t, V_t) : t ∈ θ}` with a common input.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundWiretapSpec {
    variant: Variant,
    pairs: Vec<WiretapPair>,
}

impl CompoundWiretapSpec {
    pub fn new(variant: Variant, pairs: Vec<WiretapPair>) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| QwkError::Schema("theta must be non-empty".into()))?;
        let inputs = first.legit.input_size();
        for p in &pairs {
            let ok = match variant {
                Variant::Classical => {
                    matches!(p.legit, Channel::Classical(_)) && matches!(p.wiretap, Channel::Classical(_))
                }
                Variant::ClassicalQuantumWiretap => {
                    matches!(p.legit, Channel::Classical(_)) && matches!(p.wiretap, Channel::CQ(_))
                }
                Variant::Cq => {
                    !p.legit.is_quantum() && !p.wiretap.is_quantum()
                }
                Variant::Quantum => p.legit.is_quantum() && p.wiretap.is_quantum(),
            };
            if !ok {
                return Err(QwkError::VariantMismatch(format!(
                    "state `{}` has ({}, {}) channels, not allowed for variant {}",
                    p.name,
                    p.legit.kind(),
                    p.wiretap.kind(),
                    variant.as_str()
                )));
            }
            if p.legit.input_size() != inputs || p.wiretap.input_size() != inputs {
                return Err(QwkError::DimensionMismatch(format!(
                    "state `{}` does not share the common input of size {inputs}",
                    p.name
                )));
            }
        }
        Ok(Self { variant, pairs })
    }

    /// Classical compound wiretap family from (W_t, V_t) pairs.
    pub fn classical(pairs: Vec<(ClassicalChannel, ClassicalChannel)>) -> Result<Self> {
        Self::new(
            Variant::Classical,
            pairs
                .into_iter()
                .enumerate()
                .map(|(t, (w, v))| WiretapPair {
                    name: format!("t{t}"),
                    legit: Channel::Classical(w),
                    wiretap: Channel::Classical(v),
                })
                .collect(),
        )
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn pairs(&self) -> &[WiretapPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn inputs(&self) -> usize {
        self.pairs[0].legit.input_size()
    }

    /// Drop to a sub-family (used for θ-monotonicity checks).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(self.variant, idx.iter().map(|&i| self.pairs[i].clone()).collect())
    }

    pub fn with_pair(&self, pair: WiretapPair) -> Result<Self> {
        let mut pairs = self.pairs.clone();
        pairs.push(pair);
        Self::new(self.variant, pairs)
    }
}
